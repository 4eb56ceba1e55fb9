//! Dataset ingestion and synthesis.
//!
//! Samples are always columns: a dataset with `N` samples of `M` features is
//! an `M x N` matrix.
//!
//! On-disk conventions:
//! - matrices use the text format of [`Matrix::to_text`];
//! - label files hold one integer per line, aligned with the columns of `X`;
//! - a dataset directory holds `X.mat` and optionally `labels.txt`, or one
//!   subdirectory per class of binary PGM (P5) images.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::matrix::{Matrix, NonnegMatrix};

pub const MATRIX_FILE: &str = "X.mat";
pub const LABELS_FILE: &str = "labels.txt";

#[derive(Clone, Debug)]
pub struct Dataset {
    pub x: NonnegMatrix,
    pub labels: Option<Vec<usize>>,
    pub name: String,
}

impl Dataset {
    pub fn new(x: NonnegMatrix, labels: Option<Vec<usize>>, name: impl Into<String>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != x.cols() {
                return Err(Error::InvalidInput(format!(
                    "{} labels for {} samples",
                    l.len(),
                    x.cols()
                )));
            }
        }
        Ok(Dataset {
            x,
            labels,
            name: name.into(),
        })
    }

    pub fn n_samples(&self) -> usize {
        self.x.cols()
    }

    /// Number of distinct ground-truth classes, if labels are present.
    pub fn n_classes(&self) -> Option<usize> {
        self.labels.as_ref().map(|l| {
            let mut v = l.clone();
            v.sort_unstable();
            v.dedup();
            v.len()
        })
    }

    /// Loads a dataset directory (see module docs) or a bare matrix file.
    /// `image_side` is used only for image directories.
    pub fn load(path: &Path, image_side: usize) -> Result<Self> {
        let name = path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        if path.is_file() {
            let x = load_matrix(path)?;
            let labels_path = path.with_file_name(LABELS_FILE);
            let labels = if labels_path.is_file() {
                Some(load_labels(&labels_path)?)
            } else {
                None
            };
            return Dataset::new(x, labels, name).map_err(|e| Error::data(path, e.to_string()));
        }
        if !path.is_dir() {
            return Err(Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "dataset not found"),
            ));
        }
        let matrix_path = path.join(MATRIX_FILE);
        if matrix_path.is_file() {
            let x = load_matrix(&matrix_path)?;
            let labels_path = path.join(LABELS_FILE);
            let labels = if labels_path.is_file() {
                Some(load_labels(&labels_path)?)
            } else {
                None
            };
            return Dataset::new(x, labels, name).map_err(|e| Error::data(path, e.to_string()));
        }
        load_image_dataset(path, image_side)
    }

    /// Writes `X.mat` and, when labels exist, `labels.txt` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        save_matrix(&dir.join(MATRIX_FILE), &self.x)?;
        if let Some(l) = &self.labels {
            save_labels(&dir.join(LABELS_FILE), l)?;
        }
        Ok(())
    }
}

/// Reads any finite matrix in the text format.
pub fn load_real_matrix(path: &Path) -> Result<Matrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Matrix::parse_text(&text).map_err(|msg| Error::data(path, msg))
}

/// Reads a matrix and rejects negative entries.
pub fn load_matrix(path: &Path) -> Result<NonnegMatrix> {
    let m = load_real_matrix(path)?;
    if let Some(pos) = m.data().iter().position(|&v| v < 0.0) {
        let cols = m.cols().max(1);
        return Err(Error::data(
            path,
            format!("negative entry at ({}, {})", pos / cols, pos % cols),
        ));
    }
    NonnegMatrix::new(m).map_err(|e| Error::data(path, e.to_string()))
}

pub fn save_matrix(path: &Path, m: &Matrix) -> Result<()> {
    fs::write(path, m.to_text()).map_err(|e| Error::io(path, e))
}

pub fn load_labels(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<usize>()
                .map_err(|_| Error::data(path, format!("line {}: bad label `{}`", i + 1, l.trim())))
        })
        .collect()
}

pub fn save_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut s = String::with_capacity(labels.len() * 3);
    for l in labels {
        s.push_str(&l.to_string());
        s.push('\n');
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Decoded 8-bit grayscale image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u8,
    pub pixels: Vec<u8>,
}

/// Parses a binary PGM (P5) file with `maxval <= 255`.
pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes).map_err(|msg| Error::data(path, msg))
}

fn parse_pgm(bytes: &[u8]) -> std::result::Result<GrayImage, String> {
    let mut pos = 0;
    let mut header = Vec::with_capacity(4);
    while header.len() < 4 {
        // whitespace and comments between header tokens
        while pos < bytes.len() {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else if bytes[pos].is_ascii_whitespace() {
                pos += 1;
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err("truncated PGM header".into());
        }
        header.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if header[0] != "P5" {
        return Err(format!("expected binary PGM magic `P5`, found `{}`", header[0]));
    }
    let parse = |s: &str, what: &str| {
        s.parse::<usize>()
            .map_err(|_| format!("bad {what} `{s}` in PGM header"))
    };
    let width = parse(&header[1], "width")?;
    let height = parse(&header[2], "height")?;
    let maxval = parse(&header[3], "maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(format!("maxval {maxval} unsupported; only 8-bit images"));
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err("missing raster".into());
    }
    pos += 1;
    let n = width * height;
    if bytes.len() - pos < n {
        return Err(format!(
            "raster has {} bytes, expected {n}",
            bytes.len() - pos
        ));
    }
    Ok(GrayImage {
        width,
        height,
        maxval: maxval as u8,
        pixels: bytes[pos..pos + n].to_vec(),
    })
}

pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<()> {
    let mut out = format!("P5\n{} {}\n{}\n", img.width, img.height, img.maxval).into_bytes();
    out.extend_from_slice(&img.pixels);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    v.sort();
    Ok(v)
}

/// Loads `dir/<class>/<image>.pgm` into a `side² x N` matrix with pixel
/// values scaled to `[0, 1]`. Classes are numbered in sorted directory
/// order; images within a class are taken in sorted file-name order.
pub fn load_image_dataset(dir: &Path, side: usize) -> Result<Dataset> {
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    let classes: Vec<PathBuf> = sorted_entries(dir)?
        .into_iter()
        .filter(|p| p.is_dir())
        .collect();
    for (class, class_dir) in classes.iter().enumerate() {
        for file in sorted_entries(class_dir)? {
            let is_pgm = file
                .extension()
                .map(|e| e.eq_ignore_ascii_case("pgm"))
                .unwrap_or(false);
            if !file.is_file() || !is_pgm {
                continue;
            }
            let img = read_pgm(&file)?;
            if img.width != side || img.height != side {
                return Err(Error::data(
                    &file,
                    format!("image is {}x{}, expected {side}x{side}", img.width, img.height),
                ));
            }
            let scale = 1.0 / f64::from(img.maxval);
            columns.push(img.pixels.iter().map(|&p| f64::from(p) * scale).collect());
            labels.push(class);
        }
    }
    if columns.is_empty() {
        return Err(Error::data(dir, "no PGM images found in class subdirectories"));
    }
    let m = side * side;
    let x = Matrix::from_fn(m, columns.len(), |i, j| columns[j][i]);
    let name = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Dataset::new(NonnegMatrix::new(x)?, Some(labels), name)
}

/// Matrix with entries uniform on `(0, 1]`, reproducible per seed.
pub fn uniform_matrix(rows: usize, cols: usize, seed: u64) -> NonnegMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    crate::nmf::positive_uniform(rows, cols, 0.0, &mut rng)
}

/// Clustered data `X = W* H*ᵀ + noise·|N(0,1)|`.
///
/// `H*` (N x k) has one nonzero per row, so its columns are orthogonal and
/// the nonzero pattern gives the labels. Samples of cluster `c` are the
/// contiguous columns `c*n_per .. (c+1)*n_per`. `W*` (m x k) puts a strong
/// block of `m / k` features on each cluster over a weak positive
/// background.
pub fn synth_planted(k: usize, n_per: usize, m: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if k == 0 || n_per == 0 {
        return Err(Error::Config("k and n_per must be positive".into()));
    }
    if k > m {
        return Err(Error::Config(format!(
            "{k} feature blocks do not fit in {m} features"
        )));
    }
    if !(noise >= 0.0) || !noise.is_finite() {
        return Err(Error::Config(format!("noise must be finite and >= 0, got {noise}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let block = m / k;
    let n = k * n_per;
    let w = Matrix::from_fn(m, k, |i, c| {
        let background = 0.05 * rng.random::<f64>();
        if i / block == c {
            background + 0.5 + 0.5 * rng.random::<f64>()
        } else {
            background
        }
    });
    let h = Matrix::from_fn(n, k, |j, c| {
        if j / n_per == c {
            0.5 + rng.random::<f64>()
        } else {
            0.0
        }
    });
    let mut x = w.matmul_t(&h)?;
    if noise > 0.0 {
        for i in 0..m {
            for v in x.row_mut(i) {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v += noise * z.abs();
            }
        }
    }
    let labels = (0..n).map(|j| j / n_per).collect();
    Dataset::new(
        NonnegMatrix::new(x)?,
        Some(labels),
        format!("planted-k{k}-n{n_per}-m{m}"),
    )
}
