mod common;

use common::*;
use daonmf::deep::{
    load_model, mid_layer_gradient, mid_layer_objective, pretrain, save_model, update_h_last,
    update_h_mid, update_w1,
};
use daonmf::nmf::DEFAULT_EPSILON;
use daonmf::{
    aonmf_fit, deep_cost, kmeans, synth_planted, train, AonmfConfig, DeepConfig, DeepModel,
    KMeansConfig, LayerSpec, Matrix, NonnegMatrix, PenaltyForm,
};

/// Central-difference gradient of `f` at every entry of `H_layer`.
fn numeric_gradient(model: &DeepModel, layer: usize, f: impl Fn(&DeepModel) -> f64) -> Matrix {
    let h = model.hs[layer - 1].as_matrix().clone();
    Matrix::from_fn(h.rows(), h.cols(), |i, j| {
        let step = 1e-6 * h.get(i, j).abs().max(1e-3);
        let eval = |delta: f64| {
            let mut m = model.clone();
            let mut perturbed = h.clone();
            perturbed.set(i, j, h.get(i, j) + delta);
            m.hs[layer - 1] = NonnegMatrix::new(perturbed).unwrap();
            f(&m)
        };
        (eval(step) - eval(-step)) / (2.0 * step)
    })
}

#[test]
fn mid_layer_gradient_matches_finite_differences_for_both_penalty_forms() {
    let mut rng = rng(21);
    for form in [PenaltyForm::Objective, PenaltyForm::AllPairs] {
        for case in 0..10 {
            let model = random_model(6, 5, &[2, 3], &[0.7, 0.4], &mut rng);
            let x = random(6, 5, 0.0, 1.0, &mut rng);
            let analytic = mid_layer_gradient(&x, &model, 1, form).unwrap();
            let numeric =
                numeric_gradient(&model, 1, |m| mid_layer_objective(&x, m, 1, form).unwrap());
            let scale = numeric.max_abs().max(1e-8);
            let err = analytic.sub(&numeric).unwrap().max_abs() / scale;
            assert!(err < 1e-5, "{form} case {case}: relative error {err}");
        }
    }
}

#[test]
fn objective_form_gradient_is_the_gradient_of_deep_cost() {
    let mut rng = rng(22);
    let model = random_model(7, 6, &[2, 3, 4], &[0.3, 0.8, 0.2], &mut rng);
    let x = random(7, 6, 0.0, 1.0, &mut rng);
    for layer in 1..=2 {
        let analytic = mid_layer_gradient(&x, &model, layer, PenaltyForm::Objective).unwrap();
        let numeric = numeric_gradient(&model, layer, |m| deep_cost(&x, m).unwrap());
        let err = analytic.sub(&numeric).unwrap().max_abs() / numeric.max_abs();
        assert!(err < 1e-5, "layer {layer}: {err}");
    }
}

#[test]
fn single_column_mid_layer_has_no_penalty_gradient() {
    let mut rng = rng(23);
    let model = random_model(5, 4, &[1, 2], &[5.0, 0.0], &mut rng);
    let x = random(5, 4, 0.0, 1.0, &mut rng);
    let mut free = model.clone();
    free.spec = LayerSpec::new(vec![1, 2], vec![0.0, 0.0]).unwrap();
    let with = mid_layer_gradient(&x, &model, 1, PenaltyForm::Objective).unwrap();
    let without = mid_layer_gradient(&x, &free, 1, PenaltyForm::Objective).unwrap();
    assert_eq!(with, without);
}

#[test]
fn updates_do_not_raise_their_objectives() {
    let mut rng = rng(24);
    for _ in 0..20 {
        let model = random_model(8, 6, &[2, 4], &[0.5, 0.5], &mut rng);
        let x = random(8, 6, 0.0, 1.0, &mut rng);

        let mut m = model.clone();
        m.w1 = update_w1(&x, &model, DEFAULT_EPSILON).unwrap();
        assert!(deep_cost(&x, &m).unwrap() <= deep_cost(&x, &model).unwrap() * (1.0 + 1e-12));

        let before = mid_layer_objective(&x, &model, 1, PenaltyForm::Objective).unwrap();
        let mut m = model.clone();
        m.hs[0] = update_h_mid(&x, &model, 1, PenaltyForm::Objective, DEFAULT_EPSILON).unwrap();
        let after = mid_layer_objective(&x, &m, 1, PenaltyForm::Objective).unwrap();
        assert!(after <= before * (1.0 + 1e-12), "{before} -> {after}");

        let mut m = model.clone();
        m.hs[1] = update_h_last(&x, &model, DEFAULT_EPSILON).unwrap();
        assert!(deep_cost(&x, &m).unwrap() <= deep_cost(&x, &model).unwrap() * (1.0 + 1e-12));
    }
}

#[test]
fn exact_fit_is_a_fixed_point_of_the_multiplicative_rules() {
    let mut rng = rng(25);
    for _ in 0..10 {
        let model = random_model(7, 6, &[2, 3], &[0.0, 0.0], &mut rng);
        let x = model.reconstruct().unwrap();
        let w1 = update_w1(&x, &model, DEFAULT_EPSILON).unwrap();
        assert!(max_rel_diff(w1.data(), model.w1.data(), 1e-300) < 1e-10);
        let h1 = update_h_mid(&x, &model, 1, PenaltyForm::Objective, DEFAULT_EPSILON).unwrap();
        assert!(max_rel_diff(h1.data(), model.hs[0].data(), 1e-300) < 1e-10);
    }
}

#[test]
fn planted_orthonormal_last_layer_barely_moves() {
    let mut rng = rng(26);
    let (x, w, h) = planted_orthogonal(12, 3, 5, &mut rng);
    let model = DeepModel::from_factors(
        NonnegMatrix::new(w).unwrap(),
        vec![NonnegMatrix::new(h.clone()).unwrap()],
        vec![1e-3],
    )
    .unwrap();
    let moved = update_h_last(&x, &model, DEFAULT_EPSILON).unwrap();
    assert!(moved.sub(&h).unwrap().max_abs() < 1e-6);
}

#[test]
fn degenerate_basis_column_is_surfaced_and_training_survives() {
    let mut rng = rng(27);
    let mut model = random_model(6, 8, &[3], &[0.1], &mut rng);
    let x = random(6, 8, 0.0, 1.0, &mut rng);
    let mut w = model.w1.as_matrix().clone();
    w.set_column(1, &[0.0; 6]).unwrap();
    model.w1 = NonnegMatrix::new(w).unwrap();
    assert!(matches!(
        update_h_last(&x, &model, DEFAULT_EPSILON),
        Err(daonmf::Error::DegenerateColumn { column: 1 })
    ));
    let x = NonnegMatrix::new(x).unwrap();
    let cfg = DeepConfig { max_iters: 5, ..DeepConfig::default() };
    daonmf::deep::fine_tune(&x, &mut model, &cfg).unwrap();
    assert!(model.reinits >= 1);
    assert!(model.w1.column_norms()[1] > 0.0);
}

#[test]
fn pretrain_shapes_follow_the_chain() {
    let x = synth_planted(3, 10, 20, 0.05, 1).unwrap().x;
    let x = NonnegMatrix::new(Matrix::from_fn(20, 40, |i, j| x.get(i, j % 30))).unwrap();
    let spec = LayerSpec::new(vec![3, 5], vec![0.0]).unwrap();
    let model = pretrain(&x, &spec, &DeepConfig::default()).unwrap();
    assert_eq!(model.w1.shape(), (20, 3));
    assert_eq!(model.hs[0].shape(), (5, 3));
    assert_eq!(model.hs[1].shape(), (40, 5));
}

#[test]
fn infeasible_layer_names_the_layer() {
    let x = synth_planted(2, 5, 6, 0.0, 1).unwrap().x;
    let spec = LayerSpec::new(vec![8, 4], vec![0.0]).unwrap();
    let err = pretrain(&x, &spec, &DeepConfig::default()).unwrap_err();
    assert!(err.to_string().contains("layer 1"), "{err}");
}

#[test]
fn trained_model_has_unit_last_layer_and_descending_trace() {
    for seed in 0..3 {
        let x = daonmf::data::uniform_matrix(20, 25, 300 + seed);
        let spec = LayerSpec::new(vec![3, 5], vec![0.05]).unwrap();
        let cfg = DeepConfig {
            seed,
            max_iters: 50,
            tol: 0.0,
            record_steps: true,
            ..DeepConfig::default()
        };
        let model = train(&x, &spec, &cfg).unwrap();
        assert_eq!(model.iters_run, 50);
        for n in model.h_last().column_norms() {
            assert!((n - 1.0).abs() < 1e-12);
        }
        for pair in model.cost_trace.windows(2) {
            assert!(pair[1] <= pair[0] * (1.0 + 1e-6));
        }
        for pass in &model.passes {
            let mut prev = pass.start;
            for &s in &pass.steps {
                assert!(s <= prev * (1.0 + 1e-9));
                prev = s;
            }
        }
        assert!(model.w1.is_nonneg() && model.hs.iter().all(|h| h.is_nonneg()));
    }
}

#[test]
fn single_layer_pretraining_is_aonmf() {
    let ds = synth_planted(4, 6, 20, 0.05, 3).unwrap();
    let spec = LayerSpec::new(vec![4], vec![0.2]).unwrap();
    let cfg = DeepConfig { seed: 9, ..DeepConfig::default() };
    let model = pretrain(&ds.x, &spec, &cfg).unwrap();
    let mut acfg = AonmfConfig::new(4, 0.2);
    acfg.seed = 9;
    acfg.max_iters = cfg.pretrain_iters;
    acfg.tol = cfg.pretrain_tol;
    let res = aonmf_fit(&ds.x, &acfg).unwrap();
    assert_eq!(model.w1, res.w);
    assert_eq!(model.hs[0], res.h);
}

#[test]
fn planted_clusters_are_recovered() {
    let ds = synth_planted(4, 15, 24, 0.05, 4).unwrap();
    let spec = LayerSpec::new(vec![6, 8], vec![1e-6, 1e-5]).unwrap();
    let model = train(&ds.x, &spec, &DeepConfig { seed: 4, ..DeepConfig::default() }).unwrap();
    let features = model.h_last().normalize_columns();
    let pred = kmeans(&features, &KMeansConfig::new(4, 4)).unwrap().labels;
    let acc = daonmf::clustering_accuracy(&pred, ds.labels.as_ref().unwrap()).unwrap();
    assert!(acc >= 0.9, "acc {acc}");
}

#[test]
fn model_directory_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = rng(28);
    let model = random_model(5, 7, &[2, 3], &[1e-6, 0.5], &mut rng);
    save_model(dir.path(), &model, 1.25).unwrap();
    let back = load_model(dir.path()).unwrap();
    assert_eq!(back.w1, model.w1);
    assert_eq!(back.hs, model.hs);
    assert_eq!(back.spec, model.spec);
    let meta = std::fs::read_to_string(dir.path().join("meta")).unwrap();
    assert!(meta.contains("layers 2") && meta.contains("sizes 2 3"));
}
