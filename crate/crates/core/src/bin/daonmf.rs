fn main() {
    std::process::exit(daonmf::cli::main_with_args(std::env::args_os()));
}
