fn main() {
    std::process::exit(morpho_leakage::cli::main_with_args(std::env::args_os()));
}
