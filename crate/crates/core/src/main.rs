fn main() {
    std::process::exit(tgarma_core::cli::main_with(std::env::args_os()));
}
