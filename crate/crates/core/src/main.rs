fn main() {
    std::process::exit(qgcode::cli::run(std::env::args_os()));
}
