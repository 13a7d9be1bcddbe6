fn main() {
    std::process::exit(qrobust::cli::run(std::env::args_os()));
}
