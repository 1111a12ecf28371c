fn main() {
    std::process::exit(pgnn::cli::main_with_args(std::env::args_os()));
}
