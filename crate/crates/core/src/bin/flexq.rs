fn main() {
    std::process::exit(flexq::cli::main_with_args(std::env::args_os()));
}
