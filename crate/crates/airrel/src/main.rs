fn main() {
    std::process::exit(airrel::cli::main_with_args(std::env::args_os()));
}
