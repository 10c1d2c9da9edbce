fn main() {
    std::process::exit(carnet::cli::main_with_args(std::env::args_os()));
}
