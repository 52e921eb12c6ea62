fn main() {
    std::process::exit(otrom::cli::main_with_args(std::env::args_os()));
}
