fn main() {
    std::process::exit(rbmci::cli::main_with_args(std::env::args_os()));
}
