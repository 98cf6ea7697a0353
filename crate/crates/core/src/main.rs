fn main() {
    std::process::exit(seroclass::cli::main_with_args(std::env::args_os()));
}
