fn main() {
    std::process::exit(fecim_cli::main_with(std::env::args_os()));
}
