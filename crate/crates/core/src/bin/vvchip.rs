fn main() {
    std::process::exit(vvchip::cli::main_with_args(std::env::args_os()));
}
