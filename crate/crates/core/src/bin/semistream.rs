fn main() {
    std::process::exit(semistream::cli::main_with(std::env::args_os()));
}
