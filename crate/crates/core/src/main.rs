fn main() {
    std::process::exit(renewal_exponents::cli::main_with_args(std::env::args_os()));
}
