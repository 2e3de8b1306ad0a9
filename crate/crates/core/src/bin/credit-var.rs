fn main() {
    std::process::exit(credit_var::cli::main_with_args(std::env::args_os()));
}
