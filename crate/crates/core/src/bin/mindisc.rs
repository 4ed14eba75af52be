fn main() {
    std::process::exit(mindisc::cli::main_with_args(std::env::args_os()));
}
