fn main() {
    std::process::exit(discrete_hawkes::cli::run_from_args(std::env::args_os()));
}
