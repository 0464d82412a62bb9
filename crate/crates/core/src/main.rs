fn main() {
    std::process::exit(heston_condvar::cli::main_with_args(std::env::args_os()));
}
