fn main() {
    std::process::exit(mfbo_bench::cli::main_with_args(std::env::args_os()));
}
