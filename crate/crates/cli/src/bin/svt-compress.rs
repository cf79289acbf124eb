fn main() {
    std::process::exit(svt_cli::run_compress(std::env::args_os()));
}
