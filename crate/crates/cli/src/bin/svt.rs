fn main() {
    std::process::exit(svt_cli::run_svt(std::env::args_os()));
}
