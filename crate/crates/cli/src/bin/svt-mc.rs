fn main() {
    std::process::exit(svt_cli::run_mc(std::env::args_os()));
}
