fn main() {
    std::process::exit(ggrf_cli::run(std::env::args_os()));
}
