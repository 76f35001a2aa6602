fn main() {
    std::process::exit(geoembed_cli::run_cli(std::env::args_os()));
}
