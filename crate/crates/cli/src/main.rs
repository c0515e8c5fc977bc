fn main() {
    std::process::exit(bear_cli::run(std::env::args_os()));
}
