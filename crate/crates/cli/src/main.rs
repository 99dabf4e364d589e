fn main() {
    std::process::exit(rrcnn_cli::run(std::env::args_os()));
}
