fn main() {
    std::process::exit(drskit_cli::run(std::env::args_os()));
}
