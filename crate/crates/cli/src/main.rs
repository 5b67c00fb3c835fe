fn main() {
    std::process::exit(genesis_cli::run(std::env::args_os()));
}
