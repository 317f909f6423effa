fn main() {
    std::process::exit(lstp_cli::run(std::env::args_os()));
}
