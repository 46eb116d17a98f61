fn main() {
    std::process::exit(qpt_cli::run_cli(std::env::args_os()));
}
