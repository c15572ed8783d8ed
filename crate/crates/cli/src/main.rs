fn main() {
    std::process::exit(delay_blowup_cli::run(std::env::args_os()));
}
