fn main() {
    std::process::exit(regdiff_cli::run(std::env::args_os()));
}
