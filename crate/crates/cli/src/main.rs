fn main() {
    std::process::exit(leo_irs_cli::run(std::env::args_os()));
}
