fn main() {
    std::process::exit(pointspec_cli::run(std::env::args_os()));
}
