fn main() {
    std::process::exit(mvrefine_cli::run(std::env::args_os()));
}
