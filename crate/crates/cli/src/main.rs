fn main() {
    std::process::exit(nvpump_cli::run(std::env::args_os()));
}
