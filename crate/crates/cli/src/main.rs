fn main() {
    std::process::exit(argus_cli::run(std::env::args_os()));
}
