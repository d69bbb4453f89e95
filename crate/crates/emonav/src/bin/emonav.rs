fn main() {
    std::process::exit(emonav::cli::run(std::env::args_os()));
}
