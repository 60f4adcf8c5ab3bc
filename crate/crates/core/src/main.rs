fn main() {
    std::process::exit(windramp::cli::run(std::env::args_os()));
}
