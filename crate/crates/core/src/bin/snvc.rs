fn main() {
    std::process::exit(snvc::io::cli::run(std::env::args_os()));
}
