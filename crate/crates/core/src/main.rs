fn main() {
    std::process::exit(morse_gauge::cli::run_from(std::env::args_os()));
}
