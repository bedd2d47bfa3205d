fn main() {
    std::process::exit(zeroflow::cli::run(std::env::args_os()));
}
