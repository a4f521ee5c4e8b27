fn main() {
    std::process::exit(fieldnorm::cli::run(std::env::args_os()));
}
