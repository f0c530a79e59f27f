fn main() {
    std::process::exit(sigma2lab::cli::run(std::env::args_os()));
}
