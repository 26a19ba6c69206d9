fn main() {
    std::process::exit(hospt::cli::run(std::env::args_os()));
}
