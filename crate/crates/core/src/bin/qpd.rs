fn main() {
    std::process::exit(qpd::cli::run(std::env::args_os()));
}
