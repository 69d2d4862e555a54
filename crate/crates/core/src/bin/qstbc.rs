fn main() {
    std::process::exit(qstbc::cli::run(std::env::args_os()));
}
