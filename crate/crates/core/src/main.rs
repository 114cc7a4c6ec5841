fn main() {
    std::process::exit(qcapacity::cli::run(std::env::args_os()));
}
