fn main() {
    std::process::exit(tripnet::cli::run(std::env::args_os()));
}
