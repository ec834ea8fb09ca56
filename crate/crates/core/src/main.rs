fn main() {
    std::process::exit(fairdiv::cli::run(std::env::args_os()));
}
