fn main() {
    std::process::exit(oddlattice::cli::run(std::env::args_os()));
}
