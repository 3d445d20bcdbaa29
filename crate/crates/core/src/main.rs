fn main() {
    std::process::exit(l1_maximal::cli::run());
}
