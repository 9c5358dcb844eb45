fn main() {
    std::process::exit(bidcraft_core::cli::run());
}
