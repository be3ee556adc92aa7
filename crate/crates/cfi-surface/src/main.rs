fn main() {
    std::process::exit(cfi_surface::cli::run());
}
