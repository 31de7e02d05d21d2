fn main() {
    std::process::exit(gbc_fbl_cli::run(std::env::args()));
}
