fn main() {
    std::process::exit(gca_dti::cli::main());
}
