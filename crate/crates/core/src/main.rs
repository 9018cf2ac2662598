fn main() {
    std::process::exit(relseq::cli::main());
}
