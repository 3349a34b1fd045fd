fn main() {
    std::process::exit(latentconn::cli::run());
}
