fn main() {
    std::process::exit(rmd::cli::run());
}
