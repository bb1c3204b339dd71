fn main() {
    std::process::exit(qtl::cli::run(std::env::args_os()));
}
