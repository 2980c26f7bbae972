fn main() {
    std::process::exit(hgn::cli::run(std::env::args_os()));
}
