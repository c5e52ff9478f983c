fn main() {
    std::process::exit(annealscape_cli::run(std::env::args_os()));
}
