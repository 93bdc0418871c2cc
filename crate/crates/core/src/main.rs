fn main() {
    std::process::exit(zerophase::cli::run(std::env::args_os()));
}
