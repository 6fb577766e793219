fn main() {
    std::process::exit(zeromass_cli::dispatch(std::env::args_os()));
}
