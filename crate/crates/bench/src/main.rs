fn main() {
    std::process::exit(greenbench::cli::cli_main(std::env::args_os()));
}
