fn main() {
    std::process::exit(relmotion::cli::cli_main(std::env::args_os()));
}
