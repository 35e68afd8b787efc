fn main() {
    std::process::exit(dsgd::cli::cli_main(std::env::args_os()));
}
