fn main() {
    std::process::exit(whs_cli::cli_main(std::env::args_os()));
}
