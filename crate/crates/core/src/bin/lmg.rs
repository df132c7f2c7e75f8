fn main() {
    std::process::exit(lmg::cli::cli_main(std::env::args_os()));
}
