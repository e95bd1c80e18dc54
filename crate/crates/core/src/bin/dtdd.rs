fn main() {
    std::process::exit(dtdd_core::harness::cli::cli_main(std::env::args_os()));
}
