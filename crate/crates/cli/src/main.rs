fn main() {
    std::process::exit(pmc_cli::run(std::env::args_os()));
}
