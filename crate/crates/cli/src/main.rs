fn main() {
    std::process::exit(cyclo_gev_cli::run(std::env::args_os()));
}
