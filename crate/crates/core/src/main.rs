fn main() {
    std::process::exit(flightphase::cli::run(std::env::args_os()));
}
