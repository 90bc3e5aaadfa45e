fn main() {
    std::process::exit(gradegauge::cli::run(std::env::args_os()));
}
