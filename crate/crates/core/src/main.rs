fn main() {
    std::process::exit(stepscat::cli::run(std::env::args_os()));
}
