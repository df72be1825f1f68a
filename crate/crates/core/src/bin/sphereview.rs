fn main() {
    std::process::exit(sphereview::cli::run(std::env::args_os()));
}
