fn main() {
    std::process::exit(voxsep::cli::run(std::env::args_os()));
}
