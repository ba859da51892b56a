fn main() {
    std::process::exit(pgsynth::cli::run(std::env::args_os()));
}
