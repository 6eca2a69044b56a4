fn main() {
    std::process::exit(planar_spectra_cli::run(std::env::args_os()));
}
