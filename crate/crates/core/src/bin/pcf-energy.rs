fn main() {
    std::process::exit(pcf_energy::cli::run(std::env::args_os()));
}
