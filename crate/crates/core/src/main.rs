fn main() {
    std::process::exit(bmc_saliency::cli::main_with(std::env::args_os()));
}
