fn main() {
    std::process::exit(iirl_core::cli::dispatch(std::env::args_os()));
}
