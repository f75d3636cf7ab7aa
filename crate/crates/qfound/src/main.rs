fn main() {
    std::process::exit(qfound::cli::dispatch(std::env::args_os()));
}
