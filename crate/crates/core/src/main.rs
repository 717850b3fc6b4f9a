fn main() {
    std::process::exit(magloop::cli::run_command(std::env::args_os()));
}
