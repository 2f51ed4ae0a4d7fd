fn main() {
    std::process::exit(snaipw::cli::main_with_args(std::env::args_os()));
}
