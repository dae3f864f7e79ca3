fn main() {
    std::process::exit(snspd_link::cli::run(std::env::args_os()));
}
