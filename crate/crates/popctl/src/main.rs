fn main() {
    std::process::exit(popctl::run(std::env::args_os()));
}
