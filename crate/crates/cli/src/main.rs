fn main() {
    std::process::exit(csflab::run(std::env::args_os()));
}
