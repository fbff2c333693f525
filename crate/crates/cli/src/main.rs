fn main() {
    std::process::exit(turnlayer::run_cli(std::env::args_os().skip(1)));
}
