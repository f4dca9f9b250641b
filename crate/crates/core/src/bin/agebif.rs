fn main() {
    std::process::exit(agebif::harness::main_with_args(std::env::args_os()));
}
