fn main() {
    std::process::exit(ltl_compose::cli::run(std::env::args_os()));
}
