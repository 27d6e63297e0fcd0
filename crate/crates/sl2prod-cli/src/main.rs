fn main() {
    std::process::exit(sl2prod_cli::run(std::env::args()));
}
