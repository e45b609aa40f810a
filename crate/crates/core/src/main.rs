fn main() {
    let argv: Vec<String> = std::env::args().collect();
    std::process::exit(layered_green::cli::run(&argv));
}
