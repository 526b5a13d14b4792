fn main() {
    std::process::exit(logosp::commands::main());
}
