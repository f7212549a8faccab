fn main() {
    eprintln!("qgt: command-line interface not wired up yet");
    std::process::exit(2);
}
