fn main() {
    std::process::exit(slotfill::cli::run(std::env::args_os()));
}
