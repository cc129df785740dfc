fn main() {
    std::process::exit(clickbait_gru::cli::run(std::env::args_os()));
}
