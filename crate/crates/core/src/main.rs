fn main() -> std::process::ExitCode {
    emocoach::cli::run()
}
