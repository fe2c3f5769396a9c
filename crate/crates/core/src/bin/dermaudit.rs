fn main() -> std::process::ExitCode {
    dermaudit::cli::run()
}
