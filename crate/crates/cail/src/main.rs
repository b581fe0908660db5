fn main() -> std::process::ExitCode {
    cail::cli::main()
}
