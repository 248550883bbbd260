fn main() -> std::process::ExitCode {
    landauer_lab::cli::main()
}
