fn main() -> std::process::ExitCode {
    robust_mm::cli::main()
}
