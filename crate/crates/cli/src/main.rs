fn main() -> std::process::ExitCode {
    saddlepc::app::main(std::env::args_os())
}
