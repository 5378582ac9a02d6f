fn main() {
    std::process::exit(spinflow_cli::run(std::env::args_os()));
}
