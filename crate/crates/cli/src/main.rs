fn main() {
    std::process::exit(gait_lab_cli::run(std::env::args_os()));
}
