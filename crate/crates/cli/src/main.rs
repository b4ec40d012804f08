fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("UISAL_LOG", "error")).init();
    std::process::exit(uisal_cli::run(std::env::args_os()));
}
