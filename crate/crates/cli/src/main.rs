fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FORCEGRIP_LOG", "warn")).init();
    std::process::exit(forcegrip_cli::run(std::env::args_os()));
}
