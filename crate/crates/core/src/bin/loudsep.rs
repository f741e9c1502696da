fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LOUDSEP_LOG", "info")).init();
    std::process::exit(loudsep::cli::dispatch(std::env::args()));
}
