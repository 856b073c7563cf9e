use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = graphinst_cli::Cli::parse();
    if let Err(e) = graphinst_cli::dispatch(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(graphinst_cli::exit_code(&e));
    }
}
