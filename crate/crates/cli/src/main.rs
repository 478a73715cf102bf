use clap::Parser;
use lattice_cli::{exit_code, run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::try_parse_from(&argv).unwrap_or_else(|e| e.exit());
    if let Err(e) = run(cli, argv) {
        eprintln!("error: {e:#}");
        std::process::exit(exit_code(&e));
    }
}
