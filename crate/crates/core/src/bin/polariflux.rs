use clap::Parser;
use polariflux::cli::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = run(&cli);
    if let Some(err) = outcome.metadata.get("error") {
        eprintln!("error: {}", err["message"].as_str().unwrap_or(""));
    }
    for p in &outcome.artifacts {
        println!("{}", p.display());
    }
    std::process::exit(outcome.exit_code);
}
