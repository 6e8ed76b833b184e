use clap::Parser;
use kron_noise::cli::{execute, Cli};

fn main() {
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    if let Err(err) = execute(&cli, &argv) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
