use clap::Parser;
use xcm_cli::config::Cli;

fn main() {
    let cli = Cli::parse();
    if let Err(e) = xcm_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
