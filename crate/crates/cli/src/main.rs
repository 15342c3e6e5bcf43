use clap::Parser;
use myoinr_cli::cli::Cli;

fn main() {
    let cli = Cli::parse();
    if let Err(e) = myoinr_cli::commands::run(cli.command) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
