use clap::Parser;
use critzone_cli::app::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(failure) = run(cli) {
        eprintln!("error {failure}");
        std::process::exit(failure.code);
    }
}
