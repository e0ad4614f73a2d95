use clap::Parser;
use streamflag_cli::commands::{run, Cli};
use streamflag_core::ErrorCategory;

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(match err.category() {
            ErrorCategory::Config => 1,
            ErrorCategory::Data => 2,
            ErrorCategory::Numeric => 3,
        });
    }
}
