use clap::Parser;
use funceq::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
