use clap::Parser;
use conflab::cli;

fn main() {
    let args = cli::Cli::parse();
    std::process::exit(cli::run(&args));
}
