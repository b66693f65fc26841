use clap::Parser;

fn main() {
    std::process::exit(orlicz_cli::main_with(orlicz_cli::Cli::parse()));
}
