use clap::Parser;

fn main() {
    let cli = semiflex_cli::Cli::parse();
    if let Err(e) = semiflex_cli::run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
