use clap::Parser;

fn main() {
    let cli = mass_harness::cli::Cli::parse();
    if let Err(e) = mass_harness::cli::execute(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
