use clap::Parser;

fn main() {
    let cli = exalign::cli::Cli::parse();
    if let Err(e) = exalign::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
