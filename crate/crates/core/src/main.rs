use clap::Parser;

fn main() {
    let cli = speech_inversion::cli::Cli::parse();
    if let Err(err) = speech_inversion::cli::run(cli) {
        eprintln!("sinv: {err}");
        std::process::exit(err.exit_code());
    }
}
