use clap::Parser;

fn main() -> std::process::ExitCode {
    let cli = milligrav::cli::Cli::parse();
    match milligrav::cli::run(cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::ExitCode::FAILURE
        }
    }
}
