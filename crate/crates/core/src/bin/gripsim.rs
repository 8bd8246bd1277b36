use clap::error::ErrorKind;
use clap::Parser;
use gripsim::cli;

fn main() {
    let parsed = cli::Cli::try_parse().unwrap_or_else(|e| {
        // --help/--version are successful exits; everything else is a
        // caller mistake.
        let code = match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
            _ => 1,
        };
        let _ = e.print();
        std::process::exit(code);
    });
    if let Err(err) = cli::run(parsed) {
        eprintln!("gripsim: {err}");
        std::process::exit(cli::exit_code(&err));
    }
}
