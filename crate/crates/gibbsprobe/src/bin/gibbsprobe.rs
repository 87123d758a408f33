use clap::Parser;

use gibbsprobe::cli::{Cli, EXIT_VALIDATION};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // --help/--version print to stdout and succeed; genuine usage
            // errors are validation failures.
            let code = if err.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    if let Err(err) = gibbsprobe::cli::run(&cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
