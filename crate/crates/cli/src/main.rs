use clap::Parser;

use qsrm_cli::commands::{run, Cli};
use qsrm_cli::error::EXIT_USAGE;

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            std::process::exit(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("usage error: cannot start {t} threads: {e}");
            std::process::exit(EXIT_USAGE);
        }
    }
    if let Err(e) = run(&cli) {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
