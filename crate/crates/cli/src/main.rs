use clap::Parser;
use rankboot_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => print!("{out}"),
        Err(e) => {
            eprintln!("rankboot: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
