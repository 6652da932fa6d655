use clap::Parser;

use cellwalk::cli::{execute, render_pretty, Cli};

fn main() {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(report) => {
            if cli.pretty {
                print!("{}", render_pretty(&report));
            } else {
                println!("{}", serde_json::to_string_pretty(&report).expect("serialisable"));
            }
            std::process::exit(report.exit_code());
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
