use clap::Parser;
use env_logger::Env;

use bsmm::cli::{run, Cli};

fn main() {
    env_logger::Builder::from_env(Env::new().filter_or("BSMM_LOG", "warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
