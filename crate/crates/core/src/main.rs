use std::path::PathBuf;

use clap::Parser;

use chemoswitch::io::Mode;

/// Phenotype-switching chemotaxis simulator.
#[derive(Debug, Parser)]
#[command(name = "chemoswitch", version)]
struct Cli {
    /// run-full, run-limit, gamma-sweep, blowup-probe or rescale-check
    #[arg(value_parser = parse_mode)]
    mode: Mode,
    /// key = value configuration file
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `[output] dir`
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the optional initial perturbation
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

fn main() {
    let cli = Cli::parse();
    std::process::exit(chemoswitch::app::run_cli(cli.mode, &cli.config, cli.out, cli.seed));
}
