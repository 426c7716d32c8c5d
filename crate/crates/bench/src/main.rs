use clap::Parser;
use crn_bench::{run_cli, Args};

fn main() -> anyhow::Result<()> {
    run_cli(&Args::parse())?;
    Ok(())
}
