use std::path::PathBuf;
use std::str::FromStr;

use clap::{Parser, ValueEnum};
use crn_store::bmc::SOLVER_ENV;
use crn_store::{Mode, StoreKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StoreChoice {
    PrefixTree,
    HashBaseline,
    Both,
}

impl StoreChoice {
    pub fn kinds(self) -> Vec<StoreKind> {
        match self {
            StoreChoice::PrefixTree => vec![StoreKind::PrefixTree],
            StoreChoice::HashBaseline => vec![StoreKind::HashBaseline],
            StoreChoice::Both => vec![StoreKind::PrefixTree, StoreKind::HashBaseline],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OrderingChoice {
    Identity,
    Random,
    Bmc,
    Oracle,
    File(PathBuf),
}

impl FromStr for OrderingChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identity" => Ok(OrderingChoice::Identity),
            "random" => Ok(OrderingChoice::Random),
            "bmc" => Ok(OrderingChoice::Bmc),
            "oracle" => Ok(OrderingChoice::Oracle),
            _ => match s.strip_prefix("file:") {
                Some(path) if !path.is_empty() => Ok(OrderingChoice::File(PathBuf::from(path))),
                _ => Err(format!(
                    "unknown ordering `{s}` (expected identity, random, bmc, oracle or file:<path>)"
                )),
            },
        }
    }
}

/// Parses `1000`, `1e3` or `25e4`.
pub fn parse_count(s: &str) -> Result<u64, String> {
    let s = s.trim();
    let bad = || format!("`{s}` is not a count like 1000 or 1e3");
    let (mantissa, exponent) = match s.split_once(['e', 'E']) {
        Some((m, e)) => (m, e.parse::<u32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let mantissa: u64 = mantissa.parse().map_err(|_| bad())?;
    10u64
        .checked_pow(exponent)
        .and_then(|p| mantissa.checked_mul(p))
        .ok_or_else(|| format!("`{s}` overflows 64 bits"))
}

#[derive(Debug, Clone, Parser)]
#[command(
    name = "crnbench",
    about = "Compare prefix-tree and hash-table state storage on reaction network exploration"
)]
pub struct Args {
    /// Model file, or a builtin name such as `yeast`.
    #[arg(long, default_value = "yeast")]
    pub model: String,

    #[arg(long, value_enum, default_value = "both")]
    pub store: StoreChoice,

    /// Comma-separated step budgets.
    #[arg(long, value_delimiter = ',', value_parser = parse_count, default_value = "1e3,1e4,1e5")]
    pub steps: Vec<u64>,

    #[arg(long, default_value = "bfs")]
    pub mode: Mode,

    /// identity, random, bmc, oracle or file:<path>
    #[arg(long, default_value = "identity")]
    pub ordering: OrderingChoice,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// SMT-LIB solver binary for `--ordering bmc`.
    #[arg(long, env = SOLVER_ENV)]
    pub smt_solver: Option<PathBuf>,

    /// Per-query solver timeout in seconds.
    #[arg(long, default_value_t = 300)]
    pub solver_timeout: u64,

    /// Extra unrolling steps beyond the minimal depth for BMC bounds.
    #[arg(long, default_value_t = 0)]
    pub bmc_slack: usize,

    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Run grid cells one at a time.
    #[arg(long)]
    pub sequential_timing: bool,

    /// Largest step budget actually run; larger ones are projected.
    #[arg(long, value_parser = parse_count, default_value = "1e6")]
    pub step_cap: u64,

    /// Skip the discarded warm-up run of each cell.
    #[arg(long)]
    pub no_warmup: bool,
}
