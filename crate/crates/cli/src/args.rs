use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "anyspace", version, about = "Exact inference by recursive conditioning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Probability of the evidence.
    Prob(Common),
    /// Most probable explanations.
    Mpe {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        hyps: HypothesisArgs,
    },
    /// Maximum a posteriori hypotheses over the given variables.
    Map {
        #[command(flatten)]
        common: Common,
        /// MAP variables, comma separated.
        #[arg(short = 'm', long = "map", value_delimiter = ',', required = true)]
        map_vars: Vec<String>,
        #[command(flatten)]
        hyps: HypothesisArgs,
    },
    /// Predicted number of recursive calls per node.
    Predict {
        #[command(flatten)]
        common: Common,
        /// Run the query and check the prediction (discrete caches, no evidence).
        #[arg(long)]
        verify: bool,
    },
    /// Time-space tradeoff curve as CSV.
    Curve {
        #[command(flatten)]
        common: Common,
        /// Ascending cache budgets in cells, comma separated.
        #[arg(long, default_value = "")]
        budgets: String,
    },
    /// Peak memory of variable elimination against recursive conditioning.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Network name for the report row (defaults to the file stem).
        #[arg(long)]
        name: Option<String>,
    },
    /// Dump the dtree with its width and structural properties.
    Dtree {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug)]
pub struct Common {
    /// Network file.
    #[arg(short = 'n', long)]
    pub network: PathBuf,
    /// Elimination order file.
    #[arg(short = 'o', long)]
    pub order: PathBuf,
    /// Evidence, e.g. "A=true,B=false".
    #[arg(short = 'e', long, default_value = "")]
    pub evidence: String,
    /// `full`, `none`, `frac=<f>`, or a file of `<node> <fraction>` lines.
    #[arg(long, default_value = "full")]
    pub cache: String,
    /// Seed for choosing which context instantiations a partial cache admits.
    #[arg(long, env = "ANYSPACE_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Drop cache entries after their last retrieval.
    #[arg(long)]
    pub forget: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Print per-node call and cache statistics.
    #[arg(long)]
    pub stats: bool,
    /// Build the dtree with el2dt.
    #[arg(long, conflicts_with = "sdt")]
    pub dt: bool,
    /// Build the dtree with el2sdt.
    #[arg(long)]
    pub sdt: bool,
}

#[derive(Args, Debug)]
pub struct HypothesisArgs {
    /// Report only the first maximal hypothesis.
    #[arg(long)]
    pub single: bool,
    /// Maximum number of tied hypotheses.
    #[arg(long, default_value_t = anyspace::mapmpe::DEFAULT_CAP)]
    pub cap: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
}
