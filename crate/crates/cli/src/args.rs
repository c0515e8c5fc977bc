use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use bear_core::TrainConfig;

#[derive(Debug, Parser)]
#[command(name = "bear", version, about = "Streaming low-rank + sparse decomposition (L = W·Wᵀ·Y)")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train W on Y and stream L = W·Wᵀ·Y and S = Y − L to disk
    Decompose(DecomposeArgs),
    /// Increase the rank until r + λ‖S‖₁ stops decreasing
    Greedy(GreedyArgs),
    /// Projective NMF: Y ≈ W·Wᵀ·Y with W ≥ 0
    Nmf(NmfArgs),
    /// Joint RPCA → NMF cascade with footprint export
    Cascade(CascadeArgs),
    /// Synthetic phase diagram over (rank, density) cells
    Bench(BenchArgs),
    /// Write a synthetic matrix or blob video as BMAT
    Gen(GenArgs),
    /// Print a BMAT header and streaming norms
    Info(InfoArgs),
    /// Re-run a command from its manifest
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Manifest path [default: <first output>.manifest]
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Refuse to run when the estimated working set exceeds this many bytes
    /// (suffixes K, M, G accepted)
    #[arg(long, value_parser = parse_bytes)]
    pub memory_cap: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Adam learning rate
    #[arg(long, default_value_t = 0.003)]
    pub lr: f64,
    /// Decay the learning rate linearly to this value by the last epoch
    #[arg(long)]
    pub final_lr: Option<f64>,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    /// Columns per mini-batch
    #[arg(long, default_value_t = 1000)]
    pub batch: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (outputs are bitwise reproducible with 1)
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Visit batches in file order instead of a seeded shuffle
    #[arg(long)]
    pub no_shuffle: bool,
    /// Stop when the relative change of the epoch loss falls below this
    #[arg(long)]
    pub early_stop_tol: Option<f64>,
}

impl TrainArgs {
    pub fn config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            final_learning_rate: self.final_lr,
            epochs: self.epochs,
            batch_size: self.batch,
            seed: self.seed,
            early_stop_rel_tol: self.early_stop_tol,
            shuffle: !self.no_shuffle,
            threads: self.threads,
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DecomposeArgs {
    /// Input matrix Y (BMAT, n × m)
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub rank: usize,
    /// Low-rank output L (n × m)
    #[arg(long)]
    pub out_l: Option<PathBuf>,
    /// Sparse output S = Y − L (n × m)
    #[arg(long)]
    pub out_s: Option<PathBuf>,
    /// Trained factor W (n × r)
    #[arg(long)]
    pub out_w: Option<PathBuf>,
    /// Train on the first ⌈f·m⌉ columns only, then stream inference over all
    #[arg(long)]
    pub train_frac: Option<f64>,
    /// Explicitly request the train-then-infer workflow (needs --train-frac)
    #[arg(long, requires = "train_frac")]
    pub infer_only_after_train: bool,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GreedyArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Weight of ‖S‖₁ in the stopping objective [default: 1/√max(n, m)]
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub rank_start: usize,
    #[arg(long, default_value_t = 1)]
    pub rank_step: usize,
    /// Largest rank tried [default: min(n, m)]
    #[arg(long)]
    pub rank_max: Option<usize>,
    /// Start each rank from the previous factor plus fresh columns
    #[arg(long)]
    pub warm_start: bool,
    #[arg(long)]
    pub out_l: Option<PathBuf>,
    #[arg(long)]
    pub out_s: Option<PathBuf>,
    #[arg(long)]
    pub out_w: Option<PathBuf>,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct NmfArgs {
    /// Non-negative input Y (BMAT)
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub rank: usize,
    /// Non-negative basis W (n × r)
    #[arg(long)]
    pub out_w: Option<PathBuf>,
    /// Coefficients H = Wᵀ·Y (r × m)
    #[arg(long)]
    pub out_h: Option<PathBuf>,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CascadeArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Rank of the background factor W1
    #[arg(long, default_value_t = 1)]
    pub rank1: usize,
    /// Number of footprints (rank of W2)
    #[arg(long)]
    pub rank2: usize,
    /// Weight μ of the NMF term ‖R‖²
    #[arg(long, default_value_t = bear_core::nmf::DEFAULT_MU)]
    pub mu: f64,
    /// Train W1 first, then W2 on the frozen ReLU residual
    #[arg(long)]
    pub two_stage: bool,
    /// Scale spatial footprints to unit ℓ2 norm (traces absorb the scale)
    #[arg(long)]
    pub normalize: bool,
    /// Spatial footprints W2 (n × r2)
    #[arg(long)]
    pub out_spatial: Option<PathBuf>,
    /// Temporal footprints W2ᵀ·ReLU(S) (r2 × m)
    #[arg(long)]
    pub out_temporal: Option<PathBuf>,
    /// Background W1·W1ᵀ·Y (n × m)
    #[arg(long)]
    pub out_background: Option<PathBuf>,
    /// Temporal traces as CSV, one row per frame
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
    /// True maps (n × k) to score the footprints against
    #[arg(long)]
    pub truth_spatial: Option<PathBuf>,
    /// True traces (k × m), used with --truth-spatial
    #[arg(long, requires = "truth_spatial")]
    pub truth_temporal: Option<PathBuf>,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Side of the square test matrices
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_delimiter = ',', required = true)]
    pub ranks: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub rhos: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    pub trials: usize,
    /// [default: 1/√n]
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub rank_start: usize,
    #[arg(long, default_value_t = 1)]
    pub rank_step: usize,
    #[arg(long)]
    pub rank_max: Option<usize>,
    /// Also run the IALM oracle and write <out>.oracle.csv
    #[arg(long)]
    pub oracle: bool,
    /// Phase CSV
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    Lowrank,
    Sparse,
    Composite,
    Video,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub kind: GenKind,
    /// Output BMAT
    #[arg(long)]
    pub out: PathBuf,
    /// Rows (matrix kinds)
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Columns [default: n]
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub rank: usize,
    /// Density of the ±0.1 sparse part
    #[arg(long, default_value_t = 0.05)]
    pub rho: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    #[arg(long, default_value_t = 500)]
    pub frames: usize,
    #[arg(long, default_value_t = 8)]
    pub blobs: usize,
    #[arg(long, default_value_t = 1.5)]
    pub sigma: f64,
    /// Events per frame in each trace
    #[arg(long, default_value_t = 0.01)]
    pub event_rate: f64,
    /// Trace decay constant in frames
    #[arg(long, default_value_t = 2.0)]
    pub decay: f64,
    #[arg(long)]
    pub no_background: bool,
    /// True blob maps (video only)
    #[arg(long)]
    pub out_truth_spatial: Option<PathBuf>,
    /// True activation traces (video only)
    #[arg(long)]
    pub out_truth_temporal: Option<PathBuf>,
    /// True background (video only)
    #[arg(long)]
    pub out_truth_background: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct InfoArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run
    #[arg(long = "from")]
    pub from: PathBuf,
    /// Write outputs (and the new manifest) here instead of the recorded paths
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

/// Parses `123`, `64K`, `512M`, `4G` (binary multiples).
pub fn parse_bytes(s: &str) -> Result<u64, String> {
    let s = s.trim();
    let (digits, shift) = match s.char_indices().last() {
        Some((i, c)) if c.is_ascii_alphabetic() => {
            let shift = match c.to_ascii_uppercase() {
                'K' => 10,
                'M' => 20,
                'G' => 30,
                'T' => 40,
                _ => return Err(format!("unknown size suffix in {s:?}")),
            };
            (&s[..i], shift)
        }
        _ => (s, 0),
    };
    let value: u64 = digits.parse().map_err(|_| format!("not a byte count: {s:?}"))?;
    value
        .checked_shl(shift)
        .filter(|v| v >> shift == value)
        .ok_or_else(|| format!("byte count overflows: {s:?}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn byte_sizes() {
        assert_eq!(parse_bytes("123"), Ok(123));
        assert_eq!(parse_bytes("4K"), Ok(4096));
        assert_eq!(parse_bytes("512m"), Ok(512 << 20));
        assert_eq!(parse_bytes("4G"), Ok(4 << 30));
        assert!(parse_bytes("4X").is_err());
        assert!(parse_bytes("").is_err());
        assert!(parse_bytes("99999999999T").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
