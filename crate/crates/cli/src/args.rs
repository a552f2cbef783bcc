use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use neuroprint::data::Condition;

#[derive(Debug, Parser)]
#[command(
    name = "neuroprint",
    version,
    about = "Subject identification and connectivity analysis for speech-related EEG",
    after_help = "Set NEUROPRINT_THREADS to cap the worker thread count."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic nine-subject dataset with known ground truth
    Synth(SynthArgs),
    /// Downsample, band-pass and epoch a continuous recording
    Preprocess(PreprocessArgs),
    /// Cross-validated subject identification
    Train(TrainArgs),
    /// Single-channel cross-validation for every channel, with rank statistics
    Sweep(SweepArgs),
    /// Phase-locking contrast between two conditions
    Plv(PlvArgs),
    /// Baseline-corrected high-gamma envelope per subject
    Envelope(EnvelopeArgs),
    /// Channel count and spectral block ablation on shared folds
    Ablate(AblateArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    /// JSON run configuration; flags override its values
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed for synthesis, folds, initialization and permutations
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    /// Dataset directory
    #[arg(long)]
    pub data: PathBuf,
    /// Number of stratified folds
    #[arg(long)]
    pub folds: Option<usize>,
    /// Training epochs per fold
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Adam learning rate
    #[arg(long)]
    pub lr: Option<f64>,
    /// Minibatch size
    #[arg(long)]
    pub batch: Option<usize>,
    /// Drop the depthwise-separable block
    #[arg(long)]
    pub no_spectral_block: bool,
    /// Condition to classify
    #[arg(long, default_value = "imagined_speech", value_parser = parse_condition)]
    pub condition: Condition,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    /// Number of subjects
    #[arg(long)]
    pub subjects: Option<usize>,
    /// Trials per subject and condition
    #[arg(long)]
    pub trials: Option<usize>,
    /// Raw sampling rate in Hz
    #[arg(long)]
    pub fs: Option<f64>,
    /// Write the continuous recording instead of the preprocessed dataset
    #[arg(long)]
    pub raw: bool,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[command(flatten)]
    pub common: Common,
    /// Recording directory
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub cv: CvArgs,
    /// Comma-separated channel subset (default: all)
    #[arg(long, value_delimiter = ',')]
    pub channels: Option<Vec<String>>,
    /// Permute subject labels first to estimate chance
    #[arg(long)]
    pub shuffle_labels: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub cv: CvArgs,
    /// Comma-separated channels to sweep (default: all)
    #[arg(long, value_delimiter = ',')]
    pub channels: Option<Vec<String>>,
    /// Significance level for the post-hoc tests
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Permutations per post-hoc test
    #[arg(long)]
    pub n_perm: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PlvArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dataset directory
    #[arg(long)]
    pub data: PathBuf,
    /// Condition of interest
    #[arg(long, default_value = "imagined_speech", value_parser = parse_condition)]
    pub condition: Condition,
    /// Reference condition
    #[arg(long, default_value = "resting_state", value_parser = parse_condition)]
    pub baseline: Condition,
    /// Comma-separated channels (default: all)
    #[arg(long, value_delimiter = ',')]
    pub channels: Option<Vec<String>>,
    /// Restrict to one subject
    #[arg(long)]
    pub subject: Option<usize>,
    /// Significance level of the paired t-tests
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EnvelopeArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dataset directory
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "imagined_speech", value_parser = parse_condition)]
    pub condition: Condition,
    /// One subject (default: every subject)
    #[arg(long)]
    pub subject: Option<usize>,
    /// Comma-separated channels to average (default: all)
    #[arg(long, value_delimiter = ',')]
    pub channels: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub cv: CvArgs,
    /// Channel for the single-channel arms
    #[arg(long, default_value = "T7")]
    pub channel: String,
}

fn parse_condition(s: &str) -> Result<Condition, String> {
    s.parse().map_err(|e: neuroprint::Error| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_parse() {
        let cli = Cli::try_parse_from([
            "neuroprint", "train", "--data", "d", "--out", "o", "--folds", "5", "--epochs", "3", "--channels",
            "T7,C5", "--condition", "overt", "--no-spectral-block", "--seed", "9",
        ])
        .unwrap();
        let Command::Train(t) = cli.command else { panic!() };
        assert_eq!(t.cv.folds, Some(5));
        assert_eq!(t.cv.condition, Condition::OvertSpeech);
        assert!(t.cv.no_spectral_block);
        assert_eq!(t.channels.unwrap(), vec!["T7", "C5"]);
        assert_eq!(t.common.seed, Some(9));
    }

    #[test]
    fn missing_out_is_a_usage_error() {
        let err = Cli::try_parse_from(["neuroprint", "synth", "--subjects", "9"]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(Cli::try_parse_from(["neuroprint", "plv", "--data", "d", "--out", "o", "--condition", "x"]).is_err());
    }
}
