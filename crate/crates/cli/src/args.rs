use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "dbv",
    version,
    about = "Distance-bounding verification over a noisy channel"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Shortest secure challenge (or source) for one parameter point.
    Optimize(OptimizeArgs),
    /// Optimal lengths over a grid of DBV ratios, written as CSV.
    Curves(CurvesArgs),
    /// Monte Carlo estimate of acceptance rates.
    Simulate(SimulateArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Dfa,
    BrmSampling,
    BrmGeneral,
}

#[derive(Args, Debug, Clone)]
pub struct ChannelArgs {
    /// Channel parameters as a JSON file, or "default".
    #[arg(long, default_value = "default")]
    pub channel: String,
    /// Drop the noise term (attenuation only).
    #[arg(long)]
    pub noiseless: bool,
}

#[derive(Args, Debug, Clone)]
pub struct SlackArgs {
    /// Sampler slack θ.
    #[arg(long, default_value_t = 1e-4)]
    pub theta: f64,
    /// Sampler failure probability γ [default: ε_FA/100].
    #[arg(long)]
    pub gamma: Option<f64>,
}

#[derive(Args, Debug)]
pub struct OptimizeArgs {
    #[arg(long, value_enum)]
    pub mode: Mode,
    /// DBV ratio ψ > 1.
    #[arg(long)]
    pub psi: f64,
    #[arg(long)]
    pub eps_fa: f64,
    #[arg(long)]
    pub eps_fr: f64,
    /// Retrieval rate λ (brm modes).
    #[arg(long)]
    pub lambda: Option<f64>,
    #[command(flatten)]
    pub slack: SlackArgs,
    #[command(flatten)]
    pub channel: ChannelArgs,
    /// Compact single-line output.
    #[arg(long)]
    pub plain: bool,
}

#[derive(Args, Debug)]
pub struct CurvesArgs {
    #[arg(long, value_enum)]
    pub mode: Mode,
    /// ψ grid as start:stop:step (inclusive).
    #[arg(long)]
    pub psi_range: String,
    /// Comma-separated ε values (dfa mode; ε_FA = ε_FR = ε).
    #[arg(long, value_delimiter = ',')]
    pub eps: Vec<f64>,
    /// Comma-separated λ values (brm modes).
    #[arg(long, value_delimiter = ',')]
    pub lambda: Vec<f64>,
    /// ε_FA for brm modes.
    #[arg(long, default_value_t = 1e-5)]
    pub eps_fa: f64,
    /// ε_FR for brm modes.
    #[arg(long, default_value_t = 1e-5)]
    pub eps_fr: f64,
    #[command(flatten)]
    pub slack: SlackArgs,
    #[command(flatten)]
    pub channel: ChannelArgs,
    /// Output CSV path, or "-" for stdout.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads [default: all cores].
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProtocolArg {
    Pi1,
    Pi2,
    Pi3,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScenarioArg {
    Honest,
    Dfa,
    Mfa,
    Impersonation,
    TfaRelay,
    TfaSampling,
    TfaGeneral,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum MfaArg {
    Replay,
    RandomTag,
    BestGuess,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum IndexArg {
    First,
    Random,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeneralArg {
    Sampling,
    ParitySketch,
    BlockMajority,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum BrmModeArg {
    Sampling,
    General,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub protocol: ProtocolArg,
    #[arg(long, value_enum)]
    pub scenario: ScenarioArg,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// DBV ratio ψ; attack scenarios place the prover at ψ·d_claim by default.
    #[arg(long)]
    pub psi: f64,
    #[arg(long)]
    pub eps_fa: f64,
    #[arg(long)]
    pub eps_fr: f64,
    /// Claimed distance in meters.
    #[arg(long, conflicts_with = "d_claim_km")]
    pub d_claim: Option<f64>,
    #[arg(long)]
    pub d_claim_km: Option<f64>,
    /// True distance of the responding party in meters.
    #[arg(long, conflicts_with = "d_real_km")]
    pub d_real: Option<f64>,
    #[arg(long)]
    pub d_real_km: Option<f64>,
    /// Intruder distance in meters [default: error-free reception].
    #[arg(long)]
    pub intruder_d: Option<f64>,
    /// Pick (E0, k, β) (and n) with the optimiser.
    #[arg(long)]
    pub auto: bool,
    /// Base power E0 in watts (without --auto).
    #[arg(long)]
    pub e0: Option<f64>,
    /// Challenge length (pi1/pi2 without --auto).
    #[arg(long)]
    pub k: Option<u64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Retrieval rate λ (pi3).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Source length n (pi3 without --auto).
    #[arg(long)]
    pub n: Option<u64>,
    /// Intruder model used by --auto for pi3.
    #[arg(long, value_enum, default_value = "sampling")]
    pub brm_mode: BrmModeArg,
    #[command(flatten)]
    pub slack: SlackArgs,
    /// Tag size in bits.
    #[arg(long, default_value_t = 64)]
    pub mac_bits: u32,
    /// Run pi3 without the response tag.
    #[arg(long)]
    pub no_mac: bool,
    #[arg(long, value_enum, default_value = "replay")]
    pub mfa_strategy: MfaArg,
    #[arg(long, value_enum, default_value = "random")]
    pub index_choice: IndexArg,
    #[arg(long, value_enum, default_value = "parity-sketch")]
    pub general_strategy: GeneralArg,
    /// Impersonator knows the pi3 sampler key.
    #[arg(long)]
    pub leak_sampler_key: bool,
    #[command(flatten)]
    pub channel: ChannelArgs,
    /// Worker threads [default: all cores].
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Write one JSON transcript record per trial to this file.
    #[arg(long)]
    pub dump_transcripts: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: OutputFormat,
    /// Compact single-line output.
    #[arg(long)]
    pub plain: bool,
}
