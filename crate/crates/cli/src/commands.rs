use std::fmt;
use std::fs;
use std::io::Write;

use serde::Serialize;
use serde_json::json;

use dbv_core::adversary::{GeneralStrategy, IndexChoice, MfaStrategy};
use dbv_core::bounds::{BoundsError, DbvSpec};
use dbv_core::channel::{ChannelError, ChannelParams};
use dbv_core::harness::{
    compare_to_bound, estimate_rates_with, EstimateOptions, HarnessError, Scenario, Setup,
    SUMMARY_CSV_HEADER,
};
use dbv_core::optimizer::{
    default_gamma, optimize_brm, optimize_dfa, sweep_curves, BrmMode, CurveMode, OptimizeError,
    SweepRequest,
};
use dbv_core::protocol::{BrmParams, ProtocolConfig, ProtocolError, ProtocolKind};

use crate::args::*;
use crate::format::sig;

pub const SCHEMA_VERSION: u32 = 1;

pub const CURVES_CSV_HEADER: &str =
    "psi,eps_or_lambda,e0_star_dbm,beta_star,k_star_or_n_star,feasible";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Infeasible { condition: String, message: String },
    Internal(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Internal(m) => f.write_str(m),
            CliError::Infeasible { condition, message } => {
                write!(f, "infeasible: {message} [condition: {condition}]")
            }
        }
    }
}

impl From<OptimizeError> for CliError {
    fn from(e: OptimizeError) -> Self {
        match (&e, e.condition()) {
            (_, Some(c)) => CliError::Infeasible {
                condition: c.to_string(),
                message: e.to_string(),
            },
            (OptimizeError::Bounds(BoundsError::ExceedsCap { .. }), None) => CliError::Infeasible {
                condition: "length ≤ cap".into(),
                message: e.to_string(),
            },
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<BoundsError> for CliError {
    fn from(e: BoundsError) -> Self {
        OptimizeError::from(e).into()
    }
}

impl From<ChannelError> for CliError {
    fn from(e: ChannelError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<ProtocolError> for CliError {
    fn from(e: ProtocolError) -> Self {
        match e {
            ProtocolError::Config(_)
            | ProtocolError::Channel(_)
            | ProtocolError::InvalidArgument(_)
            | ProtocolError::WrongProtocol { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::NoTrials => CliError::Usage(e.to_string()),
            HarnessError::Attack(dbv_core::adversary::AttackError::Protocol(p)) => p.into(),
            HarnessError::Attack(a) => CliError::Usage(a.to_string()),
        }
    }
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Internal(e.to_string())
}

fn load_channel(a: &ChannelArgs) -> Result<ChannelParams, CliError> {
    let ch = if a.channel == "default" {
        ChannelParams::default()
    } else {
        let text = fs::read_to_string(&a.channel)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", a.channel)))?;
        ChannelParams::from_json(&text)?
    };
    ch.validate()?;
    Ok(if a.noiseless { ch.noiseless() } else { ch })
}

fn print_json(value: &serde_json::Value, plain: bool) -> Result<(), CliError> {
    let text = if plain {
        serde_json::to_string(value)
    } else {
        serde_json::to_string_pretty(value)
    }
    .map_err(|e| CliError::Internal(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match jobs {
        None => Ok(f()),
        Some(0) => Err(CliError::Usage("--jobs must be at least 1".into())),
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| CliError::Internal(e.to_string())),
    }
}

fn brm_mode(mode: Mode) -> Option<BrmMode> {
    match mode {
        Mode::Dfa => None,
        Mode::BrmSampling => Some(BrmMode::Sampling),
        Mode::BrmGeneral => Some(BrmMode::General),
    }
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Dfa => "dfa",
        Mode::BrmSampling => "brm-sampling",
        Mode::BrmGeneral => "brm-general",
    }
}

fn tagged<T: Serialize>(command: &str, result: &T) -> Result<serde_json::Value, CliError> {
    let result = serde_json::to_value(result).map_err(|e| CliError::Internal(e.to_string()))?;
    Ok(json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "result": result,
    }))
}

pub fn optimize(a: &OptimizeArgs) -> Result<(), CliError> {
    let ch = load_channel(&a.channel)?;
    let spec =
        DbvSpec::new(a.psi, a.eps_fa, a.eps_fr).map_err(|e| CliError::Usage(e.to_string()))?;
    let out = match brm_mode(a.mode) {
        None => {
            if a.lambda.is_some() {
                return Err(CliError::Usage("--lambda applies to brm modes only".into()));
            }
            tagged(
                "optimize",
                &optimize_dfa(&spec, &ch).map_err(CliError::from)?,
            )?
        }
        Some(mode) => {
            let lambda = a.lambda.ok_or_else(|| {
                CliError::Usage(format!(
                    "--lambda is required for --mode {}",
                    mode_name(a.mode)
                ))
            })?;
            let gamma = a.slack.gamma.unwrap_or_else(|| default_gamma(a.eps_fa));
            match optimize_brm(&spec, &ch, lambda, mode, a.slack.theta, gamma) {
                Ok(o) => tagged("optimize", &o)?,
                Err(e) => {
                    let err = CliError::from(e);
                    if let CliError::Infeasible { condition, message } = &err {
                        print_json(
                            &json!({
                                "schema_version": SCHEMA_VERSION,
                                "command": "optimize",
                                "status": "infeasible",
                                "condition": condition,
                                "message": message,
                            }),
                            a.plain,
                        )?;
                    }
                    return Err(err);
                }
            }
        }
    };
    print_json(&out, a.plain)
}

/// Inclusive `start:stop:step` grid.
pub fn parse_range(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("--psi-range expects start:stop:step, got {s:?}"));
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    let [start, stop, step] = parts[..] else {
        return Err(bad());
    };
    if !start.is_finite() || !stop.is_finite() || step.is_nan() || step <= 0.0 || stop < start {
        return Err(CliError::Usage(format!("empty or invalid psi range {s:?}")));
    }
    let count = ((stop - start) / step + 1e-9).floor() as u64 + 1;
    Ok((0..count)
        .map(|i| {
            let v = start + i as f64 * step;
            // Drop accumulated binary noise such as 1.0300000000000002.
            (v * 1e12).round() / 1e12
        })
        .collect())
}

pub fn curves(a: &CurvesArgs) -> Result<(), CliError> {
    let ch = load_channel(&a.channel)?;
    let psis = parse_range(&a.psi_range)?;
    let (mode, values) = match brm_mode(a.mode) {
        None => (CurveMode::Dfa, a.eps.clone()),
        Some(BrmMode::General) => (CurveMode::BrmGeneral, a.lambda.clone()),
        Some(BrmMode::Sampling) => (CurveMode::BrmSampling, a.lambda.clone()),
    };
    if values.is_empty() {
        let flag = if mode == CurveMode::Dfa {
            "--eps"
        } else {
            "--lambda"
        };
        return Err(CliError::Usage(format!(
            "{flag} needs at least one value for --mode {}",
            mode_name(a.mode)
        )));
    }
    let req = SweepRequest {
        mode,
        psis,
        values,
        eps_fa: a.eps_fa,
        eps_fr: a.eps_fr,
        theta: a.slack.theta,
        gamma: a.slack.gamma,
    };
    let rows = with_pool(a.jobs, || sweep_curves(&req, &ch))?;
    let mut csv = String::new();
    csv.push_str(CURVES_CSV_HEADER);
    csv.push('\n');
    for r in &rows {
        let opt = |v: Option<f64>| v.map(|x| sig(x, 9)).unwrap_or_default();
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            sig(r.psi, 9),
            sig(r.eps_or_lambda, 9),
            opt(r.e0_star_dbm),
            opt(r.beta_star),
            r.length.map(|l| l.to_string()).unwrap_or_default(),
            r.feasible
        ));
    }
    if a.out.as_os_str() == "-" {
        std::io::stdout()
            .write_all(csv.as_bytes())
            .map_err(io_err)?;
    } else {
        fs::write(&a.out, csv).map_err(io_err)?;
    }
    let infeasible = rows.iter().filter(|r| !r.feasible).count();
    if infeasible > 0 {
        eprintln!(
            "note: {infeasible} of {} grid points are infeasible",
            rows.len()
        );
    }
    Ok(())
}

fn scenario(a: &SimulateArgs) -> Scenario {
    match a.scenario {
        ScenarioArg::Honest => Scenario::Honest,
        ScenarioArg::Dfa => Scenario::Dfa,
        ScenarioArg::Mfa => Scenario::Mfa {
            strategy: match a.mfa_strategy {
                MfaArg::Replay => MfaStrategy::Replay,
                MfaArg::RandomTag => MfaStrategy::RandomTag,
                MfaArg::BestGuess => MfaStrategy::BestGuess,
            },
        },
        ScenarioArg::Impersonation => Scenario::Impersonation {
            leak_sampler_key: a.leak_sampler_key,
        },
        ScenarioArg::TfaRelay => Scenario::TfaRelay,
        ScenarioArg::TfaSampling => Scenario::TfaSampling {
            index_choice: match a.index_choice {
                IndexArg::First => IndexChoice::First,
                IndexArg::Random => IndexChoice::Random,
            },
        },
        ScenarioArg::TfaGeneral => Scenario::TfaGeneral {
            strategy: match a.general_strategy {
                GeneralArg::Sampling => GeneralStrategy::Sampling,
                GeneralArg::ParitySketch => GeneralStrategy::ParitySketch,
                GeneralArg::BlockMajority => GeneralStrategy::BlockMajority,
            },
        },
    }
}

fn protocol_config(
    a: &SimulateArgs,
    spec: &DbvSpec,
    ch: &ChannelParams,
) -> Result<ProtocolConfig, CliError> {
    let kind = match a.protocol {
        ProtocolArg::Pi1 => ProtocolKind::Pi1,
        ProtocolArg::Pi2 => ProtocolKind::Pi2,
        ProtocolArg::Pi3 => ProtocolKind::Pi3,
    };
    let theta = a.slack.theta;
    let gamma = a.slack.gamma.unwrap_or_else(|| default_gamma(a.eps_fa));
    let missing = |flag: &str| CliError::Usage(format!("{flag} is required without --auto"));
    let mut cfg = if a.auto {
        if a.e0.is_some() || a.k.is_some() || a.beta.is_some() || a.n.is_some() {
            return Err(CliError::Usage(
                "--auto picks e0, k, beta and n; do not pass them".into(),
            ));
        }
        match kind {
            ProtocolKind::Pi3 => {
                let lambda = a
                    .lambda
                    .ok_or_else(|| CliError::Usage("--lambda is required for pi3".into()))?;
                let mode = match a.brm_mode {
                    BrmModeArg::Sampling => BrmMode::Sampling,
                    BrmModeArg::General => BrmMode::General,
                };
                ProtocolConfig::from_brm(&optimize_brm(spec, ch, lambda, mode, theta, gamma)?)
            }
            _ => ProtocolConfig::from_dfa(&optimize_dfa(spec, ch)?, kind),
        }
    } else {
        let e0 = a.e0.ok_or_else(|| missing("--e0"))?;
        let beta = a.beta.ok_or_else(|| missing("--beta"))?;
        match kind {
            ProtocolKind::Pi3 => {
                let lambda = a.lambda.ok_or_else(|| missing("--lambda"))?;
                let n = a.n.ok_or_else(|| missing("--n"))?;
                let cfg = ProtocolConfig::pi3(
                    e0,
                    beta,
                    BrmParams {
                        lambda,
                        n,
                        theta,
                        gamma,
                    },
                );
                if a.k.is_some_and(|k| k != cfg.k) {
                    return Err(CliError::Usage(format!(
                        "--k must equal floor(lambda n) = {} for pi3",
                        cfg.k
                    )));
                }
                cfg
            }
            _ => ProtocolConfig::new(kind, e0, a.k.ok_or_else(|| missing("--k"))?, beta),
        }
    };
    cfg.mac_bits = a.mac_bits;
    if a.no_mac {
        if kind != ProtocolKind::Pi3 {
            return Err(CliError::Usage("--no-mac applies to pi3 only".into()));
        }
        cfg.mac_enabled = false;
    }
    cfg.validate(ch)?;
    cfg.check_mac_security(a.eps_fa)?;
    Ok(cfg)
}

pub fn simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let ch = load_channel(&a.channel)?;
    let spec =
        DbvSpec::new(a.psi, a.eps_fa, a.eps_fr).map_err(|e| CliError::Usage(e.to_string()))?;
    let cfg = protocol_config(a, &spec, &ch)?;
    let scenario = scenario(a);
    let d_claim = a.d_claim.or(a.d_claim_km.map(|km| km * 1e3)).unwrap_or(1e3);
    let d_real = a
        .d_real
        .or(a.d_real_km.map(|km| km * 1e3))
        .unwrap_or(match scenario {
            Scenario::Honest => d_claim,
            _ => a.psi * d_claim,
        });
    let setup = Setup {
        d_claim,
        d_real,
        intruder_d: a.intruder_d,
    };
    if scenario != Scenario::Honest && d_real < a.psi * d_claim {
        eprintln!(
            "warning: d_real = {d_real} m lies inside the ψ·d_claim = {} m ring, where no security claim applies",
            a.psi * d_claim
        );
    }
    let opts = EstimateOptions {
        collect_records: a.dump_transcripts.is_some(),
    };
    let (summary, records) = with_pool(a.jobs, || {
        estimate_rates_with(&scenario, &cfg, &spec, &setup, &ch, a.trials, a.seed, opts)
    })??;
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    if summary.blocked > 0 {
        eprintln!(
            "note: {} of {} trials were stopped by the retrieval audit",
            summary.blocked, summary.trials
        );
    }
    if let Some(path) = &a.dump_transcripts {
        let mut text = String::new();
        for r in &records {
            text.push_str(
                &serde_json::to_string(r).map_err(|e| CliError::Internal(e.to_string()))?,
            );
            text.push('\n');
        }
        fs::write(path, text).map_err(io_err)?;
    }
    match a.format {
        OutputFormat::Csv => {
            println!("{SUMMARY_CSV_HEADER}");
            println!("{}", summary.csv_row());
            Ok(())
        }
        OutputFormat::Json => {
            let check = compare_to_bound(&summary);
            let value = json!({
                "schema_version": SCHEMA_VERSION,
                "command": "simulate",
                "config": cfg,
                "e0_dbm": dbv_core::channel::watts_to_dbm(cfg.e0),
                "setup": setup,
                "summary": summary,
                "check": check,
            });
            print_json(&value, a.plain)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_parsing() {
        assert_eq!(
            parse_range("1.01:1.05:0.01").unwrap(),
            vec![1.01, 1.02, 1.03, 1.04, 1.05]
        );
        assert_eq!(parse_range("2:2:0.1").unwrap(), vec![2.0]);
        assert!(parse_range("2:1:0.1").is_err());
        assert!(parse_range("1:2").is_err());
        assert!(parse_range("1:2:0").is_err());
    }
}
