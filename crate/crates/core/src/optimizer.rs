//! Parameter search for the shortest secure challenge.
//!
//! For a fixed base power `E0` the channel gives `(p_i, p_b)`; the best
//! threshold `beta` is where the (decreasing) completeness term meets the
//! (increasing) soundness term, found by bisection. The outer search over
//! `E0` is a logarithmic grid over `[1e-6 E_max, E_max]` followed by a zoom
//! onto the feasible window and golden-section refinement.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{
    reject_term, BoundsError, BrmLength, DbvSpec, SoundnessModel, DEFAULT_LENGTH_CAP,
};
use crate::channel::{ber_for_snr0, watts_to_dbm, BerPair, ChannelError, ChannelParams};

/// Sampler slack used when the caller does not supply one.
pub const DEFAULT_THETA: f64 = 1e-4;

/// Sampler failure probability used when the caller does not supply one.
pub fn default_gamma(eps_fa: f64) -> f64 {
    eps_fa / 100.0
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimizeError {
    #[error("infeasible for every E0 ≤ E_max: {condition} cannot hold (ψ={psi}{})",
        lambda.map(|l| format!(", λ={l}")).unwrap_or_default())]
    Infeasible {
        condition: &'static str,
        psi: f64,
        lambda: Option<f64>,
    },
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

impl OptimizeError {
    pub fn condition(&self) -> Option<&'static str> {
        match self {
            OptimizeError::Infeasible { condition, .. } => Some(condition),
            OptimizeError::Bounds(b) => b.condition(),
            OptimizeError::Channel(_) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BrmMode {
    General,
    Sampling,
}

#[derive(Clone, Copy, Debug)]
pub struct OptimizerOptions {
    /// Points in the logarithmic `E0` grid.
    pub grid_points: usize,
    /// Lower end of the grid as a fraction of `E_max`.
    pub min_power_fraction: f64,
    /// Relative tolerance on `E0` for the golden-section refinement.
    pub rel_tol: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            grid_points: 2000,
            min_power_fraction: 1e-6,
            rel_tol: 1e-6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimalDfaConfig {
    pub e0_star: f64,
    pub e0_star_dbm: f64,
    pub beta_star: f64,
    pub k_star: u64,
    /// Minimised max-term before scaling by `ln(1/ε)`; with unequal targets
    /// this is `k` divided by `ln(1/ε_FA)`.
    pub objective: f64,
    pub p_i: f64,
    pub p_b: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimalBrmConfig {
    pub mode: BrmMode,
    pub lambda: f64,
    pub theta: f64,
    pub gamma: f64,
    pub e0_star: f64,
    pub e0_star_dbm: f64,
    pub beta_star: f64,
    pub mu_star: f64,
    pub k_star: u64,
    pub n_star: u64,
    pub objective: f64,
    pub p_i: f64,
    pub p_b: f64,
}

/// Solution of the inner threshold problem at fixed `(p_i, p_b)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdSolution {
    pub beta: f64,
    /// `max(w_fr * term1, w_fa * term2)` at `beta`.
    pub value: f64,
    pub term1: f64,
    pub term2: f64,
}

/// Minimises `max(w_fr * reject_term, w_fa * accept_term)` over the
/// admissible thresholds. `None` when no threshold is admissible.
pub fn solve_threshold(
    ber: &BerPair,
    model: &SoundnessModel,
    w_fr: f64,
    w_fa: f64,
) -> Option<ThresholdSolution> {
    let mut lo = ber.p_i;
    let mut hi = model.beta_limit(ber.p_b);
    if !(lo < hi) || !hi.is_finite() {
        return None;
    }
    let eval = |b: f64| {
        let t1 = w_fr * reject_term(ber.p_i, b);
        let t2 = w_fa * model.accept_term(ber.p_b, b);
        (t1, t2)
    };
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (t1, t2) = eval(mid);
        if t1 > t2 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Pick whichever end of the final bracket has the smaller max term.
    let (a1, a2) = eval(lo);
    let (b1, b2) = eval(hi);
    let (beta, t1, t2) = if a1.max(a2) <= b1.max(b2) {
        (lo, a1, a2)
    } else {
        (hi, b1, b2)
    };
    let value = t1.max(t2);
    if !value.is_finite() || beta <= ber.p_i {
        return None;
    }
    Some(ThresholdSolution {
        beta,
        value,
        term1: t1 / w_fr,
        term2: t2 / w_fa,
    })
}

/// Scalar problem in `x = ln E0`.
struct PowerSearch<'a> {
    ch: &'a ChannelParams,
    psi: f64,
    model: SoundnessModel,
    w_fr: f64,
    w_fa: f64,
    opts: OptimizerOptions,
}

impl PowerSearch<'_> {
    fn ber(&self, x: f64) -> BerPair {
        ber_for_snr0(self.ch.snr0(x.exp()), self.psi, self.ch.alpha)
    }

    /// Feasibility margin, normalised by `p_b`; positive iff some threshold
    /// is admissible.
    fn margin(&self, x: f64) -> f64 {
        let ber = self.ber(x);
        if ber.p_b <= 0.0 {
            return f64::NEG_INFINITY;
        }
        (self.model.mu_limit(ber.p_b) - ber.p_i) / ber.p_b
    }

    fn objective(&self, x: f64) -> f64 {
        solve_threshold(&self.ber(x), &self.model, self.w_fr, self.w_fa)
            .map(|s| s.value)
            .unwrap_or(f64::INFINITY)
    }

    fn bounds(&self) -> (f64, f64) {
        let hi = self.ch.e_max.ln();
        (hi + self.opts.min_power_fraction.ln(), hi)
    }

    fn grid(&self, a: f64, b: f64) -> Vec<f64> {
        let n = self.opts.grid_points.max(3);
        (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect()
    }

    /// Largest normalised margin over the power range and where it occurs.
    fn best_margin(&self) -> (f64, f64) {
        let (a, b) = self.bounds();
        let grid = self.grid(a, b);
        let (i, _) = argmax(grid.iter().map(|&x| self.margin(x)));
        let (lo, hi) = neighbours(&grid, i);
        let x = golden_min(|x| -self.margin(x), lo, hi, 1e-12);
        let (x, m) = [(x, self.margin(x)), (grid[i], self.margin(grid[i]))]
            .into_iter()
            .fold((f64::NAN, f64::NEG_INFINITY), |acc, c| {
                if c.1 > acc.1 {
                    c
                } else {
                    acc
                }
            });
        (x, m)
    }

    /// Feasible window `[a, b]` in `ln E0` around the margin maximum.
    fn feasible_window(&self) -> Option<(f64, f64)> {
        let (lo, hi) = self.bounds();
        let (x0, m0) = self.best_margin();
        if !(m0 > 0.0) {
            return None;
        }
        let edge = |mut inside: f64, mut outside: f64| {
            if self.margin(outside) > 0.0 {
                return outside;
            }
            for _ in 0..200 {
                let mid = 0.5 * (inside + outside);
                if self.margin(mid) > 0.0 {
                    inside = mid;
                } else {
                    outside = mid;
                }
            }
            inside
        };
        Some((edge(x0, lo), edge(x0, hi)))
    }

    fn minimise(&self) -> Option<(f64, f64)> {
        let (a, b) = self.feasible_window()?;
        let grid = self.grid(a, b);
        let values: Vec<f64> = grid.iter().map(|&x| self.objective(x)).collect();
        let (i, best) = argmin(values.iter().copied());
        if !best.is_finite() {
            return None;
        }
        let (lo, hi) = neighbours(&grid, i);
        let tol = self.opts.rel_tol.min(1e-3);
        let x = golden_min(|x| self.objective(x), lo, hi, tol);
        let fx = self.objective(x);
        if fx < best {
            Some((x, fx))
        } else {
            Some((grid[i], best))
        }
    }
}

fn argmin(it: impl Iterator<Item = f64>) -> (usize, f64) {
    it.enumerate().fold(
        (0, f64::INFINITY),
        |acc, (i, v)| if v < acc.1 { (i, v) } else { acc },
    )
}

fn argmax(it: impl Iterator<Item = f64>) -> (usize, f64) {
    it.enumerate().fold(
        (0, f64::NEG_INFINITY),
        |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
    )
}

fn neighbours(grid: &[f64], i: usize) -> (f64, f64) {
    (grid[i.saturating_sub(1)], grid[(i + 1).min(grid.len() - 1)])
}

/// Golden-section minimisation on `[a, b]` down to width `tol`.
fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        c
    } else {
        d
    }
}

fn weights(eps_fr: f64, eps_fa_eff: f64) -> (f64, f64, f64) {
    let w_fr = (1.0 / eps_fr).ln();
    let w_fa = (1.0 / eps_fa_eff).ln();
    // Equal weights factor out, which keeps E0* independent of ε exactly.
    if w_fr == w_fa {
        (1.0, 1.0, w_fr)
    } else {
        (w_fr, w_fa, 1.0)
    }
}

fn ceil_length(real: f64) -> Result<u64, BoundsError> {
    if !real.is_finite() || real > DEFAULT_LENGTH_CAP as f64 {
        return Err(BoundsError::ExceedsCap {
            required: real,
            cap: DEFAULT_LENGTH_CAP,
        });
    }
    Ok(real.ceil().max(1.0) as u64)
}

/// Shortest challenge for the plain/MAC protocols.
pub fn optimize_dfa(spec: &DbvSpec, ch: &ChannelParams) -> Result<OptimalDfaConfig, OptimizeError> {
    optimize_dfa_with(spec, ch, OptimizerOptions::default())
}

pub fn optimize_dfa_with(
    spec: &DbvSpec,
    ch: &ChannelParams,
    opts: OptimizerOptions,
) -> Result<OptimalDfaConfig, OptimizeError> {
    spec.validate()?;
    ch.validate()?;
    let (w_fr, w_fa, scale) = weights(spec.eps_fr, spec.eps_fa);
    let search = PowerSearch {
        ch,
        psi: spec.psi,
        model: SoundnessModel::Dfa,
        w_fr,
        w_fa,
        opts,
    };
    let (x, value) = search.minimise().ok_or(OptimizeError::Infeasible {
        condition: SoundnessModel::Dfa.condition(),
        psi: spec.psi,
        lambda: None,
    })?;
    let ber = search.ber(x);
    let sol = solve_threshold(&ber, &search.model, w_fr, w_fa).expect("feasible at optimum");
    let k_real = value * scale;
    let e0 = x.exp().min(ch.e_max);
    Ok(OptimalDfaConfig {
        e0_star: e0,
        e0_star_dbm: watts_to_dbm(e0),
        beta_star: sol.beta,
        k_star: ceil_length(k_real)?,
        objective: k_real / (1.0 / spec.eps_fa).ln(),
        p_i: ber.p_i,
        p_b: ber.p_b,
    })
}

/// Shortest source output for the bounded-retrieval protocol.
pub fn optimize_brm(
    spec: &DbvSpec,
    ch: &ChannelParams,
    lambda: f64,
    mode: BrmMode,
    theta: f64,
    gamma: f64,
) -> Result<OptimalBrmConfig, OptimizeError> {
    optimize_brm_with(
        spec,
        ch,
        lambda,
        mode,
        theta,
        gamma,
        OptimizerOptions::default(),
    )
}

pub fn optimize_brm_with(
    spec: &DbvSpec,
    ch: &ChannelParams,
    lambda: f64,
    mode: BrmMode,
    theta: f64,
    gamma: f64,
    opts: OptimizerOptions,
) -> Result<OptimalBrmConfig, OptimizeError> {
    spec.validate()?;
    ch.validate()?;
    let brm = crate::bounds::BrmSpec::new(lambda, theta, gamma)?;
    if !(gamma < spec.eps_fa) {
        return Err(BoundsError::SamplerFailureTooLarge {
            gamma,
            eps_fa: spec.eps_fa,
        }
        .into());
    }
    let model = brm_model(mode, brm.lambda, brm.theta);
    let (w_fr, w_fa, scale) = weights(spec.eps_fr, spec.eps_fa - gamma);
    let search = PowerSearch {
        ch,
        psi: spec.psi,
        model,
        w_fr,
        w_fa,
        opts,
    };
    let (x, value) = search.minimise().ok_or(OptimizeError::Infeasible {
        condition: model.condition(),
        psi: spec.psi,
        lambda: Some(lambda),
    })?;
    let ber = search.ber(x);
    let sol = solve_threshold(&ber, &model, w_fr, w_fa).expect("feasible at optimum");
    let k_real = value * scale;
    let len = BrmLength::from_k(ceil_length(k_real)?, lambda);
    let e0 = x.exp().min(ch.e_max);
    Ok(OptimalBrmConfig {
        mode,
        lambda,
        theta,
        gamma,
        e0_star: e0,
        e0_star_dbm: watts_to_dbm(e0),
        beta_star: sol.beta,
        mu_star: sol.beta + theta,
        k_star: len.k,
        n_star: len.n,
        objective: k_real / (1.0 / (spec.eps_fa - gamma)).ln(),
        p_i: ber.p_i,
        p_b: ber.p_b,
    })
}

pub fn brm_model(mode: BrmMode, lambda: f64, theta: f64) -> SoundnessModel {
    match mode {
        BrmMode::General => SoundnessModel::BrmGeneral { lambda, theta },
        BrmMode::Sampling => SoundnessModel::BrmSampling { lambda, theta },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaStar {
    pub lambda_star: f64,
    /// False when no positive rate is feasible at any power.
    pub feasible: bool,
}

/// Largest retrieval rate for which some `E0 <= E_max` admits a threshold.
pub fn max_feasible_lambda(psi: f64, ch: &ChannelParams, mode: BrmMode) -> LambdaStar {
    let feasible = |lambda: f64| {
        let search = PowerSearch {
            ch,
            psi,
            model: brm_model(mode, lambda, 0.0),
            w_fr: 1.0,
            w_fa: 1.0,
            opts: OptimizerOptions::default(),
        };
        search.best_margin().1 > 0.0
    };
    let mut lo = 1e-9;
    let mut hi = 1.0 - 1e-9;
    if !feasible(lo) {
        return LambdaStar {
            lambda_star: 0.0,
            feasible: false,
        };
    }
    if feasible(hi) {
        return LambdaStar {
            lambda_star: hi,
            feasible: true,
        };
    }
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    LambdaStar {
        lambda_star: lo,
        feasible: true,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveMode {
    Dfa,
    BrmGeneral,
    BrmSampling,
}

impl CurveMode {
    pub fn brm(&self) -> Option<BrmMode> {
        match self {
            CurveMode::Dfa => None,
            CurveMode::BrmGeneral => Some(BrmMode::General),
            CurveMode::BrmSampling => Some(BrmMode::Sampling),
        }
    }
}

/// One sweep: ψ grid crossed with ε values (DFA) or λ values (BRM).
#[derive(Clone, Debug)]
pub struct SweepRequest {
    pub mode: CurveMode,
    pub psis: Vec<f64>,
    /// ε values for DFA, λ values for BRM.
    pub values: Vec<f64>,
    /// Targets used by BRM rows.
    pub eps_fa: f64,
    pub eps_fr: f64,
    pub theta: f64,
    /// `None` selects [`default_gamma`].
    pub gamma: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub psi: f64,
    pub eps_or_lambda: f64,
    pub e0_star_w: Option<f64>,
    pub e0_star_dbm: Option<f64>,
    pub beta_star: Option<f64>,
    /// `k*` for DFA rows, `n*` for BRM rows.
    pub length: Option<u64>,
    pub feasible: bool,
    pub note: Option<String>,
}

impl SweepRow {
    fn infeasible(psi: f64, v: f64, note: String) -> Self {
        SweepRow {
            psi,
            eps_or_lambda: v,
            e0_star_w: None,
            e0_star_dbm: None,
            beta_star: None,
            length: None,
            feasible: false,
            note: Some(note),
        }
    }
}

/// Runs every grid point (in parallel) and returns rows in grid order:
/// outer loop over the value list, inner over ψ.
pub fn sweep_curves(req: &SweepRequest, ch: &ChannelParams) -> Vec<SweepRow> {
    let points: Vec<(f64, f64)> = req
        .values
        .iter()
        .flat_map(|&v| req.psis.iter().map(move |&psi| (psi, v)))
        .collect();
    points
        .par_iter()
        .map(|&(psi, v)| sweep_point(req, ch, psi, v))
        .collect()
}

fn sweep_point(req: &SweepRequest, ch: &ChannelParams, psi: f64, v: f64) -> SweepRow {
    match req.mode.brm() {
        None => {
            let spec = match DbvSpec::new(psi, v, v) {
                Ok(s) => s,
                Err(e) => return SweepRow::infeasible(psi, v, e.to_string()),
            };
            match optimize_dfa(&spec, ch) {
                Ok(o) => SweepRow {
                    psi,
                    eps_or_lambda: v,
                    e0_star_w: Some(o.e0_star),
                    e0_star_dbm: Some(o.e0_star_dbm),
                    beta_star: Some(o.beta_star),
                    length: Some(o.k_star),
                    feasible: true,
                    note: None,
                },
                Err(e) => SweepRow::infeasible(psi, v, e.to_string()),
            }
        }
        Some(mode) => {
            let spec = match DbvSpec::new(psi, req.eps_fa, req.eps_fr) {
                Ok(s) => s,
                Err(e) => return SweepRow::infeasible(psi, v, e.to_string()),
            };
            let gamma = req.gamma.unwrap_or_else(|| default_gamma(req.eps_fa));
            match optimize_brm(&spec, ch, v, mode, req.theta, gamma) {
                Ok(o) => SweepRow {
                    psi,
                    eps_or_lambda: v,
                    e0_star_w: Some(o.e0_star),
                    e0_star_dbm: Some(o.e0_star_dbm),
                    beta_star: Some(o.beta_star),
                    length: Some(o.n_star),
                    feasible: true,
                    note: None,
                },
                Err(e) => SweepRow::infeasible(psi, v, e.to_string()),
            }
        }
    }
}
