//! Rate metrics, Monte Carlo sweeps and time-series experiments.

use rayon::prelude::*;

use crate::beamforming::{baseline_solution, matched_beams, quantize_phases, BeamSolution, Scheme};
use crate::channels::{build_channel_set, ChannelSet};
use crate::error::{invalid, mismatch, Result};
use crate::geometry::ScenarioConfig;
use crate::rng::substream;
use crate::tracking::{run_protocol, ProtocolConfig};
use crate::CMatrix;

/// `log2(1 + gamma / noise_var)` in bits/s/Hz.
pub fn achievable_rate(gamma: f64, noise_var: f64) -> f64 {
    (1.0 + gamma / noise_var).log2()
}

/// `|w1^T H w2|^2` for a solution's active beams on an effective channel.
pub fn channel_gain(sol: &BeamSolution, h_eff: &CMatrix) -> Result<f64> {
    crate::channels::channel_gain(h_eff, &sol.w1, &sol.w2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepVariable {
    /// Transmit power in dBm.
    TxPower,
    /// Total IRS element count, split per scheme.
    TotalElements,
    /// Snapshot time in seconds.
    Time,
    /// Phase levels per element; 0 keeps continuous phases.
    QuantizationLevels,
    /// Rician factor in dB (`inf` for pure LoS).
    RicianFactor,
}

impl SweepVariable {
    pub const ALL: [SweepVariable; 5] = [
        SweepVariable::TxPower,
        SweepVariable::TotalElements,
        SweepVariable::Time,
        SweepVariable::QuantizationLevels,
        SweepVariable::RicianFactor,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::TxPower => "tx_power",
            SweepVariable::TotalElements => "total_elements",
            SweepVariable::Time => "time",
            SweepVariable::QuantizationLevels => "quantization_levels",
            SweepVariable::RicianFactor => "rician_factor",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|v| v.name() == s).ok_or_else(|| invalid(format!("unknown sweep variable '{s}'")))
    }
}

impl std::fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub monte_carlo_trials: usize,
    pub snapshot_time_s: f64,
}

impl SweepSpec {
    pub fn new(variable: SweepVariable, values: Vec<f64>, schemes: Vec<Scheme>) -> Self {
        Self { variable, values, schemes, monte_carlo_trials: 100, snapshot_time_s: 10.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(invalid("sweep needs at least one value"));
        }
        if self.schemes.is_empty() {
            return Err(invalid("sweep needs at least one scheme"));
        }
        if self.monte_carlo_trials == 0 {
            return Err(invalid("sweep needs at least one trial"));
        }
        if !self.snapshot_time_s.is_finite() {
            return Err(invalid("snapshot time must be finite"));
        }
        for &v in &self.values {
            let ok = match self.variable {
                SweepVariable::TxPower | SweepVariable::Time => v.is_finite(),
                SweepVariable::TotalElements => v >= 0.0 && v.fract() == 0.0 && v.is_finite(),
                SweepVariable::QuantizationLevels => v == 0.0 || (v >= 2.0 && v.fract() == 0.0 && v.is_finite()),
                SweepVariable::RicianFactor => !v.is_nan(),
            };
            if !ok {
                return Err(invalid(format!("invalid {} value {v}", self.variable)));
            }
        }
        Ok(())
    }
}

/// One averaged point of a sweep or time series.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub variable: SweepVariable,
    pub scheme: String,
    pub value: f64,
    pub gamma: f64,
    pub rate_bps_hz: f64,
    pub trials: usize,
    pub seed: u64,
}

/// Per-trial gains of one `(value, scheme)` point, kept for statistics
/// beyond the mean.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSamples {
    pub value: f64,
    pub scheme: Scheme,
    pub noise_var: f64,
    pub gammas: Vec<f64>,
}

impl PointSamples {
    pub fn mean_gamma(&self) -> f64 {
        self.gammas.iter().sum::<f64>() / self.gammas.len() as f64
    }

    pub fn mean_rate(&self) -> f64 {
        mean_rate(&self.gammas, self.noise_var)
    }
}

pub fn mean_rate(gammas: &[f64], noise_var: f64) -> f64 {
    gammas.iter().map(|&g| achievable_rate(g, noise_var)).sum::<f64>() / gammas.len() as f64
}

fn uses_both_surfaces(scheme: Scheme) -> bool {
    matches!(
        scheme,
        Scheme::TwoSided | Scheme::SatReflectarrayGnIrs | Scheme::RandomPhase | Scheme::CpbWithoutCommonPhase
    )
}

/// IRS sizes a scheme runs with. Two-surface schemes keep the configured
/// split unless the total itself is being swept; single-surface schemes put
/// the whole budget on their side.
pub fn scheme_arrays(scheme: Scheme, m1: usize, m2: usize, total_override: Option<usize>) -> (usize, usize) {
    match total_override {
        Some(total) => scheme.irs_split(total),
        None if uses_both_surfaces(scheme) => (m1, m2),
        None => scheme.irs_split(m1 + m2),
    }
}

/// Scenario for one sweep point, plus the snapshot time and quantization.
fn point_config(cfg: &ScenarioConfig, spec: &SweepSpec, value: f64, scheme: Scheme) -> (ScenarioConfig, f64, usize) {
    let mut c = cfg.clone();
    let mut t = spec.snapshot_time_s;
    let mut levels = 0;
    let mut total = None;
    match spec.variable {
        SweepVariable::TxPower => c.tx_power_dbm = value,
        SweepVariable::TotalElements => total = Some(value as usize),
        SweepVariable::Time => t = value,
        SweepVariable::QuantizationLevels => levels = value as usize,
        SweepVariable::RicianFactor => c.rician_factor_db = value,
    }
    let (m1, m2) = scheme_arrays(scheme, cfg.arrays.m1, cfg.arrays.m2, total);
    c.arrays.m1 = m1;
    c.arrays.m2 = m2;
    (c, t, levels)
}

fn scheme_gain(cs: &ChannelSet, scheme: Scheme, levels: usize, seed: u64, trial: u64, point: u64) -> Result<f64> {
    let mut rng = substream(seed, "scheme", &[trial, point]);
    let mut sol = baseline_solution(cs, scheme, &mut rng)?;
    if levels > 0 {
        sol = matched_beams(cs, quantize_phases(&sol.theta1, levels)?, quantize_phases(&sol.theta2, levels)?)?;
    }
    sol.gain(cs)
}

/// Draw all points of one trial. Channel sets are shared between points
/// with the same geometry, and every build restarts the trial's fading
/// stream, so points differ only through the swept variable.
fn run_trial(cfg: &ScenarioConfig, spec: &SweepSpec, trial: u64) -> Result<Vec<f64>> {
    let mut cache: Vec<((usize, usize, u64, u64), ChannelSet)> = Vec::new();
    let mut out = Vec::with_capacity(spec.values.len() * spec.schemes.len());
    for (vi, &value) in spec.values.iter().enumerate() {
        for (si, &scheme) in spec.schemes.iter().enumerate() {
            let (c, t, levels) = point_config(cfg, spec, value, scheme);
            let key = (c.arrays.m1, c.arrays.m2, t.to_bits(), c.kappa_linear().to_bits());
            let idx = match cache.iter().position(|(k, _)| *k == key) {
                Some(i) => i,
                None => {
                    let mut rng = substream(cfg.rng_seed, "trial", &[trial]);
                    cache.push((key, build_channel_set(&c, t, c.kappa_linear(), &mut rng)?));
                    cache.len() - 1
                }
            };
            let point = (vi * spec.schemes.len() + si) as u64;
            out.push(scheme_gain(&cache[idx].1, scheme, levels, cfg.rng_seed, trial, point)?);
        }
    }
    Ok(out)
}

/// Per-trial gains for every `(value, scheme)` point, in value-major order.
/// Trials run in parallel on independent substreams; results do not depend
/// on the thread count.
pub fn sweep_samples(cfg: &ScenarioConfig, spec: &SweepSpec) -> Result<Vec<PointSamples>> {
    cfg.validate()?;
    spec.validate()?;
    for &scheme in &spec.schemes {
        let (c, _, _) = point_config(cfg, spec, spec.values[0], scheme);
        c.validate()?;
    }
    let per_trial: Vec<Vec<f64>> = (0..spec.monte_carlo_trials as u64)
        .into_par_iter()
        .map(|trial| run_trial(cfg, spec, trial))
        .collect::<Result<_>>()?;
    let mut points = Vec::with_capacity(spec.values.len() * spec.schemes.len());
    for (vi, &value) in spec.values.iter().enumerate() {
        for (si, &scheme) in spec.schemes.iter().enumerate() {
            let k = vi * spec.schemes.len() + si;
            let (c, _, _) = point_config(cfg, spec, value, scheme);
            points.push(PointSamples {
                value,
                scheme,
                noise_var: c.noise_var(),
                gammas: per_trial.iter().map(|g| g[k]).collect(),
            });
        }
    }
    Ok(points)
}

/// Monte Carlo averaged rows, one per `(value, scheme)`.
pub fn run_sweep(cfg: &ScenarioConfig, spec: &SweepSpec) -> Result<Vec<ResultRow>> {
    Ok(sweep_samples(cfg, spec)?
        .into_iter()
        .map(|p| ResultRow {
            variable: spec.variable,
            scheme: p.scheme.name().to_string(),
            value: p.value,
            gamma: p.mean_gamma(),
            rate_bps_hz: p.mean_rate(),
            trials: p.gammas.len(),
            seed: cfg.rng_seed,
        })
        .collect())
}

/// Extra transmit power (dB) that `gammas_b` needs to reach the mean rate
/// `gammas_a` achieves at `tx_power_dbm`. Negative when `b` is stronger.
pub fn power_gap_db(gammas_a: &[f64], gammas_b: &[f64], noise_dbm: f64, tx_power_dbm: f64) -> Result<f64> {
    if gammas_a.is_empty() || gammas_b.is_empty() {
        return Err(invalid("power gap needs samples on both curves"));
    }
    let rate = |g: &[f64], p_dbm: f64| mean_rate(g, 10f64.powf((noise_dbm - p_dbm) / 10.0));
    let target = rate(gammas_a, tx_power_dbm);
    let (mut lo, mut hi) = (tx_power_dbm - 60.0, tx_power_dbm + 60.0);
    if rate(gammas_b, lo) > target || rate(gammas_b, hi) < target {
        return Err(invalid("power gap outside the searched +-60 dB window"));
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if rate(gammas_b, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi) - tx_power_dbm)
}

/// Time series for one or more schemes under the training/tracking
/// protocol. Each scheme yields three labelled series:
/// `<scheme>:proposed`, `<scheme>:benchmark` and `<scheme>:perfect`.
/// Only schemes with the closed-form design are meaningful here.
pub fn run_tracking_experiment(
    cfg: &ScenarioConfig,
    pc: &ProtocolConfig,
    schemes: &[Scheme],
) -> Result<Vec<ResultRow>> {
    if schemes.is_empty() {
        return Err(invalid("tracking experiment needs at least one scheme"));
    }
    let mut rows = Vec::new();
    for &scheme in schemes {
        if !matches!(scheme, Scheme::TwoSided | Scheme::SatIrsOnly | Scheme::GnIrsOnly | Scheme::NoIrs) {
            return Err(mismatch(format!("scheme {scheme} has no tracking protocol")));
        }
        let mut c = cfg.clone();
        let (m1, m2) = scheme_arrays(scheme, cfg.arrays.m1, cfg.arrays.m2, None);
        c.arrays.m1 = m1;
        c.arrays.m2 = m2;
        let mut tc = pc.training;
        tc.i_d = tc.i_d.max(m1 + 2);
        tc.i_u = tc.i_u.max(m2 + 2);
        let runs = [true, false]
            .map(|track| run_protocol(&c, &ProtocolConfig { tracking_enabled: track, training: tc, ..*pc }));
        let [proposed, benchmark] = runs;
        let (proposed, benchmark) = (proposed?, benchmark?);
        let row = |label: &str, t: f64, gamma: f64, rate: f64| ResultRow {
            variable: SweepVariable::Time,
            scheme: format!("{scheme}:{label}"),
            value: t,
            gamma,
            rate_bps_hz: rate,
            trials: 1,
            seed: cfg.rng_seed,
        };
        for s in &proposed.samples {
            rows.push(row("proposed", s.t, s.gamma, s.rate));
        }
        for s in &benchmark.samples {
            rows.push(row("benchmark", s.t, s.gamma, s.rate));
        }
        for s in &proposed.samples {
            rows.push(row("perfect", s.t, s.gamma_perfect, s.rate_perfect));
        }
    }
    Ok(rows)
}
