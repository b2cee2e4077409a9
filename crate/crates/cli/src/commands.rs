//! Subcommand bodies and the self-test suite.

use std::f64::consts::PI;

use leo_irs::beamforming::{
    baseline_solution, brute_force_oracle, closed_form_solution, matched_beams, mrt_mrc, side_vector, solve_side,
    BeamSolution, OfflineSide, Scheme, Side,
};
use leo_irs::channels::{build_channel_set, synthetic_los, ChannelSet, SyntheticSizes};
use leo_irs::estimation::{estimate_local_csi, initial_access_beams};
use leo_irs::experiments::{run_sweep, run_tracking_experiment, ResultRow, SweepVariable};
use leo_irs::geometry::ArraySizes;
use leo_irs::rng::substream;
use leo_irs::{CVector, Complex64, ScenarioConfig, TrainingConfig};

use crate::config::{ConfigError, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    PowerSweep,
    ElementSweep,
    Sweep,
    Tracking,
    Snapshot,
}

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Runtime(String),
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<leo_irs::Error> for RunError {
    fn from(e: leo_irs::Error) -> Self {
        RunError::Runtime(e.to_string())
    }
}

/// Validate everything the command needs, then run it.
pub fn execute(cmd: Command, rc: &RunConfig) -> Result<Vec<ResultRow>, RunError> {
    let scenario = rc.scenario()?;
    match cmd {
        Command::PowerSweep | Command::ElementSweep | Command::Sweep | Command::Snapshot => {
            let mut spec = match cmd {
                Command::PowerSweep => rc.sweep(SweepVariable::TxPower)?,
                Command::ElementSweep => rc.sweep(SweepVariable::TotalElements)?,
                Command::Sweep => {
                    let variable = rc.sweep_variable.ok_or_else(|| ConfigError {
                        key: "sweep.variable".into(),
                        line: None,
                        message: "the sweep subcommand needs a sweep variable".into(),
                    })?;
                    rc.sweep(variable)?
                }
                _ => rc.sweep(SweepVariable::Time)?,
            };
            if cmd == Command::Snapshot {
                spec.variable = SweepVariable::Time;
                spec.values = vec![rc.snapshot_time_s];
            }
            Ok(run_sweep(&scenario, &spec)?)
        }
        Command::Tracking => {
            let pc = rc.protocol(&scenario)?;
            Ok(run_tracking_experiment(&scenario, &pc, &rc.tracking_schemes)?)
        }
    }
}

/// One self-test outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn tiny(seed: u64) -> ChannelSet {
    let sizes = SyntheticSizes { n1: (2, 1), m1: (2, 1), n2: (1, 2), m2: (1, 2) };
    synthetic_los(&mut substream(seed, "selftest", &[]), sizes).expect("synthetic channel")
}

fn small_scenario(kappa_db: f64) -> ScenarioConfig {
    ScenarioConfig {
        rician_factor_db: kappa_db,
        fold_split_residual: true,
        arrays: ArraySizes { m1: 40, m2: 60, ..ArraySizes::default() },
        ..ScenarioConfig::default()
    }
}

fn oracle_check() -> CheckResult {
    let k = 8;
    let floor = (PI / k as f64).cos().powi(4);
    let mut worst = f64::INFINITY;
    let mut ok = true;
    for seed in 0..10 {
        let cs = tiny(seed);
        let closed = closed_form_solution(&cs).and_then(|s| s.gain(&cs));
        let oracle = brute_force_oracle(&cs, k);
        match (closed, oracle) {
            (Ok(c), Ok((_, o))) => {
                ok &= o <= c * (1.0 + 1e-9) && o >= floor * c;
                worst = worst.min(o / c);
            }
            _ => ok = false,
        }
    }
    CheckResult {
        name: "closed form vs exhaustive search",
        passed: ok,
        detail: format!("worst oracle/closed {worst:.4}"),
    }
}

/// Rotating either reflection vector by a common phase must not beat the
/// closed-form choice.
fn common_phase_check() -> CheckResult {
    let mut ok = true;
    let mut best_gain = 0.0f64;
    for seed in 20..30 {
        let cs = tiny(seed);
        let Ok(sol) = closed_form_solution(&cs) else {
            ok = false;
            continue;
        };
        let g = sol.gain(&cs).unwrap_or(0.0);
        for step in 1..32 {
            let rot = Complex64::from_polar(1.0, 2.0 * PI * step as f64 / 32.0);
            for side in [Side::Gn, Side::Sat] {
                let (t1, t2) = match side {
                    Side::Gn => (sol.theta1.map(|z| z * rot), sol.theta2.clone()),
                    Side::Sat => (sol.theta1.clone(), sol.theta2.map(|z| z * rot)),
                };
                let rotated = matched_beams(&cs, t1, t2).and_then(|s| s.gain(&cs)).unwrap_or(f64::INFINITY);
                best_gain = best_gain.max(rotated / g - 1.0);
                ok &= rotated <= g * (1.0 + 1e-9);
            }
        }
    }
    CheckResult {
        name: "common phase optimality",
        passed: ok,
        detail: format!("largest relative improvement {best_gain:.2e}"),
    }
}

fn decomposition_check() -> CheckResult {
    let cfg = small_scenario(f64::INFINITY);
    let run = || -> leo_irs::Result<f64> {
        let cs = build_channel_set(&cfg, 10.0, f64::INFINITY, &mut substream(0, "selftest", &[1]))?;
        let mut rng = substream(0, "selftest", &[2]);
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let BeamSolution { theta1: t1, theta2: t2, .. } = baseline_solution(&cs, Scheme::RandomPhase, &mut rng)?;
            let f1 = side_vector(&cs, &t1, Side::Gn)?;
            let f2 = side_vector(&cs, &t2, Side::Sat)?;
            let g = cs.gain(&mrt_mrc(&f1)?, &t1, &t2, &mrt_mrc(&f2)?)?;
            let p = f1.norm_squared() * f2.norm_squared();
            worst = worst.max((g - p).abs() / p);
        }
        Ok(worst)
    };
    match run() {
        Ok(w) => CheckResult {
            name: "outer-product decomposition",
            passed: w <= 1e-9,
            detail: format!("worst error {w:.2e}"),
        },
        Err(e) => CheckResult { name: "outer-product decomposition", passed: false, detail: e.to_string() },
    }
}

fn estimation_check() -> CheckResult {
    let cfg = small_scenario(f64::INFINITY);
    let run = || -> leo_irs::Result<f64> {
        let cs = build_channel_set(&cfg, 10.0, f64::INFINITY, &mut substream(0, "selftest", &[3]))?;
        let tc = TrainingConfig::new(cfg.arrays.m1, cfg.arrays.m2, 0.0);
        let mut rng = substream(0, "selftest", &[4]);
        let (w2, theta2) = initial_access_beams(&cs);
        let peer = BeamSolution { w1: CVector::zeros(0), theta1: CVector::zeros(0), w2, theta2 };
        let gn = solve_side(
            &estimate_local_csi(&cs, Side::Gn, &peer, &tc, &mut rng)?,
            &OfflineSide::from_channel_set(&cs, Side::Gn),
        )?;
        let up = BeamSolution { w1: gn.w.clone(), theta1: gn.theta.clone(), ..peer };
        let sat = solve_side(
            &estimate_local_csi(&cs, Side::Sat, &up, &tc, &mut rng)?,
            &OfflineSide::from_channel_set(&cs, Side::Sat),
        )?;
        let est = BeamSolution { w1: gn.w, theta1: gn.theta, w2: sat.w, theta2: sat.theta }.gain(&cs)?;
        let perfect = closed_form_solution(&cs)?.gain(&cs)?;
        Ok((est - perfect).abs() / perfect)
    };
    match run() {
        Ok(e) => CheckResult {
            name: "noiseless estimation recovery",
            passed: e <= 1e-6,
            detail: format!("relative gain error {e:.2e}"),
        },
        Err(e) => CheckResult { name: "noiseless estimation recovery", passed: false, detail: e.to_string() },
    }
}

pub fn selftest() -> Vec<CheckResult> {
    vec![oracle_check(), common_phase_check(), decomposition_check(), estimation_check()]
}
