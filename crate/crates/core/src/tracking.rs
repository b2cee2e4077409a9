//! Linear angle prediction between training periods and the alternating
//! training / data-frame protocol.

use std::f64::consts::PI;

use nalgebra::Vector3;

use crate::beamforming::{closed_form_solution, solve_side, BeamSolution, LocalCsi, OfflineSide, Side};
use crate::channels::{build_channel_set, ChannelSet};
use crate::error::{invalid, Result};
use crate::estimation::{estimate_local_csi, initial_access_beams, TrainingConfig};
use crate::experiments::achievable_rate;
use crate::geometry::{
    distance, mean_distance, node_aoa, satellite_velocity_dir, wrap_angle, AoAPair, Node, NodeArrays, ScenarioConfig,
};
use crate::rng::substream;
use crate::CVector;

/// How per-second angle increments are obtained from the known orbit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IncrementMode {
    /// Angle change over the frame divided by its length.
    #[default]
    FiniteDifference,
    /// Line-of-sight rotation rate `V / d_mean` projected on the angle
    /// directions at the frame start.
    ClosedForm,
}

/// Angle rates (rad/s) for the node and IRS of one side, plus the drift
/// rate of the phase difference (zero when it is held).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AngleRates {
    pub node: AoAPair,
    pub irs: AoAPair,
    pub delta_rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackState {
    pub csi0: LocalCsi,
    pub t0: f64,
    pub rates: AngleRates,
}

/// Extrapolate angles and the phase difference linearly from the frame
/// start; the gain ratio is held.
pub fn predict_aoa(state: &TrackState, t: f64) -> LocalCsi {
    let dt = t - state.t0;
    let step = |a: AoAPair, r: AoAPair| AoAPair::new(a.theta_rad + dt * r.theta_rad, a.phi_rad + dt * r.phi_rad);
    LocalCsi {
        aoa_node: step(state.csi0.aoa_node, state.rates.node),
        aoa_irs: step(state.csi0.aoa_irs, state.rates.irs),
        delta_rho: wrap_angle(state.csi0.delta_rho + dt * state.rates.delta_rho),
        ..state.csi0
    }
}

fn observer_and_target(arrays: &NodeArrays, node: Node) -> Result<(crate::ArrayGeometry, Vector3<f64>)> {
    let missing = || invalid("angle rate requested for an IRS with no elements");
    Ok(match node {
        Node::Gn => (arrays.gn.clone(), arrays.sat.origin),
        Node::Irs1 => (arrays.irs1.clone().ok_or_else(missing)?, arrays.sat.origin),
        Node::Sat => (arrays.sat.clone(), arrays.gn.origin),
        Node::Irs2 => (arrays.irs2.clone().ok_or_else(missing)?, arrays.gn.origin),
    })
}

/// Angle rates (rad/s) of `node` over `[t0, t1]`.
pub fn increment_from_orbit(
    cfg: &ScenarioConfig,
    node: Node,
    t0: f64,
    t1: f64,
    mode: IncrementMode,
) -> Result<AoAPair> {
    if !(t1 > t0) {
        return Err(invalid("increment window needs t1 > t0"));
    }
    match mode {
        IncrementMode::FiniteDifference => {
            let a = node_aoa(cfg, node, t0)?;
            let b = node_aoa(cfg, node, t1)?;
            let dt = t1 - t0;
            Ok(AoAPair { theta_rad: wrap_angle(b.theta_rad - a.theta_rad) / dt, phi_rad: (b.phi_rad - a.phi_rad) / dt })
        }
        IncrementMode::ClosedForm => {
            let arrays = NodeArrays::at(cfg, t0)?;
            let (obs, target) = observer_and_target(&arrays, node)?;
            let aoa = node_aoa(cfg, node, t0)?;
            let d_mean = mean_distance(cfg, t0, t1)?;
            let los = (target - obs.origin).normalize();
            let v_sat = satellite_velocity_dir(cfg, t0) * cfg.orbit_speed_mps;
            let ground_side = matches!(node, Node::Gn | Node::Irs1);
            let v_rel = if ground_side { v_sat } else { -v_sat };
            let mut rate = (v_rel - los * v_rel.dot(&los)) / d_mean;
            if !ground_side {
                // satellite frames rotate with the orbit about the orbit normal
                let omega = Vector3::y() * (cfg.orbit_speed_mps / cfg.orbit_radius_m());
                rate -= omega.cross(&los);
            }
            let [x, y, n] = &obs.basis;
            let (st, ct) = aoa.theta_rad.sin_cos();
            let (sp, cp) = aoa.phi_rad.sin_cos();
            let e_theta = -x * st + y * ct;
            let e_phi = -(x * ct + y * st) * sp + n * cp;
            let phi_rate = rate.dot(&e_phi);
            let theta_rate = if cp.abs() > 1e-12 { rate.dot(&e_theta) / cp } else { 0.0 };
            Ok(AoAPair { theta_rad: theta_rate, phi_rad: phi_rate })
        }
    }
}

/// Phase difference between the direct and IRS-assisted paths of one side
/// implied by the reference-element distances at `t`, without wrapping.
pub fn geometric_phase_difference(cfg: &ScenarioConfig, side: Side, t: f64) -> Result<f64> {
    let nodes = NodeArrays::at(cfg, t)?;
    let (sat, gn) = (nodes.sat.origin, nodes.gn.origin);
    let direct = distance(&gn, &sat);
    let extra = match side {
        Side::Gn => distance(&nodes.irs1_position, &sat) - direct,
        Side::Sat => distance(&gn, &nodes.irs2_position) - direct,
    };
    Ok(2.0 * PI * extra / cfg.wavelength_m)
}

/// Rates for both arrays of one side; a missing IRS gets zero rates. The
/// phase-difference rate is filled only when `track_phase` is set.
pub fn side_rates(
    cfg: &ScenarioConfig,
    side: Side,
    t0: f64,
    t1: f64,
    mode: IncrementMode,
    track_phase: bool,
) -> Result<AngleRates> {
    let (node, irs, m) = match side {
        Side::Gn => (Node::Gn, Node::Irs1, cfg.arrays.m1),
        Side::Sat => (Node::Sat, Node::Irs2, cfg.arrays.m2),
    };
    let delta_rho = if track_phase && m > 0 {
        (geometric_phase_difference(cfg, side, t1)? - geometric_phase_difference(cfg, side, t0)?) / (t1 - t0)
    } else {
        0.0
    };
    Ok(AngleRates {
        node: increment_from_orbit(cfg, node, t0, t1, mode)?,
        irs: if m > 0 { increment_from_orbit(cfg, irs, t0, t1, mode)? } else { AoAPair::default() },
        delta_rho,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolConfig {
    /// Length of one data frame between training periods.
    pub frame_duration_s: f64,
    pub training: TrainingConfig,
    pub start_time_s: f64,
    pub total_time_s: f64,
    pub sample_interval_s: f64,
    /// Re-solve beams from predicted angles at each sample; otherwise keep
    /// the frame-start beams.
    pub tracking_enabled: bool,
    pub increment_mode: IncrementMode,
    /// Also extrapolate the phase difference from the known orbit instead
    /// of holding it for the whole frame.
    pub phase_tracking: bool,
}

impl ProtocolConfig {
    pub fn new(training: TrainingConfig) -> Self {
        Self {
            frame_duration_s: 10.0,
            training,
            start_time_s: 0.0,
            total_time_s: 40.0,
            sample_interval_s: 0.5,
            tracking_enabled: true,
            increment_mode: IncrementMode::FiniteDifference,
            phase_tracking: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.frame_duration_s > 0.0) || !self.frame_duration_s.is_finite() {
            return Err(invalid("frame duration must be positive"));
        }
        if !(self.sample_interval_s > 0.0) || self.sample_interval_s > self.frame_duration_s {
            return Err(invalid("sample interval must be positive and no longer than a frame"));
        }
        if !(self.total_time_s > 0.0) || !self.total_time_s.is_finite() || !self.start_time_s.is_finite() {
            return Err(invalid("total time must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingSample {
    pub t: f64,
    pub frame: usize,
    /// Gain of the configured mode (proposed or benchmark).
    pub gamma: f64,
    pub rate: f64,
    /// Gain with beams designed from the true angles at `t`.
    pub gamma_perfect: f64,
    pub rate_perfect: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingTrace {
    pub samples: Vec<TrackingSample>,
}

/// Channel set at `t` with fading drawn from a substream keyed by `t`, so
/// any two runs with the same seed see the same channel at the same time.
pub fn channel_at(cfg: &ScenarioConfig, t: f64) -> Result<ChannelSet> {
    build_channel_set(cfg, t, cfg.kappa_linear(), &mut substream(cfg.rng_seed, "chan", &[t.to_bits()]))
}

/// Run the protocol: at each frame start, train the ground side (downlink)
/// and then the satellite side (uplink, sent through the fresh ground
/// beams); within the frame, sample the gain on the true channel.
/// Training noise is drawn from a substream keyed by the frame index.
pub fn run_protocol(cfg: &ScenarioConfig, pc: &ProtocolConfig) -> Result<TrackingTrace> {
    cfg.validate()?;
    pc.validate()?;
    let tc = &pc.training;
    let noise_var = cfg.noise_var();
    let samples_total = (pc.total_time_s / pc.sample_interval_s).round() as usize;
    let per_frame = pc.frame_duration_s / pc.sample_interval_s;

    let mut out = Vec::with_capacity(samples_total + 1);
    let mut current: Option<BeamSolution> = None;
    let mut state: Option<(TrackState, TrackState, OfflineSide, OfflineSide)> = None;
    let mut frame_of_state = usize::MAX;

    for k in 0..=samples_total {
        let t = pc.start_time_s + k as f64 * pc.sample_interval_s;
        let frame = ((k as f64 + 1e-9) / per_frame).floor() as usize;
        let cs = channel_at(cfg, t)?;

        if frame != frame_of_state {
            let t0 = pc.start_time_s + frame as f64 * pc.frame_duration_s;
            let cs0 = if (t0 - t).abs() < 1e-12 { cs.clone() } else { channel_at(cfg, t0)? };
            let mut rng = substream(cfg.rng_seed, "train", &[frame as u64]);
            let peer = match &current {
                Some(sol) => sol.clone(),
                None => {
                    let (w2, theta2) = initial_access_beams(&cs0);
                    // ground beams are filled in before the uplink pass
                    BeamSolution { w1: CVector::zeros(0), theta1: CVector::zeros(0), w2, theta2 }
                }
            };
            let off_gn = OfflineSide::from_channel_set(&cs0, Side::Gn);
            let off_sat = OfflineSide::from_channel_set(&cs0, Side::Sat);
            let gn_csi = estimate_local_csi(&cs0, Side::Gn, &peer, tc, &mut rng)?;
            let gn = solve_side(&gn_csi, &off_gn)?;
            let uplink_peer = BeamSolution { w1: gn.w.clone(), theta1: gn.theta.clone(), ..peer };
            let sat_csi = estimate_local_csi(&cs0, Side::Sat, &uplink_peer, tc, &mut rng)?;
            let sat = solve_side(&sat_csi, &off_sat)?;
            let t1 = t0 + pc.frame_duration_s;
            let gn_state = TrackState {
                csi0: gn_csi,
                t0,
                rates: side_rates(cfg, Side::Gn, t0, t1, pc.increment_mode, pc.phase_tracking)?,
            };
            let sat_state = TrackState {
                csi0: sat_csi,
                t0,
                rates: side_rates(cfg, Side::Sat, t0, t1, pc.increment_mode, pc.phase_tracking)?,
            };
            current = Some(BeamSolution { w1: gn.w, theta1: gn.theta, w2: sat.w, theta2: sat.theta });
            state = Some((gn_state, sat_state, off_gn, off_sat));
            frame_of_state = frame;
        }

        let (gn_state, sat_state, off_gn, off_sat) = state.as_ref().ok_or_else(|| invalid("protocol state missing"))?;
        let beams = if pc.tracking_enabled {
            let gn = solve_side(&predict_aoa(gn_state, t), off_gn)?;
            let sat = solve_side(&predict_aoa(sat_state, t), off_sat)?;
            let sol = BeamSolution { w1: gn.w, theta1: gn.theta, w2: sat.w, theta2: sat.theta };
            current = Some(sol.clone());
            sol
        } else {
            current.clone().ok_or_else(|| invalid("protocol beams missing"))?
        };
        let gamma = beams.gain(&cs)?;
        let gamma_perfect = closed_form_solution(&cs)?.gain(&cs)?;
        out.push(TrackingSample {
            t,
            frame,
            gamma,
            rate: achievable_rate(gamma, noise_var),
            gamma_perfect,
            rate_perfect: achievable_rate(gamma_perfect, noise_var),
        });
    }
    Ok(TrackingTrace { samples: out })
}
