//! Link channels, the composed end-to-end channel and the path-gain split.

use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::arrays::{upa_response, ArrayGeometry};
use crate::error::{invalid, mismatch, Error, Result};
use crate::geometry::{aoa_pair, distance, AoAPair, NodeArrays, Position3D, ScenarioConfig};
use crate::linalg::{dot_t, outer, tr_mul};
use crate::{CMatrix, CVector};

/// How the two short-range IRS links are synthesized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShortRangeModel {
    /// Center-to-center rank-one approximation.
    #[default]
    RankOne,
    /// Exact spherical-wave channel per element pair.
    NearField,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathGain {
    pub value: Complex64,
    pub distance_m: f64,
}

/// Free-space gain `sqrt(beta)/d * exp(-j 2 pi d / lambda)`.
pub fn path_gain(distance_m: f64, wavelength_m: f64, beta: f64) -> Result<PathGain> {
    if !(distance_m > 0.0) || !distance_m.is_finite() {
        return Err(invalid(format!("path gain needs a positive distance, got {distance_m}")));
    }
    if !(wavelength_m > 0.0) {
        return Err(invalid("wavelength must be positive"));
    }
    // reduce in cycles first; d/lambda is ~1e5 for the satellite links
    let cycles = (distance_m / wavelength_m).rem_euclid(1.0);
    let value = Complex64::from_polar(beta.sqrt() / distance_m, -2.0 * PI * cycles);
    Ok(PathGain { value, distance_m })
}

/// `rho * a_rx a_tx^T`.
pub fn los_far_field(rho: Complex64, a_rx: &CVector, a_tx: &CVector) -> CMatrix {
    outer(a_rx, a_tx) * rho
}

/// Spherical-wave channel between every element of `rx` (rows) and `tx` (columns).
pub fn near_field_channel(rx: &ArrayGeometry, tx: &ArrayGeometry, wavelength_m: f64, beta: f64) -> Result<CMatrix> {
    let pr = rx.element_positions();
    let pt = tx.element_positions();
    let mut h = CMatrix::zeros(pr.len(), pt.len());
    for (i, a) in pr.iter().enumerate() {
        for (k, b) in pt.iter().enumerate() {
            let d = distance(a, b);
            if !(d > 0.0) {
                return Err(Error::DegenerateGeometry("arrays overlap".into()));
            }
            h[(i, k)] = path_gain(d, wavelength_m, beta)?.value;
        }
    }
    Ok(h)
}

/// Rank-one model `delta * h_rx h_tx^T` of a short-range link, with each
/// response pointing at the other array's reference point.
pub fn rank_one_factors(
    rx: &ArrayGeometry,
    tx: &ArrayGeometry,
    wavelength_m: f64,
    beta: f64,
) -> Result<(Complex64, CVector, CVector)> {
    let delta = path_gain(distance(&rx.origin, &tx.origin), wavelength_m, beta)?.value;
    let h_rx = rx.response_toward(&tx.origin, wavelength_m)?;
    let h_tx = tx.response_toward(&rx.origin, wavelength_m)?;
    Ok((delta, h_rx, h_tx))
}

/// Rank-one short-range link between a node array and its co-located IRS.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOneLink {
    pub delta: Complex64,
    pub h_node: CVector,
    pub h_irs: CVector,
}

impl RankOneLink {
    /// `delta * h_node h_irs^T` (node rows, IRS columns).
    pub fn node_by_irs(&self) -> CMatrix {
        outer(&self.h_node, &self.h_irs) * self.delta
    }
}

/// Per-node factors of the four far-field path gains in the gauge `rho_g = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitGains {
    pub rho_g: Complex64,
    pub rho_i1: Complex64,
    pub rho_s: Complex64,
    pub rho_i2: Complex64,
    /// `|rho_i1 rho_i2 - rho_i1i2| / |rho_i1i2|`.
    pub residual: f64,
}

pub fn split_path_gains(
    rho_gs: Complex64,
    rho_i1s: Complex64,
    rho_gi2: Complex64,
    rho_i1i2: Complex64,
) -> Result<SplitGains> {
    if [rho_gs, rho_i1s, rho_gi2, rho_i1i2].iter().any(|z| z.norm() == 0.0) {
        return Err(invalid("path gains must be nonzero"));
    }
    let rho_i1 = rho_i1s / rho_gs;
    let rho_i2 = rho_gi2;
    let residual = (rho_i1 * rho_i2 - rho_i1i2).norm() / rho_i1i2.norm();
    Ok(SplitGains { rho_g: Complex64::new(1.0, 0.0), rho_i1, rho_s: rho_gs, rho_i2, residual })
}

/// `sqrt(k/(1+k)) H_los + sqrt(1/(1+k)) H_nlos` with i.i.d. circularly
/// symmetric NLoS entries whose variance is the mean-square LoS entry.
pub fn rician_mix<R: Rng + ?Sized>(h_los: &CMatrix, kappa_linear: f64, rng: &mut R) -> CMatrix {
    if kappa_linear.is_infinite() || h_los.is_empty() {
        return h_los.clone();
    }
    let power = h_los.norm_squared() / h_los.len() as f64;
    let sd = (power / 2.0).sqrt();
    let a = (kappa_linear / (1.0 + kappa_linear)).sqrt();
    let b = (1.0 / (1.0 + kappa_linear)).sqrt();
    // column-major fill order keeps draws reproducible for a given shape
    let nlos = CMatrix::from_fn(h_los.nrows(), h_los.ncols(), |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re * sd, im * sd)
    });
    h_los * Complex64::from(a) + nlos * Complex64::from(b)
}

/// All six link channels plus the LoS quantities that generated them.
///
/// Naming follows the downlink: the satellite transmits, the ground node
/// receives. `h_xy` maps signals leaving `x` to `y`; e.g. `h_si1` is
/// `M1 x N2` and `h_i1g` is `N1 x M1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub h_sg: CMatrix,
    pub h_si1: CMatrix,
    pub h_i2g: CMatrix,
    pub h_i2i1: CMatrix,
    pub h_i1g: CMatrix,
    pub h_si2: CMatrix,
    /// Far-field responses: GN and IRS-1 toward the satellite, SAT and IRS-2
    /// toward the ground node.
    pub a_g: CVector,
    pub a_i1: CVector,
    pub a_s: CVector,
    pub a_i2: CVector,
    pub aoa_g: AoAPair,
    pub aoa_i1: AoAPair,
    pub aoa_s: AoAPair,
    pub aoa_i2: AoAPair,
    pub rho_gs: PathGain,
    pub rho_i1s: PathGain,
    pub rho_gi2: PathGain,
    pub rho_i1i2: PathGain,
    /// IRS-1 to GN link.
    pub gn_link: RankOneLink,
    /// SAT to IRS-2 link, stored with the SAT as the node.
    pub sat_link: RankOneLink,
    pub split: SplitGains,
    pub gn_geom: ArrayGeometry,
    pub sat_geom: ArrayGeometry,
    pub irs1_geom: Option<ArrayGeometry>,
    pub irs2_geom: Option<ArrayGeometry>,
    pub wavelength_m: f64,
}

fn toward(geom: Option<&ArrayGeometry>, target: &Position3D, wavelength_m: f64) -> Result<(AoAPair, CVector)> {
    match geom {
        Some(g) => {
            let aoa = aoa_pair(g, target)?;
            Ok((aoa, upa_response(g, &aoa, wavelength_m)?))
        }
        None => Ok((AoAPair::default(), CVector::zeros(0))),
    }
}

fn short_link(
    node: &ArrayGeometry,
    irs: Option<&ArrayGeometry>,
    irs_pos: &Position3D,
    cfg: &ScenarioConfig,
) -> Result<RankOneLink> {
    let (lambda, beta) = (cfg.wavelength_m, cfg.beta_linear());
    match irs {
        Some(g) => {
            let (delta, h_node, h_irs) = rank_one_factors(node, g, lambda, beta)?;
            Ok(RankOneLink { delta, h_node, h_irs })
        }
        None => Ok(RankOneLink {
            delta: path_gain(distance(&node.origin, irs_pos), lambda, beta)?.value,
            h_node: node.response_toward(irs_pos, lambda)?,
            h_irs: CVector::zeros(0),
        }),
    }
}

/// Channel set at time `t`. Fading draws (if `kappa_linear` is finite) are
/// taken from `rng` in a fixed link order.
pub fn build_channel_set<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    t: f64,
    kappa_linear: f64,
    rng: &mut R,
) -> Result<ChannelSet> {
    cfg.validate()?;
    if !(kappa_linear >= 0.0) {
        return Err(invalid("rician factor must be nonnegative"));
    }
    let nodes = NodeArrays::at(cfg, t)?;
    let (lambda, beta) = (cfg.wavelength_m, cfg.beta_linear());
    let sat_pos = nodes.sat.origin;
    let gn_pos = nodes.gn.origin;

    let (aoa_g, a_g) = toward(Some(&nodes.gn), &sat_pos, lambda)?;
    let (aoa_i1, a_i1) = toward(nodes.irs1.as_ref(), &sat_pos, lambda)?;
    let (aoa_s, a_s) = toward(Some(&nodes.sat), &gn_pos, lambda)?;
    let (aoa_i2, a_i2) = toward(nodes.irs2.as_ref(), &gn_pos, lambda)?;

    let rho_gs = path_gain(distance(&gn_pos, &sat_pos), lambda, beta)?;
    let rho_i1s = path_gain(distance(&nodes.irs1_position, &sat_pos), lambda, beta)?;
    let rho_gi2 = path_gain(distance(&gn_pos, &nodes.irs2_position), lambda, beta)?;
    let mut rho_i1i2 = path_gain(distance(&nodes.irs1_position, &nodes.irs2_position), lambda, beta)?;
    let mut split = split_path_gains(rho_gs.value, rho_i1s.value, rho_gi2.value, rho_i1i2.value)?;
    if cfg.fold_split_residual {
        rho_i1i2.value = split.rho_i1 * split.rho_i2;
        split.residual = 0.0;
    }

    let gn_link = short_link(&nodes.gn, nodes.irs1.as_ref(), &nodes.irs1_position, cfg)?;
    let sat_link = short_link(&nodes.sat, nodes.irs2.as_ref(), &nodes.irs2_position, cfg)?;
    let (h_i1g, h_si2) = match cfg.short_range {
        ShortRangeModel::RankOne => (gn_link.node_by_irs(), sat_link.node_by_irs().transpose()),
        ShortRangeModel::NearField => {
            let h_i1g = match &nodes.irs1 {
                Some(g) => near_field_channel(&nodes.gn, g, lambda, beta)?,
                None => CMatrix::zeros(nodes.gn.len(), 0),
            };
            let h_si2 = match &nodes.irs2 {
                Some(g) => near_field_channel(g, &nodes.sat, lambda, beta)?,
                None => CMatrix::zeros(0, nodes.sat.len()),
            };
            (h_i1g, h_si2)
        }
    };

    let h_sg = rician_mix(&los_far_field(rho_gs.value, &a_g, &a_s), kappa_linear, rng);
    let h_si1 = rician_mix(&los_far_field(rho_i1s.value, &a_i1, &a_s), kappa_linear, rng);
    let h_i2g = rician_mix(&los_far_field(rho_gi2.value, &a_g, &a_i2), kappa_linear, rng);
    let h_i2i1 = rician_mix(&los_far_field(rho_i1i2.value, &a_i1, &a_i2), kappa_linear, rng);

    Ok(ChannelSet {
        h_sg,
        h_si1,
        h_i2g,
        h_i2i1,
        h_i1g,
        h_si2,
        a_g,
        a_i1,
        a_s,
        a_i2,
        aoa_g,
        aoa_i1,
        aoa_s,
        aoa_i2,
        rho_gs,
        rho_i1s,
        rho_gi2,
        rho_i1i2,
        gn_link,
        sat_link,
        split,
        gn_geom: nodes.gn,
        sat_geom: nodes.sat,
        irs1_geom: nodes.irs1,
        irs2_geom: nodes.irs2,
        wavelength_m: lambda,
    })
}

/// Array sizes for [`synthetic_los`]; `(0, 0)` disables an IRS.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticSizes {
    pub n1: (usize, usize),
    pub m1: (usize, usize),
    pub n2: (usize, usize),
    pub m2: (usize, usize),
}

/// Random pure-LoS channel set with rank-one short-range links and exactly
/// consistent path gains. Angles, phases and magnitudes are drawn from `rng`;
/// geometry is abstract (all arrays axis-aligned at the origin).
pub fn synthetic_los<R: Rng + ?Sized>(rng: &mut R, sizes: SyntheticSizes) -> Result<ChannelSet> {
    let lambda = 2.0;
    let spacing = 0.25;
    let geom = |(nx, ny): (usize, usize)| -> Result<Option<ArrayGeometry>> {
        if nx * ny == 0 {
            Ok(None)
        } else {
            ArrayGeometry::axis_aligned(nx, ny, spacing, Position3D::zeros()).map(Some)
        }
    };
    let gn = geom(sizes.n1)?.ok_or_else(|| invalid("ground array must be nonempty"))?;
    let sat = geom(sizes.n2)?.ok_or_else(|| invalid("satellite array must be nonempty"))?;
    let irs1 = geom(sizes.m1)?;
    let irs2 = geom(sizes.m2)?;

    let angle = |rng: &mut R| AoAPair::new(rng.random_range(-PI..PI), rng.random_range(-PI / 2.0..PI / 2.0));
    let resp = |g: Option<&ArrayGeometry>, rng: &mut R| -> Result<(AoAPair, CVector)> {
        let aoa = angle(rng);
        match g {
            Some(g) => Ok((aoa, upa_response(g, &aoa, lambda)?)),
            None => Ok((aoa, CVector::zeros(0))),
        }
    };
    let (aoa_g, a_g) = resp(Some(&gn), rng)?;
    let (aoa_i1, a_i1) = resp(irs1.as_ref(), rng)?;
    let (aoa_s, a_s) = resp(Some(&sat), rng)?;
    let (aoa_i2, a_i2) = resp(irs2.as_ref(), rng)?;
    let (_, hg) = resp(Some(&gn), rng)?;
    let (_, hi1) = resp(irs1.as_ref(), rng)?;
    let (_, hs) = resp(Some(&sat), rng)?;
    let (_, hi2) = resp(irs2.as_ref(), rng)?;

    let gain = |rng: &mut R| Complex64::from_polar(rng.random_range(0.5..1.5), rng.random_range(-PI..PI));
    let (gs, i1s, gi2) = (gain(rng), gain(rng), gain(rng));
    let i1i2 = i1s * gi2 / gs;
    let gn_link = RankOneLink { delta: 0.1 * gain(rng), h_node: hg, h_irs: hi1 };
    let sat_link = RankOneLink { delta: 0.1 * gain(rng), h_node: hs, h_irs: hi2 };
    let split = split_path_gains(gs, i1s, gi2, i1i2)?;
    let pg = |value| PathGain { value, distance_m: 1.0 };

    Ok(ChannelSet {
        h_sg: los_far_field(gs, &a_g, &a_s),
        h_si1: los_far_field(i1s, &a_i1, &a_s),
        h_i2g: los_far_field(gi2, &a_g, &a_i2),
        h_i2i1: los_far_field(i1i2, &a_i1, &a_i2),
        h_i1g: gn_link.node_by_irs(),
        h_si2: sat_link.node_by_irs().transpose(),
        a_g,
        a_i1,
        a_s,
        a_i2,
        aoa_g,
        aoa_i1,
        aoa_s,
        aoa_i2,
        rho_gs: pg(gs),
        rho_i1s: pg(i1s),
        rho_gi2: pg(gi2),
        rho_i1i2: pg(i1i2),
        gn_link,
        sat_link,
        split,
        gn_geom: gn,
        sat_geom: sat,
        irs1_geom: irs1,
        irs2_geom: irs2,
        wavelength_m: lambda,
    })
}

/// `|w1^T H w2|^2`.
pub fn channel_gain(h: &CMatrix, w1: &CVector, w2: &CVector) -> Result<f64> {
    if h.nrows() != w1.len() || h.ncols() != w2.len() {
        return Err(mismatch(format!(
            "beams {}/{} do not fit a {}x{} channel",
            w1.len(),
            w2.len(),
            h.nrows(),
            h.ncols()
        )));
    }
    Ok(dot_t(w1, &(h * w2)).norm_sqr())
}

impl ChannelSet {
    pub fn n1(&self) -> usize {
        self.h_sg.nrows()
    }

    pub fn n2(&self) -> usize {
        self.h_sg.ncols()
    }

    pub fn m1(&self) -> usize {
        self.h_si1.nrows()
    }

    pub fn m2(&self) -> usize {
        self.h_si2.nrows()
    }

    fn check_thetas(&self, theta1: &CVector, theta2: &CVector) -> Result<()> {
        if theta1.len() != self.m1() || theta2.len() != self.m2() {
            return Err(mismatch(format!(
                "reflection vectors of length {}/{} for IRS sizes {}/{}",
                theta1.len(),
                theta2.len(),
                self.m1(),
                self.m2()
            )));
        }
        Ok(())
    }

    /// Dense end-to-end `N1 x N2` channel for the given reflection vectors.
    pub fn effective_channel(&self, theta1: &CVector, theta2: &CVector) -> Result<CMatrix> {
        self.check_thetas(theta1, theta2)?;
        let scale_cols = |m: &CMatrix, t: &CVector| {
            let mut out = m.clone();
            for (j, mut col) in out.column_iter_mut().enumerate() {
                col *= t[j];
            }
            out
        };
        let scale_rows = |m: &CMatrix, t: &CVector| {
            let mut out = m.clone();
            for (i, mut row) in out.row_iter_mut().enumerate() {
                row *= t[i];
            }
            out
        };
        let g_theta1 = scale_cols(&self.h_i1g, theta1);
        let theta2_si2 = scale_rows(&self.h_si2, theta2);
        let mut h = self.h_sg.clone();
        h += &g_theta1 * &self.h_si1;
        h += &self.h_i2g * &theta2_si2;
        h += (&g_theta1 * &self.h_i2i1) * &theta2_si2;
        Ok(h)
    }

    /// `w1^T H(theta1, theta2) w2` in `O(M1 M2)` without forming the channel.
    pub fn bilinear(&self, w1: &CVector, theta1: &CVector, theta2: &CVector, w2: &CVector) -> Result<Complex64> {
        self.check_thetas(theta1, theta2)?;
        if w1.len() != self.n1() || w2.len() != self.n2() {
            return Err(mismatch("beamformer length does not match the node arrays"));
        }
        let u1 = tr_mul(&self.h_i1g, w1).component_mul(theta1);
        let u2 = (&self.h_si2 * w2).component_mul(theta2);
        let direct = dot_t(w1, &(&self.h_sg * w2));
        let via1 = dot_t(&u1, &(&self.h_si1 * w2));
        let via2 = dot_t(&tr_mul(&self.h_i2g, w1), &u2);
        let both = dot_t(&u1, &(&self.h_i2i1 * &u2));
        Ok(direct + via1 + via2 + both)
    }

    /// `|w1^T H w2|^2` via [`ChannelSet::bilinear`].
    pub fn gain(&self, w1: &CVector, theta1: &CVector, theta2: &CVector, w2: &CVector) -> Result<f64> {
        Ok(self.bilinear(w1, theta1, theta2, w2)?.norm_sqr())
    }

    /// The reverse link: the ground node transmits and the satellite
    /// receives. Roles are swapped so the returned set is laid out as a
    /// downlink from the GN side, with IRS-2 in the receiver-side IRS slot;
    /// its effective channel with `(theta2, theta1)` is the transpose of ours.
    pub fn uplink(&self) -> ChannelSet {
        let split = split_path_gains(self.rho_gs.value, self.rho_gi2.value, self.rho_i1s.value, self.rho_i1i2.value)
            .map(|mut s| {
                if self.split.residual == 0.0 {
                    s.residual = 0.0;
                }
                s
            })
            .unwrap_or(self.split);
        ChannelSet {
            h_sg: self.h_sg.transpose(),
            h_si1: self.h_i2g.transpose(),
            h_i2g: self.h_si1.transpose(),
            h_i2i1: self.h_i2i1.transpose(),
            h_i1g: self.h_si2.transpose(),
            h_si2: self.h_i1g.transpose(),
            a_g: self.a_s.clone(),
            a_i1: self.a_i2.clone(),
            a_s: self.a_g.clone(),
            a_i2: self.a_i1.clone(),
            aoa_g: self.aoa_s,
            aoa_i1: self.aoa_i2,
            aoa_s: self.aoa_g,
            aoa_i2: self.aoa_i1,
            rho_gs: self.rho_gs,
            rho_i1s: self.rho_gi2,
            rho_gi2: self.rho_i1s,
            rho_i1i2: self.rho_i1i2,
            gn_link: self.sat_link.clone(),
            sat_link: self.gn_link.clone(),
            split,
            gn_geom: self.sat_geom.clone(),
            sat_geom: self.gn_geom.clone(),
            irs1_geom: self.irs2_geom.clone(),
            irs2_geom: self.irs1_geom.clone(),
            wavelength_m: self.wavelength_m,
        }
    }

    /// Plain-text dump for debugging. Each matrix is a block headed by
    /// `[name rows x cols]`, followed by one line per row of space-separated
    /// `re,im` pairs. Not a stable format.
    pub fn write_dump<W: Write>(&self, out: &mut W) -> io::Result<()> {
        let blocks: [(&str, &CMatrix); 6] = [
            ("h_sg", &self.h_sg),
            ("h_si1", &self.h_si1),
            ("h_i2g", &self.h_i2g),
            ("h_i2i1", &self.h_i2i1),
            ("h_i1g", &self.h_i1g),
            ("h_si2", &self.h_si2),
        ];
        for (name, m) in blocks {
            writeln!(out, "[{name} {} x {}]", m.nrows(), m.ncols())?;
            for row in m.row_iter() {
                let cells: Vec<String> = row.iter().map(|z| format!("{:e},{:e}", z.re, z.im)).collect();
                writeln!(out, "{}", cells.join(" "))?;
            }
        }
        Ok(())
    }
}
