//! Closed-form joint active/passive beamforming, phase quantization and the
//! baseline schemes used for comparison.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::arrays::{upa_response, ArrayGeometry};
use crate::channels::{ChannelSet, RankOneLink};
use crate::error::{invalid, mismatch, Error, Result};
use crate::geometry::{wrap_angle, AoAPair};
use crate::linalg::{dot_t, spectral_norm_sq, tr_mul};
use crate::{CMatrix, CVector};

/// Which end of the link a quantity belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Gn,
    Sat,
}

/// Active beams at both nodes and reflection vectors at both surfaces.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamSolution {
    pub w1: CVector,
    pub theta1: CVector,
    pub w2: CVector,
    pub theta2: CVector,
}

impl BeamSolution {
    /// `|w1^T H w2|^2` on a channel set.
    pub fn gain(&self, cs: &ChannelSet) -> Result<f64> {
        cs.gain(&self.w1, &self.theta1, &self.theta2, &self.w2)
    }
}

/// What one side needs to beamform: its two angle pairs, the phase
/// difference between its node and IRS gains, and their magnitude ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalCsi {
    pub aoa_node: AoAPair,
    pub aoa_irs: AoAPair,
    /// `arg(rho_node) - arg(rho_irs)`, wrapped.
    pub delta_rho: f64,
    /// `|rho_irs| / |rho_node|`.
    pub gain_ratio: f64,
    pub side: Side,
}

impl LocalCsi {
    /// Ground-truth local CSI read off a channel set.
    pub fn from_channel_set(cs: &ChannelSet, side: Side) -> Self {
        let s = &cs.split;
        let (aoa_node, aoa_irs, rho_node, rho_irs) = match side {
            Side::Gn => (cs.aoa_g, cs.aoa_i1, s.rho_g, s.rho_i1),
            Side::Sat => (cs.aoa_s, cs.aoa_i2, s.rho_s, s.rho_i2),
        };
        Self {
            aoa_node,
            aoa_irs,
            delta_rho: wrap_angle(rho_node.arg() - rho_irs.arg()),
            gain_ratio: rho_irs.norm() / rho_node.norm(),
            side,
        }
    }
}

/// Quantities that stay fixed for the life of the installation: array
/// layouts and the short-range node-to-IRS link.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineSide {
    pub node: ArrayGeometry,
    pub irs: Option<ArrayGeometry>,
    pub link: RankOneLink,
    pub wavelength_m: f64,
}

impl OfflineSide {
    pub fn from_channel_set(cs: &ChannelSet, side: Side) -> Self {
        let (node, irs, link) = match side {
            Side::Gn => (&cs.gn_geom, &cs.irs1_geom, &cs.gn_link),
            Side::Sat => (&cs.sat_geom, &cs.irs2_geom, &cs.sat_link),
        };
        Self { node: node.clone(), irs: irs.clone(), link: link.clone(), wavelength_m: cs.wavelength_m }
    }

    pub fn m(&self) -> usize {
        self.link.h_irs.len()
    }
}

/// Combined node-plus-IRS response of one side for a reflection vector:
/// `rho_node a_node + rho_irs H (theta o a_irs)`.
pub fn side_vector(cs: &ChannelSet, theta: &CVector, side: Side) -> Result<CVector> {
    let s = &cs.split;
    match side {
        Side::Gn => {
            if theta.len() != cs.m1() {
                return Err(mismatch(format!("theta has {} entries, IRS-1 has {}", theta.len(), cs.m1())));
            }
            Ok(&cs.a_g * s.rho_g + (&cs.h_i1g * theta.component_mul(&cs.a_i1)) * s.rho_i1)
        }
        Side::Sat => {
            if theta.len() != cs.m2() {
                return Err(mismatch(format!("theta has {} entries, IRS-2 has {}", theta.len(), cs.m2())));
            }
            Ok(&cs.a_s * s.rho_s + tr_mul(&cs.h_si2, &theta.component_mul(&cs.a_i2)) * s.rho_i2)
        }
    }
}

/// Matched beam `f^* / |f|`.
pub fn mrt_mrc(f: &CVector) -> Result<CVector> {
    let n = f.norm();
    if !(n > 0.0) {
        return Err(invalid("cannot match a zero vector"));
    }
    Ok(f.map(|z| z.conj() / n))
}

/// `e^{j psi} (h_irs o a_irs)^*`.
pub fn optimal_passive(psi: f64, h_irs: &CVector, a_irs: &CVector) -> Result<CVector> {
    if h_irs.len() != a_irs.len() {
        return Err(mismatch("IRS response lengths differ"));
    }
    let rot = Complex64::from_polar(1.0, psi);
    Ok(h_irs.zip_map(a_irs, |h, a| rot * (h * a).conj()))
}

/// Common phase of the reflection vector and whether it was degenerate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommonPhase {
    pub psi: f64,
    /// The node response is orthogonal to the short-link response, so every
    /// phase is optimal; `psi` is then 0.
    pub degenerate: bool,
}

/// `psi = delta_rho - arg(delta a_node^H h_node)`.
pub fn optimal_common_phase(
    delta_rho: f64,
    delta: Complex64,
    a_node: &CVector,
    h_node: &CVector,
) -> Result<CommonPhase> {
    if a_node.len() != h_node.len() {
        return Err(mismatch("node response lengths differ"));
    }
    let inner = delta * a_node.dotc(h_node);
    let scale = delta.norm() * a_node.norm() * h_node.norm();
    if !(inner.norm() > 1e-12 * scale) {
        return Ok(CommonPhase { psi: 0.0, degenerate: true });
    }
    Ok(CommonPhase { psi: wrap_angle(delta_rho - inner.arg()), degenerate: false })
}

/// Closed-form side gain
/// `N |rho_node|^2 + N M^2 |rho_irs delta|^2 + 2 M |conj(rho_node) rho_irs delta inner|`,
/// where `inner = a_node^H h_node`.
pub fn optimal_gain(
    n_node: usize,
    m: usize,
    rho_node: Complex64,
    rho_irs: Complex64,
    delta: Complex64,
    inner: Complex64,
) -> f64 {
    let n = n_node as f64;
    let m = m as f64;
    let cross = (rho_node.conj() * rho_irs * delta * inner).norm();
    n * rho_node.norm_sqr() + n * m * m * (rho_irs * delta).norm_sqr() + 2.0 * m * cross
}

/// Result of beamforming one side from local CSI.
#[derive(Debug, Clone, PartialEq)]
pub struct SideSolution {
    pub theta: CVector,
    pub w: CVector,
    pub psi: f64,
    pub degenerate: bool,
    /// Side gain in the gauge `|rho_node| = 1`.
    pub gamma: f64,
}

/// Optimal reflection vector and matched beam for one side using only local
/// CSI and offline constants. Gains are taken in the gauge `rho_node = 1`;
/// the true side gain is `gamma * |rho_node|^2`.
pub fn solve_side(csi: &LocalCsi, offline: &OfflineSide) -> Result<SideSolution> {
    solve_side_with(csi, offline, true)
}

fn solve_side_with(csi: &LocalCsi, offline: &OfflineSide, common_phase: bool) -> Result<SideSolution> {
    let lambda = offline.wavelength_m;
    let a_node = upa_response(&offline.node, &csi.aoa_node, lambda)?;
    let link = &offline.link;
    if link.h_node.len() != a_node.len() {
        return Err(mismatch("short-link node response does not match the node array"));
    }
    let m = offline.m();
    if m == 0 {
        let w = mrt_mrc(&a_node)?;
        let gamma = a_node.norm_squared();
        return Ok(SideSolution { theta: CVector::zeros(0), w, psi: 0.0, degenerate: false, gamma });
    }
    let irs = offline.irs.as_ref().ok_or_else(|| invalid("IRS geometry missing"))?;
    let a_irs = upa_response(irs, &csi.aoa_irs, lambda)?;
    let phase = optimal_common_phase(csi.delta_rho, link.delta, &a_node, &link.h_node)?;
    let psi = if common_phase { phase.psi } else { 0.0 };
    let theta = optimal_passive(psi, &link.h_irs, &a_irs)?;
    let rho_irs = Complex64::from_polar(csi.gain_ratio, -csi.delta_rho);
    let coupling = rho_irs * link.delta * dot_t(&link.h_irs, &theta.component_mul(&a_irs));
    let f = &a_node + &link.h_node * coupling;
    let w = mrt_mrc(&f)?;
    Ok(SideSolution { theta, w, psi, degenerate: phase.degenerate, gamma: f.norm_squared() })
}

/// Nearest point of the `k`-level uniform phase grid for every entry.
/// Exact ties go to the lower grid index.
pub fn quantize_phases(theta: &CVector, k: usize) -> Result<CVector> {
    if k < 2 {
        return Err(invalid(format!("quantization needs at least 2 levels, got {k}")));
    }
    let step = 2.0 * PI / k as f64;
    Ok(theta.map(|z| {
        let x = z.arg() / step;
        let lo = x.floor();
        let frac = x - lo;
        let a = (lo as i64).rem_euclid(k as i64);
        let b = (a + 1) % k as i64;
        let idx = if frac < 0.5 {
            a
        } else if frac > 0.5 {
            b
        } else {
            a.min(b)
        };
        Complex64::from_polar(1.0, idx as f64 * step)
    }))
}

/// Comparison schemes. Active beams are always matched to the resulting
/// side vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// IRS at both ends with the closed-form design.
    TwoSided,
    SatIrsOnly,
    GnIrsOnly,
    /// Satellite-side surface used as a fixed reflect-array feeding the
    /// satellite antenna; no ground IRS.
    SatReflectarrayOnly,
    SatReflectarrayGnIrs,
    NoIrs,
    RandomPhase,
    /// Closed-form passive design with the common phase fixed to zero.
    CpbWithoutCommonPhase,
}

impl Scheme {
    pub const ALL: [Scheme; 8] = [
        Scheme::TwoSided,
        Scheme::SatIrsOnly,
        Scheme::GnIrsOnly,
        Scheme::SatReflectarrayOnly,
        Scheme::SatReflectarrayGnIrs,
        Scheme::NoIrs,
        Scheme::RandomPhase,
        Scheme::CpbWithoutCommonPhase,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::TwoSided => "two_sided",
            Scheme::SatIrsOnly => "sat_irs_only",
            Scheme::GnIrsOnly => "gn_irs_only",
            Scheme::SatReflectarrayOnly => "sat_reflectarray_only",
            Scheme::SatReflectarrayGnIrs => "sat_reflectarray_gn_irs",
            Scheme::NoIrs => "no_irs",
            Scheme::RandomPhase => "random_phase",
            Scheme::CpbWithoutCommonPhase => "cpb_without_common_phase",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| invalid(format!("unknown scheme '{s}'")))
    }

    /// How a total element budget is split into `(M1, M2)`.
    pub fn irs_split(self, total: usize) -> (usize, usize) {
        let half = total / 2;
        match self {
            Scheme::SatIrsOnly | Scheme::SatReflectarrayOnly => (0, total),
            Scheme::GnIrsOnly => (total, 0),
            Scheme::NoIrs => (0, 0),
            Scheme::TwoSided | Scheme::SatReflectarrayGnIrs | Scheme::RandomPhase | Scheme::CpbWithoutCommonPhase => {
                (half, total - half)
            }
        }
    }

    fn expects(self, m1: usize, m2: usize) -> bool {
        match self {
            Scheme::SatIrsOnly | Scheme::SatReflectarrayOnly => m1 == 0,
            Scheme::GnIrsOnly => m2 == 0,
            Scheme::NoIrs => m1 == 0 && m2 == 0,
            _ => true,
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// MRT/MRC active beams matched to fixed reflection vectors.
pub fn matched_beams(cs: &ChannelSet, theta1: CVector, theta2: CVector) -> Result<BeamSolution> {
    let w1 = mrt_mrc(&side_vector(cs, &theta1, Side::Gn)?)?;
    let w2 = mrt_mrc(&side_vector(cs, &theta2, Side::Sat)?)?;
    Ok(BeamSolution { w1, theta1, w2, theta2 })
}

/// Closed-form design on both sides from the channel set's own LoS data.
pub fn closed_form_solution(cs: &ChannelSet) -> Result<BeamSolution> {
    let gn = solve_side(&LocalCsi::from_channel_set(cs, Side::Gn), &OfflineSide::from_channel_set(cs, Side::Gn))?;
    let sat = solve_side(&LocalCsi::from_channel_set(cs, Side::Sat), &OfflineSide::from_channel_set(cs, Side::Sat))?;
    Ok(BeamSolution { w1: gn.w, theta1: gn.theta, w2: sat.w, theta2: sat.theta })
}

fn passive_only(cs: &ChannelSet, side: Side, common_phase: bool) -> Result<CVector> {
    let sol =
        solve_side_with(&LocalCsi::from_channel_set(cs, side), &OfflineSide::from_channel_set(cs, side), common_phase)?;
    Ok(sol.theta)
}

/// Beams for a comparison scheme. `rng` is only drawn from by
/// [`Scheme::RandomPhase`].
pub fn baseline_solution<R: Rng + ?Sized>(cs: &ChannelSet, scheme: Scheme, rng: &mut R) -> Result<BeamSolution> {
    if !scheme.expects(cs.m1(), cs.m2()) {
        return Err(mismatch(format!("scheme {scheme} does not fit IRS sizes {}/{}", cs.m1(), cs.m2())));
    }
    let reflectarray = || cs.sat_link.h_irs.map(|z| z.conj());
    let (theta1, theta2) = match scheme {
        Scheme::TwoSided | Scheme::SatIrsOnly | Scheme::GnIrsOnly | Scheme::NoIrs => {
            return closed_form_solution(cs);
        }
        Scheme::SatReflectarrayOnly | Scheme::SatReflectarrayGnIrs => {
            (passive_only(cs, Side::Gn, true)?, reflectarray())
        }
        Scheme::RandomPhase => {
            let mut draw = |m: usize| CVector::from_fn(m, |_, _| Complex64::from_polar(1.0, rng.random_range(-PI..PI)));
            let t1 = draw(cs.m1());
            let t2 = draw(cs.m2());
            (t1, t2)
        }
        Scheme::CpbWithoutCommonPhase => (passive_only(cs, Side::Gn, false)?, passive_only(cs, Side::Sat, false)?),
    };
    matched_beams(cs, theta1, theta2)
}

/// Largest number of grid points the exhaustive search will visit.
pub const ORACLE_LIMIT: f64 = 1e7;

/// Exhaustive search over `k`-level reflection grids at both surfaces, with
/// the best rank-one active beams (dominant singular pair) for each point.
/// Ties resolve to the lowest flat index.
pub fn brute_force_oracle(cs: &ChannelSet, k: usize) -> Result<(BeamSolution, f64)> {
    if k < 2 {
        return Err(invalid("oracle grid needs at least 2 levels"));
    }
    let (m1, m2) = (cs.m1(), cs.m2());
    let size = (k as f64).powi((m1 + m2) as i32);
    if size > ORACLE_LIMIT {
        return Err(Error::SearchTooLarge { size, limit: ORACLE_LIMIT });
    }
    let total = size as u64;
    let grid: Vec<Complex64> = (0..k).map(|i| Complex64::from_polar(1.0, 2.0 * PI * i as f64 / k as f64)).collect();

    // H(theta) = A + sum theta1_m B_m + sum theta2_n C_n + sum theta1_m theta2_n D_mn
    let col = |m: &CMatrix, j: usize| m.column(j).into_owned();
    let row = |m: &CMatrix, i: usize| m.row(i).transpose().into_owned();
    let b: Vec<CMatrix> = (0..m1).map(|j| col(&cs.h_i1g, j) * row(&cs.h_si1, j).transpose()).collect();
    let c: Vec<CMatrix> = (0..m2).map(|n| col(&cs.h_i2g, n) * row(&cs.h_si2, n).transpose()).collect();
    let d: Vec<Vec<CMatrix>> = (0..m1)
        .map(|j| (0..m2).map(|n| col(&cs.h_i1g, j) * (row(&cs.h_si2, n).transpose() * cs.h_i2i1[(j, n)])).collect())
        .collect();

    let decode = |mut idx: u64| -> (Vec<usize>, Vec<usize>) {
        let mut digits = vec![0usize; m1 + m2];
        for slot in digits.iter_mut().rev() {
            *slot = (idx % k as u64) as usize;
            idx /= k as u64;
        }
        let t2 = digits.split_off(m1);
        (digits, t2)
    };
    let channel = |t1: &[usize], t2: &[usize]| -> CMatrix {
        let mut h = cs.h_sg.clone();
        for (j, &a) in t1.iter().enumerate() {
            h += &b[j] * grid[a];
        }
        for (n, &a) in t2.iter().enumerate() {
            h += &c[n] * grid[a];
        }
        for (j, &a) in t1.iter().enumerate() {
            for (n, &bb) in t2.iter().enumerate() {
                h += &d[j][n] * (grid[a] * grid[bb]);
            }
        }
        h
    };

    let (best_gamma, best_idx) = (0..total)
        .into_par_iter()
        .map(|idx| {
            let (t1, t2) = decode(idx);
            (spectral_norm_sq(&channel(&t1, &t2)), idx)
        })
        .reduce(|| (f64::NEG_INFINITY, u64::MAX), |x, y| if y.0 > x.0 || (y.0 == x.0 && y.1 < x.1) { y } else { x });

    let (t1, t2) = decode(best_idx);
    let h = channel(&t1, &t2);
    let svd = h.svd(true, true);
    let (i, _) = svd.singular_values.argmax();
    let u = svd.u.as_ref().map(|u| u.column(i).into_owned()).ok_or_else(|| invalid("svd failed"))?;
    let vt = svd.v_t.as_ref().map(|v| v.row(i).transpose()).ok_or_else(|| invalid("svd failed"))?;
    // w1^T H w2 = u^H H v = sigma
    let w1 = u.map(|z| z.conj());
    let w2 = vt.map(|z| z.conj());
    let to_vec = |digits: &[usize]| CVector::from_iterator(digits.len(), digits.iter().map(|&a| grid[a]));
    Ok((BeamSolution { w1, theta1: to_vec(&t1), w2, theta2: to_vec(&t2) }, best_gamma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{build_channel_set, synthetic_los, SyntheticSizes};
    use crate::geometry::ScenarioConfig;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn phasors(rng: &mut ChaCha8Rng, n: usize) -> CVector {
        CVector::from_fn(n, |_, _| Complex64::from_polar(1.0, rng.random_range(-PI..PI)))
    }

    fn unit_vec(rng: &mut ChaCha8Rng, n: usize) -> CVector {
        let v = CVector::from_fn(n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let norm = v.norm();
        v / Complex64::from(norm)
    }

    fn tiny(seed: u64, m1: (usize, usize), m2: (usize, usize)) -> ChannelSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        synthetic_los(&mut rng, SyntheticSizes { n1: (2, 1), m1, n2: (1, 2), m2 }).unwrap()
    }

    fn scenario(m1: usize, m2: usize) -> ChannelSet {
        let mut cfg = ScenarioConfig::default();
        cfg.arrays.m1 = m1;
        cfg.arrays.m2 = m2;
        cfg.fold_split_residual = true;
        build_channel_set(&cfg, 10.0, f64::INFINITY, &mut ChaCha8Rng::seed_from_u64(0)).unwrap()
    }

    #[test]
    fn mrt_examples() {
        let w = mrt_mrc(&CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)])).unwrap();
        assert_eq!(w, CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]));
        let f = CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0)]);
        let w = mrt_mrc(&f).unwrap();
        let r = 0.5f64.sqrt();
        assert!((w[0] - c(r, 0.0)).norm() < 1e-15 && (w[1] - c(0.0, -r)).norm() < 1e-15);
        assert!((dot_t(&w, &f) - c(2f64.sqrt(), 0.0)).norm() < 1e-15);
        assert!(mrt_mrc(&CVector::zeros(3)).is_err());
    }

    #[test]
    fn mrt_beats_random_beams() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = CVector::from_fn(6, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let w = mrt_mrc(&f).unwrap();
        let best = dot_t(&w, &f).norm_sqr();
        assert!((best - f.norm_squared()).abs() < 1e-12);
        for _ in 0..100 {
            let u = unit_vec(&mut rng, 6);
            assert!(dot_t(&u, &f).norm_sqr() <= best + 1e-12);
        }
    }

    #[test]
    fn passive_examples() {
        let ones = CVector::from_element(3, c(1.0, 0.0));
        assert_eq!(optimal_passive(0.0, &ones, &ones).unwrap(), ones);
        let h = CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0)]);
        let a = CVector::from_vec(vec![c(1.0, 0.0), c(-1.0, 0.0)]);
        let psi = 0.7;
        let t = optimal_passive(psi, &h, &a).unwrap();
        let rot = Complex64::from_polar(1.0, psi);
        assert!((t[0] - rot).norm() < 1e-15 && (t[1] - rot * c(0.0, 1.0)).norm() < 1e-15);
        assert!((dot_t(&h, &t.component_mul(&a)).norm() - 2.0).abs() < 1e-14);
        assert!(optimal_passive(0.0, &h, &ones).is_err());
    }

    #[test]
    fn common_phase_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = phasors(&mut rng, 4);
        let p = optimal_common_phase(0.0, c(0.3, 0.0), &a, &a).unwrap();
        assert!(p.psi.abs() < 1e-12 && !p.degenerate);
        let h = phasors(&mut rng, 4);
        let delta = c(0.01, -0.02);
        let p0 = optimal_common_phase(0.4, delta, &a, &h).unwrap();
        let p1 = optimal_common_phase(0.4 + PI, delta, &a, &h).unwrap();
        assert!(wrap_angle(p1.psi - p0.psi - PI).abs() < 1e-12);
        let e0 = CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let e1 = CVector::from_vec(vec![c(0.0, 0.0), c(1.0, 0.0)]);
        let p = optimal_common_phase(1.0, delta, &e0, &e1).unwrap();
        assert!(p.degenerate && p.psi == 0.0);
    }

    #[test]
    fn optimal_gain_edge_cases() {
        let rn = c(0.3, 0.4);
        assert!((optimal_gain(4, 0, rn, c(1.0, 1.0), c(0.1, 0.0), c(2.0, 0.0)) - 4.0 * 0.25).abs() < 1e-15);
        let g = optimal_gain(4, 3, c(0.0, 0.0), c(0.0, 2.0), c(0.1, 0.0), c(1.0, 1.0));
        assert!((g - 4.0 * 9.0 * 0.04).abs() < 1e-12);
    }

    #[test]
    fn optimal_gain_beats_random_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (n, m) = (2, 2);
        let a = phasors(&mut rng, n);
        let hn = phasors(&mut rng, n);
        let hi = phasors(&mut rng, m);
        let ai = phasors(&mut rng, m);
        let (rho_n, rho_i, delta) = (c(0.8, -0.3), c(-0.2, 0.5), c(0.6, 0.9));
        let closed = optimal_gain(n, m, rho_n, rho_i, delta, a.dotc(&hn));
        let mut best: f64 = 0.0;
        for _ in 0..1_000_000 {
            let t = phasors(&mut rng, m);
            let f = &a * rho_n + &hn * (rho_i * delta * dot_t(&hi, &t.component_mul(&ai)));
            best = best.max(f.norm_squared());
        }
        assert!(best <= closed * (1.0 + 1e-12));
        assert!((closed - best) / closed < 1e-3, "{closed} {best}");
    }

    #[test]
    fn side_vector_examples() {
        let cs = tiny(4, (0, 0), (0, 0));
        let f = side_vector(&cs, &CVector::zeros(0), Side::Gn).unwrap();
        assert_eq!(f, &cs.a_g * cs.split.rho_g);
        assert!(side_vector(&cs, &CVector::zeros(2), Side::Sat).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let one = SyntheticSizes { n1: (1, 1), m1: (1, 1), n2: (1, 1), m2: (1, 1) };
        let cs = synthetic_los(&mut rng, one).unwrap();
        let t = CVector::from_element(1, Complex64::from_polar(1.0, 0.3));
        let f = side_vector(&cs, &t, Side::Gn).unwrap();
        let hand = cs.split.rho_g * cs.a_g[0] + cs.split.rho_i1 * cs.h_i1g[(0, 0)] * t[0] * cs.a_i1[0];
        assert!((f[0] - hand).norm() < 1e-15);
    }

    #[test]
    fn closed_form_side_gain_matches_formula() {
        let cs = scenario(40, 60);
        for side in [Side::Gn, Side::Sat] {
            let csi = LocalCsi::from_channel_set(&cs, side);
            let off = OfflineSide::from_channel_set(&cs, side);
            let sol = solve_side(&csi, &off).unwrap();
            let f = side_vector(&cs, &sol.theta, side).unwrap();
            let (rn, ri, a) = match side {
                Side::Gn => (cs.split.rho_g, cs.split.rho_i1, &cs.a_g),
                Side::Sat => (cs.split.rho_s, cs.split.rho_i2, &cs.a_s),
            };
            let closed = optimal_gain(a.len(), off.m(), rn, ri, off.link.delta, a.dotc(&off.link.h_node));
            assert!((f.norm_squared() - closed).abs() / closed < 1e-9);
            assert!((sol.gamma * rn.norm_sqr() - closed).abs() / closed < 1e-9);
            assert!((sol.w.norm() - 1.0).abs() < 1e-12);
            assert!(crate::linalg::is_unit_modulus(&sol.theta, 1e-12));
        }
    }

    #[test]
    fn end_to_end_gain_factorizes() {
        let cs = scenario(40, 60);
        let sol = closed_form_solution(&cs).unwrap();
        let g1 = dot_t(&sol.w1, &side_vector(&cs, &sol.theta1, Side::Gn).unwrap()).norm_sqr();
        let g2 = dot_t(&sol.w2, &side_vector(&cs, &sol.theta2, Side::Sat).unwrap()).norm_sqr();
        let direct = sol.gain(&cs).unwrap();
        assert!((g1 * g2 - direct).abs() / direct < 1e-6);
        assert_eq!(closed_form_solution(&cs).unwrap(), sol);
    }

    #[test]
    fn empty_irs_side_is_plain_mrt() {
        let cs = scenario(0, 30);
        let sol = solve_side(&LocalCsi::from_channel_set(&cs, Side::Gn), &OfflineSide::from_channel_set(&cs, Side::Gn))
            .unwrap();
        assert_eq!(sol.theta.len(), 0);
        assert!((sol.w - mrt_mrc(&cs.a_g).unwrap()).camax() < 1e-12);
    }

    #[test]
    fn quantization_examples() {
        let one = |phase: f64| CVector::from_element(1, Complex64::from_polar(1.0, phase));
        for k in [2, 3, 8, 64] {
            assert!((quantize_phases(&one(0.0), k).unwrap()[0] - c(1.0, 0.0)).norm() < 1e-15);
        }
        assert!((quantize_phases(&one(0.3), 8).unwrap()[0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((quantize_phases(&one(-3.0), 2).unwrap()[0] - c(-1.0, 0.0)).norm() < 1e-12);
        // exactly halfway between grid points 0 and 1 of K = 4
        let q = quantize_phases(&one(PI / 4.0), 4).unwrap()[0];
        assert!((q - c(1.0, 0.0)).norm() < 1e-12);
        assert!(quantize_phases(&one(0.0), 1).is_err());
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(Scheme::parse(s.name()).unwrap(), s);
        }
        assert!(Scheme::parse("bogus").is_err());
        assert_eq!(Scheme::TwoSided.irs_split(1001), (500, 501));
        assert_eq!(Scheme::SatIrsOnly.irs_split(1000), (0, 1000));
        assert_eq!(Scheme::GnIrsOnly.irs_split(1000), (1000, 0));
    }

    #[test]
    fn no_irs_gain_is_direct_link_optimum() {
        let cs = scenario(0, 0);
        let sol = baseline_solution(&cs, Scheme::NoIrs, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let expect = 625.0 * cs.rho_gs.value.norm_sqr();
        assert!((sol.gain(&cs).unwrap() - expect).abs() / expect < 1e-12);
        assert!(baseline_solution(&cs, Scheme::GnIrsOnly, &mut ChaCha8Rng::seed_from_u64(0)).is_ok());
        let cs2 = scenario(10, 0);
        assert!(baseline_solution(&cs2, Scheme::NoIrs, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn random_phase_is_reproducible() {
        let cs = scenario(16, 16);
        let a = baseline_solution(&cs, Scheme::RandomPhase, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = baseline_solution(&cs, Scheme::RandomPhase, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a.gain(&cs).unwrap(), b.gain(&cs).unwrap());
    }

    #[test]
    fn two_sided_dominates_on_shared_channel() {
        let cs = scenario(50, 50);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let best = closed_form_solution(&cs).unwrap().gain(&cs).unwrap();
        for s in [Scheme::SatReflectarrayGnIrs, Scheme::RandomPhase, Scheme::CpbWithoutCommonPhase] {
            let g = baseline_solution(&cs, s, &mut rng).unwrap().gain(&cs).unwrap();
            assert!(g <= best * (1.0 + 1e-9), "{s}");
        }
    }

    #[test]
    fn oracle_matches_no_irs_without_surfaces() {
        let cs = tiny(6, (0, 0), (0, 0));
        let (_, gamma) = brute_force_oracle(&cs, 8).unwrap();
        let expect = closed_form_solution(&cs).unwrap().gain(&cs).unwrap();
        assert!((gamma - expect).abs() / expect < 1e-12);
    }

    #[test]
    fn oracle_brackets_closed_form() {
        let k = 8;
        for seed in 0..5 {
            let cs = tiny(seed, (2, 1), (1, 2));
            let closed = closed_form_solution(&cs).unwrap().gain(&cs).unwrap();
            let (sol, gamma) = brute_force_oracle(&cs, k).unwrap();
            assert!(gamma <= closed * (1.0 + 1e-9), "{seed}");
            assert!(gamma >= (PI / k as f64).cos().powi(4) * closed, "{seed}");
            assert!((sol.gain(&cs).unwrap() - gamma).abs() / gamma < 1e-9);
        }
        let big = tiny(0, (3, 3), (3, 3));
        assert!(matches!(brute_force_oracle(&big, 8), Err(Error::SearchTooLarge { .. })));
    }

    proptest! {
        #[test]
        fn quantization_error_bounded(phase in -PI..PI, k in 2usize..65) {
            let q = quantize_phases(&CVector::from_element(1, Complex64::from_polar(1.0, phase)), k).unwrap()[0];
            prop_assert!((q.norm() - 1.0).abs() < 1e-12);
            prop_assert!(wrap_angle(q.arg() - phase).abs() <= PI / k as f64 + 1e-12);
        }

        #[test]
        fn quantized_coherent_sum_bound(seed in 0u64..500, k in 2usize..17) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = phasors(&mut rng, 30);
            let a = phasors(&mut rng, 30);
            let t = optimal_passive(rng.random_range(-PI..PI), &h, &a).unwrap();
            let full = dot_t(&h, &t.component_mul(&a)).norm();
            let q = quantize_phases(&t, k).unwrap();
            let coarse = dot_t(&h, &q.component_mul(&a)).norm();
            prop_assert!(coarse >= (PI / k as f64).cos() * full - 1e-9);
        }

        #[test]
        fn gain_factorizes_for_any_beams(seed in 0u64..300) {
            let cs = tiny(seed, (2, 2), (1, 3));
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
            let t1 = phasors(&mut rng, cs.m1());
            let t2 = phasors(&mut rng, cs.m2());
            let w1 = unit_vec(&mut rng, cs.n1());
            let w2 = unit_vec(&mut rng, cs.n2());
            let g1 = dot_t(&w1, &side_vector(&cs, &t1, Side::Gn).unwrap()).norm_sqr();
            let g2 = dot_t(&w2, &side_vector(&cs, &t2, Side::Sat).unwrap()).norm_sqr();
            let g = cs.gain(&w1, &t1, &t2, &w2).unwrap();
            prop_assert!((g1 * g2 - g).abs() <= 1e-9 * g.max(1e-300));
        }

        #[test]
        fn mrt_dominates_sampled_beams(seed in 0u64..50) {
            let cs = tiny(seed, (2, 2), (2, 1));
            let sol = closed_form_solution(&cs).unwrap();
            let best = sol.gain(&cs).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 99);
            for _ in 0..1000 {
                let w1 = unit_vec(&mut rng, cs.n1());
                let w2 = unit_vec(&mut rng, cs.n2());
                prop_assert!(cs.gain(&w1, &sol.theta1, &sol.theta2, &w2).unwrap() <= best * (1.0 + 1e-12));
            }
        }

        #[test]
        fn gauge_rotation_leaves_gain_unchanged(seed in 0u64..200, g in -PI..PI, s in -PI..PI) {
            let cs = tiny(seed, (2, 2), (2, 2));
            let base = closed_form_solution(&cs).unwrap();
            let mut rotated = cs.clone();
            let (pg, ps) = (Complex64::from_polar(1.0, g), Complex64::from_polar(1.0, s));
            rotated.split.rho_g *= pg;
            rotated.split.rho_i1 *= pg;
            rotated.split.rho_s *= ps;
            rotated.split.rho_i2 *= ps;
            let sol = closed_form_solution(&rotated).unwrap();
            let ga = base.gain(&cs).unwrap();
            let gb = sol.gain(&cs).unwrap();
            prop_assert!((ga - gb).abs() <= 1e-9 * ga);
            // reflection vectors agree up to one common phase
            let r = sol.theta1[0] / base.theta1[0];
            prop_assert!((&base.theta1 * r - &sol.theta1).camax() < 1e-9);
        }
    }
}
