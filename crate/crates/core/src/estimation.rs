//! Pilot training, least-squares unstacking and local CSI estimation.

use std::f64::consts::PI;

use nalgebra::Cholesky;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::arrays::{steering_vector, upa_response, ArrayGeometry};
use crate::beamforming::{BeamSolution, LocalCsi, Side};
use crate::channels::ChannelSet;
use crate::error::{invalid, mismatch, Error, Result};
use crate::geometry::{wrap_angle, AoAPair};
use crate::{CMatrix, CVector};

/// Relative pivot below which the normal equations count as singular.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingConfig {
    /// Downlink pilots (ground side estimated).
    pub i_d: usize,
    /// Uplink pilots (satellite side estimated).
    pub i_u: usize,
    /// Normalized noise variance per received sample.
    pub noise_var: f64,
    pub grid_theta: usize,
    pub grid_phi: usize,
    pub refine_iters: usize,
    /// Search azimuth only with zero elevation.
    pub in_plane: bool,
}

impl TrainingConfig {
    /// Defaults for given IRS sizes: `M + 2` pilots per direction, which is
    /// the smallest comfortable count that keeps the unknowns identifiable
    /// when the node-to-IRS link is rank one.
    pub fn new(m1: usize, m2: usize, noise_var: f64) -> Self {
        Self { i_d: m1 + 2, i_u: m2 + 2, noise_var, grid_theta: 256, grid_phi: 64, refine_iters: 4, in_plane: true }
    }

    pub fn validate(&self, n1: usize, m1: usize, n2: usize, m2: usize) -> Result<()> {
        if self.i_d * n1 < n1 + m1 || self.i_d == 0 {
            return Err(invalid(format!("{} downlink pilots cannot resolve {} unknowns", self.i_d, n1 + m1)));
        }
        if self.i_u * n2 < n2 + m2 || self.i_u == 0 {
            return Err(invalid(format!("{} uplink pilots cannot resolve {} unknowns", self.i_u, n2 + m2)));
        }
        if !(self.noise_var >= 0.0) || !self.noise_var.is_finite() {
            return Err(invalid("noise variance must be finite and nonnegative"));
        }
        if self.grid_theta < 4 || (!self.in_plane && self.grid_phi < 2) {
            return Err(invalid("angle grid too coarse"));
        }
        Ok(())
    }
}

/// Reflection vectors for `i` pilots on an `m`-element IRS:
/// `theta_k[j] = exp(-j 2 pi k (j + 1) / P)` with `P = max(i, m + 1)`.
/// Offsetting the column index by one keeps every IRS column orthogonal to
/// the direct path whenever `i >= m + 1`.
pub fn pilot_schedule(m: usize, n: usize, i: usize) -> Result<Vec<CVector>> {
    if i * n < n + m || i == 0 {
        return Err(invalid(format!("{i} pilots of {n} samples cannot resolve {} unknowns", n + m)));
    }
    let period = i.max(m + 1) as f64;
    Ok((0..i)
        .map(|k| CVector::from_fn(m, |j, _| Complex64::from_polar(1.0, -2.0 * PI * (k * (j + 1)) as f64 / period)))
        .collect())
}

/// Stacked pilot observations for one side.
///
/// Pilot `k` sees `y_k = d + C (theta_k o s) + v_k`, where `d` (length N) is
/// the direct-path component at the node, `s` (length M) the component
/// impinging on the IRS, and `C` the fixed IRS-to-node coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRecord {
    /// `I * N` samples, pilot-major.
    pub observations: CVector,
    pub coupling: CMatrix,
    pub schedule: Vec<CVector>,
}

impl TrainingRecord {
    pub fn n(&self) -> usize {
        self.coupling.nrows()
    }

    pub fn m(&self) -> usize {
        self.coupling.ncols()
    }

    pub fn pilots(&self) -> usize {
        self.schedule.len()
    }

    fn block(&self, k: usize) -> CVector {
        let n = self.n();
        self.observations.rows(k * n, n).into_owned()
    }

    /// Dense `(I N) x (N + M)` observation matrix `[Id, C diag(theta_k)]`.
    pub fn observation_matrix(&self) -> CMatrix {
        let (n, m) = (self.n(), self.m());
        let mut g = CMatrix::zeros(self.pilots() * n, n + m);
        for (k, theta) in self.schedule.iter().enumerate() {
            for r in 0..n {
                g[(k * n + r, r)] = Complex64::new(1.0, 0.0);
                for j in 0..m {
                    g[(k * n + r, n + j)] = self.coupling[(r, j)] * theta[j];
                }
            }
        }
        g
    }
}

fn cscg<R: Rng + ?Sized>(rng: &mut R, n: usize, var: f64) -> CVector {
    let sd = (var / 2.0).sqrt();
    CVector::from_fn(n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re * sd, im * sd)
    })
}

/// Pilot observations at the receiving side of `view` while the far side
/// transmits with beam `tx_w` through its own IRS setting `tx_theta`.
fn simulate<R: Rng + ?Sized>(
    view: &ChannelSet,
    tx_w: &CVector,
    tx_theta: &CVector,
    pilots: usize,
    noise_var: f64,
    rng: &mut R,
) -> Result<TrainingRecord> {
    if tx_w.len() != view.n2() || tx_theta.len() != view.m2() {
        return Err(mismatch("transmit beams do not match the far-side arrays"));
    }
    let (n, m) = (view.n1(), view.m1());
    let schedule = pilot_schedule(m, n, pilots)?;
    let z = (&view.h_si2 * tx_w).component_mul(tx_theta);
    let d = &view.h_sg * tx_w + &view.h_i2g * &z;
    let s = &view.h_si1 * tx_w + &view.h_i2i1 * &z;
    let mut observations = CVector::zeros(pilots * n);
    for (k, theta) in schedule.iter().enumerate() {
        let mut y = &d + &view.h_i1g * theta.component_mul(&s);
        if noise_var > 0.0 {
            y += cscg(rng, n, noise_var);
        }
        observations.rows_mut(k * n, n).copy_from(&y);
    }
    Ok(TrainingRecord { observations, coupling: view.h_i1g.clone(), schedule })
}

/// Ground node receives `i_d` pilots from the satellite using `(w2, theta2)`.
pub fn downlink_training<R: Rng + ?Sized>(
    cs: &ChannelSet,
    w2: &CVector,
    theta2: &CVector,
    tc: &TrainingConfig,
    rng: &mut R,
) -> Result<TrainingRecord> {
    simulate(cs, w2, theta2, tc.i_d, tc.noise_var, rng)
}

/// Satellite receives `i_u` pilots from the ground node using `(w1, theta1)`.
pub fn uplink_training<R: Rng + ?Sized>(
    cs: &ChannelSet,
    w1: &CVector,
    theta1: &CVector,
    tc: &TrainingConfig,
    rng: &mut R,
) -> Result<TrainingRecord> {
    simulate(&cs.uplink(), w1, theta1, tc.i_u, tc.noise_var, rng)
}

/// Least-squares split of the stacked observations into the node component
/// (length N) and the IRS component (length M), via the normal equations of
/// the block-structured observation matrix.
pub fn ls_unstack(rec: &TrainingRecord) -> Result<(CVector, CVector)> {
    let (n, m, pilots) = (rec.n(), rec.m(), rec.pilots());
    if pilots == 0 || rec.observations.len() != pilots * n {
        return Err(mismatch("observation length does not match the schedule"));
    }
    let c = &rec.coupling;
    let mut theta_rows = CMatrix::zeros(pilots, m);
    for (k, t) in rec.schedule.iter().enumerate() {
        if t.len() != m {
            return Err(mismatch("schedule entry has the wrong length"));
        }
        theta_rows.row_mut(k).copy_from(&t.transpose());
    }
    let theta_sum = CVector::from_fn(m, |j, _| theta_rows.column(j).sum());
    let cross = theta_rows.adjoint() * &theta_rows;
    let chc = c.adjoint() * c;

    let mut gram = CMatrix::zeros(n + m, n + m);
    for r in 0..n {
        gram[(r, r)] = Complex64::new(pilots as f64, 0.0);
    }
    let top_right = CMatrix::from_fn(n, m, |r, j| c[(r, j)] * theta_sum[j]);
    gram.view_mut((0, n), (n, m)).copy_from(&top_right);
    gram.view_mut((n, 0), (m, n)).copy_from(&top_right.adjoint());
    gram.view_mut((n, n), (m, m)).copy_from(&chc.component_mul(&cross));

    let mut rhs = CVector::zeros(n + m);
    for k in 0..pilots {
        let y = rec.block(k);
        let back = c.adjoint() * &y;
        for r in 0..n {
            rhs[r] += y[r];
        }
        for j in 0..m {
            rhs[n + j] += rec.schedule[k][j].conj() * back[j];
        }
    }

    // Jacobi scaling so the pivot test is independent of units
    let scale: Vec<f64> = (0..n + m)
        .map(|i| {
            let d = gram[(i, i)].re;
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    if scale.contains(&0.0) {
        return Err(Error::RankDeficient(0.0));
    }
    let scaled = CMatrix::from_fn(n + m, n + m, |i, j| gram[(i, j)] * scale[i] * scale[j]);
    let chol = Cholesky::new(scaled).ok_or(Error::RankDeficient(0.0))?;
    let l = chol.l_dirty();
    let min_pivot = (0..n + m).map(|i| l[(i, i)].re.powi(2)).fold(f64::INFINITY, f64::min);
    if min_pivot < RANK_TOL {
        return Err(Error::RankDeficient(min_pivot));
    }
    let b = CVector::from_fn(n + m, |i, _| rhs[i] * scale[i]);
    let x = chol.solve(&b);
    let x = CVector::from_fn(n + m, |i, _| x[i] * scale[i]);
    Ok((x.rows(0, n).into_owned(), x.rows(n, m).into_owned()))
}

/// `|a(aoa)^H y|^2` without forming the full response.
fn matched_power(geom: &ArrayGeometry, y: &CVector, aoa: &AoAPair, wavelength_m: f64) -> f64 {
    let scale = 2.0 * geom.spacing_m / wavelength_m * aoa.phi_rad.cos();
    // both factors are built from closed-form phases; lengths are >= 1
    let ex = steering_vector(scale * aoa.theta_rad.cos(), geom.nx).unwrap_or_else(|_| CVector::zeros(0));
    let ey = steering_vector(scale * aoa.theta_rad.sin(), geom.ny).unwrap_or_else(|_| CVector::zeros(0));
    let mut acc = Complex64::new(0.0, 0.0);
    for p in 0..geom.nx {
        let mut inner = Complex64::new(0.0, 0.0);
        for q in 0..geom.ny {
            inner += ey[q].conj() * y[p * geom.ny + q];
        }
        acc += ex[p].conj() * inner;
    }
    acc.norm_sqr()
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > 1e-12 {
        if fa >= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

/// Single-source angle estimate: matched-filter grid search over azimuth in
/// `[-pi, pi)` and elevation in `[0, pi/2]`, then alternating golden-section
/// refinement inside one grid cell.
pub fn estimate_aoa(y: &CVector, geom: &ArrayGeometry, wavelength_m: f64, tc: &TrainingConfig) -> Result<AoAPair> {
    if y.len() != geom.len() {
        return Err(mismatch(format!("{} samples for a {}-element array", y.len(), geom.len())));
    }
    if y.iter().all(|z| z.norm() == 0.0) {
        return Err(invalid("cannot estimate an angle from an all-zero observation"));
    }
    let nt = tc.grid_theta.max(4);
    let np = if tc.in_plane { 1 } else { tc.grid_phi.max(2) };
    let cell_t = 2.0 * PI / nt as f64;
    let cell_p = if np > 1 { 0.5 * PI / (np - 1) as f64 } else { 0.0 };
    let power = |t: f64, p: f64| matched_power(geom, y, &AoAPair { theta_rad: t, phi_rad: p }, wavelength_m);

    let (mut theta, mut phi, mut best) = (0.0, 0.0, f64::NEG_INFINITY);
    for k in 0..nt {
        let t = -PI + cell_t * k as f64;
        for l in 0..np {
            let p = cell_p * l as f64;
            let v = power(t, p);
            if v > best {
                (theta, phi, best) = (t, p, v);
            }
        }
    }
    for _ in 0..tc.refine_iters.max(1) {
        theta = golden_max(|t| power(t, phi), theta - cell_t, theta + cell_t);
        if np > 1 {
            phi = golden_max(|p| power(theta, p), (phi - cell_p).max(0.0), (phi + cell_p).min(0.5 * PI));
        }
    }
    Ok(AoAPair::new(theta, phi))
}

/// `a^H y / len` at the estimated angles for the node and IRS components.
/// An empty IRS component yields a zero IRS gain.
pub fn estimate_path_gains(
    y_node: &CVector,
    y_irs: &CVector,
    aoa_node: &AoAPair,
    aoa_irs: &AoAPair,
    node: &ArrayGeometry,
    irs: Option<&ArrayGeometry>,
    wavelength_m: f64,
) -> Result<(Complex64, Complex64)> {
    let a = upa_response(node, aoa_node, wavelength_m)?;
    if a.len() != y_node.len() {
        return Err(mismatch("node observation length"));
    }
    let rho_node = a.dotc(y_node) / a.len() as f64;
    let rho_irs = match irs {
        Some(g) if !y_irs.is_empty() => {
            let a = upa_response(g, aoa_irs, wavelength_m)?;
            if a.len() != y_irs.len() {
                return Err(mismatch("IRS observation length"));
            }
            a.dotc(y_irs) / a.len() as f64
        }
        _ => Complex64::new(0.0, 0.0),
    };
    Ok((rho_node, rho_irs))
}

/// `arg(node) - arg(irs)`, wrapped.
pub fn phase_diff(rho_node: Complex64, rho_irs: Complex64) -> Result<f64> {
    if rho_node.norm() == 0.0 || rho_irs.norm() == 0.0 {
        return Err(invalid("phase difference of a zero gain"));
    }
    Ok(wrap_angle(rho_node.arg() - rho_irs.arg()))
}

/// Local CSI from one training record.
pub fn csi_from_record(
    rec: &TrainingRecord,
    node: &ArrayGeometry,
    irs: Option<&ArrayGeometry>,
    wavelength_m: f64,
    tc: &TrainingConfig,
    side: Side,
) -> Result<LocalCsi> {
    let (y_node, y_irs) = ls_unstack(rec)?;
    let aoa_node = estimate_aoa(&y_node, node, wavelength_m, tc)?;
    let aoa_irs = match irs {
        Some(g) => estimate_aoa(&y_irs, g, wavelength_m, tc)?,
        None => AoAPair::default(),
    };
    let (rho_node, rho_irs) = estimate_path_gains(&y_node, &y_irs, &aoa_node, &aoa_irs, node, irs, wavelength_m)?;
    let (delta_rho, gain_ratio) =
        if irs.is_some() { (phase_diff(rho_node, rho_irs)?, rho_irs.norm() / rho_node.norm()) } else { (0.0, 0.0) };
    Ok(LocalCsi { aoa_node, aoa_irs, delta_rho, gain_ratio, side })
}

/// Train and estimate one side. The ground side listens to downlink pilots
/// sent with `peer.w2, peer.theta2`; the satellite side listens to uplink
/// pilots sent with `peer.w1, peer.theta1`.
pub fn estimate_local_csi<R: Rng + ?Sized>(
    cs: &ChannelSet,
    side: Side,
    peer: &BeamSolution,
    tc: &TrainingConfig,
    rng: &mut R,
) -> Result<LocalCsi> {
    match side {
        Side::Gn => {
            let rec = downlink_training(cs, &peer.w2, &peer.theta2, tc, rng)?;
            csi_from_record(&rec, &cs.gn_geom, cs.irs1_geom.as_ref(), cs.wavelength_m, tc, side)
        }
        Side::Sat => {
            let rec = uplink_training(cs, &peer.w1, &peer.theta1, tc, rng)?;
            csi_from_record(&rec, &cs.sat_geom, cs.irs2_geom.as_ref(), cs.wavelength_m, tc, side)
        }
    }
}

/// Beams a satellite uses before any ground feedback. With IRS-2 present
/// the antenna feeds the surface and the surface is steered toward nadir
/// (the centre of the coverage area); otherwise the antenna itself points
/// at nadir. When the satellite frame has no well-defined nadir the antenna
/// radiates uniformly and IRS-2 only undoes its feed-link phase.
pub fn initial_access_beams(cs: &ChannelSet) -> (CVector, CVector) {
    let n2 = cs.n2();
    let norm = 1.0 / (n2 as f64).sqrt();
    let fallback = || {
        let w2 = CVector::from_element(n2, Complex64::new(norm, 0.0));
        (w2, cs.sat_link.h_irs.map(|z| z.conj()))
    };
    let nadir = -cs.sat_geom.origin;
    let toward_nadir = |g: &ArrayGeometry| {
        crate::geometry::aoa_pair(g, &(g.origin + nadir)).and_then(|a| upa_response(g, &a, cs.wavelength_m))
    };
    match &cs.irs2_geom {
        Some(g) => match toward_nadir(g) {
            Ok(a_i2) => {
                let theta2 = cs.sat_link.h_irs.zip_map(&a_i2, |h, a| (h * a).conj());
                (cs.sat_link.h_node.map(|z| z.conj() * norm), theta2)
            }
            Err(_) => fallback(),
        },
        None => match toward_nadir(&cs.sat_geom) {
            Ok(a_s) => (a_s.map(|z| z.conj() * norm), CVector::zeros(0)),
            Err(_) => fallback(),
        },
    }
}
