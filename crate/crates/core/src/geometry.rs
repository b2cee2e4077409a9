//! Orbit propagation, node placement, distances and angle pairs.

use std::f64::consts::PI;

use nalgebra::Vector3;

use crate::arrays::ArrayGeometry;
use crate::channels::ShortRangeModel;
use crate::error::{invalid, Error, Result};

pub type Position3D = Vector3<f64>;

/// Wrap an angle into `[-pi, pi)`.
pub fn wrap_angle(x: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let w = x - two_pi * ((x + PI) / two_pi).floor();
    // floor can land exactly on +pi through rounding
    if w >= PI {
        w - two_pi
    } else {
        w
    }
}

/// Azimuth/elevation pair seen by a planar array, in its own frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AoAPair {
    pub theta_rad: f64,
    pub phi_rad: f64,
}

impl AoAPair {
    pub fn new(theta_rad: f64, phi_rad: f64) -> Self {
        Self { theta_rad: wrap_angle(theta_rad), phi_rad: wrap_angle(phi_rad) }
    }

    /// Unit direction in the array frame: `(cos phi cos theta, cos phi sin theta, sin phi)`.
    pub fn local_direction(&self) -> Vector3<f64> {
        let (st, ct) = self.theta_rad.sin_cos();
        let (sp, cp) = self.phi_rad.sin_cos();
        Vector3::new(cp * ct, cp * st, sp)
    }

    /// Pair whose local direction is `dir` (need not be normalized).
    pub fn from_local_direction(dir: &Vector3<f64>) -> Result<Self> {
        let norm = dir.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::DegenerateGeometry("zero-length direction".into()));
        }
        let d = dir / norm;
        let phi = d.z.clamp(-1.0, 1.0).asin();
        let horizontal = d.x.hypot(d.y);
        let theta = if horizontal < 1e-12 { 0.0 } else { d.y.atan2(d.x) };
        Ok(Self::new(theta, phi))
    }
}

/// How array planes are oriented in the scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Orientation {
    /// Array planes contain the orbital plane: local x along-track, local y
    /// radial. All in-plane sources have `phi = 0`.
    #[default]
    InPlane,
    /// Ground arrays face zenith, satellite-side arrays face nadir.
    Horizon,
}

/// Element counts for the four arrays and the common element spacing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArraySizes {
    pub n1: (usize, usize),
    pub n2: (usize, usize),
    pub m1: usize,
    pub m2: usize,
    pub spacing_m: f64,
}

impl Default for ArraySizes {
    fn default() -> Self {
        Self { n1: (5, 5), n2: (5, 5), m1: 500, m2: 500, spacing_m: 0.25 }
    }
}

/// Near-square `(nx, ny)` factorization of `m` with `nx >= ny`.
pub fn planar_layout(m: usize) -> (usize, usize) {
    if m == 0 {
        return (0, 0);
    }
    let mut ny = (m as f64).sqrt().floor() as usize;
    while ny > 1 && !m.is_multiple_of(ny) {
        ny -= 1;
    }
    let ny = ny.max(1);
    (m / ny, ny)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub earth_radius_m: f64,
    pub orbit_altitude_m: f64,
    pub orbit_speed_mps: f64,
    pub gn_position_m: Position3D,
    pub irs1_position_m: Position3D,
    /// IRS-2 offset from the satellite reference point, expressed at `t = 0`
    /// and carried rigidly with the satellite frame afterwards.
    pub sat_offset_m: Position3D,
    pub wavelength_m: f64,
    pub ref_path_gain_db: f64,
    pub noise_power_dbm: f64,
    pub tx_power_dbm: f64,
    /// Rician factor in dB; `f64::INFINITY` means pure LoS.
    pub rician_factor_db: f64,
    pub rng_seed: u64,
    pub arrays: ArraySizes,
    pub short_range: ShortRangeModel,
    pub orientation: Orientation,
    /// Rebuild the IRS-IRS link from the split gains so that the outer-product
    /// decomposition of the effective channel is exact.
    pub fold_split_residual: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let earth = 6.37e6;
        Self {
            earth_radius_m: earth,
            orbit_altitude_m: 6e5,
            orbit_speed_mps: 7.5665e3,
            gn_position_m: Vector3::new(0.0, 0.0, earth + 100.0),
            irs1_position_m: Vector3::new(5.0, 0.0, earth + 95.0),
            sat_offset_m: Vector3::new(3.0, 0.0, 3.0),
            wavelength_m: 2.0,
            ref_path_gain_db: -30.0,
            noise_power_dbm: -90.0,
            tx_power_dbm: 30.0,
            rician_factor_db: 10.0,
            rng_seed: 0,
            arrays: ArraySizes::default(),
            short_range: ShortRangeModel::RankOne,
            orientation: Orientation::InPlane,
            fold_split_residual: false,
        }
    }
}

impl ScenarioConfig {
    pub fn orbit_radius_m(&self) -> f64 {
        self.earth_radius_m + self.orbit_altitude_m
    }

    pub fn beta_linear(&self) -> f64 {
        10f64.powf(self.ref_path_gain_db / 10.0)
    }

    /// Normalized noise power `sigma_N^2 / P_T` (linear).
    pub fn noise_var(&self) -> f64 {
        10f64.powf((self.noise_power_dbm - self.tx_power_dbm) / 10.0)
    }

    pub fn kappa_linear(&self) -> f64 {
        if self.rician_factor_db.is_infinite() && self.rician_factor_db > 0.0 {
            f64::INFINITY
        } else {
            10f64.powf(self.rician_factor_db / 10.0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: &Position3D| v.iter().all(|c| c.is_finite());
        if !(self.earth_radius_m > 0.0) {
            return Err(invalid("earth radius must be positive"));
        }
        if !(self.orbit_altitude_m > 0.0) {
            return Err(invalid("orbit radius must exceed the earth radius"));
        }
        if !(self.orbit_speed_mps > 0.0) || !self.orbit_speed_mps.is_finite() {
            return Err(invalid("orbit speed must be positive"));
        }
        if !(self.wavelength_m > 0.0) || !self.wavelength_m.is_finite() {
            return Err(invalid("wavelength must be positive"));
        }
        if !finite(&self.gn_position_m) || !finite(&self.irs1_position_m) || !finite(&self.sat_offset_m) {
            return Err(invalid("positions must be finite"));
        }
        let a = &self.arrays;
        if a.n1.0 == 0 || a.n1.1 == 0 || a.n2.0 == 0 || a.n2.1 == 0 {
            return Err(invalid("active arrays need at least one element per axis"));
        }
        if !(a.spacing_m > 0.0) {
            return Err(invalid("element spacing must be positive"));
        }
        if self.rician_factor_db.is_nan() {
            return Err(invalid("rician factor must be a number"));
        }
        Ok(())
    }
}

pub fn orbital_period(cfg: &ScenarioConfig) -> f64 {
    2.0 * PI * cfg.orbit_radius_m() / cfg.orbit_speed_mps
}

fn orbit_angle(cfg: &ScenarioConfig, t: f64) -> f64 {
    cfg.orbit_speed_mps * t / cfg.orbit_radius_m()
}

/// Satellite reference point on its circular in-plane orbit.
pub fn satellite_position(cfg: &ScenarioConfig, t: f64) -> Position3D {
    let r = cfg.orbit_radius_m();
    let (s, c) = orbit_angle(cfg, t).sin_cos();
    Vector3::new(r * s, 0.0, r * c)
}

/// Unit velocity direction of the satellite.
pub fn satellite_velocity_dir(cfg: &ScenarioConfig, t: f64) -> Vector3<f64> {
    let (s, c) = orbit_angle(cfg, t).sin_cos();
    Vector3::new(c, 0.0, -s)
}

/// Rotation about the orbit normal by the orbit angle at `t`.
fn orbit_rotation(cfg: &ScenarioConfig, t: f64, v: &Vector3<f64>) -> Vector3<f64> {
    let (s, c) = orbit_angle(cfg, t).sin_cos();
    Vector3::new(v.x * c + v.z * s, v.y, -v.x * s + v.z * c)
}

pub fn distance(p: &Position3D, q: &Position3D) -> f64 {
    (p - q).norm()
}

/// Angle pair of `source` as seen from the array `observer`.
pub fn aoa_pair(observer: &ArrayGeometry, source: &Position3D) -> Result<AoAPair> {
    let d = source - observer.origin;
    let [x, y, n] = &observer.basis;
    AoAPair::from_local_direction(&Vector3::new(d.dot(x), d.dot(y), d.dot(n)))
}

/// Orthonormal frame `(x, y, normal)` for an array whose local vertical is `up`.
fn frame(orientation: Orientation, up: &Vector3<f64>, facing_down: bool) -> [Vector3<f64>; 3] {
    let up = up.normalize();
    let mut along = Vector3::y().cross(&up);
    if along.norm() < 1e-12 {
        along = Vector3::x();
    }
    let along = along.normalize();
    match orientation {
        Orientation::InPlane => {
            let n = along.cross(&up);
            [along, up, n]
        }
        Orientation::Horizon => {
            let n = if facing_down { -up } else { up };
            let y = n.cross(&along);
            [along, y, n]
        }
    }
}

/// The four arrays of the scenario at one time instant. IRS arrays are
/// `None` when they have no elements; their reference points are kept for
/// path-length bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeArrays {
    pub gn: ArrayGeometry,
    pub sat: ArrayGeometry,
    pub irs1: Option<ArrayGeometry>,
    pub irs2: Option<ArrayGeometry>,
    pub irs1_position: Position3D,
    pub irs2_position: Position3D,
}

impl NodeArrays {
    pub fn at(cfg: &ScenarioConfig, t: f64) -> Result<Self> {
        let a = &cfg.arrays;
        let ground = frame(cfg.orientation, &cfg.gn_position_m, false);
        let sat_pos = satellite_position(cfg, t);
        let sat_frame = frame(cfg.orientation, &sat_pos, true);
        let irs2_position = sat_pos + orbit_rotation(cfg, t, &cfg.sat_offset_m);

        let gn = ArrayGeometry::new(a.n1.0, a.n1.1, a.spacing_m, cfg.gn_position_m, ground)?;
        let sat = ArrayGeometry::new(a.n2.0, a.n2.1, a.spacing_m, sat_pos, sat_frame)?;
        let irs = |m: usize, pos: Position3D, basis| -> Result<Option<ArrayGeometry>> {
            if m == 0 {
                return Ok(None);
            }
            let (nx, ny) = planar_layout(m);
            ArrayGeometry::new(nx, ny, a.spacing_m, pos, basis).map(Some)
        };
        Ok(Self {
            gn,
            sat,
            irs1: irs(a.m1, cfg.irs1_position_m, ground)?,
            irs2: irs(a.m2, irs2_position, sat_frame)?,
            irs1_position: cfg.irs1_position_m,
            irs2_position,
        })
    }
}

/// Which array of the scenario an angle refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Node {
    Gn,
    Irs1,
    Sat,
    Irs2,
}

/// True angle pair of `node` toward the far side's reference node
/// (GN and IRS-1 look at the satellite, SAT and IRS-2 look at the GN).
pub fn node_aoa(cfg: &ScenarioConfig, node: Node, t: f64) -> Result<AoAPair> {
    let arrays = NodeArrays::at(cfg, t)?;
    let sat = arrays.sat.origin;
    let gn = arrays.gn.origin;
    let missing = || invalid("angle requested for an IRS with no elements");
    match node {
        Node::Gn => aoa_pair(&arrays.gn, &sat),
        Node::Irs1 => aoa_pair(arrays.irs1.as_ref().ok_or_else(missing)?, &sat),
        Node::Sat => aoa_pair(&arrays.sat, &gn),
        Node::Irs2 => aoa_pair(arrays.irs2.as_ref().ok_or_else(missing)?, &gn),
    }
}

pub fn sat_gn_distance(cfg: &ScenarioConfig, t: f64) -> f64 {
    distance(&satellite_position(cfg, t), &cfg.gn_position_m)
}

/// Time-averaged SAT-GN distance over `[t0, t1]` by adaptive trapezoid
/// quadrature (relative tolerance 1e-6).
pub fn mean_distance(cfg: &ScenarioConfig, t0: f64, t1: f64) -> Result<f64> {
    if !(t1 > t0) {
        return Err(invalid("mean_distance needs t1 > t0"));
    }
    let f = |t: f64| sat_gn_distance(cfg, t);
    let (fa, fb) = (f(t0), f(t1));
    let whole = 0.5 * (t1 - t0) * (fa + fb);
    let integral = adaptive_trapezoid(&f, t0, t1, fa, fb, whole, 1e-6, 0);
    Ok(integral / (t1 - t0))
}

#[allow(clippy::too_many_arguments)]
fn adaptive_trapezoid<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    whole: f64,
    rel_tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let fm = f(m);
    let left = 0.5 * (m - a) * (fa + fm);
    let right = 0.5 * (b - m) * (fm + fb);
    let refined = left + right;
    if depth >= 30 || (refined - whole).abs() <= rel_tol * refined.abs() {
        // Richardson step: trapezoid error shrinks by 4 per halving
        return refined + (refined - whole) / 3.0;
    }
    adaptive_trapezoid(f, a, m, fa, fm, left, rel_tol, depth + 1)
        + adaptive_trapezoid(f, m, b, fm, fb, right, rel_tol, depth + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> ScenarioConfig {
        ScenarioConfig::default()
    }

    #[test]
    fn satellite_positions_at_key_times() {
        let c = cfg();
        let lo = c.orbit_radius_m();
        assert!((lo - 6.97e6).abs() < 1e-6);
        let p0 = satellite_position(&c, 0.0);
        assert_eq!(p0, Vector3::new(0.0, 0.0, lo));
        let tp = orbital_period(&c);
        let q = satellite_position(&c, tp / 4.0);
        assert!((q - Vector3::new(lo, 0.0, 0.0)).norm() < 1e-6 * lo);
        let h = satellite_position(&c, tp / 2.0);
        assert!((h - Vector3::new(0.0, 0.0, -lo)).norm() < 1e-6 * lo);
    }

    #[test]
    fn period_matches_ninety_six_minutes() {
        let c = cfg();
        let tp = orbital_period(&c);
        assert!((tp - 5787.7).abs() < 1.0, "{tp}");
        assert!((tp / 60.0 - 96.0).abs() < 1.0);
        let mut unit = c.clone();
        unit.orbit_speed_mps = 2.0 * PI * unit.orbit_radius_m();
        assert!((orbital_period(&unit) - 1.0).abs() < 1e-12);
        let mut fast = c.clone();
        fast.orbit_speed_mps *= 2.0;
        assert!((orbital_period(&fast) - tp / 2.0).abs() < 1e-9);
    }

    #[test]
    fn distances() {
        let o = Vector3::zeros();
        assert_eq!(distance(&o, &o), 0.0);
        assert_eq!(distance(&o, &Vector3::new(3.0, 4.0, 0.0)), 5.0);
        let c = cfg();
        let d = sat_gn_distance(&c, 0.0);
        assert!((d - (c.orbit_radius_m() - c.earth_radius_m - 100.0)).abs() < 1e-6);
        assert!((d - 5.999e5).abs() < 1.0);
    }

    fn probe(basis: [Vector3<f64>; 3]) -> ArrayGeometry {
        ArrayGeometry::new(1, 1, 0.25, Vector3::new(1.0, 2.0, 3.0), basis).unwrap()
    }

    #[test]
    fn aoa_along_axes() {
        let g = probe([Vector3::x(), Vector3::y(), Vector3::z()]);
        let at = |d: Vector3<f64>| aoa_pair(&g, &(g.origin + 10.0 * d)).unwrap();
        assert_eq!(at(Vector3::x()), AoAPair::new(0.0, 0.0));
        let y = at(Vector3::y());
        assert!((y.theta_rad - PI / 2.0).abs() < 1e-12 && y.phi_rad.abs() < 1e-12);
        let z = at(Vector3::z());
        assert_eq!(z.theta_rad, 0.0);
        assert!((z.phi_rad - PI / 2.0).abs() < 1e-12);
        assert!(aoa_pair(&g, &g.origin).is_err());
    }

    #[test]
    fn in_plane_scenario_has_zero_elevation() {
        let c = cfg();
        for t in [0.0, 3.0, 10.0, 40.0] {
            for node in [Node::Gn, Node::Irs1, Node::Sat, Node::Irs2] {
                let a = node_aoa(&c, node, t).unwrap();
                assert!(a.phi_rad.abs() < 1e-9, "{node:?} {t} {a:?}");
            }
        }
        // satellite overhead: GN sees it along local +y
        let g = node_aoa(&c, Node::Gn, 0.0).unwrap();
        assert!((g.theta_rad - PI / 2.0).abs() < 1e-12);
        let s = node_aoa(&c, Node::Sat, 0.0).unwrap();
        assert!((s.theta_rad + PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn irs2_rides_with_the_satellite() {
        let c = cfg();
        for t in [0.0, 100.0, 1000.0] {
            let n = NodeArrays::at(&c, t).unwrap();
            let d = distance(&n.sat.origin, &n.irs2_position);
            assert!((d - 18f64.sqrt()).abs() < 1e-6);
            let a = aoa_pair(&n.sat, &n.irs2_position).unwrap();
            assert!((a.theta_rad - PI / 4.0).abs() < 1e-6, "{a:?}");
        }
    }

    #[test]
    fn layouts_are_near_square() {
        assert_eq!(planar_layout(500), (25, 20));
        assert_eq!(planar_layout(1000), (40, 25));
        assert_eq!(planar_layout(1400), (40, 35));
        assert_eq!(planar_layout(7), (7, 1));
        assert_eq!(planar_layout(1), (1, 1));
        assert_eq!(planar_layout(0), (0, 0));
    }

    fn trapezoid_oracle(c: &ScenarioConfig, t0: f64, t1: f64, n: usize) -> f64 {
        let h = (t1 - t0) / n as f64;
        let mut s = 0.5 * (sat_gn_distance(c, t0) + sat_gn_distance(c, t1));
        for k in 1..n {
            s += sat_gn_distance(c, t0 + k as f64 * h);
        }
        s * h / (t1 - t0)
    }

    #[test]
    fn mean_distance_matches_fine_trapezoid() {
        let c = cfg();
        let m = mean_distance(&c, 0.0, 10.0).unwrap();
        let oracle = trapezoid_oracle(&c, 0.0, 10.0, 1000);
        assert!(((m - oracle) / oracle).abs() < 1e-4);
        let near = mean_distance(&c, 5.0, 5.0 + 1e-6).unwrap();
        assert!((near - sat_gn_distance(&c, 5.0)).abs() < 1e-3);
        let (d0, d1) = (sat_gn_distance(&c, 20.0), sat_gn_distance(&c, 60.0));
        let mid = mean_distance(&c, 20.0, 60.0).unwrap();
        assert!(mid > d0 && mid < d1);
        assert!(mean_distance(&c, 1.0, 1.0).is_err());
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), -PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(wrap_angle(0.0), 0.0);
    }

    proptest! {
        #[test]
        fn orbit_radius_is_constant(t in 0.0f64..20000.0) {
            let c = cfg();
            let r = satellite_position(&c, t).norm();
            prop_assert!(((r - c.orbit_radius_m()) / c.orbit_radius_m()).abs() < 1e-6);
        }

        #[test]
        fn orbit_is_periodic(t in 0.0f64..6000.0) {
            let c = cfg();
            let tp = orbital_period(&c);
            let d = (satellite_position(&c, t) - satellite_position(&c, t + tp)).norm();
            prop_assert!(d / c.orbit_radius_m() < 1e-6);
        }

        #[test]
        fn aoa_round_trip(theta in -3.1f64..3.1, phi in -1.5f64..1.5) {
            let a = AoAPair::new(theta, phi);
            let b = AoAPair::from_local_direction(&a.local_direction()).unwrap();
            prop_assert!(wrap_angle(a.theta_rad - b.theta_rad).abs() < 1e-9);
            prop_assert!((a.phi_rad - b.phi_rad).abs() < 1e-9);
        }

        #[test]
        fn mean_distance_within_extremes(t0 in 0.0f64..500.0, len in 0.1f64..200.0) {
            let c = cfg();
            let m = mean_distance(&c, t0, t0 + len).unwrap();
            let samples: Vec<f64> = (0..=200).map(|k| sat_gn_distance(&c, t0 + len * k as f64 / 200.0)).collect();
            let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(m >= lo * (1.0 - 1e-9) && m <= hi * (1.0 + 1e-9));
        }
    }
}
