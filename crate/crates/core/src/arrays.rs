//! Steering vectors and planar-array responses.

use std::f64::consts::PI;

use nalgebra::Vector3;
use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::geometry::{aoa_pair, AoAPair, Position3D};
use crate::CVector;

/// Uniform planar array: `nx * ny` elements with spacing `spacing_m` in the
/// plane spanned by `basis[0]` and `basis[1]`; `basis[2]` is the normal.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    pub nx: usize,
    pub ny: usize,
    pub spacing_m: f64,
    pub origin: Position3D,
    pub basis: [Vector3<f64>; 3],
}

impl ArrayGeometry {
    pub fn new(nx: usize, ny: usize, spacing_m: f64, origin: Position3D, basis: [Vector3<f64>; 3]) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(invalid(format!("array needs at least one element per axis, got {nx}x{ny}")));
        }
        if !(spacing_m > 0.0) || !spacing_m.is_finite() {
            return Err(invalid("element spacing must be positive"));
        }
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                if (basis[i].dot(&basis[j]) - want).abs() > 1e-12 {
                    return Err(invalid("array basis is not orthonormal"));
                }
            }
        }
        Ok(Self { nx, ny, spacing_m, origin, basis })
    }

    /// Array with the global axes as its frame.
    pub fn axis_aligned(nx: usize, ny: usize, spacing_m: f64, origin: Position3D) -> Result<Self> {
        Self::new(nx, ny, spacing_m, origin, [Vector3::x(), Vector3::y(), Vector3::z()])
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Position of element `(p, q)`. Elements extend along the negative local
    /// axes so that the far-field limit of the spherical-wave model reproduces
    /// the phase progression of [`upa_response`].
    pub fn element_position(&self, p: usize, q: usize) -> Position3D {
        self.origin - self.spacing_m * (p as f64 * self.basis[0] + q as f64 * self.basis[1])
    }

    /// Element positions in flat (row-major) order.
    pub fn element_positions(&self) -> Vec<Position3D> {
        let mut out = Vec::with_capacity(self.len());
        for p in 0..self.nx {
            for q in 0..self.ny {
                out.push(self.element_position(p, q));
            }
        }
        out
    }

    /// Largest element-to-origin distance.
    pub fn aperture_m(&self) -> f64 {
        self.spacing_m * (((self.nx - 1).pow(2) + (self.ny - 1).pow(2)) as f64).sqrt()
    }

    /// Response toward a far-field point.
    pub fn response_toward(&self, target: &Position3D, wavelength_m: f64) -> Result<CVector> {
        let aoa = aoa_pair(self, target)?;
        upa_response(self, &aoa, wavelength_m)
    }
}

/// `[1, e^{-j pi rate}, ..., e^{-j pi (n-1) rate}]`.
pub fn steering_vector(rate: f64, n: usize) -> Result<CVector> {
    if n == 0 {
        return Err(invalid("steering vector needs n >= 1"));
    }
    Ok(CVector::from_fn(n, |k, _| Complex64::from_polar(1.0, -PI * rate * k as f64)))
}

/// Kronecker-structured response of a planar array for an angle pair.
pub fn upa_response(geom: &ArrayGeometry, aoa: &AoAPair, wavelength_m: f64) -> Result<CVector> {
    if !(wavelength_m > 0.0) {
        return Err(invalid("wavelength must be positive"));
    }
    let scale = 2.0 * geom.spacing_m / wavelength_m * aoa.phi_rad.cos();
    let ex = steering_vector(scale * aoa.theta_rad.cos(), geom.nx)?;
    let ey = steering_vector(scale * aoa.theta_rad.sin(), geom.ny)?;
    Ok(kron_vec(&ex, &ey))
}

/// Kronecker product of two column vectors (`a` varies slowest).
pub fn kron_vec(a: &CVector, b: &CVector) -> CVector {
    let nb = b.len();
    CVector::from_fn(a.len() * nb, |i, _| a[i / nb] * b[i % nb])
}
