//! Möbius transformations `f(z) = (az + b) / (cz + d)` on the extended plane.
//!
//! Coefficients are always kept normalized to `ad - bc = 1` and carry a
//! canonical sign, so two transforms that act identically compare equal
//! coefficient by coefficient (up to rounding).

use std::f64::consts::{PI, TAU};
use std::ops::Mul;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{inverse_stereographic, stereographic, PlanePoint, UnitVector3};

const ZERO_COEF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobiusTransform {
    a: Complex64,
    b: Complex64,
    c: Complex64,
    d: Complex64,
}

impl Default for MobiusTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl MobiusTransform {
    pub fn identity() -> Self {
        Self {
            a: Complex64::new(1.0, 0.0),
            b: Complex64::new(0.0, 0.0),
            c: Complex64::new(0.0, 0.0),
            d: Complex64::new(1.0, 0.0),
        }
    }

    /// Builds a transform from raw coefficients; `ad - bc` must not vanish.
    pub fn from_coefficients(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Result<Self> {
        let det = a * d - b * c;
        if !(det.norm() > 0.0) || !det.norm().is_finite() {
            return Err(Error::Domain(format!("degenerate Möbius coefficients (det = {det})")));
        }
        Ok(Self { a, b, c, d }.normalized())
    }

    /// Rotation of the sphere by `angle` about `axis` (right-hand rule),
    /// expressed on the plane through stereographic projection.
    ///
    /// `a = cos(θ/2) + i n sin(θ/2)`, `b = (-m + i l) sin(θ/2)`, `c = -b̄`,
    /// `d = ā` for `axis = (l, m, n)`.
    pub fn rotation(axis: &UnitVector3, angle: f64) -> Result<Self> {
        if (axis.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("rotation axis {axis:?} is not a unit vector")));
        }
        if !angle.is_finite() {
            return Err(Error::Domain(format!("rotation angle {angle} is not finite")));
        }
        let theta = angle.rem_euclid(TAU);
        let (s, c) = (theta * 0.5).sin_cos();
        let (l, m, n) = (axis.x(), axis.y(), axis.z());
        let a = Complex64::new(c, n * s);
        let b = Complex64::new(-m * s, l * s);
        Ok(Self { a, b, c: -b.conj(), d: a.conj() }.normalized())
    }

    /// Origin-centered zoom `f(z) = ρz`; it fixes the south pole (0) and the
    /// north pole (∞).
    pub fn zoom(rho: f64) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::Domain(format!("zoom factor must be positive, got {rho}")));
        }
        Ok(Self {
            a: Complex64::new(rho, 0.0),
            b: Complex64::new(0.0, 0.0),
            c: Complex64::new(0.0, 0.0),
            d: Complex64::new(1.0, 0.0),
        }
        .normalized())
    }

    /// Zoom by `rho` about `center`: rotate `center` to the south pole, zoom,
    /// rotate back. Fixed points are `center` and its antipode.
    pub fn zoom_about(center: &UnitVector3, rho: f64) -> Result<Self> {
        let z = Self::zoom(rho)?;
        let r = Self::rotation_to_south(center)?;
        Ok(r.inverse().compose(&z).compose(&r))
    }

    /// Minimal-angle rotation taking `from` to `(0, 0, -1)`.
    pub fn rotation_to_south(from: &UnitVector3) -> Result<Self> {
        let south = UnitVector3::SOUTH;
        let [x, y, z] = from.cross(&south);
        let s = (x * x + y * y + z * z).sqrt();
        let c = from.dot(&south);
        if s < 1e-15 {
            return if c > 0.0 {
                Ok(Self::identity())
            } else {
                Self::rotation(&UnitVector3::X, PI)
            };
        }
        let axis = UnitVector3::normalize(x, y, z)?;
        Self::rotation(&axis, s.atan2(c))
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            a: self.a * other.a + self.b * other.c,
            b: self.a * other.b + self.b * other.d,
            c: self.c * other.a + self.d * other.c,
            d: self.c * other.b + self.d * other.d,
        }
        .normalized()
    }

    pub fn inverse(&self) -> Self {
        Self { a: self.d, b: -self.b, c: -self.c, d: self.a }.normalized()
    }

    /// Homogeneous action `(p, q) -> (ap + bq, cp + dq)`.
    pub fn apply(&self, z: &PlanePoint) -> PlanePoint {
        PlanePoint {
            p: self.a * z.p + self.b * z.q,
            q: self.c * z.p + self.d * z.q,
        }
        .rescaled()
    }

    /// `SP⁻¹ ∘ f ∘ SP` on the unit sphere.
    pub fn apply_sphere(&self, v: &UnitVector3) -> UnitVector3 {
        inverse_stereographic(&self.apply(&stereographic(v)))
    }

    pub fn coefficients(&self) -> [Complex64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn determinant(&self) -> Complex64 {
        self.a * self.d - self.b * self.c
    }

    /// Largest coefficient difference after sign canonicalization.
    pub fn max_coefficient_diff(&self, other: &Self) -> f64 {
        let lhs = self.coefficients();
        let rhs = other.coefficients();
        let same = lhs.iter().zip(rhs.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        let flipped = lhs.iter().zip(rhs.iter()).map(|(x, y)| (x + y).norm()).fold(0.0, f64::max);
        same.min(flipped)
    }

    /// True when `c = -b̄`, `d = ā` and `|a|² + |b|² = 1` within `tol`.
    pub fn is_rotation(&self, tol: f64) -> bool {
        (self.c + self.b.conj()).norm() <= tol
            && (self.d - self.a.conj()).norm() <= tol
            && (self.a.norm_sqr() + self.b.norm_sqr() - 1.0).abs() <= tol
    }

    /// Bit pattern of the canonical coefficients, used as a cache key.
    pub fn key(&self) -> [u64; 8] {
        let c = self.coefficients();
        let mut out = [0u64; 8];
        for (k, z) in c.iter().enumerate() {
            // +0.0 and -0.0 must hash alike.
            out[2 * k] = (z.re + 0.0).to_bits();
            out[2 * k + 1] = (z.im + 0.0).to_bits();
        }
        out
    }

    fn normalized(self) -> Self {
        let k = self.determinant().sqrt();
        let mut m = Self { a: self.a / k, b: self.b / k, c: self.c / k, d: self.d / k };
        let lead = [m.a, m.b, m.c, m.d].into_iter().find(|z| z.norm() > ZERO_COEF);
        if let Some(z) = lead {
            let negative = if z.re.abs() > ZERO_COEF { z.re < 0.0 } else { z.im < 0.0 };
            if negative {
                m = Self { a: -m.a, b: -m.b, c: -m.c, d: -m.d };
            }
        }
        m
    }
}

impl Mul for MobiusTransform {
    type Output = MobiusTransform;

    fn mul(self, rhs: Self) -> Self::Output {
        self.compose(&rhs)
    }
}
