//! Coordinate conversions between the ERP pixel plane, longitude/latitude on
//! the viewing sphere, Cartesian unit vectors and the extended complex plane.
//!
//! Conventions:
//!
//! * pixel centers sit at half-integer offsets, so column `u` covers
//!   longitude `((u + 0.5) / w - 0.5) * 2π` and row `v` covers latitude
//!   `(0.5 - (v + 0.5) / h) * π`. Row 0 is the northern edge and the image
//!   center is `(λ, φ) = (0, 0)`.
//! * `x = cos φ cos λ`, `y = cos φ sin λ`, `z = sin φ`; the north pole is
//!   `N = (0, 0, 1)`.
//! * points of `ℂ∞` are homogeneous pairs `(p, q)` standing for `p / q`, with
//!   `q = 0` at infinity.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Width and height of a pixel grid.
///
/// ERP grids are built with [`GridDims::new`], which enforces the 2:1 aspect
/// ratio. Feature grids can have any non-zero size and use
/// [`GridDims::any`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridDims {
    w: usize,
    h: usize,
}

impl GridDims {
    pub fn new(w: usize, h: usize) -> Result<Self> {
        if w == 0 || h == 0 {
            return Err(Error::Config(format!("empty grid {w}x{h}")));
        }
        if w != 2 * h {
            return Err(Error::Config(format!(
                "equirectangular grid must be 2:1, got {w}x{h}"
            )));
        }
        Ok(Self { w, h })
    }

    pub fn any(w: usize, h: usize) -> Result<Self> {
        if w == 0 || h == 0 {
            return Err(Error::Config(format!("empty grid {w}x{h}")));
        }
        Ok(Self { w, h })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.w
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.h
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.w * self.h
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_erp(&self) -> bool {
        self.w == 2 * self.h
    }
}

/// Longitude/latitude in radians. Longitude lives in `[-π, π)`, latitude in
/// `[-π/2, π/2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalPoint {
    lon: f64,
    lat: f64,
}

impl SphericalPoint {
    /// Wraps `lon` into `[-π, π)` and clamps `lat` to the closed pole range.
    pub fn new(lon: f64, lat: f64) -> Self {
        Self { lon: wrap_lon(lon), lat: lat.clamp(-FRAC_PI_2, FRAC_PI_2) }
    }

    pub fn from_degrees(lon: f64, lat: f64) -> Self {
        Self::new(lon.to_radians(), lat.to_radians())
    }

    #[inline]
    pub fn lon(&self) -> f64 {
        self.lon
    }

    #[inline]
    pub fn lat(&self) -> f64 {
        self.lat
    }
}

fn wrap_lon(lon: f64) -> f64 {
    if (-PI..PI).contains(&lon) {
        return lon;
    }
    let wrapped = (lon + PI).rem_euclid(TAU) - PI;
    if wrapped >= PI {
        -PI
    } else {
        wrapped
    }
}

/// A point of the unit sphere `S²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVector3 {
    x: f64,
    y: f64,
    z: f64,
}

impl UnitVector3 {
    pub const NORTH: UnitVector3 = UnitVector3 { x: 0.0, y: 0.0, z: 1.0 };
    pub const SOUTH: UnitVector3 = UnitVector3 { x: 0.0, y: 0.0, z: -1.0 };
    pub const X: UnitVector3 = UnitVector3 { x: 1.0, y: 0.0, z: 0.0 };
    pub const Y: UnitVector3 = UnitVector3 { x: 0.0, y: 1.0, z: 0.0 };
    pub const Z: UnitVector3 = UnitVector3 { x: 0.0, y: 0.0, z: 1.0 };

    /// Accepts a vector whose norm is within `1e-6` of one and snaps it onto
    /// the sphere.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let n = (x * x + y * y + z * z).sqrt();
        if !n.is_finite() || (n - 1.0).abs() > 1e-6 {
            return Err(Error::Domain(format!(
                "({x}, {y}, {z}) is not a unit vector (norm {n})"
            )));
        }
        Ok(Self { x: x / n, y: y / n, z: z / n })
    }

    /// Normalizes any finite non-zero vector.
    pub fn normalize(x: f64, y: f64, z: f64) -> Result<Self> {
        let n = (x * x + y * y + z * z).sqrt();
        if !n.is_finite() || n < 1e-12 {
            return Err(Error::Domain(format!("cannot normalize ({x}, {y}, {z})")));
        }
        Ok(Self { x: x / n, y: y / n, z: z / n })
    }

    pub(crate) fn normalized_unchecked(x: f64, y: f64, z: f64) -> Self {
        let n = (x * x + y * y + z * z).sqrt();
        Self { x: x / n, y: y / n, z: z / n }
    }

    #[inline]
    pub fn x(&self) -> f64 {
        self.x
    }

    #[inline]
    pub fn y(&self) -> f64 {
        self.y
    }

    #[inline]
    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(&self, other: &UnitVector3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(&self, other: &UnitVector3) -> [f64; 3] {
        [
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        ]
    }

    pub fn neg(&self) -> Self {
        Self { x: -self.x, y: -self.y, z: -self.z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

/// Continuous pixel position: `u` is the column, `v` the row, both measured so
/// that integer values hit pixel centers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelCoord {
    pub u: f64,
    pub v: f64,
}

impl PixelCoord {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }
}

/// Homogeneous coordinates `(p, q)` of the point `p / q` in `ℂ∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanePoint {
    pub p: Complex64,
    pub q: Complex64,
}

impl PlanePoint {
    pub fn finite(z: Complex64) -> Self {
        Self { p: z, q: Complex64::new(1.0, 0.0) }
    }

    pub fn infinity() -> Self {
        Self { p: Complex64::new(1.0, 0.0), q: Complex64::new(0.0, 0.0) }
    }

    /// Builds a point from a raw pair; `(0, 0)` is rejected.
    pub fn homogeneous(p: Complex64, q: Complex64) -> Result<Self> {
        if p.norm_sqr() == 0.0 && q.norm_sqr() == 0.0 {
            return Err(Error::Domain("(0, 0) is not a point of the extended plane".into()));
        }
        Ok(Self { p, q })
    }

    pub fn is_infinite(&self) -> bool {
        self.q.re == 0.0 && self.q.im == 0.0
    }

    /// The affine value `p / q`, or `None` at infinity.
    pub fn to_complex(&self) -> Option<Complex64> {
        if self.is_infinite() {
            None
        } else {
            Some(self.p / self.q)
        }
    }

    /// Same point with the larger component scaled to magnitude one.
    pub fn rescaled(&self) -> Self {
        let s = self.p.norm().max(self.q.norm());
        if s == 0.0 || !s.is_finite() {
            return *self;
        }
        Self { p: self.p / s, q: self.q / s }
    }
}

/// Maps a pixel position to the sphere using the pixel-center convention.
pub fn erp_to_sphere(pix: PixelCoord, dims: &GridDims) -> SphericalPoint {
    let w = dims.w as f64;
    let h = dims.h as f64;
    // Integer numerators keep mirrored rows exactly antisymmetric.
    let lon = (2.0 * pix.u + 1.0 - w) / w * PI;
    let lat = (h - 1.0 - 2.0 * pix.v) / (2.0 * h) * PI;
    SphericalPoint::new(lon, lat)
}

/// Inverse of [`erp_to_sphere`]; `u` is wrapped into `[0, w)`.
pub fn sphere_to_erp(sp: SphericalPoint, dims: &GridDims) -> PixelCoord {
    let w = dims.w as f64;
    let h = dims.h as f64;
    let u = (sp.lon / PI * w + w - 1.0) * 0.5;
    let v = (h - 1.0 - 2.0 * h * sp.lat / PI) * 0.5;
    PixelCoord { u: wrap_column(u, w), v }
}

#[inline]
pub(crate) fn wrap_column(u: f64, w: f64) -> f64 {
    if (0.0..w).contains(&u) {
        return u;
    }
    let r = u.rem_euclid(w);
    if r >= w {
        0.0
    } else {
        r
    }
}

pub fn sphere_to_cartesian(sp: SphericalPoint) -> UnitVector3 {
    let (sl, cl) = sp.lon.sin_cos();
    let (sf, cf) = sp.lat.sin_cos();
    UnitVector3::normalized_unchecked(cf * cl, cf * sl, sf)
}

pub fn cartesian_to_sphere(v: &UnitVector3) -> SphericalPoint {
    let lon = v.y.atan2(v.x);
    let lat = v.z.atan2(v.x.hypot(v.y));
    SphericalPoint::new(lon, lat)
}

/// Stereographic projection from the north pole onto the equatorial plane.
///
/// On the southern hemisphere the pair is `(x + iy, 1 - z)`; on the northern
/// one the equivalent pair `(1 + z, x - iy)` is used so that no component
/// suffers cancellation near `N`. The pole itself maps to `(2, 0)`, i.e. ∞.
pub fn stereographic(v: &UnitVector3) -> PlanePoint {
    if v.z <= 0.0 {
        PlanePoint { p: Complex64::new(v.x, v.y), q: Complex64::new(1.0 - v.z, 0.0) }
    } else {
        PlanePoint { p: Complex64::new(1.0 + v.z, 0.0), q: Complex64::new(v.x, -v.y) }
    }
}

/// Inverse stereographic projection, valid for every homogeneous pair
/// including infinity.
pub fn inverse_stereographic(z: &PlanePoint) -> UnitVector3 {
    let z = z.rescaled();
    let pp = z.p.norm_sqr();
    let qq = z.q.norm_sqr();
    let cross = z.p * z.q.conj();
    let denom = pp + qq;
    UnitVector3::normalized_unchecked(
        2.0 * cross.re / denom,
        2.0 * cross.im / denom,
        (pp - qq) / denom,
    )
}
