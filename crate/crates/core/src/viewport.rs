//! Perspective viewports cut from a panorama by gnomonic projection.
//!
//! The viewport plane is tangent to the unit sphere at the viewpoint `P`. Its
//! horizontal axis points east and its vertical axis follows the meridian
//! through `P` (no roll). The pixel at `(out_h / 2, out_w / 2)` (integer
//! division) looks exactly at `P`.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{sphere_to_erp, GridDims, PixelCoord, SphericalPoint};
use crate::remap::{Grid, Interpolation};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewportSpec {
    pub viewpoint: SphericalPoint,
    pub fovh: f64,
    pub fovv: f64,
    pub out_w: usize,
    pub out_h: usize,
}

impl ViewportSpec {
    pub fn new(viewpoint: SphericalPoint, fovh: f64, fovv: f64, out_w: usize, out_h: usize) -> Result<Self> {
        let spec = Self { viewpoint, fovh, fovv, out_w, out_h };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, fov) in [("horizontal", self.fovh), ("vertical", self.fovv)] {
            if !(fov > 0.0 && fov < PI) {
                return Err(Error::Domain(format!(
                    "{name} field of view must lie in (0°, 180°), got {:.3}°",
                    fov.to_degrees()
                )));
            }
        }
        if self.out_w == 0 || self.out_h == 0 {
            return Err(Error::Config(format!("empty viewport {}x{}", self.out_w, self.out_h)));
        }
        Ok(())
    }

    /// Index of the pixel that looks at the viewpoint.
    pub fn center_pixel(&self) -> (usize, usize) {
        (self.out_h / 2, self.out_w / 2)
    }

    /// Tangent-plane coordinates `(x, y)` of an output pixel, `y` pointing up.
    pub fn plane_coords(&self, row: usize, col: usize) -> (f64, f64) {
        let sx = 2.0 * (self.fovh * 0.5).tan() / self.out_w as f64;
        let sy = 2.0 * (self.fovv * 0.5).tan() / self.out_h as f64;
        let x = (col as f64 - (self.out_w / 2) as f64) * sx;
        let y = ((self.out_h / 2) as f64 - row as f64) * sy;
        (x, y)
    }
}

/// Inverse gnomonic projection of tangent-plane coordinates around `center`.
pub fn gnomonic_inverse(center: SphericalPoint, x: f64, y: f64) -> SphericalPoint {
    let rho = x.hypot(y);
    if rho == 0.0 {
        return center;
    }
    let c = rho.atan();
    let (sc, cc) = c.sin_cos();
    let (s0, c0) = center.lat().sin_cos();
    let lat = (cc * s0 + y * sc * c0 / rho).clamp(-1.0, 1.0).asin();
    let lon = center.lon() + (x * sc).atan2(rho * c0 * cc - y * s0 * sc);
    SphericalPoint::new(lon, lat)
}

/// Forward gnomonic projection; `None` for points on or behind the horizon.
pub fn gnomonic_forward(center: SphericalPoint, p: SphericalPoint) -> Option<(f64, f64)> {
    let (s0, c0) = center.lat().sin_cos();
    let (s, c) = p.lat().sin_cos();
    let dl = p.lon() - center.lon();
    let cos_c = s0 * s + c0 * c * dl.cos();
    if cos_c <= 0.0 {
        return None;
    }
    Some((c * dl.sin() / cos_c, (c0 * s - s0 * c * dl.cos()) / cos_c))
}

/// Continuous ERP coordinates sampled by each viewport pixel, row-major.
pub fn viewport_source_coords(spec: &ViewportSpec, dims: &GridDims) -> Vec<PixelCoord> {
    let mut out = Vec::with_capacity(spec.out_w * spec.out_h);
    for row in 0..spec.out_h {
        for col in 0..spec.out_w {
            let (x, y) = spec.plane_coords(row, col);
            out.push(sphere_to_erp(gnomonic_inverse(spec.viewpoint, x, y), dims));
        }
    }
    out
}

pub fn extract_viewport(img: &Grid, spec: &ViewportSpec, interp: Interpolation) -> Result<Grid> {
    spec.validate()?;
    if !img.dims().is_erp() {
        return Err(Error::Config(format!(
            "panorama must be 2:1, got {}x{}",
            img.width(),
            img.height()
        )));
    }
    let dims = img.dims();
    let c = img.channels();
    let mut data = vec![0.0; spec.out_w * spec.out_h * c];
    data.par_chunks_mut(spec.out_w * c).enumerate().for_each(|(row, out)| {
        for (col, px) in out.chunks_mut(c).enumerate() {
            let (x, y) = spec.plane_coords(row, col);
            let pos = sphere_to_erp(gnomonic_inverse(spec.viewpoint, x, y), &dims);
            for (k, o) in px.iter_mut().enumerate() {
                *o = img.sample(pos, k, interp);
            }
        }
    });
    Grid::new(GridDims::any(spec.out_w, spec.out_h)?, c, data)
}
