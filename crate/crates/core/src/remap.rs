//! Dense backward-warp fields realizing a Möbius view transform on an ERP grid.
//!
//! For a transform `f`, the whole-image map is
//! `F = T ∘ SP⁻¹ ∘ f ∘ SP ∘ T⁻¹` where `T` takes the sphere to the pixel
//! plane. Warping iterates over output pixels and samples the input at
//! `F⁻¹(P)`, so every output pixel receives a value.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock, RwLock};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{
    cartesian_to_sphere, erp_to_sphere, sphere_to_cartesian, sphere_to_erp, wrap_column, GridDims, PixelCoord,
};
use crate::mobius::MobiusTransform;

/// Field coordinates closer than this to an integer are snapped onto it, so
/// that transforms which permute pixel centers produce exact integer taps.
pub const SNAP_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    Nearest,
    #[default]
    Bilinear,
}

impl std::str::FromStr for Interpolation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nearest" => Ok(Interpolation::Nearest),
            "bilinear" => Ok(Interpolation::Bilinear),
            other => Err(Error::Config(format!("unknown interpolation '{other}'"))),
        }
    }
}

/// Row-major `h × w × c` grid of reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dims: GridDims,
    channels: usize,
    data: Vec<f64>,
}

/// A panorama; its dims satisfy the 2:1 ERP ratio.
pub type ErpImage = Grid;
/// A multi-channel feature map on the ERP layout (any aspect ratio).
pub type FeatureGrid = Grid;

impl Grid {
    pub fn new(dims: GridDims, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::Usage("grid needs at least one channel".into()));
        }
        if data.len() != dims.len() * channels {
            return Err(Error::Usage(format!(
                "grid data length {} does not match {}x{}x{}",
                data.len(),
                dims.height(),
                dims.width(),
                channels
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Usage("grid contains non-finite values".into()));
        }
        Ok(Self { dims, channels, data })
    }

    pub fn zeros(dims: GridDims, channels: usize) -> Self {
        Self { dims, channels, data: vec![0.0; dims.len() * channels] }
    }

    /// Fills the grid from `f(row, col, channel)`.
    pub fn from_fn(dims: GridDims, channels: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dims.len() * channels);
        for r in 0..dims.height() {
            for c in 0..dims.width() {
                for k in 0..channels {
                    data.push(f(r, c, k));
                }
            }
        }
        Self { dims, channels, data }
    }

    #[inline]
    pub fn dims(&self) -> GridDims {
        self.dims
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.dims.width()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.dims.height()
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, ch: usize) -> f64 {
        self.data[(row * self.dims.width() + col) * self.channels + ch]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, ch: usize, value: f64) {
        let w = self.dims.width();
        self.data[(row * w + col) * self.channels + ch] = value;
    }

    /// Copy of a single channel as a one-channel grid.
    pub fn channel(&self, k: usize) -> Grid {
        assert!(k < self.channels, "channel {k} out of range");
        let data = self.data.iter().skip(k).step_by(self.channels).copied().collect();
        Grid { dims: self.dims, channels: 1, data }
    }

    /// Samples channel `ch` at a continuous position with horizontal wrap and
    /// vertical clamp.
    pub fn sample(&self, pos: PixelCoord, ch: usize, interp: Interpolation) -> f64 {
        let mut out = [0.0];
        self.sample_into(pos, interp, ch, &mut out);
        out[0]
    }

    /// Samples `out.len()` consecutive channels starting at `first`.
    fn sample_into(&self, pos: PixelCoord, interp: Interpolation, first: usize, out: &mut [f64]) {
        let w = self.dims.width();
        let h = self.dims.height();
        let c = self.channels;
        match interp {
            Interpolation::Nearest => {
                let col = wrap_index((pos.u + 0.5).floor() as i64, w);
                let row = ((pos.v + 0.5).floor().max(0.0) as usize).min(h - 1);
                let base = (row * w + col) * c + first;
                out.copy_from_slice(&self.data[base..base + out.len()]);
            }
            Interpolation::Bilinear => {
                let x0f = pos.u.floor();
                let fx = pos.u - x0f;
                let x0 = wrap_index(x0f as i64, w);
                let x1 = if x0 + 1 == w { 0 } else { x0 + 1 };
                let v = pos.v.clamp(0.0, (h - 1) as f64);
                let y0f = v.floor();
                let fy = v - y0f;
                let y0 = y0f as usize;
                let y1 = (y0 + 1).min(h - 1);
                let (i00, i01) = ((y0 * w + x0) * c + first, (y0 * w + x1) * c + first);
                let (i10, i11) = ((y1 * w + x0) * c + first, (y1 * w + x1) * c + first);
                for (k, o) in out.iter_mut().enumerate() {
                    let top = (1.0 - fx) * self.data[i00 + k] + fx * self.data[i01 + k];
                    let bottom = (1.0 - fx) * self.data[i10 + k] + fx * self.data[i11 + k];
                    *o = (1.0 - fy) * top + fy * bottom;
                }
            }
        }
    }
}

fn wrap_index(i: i64, w: usize) -> usize {
    if (0..w as i64).contains(&i) {
        i as usize
    } else {
        i.rem_euclid(w as i64) as usize
    }
}

/// Per-output-pixel source coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct RemapField {
    dims: GridDims,
    src: Vec<PixelCoord>,
}

impl RemapField {
    pub fn identity(dims: GridDims) -> Self {
        let src = (0..dims.len())
            .map(|i| PixelCoord::new((i % dims.width()) as f64, (i / dims.width()) as f64))
            .collect();
        Self { dims, src }
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> PixelCoord {
        self.src[row * self.dims.width() + col]
    }

    pub fn entries(&self) -> &[PixelCoord] {
        &self.src
    }
}

/// Forward map `F(P)` of a single continuous pixel position.
pub fn map_pixel(f: &MobiusTransform, pix: PixelCoord, dims: &GridDims) -> PixelCoord {
    let v = sphere_to_cartesian(erp_to_sphere(pix, dims));
    let moved = f.apply_sphere(&v);
    sphere_to_erp(cartesian_to_sphere(&moved), dims)
}

#[inline]
fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < SNAP_EPS {
        r
    } else {
        x
    }
}

/// Builds the backward field of `f`: output pixel `P` reads the input at
/// `F⁻¹(P)`.
pub fn build_remap_field(f: &MobiusTransform, dims: GridDims) -> RemapField {
    let [a, b, c, d] = f.inverse().coefficients();
    let w = dims.width();
    let h = dims.height();
    let (wf, hf) = (w as f64, h as f64);
    let hmax = (h - 1) as f64;
    let lon_tab: Vec<(f64, f64)> = (0..w)
        .map(|c| erp_to_sphere(PixelCoord::new(c as f64, 0.0), &dims).lon().sin_cos())
        .collect();
    let mut src = vec![PixelCoord::new(0.0, 0.0); dims.len()];
    src.par_chunks_mut(w).enumerate().for_each(|(row, out)| {
        let (sf, cf) = erp_to_sphere(PixelCoord::new(0.0, row as f64), &dims).lat().sin_cos();
        for (col, slot) in out.iter_mut().enumerate() {
            let (sl, cl) = lon_tab[col];
            let (x, y, z) = (cf * cl, cf * sl, sf);
            // Same pairs as `stereographic`; the inputs are bounded so the
            // homogeneous result needs no rescaling before projecting back.
            let (p, q) = if z <= 0.0 {
                (Complex64::new(x, y), Complex64::new(1.0 - z, 0.0))
            } else {
                (Complex64::new(1.0 + z, 0.0), Complex64::new(x, -y))
            };
            let (p2, q2) = (a * p + b * q, c * p + d * q);
            let (pp, qq) = (p2.norm_sqr(), q2.norm_sqr());
            // Inverse projection with the common factor 2/(pp+qq) dropped:
            // both angles only depend on ratios.
            let cross = p2 * q2.conj();
            let lon = cross.im.atan2(cross.re);
            let lat = (pp - qq).atan2(2.0 * (pp * qq).sqrt());
            let u = (lon / PI * wf + wf - 1.0) * 0.5;
            let v = (hf - 1.0 - 2.0 * hf * lat / PI) * 0.5;
            *slot = PixelCoord::new(wrap_column(snap(u), wf), snap(v).clamp(0.0, hmax));
        }
    });
    RemapField { dims, src }
}

/// Resamples `img` through `field`.
pub fn warp_image(img: &Grid, field: &RemapField, interp: Interpolation) -> Result<Grid> {
    if img.dims != field.dims {
        return Err(Error::Usage(format!(
            "image is {}x{} but remap field is {}x{}",
            img.width(),
            img.height(),
            field.dims.width(),
            field.dims.height()
        )));
    }
    let c = img.channels;
    let row_len = img.width() * c;
    let mut data = vec![0.0; img.data.len()];
    data.par_chunks_mut(row_len).enumerate().for_each(|(row, out)| {
        for (col, px) in out.chunks_mut(c).enumerate() {
            img.sample_into(field.get(row, col), interp, 0, px);
        }
    });
    Ok(Grid { dims: img.dims, channels: c, data })
}

type CacheKey = ([u64; 8], usize, usize);

/// Memoized remap fields keyed by canonical Möbius coefficients and grid size.
#[derive(Debug, Default)]
pub struct FieldCache {
    fields: RwLock<HashMap<CacheKey, Arc<RemapField>>>,
}

impl FieldCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Process-wide cache shared by the feature transforms.
    pub fn global() -> &'static FieldCache {
        static CACHE: OnceLock<FieldCache> = OnceLock::new();
        CACHE.get_or_init(FieldCache::new)
    }

    pub fn get_or_build(&self, f: &MobiusTransform, dims: GridDims) -> Arc<RemapField> {
        let key = (f.key(), dims.width(), dims.height());
        if let Some(field) = self.fields.read().expect("field cache poisoned").get(&key) {
            return Arc::clone(field);
        }
        let field = Arc::new(build_remap_field(f, dims));
        let mut map = self.fields.write().expect("field cache poisoned");
        Arc::clone(map.entry(key).or_insert(field))
    }

    pub fn len(&self) -> usize {
        self.fields.read().expect("field cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        self.fields.write().expect("field cache poisoned").clear();
    }
}

/// Moves every channel of `fg` through the view transform `f` (bilinear).
pub fn transform_features(fg: &FeatureGrid, f: &MobiusTransform) -> FeatureGrid {
    transform_features_with(fg, f, Interpolation::Bilinear, FieldCache::global())
}

/// Undoes [`transform_features`]; equivalent to transforming by `f⁻¹`.
pub fn inverse_transform_features(fg: &FeatureGrid, f: &MobiusTransform) -> FeatureGrid {
    transform_features_with(fg, &f.inverse(), Interpolation::Bilinear, FieldCache::global())
}

pub fn transform_features_with(
    fg: &FeatureGrid,
    f: &MobiusTransform,
    interp: Interpolation,
    cache: &FieldCache,
) -> FeatureGrid {
    let field = cache.get_or_build(f, fg.dims());
    warp_image(fg, &field, interp).expect("field built for the grid's own dims")
}

/// Grid-to-grid operation run inside a view-transformer branch, between the
/// forward and inverse transform.
pub trait GridOp: Send + Sync + std::fmt::Debug {
    fn apply(&self, grid: &FeatureGrid) -> FeatureGrid;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityOp;

impl GridOp for IdentityOp {
    fn apply(&self, grid: &FeatureGrid) -> FeatureGrid {
        grid.clone()
    }
}
