//! File formats: 8-bit PNG images, masks and predictions, binary feature
//! grids and CSV number formatting.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use image::{DynamicImage, GenericImageView, GrayImage, RgbImage};

use crate::error::{Error, Result};
use crate::geometry::GridDims;
use crate::metrics::SaliencyMap;
use crate::remap::{Grid, Interpolation};
use crate::geometry::PixelCoord;
use crate::stats::SaliencyMask;

/// Magic bytes opening a feature-grid file.
pub const FEATURE_MAGIC: &[u8; 4] = b"SVFG";

fn open_image(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|source| Error::Image { path: path.to_owned(), source })
}

/// Loads a PNG as a grid of `0..=255` values: one channel for grayscale
/// sources, three otherwise. Alpha is dropped.
pub fn load_image(path: &Path) -> Result<Grid> {
    let img = open_image(path)?;
    let (w, h) = img.dimensions();
    let dims = GridDims::any(w as usize, h as usize)?;
    let gray = matches!(img.color(), image::ColorType::L8 | image::ColorType::La8 | image::ColorType::L16 | image::ColorType::La16);
    if gray {
        let buf = img.to_luma8();
        Grid::new(dims, 1, buf.into_raw().into_iter().map(f64::from).collect())
    } else {
        let buf = img.to_rgb8();
        Grid::new(dims, 3, buf.into_raw().into_iter().map(f64::from).collect())
    }
}

/// Writes a 1- or 3-channel grid as 8-bit PNG, rounding and clamping.
pub fn save_image(path: &Path, grid: &Grid) -> Result<()> {
    let to_u8 = |x: &f64| x.round().clamp(0.0, 255.0) as u8;
    let bytes: Vec<u8> = grid.data().iter().map(to_u8).collect();
    let (w, h) = (grid.width() as u32, grid.height() as u32);
    let img = match grid.channels() {
        1 => DynamicImage::ImageLuma8(GrayImage::from_raw(w, h, bytes).expect("buffer sized from grid")),
        3 => DynamicImage::ImageRgb8(RgbImage::from_raw(w, h, bytes).expect("buffer sized from grid")),
        c => return Err(Error::Usage(format!("cannot write a {c}-channel grid as PNG"))),
    };
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| Error::Image { path: path.to_owned(), source })
}

/// Any nonzero sample marks foreground.
pub fn load_mask(path: &Path) -> Result<SaliencyMask> {
    let img = load_image(path)?;
    let c = img.channels();
    let values: Vec<f64> = img.data().chunks_exact(c).map(|px| px.iter().sum()).collect();
    SaliencyMask::from_values(img.dims(), &values)
}

/// Grayscale prediction scaled to `[0, 1]`.
pub fn load_prediction(path: &Path) -> Result<SaliencyMap> {
    let img = open_image(path)?;
    let buf = img.to_luma8();
    let dims = GridDims::any(buf.width() as usize, buf.height() as usize)?;
    SaliencyMap::new(dims, buf.into_raw().into_iter().map(|x| f64::from(x) / 255.0).collect())
}

/// Plain bilinear resize with clamped borders and pixel-center alignment.
pub fn resize_bilinear(grid: &Grid, w: usize, h: usize) -> Result<Grid> {
    let dims = GridDims::any(w, h)?;
    if dims == grid.dims() {
        return Ok(grid.clone());
    }
    let sx = grid.width() as f64 / w as f64;
    let sy = grid.height() as f64 / h as f64;
    let max_u = (grid.width() - 1) as f64;
    let c = grid.channels();
    let mut data = Vec::with_capacity(w * h * c);
    for r in 0..h {
        let v = ((r as f64 + 0.5) * sy - 0.5).clamp(0.0, (grid.height() - 1) as f64);
        for col in 0..w {
            let u = ((col as f64 + 0.5) * sx - 0.5).clamp(0.0, max_u);
            for k in 0..c {
                data.push(grid.sample(PixelCoord::new(u, v), k, Interpolation::Bilinear));
            }
        }
    }
    Grid::new(dims, c, data)
}

/// Resizes a prediction to `dims` when needed.
pub fn fit_prediction(s: SaliencyMap, dims: GridDims) -> Result<SaliencyMap> {
    if s.dims() == dims {
        return Ok(s);
    }
    let g = Grid::new(s.dims(), 1, s.data().to_vec())?;
    let r = resize_bilinear(&g, dims.width(), dims.height())?;
    SaliencyMap::new(dims, r.into_data())
}

/// Nearest-neighbour mask resize.
pub fn resize_mask(mask: &SaliencyMask, w: usize, h: usize) -> Result<SaliencyMask> {
    let dims = GridDims::any(w, h)?;
    let (sw, sh) = (mask.width(), mask.height());
    Ok(SaliencyMask::from_fn(dims, |r, c| {
        let rr = (((r as f64 + 0.5) * sh as f64 / h as f64) as usize).min(sh - 1);
        let cc = (((c as f64 + 0.5) * sw as f64 / w as f64) as usize).min(sw - 1);
        mask.get(rr, cc)
    }))
}

/// Writes `magic, u32 h, u32 w, u32 c` then `f32` values in row, column,
/// channel order, all little-endian.
pub fn write_feature_grid(path: &Path, grid: &Grid) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut put = |bytes: &[u8]| out.write_all(bytes).map_err(|e| Error::io(path, e));
    put(FEATURE_MAGIC)?;
    for n in [grid.height(), grid.width(), grid.channels()] {
        let n = u32::try_from(n).map_err(|_| Error::Usage(format!("grid size {n} exceeds u32")))?;
        put(&n.to_le_bytes())?;
    }
    for &x in grid.data() {
        put(&(x as f32).to_le_bytes())?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_feature_grid(path: &Path) -> Result<Grid> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() < 16 || &bytes[..4] != FEATURE_MAGIC {
        return Err(Error::format(path, "not a feature-grid file"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let (h, w, c) = (word(0), word(1), word(2));
    let n = h
        .checked_mul(w)
        .and_then(|x| x.checked_mul(c))
        .ok_or_else(|| Error::format(path, "header sizes overflow"))?;
    if c == 0 || bytes.len() != 16 + 4 * n {
        return Err(Error::format(path, format!("header says {h}x{w}x{c} but payload has {} bytes", bytes.len() - 16)));
    }
    let data = bytes[16..]
        .chunks_exact(4)
        .map(|b| f64::from(f32::from_le_bytes(b.try_into().unwrap())))
        .collect();
    Grid::new(GridDims::any(w, h)?, c, data).map_err(|e| Error::format(path, e.to_string()))
}

/// `%g` with six significant digits.
pub fn fmt_g(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        strip_zeros(&format!("{:.*}", (5 - exp) as usize, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// File name of `path` for CSV output.
pub fn display_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}
