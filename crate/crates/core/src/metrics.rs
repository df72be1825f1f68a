//! Salient object detection scores for a continuous prediction against a
//! binary ground truth: MAE, adaptive Fβ, max F, weighted Fβ (Margolin et al.
//! 2014), S-measure (Fan et al. 2017) and E-measure (Fan et al. 2018).
//!
//! Binarization is shared by Fβ, max F and E-measure: a pixel is predicted
//! salient when `s >= t` and `s > 0`, so an all-zero map never predicts
//! foreground at any threshold.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::GridDims;
use crate::stats::SaliencyMask;

/// `β²` of every F-measure variant.
pub const BETA2: f64 = 0.3;
/// Number of uniform thresholds swept by [`max_f`].
pub const MAX_F_THRESHOLDS: usize = 256;
/// Formulation tags written next to aggregate scores.
pub const METRIC_VERSIONS: &str = "wfb=margolin2014;sm=fan2017;em=fan2018";

const EPS: f64 = f64::EPSILON;

/// Prediction in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    dims: GridDims,
    data: Vec<f64>,
}

impl SaliencyMap {
    /// Values are clamped into `[0, 1]`; NaN is rejected.
    pub fn new(dims: GridDims, data: Vec<f64>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::Usage(format!(
                "map has {} values for a {}x{} grid",
                data.len(),
                dims.width(),
                dims.height()
            )));
        }
        if data.iter().any(|x| x.is_nan()) {
            return Err(Error::Usage("saliency map contains NaN".into()));
        }
        Ok(Self { dims, data: data.into_iter().map(|x| x.clamp(0.0, 1.0)).collect() })
    }

    pub fn from_fn(dims: GridDims, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let data = (0..dims.len()).map(|i| f(i / dims.width(), i % dims.width()).clamp(0.0, 1.0)).collect();
        Self { dims, data }
    }

    pub fn from_mask(mask: &SaliencyMask) -> Self {
        Self::from_fn(mask.dims(), |r, c| if mask.get(r, c) { 1.0 } else { 0.0 })
    }

    #[inline]
    pub fn dims(&self) -> GridDims {
        self.dims
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.dims.width() + col]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricsReport {
    pub mae: f64,
    pub f_beta: f64,
    pub w_f_beta: f64,
    pub max_f: f64,
    pub s_measure: f64,
    pub e_measure: f64,
}

impl MetricsReport {
    pub fn as_array(&self) -> [f64; 6] {
        [self.mae, self.f_beta, self.w_f_beta, self.max_f, self.s_measure, self.e_measure]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdPolicy {
    /// `min(1, 2 · mean(s))`.
    Adaptive,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedFOptions {
    /// Standard deviation of the pixel-dependency Gaussian.
    pub sigma: f64,
    /// Side of the square Gaussian window (odd).
    pub window: usize,
    /// Distance to foreground and the Gaussian filter ignore the ERP seam.
    pub planar: bool,
}

impl Default for WeightedFOptions {
    fn default() -> Self {
        Self { sigma: 5.0, window: 7, planar: false }
    }
}

fn check_pair(s: &SaliencyMap, g: &SaliencyMask) -> Result<()> {
    if s.dims != g.dims() {
        return Err(Error::Usage(format!(
            "prediction is {}x{} but ground truth is {}x{}",
            s.dims.width(),
            s.dims.height(),
            g.width(),
            g.height()
        )));
    }
    Ok(())
}

pub fn mae(s: &SaliencyMap, g: &SaliencyMask) -> Result<f64> {
    check_pair(s, g)?;
    let sum: f64 = s
        .data
        .iter()
        .zip(g.data())
        .map(|(&x, &y)| (x - if y { 1.0 } else { 0.0 }).abs())
        .sum();
    Ok(sum / s.data.len() as f64)
}

pub fn adaptive_threshold(s: &SaliencyMap) -> f64 {
    (2.0 * s.mean()).min(1.0)
}

#[inline]
pub fn is_predicted(value: f64, threshold: f64) -> bool {
    value >= threshold && value > 0.0
}

/// Fβ from confusion counts; zero when precision and recall both vanish.
pub fn f_from_counts(tp: usize, fp: usize, fn_: usize) -> f64 {
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    if precision == 0.0 && recall == 0.0 {
        return 0.0;
    }
    (1.0 + BETA2) * precision * recall / (BETA2 * precision + recall)
}

/// Fβ after binarizing `s`; `None` when `g` has no foreground.
pub fn f_beta(s: &SaliencyMap, g: &SaliencyMask, policy: ThresholdPolicy) -> Result<Option<f64>> {
    check_pair(s, g)?;
    if g.is_empty() {
        return Ok(None);
    }
    let t = match policy {
        ThresholdPolicy::Adaptive => adaptive_threshold(s),
        ThresholdPolicy::Fixed(t) => t,
    };
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (&x, &y) in s.data.iter().zip(g.data()) {
        match (is_predicted(x, t), y) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(Some(f_from_counts(tp, fp, fn_)))
}

/// The `i`-th threshold of the max-F sweep.
#[inline]
pub fn sweep_threshold(i: usize) -> f64 {
    i as f64 / (MAX_F_THRESHOLDS - 1) as f64
}

/// Number of sweep thresholds at which `x` is predicted salient.
fn positive_levels(x: f64) -> usize {
    if x <= 0.0 {
        return 0;
    }
    let top = MAX_F_THRESHOLDS - 1;
    let mut i = ((x * top as f64).floor() as usize).min(top);
    while i < top && sweep_threshold(i + 1) <= x {
        i += 1;
    }
    while i > 0 && sweep_threshold(i) > x {
        i -= 1;
    }
    if sweep_threshold(i) <= x {
        i + 1
    } else {
        0
    }
}

/// Maximum Fβ over the 256 thresholds `0, 1/255, …, 1`, computed from
/// cumulative level histograms.
pub fn max_f(s: &SaliencyMap, g: &SaliencyMask) -> Result<Option<f64>> {
    check_pair(s, g)?;
    if g.is_empty() {
        return Ok(None);
    }
    let n = MAX_F_THRESHOLDS;
    let mut fg_hist = vec![0usize; n + 1];
    let mut bg_hist = vec![0usize; n + 1];
    for (&x, &y) in s.data.iter().zip(g.data()) {
        let k = positive_levels(x);
        if y {
            fg_hist[k] += 1;
        } else {
            bg_hist[k] += 1;
        }
    }
    let total_fg = g.count();
    // Pixels with level count k are positive for thresholds 0..k.
    let mut tp = 0;
    let mut fp = 0;
    let mut best = 0.0f64;
    for i in (0..n).rev() {
        tp += fg_hist[i + 1];
        fp += bg_hist[i + 1];
        best = best.max(f_from_counts(tp, fp, total_fg - tp));
    }
    Ok(Some(best))
}

/// Normalized Gaussian window in the style of MATLAB's `fspecial`.
pub fn gaussian_kernel(window: usize, sigma: f64) -> Vec<f64> {
    let half = (window / 2) as isize;
    let mut k: Vec<f64> = (-half..=half)
        .flat_map(|y| (-half..=half).map(move |x| (-((x * x + y * y) as f64) / (2.0 * sigma * sigma)).exp()))
        .collect();
    let max = k.iter().cloned().fold(0.0, f64::max);
    for v in k.iter_mut() {
        if *v < EPS * max {
            *v = 0.0;
        }
    }
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Signed column offset from `from` to `to`, wrapped into `(-w/2, w/2]`
/// unless `planar`.
#[inline]
fn column_offset(from: usize, to: usize, w: usize, planar: bool) -> isize {
    if planar {
        return to as isize - from as isize;
    }
    let d = (to as isize - from as isize).rem_euclid(w as isize);
    if 2 * d > w as isize {
        d - w as isize
    } else {
        d
    }
}

/// Exact squared Euclidean distance to the nearest foreground pixel; columns
/// wrap around unless `planar`. Returns `f64::INFINITY` for an empty mask.
pub fn squared_distance_transform(mask: &SaliencyMask, planar: bool) -> Vec<f64> {
    let w = mask.width();
    let h = mask.height();
    let inf = f64::INFINITY;
    // Column pass.
    let mut col_d = vec![inf; w * h];
    for c in 0..w {
        let mut last: Option<usize> = None;
        for r in 0..h {
            if mask.get(r, c) {
                last = Some(r);
            }
            if let Some(l) = last {
                col_d[r * w + c] = ((r - l) * (r - l)) as f64;
            }
        }
        let mut next: Option<usize> = None;
        for r in (0..h).rev() {
            if mask.get(r, c) {
                next = Some(r);
            }
            if let Some(n) = next {
                let d = ((n - r) * (n - r)) as f64;
                if d < col_d[r * w + c] {
                    col_d[r * w + c] = d;
                }
            }
        }
    }
    // Row pass: lower envelope of parabolas, over three copies of the row
    // when the seam wraps.
    let mut out = vec![inf; w * h];
    let copies: isize = if planar { 1 } else { 3 };
    let offset: isize = if planar { 0 } else { w as isize };
    let m = w * copies as usize;
    let mut f = vec![inf; m];
    let mut d = vec![inf; m];
    let mut v = vec![0usize; m];
    let mut z = vec![0.0f64; m + 1];
    for r in 0..h {
        for i in 0..m {
            f[i] = col_d[r * w + i % w];
        }
        lower_envelope(&f, &mut d, &mut v, &mut z);
        for c in 0..w {
            out[r * w + c] = d[(c as isize + offset) as usize];
        }
    }
    out
}

/// 1-D squared distance transform (Felzenszwalb & Huttenlocher).
fn lower_envelope(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let Some(first) = f.iter().position(|x| x.is_finite()) else {
        d.iter_mut().for_each(|x| *x = f64::INFINITY);
        return;
    };
    let mut k = 0usize;
    v[0] = first;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in first + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] && k > 0 {
                k -= 1;
                continue;
            }
            if s <= z[k] {
                // k == 0 and the new parabola dominates everywhere.
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                z[1] = f64::INFINITY;
                break;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    let mut k = 0usize;
    for (q, out) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let dq = q as f64 - p as f64;
        *out = dq * dq + f[p];
    }
}

/// Weighted Fβ. `None` when `g` has no foreground.
pub fn weighted_f(s: &SaliencyMap, g: &SaliencyMask, opts: &WeightedFOptions) -> Result<Option<f64>> {
    check_pair(s, g)?;
    if opts.window % 2 == 0 || !(opts.sigma > 0.0) {
        return Err(Error::Config(format!("invalid weighted-F options {opts:?}")));
    }
    if g.is_empty() {
        return Ok(None);
    }
    let w = g.width();
    let h = g.height();
    let planar = opts.planar;
    let gt = g.data();
    let err: Vec<f64> = s.data.iter().zip(gt).map(|(&x, &y)| (x - if y { 1.0 } else { 0.0 }).abs()).collect();
    let dist2 = squared_distance_transform(g, planar);

    let half = (opts.window / 2) as isize;
    let kernel = gaussian_kernel(opts.window, opts.sigma);
    let wrap_col = |c: isize| -> Option<usize> {
        if planar {
            (0..w as isize).contains(&c).then_some(c as usize)
        } else {
            Some(c.rem_euclid(w as isize) as usize)
        }
    };

    // Background pixels read by the filter take the error of their nearest
    // foreground pixel (ties broken by the smallest (dy, dx) offset).
    let mut et: Vec<Option<f64>> = vec![None; w * h];
    for i in 0..w * h {
        if gt[i] {
            et[i] = Some(err[i]);
        }
    }
    for i in 0..w * h {
        if !gt[i] {
            continue;
        }
        let (r, c) = ((i / w) as isize, (i % w) as isize);
        for dy in -half..=half {
            let rr = r + dy;
            if rr < 0 || rr >= h as isize {
                continue;
            }
            for dx in -half..=half {
                let Some(cc) = wrap_col(c + dx) else { continue };
                let j = rr as usize * w + cc;
                if et[j].is_none() {
                    let src = nearest_foreground(g, rr as usize, cc, dist2[j], planar);
                    et[j] = Some(err[src]);
                }
            }
        }
    }

    let mut min_e = err.clone();
    for i in 0..w * h {
        if !gt[i] {
            continue;
        }
        let (r, c) = ((i / w) as isize, (i % w) as isize);
        let mut ea = 0.0;
        for dy in -half..=half {
            let rr = r + dy;
            if rr < 0 || rr >= h as isize {
                continue;
            }
            for dx in -half..=half {
                let Some(cc) = wrap_col(c + dx) else { continue };
                let kv = kernel[((dy + half) * opts.window as isize + dx + half) as usize];
                ea += kv * et[rr as usize * w + cc].expect("filled above");
            }
        }
        if ea < err[i] {
            min_e[i] = ea;
        }
    }

    let alpha = 0.5f64.ln() / 5.0;
    let mut fg_sum = 0.0;
    let mut bg_sum = 0.0;
    let mut n_fg = 0usize;
    for i in 0..w * h {
        if gt[i] {
            fg_sum += min_e[i];
            n_fg += 1;
        } else {
            let importance = 2.0 - (alpha * dist2[i].sqrt()).exp();
            bg_sum += min_e[i] * importance;
        }
    }
    let tp = n_fg as f64 - fg_sum;
    let recall = 1.0 - fg_sum / n_fg as f64;
    let precision = tp / (EPS + tp + bg_sum);
    let q = (1.0 + BETA2) * recall * precision / (EPS + recall + BETA2 * precision);
    Ok(Some(q.clamp(0.0, 1.0)))
}

fn nearest_foreground(g: &SaliencyMask, r: usize, c: usize, d2: f64, planar: bool) -> usize {
    let w = g.width();
    let h = g.height();
    let reach = d2.sqrt().floor() as isize;
    let mut best: Option<(isize, isize, usize)> = None;
    for dy in -reach..=reach {
        let rr = r as isize + dy;
        if rr < 0 || rr >= h as isize {
            continue;
        }
        for step in -reach..=reach {
            let raw = c as isize + step;
            let cc = if planar {
                if raw < 0 || raw >= w as isize {
                    continue;
                }
                raw as usize
            } else {
                raw.rem_euclid(w as isize) as usize
            };
            if !g.get(rr as usize, cc) {
                continue;
            }
            let dx = column_offset(c, cc, w, planar);
            if (dy * dy + dx * dx) as f64 != d2 {
                continue;
            }
            let j = rr as usize * w + cc;
            if best.is_none_or(|(by, bx, _)| (dy, dx) < (by, bx)) {
                best = Some((dy, dx, j));
            }
        }
    }
    best.expect("distance transform guarantees a foreground pixel at this range").2
}

fn object_score(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count();
    if n == 0 {
        return 0.0;
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    2.0 * mean / (mean * mean + 1.0 + std + EPS)
}

fn s_object(s: &SaliencyMap, g: &SaliencyMask) -> f64 {
    let pairs = || s.data.iter().zip(g.data());
    let fg = object_score(pairs().filter(|(_, &y)| y).map(|(&x, _)| x));
    let bg = object_score(pairs().filter(|(_, &y)| !y).map(|(&x, _)| 1.0 - x));
    let u = g.count() as f64 / g.data().len() as f64;
    u * fg + (1.0 - u) * bg
}

/// SSIM-style similarity of one block; an empty block scores 0.
fn block_ssim(s: &SaliencyMap, g: &SaliencyMask, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> f64 {
    let n = rows.len() * cols.len();
    if n == 0 {
        return 0.0;
    }
    let mut sx = 0.0;
    let mut sy = 0.0;
    for r in rows.clone() {
        for c in cols.clone() {
            sx += s.get(r, c);
            sy += if g.get(r, c) { 1.0 } else { 0.0 };
        }
    }
    let x = sx / n as f64;
    let y = sy / n as f64;
    let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
    for r in rows {
        for c in cols.clone() {
            let dx = s.get(r, c) - x;
            let dy = if g.get(r, c) { 1.0 } else { 0.0 } - y;
            vx += dx * dx;
            vy += dy * dy;
            cxy += dx * dy;
        }
    }
    let norm = n as f64 - 1.0 + EPS;
    let (vx, vy, cxy) = (vx / norm, vy / norm, cxy / norm);
    let alpha = 4.0 * x * y * cxy;
    let beta = (x * x + y * y) * (vx + vy);
    if alpha != 0.0 {
        alpha / (beta + EPS)
    } else if beta == 0.0 {
        1.0
    } else {
        0.0
    }
}

fn s_region(s: &SaliencyMap, g: &SaliencyMask) -> f64 {
    let w = g.width();
    let h = g.height();
    let total = g.count() as f64;
    // 1-based centroid, rounded half away from zero.
    let mut col_acc = 0.0;
    let mut row_acc = 0.0;
    for r in 0..h {
        for c in 0..w {
            if g.get(r, c) {
                col_acc += (c + 1) as f64;
                row_acc += (r + 1) as f64;
            }
        }
    }
    let x = (col_acc / total).round() as usize;
    let y = (row_acc / total).round() as usize;
    let area = (w * h) as f64;
    let w1 = (x * y) as f64 / area;
    let w2 = ((w - x) * y) as f64 / area;
    let w3 = (x * (h - y)) as f64 / area;
    let w4 = 1.0 - w1 - w2 - w3;
    w1 * block_ssim(s, g, 0..y, 0..x)
        + w2 * block_ssim(s, g, 0..y, x..w)
        + w3 * block_ssim(s, g, y..h, 0..x)
        + w4 * block_ssim(s, g, y..h, x..w)
}

/// S-measure with `α = 0.5` between object- and region-aware terms.
pub fn s_measure(s: &SaliencyMap, g: &SaliencyMask) -> Result<f64> {
    check_pair(s, g)?;
    let y = g.count() as f64 / g.data().len() as f64;
    let q = if y == 0.0 {
        1.0 - s.mean()
    } else if y == 1.0 {
        s.mean()
    } else {
        0.5 * s_object(s, g) + 0.5 * s_region(s, g)
    };
    Ok(q.clamp(0.0, 1.0))
}

/// E-measure of the adaptively binarized prediction.
pub fn e_measure(s: &SaliencyMap, g: &SaliencyMask) -> Result<f64> {
    check_pair(s, g)?;
    let t = adaptive_threshold(s);
    let fm: Vec<f64> = s.data.iter().map(|&x| if is_predicted(x, t) { 1.0 } else { 0.0 }).collect();
    let gt: Vec<f64> = g.data().iter().map(|&y| if y { 1.0 } else { 0.0 }).collect();
    let n = gt.len() as f64;
    let fg = g.count();
    let sum: f64 = if fg == 0 {
        fm.iter().map(|x| 1.0 - x).sum()
    } else if fg == gt.len() {
        fm.iter().sum()
    } else {
        let mu_fm = fm.iter().sum::<f64>() / n;
        let mu_gt = gt.iter().sum::<f64>() / n;
        fm.iter()
            .zip(&gt)
            .map(|(&a, &b)| {
                let (a, b) = (a - mu_fm, b - mu_gt);
                let align = 2.0 * a * b / (a * a + b * b + EPS);
                (align + 1.0) * (align + 1.0) / 4.0
            })
            .sum()
    };
    Ok((sum / n).clamp(0.0, 1.0))
}

/// All six scores for one pair; `None` when the ground truth is empty.
pub fn evaluate_pair(s: &SaliencyMap, g: &SaliencyMask, opts: &WeightedFOptions) -> Result<Option<MetricsReport>> {
    check_pair(s, g)?;
    if g.is_empty() {
        return Ok(None);
    }
    let f = |x: Option<f64>| x.expect("non-empty ground truth");
    Ok(Some(MetricsReport {
        mae: mae(s, g)?,
        f_beta: f(f_beta(s, g, ThresholdPolicy::Adaptive)?),
        w_f_beta: f(weighted_f(s, g, opts)?),
        max_f: f(max_f(s, g)?),
        s_measure: s_measure(s, g)?,
        e_measure: e_measure(s, g)?,
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetReport {
    pub mean: MetricsReport,
    pub per_sample: Vec<Option<MetricsReport>>,
    pub n_valid: usize,
    pub n_excluded: usize,
}

/// Per-metric mean over samples with non-empty ground truth. Summation runs
/// in input order so the result does not depend on thread scheduling.
pub fn evaluate_dataset(pairs: &[(SaliencyMap, SaliencyMask)], opts: &WeightedFOptions) -> Result<DatasetReport> {
    let per_sample = pairs
        .par_iter()
        .map(|(s, g)| evaluate_pair(s, g, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(per_sample))
}

pub fn aggregate(per_sample: Vec<Option<MetricsReport>>) -> DatasetReport {
    let mut sums = [0.0; 6];
    let mut n_valid = 0;
    for r in per_sample.iter().flatten() {
        for (acc, v) in sums.iter_mut().zip(r.as_array()) {
            *acc += v;
        }
        n_valid += 1;
    }
    let m = |k: usize| if n_valid == 0 { 0.0 } else { sums[k] / n_valid as f64 };
    DatasetReport {
        mean: MetricsReport {
            mae: m(0),
            f_beta: m(1),
            w_f_beta: m(2),
            max_f: m(3),
            s_measure: m(4),
            e_measure: m(5),
        },
        n_excluded: per_sample.len() - n_valid,
        n_valid,
        per_sample,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    /// 1-based position after sorting by attribute.
    pub rank: usize,
    pub attr: f64,
    pub score: f64,
}

/// Sorts `(attribute, score)` samples by attribute and smooths the scores
/// with a centered moving average; windows shrink at both ends.
pub fn attribute_curves(samples: &[(f64, f64)], window: usize) -> Result<Vec<CurvePoint>> {
    if window == 0 {
        return Err(Error::Config("moving-average window must be positive".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = sorted.len();
    let before = (window - 1) / 2;
    let after = window / 2;
    Ok((0..n)
        .map(|i| {
            let lo = i.saturating_sub(before);
            let hi = (i + after).min(n - 1);
            let score = sorted[lo..=hi].iter().map(|x| x.1).sum::<f64>() / (hi - lo + 1) as f64;
            CurvePoint { rank: i + 1, attr: sorted[i].0, score }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(w: usize, h: usize) -> GridDims {
        GridDims::any(w, h).unwrap()
    }

    fn square_gt() -> SaliencyMask {
        SaliencyMask::from_fn(d(8, 8), |r, c| (2..5).contains(&r) && (3..6).contains(&c))
    }

    #[test]
    fn mae_cases() {
        let g = SaliencyMask::from_fn(d(4, 4), |_, c| c < 2);
        let s = SaliencyMap::from_mask(&g);
        assert_eq!(mae(&s, &g).unwrap(), 0.0);
        let inv = SaliencyMap::from_fn(d(4, 4), |r, c| 1.0 - s.get(r, c));
        assert_eq!(mae(&inv, &g).unwrap(), 1.0);
        let s = SaliencyMap::from_fn(d(4, 4), |r, c| ((r * 4 + c) as f64) / 16.0);
        let mut hand = 0.0;
        for r in 0..4 {
            for c in 0..4 {
                let v = ((r * 4 + c) as f64) / 16.0;
                hand += if c < 2 { 1.0 - v } else { v };
            }
        }
        assert!((mae(&s, &g).unwrap() - hand / 16.0).abs() < 1e-15);
    }

    #[test]
    fn f_beta_hand_case() {
        // gt: left half of a 4x4; prediction marks column 0 and (0, 2).
        let g = SaliencyMask::from_fn(d(4, 4), |_, c| c < 2);
        let s = SaliencyMap::from_fn(d(4, 4), |r, c| if c == 0 || (r == 0 && c == 2) { 0.9 } else { 0.1 });
        // mean = (5·0.9 + 11·0.1)/16 = 0.35 → threshold 0.7.
        let (tp, fp, fn_) = (4.0, 1.0, 4.0);
        let p = tp / (tp + fp);
        let r = tp / (tp + fn_);
        let expected = 1.3 * p * r / (0.3 * p + r);
        assert!((f_beta(&s, &g, ThresholdPolicy::Adaptive).unwrap().unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn f_beta_edge_cases() {
        let g = square_gt();
        assert_eq!(f_beta(&SaliencyMap::from_mask(&g), &g, ThresholdPolicy::Adaptive).unwrap(), Some(1.0));
        let zero = SaliencyMap::from_fn(g.dims(), |_, _| 0.0);
        assert_eq!(f_beta(&zero, &g, ThresholdPolicy::Adaptive).unwrap(), Some(0.0));
        let empty = SaliencyMask::from_fn(g.dims(), |_, _| false);
        assert_eq!(f_beta(&zero, &empty, ThresholdPolicy::Adaptive).unwrap(), None);
        // More than half foreground: threshold saturates at 1.
        let big = SaliencyMask::from_fn(g.dims(), |r, _| r < 6);
        assert_eq!(f_beta(&SaliencyMap::from_mask(&big), &big, ThresholdPolicy::Adaptive).unwrap(), Some(1.0));
    }

    #[test]
    fn positive_levels_match_direct_count() {
        for k in 0..=2000 {
            let x = k as f64 / 2000.0;
            let direct = (0..MAX_F_THRESHOLDS).filter(|&i| is_predicted(x, sweep_threshold(i))).count();
            assert_eq!(positive_levels(x), direct, "x = {x}");
        }
        for i in 0..MAX_F_THRESHOLDS {
            let x = sweep_threshold(i);
            let direct = (0..MAX_F_THRESHOLDS).filter(|&j| is_predicted(x, sweep_threshold(j))).count();
            assert_eq!(positive_levels(x), direct);
        }
    }

    #[test]
    fn perfect_prediction_scores() {
        let g = square_gt();
        let s = SaliencyMap::from_mask(&g);
        let r = evaluate_pair(&s, &g, &WeightedFOptions::default()).unwrap().unwrap();
        assert_eq!(r.mae, 0.0);
        for v in [r.f_beta, r.w_f_beta, r.max_f, r.s_measure, r.e_measure] {
            assert!((v - 1.0).abs() < 1e-12, "{r:?}");
        }
    }

    #[test]
    fn zero_prediction_weighted_f_is_zero() {
        // Kept away from the top and bottom rows, which are zero padded.
        let g = SaliencyMask::from_fn(d(32, 16), |r, c| (6..10).contains(&r) && (30..34).contains(&(c + 2)));
        let zero = SaliencyMap::from_fn(g.dims(), |_, _| 0.0);
        assert!(weighted_f(&zero, &g, &WeightedFOptions::default()).unwrap().unwrap().abs() < 1e-12);
    }

    #[test]
    fn gaussian_kernel_is_normalized() {
        let k = gaussian_kernel(7, 5.0);
        assert_eq!(k.len(), 49);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(k[24] > k[0]);
        assert_eq!(k[0], k[48]);
    }

    #[test]
    fn distance_transform_against_brute_force() {
        let g = SaliencyMask::from_fn(d(12, 6), |r, c| (r == 1 && c == 0) || (r == 4 && c == 7) || (r == 5 && c == 11));
        for planar in [false, true] {
            let fast = squared_distance_transform(&g, planar);
            for r in 0..6 {
                for c in 0..12 {
                    let mut best = f64::INFINITY;
                    for rr in 0..6 {
                        for cc in 0..12 {
                            if g.get(rr, cc) {
                                let dy = rr as f64 - r as f64;
                                let dx = column_offset(c, cc, 12, planar) as f64;
                                best = best.min(dy * dy + dx * dx);
                            }
                        }
                    }
                    assert_eq!(fast[r * 12 + c], best, "planar={planar} ({r},{c})");
                }
            }
        }
    }

    #[test]
    fn s_measure_degenerate_gt() {
        let s = SaliencyMap::from_fn(d(4, 4), |_, _| 0.25);
        let empty = SaliencyMask::from_fn(d(4, 4), |_, _| false);
        let full = SaliencyMask::from_fn(d(4, 4), |_, _| true);
        assert!((s_measure(&s, &empty).unwrap() - 0.75).abs() < 1e-15);
        assert!((s_measure(&s, &full).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn e_measure_of_empty_prediction() {
        let g = square_gt();
        let zero = SaliencyMap::from_fn(g.dims(), |_, _| 0.0);
        assert!((e_measure(&zero, &g).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn dataset_mean_and_exclusions() {
        let g = square_gt();
        let empty = SaliencyMask::from_fn(g.dims(), |_, _| false);
        let s = SaliencyMap::from_mask(&g);
        let half = SaliencyMap::from_fn(g.dims(), |r, c| if g.get(r, c) { 0.5 } else { 0.0 });
        let opts = WeightedFOptions::default();
        let a = evaluate_pair(&s, &g, &opts).unwrap().unwrap();
        let b = evaluate_pair(&half, &g, &opts).unwrap().unwrap();
        let rep = evaluate_dataset(&[(s.clone(), g.clone()), (half, g.clone()), (s, empty)], &opts).unwrap();
        assert_eq!((rep.n_valid, rep.n_excluded), (2, 1));
        for k in 0..6 {
            assert!((rep.mean.as_array()[k] - (a.as_array()[k] + b.as_array()[k]) / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn mismatched_dims_rejected() {
        let g = square_gt();
        let s = SaliencyMap::from_fn(d(4, 4), |_, _| 0.0);
        assert!(matches!(mae(&s, &g), Err(Error::Usage(_))));
    }

    #[test]
    fn curves() {
        let constant: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 0.7)).collect();
        assert!(attribute_curves(&constant, 4).unwrap().iter().all(|p| (p.score - 0.7).abs() < 1e-15));
        let shuffled = [(3.0, 30.0), (1.0, 10.0), (2.0, 20.0), (4.0, 40.0), (5.0, 50.0)];
        let id = attribute_curves(&shuffled, 1).unwrap();
        assert_eq!(id.iter().map(|p| p.score).collect::<Vec<_>>(), vec![10.0, 20.0, 30.0, 40.0, 50.0]);
        assert_eq!(id[0].rank, 1);
        // Window 3 over the ramp 10..50: edges average two samples.
        let smooth = attribute_curves(&shuffled, 3).unwrap();
        assert_eq!(smooth.iter().map(|p| p.score).collect::<Vec<_>>(), vec![15.0, 20.0, 30.0, 40.0, 45.0]);
        assert!(attribute_curves(&shuffled, 0).is_err());
        assert!(attribute_curves(&[], 5).unwrap().is_empty());
    }
}
