//! Per-mask statistics of salient regions on ERP ground truth.

use crate::error::{Error, Result};
use crate::geometry::{erp_to_sphere, GridDims, PixelCoord};

/// Binary ground-truth mask, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SaliencyMask {
    dims: GridDims,
    data: Vec<bool>,
}

impl SaliencyMask {
    pub fn new(dims: GridDims, data: Vec<bool>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::Usage(format!(
                "mask has {} values for a {}x{} grid",
                data.len(),
                dims.width(),
                dims.height()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn from_fn(dims: GridDims, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let data = (0..dims.len()).map(|i| f(i / dims.width(), i % dims.width())).collect();
        Self { dims, data }
    }

    /// Any non-zero value is foreground.
    pub fn from_values(dims: GridDims, values: &[f64]) -> Result<Self> {
        Self::new(dims, values.iter().map(|&x| x != 0.0).collect())
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
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.dims.width() + col]
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&x| x).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&x| x)
    }

    /// Circular shift by `k` columns to the right.
    pub fn roll_columns(&self, k: usize) -> Self {
        let w = self.width();
        Self::from_fn(self.dims, |r, c| self.get(r, (c + w - k % w) % w))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionStats {
    /// Mean `1 / cos φ` over occupied rows; `None` for an empty mask.
    pub distortion: Option<f64>,
    pub edge_discontinuous: bool,
    pub max_hfov: f64,
    pub max_vfov: f64,
    pub fg_ratio: f64,
    pub n_components: usize,
}

/// One 4-connected foreground region, as `(row, col)` pixels in discovery
/// order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub pixels: Vec<(usize, usize)>,
}

impl Component {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }
}

/// Distortion degree: the average of `1 / cos φ` over rows containing at
/// least one foreground pixel.
pub fn distortion_degree(mask: &SaliencyMask) -> Option<f64> {
    let w = mask.width();
    let mut sum = 0.0;
    let mut n = 0usize;
    for (row, cells) in mask.data.chunks(w).enumerate() {
        if cells.iter().any(|&x| x) {
            let lat = erp_to_sphere(PixelCoord::new(0.0, row as f64), &mask.dims).lat();
            sum += 1.0 / lat.cos();
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// 4-connected components; with `wrap`, column `w - 1` touches column 0.
pub fn components(mask: &SaliencyMask, wrap: bool) -> Vec<Component> {
    let w = mask.width();
    let h = mask.height();
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !mask.data[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut pixels = Vec::new();
        while let Some(i) = stack.pop() {
            let (r, c) = (i / w, i % w);
            pixels.push((r, c));
            let mut push = |j: usize| {
                if mask.data[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if r > 0 {
                push(i - w);
            }
            if r + 1 < h {
                push(i + w);
            }
            if c > 0 {
                push(i - 1);
            } else if wrap && w > 1 {
                push(i + w - 1);
            }
            if c + 1 < w {
                push(i + 1);
            } else if wrap && w > 1 {
                push(i + 1 - w);
            }
        }
        out.push(Component { pixels });
    }
    out
}

pub fn wrap_components(mask: &SaliencyMask) -> Vec<Component> {
    components(mask, true)
}

/// True when some salient region crosses the left/right ERP border, i.e. a
/// foreground pixel in column 0 meets one in column `w - 1` across the seam.
pub fn edge_discontinuity(mask: &SaliencyMask) -> bool {
    let w = mask.width();
    w > 1 && mask.data.chunks(w).any(|row| row[0] && row[w - 1])
}

/// `(max_hfov, max_vfov)` in degrees over the wrap-connected regions.
pub fn fov_coverage(mask: &SaliencyMask) -> (f64, f64) {
    fov_of_components(mask, &wrap_components(mask))
}

fn fov_of_components(mask: &SaliencyMask, comps: &[Component]) -> (f64, f64) {
    let w = mask.width();
    let h = mask.height();
    let mut best = (0.0f64, 0.0f64);
    let mut cols = vec![false; w];
    for comp in comps {
        cols.iter_mut().for_each(|x| *x = false);
        let (mut rmin, mut rmax) = (usize::MAX, 0);
        for &(r, c) in &comp.pixels {
            cols[c] = true;
            rmin = rmin.min(r);
            rmax = rmax.max(r);
        }
        let hfov = (w - largest_circular_gap(&cols)) as f64 * 360.0 / w as f64;
        let vfov = (rmax - rmin + 1) as f64 * 180.0 / h as f64;
        best = (best.0.max(hfov), best.1.max(vfov));
    }
    best
}

/// Longest run of `false` in a circular sequence.
fn largest_circular_gap(occupied: &[bool]) -> usize {
    let n = occupied.len();
    let Some(first) = occupied.iter().position(|&x| x) else {
        return n;
    };
    let mut best = 0;
    let mut run = 0;
    // Start just after an occupied slot so every gap is seen whole.
    for k in 1..=n {
        if occupied[(first + k) % n] {
            best = best.max(run);
            run = 0;
        } else {
            run += 1;
        }
    }
    best
}

pub fn foreground_ratio(mask: &SaliencyMask) -> f64 {
    mask.count() as f64 / mask.data.len() as f64
}

pub fn region_stats(mask: &SaliencyMask) -> RegionStats {
    let comps = wrap_components(mask);
    let (max_hfov, max_vfov) = fov_of_components(mask, &comps);
    RegionStats {
        distortion: distortion_degree(mask),
        edge_discontinuous: edge_discontinuity(mask),
        max_hfov,
        max_vfov,
        fg_ratio: foreground_ratio(mask),
        n_components: comps.len(),
    }
}

/// Attribute of [`RegionStats`] used for histograms and sorted curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Attribute {
    FgRatio,
    Distortion,
    MaxHfov,
    MaxVfov,
}

impl Attribute {
    pub const ALL: [Attribute; 4] =
        [Attribute::Distortion, Attribute::MaxHfov, Attribute::MaxVfov, Attribute::FgRatio];

    pub fn name(&self) -> &'static str {
        match self {
            Attribute::FgRatio => "fg_ratio",
            Attribute::Distortion => "distortion",
            Attribute::MaxHfov => "max_hfov_deg",
            Attribute::MaxVfov => "max_vfov_deg",
        }
    }

    pub fn value(&self, s: &RegionStats) -> Option<f64> {
        match self {
            Attribute::FgRatio => Some(s.fg_ratio),
            Attribute::Distortion => s.distortion,
            Attribute::MaxHfov => Some(s.max_hfov),
            Attribute::MaxVfov => Some(s.max_vfov),
        }
    }

    pub fn default_bins(&self) -> HistogramBins {
        match self {
            Attribute::FgRatio => HistogramBins { lo: 0.0, hi: 1.0, bins: 20 },
            Attribute::Distortion => HistogramBins { lo: 1.0, hi: 13.0, bins: 24 },
            Attribute::MaxHfov => HistogramBins { lo: 0.0, hi: 360.0, bins: 12 },
            Attribute::MaxVfov => HistogramBins { lo: 0.0, hi: 180.0, bins: 9 },
        }
    }
}

impl std::str::FromStr for Attribute {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fg_ratio" => Ok(Attribute::FgRatio),
            "distortion" => Ok(Attribute::Distortion),
            "max_hfov_deg" | "hfov" => Ok(Attribute::MaxHfov),
            "max_vfov_deg" | "vfov" => Ok(Attribute::MaxVfov),
            other => Err(Error::Config(format!("unknown attribute '{other}'"))),
        }
    }
}

/// Equal-width bins over `[lo, hi]`; values outside fall into the end bins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBins {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistBin {
    pub lo: f64,
    pub hi: f64,
    pub percent: f64,
}

/// Percentage of values per bin (or cumulative percentage up to each bin).
/// An empty input yields all-zero bins.
pub fn histogram(values: &[f64], spec: HistogramBins, cumulative: bool) -> Result<Vec<HistBin>> {
    if spec.bins == 0 || !(spec.hi > spec.lo) {
        return Err(Error::Config(format!("invalid histogram range {spec:?}")));
    }
    let step = (spec.hi - spec.lo) / spec.bins as f64;
    let mut counts = vec![0usize; spec.bins];
    for &x in values {
        let idx = ((x - spec.lo) / step).floor();
        let idx = if idx.is_nan() { 0 } else { idx.clamp(0.0, (spec.bins - 1) as f64) as usize };
        counts[idx] += 1;
    }
    let n = values.len();
    let mut running = 0usize;
    Ok(counts
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            running += k;
            let shown = if cumulative { running } else { k };
            HistBin {
                lo: spec.lo + i as f64 * step,
                hi: if i + 1 == spec.bins { spec.hi } else { spec.lo + (i + 1) as f64 * step },
                percent: if n == 0 { 0.0 } else { shown as f64 * 100.0 / n as f64 },
            }
        })
        .collect())
}

pub fn dataset_histograms(
    stats: &[RegionStats],
    attr: Attribute,
    bins: HistogramBins,
    cumulative: bool,
) -> Result<Vec<HistBin>> {
    let values: Vec<f64> = stats.iter().filter_map(|s| attr.value(s)).collect();
    histogram(&values, bins, cumulative)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn dims(w: usize) -> GridDims {
        GridDims::new(w, w / 2).unwrap()
    }

    fn blob(d: GridDims, rows: std::ops::Range<usize>, cols: &[usize]) -> SaliencyMask {
        SaliencyMask::from_fn(d, |r, c| rows.contains(&r) && cols.contains(&c))
    }

    #[test]
    fn equator_band_has_unit_distortion() {
        let d = dims(512);
        let m = SaliencyMask::from_fn(d, |r, _| r == 127 || r == 128);
        assert!((distortion_degree(&m).unwrap() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn two_row_construction() {
        // h = 1200: row 599 sits at φ = 0.075°, row 199 at φ = 60.075°.
        let d = dims(2400);
        let lat = |r: usize| erp_to_sphere(PixelCoord::new(0.0, r as f64), &d).lat().to_degrees();
        assert!((lat(599) - 0.0).abs() < 0.1 && (lat(199) - 60.0).abs() < 0.1);
        let m = SaliencyMask::from_fn(d, |r, c| (r == 599 || r == 199) && c == 7);
        assert!((distortion_degree(&m).unwrap() - 1.5).abs() < 1e-2);
    }

    #[test]
    fn full_mask_matches_row_sum() {
        let d = dims(512);
        let m = SaliencyMask::from_fn(d, |_, _| true);
        let mut sum = 0.0;
        for v in 0..256 {
            let phi = (0.5 - (v as f64 + 0.5) / 256.0) * PI;
            sum += 1.0 / phi.cos();
        }
        assert!((distortion_degree(&m).unwrap() - sum / 256.0).abs() < 1e-9);
    }

    #[test]
    fn empty_mask_has_no_distortion() {
        let m = SaliencyMask::from_fn(dims(64), |_, _| false);
        assert_eq!(distortion_degree(&m), None);
        assert!(wrap_components(&m).is_empty());
        assert_eq!(fov_coverage(&m), (0.0, 0.0));
        assert_eq!(foreground_ratio(&m), 0.0);
        assert!(!edge_discontinuity(&m));
        assert_eq!(region_stats(&m).distortion, None);
    }

    #[test]
    fn distortion_grows_towards_pole() {
        let d = dims(256);
        let mut last = 0.0;
        for top in (2..60).rev().step_by(4) {
            let m = blob(d, top..top + 4, &[10, 11, 12]);
            let dd = distortion_degree(&m).unwrap();
            assert!(dd > last);
            last = dd;
        }
    }

    #[test]
    fn seam_blobs_join_only_with_wrap() {
        let d = dims(64);
        let m = blob(d, 10..14, &[0, 1, 2, 61, 62, 63]);
        assert_eq!(wrap_components(&m).len(), 1);
        assert_eq!(components(&m, false).len(), 2);
        assert!(edge_discontinuity(&m));
        assert_eq!(fov_coverage(&m).0, 6.0 * 360.0 / 64.0);
    }

    #[test]
    fn discontinuity_cases() {
        let d = dims(64);
        assert!(edge_discontinuity(&blob(d, 5..6, &[61, 62, 63, 0, 1, 2])));
        assert!(!edge_discontinuity(&blob(d, 5..9, &(10..21).collect::<Vec<_>>())));
        let band = SaliencyMask::from_fn(d, |r, _| r == 3);
        assert!(edge_discontinuity(&band));
        // Two separate regions touching opposite borders in different rows.
        let split = SaliencyMask::from_fn(d, |r, c| (r == 2 && c == 0) || (r == 9 && c == 63));
        assert!(!edge_discontinuity(&split));
    }

    #[test]
    fn fov_cases() {
        let d = dims(512);
        assert_eq!(fov_coverage(&SaliencyMask::from_fn(d, |_, _| true)), (360.0, 180.0));
        assert_eq!(
            fov_coverage(&SaliencyMask::from_fn(d, |r, c| r == 40 && c == 300)),
            (360.0 / 512.0, 180.0 / 256.0)
        );
        let cols: Vec<usize> = (502..512).chain(0..10).collect();
        let seam = blob(d, 100..110, &cols);
        let (h, v) = fov_coverage(&seam);
        assert_eq!(h, 20.0 * 360.0 / 512.0);
        assert_eq!(v, 10.0 * 180.0 / 256.0);
    }

    #[test]
    fn ratio_cases() {
        let d = dims(64);
        assert_eq!(foreground_ratio(&SaliencyMask::from_fn(d, |_, _| true)), 1.0);
        assert_eq!(foreground_ratio(&SaliencyMask::from_fn(d, |_, c| c < 32)), 0.5);
    }

    #[test]
    fn histogram_cases() {
        let one = histogram(&[3.2], HistogramBins { lo: 0.0, hi: 10.0, bins: 5 }, false).unwrap();
        assert_eq!(one.iter().filter(|b| b.percent == 100.0).count(), 1);
        assert_eq!(one.iter().filter(|b| b.percent == 0.0).count(), 4);

        let values: Vec<f64> = (0..40).map(|i| i as f64 / 4.0 + 0.1).collect();
        let flat = histogram(&values, HistogramBins { lo: 0.0, hi: 10.0, bins: 10 }, false).unwrap();
        for b in &flat {
            assert!((b.percent - 10.0).abs() < 1e-12);
        }
        let cum = histogram(&values, HistogramBins { lo: 0.0, hi: 10.0, bins: 10 }, true).unwrap();
        assert_eq!(cum.last().unwrap().percent, 100.0);
        assert!(histogram(&values, HistogramBins { lo: 1.0, hi: 1.0, bins: 3 }, true).is_err());
    }

    fn arb_mask() -> impl Strategy<Value = SaliencyMask> {
        (prop::collection::vec(any::<bool>(), 32 * 16), 0.0..1.0f64).prop_map(|(bits, density)| {
            let d = GridDims::new(32, 16).unwrap();
            // Sparsify so components vary in size.
            let data = bits
                .iter()
                .enumerate()
                .map(|(i, &b)| b && ((i * 7919) % 100) as f64 / 100.0 < density)
                .collect();
            SaliencyMask::new(d, data).unwrap()
        })
    }

    proptest! {
        #[test]
        fn shift_invariance(m in arb_mask(), k in 0usize..32) {
            let shifted = m.roll_columns(k);
            prop_assert_eq!(distortion_degree(&m), distortion_degree(&shifted));
            prop_assert_eq!(fov_coverage(&m), fov_coverage(&shifted));
            prop_assert_eq!(wrap_components(&m).len(), wrap_components(&shifted).len());
        }

        #[test]
        fn histogram_sums_to_hundred(values in prop::collection::vec(-5.0..20.0f64, 1..60)) {
            let bins = HistogramBins { lo: 0.0, hi: 12.0, bins: 7 };
            let h = histogram(&values, bins, false).unwrap();
            prop_assert!((h.iter().map(|b| b.percent).sum::<f64>() - 100.0).abs() < 1e-6);
            let c = histogram(&values, bins, true).unwrap();
            prop_assert!(c.windows(2).all(|p| p[0].percent <= p[1].percent));
            prop_assert_eq!(c.last().unwrap().percent, 100.0);
        }

        #[test]
        fn ranges_hold(m in arb_mask()) {
            let s = region_stats(&m);
            prop_assert!(s.max_vfov <= 180.0 && s.max_hfov <= 360.0);
            prop_assert!((0.0..=1.0).contains(&s.fg_ratio));
            if let Some(d) = s.distortion {
                prop_assert!(d >= 1.0);
                prop_assert!(s.max_hfov >= 360.0 / 32.0);
            }
        }
    }
}
