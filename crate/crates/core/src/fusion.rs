//! View-transformer branches on feature grids and sample-adaptive fusion.
//!
//! A branch moves the grid into a transformed view, runs a grid operation
//! there and maps the result back. Several sub-branches of one kind are
//! averaged. The original grid and every branch output are then scaled by
//! per-branch weights from a small squeeze-and-excitation gate and
//! concatenated along channels.

use std::f64::consts::TAU;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::UnitVector3;
use crate::mobius::MobiusTransform;
use crate::remap::{transform_features_with, FeatureGrid, FieldCache, Grid, GridOp, IdentityOp, Interpolation};

/// Default reduction ratio of the gating bottleneck.
pub const DEFAULT_REDUCTION: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BranchKind {
    /// Rotation about the polar axis `(0, 0, 1)`.
    Horizontal,
    /// Rotation about `(0, 1, 0)`.
    Vertical,
    Zoom,
}

impl BranchKind {
    pub fn axis(self) -> Option<UnitVector3> {
        match self {
            BranchKind::Horizontal => Some(UnitVector3::Z),
            BranchKind::Vertical => Some(UnitVector3::Y),
            BranchKind::Zoom => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BranchKind::Horizontal => "horizontal",
            BranchKind::Vertical => "vertical",
            BranchKind::Zoom => "zoom",
        }
    }
}

impl fmt::Display for BranchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BranchParam {
    /// Rotation angle in radians.
    Angle(f64),
    Zoom { center: UnitVector3, rho: f64 },
}

#[derive(Debug, Clone)]
pub struct BranchSpec {
    kind: BranchKind,
    params: Vec<BranchParam>,
    op: Arc<dyn GridOp>,
}

impl BranchSpec {
    pub fn new(kind: BranchKind, params: Vec<BranchParam>) -> Result<Self> {
        Self::with_op(kind, params, Arc::new(IdentityOp))
    }

    pub fn with_op(kind: BranchKind, params: Vec<BranchParam>, op: Arc<dyn GridOp>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::Usage(format!("{kind} branch has no sub-branches")));
        }
        for p in &params {
            match (kind, p) {
                (BranchKind::Horizontal | BranchKind::Vertical, BranchParam::Angle(a)) => {
                    if !a.is_finite() {
                        return Err(Error::Domain(format!("{kind} angle {a} is not finite")));
                    }
                    let r = a.rem_euclid(TAU);
                    if r.min(TAU - r) < 1e-12 {
                        return Err(Error::Domain(format!("{kind} angle {a} rad is a full turn")));
                    }
                }
                (BranchKind::Zoom, BranchParam::Zoom { rho, .. }) => {
                    if !(rho.is_finite() && *rho > 0.0) {
                        return Err(Error::Domain(format!("zoom factor must be positive, got {rho}")));
                    }
                    if *rho == 1.0 {
                        return Err(Error::Domain("zoom factor 1 duplicates the original branch".into()));
                    }
                }
                _ => return Err(Error::Usage(format!("parameter {p:?} does not fit a {kind} branch"))),
            }
        }
        Ok(Self { kind, params, op })
    }

    pub fn horizontal(angles: &[f64]) -> Result<Self> {
        Self::new(BranchKind::Horizontal, angles.iter().map(|&a| BranchParam::Angle(a)).collect())
    }

    pub fn vertical(angles: &[f64]) -> Result<Self> {
        Self::new(BranchKind::Vertical, angles.iter().map(|&a| BranchParam::Angle(a)).collect())
    }

    pub fn zoom(center: UnitVector3, rhos: &[f64]) -> Result<Self> {
        Self::new(BranchKind::Zoom, rhos.iter().map(|&rho| BranchParam::Zoom { center, rho }).collect())
    }

    pub fn kind(&self) -> BranchKind {
        self.kind
    }

    pub fn params(&self) -> &[BranchParam] {
        &self.params
    }

    pub fn op(&self) -> &Arc<dyn GridOp> {
        &self.op
    }

    /// View transform of every sub-branch, in order.
    pub fn transforms(&self) -> Result<Vec<MobiusTransform>> {
        self.params
            .iter()
            .map(|p| match (*p, self.kind.axis()) {
                (BranchParam::Angle(a), Some(axis)) => MobiusTransform::rotation(&axis, a),
                (BranchParam::Zoom { center, rho }, None) => MobiusTransform::zoom_about(&center, rho),
                _ => unreachable!("checked at construction"),
            })
            .collect()
    }
}

/// Horizontal rotations by ±30°, ±60°, …, ±150° and 180°.
pub fn default_horizontal_degrees() -> Vec<f64> {
    let mut out: Vec<f64> = (1..=5).flat_map(|k| [30.0 * k as f64, -30.0 * k as f64]).collect();
    out.push(180.0);
    out
}

pub const DEFAULT_VERTICAL_DEGREES: [f64; 2] = [30.0, -30.0];
pub const DEFAULT_ZOOM_FACTORS: [f64; 4] = [0.8, 1.2, 0.7, 1.3];

/// Horizontal, vertical and zoom branches with the default parameter sets,
/// zooming about `(0, 0, -1)`.
pub fn default_specs() -> Vec<BranchSpec> {
    let h: Vec<f64> = default_horizontal_degrees().into_iter().map(f64::to_radians).collect();
    let v: Vec<f64> = DEFAULT_VERTICAL_DEGREES.iter().map(|d| d.to_radians()).collect();
    vec![
        BranchSpec::horizontal(&h).expect("valid defaults"),
        BranchSpec::vertical(&v).expect("valid defaults"),
        BranchSpec::zoom(UnitVector3::SOUTH, &DEFAULT_ZOOM_FACTORS).expect("valid defaults"),
    ]
}

fn check_finite(fg: &FeatureGrid) -> Result<()> {
    if fg.data().iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Usage("feature grid contains non-finite values".into()))
    }
}

/// Element-wise mean over all sub-branches of
/// `inverse(op(transform(fg, f_i)), f_i)`.
pub fn run_branch(fg: &FeatureGrid, spec: &BranchSpec, interp: Interpolation) -> Result<FeatureGrid> {
    run_branch_with(fg, spec, interp, FieldCache::global())
}

pub fn run_branch_with(
    fg: &FeatureGrid,
    spec: &BranchSpec,
    interp: Interpolation,
    cache: &FieldCache,
) -> Result<FeatureGrid> {
    check_finite(fg)?;
    let transforms = spec.transforms()?;
    let outputs = transforms
        .par_iter()
        .map(|f| {
            let moved = transform_features_with(fg, f, interp, cache);
            let processed = spec.op.apply(&moved);
            if processed.dims() != fg.dims() || processed.channels() != fg.channels() {
                return Err(Error::Usage(format!(
                    "{} branch operation changed the grid shape",
                    spec.kind
                )));
            }
            Ok(transform_features_with(&processed, &f.inverse(), interp, cache))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut acc = vec![0.0; fg.data().len()];
    for out in &outputs {
        for (a, x) in acc.iter_mut().zip(out.data()) {
            *a += x;
        }
    }
    let n = outputs.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Grid::new(fg.dims(), fg.channels(), acc)
}

/// Per-branch fusion weights, the original branch first.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionWeights(Vec<f64>);

impl FusionWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if let Some(x) = w.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::Domain(format!("fusion weight {x} outside [0, 1]")));
        }
        Ok(Self(w))
    }

    pub fn ones(k: usize) -> Self {
        Self(vec![1.0; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Squeeze-and-excitation gate `C → H → K`. Stage weights are stored
/// row-major with one row per input unit.
#[derive(Debug, Clone, PartialEq)]
pub struct GatingParams {
    channels: usize,
    hidden: usize,
    branches: usize,
    reduce_w: Vec<f64>,
    reduce_b: Vec<f64>,
    expand_w: Vec<f64>,
    expand_b: Vec<f64>,
}

impl GatingParams {
    pub fn new(
        channels: usize,
        branches: usize,
        reduce_w: Vec<f64>,
        reduce_b: Vec<f64>,
        expand_w: Vec<f64>,
        expand_b: Vec<f64>,
    ) -> Result<Self> {
        if channels == 0 || branches == 0 || reduce_b.is_empty() {
            return Err(Error::Config("gating needs at least one channel, hidden unit and branch".into()));
        }
        let hidden = reduce_b.len();
        for (name, len, want) in [
            ("reduce_w", reduce_w.len(), channels * hidden),
            ("expand_w", expand_w.len(), hidden * branches),
            ("expand_b", expand_b.len(), branches),
        ] {
            if len != want {
                return Err(Error::Config(format!("{name} has {len} values, expected {want}")));
            }
        }
        if reduce_w.iter().chain(&reduce_b).chain(&expand_w).chain(&expand_b).any(|x| !x.is_finite()) {
            return Err(Error::Config("gating parameters must be finite".into()));
        }
        Ok(Self { channels, hidden, branches, reduce_w, reduce_b, expand_w, expand_b })
    }

    /// All-zero parameters with `max(1, C / r)` hidden units; every weight
    /// evaluates to 0.5.
    pub fn zeros(channels: usize, branches: usize, reduction: usize) -> Result<Self> {
        if reduction == 0 {
            return Err(Error::Config("reduction ratio must be positive".into()));
        }
        let hidden = (channels / reduction).max(1);
        Self::new(
            channels,
            branches,
            vec![0.0; channels * hidden],
            vec![0.0; hidden],
            vec![0.0; hidden * branches],
            vec![0.0; branches],
        )
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn branches(&self) -> usize {
        self.branches
    }

    pub fn reduce_w(&self) -> &[f64] {
        &self.reduce_w
    }

    pub fn reduce_b(&self) -> &[f64] {
        &self.reduce_b
    }

    pub fn expand_w(&self) -> &[f64] {
        &self.expand_w
    }

    pub fn expand_b(&self) -> &[f64] {
        &self.expand_b
    }

    /// Text form: whitespace separated `key value…` records, `#` comments.
    pub fn to_text(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ");
        format!(
            "channels {}\nhidden {}\nbranches {}\nreduce_w {}\nreduce_b {}\nexpand_w {}\nexpand_b {}\n",
            self.channels,
            self.hidden,
            self.branches,
            list(&self.reduce_w),
            list(&self.reduce_b),
            list(&self.expand_w),
            list(&self.expand_b)
        )
    }
}

impl FromStr for GatingParams {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut channels = None;
        let mut hidden = None;
        let mut branches = None;
        let mut lists: [Vec<f64>; 4] = Default::default();
        let mut key: Option<&str> = None;
        for token in text.lines().flat_map(|l| l.split('#').next().unwrap_or("").split_whitespace()) {
            match token {
                "channels" | "hidden" | "branches" | "reduce_w" | "reduce_b" | "expand_w" | "expand_b" => {
                    key = Some(token);
                    continue;
                }
                _ => {}
            }
            let k = key.ok_or_else(|| Error::Config(format!("gating value {token:?} before any key")))?;
            let bad = |_| Error::Config(format!("bad {k} value {token:?}"));
            match k {
                "channels" => channels = Some(token.parse::<usize>().map_err(bad)?),
                "hidden" => hidden = Some(token.parse::<usize>().map_err(bad)?),
                "branches" => branches = Some(token.parse::<usize>().map_err(bad)?),
                _ => {
                    let idx = ["reduce_w", "reduce_b", "expand_w", "expand_b"].iter().position(|x| *x == k).unwrap();
                    lists[idx].push(token.parse::<f64>().map_err(|_| Error::Config(format!("bad {k} value {token:?}")))?);
                }
            }
        }
        let need = |v: Option<usize>, name: &str| v.ok_or_else(|| Error::Config(format!("gating file lacks {name}")));
        let channels = need(channels, "channels")?;
        let branches = need(branches, "branches")?;
        let [reduce_w, reduce_b, expand_w, expand_b] = lists;
        if let Some(h) = hidden {
            if h != reduce_b.len() {
                return Err(Error::Config(format!("hidden = {h} but reduce_b has {} values", reduce_b.len())));
            }
        }
        GatingParams::new(channels, branches, reduce_w, reduce_b, expand_w, expand_b)
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Global average pool, affine + ReLU, affine + sigmoid.
pub fn gate_weights(fg: &FeatureGrid, params: &GatingParams) -> Result<FusionWeights> {
    let c = fg.channels();
    if c != params.channels {
        return Err(Error::Usage(format!(
            "gating expects {} channels, grid has {c}",
            params.channels
        )));
    }
    let n = fg.dims().len();
    // Summing in sorted order makes the pool independent of pixel order.
    let mut column = Vec::with_capacity(n);
    let pooled: Vec<f64> = (0..c)
        .map(|k| {
            column.clear();
            column.extend(fg.data().iter().skip(k).step_by(c));
            column.sort_unstable_by(f64::total_cmp);
            column.iter().sum::<f64>() / n as f64
        })
        .collect();
    let hidden: Vec<f64> = (0..params.hidden)
        .map(|j| {
            let z = params.reduce_b[j] + (0..c).map(|i| pooled[i] * params.reduce_w[i * params.hidden + j]).sum::<f64>();
            z.max(0.0)
        })
        .collect();
    let w = (0..params.branches)
        .map(|k| {
            let z = params.expand_b[k]
                + (0..params.hidden).map(|j| hidden[j] * params.expand_w[j * params.branches + k]).sum::<f64>();
            sigmoid(z)
        })
        .collect();
    FusionWeights::new(w)
}

/// Channel concatenation with block `k` equal to `ω_k · V_k`.
pub fn saf_fuse(branches: &[FeatureGrid], weights: &FusionWeights) -> Result<FeatureGrid> {
    let first = branches.first().ok_or_else(|| Error::Usage("nothing to fuse".into()))?;
    if weights.len() != branches.len() {
        return Err(Error::Usage(format!(
            "{} weights for {} branches",
            weights.len(),
            branches.len()
        )));
    }
    let (dims, c) = (first.dims(), first.channels());
    if branches.iter().any(|b| b.dims() != dims || b.channels() != c) {
        return Err(Error::Usage("branch grids differ in shape".into()));
    }
    let k = branches.len();
    let mut data = Vec::with_capacity(dims.len() * k * c);
    for p in 0..dims.len() {
        for (b, &w) in branches.iter().zip(weights.as_slice()) {
            data.extend(b.data()[p * c..(p + 1) * c].iter().map(|x| w * x));
        }
    }
    Grid::new(dims, k * c, data)
}

/// Runs every branch and fuses `[fg, branch_1, …]` with gated weights.
pub fn savt_forward(
    fg: &FeatureGrid,
    specs: &[BranchSpec],
    gating: &GatingParams,
    interp: Interpolation,
) -> Result<FeatureGrid> {
    if gating.branches != specs.len() + 1 {
        return Err(Error::Usage(format!(
            "gating produces {} weights for {} branches",
            gating.branches,
            specs.len() + 1
        )));
    }
    let weights = gate_weights(fg, gating)?;
    savt_forward_weighted(fg, specs, &weights, interp)
}

/// [`savt_forward`] with weights supplied directly.
pub fn savt_forward_weighted(
    fg: &FeatureGrid,
    specs: &[BranchSpec],
    weights: &FusionWeights,
    interp: Interpolation,
) -> Result<FeatureGrid> {
    check_finite(fg)?;
    let mut branches = vec![fg.clone()];
    branches.extend(
        specs
            .par_iter()
            .map(|s| run_branch(fg, s, interp))
            .collect::<Result<Vec<_>>>()?,
    );
    saf_fuse(&branches, weights)
}

/// Where the fusion weights of a run come from.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightSource {
    Fixed(Vec<f64>),
    GatingFile(PathBuf),
    /// Zero-initialized gate with the given reduction ratio.
    ZeroGate(usize),
}

/// Parsed `savt` configuration.
#[derive(Debug, Clone)]
pub struct SavtConfig {
    pub interp: Interpolation,
    pub specs: Vec<BranchSpec>,
    pub weights: WeightSource,
}

impl Default for SavtConfig {
    fn default() -> Self {
        Self { interp: Interpolation::Bilinear, specs: default_specs(), weights: WeightSource::Fixed(vec![1.0; 4]) }
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| Error::Config(format!("{key}: bad number {t:?}"))))
        .collect()
}

/// Parses a Cartesian triple `x,y,z` and normalizes it.
pub fn parse_center(text: &str) -> Result<UnitVector3> {
    let v = parse_list("center", text)?;
    match v[..] {
        [x, y, z] => UnitVector3::normalize(x, y, z),
        _ => Err(Error::Config(format!("center needs three components, got {text:?}"))),
    }
}

impl SavtConfig {
    /// `key = value` lines, `#` comments. Keys: `interp`, `horizontal` and
    /// `vertical` (degrees), `zoom` (factors, each optionally `rho@x,y,z`),
    /// `zoom_center`, `gating` (parameter file), `reduction`, `weights`.
    /// Listing any branch key replaces the default branch set.
    pub fn parse(text: &str) -> Result<Self> {
        let mut interp = Interpolation::Bilinear;
        let mut horizontal = None;
        let mut vertical = None;
        let mut zoom: Option<Vec<(Option<UnitVector3>, f64)>> = None;
        let mut center = UnitVector3::SOUTH;
        let mut gating = None;
        let mut reduction = None;
        let mut fixed = None;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            match key {
                "interp" => interp = value.parse()?,
                "horizontal" => horizontal = Some(parse_list(key, value)?),
                "vertical" => vertical = Some(parse_list(key, value)?),
                "zoom" => {
                    let mut items = Vec::new();
                    for t in value.split_whitespace() {
                        let (rho, c) = match t.split_once('@') {
                            Some((r, c)) => (r, Some(parse_center(c)?)),
                            None => (t, None),
                        };
                        let rho = rho.trim_end_matches(',');
                        items.push((c, rho.parse().map_err(|_| Error::Config(format!("zoom: bad factor {rho:?}")))?));
                    }
                    zoom = Some(items);
                }
                "zoom_center" => center = parse_center(value)?,
                "gating" => gating = Some(PathBuf::from(value)),
                "reduction" => {
                    reduction = Some(value.parse::<usize>().map_err(|_| Error::Config(format!("bad reduction {value:?}")))?)
                }
                "weights" => fixed = Some(parse_list(key, value)?),
                _ => return Err(Error::Config(format!("line {}: unknown key {key:?}", n + 1))),
            }
        }
        let specs = if horizontal.is_none() && vertical.is_none() && zoom.is_none() {
            let mut specs = default_specs();
            specs[2] = BranchSpec::zoom(center, &DEFAULT_ZOOM_FACTORS)?;
            specs
        } else {
            let mut specs = Vec::new();
            let rad = |v: Vec<f64>| v.into_iter().map(f64::to_radians).collect::<Vec<_>>();
            if let Some(h) = horizontal.filter(|h| !h.is_empty()) {
                specs.push(BranchSpec::horizontal(&rad(h))?);
            }
            if let Some(v) = vertical.filter(|v| !v.is_empty()) {
                specs.push(BranchSpec::vertical(&rad(v))?);
            }
            if let Some(z) = zoom.filter(|z| !z.is_empty()) {
                let params = z
                    .into_iter()
                    .map(|(c, rho)| BranchParam::Zoom { center: c.unwrap_or(center), rho })
                    .collect();
                specs.push(BranchSpec::new(BranchKind::Zoom, params)?);
            }
            specs
        };
        let weights = match (fixed, gating) {
            (Some(_), Some(_)) => return Err(Error::Config("give either weights or gating, not both".into())),
            (Some(w), None) => WeightSource::Fixed(w),
            (None, Some(p)) => WeightSource::GatingFile(p),
            (None, None) => match reduction {
                Some(r) => WeightSource::ZeroGate(r),
                None => WeightSource::Fixed(vec![1.0; specs.len() + 1]),
            },
        };
        if let WeightSource::Fixed(w) = &weights {
            if w.len() != specs.len() + 1 {
                return Err(Error::Config(format!("{} weights for {} branches", w.len(), specs.len() + 1)));
            }
        }
        Ok(Self { interp, specs, weights })
    }
}
