//! Batch front end: `transform`, `viewport`, `stats`, `eval` and `savt`.
//!
//! Every subcommand processes a list of files (directories expand to their
//! matching entries, sorted by name). Per-file failures are reported on
//! stderr; the exit status is 0 when all items succeed, or with
//! `--keep-going` when at least one does.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fusion::{
    gate_weights, parse_center, savt_forward_weighted, FusionWeights, GatingParams, SavtConfig, WeightSource,
};
use crate::geometry::{sphere_to_erp, SphericalPoint, UnitVector3};
use crate::io::{self, display_name, fmt_g};
use crate::metrics::{attribute_curves, evaluate_pair, MetricsReport, WeightedFOptions, METRIC_VERSIONS};
use crate::mobius::MobiusTransform;
use crate::remap::{build_remap_field, warp_image, Interpolation};
use crate::stats::{dataset_histograms, region_stats, Attribute, RegionStats, SaliencyMask};
use crate::viewport::{extract_viewport, ViewportSpec};

/// Exit status for failed items.
pub const EXIT_FAILURE: i32 = 1;
/// Exit status for invalid options or configuration.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "sphereview", version, about = "Spherical view transforms, 360° mask statistics and saliency evaluation")]
pub struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = "SPHEREVIEW_JOBS", default_value_t = 0)]
    pub jobs: usize,
    /// Continue past failing items; succeed if at least one item succeeds.
    #[arg(long, global = true)]
    pub keep_going: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Warp ERP images by a composed rotation/zoom view transform.
    Transform(TransformArgs),
    /// Cut perspective viewports from ERP images.
    Viewport(ViewportArgs),
    /// Per-mask statistics and dataset histograms.
    Stats(StatsArgs),
    /// Score predictions against ground-truth masks.
    Eval(EvalArgs),
    /// Run view-transformer branches and fusion on feature-grid files.
    Savt(SavtArgs),
}

/// Zoom factor with an optional `@x,y,z` center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoomArg {
    pub rho: f64,
    pub center: Option<UnitVector3>,
}

fn parse_zoom(s: &str) -> std::result::Result<ZoomArg, String> {
    let (rho, center) = match s.split_once('@') {
        Some((r, c)) => (r, Some(parse_center(c).map_err(|e| e.to_string())?)),
        None => (s, None),
    };
    let rho: f64 = rho.trim().parse().map_err(|_| format!("bad zoom factor {rho:?}"))?;
    Ok(ZoomArg { rho, center })
}

fn parse_unit(s: &str) -> std::result::Result<UnitVector3, String> {
    parse_center(s).map_err(|e| e.to_string())
}

fn parse_size(s: &str) -> std::result::Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let w: usize = w.parse().map_err(|_| format!("bad width {w:?}"))?;
    let h: usize = h.parse().map_err(|_| format!("bad height {h:?}"))?;
    if w == 0 || h == 0 {
        return Err(format!("empty size {s:?}"));
    }
    Ok((w, h))
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    /// ERP images or directories of PNGs.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(short, long)]
    pub out_dir: PathBuf,
    /// Rotate about the polar axis by DEG degrees.
    #[arg(long, value_name = "DEG", allow_negative_numbers = true, action = clap::ArgAction::Append)]
    pub rotate_h: Vec<f64>,
    /// Rotate about (0,1,0) by DEG degrees.
    #[arg(long, value_name = "DEG", allow_negative_numbers = true, action = clap::ArgAction::Append)]
    pub rotate_v: Vec<f64>,
    /// Zoom by RHO about --center, or about x,y,z when written RHO@x,y,z.
    #[arg(long, value_name = "RHO", value_parser = parse_zoom, action = clap::ArgAction::Append)]
    pub zoom: Vec<ZoomArg>,
    /// Default zoom center as a Cartesian triple.
    #[arg(long, value_parser = parse_unit, allow_hyphen_values = true, default_value = "0,0,-1")]
    pub center: UnitVector3,
    /// Separates steps on the command line; steps apply in the order given.
    #[arg(long, action = clap::ArgAction::Count)]
    pub then: u8,
    /// Steps as `h:DEG;v:DEG;zoom:RHO[@x,y,z]`, applied after the flag steps.
    #[arg(long, allow_hyphen_values = true)]
    pub compose: Option<String>,
    #[arg(long, default_value = "bilinear")]
    pub interp: Interpolation,
}

#[derive(Debug, Args)]
pub struct ViewportArgs {
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(short, long)]
    pub out_dir: PathBuf,
    /// Viewpoint longitude in degrees.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub lon: f64,
    /// Viewpoint latitude in degrees.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub lat: f64,
    #[arg(long, default_value_t = 90.0)]
    pub fovh: f64,
    #[arg(long, default_value_t = 90.0)]
    pub fovv: f64,
    /// Output size WxH.
    #[arg(long, value_parser = parse_size, default_value = "512x512")]
    pub size: (usize, usize),
    #[arg(long, default_value = "bilinear")]
    pub interp: Interpolation,
    /// Check that the center pixel samples the viewpoint exactly.
    #[arg(long)]
    pub self_test: bool,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Mask PNGs or directories.
    pub inputs: Vec<PathBuf>,
    /// Per-image CSV.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Directory for histogram CSVs (plain and cumulative per attribute).
    #[arg(long)]
    pub hist_dir: Option<PathBuf>,
    /// Resize masks (nearest) to WxH first.
    #[arg(long, value_parser = parse_size)]
    pub resize: Option<(usize, usize)>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory of predictions.
    #[arg(long)]
    pub pred: PathBuf,
    /// Directory of ground-truth masks.
    #[arg(long)]
    pub gt: PathBuf,
    /// Per-image CSV.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Aggregate CSV.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Stats CSV to join on for attribute curves.
    #[arg(long)]
    pub attrs: Option<PathBuf>,
    #[arg(long, default_value = "distortion")]
    pub attr: Attribute,
    /// Score column for curves.
    #[arg(long, default_value = "w_f_beta")]
    pub metric: String,
    #[arg(long, default_value_t = 50)]
    pub window: usize,
    /// Curve CSV (required with --attrs).
    #[arg(long)]
    pub curve: Option<PathBuf>,
    /// Ignore the horizontal seam in weighted-F distances and filtering.
    #[arg(long)]
    pub planar_distances: bool,
}

#[derive(Debug, Args)]
pub struct SavtArgs {
    /// Feature-grid files or directories of `.svfg` files.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(short, long)]
    pub out_dir: PathBuf,
    /// Branch and gating configuration; defaults apply without it.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match Cli::command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return EXIT_USAGE;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return EXIT_USAGE;
        }
    };
    let outcome = pool.install(|| match &cli.command {
        Command::Transform(a) => {
            let sub = matches.subcommand_matches("transform").expect("transform matched");
            cmd_transform(a, sub)
        }
        Command::Viewport(a) => cmd_viewport(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Savt(a) => cmd_savt(a),
    });
    match outcome {
        Ok(report) => report.exit_code(cli.keep_going),
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

/// Per-item success and failure counts of one command.
#[derive(Debug, Default, Clone, Copy)]
struct Report {
    ok: usize,
    failed: usize,
}

impl Report {
    fn exit_code(self, keep_going: bool) -> i32 {
        if self.failed == 0 || (keep_going && self.ok > 0) {
            0
        } else {
            EXIT_FAILURE
        }
    }

    fn record<T>(&mut self, label: &str, r: &Result<T>) {
        match r {
            Ok(_) => self.ok += 1,
            Err(e) => {
                self.failed += 1;
                eprintln!("error: {label}: {e}");
            }
        }
    }
}

/// Expands directories into their files with extension `ext`, sorted.
fn collect_inputs(inputs: &[PathBuf], ext: &str) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| Error::io(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && f.extension().is_some_and(|x| x.eq_ignore_ascii_case(ext)))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn output_path(dir: &Path, input: &Path, ext: &str) -> PathBuf {
    let stem = input.file_stem().map(|s| s.to_owned()).unwrap_or_else(|| "out".into());
    dir.join(stem).with_extension(ext)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file))
}

fn finish(mut w: csv::Writer<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// One view-transform step of `transform`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Step {
    RotateH(f64),
    RotateV(f64),
    Zoom(ZoomArg),
}

impl Step {
    fn transform(&self, default_center: &UnitVector3) -> Result<MobiusTransform> {
        match *self {
            Step::RotateH(d) => MobiusTransform::rotation(&UnitVector3::Z, d.to_radians()),
            Step::RotateV(d) => MobiusTransform::rotation(&UnitVector3::Y, d.to_radians()),
            Step::Zoom(z) => MobiusTransform::zoom_about(z.center.as_ref().unwrap_or(default_center), z.rho),
        }
    }
}

/// Parses `h:DEG;v:DEG;zoom:RHO[@x,y,z]`.
pub fn parse_compose(text: &str) -> Result<Vec<Step>> {
    text.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            let (kind, value) = s
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("compose step {s:?} lacks ':'")))?;
            let num = |v: &str| v.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad number in {s:?}")));
            match kind.trim() {
                "h" => Ok(Step::RotateH(num(value)?)),
                "v" => Ok(Step::RotateV(num(value)?)),
                "zoom" => Ok(Step::Zoom(parse_zoom(value).map_err(Error::Config)?)),
                k => Err(Error::Config(format!("unknown compose step {k:?}"))),
            }
        })
        .collect()
}

/// Flag steps in command-line order followed by `--compose` steps.
fn transform_steps(args: &TransformArgs, m: &ArgMatches) -> Result<Vec<Step>> {
    let mut indexed: Vec<(usize, Step)> = Vec::new();
    let idx = |id: &str| m.indices_of(id).map(|i| i.collect::<Vec<_>>()).unwrap_or_default();
    indexed.extend(idx("rotate_h").into_iter().zip(&args.rotate_h).map(|(i, &d)| (i, Step::RotateH(d))));
    indexed.extend(idx("rotate_v").into_iter().zip(&args.rotate_v).map(|(i, &d)| (i, Step::RotateV(d))));
    indexed.extend(idx("zoom").into_iter().zip(&args.zoom).map(|(i, &z)| (i, Step::Zoom(z))));
    indexed.sort_by_key(|(i, _)| *i);
    let mut steps: Vec<Step> = indexed.into_iter().map(|(_, s)| s).collect();
    if let Some(c) = &args.compose {
        steps.extend(parse_compose(c)?);
    }
    Ok(steps)
}

/// Composite transform applying `steps` in order.
pub fn compose_steps(steps: &[Step], default_center: &UnitVector3) -> Result<MobiusTransform> {
    let mut f = MobiusTransform::identity();
    for s in steps {
        f = s.transform(default_center)?.compose(&f);
    }
    Ok(f)
}

fn cmd_transform(args: &TransformArgs, m: &ArgMatches) -> Result<Report> {
    let steps = transform_steps(args, m)?;
    if steps.is_empty() {
        return Err(Error::Config("no transform steps given".into()));
    }
    let f = compose_steps(&steps, &args.center)?;
    let files = collect_inputs(&args.inputs, "png")?;
    ensure_dir(&args.out_dir)?;
    let results: Vec<Result<()>> = files
        .par_iter()
        .map(|p| {
            let img = io::load_image(p)?;
            if !img.dims().is_erp() {
                return Err(Error::Config(format!("not a 2:1 panorama ({}x{})", img.width(), img.height())));
            }
            let field = build_remap_field(&f, img.dims());
            let out = warp_image(&img, &field, args.interp)?;
            io::save_image(&output_path(&args.out_dir, p, "png"), &out)
        })
        .collect();
    let mut report = Report::default();
    for (p, r) in files.iter().zip(&results) {
        report.record(&p.display().to_string(), r);
    }
    Ok(report)
}

fn cmd_viewport(args: &ViewportArgs) -> Result<Report> {
    let spec = ViewportSpec::new(
        SphericalPoint::from_degrees(args.lon, args.lat),
        args.fovh.to_radians(),
        args.fovv.to_radians(),
        args.size.0,
        args.size.1,
    )?;
    let files = collect_inputs(&args.inputs, "png")?;
    ensure_dir(&args.out_dir)?;
    let results: Vec<Result<()>> = files
        .par_iter()
        .map(|p| {
            let img = io::load_image(p)?;
            let out = extract_viewport(&img, &spec, args.interp)?;
            if args.self_test {
                let (r, c) = spec.center_pixel();
                let at = sphere_to_erp(spec.viewpoint, &img.dims());
                for k in 0..img.channels() {
                    let want = img.sample(at, k, args.interp);
                    if out.get(r, c, k) != want {
                        return Err(Error::Usage(format!(
                            "self-test: center pixel channel {k} is {} but the viewpoint samples {want}",
                            out.get(r, c, k)
                        )));
                    }
                }
            }
            io::save_image(&output_path(&args.out_dir, p, "png"), &out)
        })
        .collect();
    let mut report = Report::default();
    for (p, r) in files.iter().zip(&results) {
        report.record(&p.display().to_string(), r);
    }
    Ok(report)
}

pub const STATS_HEADER: [&str; 7] =
    ["path", "fg_ratio", "distortion", "edge_disc", "max_hfov_deg", "max_vfov_deg", "n_components"];

fn load_stats_mask(path: &Path, resize: Option<(usize, usize)>) -> Result<SaliencyMask> {
    let m = io::load_mask(path)?;
    match resize {
        Some((w, h)) => io::resize_mask(&m, w, h),
        None => Ok(m),
    }
}

fn cmd_stats(args: &StatsArgs) -> Result<Report> {
    let files = collect_inputs(&args.inputs, "png")?;
    let results: Vec<Result<RegionStats>> = files
        .par_iter()
        .map(|p| load_stats_mask(p, args.resize).map(|m| region_stats(&m)))
        .collect();
    let mut report = Report::default();
    let mut w = csv_writer(&args.out)?;
    w.write_record(STATS_HEADER)?;
    let mut ok_stats = Vec::new();
    for (p, r) in files.iter().zip(&results) {
        report.record(&p.display().to_string(), r);
        if let Ok(s) = r {
            w.write_record([
                display_name(p),
                fmt_g(s.fg_ratio),
                s.distortion.map(fmt_g).unwrap_or_default(),
                u8::from(s.edge_discontinuous).to_string(),
                fmt_g(s.max_hfov),
                fmt_g(s.max_vfov),
                s.n_components.to_string(),
            ])?;
            ok_stats.push(*s);
        }
    }
    finish(w, &args.out)?;
    if let Some(dir) = &args.hist_dir {
        ensure_dir(dir)?;
        for attr in Attribute::ALL {
            for cumulative in [false, true] {
                let name = if cumulative {
                    format!("hist_{}_cumulative.csv", attr.name())
                } else {
                    format!("hist_{}.csv", attr.name())
                };
                let path = dir.join(name);
                let mut w = csv_writer(&path)?;
                w.write_record(["bin_lo", "bin_hi", "percent"])?;
                for b in dataset_histograms(&ok_stats, attr, attr.default_bins(), cumulative)? {
                    w.write_record([fmt_g(b.lo), fmt_g(b.hi), fmt_g(b.percent)])?;
                }
                finish(w, &path)?;
            }
        }
    }
    Ok(report)
}

pub const EVAL_HEADER: [&str; 7] = ["path", "mae", "f_beta", "w_f_beta", "max_f", "s_measure", "e_measure"];
const METRIC_NAMES: [&str; 6] = ["mae", "f_beta", "w_f_beta", "max_f", "s_measure", "e_measure"];

fn stem_of(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn eval_one(pred: &Path, gt: &Path, opts: &WeightedFOptions) -> Result<Option<MetricsReport>> {
    let g = io::load_mask(gt)?;
    let s = io::fit_prediction(io::load_prediction(pred)?, g.dims())?;
    evaluate_pair(&s, &g, opts)
}

fn cmd_eval(args: &EvalArgs) -> Result<Report> {
    let metric_idx = METRIC_NAMES
        .iter()
        .position(|m| *m == args.metric)
        .ok_or_else(|| Error::Config(format!("unknown metric {:?}", args.metric)))?;
    if args.attrs.is_some() != args.curve.is_some() {
        return Err(Error::Config("--attrs and --curve go together".into()));
    }
    if args.window == 0 {
        return Err(Error::Config("--window must be positive".into()));
    }
    let opts = WeightedFOptions { planar: args.planar_distances, ..Default::default() };
    let gts = collect_inputs(std::slice::from_ref(&args.gt), "png")?;
    let preds: HashMap<String, PathBuf> =
        collect_inputs(std::slice::from_ref(&args.pred), "png")?.into_iter().map(|p| (stem_of(&p), p)).collect();
    let results: Vec<Result<Option<MetricsReport>>> = gts
        .par_iter()
        .map(|g| match preds.get(&stem_of(g)) {
            Some(p) => eval_one(p, g, &opts),
            None => Err(Error::Usage("no prediction with this name".into())),
        })
        .collect();

    let mut report = Report::default();
    let mut w = csv_writer(&args.out)?;
    w.write_record(EVAL_HEADER)?;
    let mut valid: Vec<(String, MetricsReport)> = Vec::new();
    let mut excluded = 0usize;
    for (g, r) in gts.iter().zip(&results) {
        report.record(&g.display().to_string(), r);
        match r {
            Ok(Some(m)) => {
                let mut row = vec![display_name(g)];
                row.extend(m.as_array().iter().map(|&x| fmt_g(x)));
                w.write_record(&row)?;
                valid.push((stem_of(g), *m));
            }
            Ok(None) => {
                eprintln!("warning: {}: empty ground truth, excluded", g.display());
                let mut row = vec![display_name(g)];
                row.extend(std::iter::repeat_n(String::new(), 6));
                w.write_record(&row)?;
                excluded += 1;
            }
            Err(_) => excluded += 1,
        }
    }
    finish(w, &args.out)?;

    if let Some(path) = &args.summary {
        let mut sums = [0.0; 6];
        for (_, m) in &valid {
            for (s, x) in sums.iter_mut().zip(m.as_array()) {
                *s += x;
            }
        }
        let n = valid.len();
        let mut w = csv_writer(path)?;
        let mut header = vec!["metric_version", "n_valid", "n_excluded"];
        header.extend(METRIC_NAMES);
        w.write_record(&header)?;
        let mut row = vec![METRIC_VERSIONS.to_string(), n.to_string(), excluded.to_string()];
        row.extend(sums.iter().map(|&s| if n == 0 { String::new() } else { fmt_g(s / n as f64) }));
        w.write_record(&row)?;
        finish(w, path)?;
    }

    if let (Some(attrs), Some(curve)) = (&args.attrs, &args.curve) {
        let table = read_attribute_table(attrs, args.attr)?;
        let mut samples = Vec::new();
        for (stem, m) in &valid {
            match table.get(stem) {
                Some(Some(a)) => samples.push((*a, m.as_array()[metric_idx])),
                Some(None) => {}
                None => eprintln!("warning: {stem}: no row in {}", attrs.display()),
            }
        }
        let mut w = csv_writer(curve)?;
        w.write_record(["rank", "attr", "score_smoothed"])?;
        for p in attribute_curves(&samples, args.window)? {
            w.write_record([p.rank.to_string(), fmt_g(p.attr), fmt_g(p.score)])?;
        }
        finish(w, curve)?;
    }
    Ok(report)
}

/// Attribute column of a stats CSV keyed by file stem; empty cells map to
/// `None`.
fn read_attribute_table(path: &Path, attr: Attribute) -> Result<HashMap<String, Option<f64>>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::format(path, format!("missing column {name:?}")))
    };
    let path_col = col("path")?;
    let attr_col = col(attr.name())?;
    let mut out = HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let cell = rec.get(attr_col).unwrap_or("").trim();
        let value = if cell.is_empty() {
            None
        } else {
            Some(cell.parse::<f64>().map_err(|_| Error::format(path, format!("bad value {cell:?}")))?)
        };
        out.insert(stem_of(Path::new(rec.get(path_col).unwrap_or(""))), value);
    }
    Ok(out)
}

fn cmd_savt(args: &SavtArgs) -> Result<Report> {
    let cfg = match &args.config {
        Some(p) => SavtConfig::parse(&fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?,
        None => SavtConfig::default(),
    };
    let gating = match &cfg.weights {
        WeightSource::GatingFile(g) => {
            let base = args.config.as_ref().and_then(|c| c.parent()).unwrap_or(Path::new(""));
            let path = base.join(g);
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            Some(text.parse::<GatingParams>()?)
        }
        _ => None,
    };
    let files = collect_inputs(&args.inputs, "svfg")?;
    ensure_dir(&args.out_dir)?;
    let k = cfg.specs.len() + 1;
    let results: Vec<Result<()>> = files
        .iter()
        .map(|p| {
            let fg = io::read_feature_grid(p)?;
            let weights = match (&cfg.weights, &gating) {
                (WeightSource::Fixed(w), _) => FusionWeights::new(w.clone())?,
                (WeightSource::ZeroGate(r), _) => gate_weights(&fg, &GatingParams::zeros(fg.channels(), k, *r)?)?,
                (WeightSource::GatingFile(_), Some(g)) => {
                    if g.branches() != k {
                        return Err(Error::Config(format!("gating has {} outputs for {k} branches", g.branches())));
                    }
                    gate_weights(&fg, g)?
                }
                (WeightSource::GatingFile(_), None) => unreachable!("gating loaded above"),
            };
            let out = savt_forward_weighted(&fg, &cfg.specs, &weights, cfg.interp)?;
            io::write_feature_grid(&output_path(&args.out_dir, p, "svfg"), &out)
        })
        .collect();
    let mut report = Report::default();
    for (p, r) in files.iter().zip(&results) {
        report.record(&p.display().to_string(), r);
    }
    Ok(report)
}
