//! Run orchestration: design-point optimization, fixed-mask distance sweeps,
//! the reduction experiment, and CSV/SVG output.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::baselines::{continuous_reference, fresnel_zone, passive, successive_refinement};
use crate::channel::{
    bs_ris_channel, channel_gain_db, composite_channel_from_coefficients, direct_channel,
    ris_ue_channel, ChannelSet, ComplexMatrix, PhaseConfig, PhaseLevel, C64, GAIN_SENTINEL_DB,
};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::ising::{
    absorb_field_aux_spin, build_binary_ising, build_quaternary_ising,
    build_quaternary_ising_literal, decode, quantize_couplings, IsingModel, SpinConfig,
    DEFAULT_DENSE_BUDGET_BYTES,
};
use crate::reduction::{reduce, ReductionSummary};
use crate::scene::{build_geometry, SceneConfig, SceneGeometry};
use crate::solvers::{
    solve_bifurcation, solve_exhaustive, solve_sa, BifurcationParams, SaParams, SolveReport,
    TracePoint,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    CimSa,
    CimBif,
    Exhaustive,
    Successive,
    Fresnel,
    Passive,
    Continuous,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::CimSa,
        Method::CimBif,
        Method::Exhaustive,
        Method::Successive,
        Method::Fresnel,
        Method::Passive,
        Method::Continuous,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Method::CimSa => "cim-sa",
            Method::CimBif => "cim-bif",
            Method::Exhaustive => "exhaustive",
            Method::Successive => "successive",
            Method::Fresnel => "fresnel",
            Method::Passive => "passive",
            Method::Continuous => "continuous",
        }
    }

    /// Methods that go through an Ising model.
    pub fn is_ising(self) -> bool {
        matches!(self, Method::CimSa | Method::CimBif | Method::Exhaustive)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Method::ALL.iter().map(|m| m.label()).collect();
                format!("unknown method '{s}' (expected one of {})", names.join(", "))
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimizeOptions {
    pub method: Method,
    pub level: PhaseLevel,
    pub seed: u64,
    pub reduce: bool,
    pub reduce_threshold_scale: f64,
    pub quantize_bits: Option<u32>,
    /// Use the unnormalized `{±1 ± j}` quaternary build.
    pub literal_quaternary: bool,
    pub sa: SaParams,
    pub bifurcation: BifurcationParams,
    pub refinement_sweeps: usize,
    pub continuous_sweeps: usize,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            method: Method::CimSa,
            level: PhaseLevel::Binary,
            seed: 0,
            reduce: false,
            reduce_threshold_scale: 1.0,
            quantize_bits: None,
            literal_quaternary: false,
            sa: SaParams::default(),
            bifurcation: BifurcationParams::default(),
            refinement_sweeps: 100,
            continuous_sweeps: 1000,
        }
    }
}

/// A design-point optimization result.
#[derive(Clone, Debug)]
pub struct Optimized {
    pub method: Method,
    /// Discrete mask; `None` for the continuous reference.
    pub phases: Option<PhaseConfig>,
    pub coefficients: Vec<C64>,
    pub gain_db: f64,
    pub report: Option<SolveReport>,
    pub reduction: Option<ReductionSummary>,
    pub wall_time: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OptimizeSummary {
    pub method: Method,
    pub level: usize,
    pub n_ris: usize,
    pub n_bs: usize,
    pub los: bool,
    pub gain_db: f64,
    pub seed: u64,
    pub wall_time: f64,
    pub scene_hash: String,
    pub solver: Option<SolverSummary>,
    pub reduction: Option<ReductionSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverSummary {
    pub name: String,
    pub n_spins: usize,
    pub best_energy: f64,
    pub steps: usize,
    pub replicas: usize,
    pub wall_time: f64,
}

impl Optimized {
    pub fn summary(&self, cfg: &SceneConfig, opts: &OptimizeOptions) -> OptimizeSummary {
        OptimizeSummary {
            method: self.method,
            level: self.phases.as_ref().map_or(0, |p| p.level.count()),
            n_ris: cfg.n_ris(),
            n_bs: cfg.n_bs(),
            los: cfg.los_enabled,
            gain_db: self.gain_db,
            seed: opts.seed,
            wall_time: self.wall_time,
            scene_hash: scene_hash(cfg),
            solver: self.report.as_ref().map(|r| SolverSummary {
                name: r.solver_name.clone(),
                n_spins: r.best_spins.len(),
                best_energy: r.best_energy,
                steps: r.steps,
                replicas: r.replica_count,
                wall_time: r.wall_time,
            }),
            reduction: self.reduction.clone(),
        }
    }

    /// Per-element phase angles in radians.
    pub fn angles(&self) -> Vec<f64> {
        match &self.phases {
            Some(p) => p.angles(),
            None => self.coefficients.iter().map(|c| c.arg()).collect(),
        }
    }
}

/// SHA-256 of the canonical JSON form of the scene.
pub fn scene_hash(cfg: &SceneConfig) -> String {
    let json = serde_json::to_vec(cfg).expect("scene config serializes");
    Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
}

fn build_model(ch: &ChannelSet, opts: &OptimizeOptions) -> Result<IsingModel> {
    match opts.level {
        PhaseLevel::Binary => build_binary_ising(&ch.direct, &ch.cascade),
        PhaseLevel::Quaternary if opts.literal_quaternary => {
            build_quaternary_ising_literal(&ch.direct, &ch.cascade, DEFAULT_DENSE_BUDGET_BYTES)
        }
        PhaseLevel::Quaternary => build_quaternary_ising(&ch.direct, &ch.cascade),
    }
}

fn run_solver(model: &IsingModel, opts: &OptimizeOptions) -> Result<SolveReport> {
    match opts.method {
        Method::CimSa => solve_sa(
            model,
            &SaParams {
                seed: opts.seed,
                ..opts.sa.clone()
            },
        ),
        Method::CimBif => solve_bifurcation(
            model,
            &BifurcationParams {
                seed: opts.seed,
                ..opts.bifurcation.clone()
            },
        ),
        Method::Exhaustive => solve_exhaustive(model),
        other => Err(Error::InvalidParameter(format!("{other} is not an Ising solver"))),
    }
}

/// Solves `model` through the optional reduction and quantization stages
/// and returns a report scored on the full, unquantized model.
pub fn solve_ising(
    model: &IsingModel,
    opts: &OptimizeOptions,
) -> Result<(SolveReport, Option<ReductionSummary>)> {
    let reduction = if opts.reduce {
        Some(reduce(model, opts.reduce_threshold_scale)?)
    } else {
        None
    };
    let work = reduction.as_ref().map_or(model, |r| &r.reduced_model);
    let (report, spins) = match opts.quantize_bits {
        Some(bits) => {
            let aux = absorb_field_aux_spin(work);
            let quantized = quantize_couplings(&aux.model, bits)?;
            let report = run_solver(&quantized, opts)?;
            let spins = aux.normalize(report.best_spins.as_slice())?;
            (report, spins)
        }
        None => {
            let report = run_solver(work, opts)?;
            let spins = report.best_spins.clone();
            (report, spins)
        }
    };
    let full: SpinConfig = match &reduction {
        Some(r) => r.merge(spins.as_slice())?,
        None => spins,
    };
    let report = report.rescored(model, full)?;
    Ok((report, reduction.map(|r| r.summary())))
}

fn require_binary(method: Method, level: PhaseLevel) -> Result<()> {
    if level != PhaseLevel::Binary {
        return Err(Error::Config(format!(
            "{method} is defined for binary phases only (level 2)"
        )));
    }
    Ok(())
}

/// Optimizes the mask at the scenario's UE position.
pub fn optimize(cfg: &SceneConfig, opts: &OptimizeOptions) -> Result<Optimized> {
    let geo = build_geometry(cfg)?;
    let ch = ChannelSet::synthesize(cfg, &geo)?;
    optimize_with(cfg, &geo, &ch, opts)
}

pub fn optimize_with(
    cfg: &SceneConfig,
    geo: &SceneGeometry,
    ch: &ChannelSet,
    opts: &OptimizeOptions,
) -> Result<Optimized> {
    let started = Instant::now();
    let n = ch.n_ris();
    let mut report = None;
    let mut reduction = None;
    let phases = match opts.method {
        Method::Passive => {
            require_binary(opts.method, opts.level)?;
            Some(passive(n))
        }
        Method::Fresnel => {
            require_binary(opts.method, opts.level)?;
            Some(fresnel_zone(geo, cfg.wavelength()))
        }
        Method::Successive => Some(successive_refinement(
            &ch.direct,
            &ch.cascade,
            opts.level,
            &PhaseConfig::zeros(opts.level, n),
            opts.refinement_sweeps,
        )?),
        Method::Continuous => None,
        Method::CimSa | Method::CimBif | Method::Exhaustive => {
            let model = build_model(ch, opts)?;
            let (r, red) = solve_ising(&model, opts)?;
            let phases = decode(&model, r.best_spins.as_slice())?;
            report = Some(r);
            reduction = red;
            Some(phases)
        }
    };
    let coefficients = match &phases {
        Some(p) => p.coefficients(),
        None => continuous_reference(&ch.direct, &ch.cascade, opts.continuous_sweeps)?.coefficients,
    };
    let h = composite_channel_from_coefficients(&ch.direct, &ch.cascade, &coefficients)?;
    let gain_db = channel_gain_db(&h);
    if gain_db.is_nan() {
        return Err(Error::Numerical("channel gain evaluated to NaN".into()));
    }
    Ok(Optimized {
        method: opts.method,
        phases,
        coefficients,
        gain_db,
        report,
        reduction,
        wall_time: started.elapsed().as_secs_f64(),
    })
}

// ---------------------------------------------------------------------------
// sweeps

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DistanceRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for DistanceRange {
    fn default() -> Self {
        Self {
            start: 0.0,
            stop: 100.0,
            step: 0.25,
        }
    }
}

impl DistanceRange {
    /// Inclusive grid `start, start + step, …, ≤ stop`.
    pub fn points(&self) -> Result<Vec<f64>> {
        let DistanceRange { start, stop, step } = *self;
        if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step <= 0.0 || stop < start {
            return Err(Error::Config(format!(
                "empty or invalid distance range {start}..{stop} step {step}"
            )));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|k| start + k as f64 * step).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepColumn {
    pub name: String,
    pub gains_db: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MethodRecord {
    pub method: Method,
    pub design_gain_db: f64,
    pub wall_time: f64,
    pub solver: Option<SolverSummary>,
    pub reduction: Option<ReductionSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepMetadata {
    pub scene_hash: String,
    pub n_ris: usize,
    pub n_bs: usize,
    pub los: bool,
    pub level: usize,
    pub seed: u64,
    pub range: DistanceRange,
    pub methods: Vec<MethodRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub distances: Vec<f64>,
    pub columns: Vec<SweepColumn>,
    pub metadata: Option<SweepMetadata>,
}

/// UE position for a probe distance: the design point moved along y.
pub fn probe_position(cfg: &SceneConfig, d: f64) -> Vec3 {
    Vec3::new(cfg.ue_position.x, d, cfg.ue_position.z)
}

fn probe_gain(
    cfg: &SceneConfig,
    geo: &SceneGeometry,
    bs_ris: &ComplexMatrix,
    coefficients: &[C64],
    ue: Vec3,
) -> Result<f64> {
    let lambda = cfg.wavelength();
    let mut h = if cfg.los_enabled {
        direct_channel(&geo.bs, ue, lambda)?
    } else {
        vec![C64::new(0.0, 0.0); bs_ris.cols()]
    };
    let f = ris_ue_channel(&geo.ris, ue, lambda, cfg.propagation_variant, cfg.aperture_model)?;
    for (n, (c, fn_)) in coefficients.iter().zip(&f).enumerate() {
        let scale = c.conj() * fn_;
        for (hk, g) in h.iter_mut().zip(bs_ris.row(n)) {
            *hk += scale * g;
        }
    }
    Ok(channel_gain_db(&h))
}

fn to_finite_db(gain: Result<f64>) -> Result<f64> {
    match gain {
        Ok(g) if g.is_nan() => Err(Error::Numerical("NaN gain in sweep".into())),
        Ok(g) if g.is_finite() => Ok(g),
        Ok(_) | Err(Error::DegenerateGeometry(_)) => Ok(GAIN_SENTINEL_DB),
        Err(e) => Err(e),
    }
}

/// Gain of a fixed mask at each probe distance, in distance order.
pub fn sweep_gains(
    cfg: &SceneConfig,
    geo: &SceneGeometry,
    bs_ris: &ComplexMatrix,
    coefficients: &[C64],
    distances: &[f64],
) -> Result<Vec<f64>> {
    if coefficients.len() != geo.ris.len() {
        return Err(Error::mismatch("mask length", geo.ris.len(), coefficients.len()));
    }
    distances
        .par_iter()
        .map(|&d| to_finite_db(probe_gain(cfg, geo, bs_ris, coefficients, probe_position(cfg, d))))
        .collect()
}

/// Sweeps one fixed mask over `range`.
pub fn run_sweep(cfg: &SceneConfig, coefficients: &[C64], range: DistanceRange) -> Result<SweepResult> {
    let distances = range.points()?;
    let geo = build_geometry(cfg)?;
    let bs_ris = bs_ris_channel(&geo.bs, &geo.ris, cfg.wavelength(), cfg.propagation_variant, cfg.aperture_model)?;
    let gains_db = sweep_gains(cfg, &geo, &bs_ris, coefficients, &distances)?;
    Ok(SweepResult {
        distances,
        columns: vec![SweepColumn {
            name: "mask".into(),
            gains_db,
        }],
        metadata: None,
    })
}

/// Optimizes each method at the design point, then sweeps its mask.
pub fn run_method_sweep(
    cfg: &SceneConfig,
    methods: &[Method],
    opts: &OptimizeOptions,
    range: DistanceRange,
) -> Result<(SweepResult, Vec<Optimized>)> {
    if methods.is_empty() {
        return Err(Error::Config("at least one method is required".into()));
    }
    let distances = range.points()?;
    let geo = build_geometry(cfg)?;
    let ch = ChannelSet::synthesize(cfg, &geo)?;
    let mut columns = Vec::with_capacity(methods.len());
    let mut runs = Vec::with_capacity(methods.len());
    for &method in methods {
        let run = optimize_with(cfg, &geo, &ch, &OptimizeOptions { method, ..opts.clone() })?;
        let gains_db = sweep_gains(cfg, &geo, &ch.bs_ris, &run.coefficients, &distances)?;
        columns.push(SweepColumn {
            name: method.label().to_string(),
            gains_db,
        });
        runs.push(run);
    }
    let metadata = SweepMetadata {
        scene_hash: scene_hash(cfg),
        n_ris: cfg.n_ris(),
        n_bs: cfg.n_bs(),
        los: cfg.los_enabled,
        level: opts.level.count(),
        seed: opts.seed,
        range,
        methods: runs
            .iter()
            .map(|r| {
                let s = r.summary(cfg, opts);
                MethodRecord {
                    method: r.method,
                    design_gain_db: r.gain_db,
                    wall_time: r.wall_time,
                    solver: s.solver,
                    reduction: s.reduction,
                }
            })
            .collect(),
    };
    Ok((
        SweepResult {
            distances,
            columns,
            metadata: Some(metadata),
        },
        runs,
    ))
}

// ---------------------------------------------------------------------------
// output

fn fmt6(x: f64) -> String {
    let x = if x.is_finite() { x } else { GAIN_SENTINEL_DB };
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

pub fn write_csv<W: Write>(result: &SweepResult, mut out: W) -> Result<()> {
    write!(out, "d_m")?;
    for c in &result.columns {
        write!(out, ",{}_db", c.name)?;
    }
    writeln!(out)?;
    for (i, d) in result.distances.iter().enumerate() {
        write!(out, "{}", fmt6(*d))?;
        for c in &result.columns {
            write!(out, ",{}", fmt6(c.gains_db[i]))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn parse_csv(text: &str) -> Result<SweepResult> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty CSV".into()))?;
    let mut names = header.split(',');
    if names.next() != Some("d_m") {
        return Err(Error::Parse("CSV header must start with d_m".into()));
    }
    let mut columns: Vec<SweepColumn> = names
        .map(|h| {
            h.strip_suffix("_db")
                .map(|n| SweepColumn {
                    name: n.to_string(),
                    gains_db: Vec::new(),
                })
                .ok_or_else(|| Error::Parse(format!("column '{h}' lacks the _db suffix")))
        })
        .collect::<Result<_>>()?;
    let mut distances = Vec::new();
    for (k, line) in lines.enumerate() {
        let values: Vec<f64> = line
            .split(',')
            .map(|v| v.parse::<f64>().map_err(|e| Error::Parse(format!("row {}: {e}", k + 1))))
            .collect::<Result<_>>()?;
        if values.len() != columns.len() + 1 {
            return Err(Error::Parse(format!("row {} has {} fields", k + 1, values.len())));
        }
        distances.push(values[0]);
        for (c, v) in columns.iter_mut().zip(&values[1..]) {
            c.gains_db.push(*v);
        }
    }
    Ok(SweepResult {
        distances,
        columns,
        metadata: None,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    Ok(BufWriter::new(file))
}

pub fn emit_csv(result: &SweepResult, path: impl AsRef<Path>) -> Result<()> {
    let mut w = create(path.as_ref())?;
    write_csv(result, &mut w)?;
    w.flush()?;
    Ok(())
}

const SVG_WIDTH: f64 = 800.0;
const SVG_HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 20.0;
const MARGIN_BOTTOM: f64 = 50.0;
const PALETTE: [&str; 7] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"];

fn nice_step(span: f64, target_ticks: f64) -> f64 {
    let raw = span / target_ticks;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm < 1.5 {
        1.0
    } else if norm < 3.0 {
        2.0
    } else if norm < 7.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Line chart of every column against distance; sentinel values are pinned
/// to the bottom edge.
pub fn write_svg<W: Write>(result: &SweepResult, mut out: W) -> Result<()> {
    let plot_w = SVG_WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = SVG_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let (x0, x1) = match (result.distances.first(), result.distances.last()) {
        (Some(&a), Some(&b)) if b > a => (a, b),
        (Some(&a), _) => (a - 0.5, a + 0.5),
        _ => (0.0, 1.0),
    };
    let finite = result
        .columns
        .iter()
        .flat_map(|c| c.gains_db.iter().copied())
        .filter(|g| g.is_finite() && *g > GAIN_SENTINEL_DB);
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), g| (lo.min(g), hi.max(g)));
    let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (-100.0, 0.0) };
    let y_step = nice_step((hi - lo).max(1.0), 6.0);
    let y0 = (lo / y_step).floor() * y_step;
    let y1 = ((hi / y_step).ceil() * y_step).max(y0 + y_step);
    let x_step = nice_step(x1 - x0, 8.0);
    let sx = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| MARGIN_TOP + (y1 - y.clamp(y0, y1)) / (y1 - y0) * plot_h;

    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}" font-family="sans-serif" font-size="12">"#
    )?;
    writeln!(out, r#"<rect x="0" y="0" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" fill="white"/>"#)?;
    let mut k = (x0 / x_step).ceil() as i64;
    while (k as f64) * x_step <= x1 + 1e-9 {
        let x = k as f64 * x_step;
        let px = sx(x);
        writeln!(
            out,
            r##"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="#dddddd"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            MARGIN_TOP,
            MARGIN_TOP + plot_h,
            MARGIN_TOP + plot_h + 18.0,
            x
        )?;
        k += 1;
    }
    let mut k = (y0 / y_step).round() as i64;
    while (k as f64) * y_step <= y1 + 1e-9 {
        let y = k as f64 * y_step;
        let py = sy(y);
        writeln!(
            out,
            r##"<line x1="{MARGIN_LEFT:.2}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            MARGIN_LEFT + plot_w,
            MARGIN_LEFT - 6.0,
            py + 4.0,
            y
        )?;
        k += 1;
    }
    writeln!(
        out,
        r#"<rect x="{MARGIN_LEFT:.2}" y="{MARGIN_TOP:.2}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="black"/>"#
    )?;
    writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">distance d (m)</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        SVG_HEIGHT - 10.0
    )?;
    writeln!(
        out,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">channel gain (dB)</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    )?;
    for (i, c) in result.columns.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = result
            .distances
            .iter()
            .zip(&c.gains_db)
            .map(|(&d, &g)| format!("{:.2},{:.2}", sx(d), sy(g)))
            .collect();
        writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        )?;
        let ly = MARGIN_TOP + 16.0 + 20.0 * i as f64;
        let lx = MARGIN_LEFT + plot_w + 12.0;
        writeln!(
            out,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 24.0,
            lx + 30.0,
            ly + 4.0,
            xml_escape(&c.name)
        )?;
    }
    writeln!(out, "</svg>")?;
    Ok(())
}

pub fn emit_svg(result: &SweepResult, path: impl AsRef<Path>) -> Result<()> {
    let mut w = create(path.as_ref())?;
    write_svg(result, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let mut w = create(path.as_ref())?;
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// `element,phase_rad` rows.
pub fn write_mask<W: Write>(run: &Optimized, mut out: W) -> Result<()> {
    writeln!(out, "element,phase_rad")?;
    for (n, a) in run.angles().iter().enumerate() {
        writeln!(out, "{n},{a:.9}")?;
    }
    Ok(())
}

/// `step,best_energy` rows.
pub fn write_trace<W: Write>(trace: &[TracePoint], mut out: W) -> Result<()> {
    writeln!(out, "step,best_energy")?;
    for p in trace {
        writeln!(out, "{},{:e}", p.step, p.best_energy)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// reduction experiment and benchmarks

#[derive(Clone, Debug, Serialize)]
pub struct ReductionExperiment {
    pub scene_hash: String,
    pub method: Method,
    pub seed: u64,
    pub n_full: usize,
    pub n_reduced: usize,
    pub removal_fraction: f64,
    pub threshold: f64,
    pub gain_full_db: f64,
    pub gain_reduced_db: f64,
    pub wall_time_full: f64,
    pub wall_time_reduced: f64,
}

/// Solves the binary model with and without reduction.
pub fn run_reduction_experiment(cfg: &SceneConfig, opts: &OptimizeOptions) -> Result<ReductionExperiment> {
    if !opts.method.is_ising() {
        return Err(Error::Config(format!(
            "reduction needs an Ising solver, got {}",
            opts.method
        )));
    }
    let geo = build_geometry(cfg)?;
    let ch = ChannelSet::synthesize(cfg, &geo)?;
    let base = OptimizeOptions {
        level: PhaseLevel::Binary,
        ..opts.clone()
    };
    let full = optimize_with(cfg, &geo, &ch, &OptimizeOptions { reduce: false, ..base.clone() })?;
    let reduced = optimize_with(cfg, &geo, &ch, &OptimizeOptions { reduce: true, ..base })?;
    let summary = reduced
        .reduction
        .clone()
        .expect("reduced run records its reduction");
    Ok(ReductionExperiment {
        scene_hash: scene_hash(cfg),
        method: opts.method,
        seed: opts.seed,
        n_full: summary.n_full,
        n_reduced: summary.n_reduced,
        removal_fraction: summary.removal_fraction,
        threshold: summary.threshold,
        gain_full_db: full.gain_db,
        gain_reduced_db: reduced.gain_db,
        wall_time_full: full.wall_time,
        wall_time_reduced: reduced.wall_time,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchRecord {
    pub method: Method,
    pub gain_db: f64,
    pub repeats: usize,
    pub mean_wall_time: f64,
    pub min_wall_time: f64,
}

/// Times each method over `repeats` runs with seeds `seed, seed + 1, …`.
pub fn bench(
    cfg: &SceneConfig,
    methods: &[Method],
    opts: &OptimizeOptions,
    repeats: usize,
) -> Result<Vec<BenchRecord>> {
    if repeats == 0 {
        return Err(Error::Config("repeats must be positive".into()));
    }
    let geo = build_geometry(cfg)?;
    let ch = ChannelSet::synthesize(cfg, &geo)?;
    methods
        .iter()
        .map(|&method| {
            let mut times = Vec::with_capacity(repeats);
            let mut best = f64::NEG_INFINITY;
            for r in 0..repeats {
                let run = optimize_with(
                    cfg,
                    &geo,
                    &ch,
                    &OptimizeOptions {
                        method,
                        seed: opts.seed + r as u64,
                        ..opts.clone()
                    },
                )?;
                times.push(run.wall_time);
                best = best.max(run.gain_db);
            }
            Ok(BenchRecord {
                method,
                gain_db: best,
                repeats,
                mean_wall_time: times.iter().sum::<f64>() / repeats as f64,
                min_wall_time: times.iter().cloned().fold(f64::INFINITY, f64::min),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ising::encode;

    fn toy(los: bool) -> SceneConfig {
        let mut cfg = SceneConfig::reference(3, los);
        cfg.ris_grid = (2, 4);
        cfg
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.label().parse::<Method>().unwrap(), m);
        }
        assert!("cim".parse::<Method>().is_err());
    }

    #[test]
    fn exhaustive_and_annealing_agree_on_toy_scene() {
        for los in [false, true] {
            let cfg = toy(los);
            let ex = optimize(&cfg, &OptimizeOptions { method: Method::Exhaustive, ..Default::default() }).unwrap();
            let sa = optimize(&cfg, &OptimizeOptions::default()).unwrap();
            assert!(ex.phases == sa.phases || (ex.gain_db - sa.gain_db).abs() < 1e-9);
            let model = build_binary_ising(&ChannelSet::synthesize(&cfg, &build_geometry(&cfg).unwrap()).unwrap().direct, &ChannelSet::synthesize(&cfg, &build_geometry(&cfg).unwrap()).unwrap().cascade).unwrap();
            let spins = encode(&model, sa.phases.as_ref().unwrap()).unwrap();
            assert_eq!(&spins, &sa.report.as_ref().unwrap().best_spins);
        }
    }

    #[test]
    fn level_mismatch_is_a_config_error() {
        let cfg = toy(false);
        for method in [Method::Fresnel, Method::Passive] {
            let opts = OptimizeOptions {
                method,
                level: PhaseLevel::Quaternary,
                ..Default::default()
            };
            assert!(matches!(optimize(&cfg, &opts), Err(Error::Config(_))));
        }
    }

    #[test]
    fn reduced_and_quantized_pipelines_report_full_models() {
        let cfg = toy(true);
        let plain = optimize(&cfg, &OptimizeOptions::default()).unwrap();
        let reduced = optimize(&cfg, &OptimizeOptions { reduce: true, ..Default::default() }).unwrap();
        assert_eq!(reduced.report.as_ref().unwrap().best_spins.len(), 8);
        assert!((plain.gain_db - reduced.gain_db).abs() < 0.1);
        let q = optimize(&cfg, &OptimizeOptions { quantize_bits: Some(8), ..Default::default() }).unwrap();
        assert_eq!(q.report.as_ref().unwrap().best_spins.len(), 8);
        assert!((q.gain_db - plain.gain_db).abs() < 0.5);
    }

    #[test]
    fn design_probe_reproduces_optimized_gain() {
        let cfg = toy(true);
        let run = optimize(&cfg, &OptimizeOptions::default()).unwrap();
        let range = DistanceRange { start: 50.0, stop: 50.0, step: 1.0 };
        let sweep = run_sweep(&cfg, &run.coefficients, range).unwrap();
        assert_eq!(sweep.distances, vec![50.0]);
        assert!((sweep.columns[0].gains_db[0] - run.gain_db).abs() < 1e-9);
    }

    #[test]
    fn distance_grid() {
        let pts = DistanceRange::default().points().unwrap();
        assert_eq!(pts.len(), 401);
        assert_eq!(pts[400], 100.0);
        assert!(DistanceRange { start: 1.0, stop: 0.0, step: 0.1 }.points().is_err());
        assert!(DistanceRange { start: 0.0, stop: 1.0, step: 0.0 }.points().is_err());
    }

    #[test]
    fn passive_sweep_is_finite() {
        let cfg = toy(false);
        let sweep = run_sweep(&cfg, &passive(8).coefficients(), DistanceRange::default()).unwrap();
        assert!(sweep.columns[0].gains_db.iter().all(|g| g.is_finite() && *g > GAIN_SENTINEL_DB));
    }

    #[test]
    fn csv_header_and_round_trip() {
        let result = SweepResult {
            distances: vec![0.0, 0.25],
            columns: vec![
                SweepColumn { name: "cim-sa".into(), gains_db: vec![-63.7012345678, f64::NEG_INFINITY] },
                SweepColumn { name: "passive".into(), gains_db: vec![-80.5, -81.25] },
            ],
            metadata: None,
        };
        let mut buf = Vec::new();
        write_csv(&result, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "d_m,cim-sa_db,passive_db\n0.000000,-63.701235,-80.500000\n0.250000,-1000000000.000000,-81.250000\n"
        );
        let back = parse_csv(&text).unwrap();
        assert_eq!(back.distances, result.distances);
        assert_eq!(back.columns[0].gains_db, vec![-63.701235, GAIN_SENTINEL_DB]);
        assert_eq!(back.columns[1], result.columns[1]);
    }

    #[test]
    fn single_row_svg_is_deterministic() {
        let result = SweepResult {
            distances: vec![50.0],
            columns: vec![SweepColumn { name: "a<b".into(), gains_db: vec![-60.0] }],
            metadata: None,
        };
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_svg(&result, &mut a).unwrap();
        write_svg(&result, &mut b).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("<svg"));
        assert!(text.contains("a&lt;b"));
        assert!(text.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn unwritable_path_errors() {
        let result = SweepResult { distances: vec![], columns: vec![], metadata: None };
        assert!(emit_csv(&result, "/nonexistent-dir/x.csv").is_err());
    }

    #[test]
    fn nlos_reduction_is_inert() {
        let exp = run_reduction_experiment(&toy(false), &OptimizeOptions::default()).unwrap();
        assert_eq!(exp.removal_fraction, 0.0);
        assert_eq!(exp.n_reduced, 8);
    }

    #[test]
    fn scene_hash_tracks_config() {
        let a = toy(false);
        let mut b = toy(false);
        assert_eq!(scene_hash(&a), scene_hash(&b));
        b.ue_position.y += 1.0;
        assert_ne!(scene_hash(&a), scene_hash(&b));
        assert_eq!(scene_hash(&a).len(), 64);
    }
}
