//! End-to-end runs: input, noise, refinement, normals, metrics and artifacts.

use std::fmt::Write as _;
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::dp::{run_dp, DpConfig, DpOutcome};
use crate::error::{Error, Result};
use crate::eval::{add_gaussian_noise, car, evaluate, MetricReport};
use crate::grid::{invert_depth, CameraIntrinsics, DepthGrid, NormalMap};
use crate::init::CostKind;
use crate::io::{
    decode_pfm, normal_to_rgb, read_depth_png16, read_intrinsics, write_pfm_normals, write_rgb,
    Pfm,
};
use crate::normals::{normals_3f2n, normals_cp2tv, BackendChoice, Phi};
use crate::scalar::Real;
use crate::synth::{render, SceneSpec};

/// Metres per raw unit when loading 16-bit PNG depth.
pub const PNG_DEPTH_SCALE: f64 = 0.001;

/// Where the depth comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum InputSource {
    /// Synthetic scene with analytic ground truth.
    Scene(SceneSpec),
    /// Depth file (`.pfm` or 16-bit `.png`) and intrinsics text file. No ground truth.
    Files { depth: PathBuf, intrinsics: PathBuf },
}

impl InputSource {
    pub fn label(&self) -> String {
        match self {
            InputSource::Scene(s) => s.kind.name().to_string(),
            InputSource::Files { depth, .. } => depth
                .file_stem()
                .map_or_else(|| depth.display().to_string(), |s| s.to_string_lossy().into()),
        }
    }
}

/// Sweep cap for the refinement.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IterationCap {
    Finite(usize),
    /// `width + height` sweeps.
    Unbounded,
}

impl IterationCap {
    pub fn resolve(self, width: usize, height: usize) -> usize {
        match self {
            IterationCap::Finite(n) => n,
            IterationCap::Unbounded => DpConfig::unbounded_cap(width, height),
        }
    }

    pub fn label(self) -> String {
        match self {
            IterationCap::Finite(n) => n.to_string(),
            IterationCap::Unbounded => "inf".into(),
        }
    }
}

impl std::str::FromStr for IterationCap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "inf" {
            return Ok(IterationCap::Unbounded);
        }
        s.parse()
            .map(IterationCap::Finite)
            .map_err(|_| Error::InvalidArgument(format!("iterations must be a count or `inf`, got {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub source: InputSource,
    pub backend: BackendChoice,
    /// `max_iterations` is replaced by `iterations` once the grid size is known.
    pub dp: DpConfig,
    pub iterations: IterationCap,
    /// Noise variance in squared depth units.
    pub sigma: f64,
    pub seed: u64,
    /// Overrides the scene's band radius when set.
    pub band_radius: Option<usize>,
    /// Directory for the normal PFM and RGB preview.
    pub out_dir: Option<PathBuf>,
    /// Report CSV, appended to.
    pub csv: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn new(source: InputSource) -> Self {
        Self {
            source,
            backend: BackendChoice::default(),
            dp: DpConfig::default(),
            iterations: IterationCap::Finite(3),
            sigma: 0.0,
            seed: 0,
            band_radius: None,
            out_dir: None,
            csv: None,
        }
    }
}

/// Refined and baseline metrics on the full frame and on the band.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub full: MetricReport,
    pub band: Option<MetricReport>,
    pub baseline_full: MetricReport,
    pub baseline_band: Option<MetricReport>,
}

impl Evaluation {
    /// `CAR(baseline, refined)` on the full frame.
    pub fn car_full(&self) -> f64 {
        car(self.baseline_full.aae_degrees, self.full.aae_degrees)
    }

    pub fn car_band(&self) -> Option<f64> {
        Some(car(
            self.baseline_band.as_ref()?.aae_degrees,
            self.band.as_ref()?.aae_degrees,
        ))
    }
}

#[derive(Clone, Debug)]
pub struct PipelineReport {
    pub scene: String,
    pub backend: BackendChoice,
    pub cost_kind: CostKind,
    pub iterations: IterationCap,
    pub sigma: f64,
    pub seed: u64,
    pub sweeps: usize,
    pub converged: bool,
    /// `None` without ground truth.
    pub evaluation: Option<Evaluation>,
    pub normals: NormalMap<f64>,
    pub runtime_ms: f64,
    pub artifacts: Vec<PathBuf>,
}

pub const CSV_HEADER: &str =
    "scene,backend,cost_kind,iterations,sigma,seed,aae_full,aae_band,pgp10,pgp20,pgp30,runtime_ms";

fn cost_label(c: CostKind) -> &'static str {
    match c {
        CostKind::Pd => "pd",
        CostKind::Tv => "tv",
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| format!("{v:.6}"))
}

impl PipelineReport {
    pub fn csv_row(&self) -> String {
        let e = self.evaluation.as_ref();
        let pgp = |i: usize| opt(e.map(|e| e.full.pgp[i]));
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{:.3}",
            self.scene,
            self.backend.label(),
            cost_label(self.cost_kind),
            self.iterations.label(),
            self.sigma,
            self.seed,
            opt(e.map(|e| e.full.aae_degrees)),
            opt(e.and_then(|e| e.band.as_ref().map(|b| b.aae_degrees))),
            pgp(0),
            pgp(1),
            pgp(2),
            self.runtime_ms
        )
    }

    /// Flat `key=value` block.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scene={}", self.scene);
        let _ = writeln!(s, "backend={}", self.backend.label());
        if let BackendChoice::ThreeF2N { phi } = self.backend {
            let _ = writeln!(s, "phi={}", if phi == Phi::Median { "median" } else { "mean" });
        }
        let _ = writeln!(s, "cost_kind={}", cost_label(self.cost_kind));
        let _ = writeln!(s, "iterations={}", self.iterations.label());
        let _ = writeln!(s, "sweeps={}", self.sweeps);
        let _ = writeln!(s, "converged={}", self.converged);
        let _ = writeln!(s, "sigma={}", self.sigma);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "noise_domain=depth");
        if let Some(e) = &self.evaluation {
            s.push_str(&e.full.to_kv("full_"));
            s.push_str(&e.baseline_full.to_kv("baseline_full_"));
            let _ = writeln!(s, "car_full={:.6}", e.car_full());
            if let (Some(b), Some(bb)) = (&e.band, &e.baseline_band) {
                s.push_str(&b.to_kv("band_"));
                s.push_str(&bb.to_kv("baseline_band_"));
                let _ = writeln!(s, "car_band={:.6}", e.car_band().unwrap_or(f64::NAN));
            }
        }
        let _ = writeln!(s, "runtime_ms={:.3}", self.runtime_ms);
        for a in &self.artifacts {
            let _ = writeln!(s, "artifact={}", a.display());
        }
        s
    }
}

trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> Stage<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}

/// Refined normals for a depth grid. The inverse-depth back-end refines
/// gradients of `1/z`; the tangent back-end refines gradients of `z`.
pub fn estimate_normals<T: Real>(
    depth: &DepthGrid<T>,
    k: &CameraIntrinsics<T>,
    backend: BackendChoice,
    dp: &DpConfig,
) -> Result<(NormalMap<T>, DpOutcome<T>)> {
    match backend {
        BackendChoice::Cp2tv => {
            let out = run_dp(depth, dp).stage("refine")?;
            let n = normals_cp2tv(depth, &out.grad, k).stage("normals")?;
            Ok((n, out))
        }
        BackendChoice::ThreeF2N { phi } => {
            let inv = invert_depth(depth).stage("invert")?;
            let out = run_dp(&inv, dp).stage("refine")?;
            let n = normals_3f2n(&inv, &out.grad, depth, k, phi).stage("normals")?;
            Ok((n, out))
        }
    }
}

fn load_depth(path: &Path) -> Result<DepthGrid<f64>> {
    let ext = path
        .extension()
        .map(|e| e.to_string_lossy().to_ascii_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "pfm" => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            match decode_pfm(&bytes)? {
                Pfm::Gray(g) => Ok(g.cast()),
                Pfm::Color(_) => Err(Error::Format(format!(
                    "{}: depth PFM must have one channel",
                    path.display()
                ))),
            }
        }
        "png" => read_depth_png16(path, PNG_DEPTH_SCALE),
        _ => Err(Error::Format(format!(
            "{}: depth must be .pfm or .png",
            path.display()
        ))),
    }
}

struct Loaded {
    depth: DepthGrid<f64>,
    k: CameraIntrinsics<f64>,
    gt: Option<NormalMap<f64>>,
    band: Option<Vec<bool>>,
}

fn load(cfg: &PipelineConfig) -> Result<Loaded> {
    match &cfg.source {
        InputSource::Scene(spec) => {
            let s = render(spec)?;
            let band = match cfg.band_radius {
                Some(r) => s.band_with_radius(r),
                None => s.band.clone(),
            };
            Ok(Loaded {
                depth: s.depth,
                k: s.intrinsics,
                gt: Some(s.gt_normals),
                band: Some(band),
            })
        }
        InputSource::Files { depth, intrinsics } => Ok(Loaded {
            depth: load_depth(depth)?,
            k: read_intrinsics(intrinsics)?,
            gt: None,
            band: None,
        }),
    }
}

fn band_metrics(
    gt: &NormalMap<f64>,
    est: &NormalMap<f64>,
    band: Option<&[bool]>,
) -> Result<Option<MetricReport>> {
    match band {
        Some(b) if b.iter().any(|&x| x) => evaluate(gt, est, Some(b)).map(Some),
        _ => Ok(None),
    }
}

/// Runs one configuration end to end and writes the requested artifacts.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineReport> {
    let start = Instant::now();
    let input = load(cfg).stage("input")?;
    let depth = add_gaussian_noise(&input.depth, cfg.sigma, cfg.seed).stage("noise")?;
    let cap = cfg.iterations.resolve(depth.width(), depth.height());
    let dp = cfg.dp.with_max_iterations(cap);
    let (normals, outcome) = estimate_normals(&depth, &input.k, cfg.backend, &dp)?;
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;

    let evaluation = match &input.gt {
        Some(gt) => {
            let (base, _) =
                estimate_normals(&depth, &input.k, cfg.backend, &dp.with_max_iterations(0))
                    .stage("baseline")?;
            let band = input.band.as_deref();
            Some(
                (|| {
                    Ok(Evaluation {
                        full: evaluate(gt, &normals, None)?,
                        band: band_metrics(gt, &normals, band)?,
                        baseline_full: evaluate(gt, &base, None)?,
                        baseline_band: band_metrics(gt, &base, band)?,
                    })
                })()
                .stage("evaluate")?,
            )
        }
        None => None,
    };

    let mut report = PipelineReport {
        scene: cfg.source.label(),
        backend: cfg.backend,
        cost_kind: cfg.dp.cost_kind,
        iterations: cfg.iterations,
        sigma: cfg.sigma,
        seed: cfg.seed,
        sweeps: outcome.sweeps,
        converged: outcome.converged,
        evaluation,
        normals,
        runtime_ms,
        artifacts: Vec::new(),
    };

    if let Some(dir) = &cfg.out_dir {
        report.artifacts = write_artifacts(&report, dir).stage("output")?;
    }
    if let Some(csv) = &cfg.csv {
        append_csv(csv, &report.csv_row()).stage("report")?;
    }
    Ok(report)
}

fn write_artifacts(r: &PipelineReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let stem = format!(
        "{}_{}_{}_{}",
        r.scene,
        r.backend.label(),
        cost_label(r.cost_kind),
        r.iterations.label()
    );
    let pfm = dir.join(format!("{stem}.pfm"));
    write_pfm_normals(&r.normals, &pfm)?;
    let png = dir.join(format!("{stem}.png"));
    write_rgb(&normal_to_rgb(&r.normals), &png)?;
    Ok(vec![pfm, png])
}

/// Appends `row`, writing the header first when the file is new or empty.
pub fn append_csv(path: &Path, row: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let empty = f.metadata().map_err(|e| Error::io(path, e))?.len() == 0;
    let mut text = String::new();
    if empty {
        text.push_str(CSV_HEADER);
        text.push('\n');
    }
    text.push_str(row);
    text.push('\n');
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::SceneKind;

    fn small(kind: SceneKind) -> SceneSpec {
        let mut s = SceneSpec::new(kind);
        s.width = 40;
        s.height = 30;
        s.intrinsics = CameraIntrinsics::new(30.0, 30.0, 19.5, 14.5).unwrap();
        s.edge_column = 20.0;
        s
    }

    #[test]
    fn iteration_cap_parsing() {
        assert_eq!("3".parse::<IterationCap>().unwrap(), IterationCap::Finite(3));
        assert_eq!("inf".parse::<IterationCap>().unwrap(), IterationCap::Unbounded);
        assert!("x".parse::<IterationCap>().is_err());
        assert_eq!(IterationCap::Unbounded.resolve(160, 120), 280);
    }

    #[test]
    fn tilted_plane_is_exact() {
        let cfg = PipelineConfig::new(InputSource::Scene(small(SceneKind::TiltedPlane)));
        let r = run_pipeline(&cfg).unwrap();
        let e = r.evaluation.unwrap();
        assert!(e.full.aae_degrees < 0.1);
        assert!(e.car_full() >= 1.0 || e.full.aae_degrees < 1e-9);
        assert!(e.band.is_none());
    }

    #[test]
    fn csv_and_kv() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = PipelineConfig::new(InputSource::Scene(small(SceneKind::StepEdge)));
        cfg.csv = Some(dir.path().join("r/report.csv"));
        cfg.out_dir = Some(dir.path().join("out"));
        let r = run_pipeline(&cfg).unwrap();
        run_pipeline(&cfg).unwrap();
        let text = fs::read_to_string(dir.path().join("r/report.csv")).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1].split(',').count(), 12);
        assert!(lines[1].starts_with("step,3f2n,pd,3,0,0,"));
        assert_eq!(r.artifacts.len(), 2);
        assert!(r.artifacts.iter().all(|p| p.exists()));
        let kv = r.to_kv();
        assert!(kv.contains("car_band="));
        assert!(kv.contains("band_aae="));
    }

    #[test]
    fn stage_labels() {
        let cfg = PipelineConfig::new(InputSource::Files {
            depth: "/nonexistent/d.pfm".into(),
            intrinsics: "/nonexistent/k.txt".into(),
        });
        let e = run_pipeline(&cfg).unwrap_err();
        assert!(matches!(e, Error::Stage { stage: "input", .. }));
        assert!(e.to_string().starts_with("input: "));

        let mut cfg = PipelineConfig::new(InputSource::Scene(small(SceneKind::FrontoPlane)));
        cfg.sigma = -1.0;
        assert!(matches!(run_pipeline(&cfg), Err(Error::Stage { stage: "noise", .. })));
    }
}
