use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail};
use clap::{Parser, ValueEnum};
use edgenormals::{
    run_pipeline, BackendChoice, CostKind, DpConfig, InputSource, IterationCap, Phi,
    PipelineConfig, SceneSpec,
};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Backend {
    #[value(name = "3f2n")]
    ThreeF2N,
    Cp2tv,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PhiArg {
    Median,
    Mean,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Cost {
    Pd,
    Tv,
}

/// Estimate surface normals from depth with edge-aware gradient refinement.
#[derive(Debug, Parser)]
#[command(name = "edgenormals", version)]
struct Args {
    /// Synthetic scene, `name[:key=value,...]`. Repeat for several scenes.
    #[arg(long, conflicts_with_all = ["depth", "intrinsics"])]
    scene: Vec<String>,
    /// Depth file, `.pfm` or 16-bit `.png` (millimetres).
    #[arg(long, requires = "intrinsics")]
    depth: Option<PathBuf>,
    /// Text file with `fu fv cu cv`.
    #[arg(long, requires = "depth")]
    intrinsics: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "3f2n")]
    backend: Backend,
    /// Central tendency for `nz` (3f2n only).
    #[arg(long, value_enum, default_value = "median")]
    phi: PhiArg,
    /// Sweep cap, a count or `inf`.
    #[arg(long, default_value = "3")]
    iters: String,
    #[arg(long, value_enum, default_value = "pd")]
    cost: Cost,
    /// Noise variance in squared depth units.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Discontinuity band radius in pixels.
    #[arg(long)]
    band: Option<usize>,
    /// Directory for the normal PFM and RGB preview.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report CSV, appended to.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn configs(args: &Args) -> anyhow::Result<Vec<PipelineConfig>> {
    let sources = match (&args.depth, &args.intrinsics) {
        (Some(d), Some(k)) => vec![InputSource::Files {
            depth: d.clone(),
            intrinsics: k.clone(),
        }],
        _ if !args.scene.is_empty() => args
            .scene
            .iter()
            .map(|s| {
                SceneSpec::parse(s)
                    .map(InputSource::Scene)
                    .map_err(|e| anyhow!("config: scene `{s}`: {e}"))
            })
            .collect::<anyhow::Result<_>>()?,
        _ => bail!("config: give --scene or --depth with --intrinsics"),
    };
    let iterations: IterationCap = args
        .iters
        .parse()
        .map_err(|e| anyhow!("config: --iters: {e}"))?;
    let backend = match args.backend {
        Backend::Cp2tv => BackendChoice::Cp2tv,
        Backend::ThreeF2N => BackendChoice::ThreeF2N {
            phi: match args.phi {
                PhiArg::Median => Phi::Median,
                PhiArg::Mean => Phi::Mean,
            },
        },
    };
    let cost = match args.cost {
        Cost::Pd => CostKind::Pd,
        Cost::Tv => CostKind::Tv,
    };
    Ok(sources
        .into_iter()
        .map(|source| PipelineConfig {
            backend,
            dp: DpConfig::default().with_cost(cost),
            iterations,
            sigma: args.sigma,
            seed: args.seed,
            band_radius: args.band,
            out_dir: args.out.clone(),
            csv: args.csv.clone(),
            ..PipelineConfig::new(source)
        })
        .collect())
}

fn run(args: &Args) -> anyhow::Result<()> {
    for cfg in configs(args)? {
        let report = run_pipeline(&cfg)?;
        // A closed stdout must not turn a finished run into a failure.
        let _ = writeln!(std::io::stdout().lock(), "{}", report.to_kv());
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
