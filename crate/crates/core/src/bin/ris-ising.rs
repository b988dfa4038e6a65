use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ris_ising::channel::PhaseLevel;
use ris_ising::harness::{
    bench, emit_csv, emit_svg, optimize, run_method_sweep, run_reduction_experiment, write_json,
    write_mask, write_trace, DistanceRange, Method, OptimizeOptions,
};
use ris_ising::scenario::load_scenario;
use ris_ising::scene::{ApertureModel, PropagationVariant, SceneConfig};
use ris_ising::solvers::{BifurcationParams, SaParams};
use ris_ising::{Error, Result};

#[derive(Parser)]
#[command(name = "ris-ising", version, about = "Discrete RIS phase optimization via Ising annealing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize the mask at the scenario's UE position
    Optimize {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "cim-sa")]
        method: Method,
        /// Write the solver's energy trace to <out>/trace.csv
        #[arg(long)]
        trace: bool,
    },
    /// Optimize at the design point, then sweep the fixed masks along y
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "cim-sa")]
        method: Vec<Method>,
        #[arg(long, default_value_t = 0.0)]
        start: f64,
        #[arg(long, default_value_t = 100.0)]
        stop: f64,
        #[arg(long, default_value_t = 0.25)]
        step: f64,
    },
    /// Solve the binary model with and without spin-size reduction
    Reduce {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "cim-sa")]
        method: Method,
    },
    /// Time methods on a scenario
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "cim-sa,successive,fresnel,continuous")]
        method: Vec<Method>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    FriisSquared,
    PaperPrinted,
}

#[derive(Clone, Copy, ValueEnum)]
enum Aperture {
    Flat,
    CosineProjected,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    /// Number of phase levels (2 or 4)
    #[arg(long, default_value_t = 2)]
    level: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fix field-dominated spins before solving
    #[arg(long)]
    reduce: bool,
    #[arg(long, default_value_t = 1.0)]
    reduce_threshold_scale: f64,
    /// Quantize couplings to this many bits (after auxiliary-spin embedding)
    #[arg(long)]
    quantize_bits: Option<u32>,
    /// Override the scenario's propagation variant
    #[arg(long)]
    variant: Option<Variant>,
    /// Override the scenario's aperture model
    #[arg(long)]
    aperture: Option<Aperture>,
    #[arg(long, conflicts_with = "nlos")]
    los: bool,
    #[arg(long)]
    nlos: bool,
    /// Unnormalized {±1±j} quaternary objective
    #[arg(long)]
    literal_quaternary: bool,
    #[arg(long, default_value_t = 200)]
    sweeps: usize,
    #[arg(long, default_value_t = 8)]
    replicas: usize,
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    bif_steps: usize,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn scene(&self) -> Result<SceneConfig> {
        let mut cfg = load_scenario(&self.scenario)?;
        if let Some(v) = self.variant {
            cfg.propagation_variant = match v {
                Variant::FriisSquared => PropagationVariant::FriisSquared,
                Variant::PaperPrinted => PropagationVariant::PaperPrinted,
            };
        }
        if let Some(a) = self.aperture {
            cfg.aperture_model = match a {
                Aperture::Flat => ApertureModel::Flat,
                Aperture::CosineProjected => ApertureModel::CosineProjected,
            };
        }
        if self.los {
            cfg.los_enabled = true;
        }
        if self.nlos {
            cfg.los_enabled = false;
        }
        Ok(cfg)
    }

    fn options(&self, method: Method) -> Result<OptimizeOptions> {
        let level = PhaseLevel::from_count(self.level).map_err(|e| Error::Config(e.to_string()))?;
        Ok(OptimizeOptions {
            method,
            level,
            seed: self.seed,
            reduce: self.reduce,
            reduce_threshold_scale: self.reduce_threshold_scale,
            quantize_bits: self.quantize_bits,
            literal_quaternary: self.literal_quaternary,
            sa: SaParams {
                t0: self.t0,
                t_end: self.t_end,
                sweeps: self.sweeps,
                replicas: self.replicas,
                ..SaParams::default()
            },
            bifurcation: BifurcationParams {
                steps: self.bif_steps,
                replicas: self.replicas,
                ..BifurcationParams::default()
            },
            ..OptimizeOptions::default()
        })
    }

    fn out_dir(&self) -> Result<Option<&Path>> {
        if let Some(dir) = &self.out {
            fs::create_dir_all(dir)?;
        }
        Ok(self.out.as_deref())
    }
}

fn run(cli: Cli) -> Result<()> {
    let stdout = std::io::stdout();
    match cli.command {
        Command::Optimize { common, method, trace } => {
            let cfg = common.scene()?;
            let mut opts = common.options(method)?;
            opts.sa.record_trace = trace;
            opts.bifurcation.record_trace = trace;
            let run = optimize(&cfg, &opts)?;
            let summary = run.summary(&cfg, &opts);
            if let Some(dir) = common.out_dir()? {
                write_json(&summary, dir.join("report.json"))?;
                let mut mask = Vec::new();
                write_mask(&run, &mut mask)?;
                fs::write(dir.join("mask.csv"), mask)?;
                if let Some(t) = run.report.as_ref().and_then(|r| r.energy_trace.as_ref()) {
                    let mut buf = Vec::new();
                    write_trace(t, &mut buf)?;
                    fs::write(dir.join("trace.csv"), buf)?;
                }
            }
            writeln!(stdout.lock(), "{}", serde_json::to_string_pretty(&summary).expect("serializable"))?;
        }
        Command::Sweep { common, method, start, stop, step } => {
            let cfg = common.scene()?;
            let opts = common.options(method[0])?;
            let range = DistanceRange { start, stop, step };
            let (result, _) = run_method_sweep(&cfg, &method, &opts, range)?;
            let mut out = stdout.lock();
            match common.out_dir()? {
                Some(dir) => {
                    emit_csv(&result, dir.join("sweep.csv"))?;
                    emit_svg(&result, dir.join("sweep.svg"))?;
                    write_json(&result.metadata, dir.join("report.json"))?;
                    for r in result.metadata.iter().flat_map(|m| &m.methods) {
                        writeln!(out, "{}: {:.2} dB at the design point", r.method, r.design_gain_db)?;
                    }
                }
                None => ris_ising::harness::write_csv(&result, &mut out)?,
            }
        }
        Command::Reduce { common, method } => {
            let cfg = common.scene()?;
            let opts = common.options(method)?;
            let exp = run_reduction_experiment(&cfg, &opts)?;
            if let Some(dir) = common.out_dir()? {
                write_json(&exp, dir.join("reduction.json"))?;
            }
            writeln!(stdout.lock(), "{}", serde_json::to_string_pretty(&exp).expect("serializable"))?;
        }
        Command::Bench { common, method, repeats } => {
            let cfg = common.scene()?;
            let opts = common.options(method[0])?;
            let records = bench(&cfg, &method, &opts, repeats)?;
            if let Some(dir) = common.out_dir()? {
                write_json(&records, dir.join("bench.json"))?;
            }
            let mut out = stdout.lock();
            writeln!(out, "{:<12} {:>10} {:>12} {:>12}", "method", "gain_db", "mean_s", "min_s")?;
            for r in &records {
                writeln!(
                    out,
                    "{:<12} {:>10.3} {:>12.4} {:>12.4}",
                    r.method.label(),
                    r.gain_db,
                    r.mean_wall_time,
                    r.min_wall_time
                )?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
