//! Command-line front end for the experiment harness.
//!
//! Exit status: 0 on success, 1 on usage or configuration errors, 2 when a
//! run blew up or lost resolution (outputs are still written).

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use fpu_kdv::fit::fit_scaling_exponent;
use fpu_kdv::gkdv::{run_kdv, soliton_profile, steady_residual, KdvRunConfig, SolitonSpec};
use fpu_kdv::harness::output::{
    fmt_real, read_points_csv, save_error_scan, save_metastability, save_norm_growth,
    save_residual_scan, write_kdv_samples_csv,
};
use fpu_kdv::harness::{
    run_error_scan, run_metastability, run_norm_growth, run_residual_scan, ExperimentKind,
    ExperimentSpec, PerturbationMode,
};
use fpu_kdv::lattice::{
    fpu_energy, peak_position, traveling_wave_initializer, write_trajectory_csv, FpuRunConfig,
    Integrator,
};
use fpu_kdv::model::ModelParams;
use fpu_kdv::{Error, Result};

#[derive(Parser)]
#[command(name = "fpu-kdv", version, about = "FPU lattice / generalized KdV approximation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a KdV solitary-wave profile and its steady-equation residual.
    Soliton(Common),
    /// Integrate the KdV equation and log invariants and norms.
    Kdv(Common),
    /// Integrate the lattice from the solitary-wave ansatz and log its energy.
    Fpu {
        #[command(flatten)]
        common: Common,
        /// Final lattice time (default: tau0 / eps^3, or tau_end / eps^3).
        #[arg(long)]
        t_end: Option<f64>,
        /// Also write `(t, u, q)` at every logged sample.
        #[arg(long)]
        trajectory: bool,
    },
    /// Residual norms of the ansatz over an epsilon sweep.
    ResidualScan(Common),
    /// Coupled lattice/KdV error sweep over a fixed or theorem window.
    ErrorScan {
        #[command(flatten)]
        common: Common,
        /// fixed (tau0), theorem1 or theorem2.
        #[arg(long)]
        window: Option<String>,
    },
    /// Orbital distance of a perturbed solitary wave.
    Metastability(Common),
    /// Sobolev-norm growth of a KdV run.
    NormGrowth(Common),
    /// Log-log least-squares fit of (x, value) pairs from a CSV file.
    Fit {
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Args, Clone, Default)]
struct Common {
    /// JSON experiment document; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long)]
    jobs: Option<usize>,
    /// Seed of the random perturbation.
    #[arg(long)]
    seed: Option<u64>,
    /// Random perturbation size in units of eps^{3/2}.
    #[arg(long)]
    perturbation_size: Option<f64>,
    #[arg(long)]
    p: Option<u32>,
    /// Comma-separated, strictly decreasing.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long = "K")]
    k: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long = "L")]
    length: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    dtau: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    s: Option<u32>,
    #[arg(long)]
    tau0: Option<f64>,
    #[arg(long)]
    tau_end: Option<f64>,
    /// rk4 or splitting.
    #[arg(long)]
    integrator: Option<Integrator>,
}

impl Common {
    fn spec(&self, default_kind: ExperimentKind, allowed: &[ExperimentKind]) -> Result<ExperimentSpec> {
        let mut spec = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let spec: ExperimentSpec = serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                if !allowed.contains(&spec.kind) {
                    return Err(Error::Config(format!(
                        "{}: kind {:?} does not match this subcommand",
                        path.display(),
                        spec.kind
                    )));
                }
                spec
            }
            None => ExperimentSpec::new(default_kind),
        };
        macro_rules! set {
            ($($field:ident => $target:ident),*) => {
                $(if let Some(v) = self.$field.clone() { spec.$target = v; })*
            };
        }
        set!(p => p, eps => epsilons, r => r, k => k, c => c, length => length,
             points => points, dt => dt, dtau => dtau, samples => samples, s => s,
             tau_end => tau_end, integrator => integrator);
        if self.tau0.is_some() {
            spec.tau0 = self.tau0;
        }
        if let Some(out) = &self.out {
            spec.output_path = Some(out.clone());
        }
        match (spec.perturbation, self.seed, self.perturbation_size) {
            (_, None, None) => {}
            (PerturbationMode::Random { seed, size }, s, z) => {
                spec.perturbation = PerturbationMode::Random {
                    seed: s.unwrap_or(seed),
                    size: z.unwrap_or(size),
                }
            }
            (PerturbationMode::None, s, Some(size)) => {
                spec.perturbation = PerturbationMode::Random {
                    seed: s.unwrap_or(0),
                    size,
                }
            }
            (PerturbationMode::None, Some(_), None) => {
                return Err(Error::Config(
                    "--seed needs a random perturbation (set --perturbation-size)".into(),
                ))
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn out_dir(spec: &ExperimentSpec) -> PathBuf {
    spec.output_path.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(0) => Err(Error::Config("--jobs must be at least 1".into())),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::Config(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Runs one subcommand; `Ok(false)` signals a numerical failure.
fn run(cli: Cli) -> Result<bool> {
    use ExperimentKind::*;
    let start = Instant::now();
    match cli.command {
        Command::Soliton(common) => {
            let spec = common.spec(KdvNormGrowth, &[KdvNormGrowth])?;
            let sol = SolitonSpec::new(spec.p, spec.c, 0.5 * spec.length)?;
            let w = soliton_profile(&sol, spec.length, spec.points)?;
            let dir = out_dir(&spec);
            ensure_dir(&dir)?;
            let path = dir.join(format!("soliton_p{}_c{}.csv", spec.p, spec.c));
            let mut wtr = csv::Writer::from_path(&path)?;
            wtr.write_record(["x", "W"])?;
            for (x, v) in w.grid().iter().zip(w.values()) {
                wtr.write_record([fmt_real(*x), fmt_real(*v)])?;
            }
            wtr.flush().map_err(|e| Error::io(&path, e))?;
            println!(
                "soliton: p {} c {} amplitude {:.6} inverse width {:.6} steady residual {:.3e} -> {}",
                spec.p,
                spec.c,
                sol.amplitude(),
                sol.inverse_width(),
                steady_residual(&w, spec.c, spec.p),
                path.display()
            );
            Ok(true)
        }
        Command::Kdv(common) => {
            let spec = common.spec(KdvNormGrowth, &[KdvNormGrowth])?;
            let w0 = spec.initial_profile()?;
            let cfg = KdvRunConfig {
                p: spec.p,
                length: spec.length,
                points: spec.points,
                dtau: spec.dtau,
                tau_end: spec.tau_end,
                dealias: true,
            };
            let run = run_kdv(&w0, &cfg, spec.s, spec.samples)?;
            let dir = out_dir(&spec);
            ensure_dir(&dir)?;
            let path = dir.join(format!("kdv_p{}.csv", spec.p));
            write_kdv_samples_csv(&path, &run.samples)?;
            let first = run.samples.first().expect("initial sample");
            let last = run.samples.last().expect("final sample");
            let flagged = run.samples.iter().any(|s| s.resolution_flag);
            println!(
                "kdv: tau {} mass drift {:.3e} energy drift {:.3e} H^{} norm {:.6e}{} -> {}",
                last.tau,
                (last.mass - first.mass).abs(),
                ((last.energy - first.energy) / first.energy).abs(),
                spec.s,
                last.hs_norm,
                if flagged { " [under-resolved]" } else { "" },
                path.display()
            );
            Ok(!flagged)
        }
        Command::Fpu {
            common,
            t_end,
            trajectory,
        } => {
            let spec = common.spec(ErrorScan, &[ErrorScan, Theorem1Window, Theorem2Window, Metastability])?;
            let eps = spec.epsilons[0];
            let state = traveling_wave_initializer(spec.p, spec.c, eps, spec.length, spec.points)?;
            let t_end = t_end.unwrap_or(spec.tau0.unwrap_or(spec.tau_end) / eps.powi(3));
            let steps = (t_end / spec.dt).ceil().max(1.0) as usize;
            let stride = (steps / spec.samples).max(1);
            let cfg = FpuRunConfig {
                params: ModelParams::new(spec.p, eps, spec.s, spec.length, spec.dt, spec.dtau)?,
                integrator: spec.integrator,
                t_end,
                sample_stride: stride,
            };
            cfg.validate()?;
            let dir = out_dir(&spec);
            ensure_dir(&dir)?;
            let result = fpu_kdv::lattice::fpu_integrate(&state, &cfg);
            let traj = match result {
                Ok(t) => t,
                Err(e) if e.is_numerical() => {
                    println!("fpu: {e}");
                    return Ok(false);
                }
                Err(e) => return Err(e),
            };
            let path = dir.join(format!("fpu_p{}_eps{}.csv", spec.p, eps));
            let mut wtr = csv::Writer::from_path(&path)?;
            wtr.write_record(["t", "H", "peak"])?;
            for s in &traj {
                wtr.write_record([
                    fmt_real(s.t),
                    fmt_real(fpu_energy(s, eps, spec.p)),
                    fmt_real(peak_position(&s.u)),
                ])?;
            }
            wtr.flush().map_err(|e| Error::io(&path, e))?;
            if trajectory {
                write_trajectory_csv(&dir.join(format!("fpu_trajectory_eps{eps}.csv")), &traj)?;
            }
            let h0 = fpu_energy(&traj[0], eps, spec.p);
            let h1 = fpu_energy(traj.last().expect("final state"), eps, spec.p);
            println!(
                "fpu: eps {eps} sites {} t {:.3} relative energy drift {:.3e} -> {}",
                state.sites(),
                traj.last().map(|s| s.t).unwrap_or(0.0),
                (h1 / h0 - 1.0).abs(),
                path.display()
            );
            Ok(true)
        }
        Command::ResidualScan(common) => {
            let spec = common.spec(ResidualScan, &[ResidualScan])?;
            let report = with_pool(common.jobs, || run_residual_scan(&spec))??;
            let files = save_residual_scan(&out_dir(&spec), &spec, &report, start.elapsed().as_secs_f64())?;
            let slopes: Vec<String> = report
                .fits
                .iter()
                .map(|f| format!("{} slope {:.4}", f.quantity, f.fit.slope))
                .collect();
            println!("residual-scan: {} -> {}", slopes.join(", "), files.last().unwrap().display());
            Ok(true)
        }
        Command::ErrorScan { common, window } => {
            let mut spec = common.spec(ErrorScan, &[ErrorScan, Theorem1Window, Theorem2Window])?;
            if let Some(w) = window {
                spec.kind = match w.as_str() {
                    "fixed" => ErrorScan,
                    "theorem1" => Theorem1Window,
                    "theorem2" => Theorem2Window,
                    other => return Err(Error::Config(format!("unknown window '{other}'"))),
                };
                spec.validate()?;
            }
            let report = with_pool(common.jobs, || run_error_scan(&spec))??;
            let files = save_error_scan(&out_dir(&spec), &spec, &report, start.elapsed().as_secs_f64())?;
            let sups: Vec<String> = report
                .cells
                .iter()
                .map(|c| format!("{}: {:.4e}", c.epsilon, c.sup_error))
                .collect();
            let slope = report
                .fit()
                .map(|f| format!("slope {:.4}, ", f.slope))
                .unwrap_or_default();
            println!(
                "error-scan: {slope}sup error [{}] -> {}",
                sups.join(", "),
                files.last().unwrap().display()
            );
            Ok(!report.flags.failed())
        }
        Command::Metastability(common) => {
            let spec = common.spec(Metastability, &[Metastability])?;
            let report = with_pool(common.jobs, || run_metastability(&spec))??;
            let files = save_metastability(&out_dir(&spec), &spec, &report, start.elapsed().as_secs_f64())?;
            let cells: Vec<String> = report
                .cells
                .iter()
                .map(|c| format!("{}: sup {:.4e} ratio {:.4}", c.epsilon, c.sup_distance, c.ratio))
                .collect();
            println!(
                "metastability: [{}]{} -> {}",
                cells.join(", "),
                if report.flags.growth { " [growth]" } else { "" },
                files.last().unwrap().display()
            );
            Ok(!report.flags.failed())
        }
        Command::NormGrowth(common) => {
            let spec = common.spec(KdvNormGrowth, &[KdvNormGrowth])?;
            let report = run_norm_growth(&spec)?;
            let files = save_norm_growth(&out_dir(&spec), &spec, &report, start.elapsed().as_secs_f64())?;
            println!(
                "norm-growth: H^{} variation {:.3e}, exponent {}, envelope A {:.4e} K {:.4e} -> {}",
                spec.s,
                report.growth.relative_variation(),
                report
                    .exponent()
                    .map(|e| format!("{e:.4}"))
                    .unwrap_or_else(|| "n/a".into()),
                report.envelope.0,
                report.envelope.1,
                files.last().unwrap().display()
            );
            Ok(!report.flags.failed())
        }
        Command::Fit { input } => {
            let pts = read_points_csv(&input)?;
            let fit = fit_scaling_exponent(&pts)?;
            println!(
                "fit: slope {} intercept {} residual_rms {:.3e}",
                fit.slope, fit.intercept, fit.residual_rms
            );
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("fpu-kdv: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
