//! `lpvp`: synthesize, sweep, simulate and verify LPV observers with
//! co-designed sensor precision.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 infeasible synthesis,
//! 3 certification failure.

mod config;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use config::{PlantSource, RunConfig};
use lpvp_core::cr3bp;
use lpvp_core::io;
use lpvp_core::sim::{self, NoiseSpec};
use lpvp_core::synthesis::{self, noise_angle, SynthesisRequest};
use lpvp_core::{certify, CertifyOptions, NormKind, NormOrder, SynthesisResult, SynthesisStatus};

#[derive(Parser, Debug)]
#[command(name = "lpvp", version, about = "LPV observer and sensor-precision co-design")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (TOML); flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    norm: Option<NormArg>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    gamma: Option<f64>,
    /// Comma-separated γ values for `sweep`.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    gammas: Option<Vec<f64>>,
    /// Cost norm order: 1, 2 or inf.
    #[arg(long, global = true)]
    p: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Bearing noise for `simulate`, degrees. Defaults to the design's allowable angle.
    #[arg(long = "noise-deg", global = true, allow_hyphen_values = true)]
    noise_deg: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Pole-radius bound on the observer; 0 disables it.
    #[arg(long = "pole-radius", global = true, allow_hyphen_values = true)]
    pole_radius: Option<f64>,
    /// Result document for `simulate` and `verify`.
    #[arg(long, global = true)]
    result: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Solve one synthesis problem.
    Synth,
    /// Solve over a list of γ values.
    Sweep,
    /// Simulate the observer of a result document on the CR3BP.
    Simulate,
    /// Certify a result document with the frozen-parameter oracles.
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NormArg {
    H2,
    Hinf,
    Both,
}

/// Failure carrying its own exit code.
#[derive(Debug)]
struct Exit(u8, String);

impl std::fmt::Display for Exit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.1)
    }
}

impl std::error::Error for Exit {}

fn main() -> ExitCode {
    quiet_solver_panics();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => match e.downcast_ref::<Exit>() {
            Some(Exit(code, msg)) => {
                eprintln!("{msg}");
                ExitCode::from(*code)
            }
            None => {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        },
    }
}

/// The core library recovers from the conic solver's internal panics and
/// reports them as numerical failures; keep their messages off the terminal.
fn quiet_solver_panics() {
    let default = std::panic::take_hook();
    std::panic::set_hook(Box::new(move |info| {
        if !info.location().is_some_and(|l| l.file().contains("clarabel")) {
            default(info);
        }
    }));
}

struct Env {
    cfg: RunConfig,
    base: PathBuf,
    out: PathBuf,
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(g) = cli.gamma {
        if g.is_nan() || g <= 0.0 {
            bail!("gamma must be positive");
        }
    }
    let (cfg, base) = RunConfig::load(cli.config.as_deref())?;
    let out = cli.out.clone().or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let ctx = Env { cfg, base, out };
    match cli.command {
        Command::Synth => cmd_synth(cli, &ctx),
        Command::Sweep => cmd_sweep(cli, &ctx),
        Command::Simulate => cmd_simulate(cli, &ctx),
        Command::Verify => cmd_verify(cli, &ctx),
    }
}

fn norms_from(cli: &Cli, cfg: &RunConfig, allow_both: bool) -> Result<Vec<NormKind>> {
    let arg = match (cli.norm, cfg.synthesis.norm.as_deref()) {
        (Some(n), _) => n,
        (None, Some("both")) => NormArg::Both,
        (None, Some(s)) => match s.parse::<NormKind>()? {
            NormKind::H2 => NormArg::H2,
            NormKind::Hinf => NormArg::Hinf,
        },
        (None, None) => NormArg::H2,
    };
    Ok(match arg {
        NormArg::H2 => vec![NormKind::H2],
        NormArg::Hinf => vec![NormKind::Hinf],
        NormArg::Both if allow_both => vec![NormKind::H2, NormKind::Hinf],
        NormArg::Both => bail!("--norm both is only accepted by `sweep`"),
    })
}

fn request(cli: &Cli, ctx: &Env, norm: NormKind, gamma: f64) -> Result<SynthesisRequest> {
    let plant = ctx.cfg.plant(&ctx.base)?;
    let mut req = SynthesisRequest::new(plant, norm, gamma);
    req.p = match &cli.p {
        Some(p) => p.parse::<NormOrder>()?,
        None => ctx.cfg.p()?,
    };
    if let Some(eps) = ctx.cfg.synthesis.eps {
        req.eps = eps;
    }
    if let Some(m) = ctx.cfg.synthesis.mapping {
        req.mapping = m;
    }
    req.pole_radius = match cli.pole_radius {
        Some(r) if r > 0.0 => Some(r),
        Some(_) => None,
        None => ctx.cfg.default_pole_radius(),
    };
    Ok(req)
}

fn cmd_synth(cli: &Cli, ctx: &Env) -> Result<()> {
    let norm = norms_from(cli, &ctx.cfg, false)?[0];
    let gamma = cli.gamma.or(ctx.cfg.synthesis.gamma).context("no γ given (use --gamma)")?;
    let req = request(cli, ctx, norm, gamma)?;
    let result = synthesis::synthesize(&req)?;
    let path = ctx.out.join(format!("result_{norm}.json"));
    io::write_result(&path, &result)?;
    print_summary(&result);
    println!("result written to {}", path.display());
    status_exit(&result)
}

fn status_exit(result: &SynthesisResult) -> Result<()> {
    match result.status {
        SynthesisStatus::Optimal => Ok(()),
        SynthesisStatus::Infeasible => {
            let advice = match result.advisory_gamma {
                Some(g) => format!("smallest feasible γ found: {g:.6e}"),
                None => format!(
                    "no feasible γ found up to {:.3e}",
                    lpvp_core::synthesis::ADVISORY_MAX_FACTOR * result.gamma
                ),
            };
            Err(Exit(2, format!("infeasible at γ = {:.6e}; {advice}", result.gamma)).into())
        }
        other => bail!("solver returned {other:?}"),
    }
}

fn print_summary(r: &SynthesisResult) {
    println!("norm {}  γ = {}  p = {}  status {:?}", r.norm, r.gamma, r.p, r.status);
    let Some(d) = &r.design else { return };
    println!("‖β‖_{} = {:.6e}", r.p, r.objective_value.unwrap_or(f64::NAN));
    println!("{:>7} {:>14} {:>14} {:>14} {:>7}", "channel", "beta", "kappa", "1/kappa", "active");
    for (i, active) in d.active_channels().into_iter().enumerate() {
        let kappa = if active { format!("{:.6e}", d.kappa[i]) } else { "0".into() };
        println!("{:>7} {:>14.6e} {:>14} {:>14.6e} {:>7}", i + 1, d.beta[i], kappa, 1.0 / d.kappa[i], active);
    }
    if d.kappa.len() >= 2 {
        match noise_angle(d.kappa[0], d.kappa[1]) {
            Ok(a) => println!(
                "allowable θ₁ noise: {:.4}° (sin channel), {:.4}° (cos channel)",
                a.from_sin_deg, a.from_cos_deg
            ),
            Err(e) => println!("no θ₁ noise interpretation: {e}"),
        }
    }
    println!("worst LMI residual {:.3e}", d.worst_residual());
}

fn cmd_sweep(cli: &Cli, ctx: &Env) -> Result<()> {
    let gammas = cli.gammas.clone().or_else(|| ctx.cfg.synthesis.gammas.clone()).unwrap_or_default();
    if gammas.is_empty() {
        bail!("empty γ list (use --gammas)");
    }
    if gammas.iter().any(|g| g.is_nan() || *g <= 0.0) {
        bail!("gamma must be positive");
    }
    let mut sorted = gammas.clone();
    sorted.sort_by(f64::total_cmp);
    for norm in norms_from(cli, &ctx.cfg, true)? {
        let mut req = request(cli, ctx, norm, sorted[0])?;
        req.advise_on_infeasible = false;
        let n_y = req.plant.n_y();
        let report = synthesis::sweep_gamma(&req, &sorted)?;
        let path = ctx.out.join(format!("sweep_{norm}.csv"));
        io::write_sweep_csv(BufWriter::new(File::create(&path)?), &report, n_y)?;
        for (k, r) in report.results.iter().enumerate() {
            match r {
                Ok(r) => {
                    io::write_result(&ctx.out.join(format!("sweep_{norm}_{k}.json")), r)?;
                    let angle = r
                        .design
                        .as_ref()
                        .filter(|d| d.kappa.len() >= 2)
                        .and_then(|d| noise_angle(d.kappa[0], d.kappa[1]).ok())
                        .map_or("-".to_string(), |a| format!("{:.4}°", a.from_sin_deg));
                    println!("{norm} γ = {:<12} {:?}  θ₁ noise {angle}", report.gammas[k], r.status);
                }
                Err(e) => println!("{norm} γ = {:<12} error: {e}", report.gammas[k]),
            }
        }
        if !report.is_monotone() {
            println!("warning: ‖β‖ increases with γ at {:?}", report.monotonicity_violations);
        }
        println!("sweep written to {}", path.display());
    }
    Ok(())
}

fn load_result(cli: &Cli) -> Result<SynthesisResult> {
    let path = cli.result.as_deref().context("--result is required")?;
    let r = io::read_result(path).with_context(|| format!("reading result {}", path.display()))?;
    if !r.is_optimal() {
        bail!("result {} holds no design (status {:?})", path.display(), r.status);
    }
    Ok(r)
}

fn check_dims(result: &SynthesisResult, n_x: usize, n_y: usize, what: &Path) -> Result<()> {
    let l = &result.design.as_ref().expect("optimal result").l;
    if l.shape() != (n_x, n_y) {
        bail!("{}: L is {:?}, plant needs {:?}", what.display(), l.shape(), (n_x, n_y));
    }
    Ok(())
}

fn cmd_simulate(cli: &Cli, ctx: &Env) -> Result<()> {
    if ctx.cfg.plant.source != PlantSource::Cr3bp {
        bail!("simulation is only available for the built-in CR3BP plant");
    }
    let result = load_result(cli)?;
    check_dims(&result, cr3bp::N_X, cr3bp::N_Y, cli.result.as_deref().unwrap())?;
    let design = result.design.as_ref().expect("optimal result");
    let cr = ctx.cfg.cr3bp_config()?;
    let sim_cfg = &ctx.cfg.simulation;

    let active = design.active_channels();
    let prune = sim_cfg.prune_inactive.unwrap_or(true);
    let l = if prune { design.pruned_gain() } else { design.l.clone() };
    let angle_deg = match cli.noise_deg.or(sim_cfg.noise_deg) {
        Some(a) => a,
        None => noise_angle(design.kappa[0], design.kappa[1]).map(|a| a.from_sin_deg).unwrap_or(0.0),
    };
    let range = |i: usize| if active[i] { 1.0 / design.kappa[i] } else { 0.0 };
    let noise = NoiseSpec {
        angle_deg,
        range_level: [range(4), range(5)],
        distribution: sim_cfg.distribution.unwrap_or_default(),
        seed: cli.seed.or(sim_cfg.seed).unwrap_or(0),
    };
    let x0_hat = sim::offset_estimate(&cr.initial_state, sim_cfg.init_offset.unwrap_or(0.1));
    let scheduling = sim_cfg.scheduling.unwrap_or_default();
    let trace = sim::simulate(&cr, &l, &noise, &x0_hat, scheduling)?;
    let m = trace.metrics();

    let path = ctx.out.join(format!("trace_{}.csv", result.norm));
    io::write_trace_csv(BufWriter::new(File::create(&path)?), &trace)?;
    std::fs::write(ctx.out.join(format!("metrics_{}.json", result.norm)), io::to_json(&m)? + "\n")?;
    println!("noise {angle_deg:.4}° ({:?}), seed {}, scheduling {scheduling:?}", noise.distribution, noise.seed);
    println!("RMS ε after transient  {:.6e}", m.rms_error);
    println!("peak ε                 {:.6e}", m.peak_error);
    println!("ε variance             {:.6e}", m.error_variance);
    match m.convergence_time {
        Some(t) => println!("convergence time       {t:.4}"),
        None => println!("convergence time       not reached"),
    }
    println!("trace written to {}", path.display());
    Ok(())
}

fn cmd_verify(cli: &Cli, ctx: &Env) -> Result<()> {
    let result = load_result(cli)?;
    let plant = ctx.cfg.plant(&ctx.base)?;
    check_dims(&result, plant.n_x(), plant.n_y(), cli.result.as_deref().unwrap())?;
    let opts = CertifyOptions { seed: cli.seed.unwrap_or(0), ..CertifyOptions::default() };
    let report = certify(&plant, &result, &opts)?;
    let path = ctx.out.join(format!("certificate_{}.json", result.norm));
    std::fs::write(&path, io::to_json(&report)? + "\n")?;
    println!(
        "{} frozen-parameter points, worst margin {:.3e}, max Re λ {:.3e}, LMI residual {:.3e}",
        report.points.len(),
        report.worst_norm_margin,
        report.worst_spectral_abscissa,
        report.certificate_residual.unwrap_or(f64::NAN)
    );
    println!("report written to {}", path.display());
    if report.passed {
        println!("certification passed");
        Ok(())
    } else {
        for f in report.failures.iter().take(10) {
            println!("  {f}");
        }
        Err(Exit(3, format!("certification failed at {} point(s)", report.failures.len())).into())
    }
}
