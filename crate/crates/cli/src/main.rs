use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use wtstab_core::analysis::config::Config;
use wtstab_core::analysis::experiment::{
    bloch_grid, build_wavetrain, run_experiment, summarize_greens, summarize_sim, weight_for, SIM_QUANTITIES,
};
use wtstab_core::analysis::io::{read_wts, series_csv, write_atomic, write_wts};
use wtstab_core::analysis::fit_decay;
use wtstab_core::bloch::{compute_dispersion, verify_spectral_stability};
use wtstab_core::field::{Fft2, Field2D};
use wtstab_core::greens::run_greens;
use wtstab_core::kernel::{check_integral_identity, random_identity_params, Identity};
use wtstab_core::phase::{extract_phase_and_residual, time_derivative};
use wtstab_core::sim2d::{
    geometric_schedule, make_perturbation, nonlinear_evolve, weighted_sup, PerturbationKind, WeightedNormSeries,
};
use wtstab_core::wavetrain::GridProfile;

#[derive(Parser)]
#[command(name = "wtstab", version, about = "Wave-train stability toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration file; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set wavetrain.q2=0.3`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
}

impl Common {
    fn load(&self) -> Result<Config> {
        Ok(Config::load(self.config.as_deref(), &self.set)?)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Wave-train profiles.
    Wavetrain {
        #[command(subcommand)]
        cmd: WavetrainCmd,
    },
    /// Bloch spectra and dispersion coefficients.
    Bloch {
        #[command(subcommand)]
        cmd: BlochCmd,
    },
    /// Phase-kernel integral identities.
    Kernel {
        #[command(subcommand)]
        cmd: KernelCmd,
    },
    /// Linear evolution of a narrow Gaussian source.
    Greens {
        #[command(subcommand)]
        cmd: RunCmd,
    },
    /// Nonlinear evolution of a perturbed wave train.
    Sim {
        #[command(subcommand)]
        cmd: RunCmd,
    },
    /// Phase extraction from stored snapshots.
    Phase {
        #[command(subcommand)]
        cmd: PhaseCmd,
    },
    /// Power-law fits.
    Fit {
        #[command(subcommand)]
        cmd: FitCmd,
    },
    /// Full cached pipeline.
    Experiment {
        #[command(subcommand)]
        cmd: ExperimentCmd,
    },
}

#[derive(Subcommand)]
enum WavetrainCmd {
    Solve {
        #[command(flatten)]
        common: Common,
        /// Write the JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum BlochCmd {
    /// Check (D1)–(D3) on the configured ν grid.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Also dump the leading eigenvalues as CSV.
        #[arg(long)]
        surface: Option<PathBuf>,
    },
    /// Dispersion coefficients α, θ, d⊥ and their cross-checks.
    Dispersion {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Subcommand)]
enum KernelCmd {
    CheckIdentities {
        /// Random parameter draws per identity.
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Restrict to one identity (A4, A5, A6, I54a, I54b, I58a, I58b).
        #[arg(long)]
        identity: Option<String>,
    },
}

#[derive(Subcommand)]
enum RunCmd {
    Run {
        #[command(flatten)]
        common: Common,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Custom initial perturbation (`sim run` only).
        #[arg(long)]
        v0: Option<PathBuf>,
        /// Skip writing snapshot fields.
        #[arg(long)]
        no_fields: bool,
    },
}

#[derive(Subcommand)]
enum PhaseCmd {
    /// Extract ψ from `ṽ` snapshots written by `sim run`.
    Extract {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "phase")]
        out: PathBuf,
        /// Weight constant for the weighted norms.
        #[arg(long, default_value_t = 8.0)]
        m: f64,
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

#[derive(Subcommand)]
enum FitCmd {
    /// Fit `value ≈ C t^p` by least squares in log-log over a window.
    Decay {
        csv: PathBuf,
        #[arg(long, default_value = "t")]
        time_column: String,
        /// Value column; defaults to the second column.
        #[arg(long)]
        column: Option<String>,
        /// Keep only rows where COLUMN equals VALUE.
        #[arg(long, value_name = "COLUMN=VALUE")]
        filter: Vec<String>,
        #[arg(long, default_value_t = 5.0)]
        lo: f64,
        #[arg(long, default_value_t = 100.0)]
        hi: f64,
    },
}

#[derive(Subcommand)]
enum ExperimentCmd {
    Run {
        #[command(flatten)]
        common: Common,
        /// Directory holding `runs/<digest>/`.
        #[arg(long, default_value = ".")]
        root: PathBuf,
        /// Simulate even if (D1)–(D3) fail.
        #[arg(long)]
        force: bool,
    },
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn save_json(path: &Path, v: &impl serde::Serialize) -> Result<()> {
    write_atomic(path, serde_json::to_string_pretty(v)?.as_bytes())?;
    Ok(())
}

fn main() -> Result<()> {
    if let Ok(n) = std::env::var("WTSTAB_THREADS") {
        let n: usize = n.parse().context("WTSTAB_THREADS must be a positive integer")?;
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    match Cli::parse().cmd {
        Cmd::Wavetrain {
            cmd: WavetrainCmd::Solve { common, out },
        } => {
            let cfg = common.load()?;
            let sys = cfg.system()?;
            let wt = build_wavetrain(&cfg, &sys)?;
            match out {
                Some(p) => save_json(&p, &wt.to_json())?,
                None => print_json(&wt.to_json())?,
            }
        }
        Cmd::Bloch {
            cmd: BlochCmd::Verify { common, surface },
        } => {
            let cfg = common.load()?;
            let sys = cfg.system()?;
            let wt = build_wavetrain(&cfg, &sys)?;
            let grid = bloch_grid(&cfg, &sys, &wt)?;
            let r = verify_spectral_stability(&sys, &wt, &grid, cfg.bloch.n_modes)?;
            if let (Some(path), Some(s)) = (surface, &r.surface) {
                write_atomic(&path, s.to_csv().as_bytes())?;
            }
            let d = r.dispersion.as_ref();
            print_json(&json!({
                "d1": r.d1, "d2": r.d2, "d3": r.d3, "eta": r.eta, "eps": r.eps,
                "alpha": d.map(|d| d.alpha), "theta": d.map(|d| d.theta), "d_perp": d.map(|d| d.d_perp),
                "h_constant": d.map(|d| d.h_constant), "boundary_margin": r.boundary_margin,
                "d2_predicate": r.d2_predicate,
            }))?;
        }
        Cmd::Bloch {
            cmd: BlochCmd::Dispersion { common },
        } => {
            let cfg = common.load()?;
            let sys = cfg.system()?;
            let wt = build_wavetrain(&cfg, &sys)?;
            print_json(&compute_dispersion(&sys, &wt, cfg.bloch.n_modes, cfg.bloch.fd_step)?)?;
        }
        Cmd::Kernel {
            cmd: KernelCmd::CheckIdentities { samples, seed, identity },
        } => check_identities(samples, seed, identity.as_deref())?,
        Cmd::Greens {
            cmd: RunCmd::Run { common, out, no_fields, .. },
        } => greens(&common.load()?, &out, !no_fields)?,
        Cmd::Sim {
            cmd: RunCmd::Run { common, out, v0, no_fields },
        } => sim(&common.load()?, &out, v0.as_deref(), !no_fields)?,
        Cmd::Phase {
            cmd: PhaseCmd::Extract { common, out, m, files },
        } => phase(&common.load()?, &out, m, &files)?,
        Cmd::Fit {
            cmd: FitCmd::Decay { csv, time_column, column, filter, lo, hi },
        } => fit(&csv, &time_column, column.as_deref(), &filter, (lo, hi))?,
        Cmd::Experiment {
            cmd: ExperimentCmd::Run { common, root, force },
        } => {
            let mut cfg = common.load()?;
            cfg.analysis.force |= force;
            let rec = run_experiment(&cfg, &root)?;
            if let Some(why) = &rec.summary.stopped {
                eprintln!("stopped: {why}");
            }
            print_json(&rec)?;
        }
    }
    Ok(())
}

fn check_identities(samples: usize, seed: u64, only: Option<&str>) -> Result<()> {
    use rand::SeedableRng;
    let ids: Vec<Identity> = match only {
        Some(name) => vec![Identity::parse(name).with_context(|| format!("unknown identity `{name}`"))?],
        None => Identity::ALL.to_vec(),
    };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    println!("identity,params,closed,quadrature,abs_error");
    for id in ids {
        for _ in 0..samples {
            let p = random_identity_params(id, &mut rng);
            let c = check_integral_identity(id, &p)?;
            let params = format!(
                "a={};b={}{:+}i;m={};t={};s={};zeta={};y={};alpha={};beta={};gamma={}",
                p.a, p.b.re, p.b.im, p.m, p.t, p.s, p.zeta, p.y, p.alpha, p.beta, p.gamma
            );
            println!(
                "{},{params},{:.15e},{:.15e},{:.3e}",
                id.name(),
                c.closed.re,
                c.quadrature.re,
                c.abs_error()
            );
        }
    }
    Ok(())
}

fn greens(cfg: &Config, out: &Path, fields: bool) -> Result<()> {
    let sys = cfg.system()?;
    let wt = build_wavetrain(&cfg.clone(), &sys)?;
    let disp = compute_dispersion(&sys, &wt, cfg.bloch.n_modes, cfg.bloch.fd_step)?;
    let kernel = disp.kernel_params()?;
    let grid = cfg.grid.grid()?;
    let times = geometric_schedule(cfg.stepper.t_min, cfg.analysis.greens_t_final, cfg.stepper.ratio);
    let run = run_greens(&sys, &wt, kernel, grid, cfg.analysis.greens_sigma, &times, &cfg.stepper.opts()?)?;
    let window = (cfg.analysis.fit_lo, cfg.analysis.fit_hi.min(cfg.analysis.greens_t_final));
    let summary = summarize_greens(&run, window)?;
    if fields {
        write_wts(&out.join("fields").join("source.wts"), &run.v0)?;
        for (i, s) in run.snapshots.iter().enumerate() {
            write_wts(&out.join("fields").join(format!("greens_{i:03}.wts")), s)?;
        }
    }
    save_json(&out.join("greens.json"), &summary)?;
    print_json(&json!({
        "exponent_full": summary.exponent_full.as_ref().map(|f| f.exponent),
        "exponent_residual": summary.exponent_residual.as_ref().map(|f| f.exponent),
        "bound_c": summary.bound.as_ref().map(|b| b.template.c),
        "bound_m": summary.bound.as_ref().map(|b| b.template.m),
        "bound_violation": summary.bound.as_ref().map(|b| b.violation),
        "guard_time": summary.guard_time,
        "window": summary.window,
        "notes": summary.notes,
    }))
}

fn load_field(path: &Path, cfg: &Config) -> Result<Field2D> {
    let f = read_wts(path)?
        .into_field(cfg.grid.lx, cfg.grid.ly)
        .with_context(|| format!("{}", path.display()))?;
    Ok(f)
}

fn sim(cfg: &Config, out: &Path, v0_path: Option<&Path>, fields: bool) -> Result<()> {
    let sys = cfg.system()?;
    let wt = build_wavetrain(cfg, &sys)?;
    let disp = compute_dispersion(&sys, &wt, cfg.bloch.n_modes, cfg.bloch.fd_step)?;
    let grid = cfg.grid.grid()?;
    let spec = cfg.perturbation.spec()?;
    let custom = match v0_path {
        Some(p) => Some(load_field(p, cfg)?),
        None if spec.kind == PerturbationKind::CustomField => bail!("perturbation.kind = custom needs --v0 <file.wts>"),
        None => None,
    };
    let pert = make_perturbation(&spec, grid, &wt, custom.as_ref())?;
    let mut snaps = vec![{
        let mut f = pert.field.clone();
        f.t = 0.0;
        f
    }];
    snaps.extend(
        nonlinear_evolve(&sys, &wt, &pert.field, &cfg.stepper.schedule(), &cfg.stepper.opts()?)?
            .into_iter()
            .map(|s| s.vtilde),
    );
    if fields {
        for (i, s) in snaps.iter().enumerate() {
            write_wts(&out.join("fields").join(format!("vtilde_{i:03}.wts")), s)?;
        }
    }
    let s = summarize_sim(
        &wt,
        &disp,
        &snaps,
        spec.kind,
        weight_for(cfg)?,
        (cfg.analysis.fit_lo, cfg.analysis.fit_hi),
        cfg.analysis.weight_m,
        (pert.weighted_bound, pert.weight_m),
    )?;
    save_json(&out.join("sim.json"), &s)?;
    let series: Vec<&WeightedNormSeries> = s.weighted.iter().collect();
    write_atomic(&out.join("weighted.csv"), series_csv(&series).as_bytes())?;
    let exps: serde_json::Map<String, serde_json::Value> = SIM_QUANTITIES
        .iter()
        .map(|q| (q.to_string(), json!(s.exponent(q))))
        .collect();
    print_json(&json!({
        "window": s.window, "guard_time": s.guard_time, "weight_m": s.weight_m,
        "initial_bound": s.initial_bound, "exponents": exps, "flagged_points": s.flagged_points,
        "notes": s.notes,
    }))
}

fn phase(cfg: &Config, out: &Path, m: f64, files: &[PathBuf]) -> Result<()> {
    let sys = cfg.system()?;
    let wt = build_wavetrain(cfg, &sys)?;
    let disp = compute_dispersion(&sys, &wt, cfg.bloch.n_modes, cfg.bloch.fd_step)?;
    let weight = weight_for(cfg)?;
    let mut snaps: Vec<(PathBuf, Field2D)> = files
        .iter()
        .map(|p| Ok((p.clone(), load_field(p, cfg)?)))
        .collect::<Result<_>>()?;
    snaps.sort_by(|a, b| a.1.t.total_cmp(&b.1.t));
    let grid = snaps[0].1.grid;
    let fft = Fft2::new(grid);
    let base = GridProfile::new(&wt, &grid).field(grid, 0);
    let mut phases = Vec::with_capacity(snaps.len());
    for (path, s) in &snaps {
        if s.grid != grid {
            bail!("{}: grid differs from the first snapshot", path.display());
        }
        let mut u = base.add(s);
        u.t = s.t;
        let (psi, _, _) = extract_phase_and_residual(&u, &wt, &fft).with_context(|| format!("{}", path.display()))?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("snapshot");
        write_wts(&out.join(format!("psi_{stem}.wts")), &psi.psi)?;
        phases.push(psi);
    }
    let mut series: Vec<WeightedNormSeries> = ["psi", "psi_d1", "psi_d2"]
        .iter()
        .map(|q| WeightedNormSeries::new(q, weight, m))
        .collect();
    let abs_sum = |fs: &[&Field2D]| -> Vec<f64> {
        let mut acc = vec![0.0; grid.len()];
        for f in fs {
            acc.iter_mut().zip(&f.data).for_each(|(a, x)| *a += x.abs());
        }
        acc
    };
    let last = phases.len() - 1;
    for (k, p) in phases.iter().enumerate() {
        let d = p.derivatives(&fft);
        let mut d1 = abs_sum(&[&d.z, &d.y]);
        let mut d2 = abs_sum(&[&d.zz, &d.zy, &d.yy]);
        // ψ_t only where both neighbours exist
        if k > 0 && k < last {
            let pt = time_derivative(&phases[k - 1], p, &phases[k + 1])?;
            d1.iter_mut().zip(&pt.data).for_each(|(a, x)| *a += x.abs());
            let extra = abs_sum(&[&fft.derivative(&pt, 1, 0), &fft.derivative(&pt, 0, 1)]);
            d2.iter_mut().zip(&extra).for_each(|(a, x)| *a += x);
        }
        let planes = [abs_sum(&[&p.psi]), d1, d2];
        for (ser, plane) in series.iter_mut().zip(&planes) {
            ser.push(p.t, weighted_sup(&grid, plane, weight, disp.alpha, p.t, m));
        }
    }
    let refs: Vec<&WeightedNormSeries> = series.iter().collect();
    write_atomic(&out.join("phase.csv"), series_csv(&refs).as_bytes())?;
    eprintln!("{} snapshots → {}", phases.len(), out.display());
    Ok(())
}

fn fit(path: &Path, t_col: &str, col: Option<&str>, filters: &[String], window: (f64, f64)) -> Result<()> {
    let text = std::fs::read_to_string(path).with_context(|| format!("{}", path.display()))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines.next().context("empty CSV")?.split(',').map(str::trim).collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .with_context(|| format!("no column `{name}` in {header:?}"))
    };
    let ti = find(t_col)?;
    let vi = match col {
        Some(c) => find(c)?,
        None => (0..header.len()).find(|&i| i != ti).context("CSV has a single column")?,
    };
    let filters: Vec<(usize, String)> = filters
        .iter()
        .map(|f| {
            let (k, v) = f.split_once('=').with_context(|| format!("filter `{f}` is not COLUMN=VALUE"))?;
            Ok((find(k.trim())?, v.trim().to_string()))
        })
        .collect::<Result<_>>()?;
    let (mut ts, mut vs) = (Vec::new(), Vec::new());
    for (n, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if filters.iter().any(|(i, v)| cells.get(*i) != Some(&v.as_str())) {
            continue;
        }
        let parse = |i: usize| -> Result<f64> {
            cells
                .get(i)
                .with_context(|| format!("row {}: missing column {i}", n + 2))?
                .parse()
                .with_context(|| format!("row {}: not a number", n + 2))
        };
        ts.push(parse(ti)?);
        vs.push(parse(vi)?);
    }
    print_json(&fit_decay(&ts, &vs, window)?)
}
