//! Stage pipelines (wave train → Bloch → kernel → Green's function → nonlinear
//! run → phase → fits) and the cached run directory `runs/<digest>/`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use super::config::Config;
use super::io::{series_csv, table_csv, write_atomic, write_wts};
use super::{fit_decay, measure_template_eta, DecayFit, EtaSeries, TemplateSnapshot, TemplateVariant};
use crate::bloch::{compute_dispersion, verify_spectral_stability, BlochGrid, DispersionData, StabilityReport};
use crate::field::{Fft2, Field2D, Grid2D};
use crate::greens::{decompose_greens, fit_pointwise_bound, guard_time, projection_masses, run_greens, BoundFit, GreensRun};
use crate::kernel::PhaseKernelParams;
use crate::model::ReactionDiffusionSystem;
use crate::phase::{extract_phase_and_residual, time_derivative, PhaseField, PhaseMethod};
use crate::sim2d::{
    make_perturbation, nonlinear_evolve, weighted_sup, PerturbationKind, WeightKind, WeightedNormSeries,
    WEIGHT_M_CANDIDATES,
};
use crate::stepper::StepperOpts;
use crate::wavetrain::{closed_form_lambda_omega, solve_profile, ProfileGuess, WaveTrain};
use crate::{Error, Result};

/// Wave train for the configured system and wavenumber: the closed form for
/// λ–ω systems, polished by Newton on the collocation system.
pub fn build_wavetrain(cfg: &Config, sys: &ReactionDiffusionSystem) -> Result<WaveTrain> {
    let k = cfg.wavenumber();
    let q = std::f64::consts::TAU * k;
    let n_modes = cfg.wavetrain.n_modes;
    if sys.as_lambda_omega().is_none() {
        return Err(Error::NoWaveTrain(format!(
            "model `{}` has no built-in initial guess; only λ–ω systems are supported",
            sys.name
        )));
    }
    let closed = closed_form_lambda_omega(sys, q, n_modes)?;
    if q == 0.0 {
        return Ok(closed);
    }
    let guess = ProfileGuess {
        profile: closed.profile.clone(),
        omega: closed.omega,
    };
    solve_profile(sys, k, &guess, n_modes, cfg.wavetrain.tol)
}

pub fn bloch_grid(cfg: &Config, sys: &ReactionDiffusionSystem, wt: &WaveTrain) -> Result<BlochGrid> {
    let max = cfg
        .bloch
        .nu_y_max
        .unwrap_or_else(|| crate::bloch::default_nu_y_max(sys, wt));
    BlochGrid::new(cfg.bloch.nu_x_points, cfg.bloch.nu_y_points, max)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GreensSummary {
    pub times: Vec<f64>,
    pub sup_full: Vec<f64>,
    pub sup_residual: Vec<f64>,
    pub window: (f64, f64),
    pub guard_time: f64,
    pub exponent_full: Option<DecayFit>,
    pub exponent_residual: Option<DecayFit>,
    pub bound: Option<BoundFit>,
    /// `(t, ∫∫u_ad·G v0, ∫∫u_ad·(u∞′ e v0))`.
    pub projection: Vec<(f64, f64, f64)>,
    pub notes: Vec<String>,
}

/// Linear evolution of a narrow Gaussian source, split into the `e`-part and
/// the residual, with decay fits over `window` (clipped to the guard time).
#[allow(clippy::too_many_arguments)]
pub fn analyze_greens(
    sys: &ReactionDiffusionSystem,
    wt: &WaveTrain,
    kernel: &PhaseKernelParams,
    grid: Grid2D,
    sigma: f64,
    times: &[f64],
    opts: &StepperOpts,
    window: (f64, f64),
) -> Result<GreensSummary> {
    let run = run_greens(sys, wt, kernel.clone(), grid, sigma, times, opts)?;
    summarize_greens(&run, window)
}

/// Fits and bound for an existing Green's run.
pub fn summarize_greens(run: &GreensRun, window: (f64, f64)) -> Result<GreensSummary> {
    let resid = decompose_greens(run)?;
    let kernel = &run.kernel;
    let grid = run.v0.grid;
    let guard = guard_time(&grid, kernel.alpha, kernel.theta, kernel.d_perp);
    let window = (window.0, window.1.min(guard));
    let ts: Vec<f64> = run.snapshots.iter().map(|s| s.t).collect();
    let sup_full: Vec<f64> = run.snapshots.iter().map(|s| s.sup_norm()).collect();
    let sup_residual: Vec<f64> = resid.iter().map(|s| s.sup_norm()).collect();
    let mut notes = Vec::new();
    let mut fit = |vals: &[f64], name: &str| match fit_decay(&ts, vals, window) {
        Ok(f) => Some(f),
        Err(e) => {
            notes.push(format!("{name}: {e}"));
            None
        }
    };
    let exponent_full = fit(&sup_full, "full");
    let exponent_residual = fit(&sup_residual, "residual");
    let in_window: Vec<Field2D> = resid
        .iter()
        .filter(|s| s.t <= window.1 + 1e-9)
        .cloned()
        .collect();
    let bound = match fit_pointwise_bound(&in_window, (1.0, 0.5), kernel.alpha, (run.source.center_zeta, run.source.center_y)) {
        Ok(b) => Some(b),
        Err(e) => {
            notes.push(format!("bound: {e}"));
            None
        }
    };
    Ok(GreensSummary {
        times: ts,
        sup_full,
        sup_residual,
        window,
        guard_time: guard,
        exponent_full,
        exponent_residual,
        bound,
        projection: projection_masses(run),
        notes,
    })
}

/// Quantities tracked for nonlinear runs, in output order.
pub const SIM_QUANTITIES: [&str; 8] = [
    "vtilde",
    "vtilde_zeta",
    "vtilde_y",
    "v",
    "v_zeta",
    "psi",
    "psi_d1",
    "psi_d2",
];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimSummary {
    pub kind: PerturbationKind,
    pub weight_kind: WeightKind,
    pub times: Vec<f64>,
    pub window: (f64, f64),
    pub guard_time: f64,
    pub weight_m: f64,
    /// Initial weighted bound `e^{W/M}(‖v0‖ + ‖∂_ζ v0‖)` and its `M`.
    pub initial_bound: (f64, f64),
    /// Plain sup-norms per quantity.
    pub sup: BTreeMap<String, Vec<f64>>,
    pub weighted: Vec<WeightedNormSeries>,
    pub exponents: BTreeMap<String, DecayFit>,
    pub weighted_exponents: BTreeMap<String, DecayFit>,
    pub eta: EtaSeries,
    /// Points where the phase fit left its branch, summed over snapshots.
    pub flagged_points: usize,
    /// `ψ_t` (hence the time-derivative terms) is missing at the first and
    /// last snapshot.
    pub psi_t_missing: Vec<f64>,
    pub notes: Vec<String>,
}

impl SimSummary {
    pub fn exponent(&self, q: &str) -> Option<f64> {
        self.exponents.get(q).map(|f| f.exponent)
    }
}

fn abs_plane(f: &Field2D) -> Vec<f64> {
    f.norms()
}

fn add_abs(acc: &mut [f64], f: &Field2D) {
    acc.iter_mut().zip(&f.data).for_each(|(a, x)| *a += x.abs());
}

/// Nonlinear evolution of `u∞ + v0` and all derived series: phase, shifted
/// residual, derivatives, weighted norms for each candidate `M`, decay fits
/// over `window` (clipped to the guard time) and the template `η`.
#[allow(clippy::too_many_arguments)]
pub fn analyze_sim(
    sys: &ReactionDiffusionSystem,
    wt: &WaveTrain,
    disp: &DispersionData,
    v0: &Field2D,
    kind: PerturbationKind,
    weight: WeightKind,
    times: &[f64],
    opts: &StepperOpts,
    window: (f64, f64),
    weight_m: Option<f64>,
    initial_bound: (f64, f64),
) -> Result<SimSummary> {
    let mut first = v0.clone();
    first.t = 0.0;
    let mut snaps = vec![first];
    snaps.extend(
        nonlinear_evolve(sys, wt, v0, times, opts)?
            .into_iter()
            .map(|s| s.vtilde),
    );
    summarize_sim(wt, disp, &snaps, kind, weight, window, weight_m, initial_bound)
}

/// Derived series and fits for stored snapshots `ṽ(t)` (the first at `t = 0`).
#[allow(clippy::too_many_arguments)]
pub fn summarize_sim(
    wt: &WaveTrain,
    disp: &DispersionData,
    snaps: &[Field2D],
    kind: PerturbationKind,
    weight: WeightKind,
    window: (f64, f64),
    weight_m: Option<f64>,
    initial_bound: (f64, f64),
) -> Result<SimSummary> {
    if snaps.len() < 3 {
        return Err(Error::InsufficientData(format!("{} snapshots; need at least 3", snaps.len())));
    }
    let grid = snaps[0].grid;
    let fft = Fft2::new(grid);
    let alpha = disp.alpha;
    let guard = match weight {
        WeightKind::Line { beta, .. } if beta.abs() < 1e-12 => (0.5 * grid.ly / 8.0).powi(2) / disp.d_perp,
        _ => guard_time(&grid, alpha, disp.theta, disp.d_perp),
    };
    let window = (window.0, window.1.min(guard));
    let prof = crate::wavetrain::GridProfile::new(wt, &grid);
    let base = prof.field(grid, 0);

    // phases and shifted residuals first: ψ_t needs neighbours
    let mut phases = Vec::with_capacity(snaps.len());
    let mut shifted = Vec::with_capacity(snaps.len());
    let mut flagged = 0;
    for s in snaps {
        let mut u = base.add(s);
        u.t = s.t;
        let (psi, v, vz) = extract_phase_and_residual(&u, wt, &fft)?;
        flagged += psi.flagged;
        phases.push(psi);
        shifted.push((abs_plane(&v), abs_plane(&vz)));
    }

    let mut sup: BTreeMap<String, Vec<f64>> = SIM_QUANTITIES.iter().map(|q| (q.to_string(), Vec::new())).collect();
    let mut per_m: Vec<Vec<WeightedNormSeries>> = WEIGHT_M_CANDIDATES
        .iter()
        .map(|&m| SIM_QUANTITIES.iter().map(|q| WeightedNormSeries::new(q, weight, m)).collect())
        .collect();
    let mut eta_inputs: Vec<TemplateSnapshot> = Vec::with_capacity(snaps.len());
    let mut psi_t_missing = Vec::new();
    let last = snaps.len() - 1;
    for (k, s) in snaps.iter().enumerate() {
        let t = s.t;
        let (dz, dy) = (fft.derivative(s, 1, 0), fft.derivative(s, 0, 1));
        let phase: &PhaseField = &phases[k];
        let d = phase.derivatives(&fft);
        let mut d1 = abs_plane(&d.z);
        add_abs(&mut d1, &d.y);
        let mut d2 = abs_plane(&d.zz);
        add_abs(&mut d2, &d.zy);
        add_abs(&mut d2, &d.yy);
        if k > 0 && k < last {
            let pt = time_derivative(&phases[k - 1], phase, &phases[k + 1])?;
            add_abs(&mut d1, &pt);
            add_abs(&mut d2, &fft.derivative(&pt, 1, 0));
            add_abs(&mut d2, &fft.derivative(&pt, 0, 1));
        } else {
            psi_t_missing.push(t);
        }
        let planes: [Vec<f64>; 8] = [
            abs_plane(s),
            abs_plane(&dz),
            abs_plane(&dy),
            shifted[k].0.clone(),
            shifted[k].1.clone(),
            abs_plane(&phase.psi),
            d1,
            d2,
        ];
        for (q, p) in SIM_QUANTITIES.iter().zip(&planes) {
            sup.get_mut(*q).expect("quantity").push(p.iter().copied().fold(0.0, f64::max));
        }
        for (mi, &m) in WEIGHT_M_CANDIDATES.iter().enumerate() {
            for (qi, p) in planes.iter().enumerate() {
                per_m[mi][qi].push(t, weighted_sup(&grid, p, weight, alpha, t, m));
            }
        }
        let dsum: Vec<f64> = planes[6].iter().zip(&planes[7]).map(|(a, b)| a + b).collect();
        let [vt, vtz, _, v, vz, psi, _, _] = planes;
        eta_inputs.push(TemplateSnapshot {
            t,
            vtilde: Some(vt),
            v: Some(v),
            psi: Some(psi),
            dpsi: Some(dsum),
            vtilde_z: Some(vtz),
            v_z: Some(vz),
        });
    }

    let m = weight_m.unwrap_or_else(|| {
        WEIGHT_M_CANDIDATES
            .iter()
            .enumerate()
            .find(|(mi, _)| !per_m[*mi][0].any_boundary_in(window.0, window.1))
            .map(|(_, &m)| m)
            .unwrap_or(WEIGHT_M_CANDIDATES[WEIGHT_M_CANDIDATES.len() - 1])
    });
    let weighted: Vec<WeightedNormSeries> = match WEIGHT_M_CANDIDATES.iter().position(|&c| c == m) {
        Some(mi) => per_m.swap_remove(mi),
        None => {
            // a fixed M outside the candidates: recompute from the η inputs is
            // not possible for every quantity, so only the candidates are allowed
            return Err(Error::ConfigInvalid(format!(
                "analysis.weight_m must be one of {WEIGHT_M_CANDIDATES:?}, got {m}"
            )));
        }
    };
    let variant = match weight {
        WeightKind::Localized => TemplateVariant::Localized,
        WeightKind::Line { .. } => TemplateVariant::Nonlocalized,
    };
    let eta = measure_template_eta(&grid, &eta_inputs, variant, weight, alpha, m)?;

    let ts: Vec<f64> = snaps.iter().map(|s| s.t).collect();
    let mut notes = Vec::new();
    let mut exponents = BTreeMap::new();
    let mut weighted_exponents = BTreeMap::new();
    for q in SIM_QUANTITIES {
        match fit_decay(&ts, &sup[q], window) {
            Ok(f) => {
                exponents.insert(q.to_string(), f);
            }
            Err(e) => notes.push(format!("{q}: {e}")),
        }
    }
    for s in &weighted {
        if let Ok(f) = fit_decay(&s.times, &s.values, window) {
            weighted_exponents.insert(s.quantity.clone(), f);
        }
        if s.any_boundary_in(window.0, window.1) {
            notes.push(format!("weighted {} touches the boundary ring", s.quantity));
        }
    }
    Ok(SimSummary {
        kind,
        weight_kind: weight,
        times: ts,
        window,
        guard_time: guard,
        weight_m: m,
        initial_bound,
        sup,
        weighted,
        exponents,
        weighted_exponents,
        eta,
        flagged_points: flagged,
        psi_t_missing,
        notes,
    })
}

pub fn weight_for(cfg: &Config) -> Result<WeightKind> {
    let spec = cfg.perturbation.spec()?;
    Ok(match spec.kind {
        PerturbationKind::LineLocalized => WeightKind::Line {
            beta: spec.beta_gamma.0,
            gamma: spec.beta_gamma.1,
        },
        _ => WeightKind::Localized,
    })
}

/// Summary written to `summary.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config_digest: String,
    pub version: String,
    pub k: f64,
    pub omega: f64,
    pub alpha: Option<f64>,
    pub theta: Option<f64>,
    pub d_perp: Option<f64>,
    pub d1: bool,
    pub d2: bool,
    pub d3: bool,
    pub eta: f64,
    pub eps: f64,
    /// Why the pipeline stopped early, if it did.
    pub stopped: Option<String>,
    pub greens_exponent_full: Option<f64>,
    pub greens_exponent_residual: Option<f64>,
    pub greens_bound: Option<BoundFit>,
    pub exponent_vtilde: Option<f64>,
    pub exponent_v_shifted: Option<f64>,
    pub exponent_psi: Option<f64>,
    pub fit_window: Option<(f64, f64)>,
    pub weight_m: Option<f64>,
    pub eta_ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_digest: String,
    pub dir: PathBuf,
    pub summary: ExperimentSummary,
    /// Stages loaded from an earlier run instead of recomputed.
    pub cached_stages: Vec<String>,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub version: String,
}

fn now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn load_json<T: DeserializeOwned>(path: &Path) -> Option<T> {
    let text = std::fs::read_to_string(path).ok()?;
    serde_json::from_str(&text).ok()
}

fn save_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(v)?;
    write_atomic(path, text.as_bytes())
}

/// Runs (or resumes) the full pipeline in `root/runs/<digest>/`.
pub fn run_experiment(cfg: &Config, root: &Path) -> Result<RunRecord> {
    let started = now();
    let digest = cfg.digest();
    let dir = root.join("runs").join(&digest);
    std::fs::create_dir_all(dir.join("series"))?;
    write_atomic(&dir.join("config.resolved"), cfg.resolved().as_bytes())?;
    let mut cached = Vec::new();
    let version = env!("CARGO_PKG_VERSION").to_string();

    let sys = cfg.system().map_err(|e| e.in_stage("model"))?;
    let wt_path = dir.join("wavetrain.json");
    let wt = match load_json(&wt_path).map(|j| WaveTrain::from_json(&j)) {
        Some(Ok(wt)) => {
            cached.push("wavetrain".to_string());
            wt
        }
        _ => {
            let wt = build_wavetrain(cfg, &sys).map_err(|e| e.in_stage("wavetrain"))?;
            save_json(&wt_path, &wt.to_json())?;
            wt
        }
    };

    let bloch_path = dir.join("bloch.json");
    let report: StabilityReport = match load_json(&bloch_path) {
        Some(r) => {
            cached.push("bloch".to_string());
            r
        }
        None => {
            let grid = bloch_grid(cfg, &sys, &wt).map_err(|e| e.in_stage("bloch"))?;
            let r = verify_spectral_stability(&sys, &wt, &grid, cfg.bloch.n_modes).map_err(|e| e.in_stage("bloch"))?;
            save_json(&bloch_path, &r)?;
            if let Some(surface) = &r.surface {
                write_atomic(&dir.join("series").join("spectrum.csv"), surface.to_csv().as_bytes())?;
            }
            r
        }
    };
    let mut summary = ExperimentSummary {
        config_digest: digest.clone(),
        version: version.clone(),
        k: wt.k,
        omega: wt.omega,
        alpha: report.dispersion.as_ref().map(|d| d.alpha),
        theta: report.dispersion.as_ref().map(|d| d.theta),
        d_perp: report.dispersion.as_ref().map(|d| d.d_perp),
        d1: report.d1,
        d2: report.d2,
        d3: report.d3,
        eta: report.eta,
        eps: report.eps,
        stopped: None,
        greens_exponent_full: None,
        greens_exponent_residual: None,
        greens_bound: None,
        exponent_vtilde: None,
        exponent_v_shifted: None,
        exponent_psi: None,
        fit_window: None,
        weight_m: None,
        eta_ratio: None,
    };
    let finish = |summary: ExperimentSummary, cached: Vec<String>| -> Result<RunRecord> {
        save_json(&dir.join("summary.json"), &summary)?;
        let rec = RunRecord {
            config_digest: digest.clone(),
            dir: dir.clone(),
            summary,
            cached_stages: cached,
            started_unix: started,
            finished_unix: now(),
            version: version.clone(),
        };
        save_json(&dir.join("record.json"), &rec)?;
        Ok(rec)
    };

    let stable = report.d1 && report.d2 && report.d3;
    if !stable && !cfg.analysis.force {
        let failed: Vec<&str> = [("(D1)", report.d1), ("(D2)", report.d2), ("(D3)", report.d3)]
            .iter()
            .filter(|p| !p.1)
            .map(|p| p.0)
            .collect();
        summary.stopped = Some(format!("{} fails; rerun with force to simulate anyway", failed.join(", ")));
        return finish(summary, cached);
    }
    let Some(_) = &report.dispersion else {
        summary.stopped = Some("no dispersion data (zero eigenvalue not simple)".into());
        return finish(summary, cached);
    };
    // u_ad is not serialized; recompute the (cheap) dispersion stage
    let disp = compute_dispersion(&sys, &wt, cfg.bloch.n_modes, cfg.bloch.fd_step).map_err(|e| e.in_stage("kernel"))?;
    let kernel = disp.kernel_params().map_err(|e| e.in_stage("kernel"))?;

    let grid = cfg.grid.grid().map_err(|e| e.in_stage("grid"))?;
    let opts = cfg.stepper.opts()?;
    let window = (cfg.analysis.fit_lo, cfg.analysis.fit_hi);

    let greens_path = dir.join("greens.json");
    let greens: GreensSummary = match load_json(&greens_path) {
        Some(g) => {
            cached.push("greens".to_string());
            g
        }
        None => {
            let times = crate::sim2d::geometric_schedule(cfg.stepper.t_min, cfg.analysis.greens_t_final, cfg.stepper.ratio);
            let g = analyze_greens(
                &sys,
                &wt,
                &kernel,
                grid,
                cfg.analysis.greens_sigma,
                &times,
                &opts,
                (window.0, window.1.min(cfg.analysis.greens_t_final)),
            )
            .map_err(|e| e.in_stage("greens"))?;
            save_json(&greens_path, &g)?;
            let rows: Vec<Vec<f64>> = (0..g.times.len())
                .map(|i| vec![g.times[i], g.sup_full[i], g.sup_residual[i]])
                .collect();
            write_atomic(
                &dir.join("series").join("greens.csv"),
                table_csv(&["t", "sup_full", "sup_residual"], &rows).as_bytes(),
            )?;
            g
        }
    };
    summary.greens_exponent_full = greens.exponent_full.as_ref().map(|f| f.exponent);
    summary.greens_exponent_residual = greens.exponent_residual.as_ref().map(|f| f.exponent);
    summary.greens_bound = greens.bound.clone();

    let sim_path = dir.join("sim.json");
    let sim: SimSummary = match load_json(&sim_path) {
        Some(s) => {
            cached.push("sim".to_string());
            s
        }
        None => {
            let spec = cfg.perturbation.spec()?;
            let pert = make_perturbation(&spec, grid, &wt, None).map_err(|e| e.in_stage("sim"))?;
            if cfg.analysis.write_fields {
                write_wts(&dir.join("fields").join("v0.wts"), &pert.field)?;
            }
            let s = analyze_sim(
                &sys,
                &wt,
                &disp,
                &pert.field,
                spec.kind,
                weight_for(cfg)?,
                &cfg.stepper.schedule(),
                &opts,
                window,
                cfg.analysis.weight_m,
                (pert.weighted_bound, pert.weight_m),
            )
            .map_err(|e| e.in_stage("sim"))?;
            save_json(&sim_path, &s)?;
            let series: Vec<&WeightedNormSeries> = s.weighted.iter().collect();
            write_atomic(&dir.join("series").join("weighted.csv"), series_csv(&series).as_bytes())?;
            let mut header = vec!["t"];
            header.extend(SIM_QUANTITIES);
            header.push("eta");
            let rows: Vec<Vec<f64>> = (0..s.times.len())
                .map(|i| {
                    let mut r = vec![s.times[i]];
                    r.extend(SIM_QUANTITIES.iter().map(|q| s.sup[*q][i]));
                    r.push(s.eta.eta[i]);
                    r
                })
                .collect();
            write_atomic(&dir.join("series").join("sup.csv"), table_csv(&header, &rows).as_bytes())?;
            s
        }
    };
    summary.exponent_vtilde = sim.exponent("vtilde");
    summary.exponent_v_shifted = sim.exponent("v");
    summary.exponent_psi = sim.exponent("psi");
    summary.fit_window = Some(sim.window);
    summary.weight_m = Some(sim.weight_m);
    summary.eta_ratio = eta_ratio(&sim.eta, 2.0, sim.window.1);
    finish(summary, cached)
}

/// `max_{t ∈ [t0, t1]} η(t) / η(t0)`, with `t0` the first time `≥ t0`.
pub fn eta_ratio(eta: &EtaSeries, t0: f64, t1: f64) -> Option<f64> {
    let i0 = eta.times.iter().position(|&t| t >= t0 - 1e-9)?;
    let base = eta.eta[i0];
    if !(base > 0.0) {
        return None;
    }
    let top = eta
        .times
        .iter()
        .zip(&eta.eta)
        .filter(|(&t, _)| t >= t0 - 1e-9 && t <= t1 + 1e-9)
        .map(|(_, &e)| e)
        .fold(0.0, f64::max);
    Some(top / base)
}

/// The phase predicted at linear order, for comparison with the direct fit.
pub fn linear_phase(v0: &Field2D, kernel: &PhaseKernelParams, t: f64) -> PhaseField {
    let fft = Fft2::new(v0.grid);
    let p = crate::phase::linear_phase_prediction(v0, kernel, &fft, t);
    debug_assert_eq!(p.method, PhaseMethod::LinearKernel);
    p
}
