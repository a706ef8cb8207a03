//! Linear evolution of localized data (columns of the Green's function), the
//! split `G = u∞′·e + G̃`, and Gaussian pointwise-bound fits.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::field::{Fft2, Field2D, Grid2D};
use crate::kernel::{GaussianBoundTemplate, PhaseKernelParams};
use crate::model::ReactionDiffusionSystem;
use crate::stepper::{SemilinearSolver, StepperOpts};
use crate::wavetrain::{GridProfile, WaveTrain};
use crate::{Error, Result};

/// Smallest number of grid points per period accepted for wave-train runs.
pub const MIN_POINTS_PER_PERIOD: usize = 8;

pub(crate) fn check_grid(wt: &WaveTrain, grid: &Grid2D) -> Result<()> {
    if grid.points_per_period() < MIN_POINTS_PER_PERIOD {
        return Err(Error::IncompatibleGrid(format!(
            "{} points per period; need at least {MIN_POINTS_PER_PERIOD}",
            grid.points_per_period()
        )));
    }
    let harmonics = wt
        .profile
        .max_mode()
        .min((0..=wt.profile.max_mode()).rev().find(|&m| {
            (0..wt.n()).any(|c| wt.profile.coeff(c, m).norm() > 1e-13)
        }).unwrap_or(0));
    if 2 * harmonics as usize >= grid.points_per_period() {
        return Err(Error::IncompatibleGrid(format!(
            "profile has harmonic {harmonics}, unresolved by {} points per period",
            grid.points_per_period()
        )));
    }
    Ok(())
}

/// Integrates `v_t = ℒv` (the linearization about the wave train).
pub fn linear_evolve(
    system: &ReactionDiffusionSystem,
    wt: &WaveTrain,
    v0: &Field2D,
    times: &[f64],
    opts: &StepperOpts,
) -> Result<Vec<Field2D>> {
    check_grid(wt, &v0.grid)?;
    let grid = v0.grid;
    let n = system.n();
    let prof = GridProfile::new(wt, &grid);
    let mut jac = vec![0.0; grid.nx * n * n];
    for i in 0..grid.nx {
        system.jacobian_into(prof.u(i), &mut jac[i * n * n..(i + 1) * n * n]);
    }
    let solver = SemilinearSolver::new(system, wt.k, wt.omega, grid);
    let ny = grid.ny;
    let mut term = move |v: &[Vec<f64>], _t: f64, out: &mut [Vec<f64>]| {
        for i in 0..grid.nx {
            let jm = &jac[i * n * n..(i + 1) * n * n];
            for c in 0..n {
                for d in 0..n {
                    let a = jm[c * n + d];
                    if a == 0.0 {
                        continue;
                    }
                    let src = &v[d][i * ny..(i + 1) * ny];
                    out[c][i * ny..(i + 1) * ny].iter_mut().zip(src).for_each(|(o, x)| *o += a * x);
                }
            }
        }
    };
    solver.evolve(v0, times, opts, &mut term)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GreensSource {
    pub center_zeta: f64,
    pub center_y: f64,
    pub sigma_zeta: f64,
    pub sigma_y: f64,
    pub direction: Vec<f64>,
}

/// Unit-mass Gaussian approximating `δ(ζ − ζ̄₀) δ(y) · direction`.
///
/// The width is `sigma` periods in `ζ` and the same physical length in `y`
/// (`σ_y = σ_ζ / k`), i.e. isotropic in the original `(x, y)` variables.
pub fn gaussian_source(
    grid: Grid2D,
    wt: &WaveTrain,
    sigma: f64,
    center_zeta: f64,
    direction: Option<Vec<f64>>,
) -> (Field2D, GreensSource) {
    let dir = direction.unwrap_or_else(|| crate::sim2d::default_direction(wt, center_zeta));
    let sigma_y = if wt.k > 0.0 { sigma / wt.k } else { sigma };
    let amp = 1.0 / (std::f64::consts::TAU * sigma * sigma_y);
    let v0 = Field2D::from_fn(grid, wt.n(), |z, y, o| {
        let g = amp * (-(z - center_zeta).powi(2) / (2.0 * sigma * sigma) - y * y / (2.0 * sigma_y * sigma_y)).exp();
        o.iter_mut().zip(&dir).for_each(|(o, d)| *o = g * d);
    });
    (
        v0,
        GreensSource {
            center_zeta,
            center_y: 0.0,
            sigma_zeta: sigma,
            sigma_y,
            direction: dir,
        },
    )
}

#[derive(Debug, Clone)]
pub struct GreensRun {
    pub source: GreensSource,
    pub v0: Field2D,
    pub snapshots: Vec<Field2D>,
    pub kernel: PhaseKernelParams,
    pub wavetrain_digest: u64,
}

pub fn run_greens(
    system: &ReactionDiffusionSystem,
    wt: &WaveTrain,
    kernel: PhaseKernelParams,
    grid: Grid2D,
    sigma: f64,
    times: &[f64],
    opts: &StepperOpts,
) -> Result<GreensRun> {
    let (v0, source) = gaussian_source(grid, wt, sigma, 0.0, None);
    let snapshots = linear_evolve(system, wt, &v0, times, opts)?;
    Ok(GreensRun {
        source,
        v0,
        snapshots,
        kernel,
        wavetrain_digest: wt.digest(),
    })
}

/// Symbol of the scalar Gaussian factor of `e` at time `t`:
/// `χ(t) exp(−θtκ_ζ² − d⊥tκ_y² + iκ_ζαt)`.
pub fn kernel_symbol(kernel: &PhaseKernelParams, grid: &Grid2D, t: f64) -> Vec<Complex64> {
    let chi = kernel.chi.value(t);
    let mut out = vec![Complex64::new(0.0, 0.0); grid.len()];
    if chi == 0.0 {
        return out;
    }
    for i in 0..grid.nx {
        let kx = grid.kappa_zeta(i);
        for j in 0..grid.ny {
            let ky = grid.kappa_y(j);
            out[i * grid.ny + j] = Complex64::from_polar(
                chi * (-kernel.theta * t * kx * kx - kernel.d_perp * t * ky * ky).exp(),
                kx * kernel.alpha * t,
            );
        }
    }
    out
}

/// `∫∫ e(ζ, ζ̄, y − ȳ, t) v0(ζ̄, ȳ) dζ̄ dȳ` as a scalar field, by FFT
/// convolution of the Gaussian factor with `u_ad · v0`.
pub fn kernel_convolution(v0: &Field2D, kernel: &PhaseKernelParams, fft: &Fft2, t: f64) -> Field2D {
    let grid = v0.grid;
    let mut out = Field2D::zeros(grid, 1);
    out.t = t;
    if kernel.chi.value(t) == 0.0 {
        return out;
    }
    let n = v0.n;
    let mut ad = vec![0.0; n];
    let mut src = Field2D::zeros(grid, 1);
    for i in 0..grid.nx {
        kernel.u_ad.eval(grid.zeta(i).rem_euclid(1.0), 0, &mut ad);
        for j in 0..grid.ny {
            let v = v0.at(i, j);
            src.at_mut(i, j)[0] = (0..n).map(|c| ad[c] * v[c]).sum();
        }
    }
    let mut conv = fft.apply_multiplier(&src, &kernel_symbol(kernel, &grid, t));
    conv.t = t;
    conv
}

/// `u∞′(ζ) · ∫∫ e v0` on the grid.
pub fn translational_part(v0: &Field2D, kernel: &PhaseKernelParams, fft: &Fft2, t: f64) -> Field2D {
    let conv = kernel_convolution(v0, kernel, fft, t);
    let grid = v0.grid;
    let n = v0.n;
    let mut out = Field2D::zeros(grid, n);
    out.t = t;
    let mut up = vec![0.0; n];
    for i in 0..grid.nx {
        kernel.uprime.eval(grid.zeta(i).rem_euclid(1.0), 0, &mut up);
        for j in 0..grid.ny {
            let s = conv.at(i, j)[0];
            out.at_mut(i, j).iter_mut().zip(&up).for_each(|(o, u)| *o = u * s);
        }
    }
    out
}

/// Residual snapshots `G̃ v0 = G v0 − u∞′ e v0`.
pub fn decompose_greens(run: &GreensRun) -> Result<Vec<Field2D>> {
    if run.kernel.wavetrain_digest != run.wavetrain_digest {
        return Err(Error::KernelMismatch);
    }
    let fft = Fft2::new(run.v0.grid);
    Ok(run
        .snapshots
        .iter()
        .map(|s| {
            let mut r = s.sub(&translational_part(&run.v0, &run.kernel, &fft, s.t));
            r.t = s.t;
            r
        })
        .collect())
}

/// `(t, ∫∫ u_ad·v, ∫∫ u_ad·(u∞′ e v0))` per snapshot.
pub fn projection_masses(run: &GreensRun) -> Vec<(f64, f64, f64)> {
    let fft = Fft2::new(run.v0.grid);
    let weighted = |f: &Field2D| {
        let grid = f.grid;
        let mut ad = vec![0.0; f.n];
        let mut acc = 0.0;
        for i in 0..grid.nx {
            run.kernel.u_ad.eval(grid.zeta(i).rem_euclid(1.0), 0, &mut ad);
            for j in 0..grid.ny {
                acc += f.at(i, j).iter().zip(&ad).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        acc * grid.cell_area()
    };
    run.snapshots
        .iter()
        .map(|s| {
            let e = translational_part(&run.v0, &run.kernel, &fft, s.t);
            (s.t, weighted(s), weighted(&e))
        })
        .collect()
}

/// Latest time at which the diffusive 4σ radius stays inside the box:
/// `4√(4θt) + |α|t ≤ Lx/2` and `4√(4d⊥t) ≤ Ly/2`.
pub fn guard_time(grid: &Grid2D, alpha: f64, theta: f64, d_perp: f64) -> f64 {
    let half_x = 0.5 * grid.lx;
    let tx = if alpha.abs() < 1e-14 {
        (half_x / (8.0 * theta.sqrt())).powi(2)
    } else {
        let a = alpha.abs();
        let b = 8.0 * theta.sqrt();
        let s = (-b + (b * b + 4.0 * a * half_x).sqrt()) / (2.0 * a);
        s * s
    };
    let ty = (0.5 * grid.ly / 8.0).powi(2) / d_perp;
    tx.min(ty)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundFit {
    pub template: GaussianBoundTemplate,
    /// Fraction of sampled points where the (clamped) template is exceeded.
    pub violation: f64,
    pub raw_c: f64,
    pub raw_m: f64,
    pub n_points: usize,
    pub n_snapshots: usize,
}

const NOISE_FLOOR: f64 = 1e-9;
const MAX_POINTS: usize = 1_000_000;

struct Samples {
    /// `log|f| + p log t + q log(1+t)`.
    a: Vec<f64>,
    /// `R²/t`.
    b: Vec<f64>,
}

impl Samples {
    fn log_ratios(&self, m: f64, out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.a.iter().zip(&self.b).map(|(a, b)| a + b / m));
    }
}

/// Value at which fewer than 1 % of `xs` lie strictly above.
fn domination_level(xs: &mut [f64]) -> f64 {
    let n = xs.len();
    let allowed = ((0.01 * n as f64).ceil() as usize).saturating_sub(1);
    let idx = n - 1 - allowed.min(n - 1);
    let (_, v, _) = xs.select_nth_unstable_by(idx, |a, b| a.total_cmp(b));
    *v
}

/// Fits `C t^{-p}(1+t)^{-q} exp(−(|ζ−ζ̄₀+αt|² + |y−ȳ₀|²)/(Mt))` over all
/// snapshots at `t ≥ 2`. `M` minimizes the mean log-gap of the dominating
/// template (log-spaced sweep plus golden refinement); `C` is then the
/// smallest value exceeded at fewer than 1 % of points.
pub fn fit_pointwise_bound(
    snapshots: &[Field2D],
    shape: (f64, f64),
    alpha: f64,
    center: (f64, f64),
) -> Result<BoundFit> {
    let used: Vec<&Field2D> = snapshots.iter().filter(|s| s.t >= 2.0).collect();
    if used.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "bound fit needs >= 5 snapshots at t >= 2, got {}",
            used.len()
        )));
    }
    let (p, q) = shape;
    let total: usize = used.iter().map(|s| s.grid.len()).sum();
    let stride = total.div_ceil(MAX_POINTS).max(1);
    let mut samples = Samples {
        a: Vec::new(),
        b: Vec::new(),
    };
    let mut counter = 0usize;
    for s in &used {
        let g = s.grid;
        let norms = s.norms();
        let sup = norms.iter().copied().fold(0.0, f64::max);
        if sup == 0.0 {
            continue;
        }
        let floor = NOISE_FLOOR * sup;
        let t = s.t;
        for i in 0..g.nx {
            let dz = wrap(g.zeta(i) - center.0 + alpha * t, g.lx);
            for j in 0..g.ny {
                counter += 1;
                if counter % stride != 0 {
                    continue;
                }
                let v = norms[i * g.ny + j];
                if v <= floor {
                    continue;
                }
                let dy = wrap(g.y(j) - center.1, g.ly);
                samples.a.push(v.ln() + p * t.ln() + q * (1.0 + t).ln());
                samples.b.push((dz * dz + dy * dy) / t);
            }
        }
    }
    if samples.a.len() < 10 {
        return Err(Error::InsufficientData("too few points above the noise floor".into()));
    }
    let mut buf = Vec::with_capacity(samples.a.len());
    // mean gap log(template/|f|) = log C − mean(log ratio)
    let mut objective = |m: f64| -> (f64, f64) {
        samples.log_ratios(m, &mut buf);
        let mean = buf.iter().sum::<f64>() / buf.len() as f64;
        let log_c = domination_level(&mut buf);
        (log_c - mean, log_c)
    };
    let sweep: Vec<f64> = (0..=40).map(|i| 10f64.powf(-1.0 + 4.0 * i as f64 / 40.0)).collect();
    let vals: Vec<f64> = sweep.iter().map(|&m| objective(m).0).collect();
    let best = vals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("non-empty sweep");
    let (mut lo, mut hi) = (
        sweep[best.saturating_sub(1)].ln(),
        sweep[(best + 1).min(sweep.len() - 1)].ln(),
    );
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..40 {
        let m1 = hi - g * (hi - lo);
        let m2 = lo + g * (hi - lo);
        if objective(m1.exp()).0 <= objective(m2.exp()).0 {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let raw_m = (0.5 * (lo + hi)).exp();
    let (_, log_c) = objective(raw_m);
    let raw_c = log_c.exp();

    samples.log_ratios(raw_m, &mut buf);
    let beyond = buf.iter().filter(|&&r| r > 1e6f64.ln()).count() as f64 / buf.len() as f64;
    if beyond > 0.05 {
        return Err(Error::NoDomination { violation: beyond });
    }
    let template = GaussianBoundTemplate {
        c: raw_c.max(1.0),
        m: raw_m.max(1.0),
        p,
        q,
        alpha,
    };
    samples.log_ratios(template.m, &mut buf);
    let log_c = template.c.ln();
    let violation = buf.iter().filter(|&&r| r > log_c).count() as f64 / buf.len() as f64;
    Ok(BoundFit {
        template,
        violation,
        raw_c,
        raw_m,
        n_points: buf.len(),
        n_snapshots: used.len(),
    })
}

/// Periodic representative in `[−L/2, L/2)`.
pub fn wrap(x: f64, l: f64) -> f64 {
    (x + 0.5 * l).rem_euclid(l) - 0.5 * l
}
