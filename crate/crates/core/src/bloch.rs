//! Floquet–Bloch operators of the linearization about a wave train, their
//! spectra over `Ω = [−π, π] × ℝ` (truncated in `ν_y`), the stability
//! conditions (D1)–(D3), and the dispersion coefficients `α, θ, d⊥`.
//!
//! Discretization is Galerkin in Fourier space: a period-1 function is the
//! vector of its coefficients for modes `|m| ≤ N/2 − 1`, component innermost.
//! With this basis the `L²(0,1)` inner product is the Euclidean one, so the
//! adjoint operator is the conjugate transpose.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fourier::{fft, PeriodicProfile};
use crate::model::ReactionDiffusionSystem;
use crate::wavetrain::WaveTrain;
use crate::{Error, Result};

type CMat = DMatrix<Complex64>;
type CVec = DVector<Complex64>;

const C0: Complex64 = Complex64::new(0.0, 0.0);

/// Precomputed pieces of `L_ν` that do not depend on `ν`.
#[derive(Debug, Clone)]
pub struct BlochOperator {
    n: usize,
    n_modes: usize,
    k: f64,
    omega: f64,
    diffusion: Vec<f64>,
    /// Fourier coefficients of `f′(u∞)_{cd}` for modes `−(N−2)..=N−2`,
    /// stored at `jac_hat[(c*n+d) * width + (p + N − 2)]`.
    jac_hat: Vec<Complex64>,
}

impl BlochOperator {
    pub fn new(system: &ReactionDiffusionSystem, wt: &WaveTrain, n_modes: usize) -> Result<Self> {
        if n_modes < 8 || n_modes % 2 != 0 {
            return Err(Error::Contract(format!("n_modes must be even and >= 8, got {n_modes}")));
        }
        if wt.n() != system.n() {
            return Err(Error::Contract("wave train and system dimensions differ".into()));
        }
        let n = system.n();
        // sample f′(u∞) finely enough that its first 2N−3 modes are unaliased
        let pts = 4 * n_modes;
        let u = wt.profile.sample(pts, 0);
        let mut jac = vec![0.0; pts * n * n];
        for j in 0..pts {
            system.jacobian_into(&u[j * n..(j + 1) * n], &mut jac[j * n * n..(j + 1) * n * n]);
        }
        let reach = n_modes as i64 - 2;
        let width = (2 * reach + 1) as usize;
        let mut jac_hat = vec![C0; n * n * width];
        for cd in 0..n * n {
            let mut buf: Vec<Complex64> = (0..pts).map(|j| Complex64::new(jac[j * n * n + cd], 0.0)).collect();
            fft(&mut buf);
            for p in -reach..=reach {
                let idx = if p >= 0 { p } else { p + pts as i64 } as usize;
                jac_hat[cd * width + (p + reach) as usize] = buf[idx] / pts as f64;
            }
        }
        Ok(Self {
            n,
            n_modes,
            k: wt.k,
            omega: wt.omega,
            diffusion: system.diffusion().to_vec(),
            jac_hat,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of retained Fourier modes (`N − 1`).
    pub fn modes(&self) -> usize {
        self.n_modes - 1
    }

    pub fn dim(&self) -> usize {
        self.n * self.modes()
    }

    fn half(&self) -> i64 {
        self.n_modes as i64 / 2 - 1
    }

    fn jac(&self, c: usize, d: usize, p: i64) -> Complex64 {
        let reach = self.n_modes as i64 - 2;
        let width = (2 * reach + 1) as usize;
        self.jac_hat[(c * self.n + d) * width + (p + reach) as usize]
    }

    /// Dense matrix of `L_ν`.
    pub fn matrix(&self, nu_x: f64, nu_y: f64) -> CMat {
        let n = self.n;
        let nm = self.modes();
        let half = self.half();
        let dim = self.dim();
        let mut l = CMat::zeros(dim, dim);
        let k2 = self.k * self.k;
        for i in 0..nm {
            let mi = i as i64 - half;
            let w = TAU * mi as f64 + nu_x;
            for c in 0..n {
                for d in 0..n {
                    let dcd = self.diffusion[c * n + d];
                    let mut diag = Complex64::new(dcd * (-k2 * w * w - nu_y * nu_y), 0.0);
                    if c == d {
                        diag += Complex64::new(0.0, self.omega * w);
                    }
                    l[(i * n + c, i * n + d)] += diag;
                }
            }
            for j in 0..nm {
                let mj = j as i64 - half;
                for c in 0..n {
                    for d in 0..n {
                        l[(i * n + c, j * n + d)] += self.jac(c, d, mi - mj);
                    }
                }
            }
        }
        l
    }

    /// Coefficient vector of a profile in this basis.
    pub fn to_vector(&self, p: &PeriodicProfile) -> CVec {
        let half = self.half();
        let n = self.n;
        CVec::from_fn(self.dim(), |r, _| {
            let (i, c) = (r / n, r % n);
            let m = i as i64 - half;
            if m.abs() <= p.max_mode() {
                p.coeff(c, m)
            } else {
                C0
            }
        })
    }

    /// Real profile from a coefficient vector (the imaginary part of the
    /// represented function is discarded by symmetrizing `m ↔ −m`).
    pub fn to_profile(&self, v: &CVec) -> PeriodicProfile {
        let half = self.half();
        let n = self.n;
        let mut p = PeriodicProfile::zeros(n, self.n_modes);
        for c in 0..n {
            for m in -half..=half {
                let a = v[((m + half) as usize) * n + c];
                let b = v[((-m + half) as usize) * n + c].conj();
                *p.coeff_mut(c, m) = 0.5 * (a + b);
            }
        }
        p
    }
}

/// `L²(0,1)` inner product `⟨a, b⟩ = Σ conj(a_m)·b_m`.
pub fn inner(a: &CVec, b: &CVec) -> Complex64 {
    a.dotc(b)
}

pub fn assemble_bloch_matrix(
    system: &ReactionDiffusionSystem,
    wt: &WaveTrain,
    nu: (f64, f64),
    n_modes: usize,
) -> Result<CMat> {
    if !(wt.residual_norm <= 1e-6) {
        return Err(Error::Contract(format!(
            "wave-train residual {} too large for Bloch analysis",
            wt.residual_norm
        )));
    }
    Ok(BlochOperator::new(system, wt, n_modes)?.matrix(nu.0, nu.1))
}

/// All eigenvalues, sorted by decreasing real part.
pub fn eigenvalues(m: &CMat) -> Vec<Complex64> {
    let mut ev: Vec<Complex64> = match m.clone().try_schur(1e-15, 0) {
        Some(s) => s.eigenvalues().map(|v| v.iter().copied().collect()).unwrap_or_default(),
        None => Vec::new(),
    };
    if ev.len() != m.nrows() {
        ev = nalgebra::Schur::new(m.clone())
            .eigenvalues()
            .map(|v| v.iter().copied().collect())
            .unwrap_or_default();
    }
    ev.sort_by(|a, b| b.re.total_cmp(&a.re));
    ev
}

/// Inverse iteration (right and left) and the two-sided Rayleigh quotient,
/// polishing an eigenvalue estimate to well below `ε‖L‖`.
pub fn refine_eigenpair(l: &CMat, estimate: Complex64) -> Option<(Complex64, CVec, CVec)> {
    let dim = l.nrows();
    let scale = l.iter().fold(0.0f64, |a, z| a.max(z.norm()));
    let shift = estimate + Complex64::new(1e-11 * (1.0 + scale), 0.0);
    let eye = CMat::identity(dim, dim);
    let a = l - &eye * shift;
    let ah = a.adjoint();
    let lu = a.lu();
    let luh = ah.lu();
    let start = CVec::from_fn(dim, |i, _| Complex64::new(1.0 + 0.37 * i as f64, 0.11 * (i % 7) as f64));
    let mut x = start.clone();
    let mut y = start;
    for _ in 0..4 {
        x = lu.solve(&x)?;
        x /= Complex64::new(x.norm(), 0.0);
        y = luh.solve(&y)?;
        y /= Complex64::new(y.norm(), 0.0);
    }
    let den = y.dotc(&x);
    if den.norm() < 1e-14 {
        return None;
    }
    let lam = y.dotc(&(l * &x)) / den;
    if !(lam.re.is_finite() && lam.im.is_finite()) {
        return None;
    }
    Some((lam, x, y))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlochGrid {
    pub nu_x_points: Vec<f64>,
    pub nu_y_points: Vec<f64>,
    pub nu_y_max: f64,
}

fn symmetric_linspace(half_width: f64, count: usize) -> Vec<f64> {
    let count = if count % 2 == 0 { count + 1 } else { count };
    let mid = (count / 2) as i64;
    (0..count as i64)
        .map(|i| {
            if i == mid {
                0.0
            } else {
                half_width * (i - mid) as f64 / mid as f64
            }
        })
        .collect()
}

impl BlochGrid {
    pub fn new(nx: usize, ny: usize, nu_y_max: f64) -> Result<Self> {
        if nx < 3 || ny < 3 || !(nu_y_max > 0.0) {
            return Err(Error::Contract("Bloch grid needs >= 3 points per axis and nu_y_max > 0".into()));
        }
        Ok(Self {
            nu_x_points: symmetric_linspace(PI, nx),
            nu_y_points: symmetric_linspace(nu_y_max, ny),
            nu_y_max,
        })
    }

    /// 65 × 65 grid with the default truncation bound.
    pub fn default_for(system: &ReactionDiffusionSystem, wt: &WaveTrain) -> Self {
        Self::new(65, 65, default_nu_y_max(system, wt)).expect("valid defaults")
    }
}

/// `8·max(1, √(‖f′(u∞)‖_∞ / min eig D))`, with the matrix ∞-norm.
pub fn default_nu_y_max(system: &ReactionDiffusionSystem, wt: &WaveTrain) -> f64 {
    let n = system.n();
    let pts = 4 * wt.n_modes;
    let u = wt.profile.sample(pts, 0);
    let mut jac = vec![0.0; n * n];
    let mut sup: f64 = 0.0;
    for j in 0..pts {
        system.jacobian_into(&u[j * n..(j + 1) * n], &mut jac);
        for c in 0..n {
            sup = sup.max((0..n).map(|d| jac[c * n + d].abs()).sum());
        }
    }
    8.0 * (sup / system.min_diffusion_eigenvalue()).sqrt().max(1.0)
}

/// Leading eigenvalues over a `ν` grid; `eigenvalues[iy * nx + ix]` sorted by
/// decreasing real part.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralSurface {
    pub nu_x: Vec<f64>,
    pub nu_y: Vec<f64>,
    pub n_modes: usize,
    pub m: usize,
    pub eigenvalues: Vec<Vec<Complex64>>,
}

impl SpectralSurface {
    pub fn at(&self, ix: usize, iy: usize) -> &[Complex64] {
        &self.eigenvalues[iy * self.nu_x.len() + ix]
    }

    pub fn leading(&self, ix: usize, iy: usize) -> Complex64 {
        self.at(ix, iy)[0]
    }

    /// CSV rows `nu_x,nu_y,re_0,im_0,…`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("nu_x,nu_y");
        for i in 0..self.m {
            s.push_str(&format!(",re_{i},im_{i}"));
        }
        s.push('\n');
        for (iy, &ny) in self.nu_y.iter().enumerate() {
            for (ix, &nx) in self.nu_x.iter().enumerate() {
                s.push_str(&format!("{nx:.17e},{ny:.17e}"));
                for z in self.at(ix, iy) {
                    s.push_str(&format!(",{:.17e},{:.17e}", z.re, z.im));
                }
                s.push('\n');
            }
        }
        s
    }
}

/// Computes the leading `m` eigenvalues on `grid`, solving only `ν_y ≥ 0` and
/// filling `ν_y < 0` from `σ(L_{−ν}) = conj σ(L_ν)`.
pub fn spectral_surface(op: &BlochOperator, grid: &BlochGrid, m: usize) -> SpectralSurface {
    let nx = grid.nu_x_points.len();
    let ny = grid.nu_y_points.len();
    let jobs: Vec<(usize, usize)> = (0..ny)
        .filter(|&iy| grid.nu_y_points[iy] >= 0.0)
        .flat_map(|iy| (0..nx).map(move |ix| (ix, iy)))
        .collect();
    let solved: Vec<((usize, usize), Vec<Complex64>)> = jobs
        .par_iter()
        .map(|&(ix, iy)| {
            let mat = op.matrix(grid.nu_x_points[ix], grid.nu_y_points[iy]);
            let mut ev = eigenvalues(&mat);
            ev.truncate(m);
            ((ix, iy), ev)
        })
        .collect();
    let mut eigen = vec![Vec::new(); nx * ny];
    for ((ix, iy), ev) in solved {
        eigen[iy * nx + ix] = ev;
    }
    for iy in 0..ny {
        if grid.nu_y_points[iy] < 0.0 {
            // grids are symmetric: mirror index
            let (jx_of, jy) = (|ix: usize| nx - 1 - ix, ny - 1 - iy);
            for ix in 0..nx {
                let src: Vec<Complex64> = eigen[jy * nx + jx_of(ix)].iter().map(|z| z.conj()).collect();
                eigen[iy * nx + ix] = src;
            }
        }
    }
    SpectralSurface {
        nu_x: grid.nu_x_points.clone(),
        nu_y: grid.nu_y_points.clone(),
        n_modes: op.n_modes,
        m,
        eigenvalues: eigen,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DispersionData {
    pub alpha: f64,
    pub theta: f64,
    pub d_perp: f64,
    /// Finite-difference cross-checks.
    pub alpha_fd: f64,
    pub d_perp_fd: f64,
    pub theta_imag: f64,
    pub alpha_imag: f64,
    pub d_perp_imag: f64,
    /// Spectral gap of `L₀` away from the zero eigenvalue.
    pub eta: f64,
    /// Radius of the quadratic region; `NaN` until set by a stability scan.
    pub eps: f64,
    /// Max of `|λ₀(ν) − (iαν_x − θν_x² − d⊥ν_y²)| / |ν|³` over `|ν| ≤ 0.2`.
    pub h_constant: f64,
    pub lambda_zero: Complex64,
    pub adjoint_residual: f64,
    pub normalization: Complex64,
    pub n_modes: usize,
    pub fd_step: f64,
    pub wavetrain_digest: u64,
    #[serde(skip)]
    pub u_ad: Option<PeriodicProfile>,
    #[serde(skip)]
    pub q0: Option<PeriodicProfile>,
}

impl DispersionData {
    pub fn quadratic_model(&self, nu_x: f64, nu_y: f64) -> Complex64 {
        Complex64::new(-self.theta * nu_x * nu_x - self.d_perp * nu_y * nu_y, self.alpha * nu_x)
    }

    /// Adjoint eigenfunction `ũ_ad`.
    pub fn u_ad(&self) -> &PeriodicProfile {
        self.u_ad.as_ref().expect("dispersion data carries u_ad")
    }

    pub fn q0(&self) -> &PeriodicProfile {
        self.q0.as_ref().expect("dispersion data carries u∞′")
    }

    pub fn kernel_params(&self) -> Result<crate::kernel::PhaseKernelParams> {
        crate::kernel::PhaseKernelParams::new(
            self.alpha,
            self.theta,
            self.d_perp,
            self.u_ad().clone(),
            self.q0().clone(),
            self.wavetrain_digest,
        )
    }
}

/// Simple-zero check at `ν = 0`: returns `(|λ|_min, |λ|_second, gap)`, with
/// the gap `−max Re` over all eigenvalues except the smallest in modulus.
fn zero_mode_stats(ev: &[Complex64]) -> (f64, f64, f64) {
    let mut by_abs: Vec<(f64, usize)> = ev.iter().enumerate().map(|(i, z)| (z.norm(), i)).collect();
    by_abs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let zero_idx = by_abs[0].1;
    let gap = -ev
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != zero_idx)
        .map(|(_, z)| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    (by_abs[0].0, by_abs.get(1).map_or(f64::INFINITY, |v| v.0), gap)
}

const ZERO_TOL: f64 = 1e-8;
const SIMPLE_TOL: f64 = 1e-6;

/// Tracks `λ₀` from `prev` to the operator at `nu`, by nearest eigenvalue to
/// `predict` followed by refinement.
fn track(op: &BlochOperator, nu: (f64, f64), predict: Complex64) -> Option<Complex64> {
    let mat = op.matrix(nu.0, nu.1);
    let ev = eigenvalues(&mat);
    let near = ev
        .iter()
        .copied()
        .min_by(|a, b| (a - predict).norm().total_cmp(&(b - predict).norm()))?;
    refine_eigenpair(&mat, near).map(|r| r.0)
}

/// `−½ ∂² λ₀` and `∂ λ₀` along direction `dir` at `ν = 0` by central
/// differences, Richardson-extrapolated over steps `h` and `h/2`.
fn fd_derivatives(
    op: &BlochOperator,
    lam0: Complex64,
    dir: (f64, f64),
    h: f64,
    slope_guess: Complex64,
) -> Result<(Complex64, Complex64)> {
    let mut first = [C0; 2];
    let mut second = [C0; 2];
    for (s, step) in [h, 0.5 * h].into_iter().enumerate() {
        let mut vals = [C0; 2];
        for (j, sign) in [1.0, -1.0].into_iter().enumerate() {
            let nu = (sign * step * dir.0, sign * step * dir.1);
            let predict = lam0 + slope_guess * (sign * step);
            let lam = track(op, nu, predict)
                .ok_or_else(|| Error::BranchTrackingFailure("eigenvalue refinement failed".into()))?;
            let jump = (lam - lam0).norm();
            if jump > 10.0 * step * (1.0 + slope_guess.norm()) {
                return Err(Error::BranchTrackingFailure(format!(
                    "λ₀ jumped by {jump:.3e} over step {step:.1e}"
                )));
            }
            vals[j] = lam;
        }
        first[s] = (vals[0] - vals[1]) / (2.0 * step);
        second[s] = (vals[0] - 2.0 * lam0 + vals[1]) / (step * step);
    }
    let d1 = (4.0 * first[1] - first[0]) / 3.0;
    let d2 = (4.0 * second[1] - second[0]) / 3.0;
    Ok((d1, -0.5 * d2))
}

/// Dispersion data from the adjoint null vector of `L₀` and finite
/// differences of the critical eigenvalue branch.
pub fn compute_dispersion(
    system: &ReactionDiffusionSystem,
    wt: &WaveTrain,
    n_modes: usize,
    fd_step: f64,
) -> Result<DispersionData> {
    let op = BlochOperator::new(system, wt, n_modes)?;
    compute_dispersion_with(&op, system, wt, fd_step)
}

pub fn compute_dispersion_with(
    op: &BlochOperator,
    system: &ReactionDiffusionSystem,
    wt: &WaveTrain,
    fd_step: f64,
) -> Result<DispersionData> {
    let l0 = op.matrix(0.0, 0.0);
    let ev = eigenvalues(&l0);
    let (smallest, second, gap) = zero_mode_stats(&ev);
    if !(smallest < ZERO_TOL && second > SIMPLE_TOL) {
        return Err(Error::DegenerateZeroMode(format!(
            "|λ| smallest {smallest:.3e}, second {second:.3e}"
        )));
    }
    let q0 = op.to_vector(&wt.profile.derivative());
    if q0.norm() < 1e-12 {
        return Err(Error::DegenerateZeroMode("u∞′ vanishes".into()));
    }
    let zero = ev.iter().copied().min_by(|a, b| a.norm().total_cmp(&b.norm())).expect("non-empty");
    let (lam_zero, _, left) = refine_eigenpair(&l0, zero)
        .ok_or_else(|| Error::DegenerateZeroMode("adjoint null vector not found".into()))?;
    let norm = inner(&left, &q0);
    if norm.norm() < 1e-12 {
        return Err(Error::DegenerateZeroMode("adjoint mode orthogonal to u∞′".into()));
    }
    // ⟨u_ad, q0⟩ = conj(c)·⟨left, q0⟩ = 1
    let u_ad_vec = &left * (Complex64::new(1.0, 0.0) / norm).conj();
    let normalization = inner(&u_ad_vec, &q0);
    let adjoint_residual = (l0.adjoint() * &u_ad_vec).norm();

    let n = op.n();
    let dmat = system.diffusion();
    let apply_d = |v: &CVec| {
        let mut out = CVec::zeros(v.len());
        for i in 0..v.len() / n {
            for c in 0..n {
                let mut acc = C0;
                for d in 0..n {
                    acc += v[i * n + d] * dmat[c * n + d];
                }
                out[i * n + c] = acc;
            }
        }
        out
    };
    let q1 = op.to_vector(&wt.profile.derivative().derivative());
    let alpha_c = inner(&u_ad_vec, &apply_d(&q1)) * (2.0 * wt.k * wt.k) + wt.omega;
    let d_perp_c = inner(&u_ad_vec, &apply_d(&q0));

    let (slope_x, theta_c) = fd_derivatives(op, lam_zero, (1.0, 0.0), fd_step, Complex64::new(0.0, alpha_c.re))?;
    let (_, dperp_fd) = fd_derivatives(op, lam_zero, (0.0, 1.0), fd_step, C0)?;

    let mut data = DispersionData {
        alpha: alpha_c.re,
        theta: theta_c.re,
        d_perp: d_perp_c.re,
        alpha_fd: slope_x.im,
        d_perp_fd: dperp_fd.re,
        theta_imag: theta_c.im,
        alpha_imag: alpha_c.im,
        d_perp_imag: d_perp_c.im,
        eta: gap,
        eps: f64::NAN,
        h_constant: f64::NAN,
        lambda_zero: lam_zero,
        adjoint_residual,
        normalization,
        n_modes: op.n_modes,
        fd_step,
        wavetrain_digest: wt.digest(),
        u_ad: Some(op.to_profile(&u_ad_vec)),
        q0: Some(wt.profile.derivative()),
    };

    // cubic remainder constant on |ν| ≤ 0.2
    let mut h: f64 = 0.0;
    for &r in &[0.05, 0.1, 0.2] {
        for j in 0..8 {
            let ang = PI * j as f64 / 8.0 + 0.1;
            let nu = (r * ang.cos(), r * ang.sin());
            let model = data.quadratic_model(nu.0, nu.1);
            if let Some(lam) = track(op, nu, model) {
                h = h.max((lam - model).norm() / r.powi(3));
            }
        }
    }
    data.h_constant = h;
    Ok(data)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    pub d1: bool,
    pub d2: bool,
    pub d3: bool,
    pub zero_mode_simple: bool,
    pub smallest_abs: f64,
    pub second_abs: f64,
    pub eta_d1: f64,
    pub eta_d2: f64,
    pub eta_d3: f64,
    /// `min(η_D1, η_D2, η_D3)`; positive iff all three hold.
    pub eta: f64,
    pub eps: f64,
    pub nu_y_max: f64,
    /// Max real part on the `|ν_y| = ν_y^max` rows.
    pub boundary_max_re: f64,
    /// `−η − boundary_max_re`; positive when the truncation is justified.
    pub boundary_margin: f64,
    pub truncation_ok: bool,
    /// Max `|λ(−ν) − conj λ(ν)|` on the `ν_y = 0` row.
    pub symmetry_defect: f64,
    /// `d⊥ > 0 ∧ θ > 0`, the predicate (D2) must agree with.
    pub d2_predicate: Option<bool>,
    pub dispersion: Option<DispersionData>,
    #[serde(skip)]
    pub surface: Option<SpectralSurface>,
}

pub const DEFAULT_LEADING: usize = 6;
pub const DEFAULT_FD_STEP: f64 = 1e-3;

/// Scans the Bloch spectrum on `grid` and evaluates (D1)–(D3).
///
/// (D1) failures are reported, not raised. A failed truncation check raises
/// [`Error::TruncationInsufficient`].
pub fn verify_spectral_stability(
    system: &ReactionDiffusionSystem,
    wt: &WaveTrain,
    grid: &BlochGrid,
    n_modes: usize,
) -> Result<StabilityReport> {
    let op = BlochOperator::new(system, wt, n_modes)?;
    let l0 = op.matrix(0.0, 0.0);
    let ev0 = eigenvalues(&l0);
    let (smallest, second, gap) = zero_mode_stats(&ev0);
    let simple = smallest < ZERO_TOL && second > SIMPLE_TOL;
    let d1 = simple && gap > 0.0;

    let dispersion = if simple {
        compute_dispersion_with(&op, system, wt, DEFAULT_FD_STEP).ok()
    } else {
        None
    };

    let surface = spectral_surface(&op, grid, DEFAULT_LEADING);
    let nx = grid.nu_x_points.len();
    let ny = grid.nu_y_points.len();
    let radius = |ix: usize, iy: usize| grid.nu_x_points[ix].hypot(grid.nu_y_points[iy]);

    // ε: largest grid radius up to which the quadratic model fits within 20 %
    let cap = (PI / 2.0).min(grid.nu_y_max / 2.0);
    let mut pts: Vec<(f64, usize, usize)> = (0..ny)
        .flat_map(|iy| (0..nx).map(move |ix| (ix, iy)))
        .map(|(ix, iy)| (radius(ix, iy), ix, iy))
        .filter(|p| p.0 > 0.0)
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let smallest_radius = pts.first().map_or(cap, |p| p.0);
    let eps = match &dispersion {
        Some(disp) => {
            let mut eps = smallest_radius.min(cap);
            for &(r, ix, iy) in &pts {
                if r > cap {
                    break;
                }
                let model = disp.quadratic_model(grid.nu_x_points[ix], grid.nu_y_points[iy]);
                let lead = surface.leading(ix, iy);
                if (lead - model).norm() > 0.2 * model.norm() {
                    break;
                }
                eps = r;
            }
            eps
        }
        None => smallest_radius.min(cap),
    };

    let mut d2_ratio = f64::NEG_INFINITY;
    let mut d3_max = f64::NEG_INFINITY;
    for &(r, ix, iy) in &pts {
        let lead = surface.leading(ix, iy).re;
        if r <= eps + 1e-12 {
            d2_ratio = d2_ratio.max(lead / (r * r));
        }
        if r >= eps - 1e-12 {
            d3_max = d3_max.max(lead);
        }
    }
    let eta_d2 = -d2_ratio;
    let eta_d3 = -d3_max;
    let d2 = eta_d2 > 0.0;
    let d3 = eta_d3 > 0.0;
    let eta = gap.min(eta_d2).min(eta_d3);

    let mut boundary_max_re = f64::NEG_INFINITY;
    for iy in [0, ny - 1] {
        for ix in 0..nx {
            boundary_max_re = boundary_max_re.max(surface.leading(ix, iy).re);
        }
    }
    let threshold = -eta.max(0.0);
    let truncation_ok = boundary_max_re < threshold;

    // the ν_y = 0 row is solved directly on both sides, so it tests the symmetry
    let iy0 = ny / 2;
    let mut symmetry_defect: f64 = 0.0;
    for ix in 0..nx / 2 {
        let a = surface.at(ix, iy0);
        let b = surface.at(nx - 1 - ix, iy0);
        for za in a {
            let best = b.iter().map(|w| (za - w.conj()).norm()).fold(f64::INFINITY, f64::min);
            symmetry_defect = symmetry_defect.max(best);
        }
    }

    let d2_predicate = dispersion.as_ref().map(|d| d.d_perp > 0.0 && d.theta > 0.0);
    let dispersion = dispersion.map(|mut d| {
        d.eps = eps;
        d.eta = eta;
        d
    });
    if !truncation_ok {
        return Err(Error::TruncationInsufficient {
            boundary: boundary_max_re,
            threshold,
        });
    }
    Ok(StabilityReport {
        d1,
        d2,
        d3,
        zero_mode_simple: simple,
        smallest_abs: smallest,
        second_abs: second,
        eta_d1: gap,
        eta_d2,
        eta_d3,
        eta,
        eps,
        nu_y_max: grid.nu_y_max,
        boundary_max_re,
        boundary_margin: threshold - boundary_max_re,
        truncation_ok,
        symmetry_defect,
        d2_predicate,
        dispersion,
        surface: Some(surface),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{lambda_omega_default, real_ginzburg_landau};
    use crate::wavetrain::closed_form_lambda_omega;

    fn gl(q2: f64) -> (ReactionDiffusionSystem, WaveTrain) {
        let sys = real_ginzburg_landau();
        let wt = closed_form_lambda_omega(&sys, q2.sqrt(), 64).unwrap();
        (sys, wt)
    }

    #[test]
    fn translational_mode_is_in_kernel() {
        let (sys, wt) = gl(0.2);
        let op = BlochOperator::new(&sys, &wt, 32).unwrap();
        let q0 = op.to_vector(&wt.profile.derivative());
        let r = op.matrix(0.0, 0.0) * &q0;
        assert!(r.norm() < 1e-10, "{}", r.norm());
    }

    #[test]
    fn transverse_shift_structure() {
        let (sys, wt) = gl(0.2);
        let op = BlochOperator::new(&sys, &wt, 16).unwrap();
        let l0 = op.matrix(0.0, 0.0);
        let l = op.matrix(0.0, 0.7);
        let diff = &l - &l0 + CMat::identity(l.nrows(), l.ncols()) * Complex64::new(0.49, 0.0);
        assert!(diff.iter().fold(0.0f64, |a, z| a.max(z.norm())) < 1e-14);
    }

    #[test]
    fn conjugate_symmetry_of_matrices() {
        let sys = lambda_omega_default();
        let wt = closed_form_lambda_omega(&sys, 0.4, 32).unwrap();
        let op = BlochOperator::new(&sys, &wt, 16).unwrap();
        let a = op.matrix(0.3, -0.8);
        let b = op.matrix(-0.3, 0.8);
        // flip m → −m maps L_{−ν} onto conj(L_ν)
        let n = op.n();
        let nm = op.modes();
        let mut worst: f64 = 0.0;
        for i in 0..nm {
            for j in 0..nm {
                for c in 0..n {
                    for d in 0..n {
                        let x = a[(i * n + c, j * n + d)];
                        let y = b[((nm - 1 - i) * n + c, (nm - 1 - j) * n + d)];
                        worst = worst.max((x - y.conj()).norm());
                    }
                }
            }
        }
        assert!(worst < 1e-14, "{worst}");
    }

    #[test]
    fn real_gl_dispersion_matches_eckhaus() {
        let (sys, wt) = gl(0.2);
        let d = compute_dispersion(&sys, &wt, 64, 1e-3).unwrap();
        let q2 = 0.2;
        let k2 = q2 / (4.0 * PI * PI);
        let theta = k2 * (1.0 - 3.0 * q2) / (1.0 - q2);
        assert!((theta - 2.5330e-3).abs() < 1e-7);
        assert!(((d.theta - theta) / theta).abs() < 1e-2, "{} vs {}", d.theta, theta);
        assert!((d.d_perp - 1.0).abs() < 1e-8);
        assert!(d.alpha.abs() < 1e-8);
        assert!((d.alpha - d.alpha_fd).abs() < 1e-6);
        assert!(((d.d_perp - d.d_perp_fd) / d.d_perp).abs() < 1e-6);
        assert!((d.normalization - 1.0).norm() < 1e-10);
        assert!(d.adjoint_residual < 1e-8);
        assert!(d.theta_imag.abs() < 1e-8);
        assert!(d.h_constant.is_finite());
    }

    #[test]
    fn rotating_lambda_omega_has_drift() {
        let sys = lambda_omega_default();
        let wt = closed_form_lambda_omega(&sys, 0.3, 32).unwrap();
        let d = compute_dispersion(&sys, &wt, 32, 1e-3).unwrap();
        assert!((d.alpha - d.alpha_fd).abs() < 1e-6, "{} {}", d.alpha, d.alpha_fd);
        assert!((d.d_perp - 1.0).abs() < 1e-8);
        assert!(d.alpha.abs() > 1e-3);
    }

    #[test]
    fn constant_state_is_degenerate() {
        let (sys, wt) = gl(0.0);
        assert!(matches!(
            compute_dispersion(&sys, &wt, 16, 1e-3),
            Err(Error::DegenerateZeroMode(_))
        ));
        let grid = BlochGrid::new(5, 5, 8.0).unwrap();
        let rep = verify_spectral_stability(&sys, &wt, &grid, 16).unwrap();
        assert!(!rep.d1 && !rep.zero_mode_simple);
    }

    #[test]
    fn coarse_scan_separates_eckhaus_sides() {
        for (q2, stable) in [(0.2, true), (0.5, false)] {
            let (sys, wt) = gl(q2);
            let grid = BlochGrid::new(17, 9, default_nu_y_max(&sys, &wt)).unwrap();
            let rep = verify_spectral_stability(&sys, &wt, &grid, 16).unwrap();
            // sidebands p = ±q sit inside the Eckhaus band, so ν = 0 is unstable too
            assert_eq!(rep.d1, stable);
            assert_eq!(rep.d2, stable, "q2 = {q2}");
            assert_eq!(rep.d2_predicate, Some(stable));
            assert!(rep.symmetry_defect < 1e-8);
        }
    }
}
