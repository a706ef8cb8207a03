//! Wave-train profiles: Newton–Fourier collocation for general systems and the
//! closed form for λ–ω systems.
//!
//! A wave train `u(x, y, t) = u∞(kx − ωt)` has a period-1 profile solving the
//! steady co-moving equation `D k² u∞″ + ω u∞′ + f(u∞) = 0`.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::fourier::{signed_mode, PeriodicProfile};
use crate::model::ReactionDiffusionSystem;
use crate::{Error, Result};

pub const DEFAULT_MODES: usize = 64;
const MAX_NEWTON: usize = 50;

#[derive(Debug, Clone)]
pub struct WaveTrain {
    pub k: f64,
    pub omega: f64,
    pub n_modes: usize,
    /// Fourier representation of `u∞` on `[0, 1)`.
    pub profile: PeriodicProfile,
    /// Point-major samples of `u∞`, `u∞′`, `u∞″` at `ζ_j = j / n_modes`.
    pub samples: Vec<f64>,
    pub dsamples: Vec<f64>,
    pub ddsamples: Vec<f64>,
    pub residual_norm: f64,
}

/// Initial data for [`solve_profile`].
#[derive(Debug, Clone)]
pub struct ProfileGuess {
    pub profile: PeriodicProfile,
    pub omega: f64,
}

impl WaveTrain {
    fn from_profile(k: f64, omega: f64, profile: PeriodicProfile) -> Self {
        let n_modes = profile.n_modes();
        Self {
            k,
            omega,
            n_modes,
            samples: profile.sample(n_modes, 0),
            dsamples: profile.sample(n_modes, 1),
            ddsamples: profile.sample(n_modes, 2),
            profile,
            residual_norm: f64::NAN,
        }
    }

    pub fn n(&self) -> usize {
        self.profile.n()
    }

    /// `d`-th derivative of `u∞` at an arbitrary (not necessarily grid) point.
    pub fn eval(&self, zeta: f64, deriv: u32, out: &mut [f64]) {
        self.profile.eval(zeta.rem_euclid(1.0), deriv, out);
    }

    /// `‖u∞′‖_∞`.
    pub fn derivative_sup(&self) -> f64 {
        self.profile.sup_norm(1)
    }

    /// Content hash identifying this wave train (k, ω and profile bits).
    pub fn digest(&self) -> u64 {
        let mut h = Fnv64::default();
        use std::hash::Hasher;
        h.write_u64(self.k.to_bits());
        h.write_u64(self.omega.to_bits());
        self.profile.bit_hash(&mut h);
        h.finish()
    }

    pub fn to_json(&self) -> WaveTrainJson {
        let n = self.n();
        let coefficients = (0..n)
            .map(|c| {
                (0..self.n_modes)
                    .map(|idx| {
                        let z = self.profile.coeff(c, signed_mode(idx, self.n_modes));
                        [z.re, z.im]
                    })
                    .collect()
            })
            .collect();
        WaveTrainJson {
            k: self.k,
            omega: self.omega,
            residual: self.residual_norm,
            n: n,
            n_modes: self.n_modes,
            coefficients,
        }
    }

    pub fn from_json(json: &WaveTrainJson) -> Result<Self> {
        if json.coefficients.len() != json.n
            || json.coefficients.iter().any(|c| c.len() != json.n_modes)
        {
            return Err(Error::Format("wave-train coefficient table has wrong shape".into()));
        }
        let mut profile = PeriodicProfile::from_samples(&vec![0.0; json.n * json.n_modes], json.n);
        for (c, row) in json.coefficients.iter().enumerate() {
            for (idx, z) in row.iter().enumerate() {
                *profile.coeff_mut(c, signed_mode(idx, json.n_modes)) =
                    num_complex::Complex64::new(z[0], z[1]);
            }
        }
        let mut wt = Self::from_profile(json.k, json.omega, profile);
        wt.residual_norm = json.residual;
        Ok(wt)
    }
}

/// `u∞`, `u∞′`, `u∞″` sampled at the ζ-nodes of a 2D grid (`[i * n + c]`).
#[derive(Debug, Clone)]
pub struct GridProfile {
    pub n: usize,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    pub ddu: Vec<f64>,
}

impl GridProfile {
    pub fn new(wt: &WaveTrain, grid: &crate::field::Grid2D) -> Self {
        let n = wt.n();
        let mut u = vec![0.0; grid.nx * n];
        let mut du = vec![0.0; grid.nx * n];
        let mut ddu = vec![0.0; grid.nx * n];
        for i in 0..grid.nx {
            let z = grid.zeta(i);
            wt.eval(z, 0, &mut u[i * n..(i + 1) * n]);
            wt.eval(z, 1, &mut du[i * n..(i + 1) * n]);
            wt.eval(z, 2, &mut ddu[i * n..(i + 1) * n]);
        }
        Self { n, u, du, ddu }
    }

    pub fn u(&self, i: usize) -> &[f64] {
        &self.u[i * self.n..(i + 1) * self.n]
    }

    pub fn du(&self, i: usize) -> &[f64] {
        &self.du[i * self.n..(i + 1) * self.n]
    }

    pub fn ddu(&self, i: usize) -> &[f64] {
        &self.ddu[i * self.n..(i + 1) * self.n]
    }

    /// The profile replicated in `y` as a field.
    pub fn field(&self, grid: crate::field::Grid2D, which: u32) -> crate::field::Field2D {
        let src = match which {
            0 => &self.u,
            1 => &self.du,
            _ => &self.ddu,
        };
        let mut f = crate::field::Field2D::zeros(grid, self.n);
        for i in 0..grid.nx {
            for j in 0..grid.ny {
                f.at_mut(i, j).copy_from_slice(&src[i * self.n..(i + 1) * self.n]);
            }
        }
        f
    }
}

/// On-disk form: Fourier coefficients per component in FFT order as `[re, im]`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct WaveTrainJson {
    pub k: f64,
    pub omega: f64,
    pub residual: f64,
    pub n: usize,
    pub n_modes: usize,
    pub coefficients: Vec<Vec<[f64; 2]>>,
}

/// 64-bit FNV-1a, used for reproducible content digests.
#[derive(Debug, Clone, Copy)]
pub struct Fnv64(u64);

impl Default for Fnv64 {
    fn default() -> Self {
        Self(0xcbf2_9ce4_8422_2325)
    }
}

impl std::hash::Hasher for Fnv64 {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 ^= *b as u64;
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }
}

/// `sup_ζ ‖D k² u∞″ + ω u∞′ + f(u∞)‖` on a grid four times finer than the
/// profile resolution.
pub fn profile_residual(wt: &WaveTrain, system: &ReactionDiffusionSystem) -> f64 {
    let n = system.n();
    let pts = 4 * wt.n_modes;
    let u = wt.profile.sample(pts, 0);
    let du = wt.profile.sample(pts, 1);
    let ddu = wt.profile.sample(pts, 2);
    let mut f = vec![0.0; n];
    let mut dd = vec![0.0; n];
    let mut sup: f64 = 0.0;
    for j in 0..pts {
        let s = j * n..(j + 1) * n;
        system.reaction_into(&u[s.clone()], &mut f);
        system.apply_diffusion(&ddu[s.clone()], &mut dd);
        let r: f64 = (0..n)
            .map(|c| {
                let v = wt.k * wt.k * dd[c] + wt.omega * du[s.start + c] + f[c];
                v * v
            })
            .sum::<f64>()
            .sqrt();
        sup = sup.max(r);
    }
    sup
}

/// Closed-form wave train `u∞(ζ) = r0(cos 2πζ, sin 2πζ)` of a λ–ω system with
/// scaled wavenumber `q = 2πk`; `λ(r0) = q²` and `ω = −ω̃(r0)/(2π)`.
pub fn closed_form_lambda_omega(
    system: &ReactionDiffusionSystem,
    q: f64,
    n_modes: usize,
) -> Result<WaveTrain> {
    let lo = system
        .as_lambda_omega()
        .ok_or_else(|| Error::Contract("closed form requires a λ–ω system".into()))?;
    let r0 = lo
        .solve_amplitude(q * q, 100.0)
        .ok_or_else(|| Error::NoWaveTrain(format!("no r0 > 0 solves λ(r0) = q² = {}", q * q)))?;
    let wt_omega = lo.omega_tilde(r0);
    let omega = -wt_omega / TAU;
    let profile = if q == 0.0 && wt_omega == 0.0 {
        PeriodicProfile::from_fn(2, n_modes, |_, out| {
            out[0] = r0;
            out[1] = 0.0;
        })
    } else {
        PeriodicProfile::from_fn(2, n_modes, |z, out| {
            out[0] = r0 * (TAU * z).cos();
            out[1] = r0 * (TAU * z).sin();
        })
    };
    let mut wt = WaveTrain::from_profile(q / TAU, omega, profile);
    wt.residual_norm = profile_residual(&wt, system);
    Ok(wt)
}

/// Real matrix of a Fourier multiplier on `n` equispaced points (Nyquist dropped).
fn spectral_matrix(n: usize, symbol: impl Fn(i64) -> num_complex::Complex64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for l in 0..n {
        let mut buf = vec![num_complex::Complex64::new(0.0, 0.0); n];
        buf[l] = 1.0.into();
        crate::fourier::fft(&mut buf);
        for (idx, z) in buf.iter_mut().enumerate() {
            let mm = signed_mode(idx, n);
            *z *= if n % 2 == 0 && idx == n / 2 { 0.0.into() } else { symbol(mm) };
        }
        crate::fourier::ifft(&mut buf);
        for j in 0..n {
            m[(j, l)] = buf[j].re;
        }
    }
    m
}

/// Band-limited interpolation from `n` to `fine` points and truncating
/// projection back, both excluding the `n`-grid Nyquist mode.
fn transfer_matrices(n: usize, fine: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let half = (n as i64 - 1) / 2;
    let mut up = DMatrix::zeros(fine, n);
    for l in 0..n {
        for p in 0..fine {
            let mut acc = 0.0;
            for m in -half..=half {
                acc += (TAU * m as f64 * (p as f64 / fine as f64 - l as f64 / n as f64)).cos();
            }
            up[(p, l)] = acc / n as f64;
        }
    }
    let mut down = DMatrix::zeros(n, fine);
    for p in 0..fine {
        for j in 0..n {
            let mut acc = 0.0;
            for m in -half..=half {
                acc += (TAU * m as f64 * (j as f64 / n as f64 - p as f64 / fine as f64)).cos();
            }
            down[(j, p)] = acc / fine as f64;
        }
    }
    (up, down)
}

/// Newton solve of the collocation system for `(u∞, ω)` at fixed `k`, with the
/// phase condition `⟨u − guess, guess′⟩₂ = 0`.
///
/// The nonlinearity is dealiased by evaluation on a grid twice as fine.
/// Stops when both the residual and the Newton step are below `tol` in sup-norm.
pub fn solve_profile(
    system: &ReactionDiffusionSystem,
    k: f64,
    guess: &ProfileGuess,
    n_modes: usize,
    tol: f64,
) -> Result<WaveTrain> {
    let n = system.n();
    if n_modes < 16 || n_modes % 2 != 0 {
        return Err(Error::Contract(format!("n_modes must be even and >= 16, got {n_modes}")));
    }
    if guess.profile.n() != n {
        return Err(Error::Contract("guess has wrong component count".into()));
    }
    let g = resample_profile(&guess.profile, n_modes);
    let g_samples = g.sample(n_modes, 0);
    let gp = g.sample(n_modes, 1);
    if gp.iter().fold(0.0f64, |a, x| a.max(x.abs())) < 1e-10 {
        return Err(Error::SingularJacobian(
            "guess has vanishing derivative; phase condition is degenerate".into(),
        ));
    }

    let nn = n_modes;
    let fine = 2 * nn;
    let d1 = spectral_matrix(nn, |m| num_complex::Complex64::new(0.0, TAU * m as f64));
    let d2 = &d1 * &d1;
    let (up, down) = transfer_matrices(nn, fine);
    let nyq = DMatrix::from_fn(nn, nn, |j, l| {
        let sj = if j % 2 == 0 { 1.0 } else { -1.0 };
        let sl = if l % 2 == 0 { 1.0 } else { -1.0 };
        sj * sl / nn as f64
    });
    let dmat = system.diffusion();
    let dim = n * nn + 1;

    let mut x = DVector::zeros(dim);
    for i in 0..n * nn {
        x[i] = g_samples[i];
    }
    x[n * nn] = guess.omega;

    let k2 = k * k;
    let mut fine_u = vec![0.0; fine * n];
    let mut fvals = vec![0.0; fine * n];
    let mut jac_fine = vec![0.0; fine * n * n];

    let residual = |x: &DVector<f64>,
                    fine_u: &mut Vec<f64>,
                    fvals: &mut Vec<f64>,
                    jac_fine: &mut Vec<f64>,
                    want_jac: bool|
     -> (DVector<f64>, Option<DMatrix<f64>>) {
        let omega = x[n * nn];
        // component-wise grid vectors
        let comps: Vec<DVector<f64>> = (0..n)
            .map(|c| DVector::from_fn(nn, |j, _| x[j * n + c]))
            .collect();
        let fine_c: Vec<DVector<f64>> = comps.iter().map(|v| &up * v).collect();
        for p in 0..fine {
            for c in 0..n {
                fine_u[p * n + c] = fine_c[c][p];
            }
            system.reaction_into(&fine_u[p * n..(p + 1) * n], &mut fvals[p * n..(p + 1) * n]);
            if want_jac {
                system.jacobian_into(
                    &fine_u[p * n..(p + 1) * n],
                    &mut jac_fine[p * n * n..(p + 1) * n * n],
                );
            }
        }
        let d1c: Vec<DVector<f64>> = comps.iter().map(|v| &d1 * v).collect();
        let d2c: Vec<DVector<f64>> = comps.iter().map(|v| &d2 * v).collect();
        let mut r = DVector::zeros(dim);
        for c in 0..n {
            let fc = DVector::from_fn(fine, |p, _| fvals[p * n + c]);
            let proj = &down * fc;
            let ny = &nyq * &comps[c];
            for j in 0..nn {
                let mut diff = 0.0;
                for d in 0..n {
                    diff += dmat[c * n + d] * d2c[d][j];
                }
                r[j * n + c] = k2 * diff + omega * d1c[c][j] + proj[j] + ny[j];
            }
        }
        let mut phase = 0.0;
        for i in 0..n * nn {
            phase += (x[i] - g_samples[i]) * gp[i];
        }
        r[n * nn] = phase / nn as f64;

        if !want_jac {
            return (r, None);
        }
        let mut jm = DMatrix::zeros(dim, dim);
        for c in 0..n {
            for d in 0..n {
                // R diag(J_cd) E
                let scaled = DMatrix::from_fn(fine, nn, |p, l| jac_fine[p * n * n + c * n + d] * up[(p, l)]);
                let block = &down * scaled;
                for j in 0..nn {
                    for l in 0..nn {
                        let mut v = k2 * dmat[c * n + d] * d2[(j, l)] + block[(j, l)];
                        if c == d {
                            v += omega * d1[(j, l)] + nyq[(j, l)];
                        }
                        jm[(j * n + c, l * n + d)] = v;
                    }
                }
            }
            for j in 0..nn {
                jm[(j * n + c, n * nn)] = d1c[c][j];
            }
        }
        for i in 0..n * nn {
            jm[(n * nn, i)] = gp[i] / nn as f64;
        }
        (r, Some(jm))
    };

    let mut last_res = f64::INFINITY;
    for _ in 0..MAX_NEWTON {
        let (r, jm) = residual(&x, &mut fine_u, &mut fvals, &mut jac_fine, true);
        let jm = jm.expect("jacobian requested");
        let rnorm = r.amax();
        let lu = jm.lu();
        let step = lu
            .solve(&(-&r))
            .ok_or_else(|| Error::SingularJacobian("collocation Jacobian is singular".into()))?;
        if step.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularJacobian("Newton step is not finite".into()));
        }
        x += &step;
        let snorm = step.amax();
        let (r_new, _) = residual(&x, &mut fine_u, &mut fvals, &mut jac_fine, false);
        last_res = r_new.amax();
        if !last_res.is_finite() {
            break;
        }
        if (rnorm < tol || last_res < tol) && snorm < tol {
            break;
        }
    }
    let (r_final, _) = residual(&x, &mut fine_u, &mut fvals, &mut jac_fine, false);
    last_res = last_res.min(r_final.amax());
    if !(last_res < tol) {
        return Err(Error::NoConvergence {
            iterations: MAX_NEWTON,
            residual: last_res,
        });
    }
    let samples: Vec<f64> = (0..n * nn).map(|i| x[i]).collect();
    let profile = PeriodicProfile::from_samples(&samples, n);
    let mut wt = WaveTrain::from_profile(k, x[n * nn], profile);
    if wt.derivative_sup() < 1e-8 {
        return Err(Error::NoWaveTrain("solution collapsed to a constant state".into()));
    }
    wt.residual_norm = profile_residual(&wt, system);
    Ok(wt)
}

/// Re-expresses a profile on a different number of modes (truncating or padding).
pub fn resample_profile(p: &PeriodicProfile, n_modes: usize) -> PeriodicProfile {
    if p.n_modes() == n_modes {
        return p.clone();
    }
    PeriodicProfile::from_samples(&p.sample(n_modes, 0), p.n())
}

/// Translate of a profile, `ζ ↦ p(ζ + shift)`.
pub fn translate_profile(p: &PeriodicProfile, shift: f64) -> PeriodicProfile {
    let mut out = p.clone();
    out.map_coeffs(|_, m, z| z * num_complex::Complex64::from_polar(1.0, TAU * m as f64 * shift));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{lambda_omega_default, real_ginzburg_landau};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sup_diff(a: &PeriodicProfile, b: &PeriodicProfile) -> f64 {
        let sa = a.sample(256, 0);
        let sb = b.sample(256, 0);
        sa.iter().zip(&sb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    fn noisy_guess(wt: &WaveTrain, amp: f64, seed: u64) -> ProfileGuess {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = wt.profile.sample(wt.n_modes, 0);
        s.iter_mut().for_each(|v| *v += amp * rng.gen_range(-1.0..1.0));
        ProfileGuess {
            profile: PeriodicProfile::from_samples(&s, wt.n()),
            omega: wt.omega + amp,
        }
    }

    #[test]
    fn closed_form_amplitudes() {
        let gl = real_ginzburg_landau();
        let wt = closed_form_lambda_omega(&gl, 0.2f64.sqrt(), 64).unwrap();
        let mut u = [0.0; 2];
        wt.eval(0.0, 0, &mut u);
        assert!((u[0] - 0.894_427_191).abs() < 1e-8 && u[1].abs() < 1e-14);
        assert_eq!(wt.omega, 0.0);
        assert!(wt.residual_norm < 1e-12);
        let wt = closed_form_lambda_omega(&gl, 0.999f64.sqrt(), 64).unwrap();
        wt.eval(0.0, 0, &mut u);
        assert!((u[0] - 0.001f64.sqrt()).abs() < 1e-9);
        let flat = closed_form_lambda_omega(&gl, 0.0, 64).unwrap();
        assert!(flat.derivative_sup() < 1e-14);
        flat.eval(0.3, 0, &mut u);
        assert!((u[0] - 1.0).abs() < 1e-12);
        assert!(matches!(
            closed_form_lambda_omega(&gl, 1.5f64.sqrt(), 64),
            Err(Error::NoWaveTrain(_))
        ));
    }

    #[test]
    fn closed_form_with_rotation_has_nonzero_frequency() {
        let sys = lambda_omega_default();
        let wt = closed_form_lambda_omega(&sys, 0.3, 64).unwrap();
        let r0sq = 1.0 - 0.09;
        assert!((wt.omega - 0.5 * r0sq / TAU).abs() < 1e-12);
        assert!(wt.residual_norm < 1e-12);
    }

    #[test]
    fn newton_recovers_closed_form() {
        let gl = real_ginzburg_landau();
        let q = 0.2f64.sqrt();
        let exact = closed_form_lambda_omega(&gl, q, 64).unwrap();
        let guess = noisy_guess(&exact, 1e-3, 3);
        let wt = solve_profile(&gl, exact.k, &guess, 64, 1e-11).unwrap();
        assert!(wt.residual_norm < 1e-9);
        assert!(wt.omega.abs() < 1e-10);
        // phase condition pins the translate close to the guess; compare after optimal shift
        let shift = best_shift(&wt.profile, &exact.profile);
        let aligned = translate_profile(&exact.profile, shift);
        assert!(sup_diff(&wt.profile, &aligned) < 1e-8, "shift {shift}");
    }

    #[test]
    fn newton_handles_rotating_lambda_omega() {
        let sys = lambda_omega_default();
        let exact = closed_form_lambda_omega(&sys, 0.3, 32).unwrap();
        let guess = noisy_guess(&exact, 1e-3, 5);
        let wt = solve_profile(&sys, exact.k, &guess, 32, 1e-11).unwrap();
        assert!((wt.omega - exact.omega).abs() < 1e-9);
        assert!(wt.residual_norm < 1e-9);
    }

    #[test]
    fn newton_failures() {
        let gl = real_ginzburg_landau();
        let constant = ProfileGuess {
            profile: PeriodicProfile::from_fn(2, 32, |_, o| {
                o[0] = 0.5;
                o[1] = 0.0;
            }),
            omega: 0.0,
        };
        assert!(matches!(
            solve_profile(&gl, 0.1, &constant, 32, 1e-10),
            Err(Error::SingularJacobian(_))
        ));
        let q = 1.5f64.sqrt();
        let guess = ProfileGuess {
            profile: PeriodicProfile::from_fn(2, 32, |z, o| {
                o[0] = 0.5 * (TAU * z).cos();
                o[1] = 0.5 * (TAU * z).sin();
            }),
            omega: 0.0,
        };
        let r = solve_profile(&gl, q / TAU, &guess, 32, 1e-10);
        assert!(
            matches!(r, Err(Error::NoWaveTrain(_)) | Err(Error::NoConvergence { .. })),
            "{r:?}"
        );
        assert!(solve_profile(&gl, 0.1, &guess, 15, 1e-10).is_err());
    }

    #[test]
    fn spectral_convergence_in_modes() {
        let gl = real_ginzburg_landau();
        let exact = closed_form_lambda_omega(&gl, 0.2f64.sqrt(), 32).unwrap();
        let guess = noisy_guess(&exact, 1e-3, 9);
        let a = solve_profile(&gl, exact.k, &guess, 32, 1e-12).unwrap();
        let b = solve_profile(&gl, exact.k, &guess, 64, 1e-12).unwrap();
        assert!(sup_diff(&a.profile, &b.profile) < 1e-10);
    }

    #[test]
    fn translation_gauge() {
        let gl = real_ginzburg_landau();
        let exact = closed_form_lambda_omega(&gl, 0.2f64.sqrt(), 64).unwrap();
        let first = solve_profile(&gl, exact.k, &noisy_guess(&exact, 1e-3, 1), 64, 1e-11).unwrap();
        let moved = ProfileGuess {
            profile: translate_profile(&first.profile, 0.137),
            omega: first.omega,
        };
        let second = solve_profile(&gl, exact.k, &moved, 64, 1e-11).unwrap();
        let shift = best_shift(&second.profile, &first.profile);
        assert!(sup_diff(&second.profile, &translate_profile(&first.profile, shift)) < 1e-8);
    }

    #[test]
    fn perturbed_profile_has_visible_residual() {
        let gl = real_ginzburg_landau();
        let mut wt = closed_form_lambda_omega(&gl, 0.2f64.sqrt(), 64).unwrap();
        *wt.profile.coeff_mut(0, 2) += num_complex::Complex64::new(1e-4, 0.0);
        *wt.profile.coeff_mut(0, -2) += num_complex::Complex64::new(1e-4, 0.0);
        let r = profile_residual(&wt, &gl);
        assert!((1e-6..=1e-1).contains(&r), "{r}");
        let zero = WaveTrain::from_profile(0.1, 0.0, PeriodicProfile::from_samples(&vec![0.0; 64], 2));
        assert_eq!(profile_residual(&zero, &gl), 0.0);
    }

    #[test]
    fn json_round_trip() {
        let gl = real_ginzburg_landau();
        let wt = closed_form_lambda_omega(&gl, 0.4, 32).unwrap();
        let back = WaveTrain::from_json(&wt.to_json()).unwrap();
        assert_eq!(back.digest(), wt.digest());
    }

    /// Shift `s` minimizing `‖a − b(· + s)‖`, by dense scan plus golden refinement.
    fn best_shift(a: &PeriodicProfile, b: &PeriodicProfile) -> f64 {
        let cost = |s: f64| sup_diff(a, &translate_profile(b, s));
        let mut best = (0.0, f64::INFINITY);
        for i in 0..400 {
            let s = i as f64 / 400.0 - 0.5;
            let c = cost(s);
            if c < best.1 {
                best = (s, c);
            }
        }
        let (mut lo, mut hi) = (best.0 - 0.0025, best.0 + 0.0025);
        for _ in 0..80 {
            let m1 = lo + (hi - lo) * 0.382;
            let m2 = lo + (hi - lo) * 0.618;
            if cost(m1) < cost(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        0.5 * (lo + hi)
    }
}
