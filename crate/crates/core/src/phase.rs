//! The phase `ψ` in `ũ(ζ + ψ, y, t) = u∞(ζ) + v(ζ, y, t)`: its linear-order
//! prediction from the phase kernel, pointwise extraction from snapshots, and
//! the shifted residual `v`.

use serde::{Deserialize, Serialize};

use crate::field::{Fft2, Field2D, Grid2D};
use crate::kernel::PhaseKernelParams;
use crate::wavetrain::{GridProfile, WaveTrain};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseMethod {
    LinearKernel,
    DirectFit,
}

#[derive(Debug, Clone)]
pub struct PhaseField {
    pub t: f64,
    pub method: PhaseMethod,
    /// Scalar field.
    pub psi: Field2D,
    /// Points where the fit left the `|ψ| < 1/2` branch (`ψ` set to 0 there).
    pub flagged: usize,
}

/// Spectral derivatives of `ψ` up to second order.
#[derive(Debug, Clone)]
pub struct PhaseDerivatives {
    pub z: Field2D,
    pub y: Field2D,
    pub zz: Field2D,
    pub zy: Field2D,
    pub yy: Field2D,
}

impl PhaseDerivatives {
    pub fn first(&self) -> [&Field2D; 2] {
        [&self.z, &self.y]
    }

    pub fn second(&self) -> [&Field2D; 3] {
        [&self.zz, &self.zy, &self.yy]
    }
}

impl PhaseField {
    pub fn derivatives(&self, fft: &Fft2) -> PhaseDerivatives {
        PhaseDerivatives {
            z: fft.derivative(&self.psi, 1, 0),
            y: fft.derivative(&self.psi, 0, 1),
            zz: fft.derivative(&self.psi, 2, 0),
            zy: fft.derivative(&self.psi, 1, 1),
            yy: fft.derivative(&self.psi, 0, 2),
        }
    }

    pub fn sup(&self) -> f64 {
        self.psi.sup_norm()
    }
}

/// `ψ(t) = −∫∫ e(ζ, ζ̄, y − ȳ, t) v0(ζ̄, ȳ) dζ̄ dȳ` (linear order only).
pub fn linear_phase_prediction(v0: &Field2D, kernel: &PhaseKernelParams, fft: &Fft2, t: f64) -> PhaseField {
    let mut psi = crate::greens::kernel_convolution(v0, kernel, fft, t).scaled(-1.0);
    psi.t = t;
    PhaseField {
        t,
        method: PhaseMethod::LinearKernel,
        psi,
        flagged: 0,
    }
}

/// Number of Taylor terms used to evaluate a field between grid points.
const TAYLOR_ORDER: usize = 14;

/// `ζ`-derivatives `∂_ζ^d ũ`, `d = 0..=TAYLOR_ORDER + 2`, so that `ũ`, `ũ_ζ`,
/// `ũ_ζζ` can be evaluated at `ζ_i + h` for `|h| ≤ Δζ/2`.
struct ShiftEvaluator {
    grid: Grid2D,
    n: usize,
    stack: Vec<Field2D>,
    inv_fact: Vec<f64>,
}

impl ShiftEvaluator {
    fn new(u: &Field2D, fft: &Fft2) -> Self {
        let mut stack = vec![u.clone()];
        for d in 1..=(TAYLOR_ORDER + 2) as u32 {
            stack.push(fft.derivative(u, d, 0));
        }
        let mut inv_fact = vec![1.0; TAYLOR_ORDER + 1];
        for k in 1..=TAYLOR_ORDER {
            inv_fact[k] = inv_fact[k - 1] / k as f64;
        }
        Self {
            grid: u.grid,
            n: u.n,
            stack,
            inv_fact,
        }
    }

    /// Writes `∂_ζ^deriv ũ(ζ_i + s, y_j)` into `out`.
    fn eval(&self, i: usize, j: usize, s: f64, deriv: usize, out: &mut [f64]) {
        let dz = self.grid.dzeta();
        let shift = (s / dz).round();
        let h = s - shift * dz;
        let ii = (i as i64 + shift as i64).rem_euclid(self.grid.nx as i64) as usize;
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut hp = 1.0;
        for k in 0..=TAYLOR_ORDER {
            let f = self.stack[deriv + k].at(ii, j);
            let w = hp * self.inv_fact[k];
            for c in 0..self.n {
                out[c] += w * f[c];
            }
            hp *= h;
        }
    }
}

/// Extracts `ψ` pointwise: Newton on `g(ψ) = (ũ(ζ+ψ) − u∞(ζ))·ũ_ζ(ζ+ψ)`, the
/// stationarity condition of `‖ũ(ζ+ψ, y) − u∞(ζ)‖²`, starting from `ψ = 0`.
pub fn extract_phase(utilde: &Field2D, wt: &WaveTrain) -> Result<PhaseField> {
    let fft = Fft2::new(utilde.grid);
    let prof = GridProfile::new(wt, &utilde.grid);
    let ev = prepare(utilde, wt, &prof, &fft)?;
    Ok(fit_phase(&ev, &prof, utilde.t))
}

/// [`extract_phase`] followed by [`shifted_residual`], sharing the
/// derivative stack: returns `(ψ, v, ∂_ζ v)`.
pub fn extract_phase_and_residual(
    utilde: &Field2D,
    wt: &WaveTrain,
    fft: &Fft2,
) -> Result<(PhaseField, Field2D, Field2D)> {
    let prof = GridProfile::new(wt, &utilde.grid);
    let ev = prepare(utilde, wt, &prof, fft)?;
    let psi = fit_phase(&ev, &prof, utilde.t);
    let v = residual(&ev, &prof, &psi.psi, utilde.t);
    let mut vz = fft.derivative(&v, 1, 0);
    vz.t = v.t;
    Ok((psi, v, vz))
}

fn prepare(utilde: &Field2D, wt: &WaveTrain, prof: &GridProfile, fft: &Fft2) -> Result<ShiftEvaluator> {
    let grid = utilde.grid;
    if utilde.n != wt.n() {
        return Err(Error::Contract("snapshot and wave train dimensions differ".into()));
    }
    let deviation = utilde.sub(&prof.field(grid, 0)).sup_norm();
    let limit = 0.2 * wt.derivative_sup();
    if deviation >= limit {
        return Err(Error::Contract(format!(
            "perturbation {deviation:.3e} too large for phase extraction (limit {limit:.3e})"
        )));
    }
    Ok(ShiftEvaluator::new(utilde, fft))
}

fn fit_phase(ev: &ShiftEvaluator, prof: &GridProfile, t: f64) -> PhaseField {
    let grid = ev.grid;
    let n = ev.n;
    let mut psi = Field2D::zeros(grid, 1);
    psi.t = t;
    let mut flagged = 0;
    let (mut u, mut du, mut ddu) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for i in 0..grid.nx {
        let target = prof.u(i);
        for j in 0..grid.ny {
            let mut p = 0.0;
            let mut ok = false;
            for _ in 0..50 {
                ev.eval(i, j, p, 0, &mut u);
                ev.eval(i, j, p, 1, &mut du);
                ev.eval(i, j, p, 2, &mut ddu);
                let mut g = 0.0;
                let mut dg = 0.0;
                for c in 0..n {
                    let r = u[c] - target[c];
                    g += r * du[c];
                    dg += du[c] * du[c] + r * ddu[c];
                }
                if !(dg > 0.0) {
                    break;
                }
                let step = g / dg;
                p -= step;
                if p.abs() >= 0.5 {
                    break;
                }
                if step.abs() < 1e-15 {
                    ok = true;
                    break;
                }
            }
            if ok {
                psi.at_mut(i, j)[0] = p;
            } else {
                flagged += 1;
            }
        }
    }
    PhaseField {
        t,
        method: PhaseMethod::DirectFit,
        psi,
        flagged,
    }
}

fn residual(ev: &ShiftEvaluator, prof: &GridProfile, psi: &Field2D, t: f64) -> Field2D {
    let grid = ev.grid;
    let n = ev.n;
    let mut v = Field2D::zeros(grid, n);
    v.t = t;
    let mut u = vec![0.0; n];
    for i in 0..grid.nx {
        let base = prof.u(i);
        for j in 0..grid.ny {
            ev.eval(i, j, psi.at(i, j)[0], 0, &mut u);
            v.at_mut(i, j).iter_mut().zip(u.iter().zip(base)).for_each(|(o, (a, b))| *o = a - b);
        }
    }
    v
}

/// `v(ζ, y) = ũ(ζ + ψ(ζ, y), y) − u∞(ζ)` and its spectral `∂_ζ v`.
pub fn shifted_residual(utilde: &Field2D, psi: &PhaseField, wt: &WaveTrain) -> Result<(Field2D, Field2D)> {
    let grid = utilde.grid;
    if psi.psi.grid != grid {
        return Err(Error::IncompatibleGrid("phase and snapshot grids differ".into()));
    }
    let prof = GridProfile::new(wt, &grid);
    let fft = Fft2::new(grid);
    let ev = ShiftEvaluator::new(utilde, &fft);
    let v = residual(&ev, &prof, &psi.psi, utilde.t);
    let mut vz = fft.derivative(&v, 1, 0);
    vz.t = v.t;
    Ok((v, vz))
}

/// `∂_t ψ` at the middle of three snapshots by the second-order central
/// difference for non-uniform steps.
pub fn time_derivative(prev: &PhaseField, cur: &PhaseField, next: &PhaseField) -> Result<Field2D> {
    let (h1, h2) = (cur.t - prev.t, next.t - cur.t);
    if !(h1 > 0.0 && h2 > 0.0) {
        return Err(Error::Contract("phase snapshots must have increasing times".into()));
    }
    let a = -h2 / (h1 * (h1 + h2));
    let b = (h2 - h1) / (h1 * h2);
    let c = h1 / (h2 * (h1 + h2));
    let mut out = prev.psi.scaled(a).add(&cur.psi.scaled(b)).add(&next.psi.scaled(c));
    out.t = cur.t;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::real_ginzburg_landau;
    use crate::wavetrain::closed_form_lambda_omega;
    use std::f64::consts::TAU;

    fn setup() -> (WaveTrain, Grid2D, f64) {
        let sys = real_ginzburg_landau();
        let wt = closed_form_lambda_omega(&sys, 0.2f64.sqrt(), 16).unwrap();
        let r0 = 0.8f64.sqrt();
        (wt, Grid2D::new(2.0, 8.0, 64, 32).unwrap(), r0)
    }

    #[test]
    fn translate_gives_constant_phase() {
        let (wt, g, _) = setup();
        for delta in [0.0, 0.01, -0.07, 0.1] {
            let u = Field2D::from_fn(g, 2, |z, _, o| wt.eval(z + delta, 0, o));
            let ph = extract_phase(&u, &wt).unwrap();
            assert_eq!(ph.flagged, 0);
            let err = ph.psi.components()[0].iter().map(|p| (p + delta).abs()).fold(0.0, f64::max);
            assert!(err < 1e-10, "delta {delta}: {err}");
            let (v, _) = shifted_residual(&u, &ph, &wt).unwrap();
            assert!(v.sup_norm() < 1e-8);
        }
    }

    #[test]
    fn zero_phase_gives_plain_difference() {
        let (wt, g, _) = setup();
        let u = Field2D::from_fn(g, 2, |z, y, o| {
            wt.eval(z, 0, o);
            o[0] += 1e-3 * (TAU * z).sin() * (-y * y).exp();
        });
        let zero = PhaseField {
            t: 0.0,
            method: PhaseMethod::DirectFit,
            psi: Field2D::zeros(g, 1),
            flagged: 0,
        };
        let (v, _) = shifted_residual(&u, &zero, &wt).unwrap();
        let prof = GridProfile::new(&wt, &g);
        assert!(v.sub(&u.sub(&prof.field(g, 0))).sup_norm() < 1e-15);
    }

    #[test]
    fn polar_angle_oracle() {
        // ũ = a(y) r0 (cos φ, sin φ), φ = 2π(ζ + δ(ζ, y)); with a independent of
        // ζ the minimizer solves φ(ζ + ψ) = 2πζ exactly.
        let (wt, g, r0) = setup();
        let delta = |z: f64, y: f64| 0.02 * (-y * y / 4.0).exp() + 0.003 * (TAU * z).sin();
        let amp = |y: f64| 1.0 + 0.05 * (-y * y).exp();
        let u = Field2D::from_fn(g, 2, |z, y, o| {
            let phi = TAU * (z + delta(z, y));
            o[0] = amp(y) * r0 * phi.cos();
            o[1] = amp(y) * r0 * phi.sin();
        });
        let ph = extract_phase(&u, &wt).unwrap();
        for i in 0..g.nx {
            for j in 0..g.ny {
                let (z, y) = (g.zeta(i), g.y(j));
                let p = ph.psi.at(i, j)[0];
                // the polar phase at the shifted point
                let polar = delta(z + p, y);
                assert!((p + polar).abs() < 1e-9, "{i} {j}: {p} vs {polar}");
            }
        }
    }

    #[test]
    fn translate_consistency() {
        let (wt, g, _) = setup();
        let base = |z: f64, y: f64, o: &mut [f64]| {
            wt.eval(z + 0.01 * (-y * y / 9.0).exp(), 0, o);
            o[0] += 1e-3 * (TAU * z).cos() * (-y * y).exp();
        };
        let u = Field2D::from_fn(g, 2, base);
        let p0 = extract_phase(&u, &wt).unwrap();
        // ũ(ζ + d + ψ_new) ≈ u∞(ζ) is the old problem with ψ_old = ψ_new + d
        for d in [0.05, -0.1, 0.013] {
            let shifted = Field2D::from_fn(g, 2, |z, y, o| base(z + d, y, o));
            let p1 = extract_phase(&shifted, &wt).unwrap();
            let err = p1.psi.sub(&p0.psi).components()[0]
                .iter()
                .map(|x| (x + d).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-9, "{err}");
        }
    }

    #[test]
    fn central_time_derivative_exact_for_quadratics() {
        let (_, g, _) = setup();
        let mk = |t: f64| PhaseField {
            t,
            method: PhaseMethod::DirectFit,
            psi: Field2D::from_fn(g, 1, |z, _, o| o[0] = z * (1.0 + 2.0 * t + 3.0 * t * t)),
            flagged: 0,
        };
        let d = time_derivative(&mk(1.0), &mk(1.25), &mk(1.5625)).unwrap();
        let i = 40;
        let expect = g.zeta(i) * (2.0 + 6.0 * 1.25);
        assert!((d.at(i, 3)[0] - expect).abs() < 1e-10);
    }
}
