//! The translational Green's kernel `e(ζ, ζ̄, y, t)`, Gaussian bound templates,
//! and closed-form vs quadrature checks of the Gaussian integral identities
//! used in the decay estimates.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::fourier::PeriodicProfile;
use crate::quadrature::{integrate, integrate_complex};
use crate::{Error, Result};

/// Smooth switch: 0 for `t ≤ t0`, 1 for `t ≥ t1`, quintic smoothstep between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub t0: f64,
    pub t1: f64,
}

impl Default for Cutoff {
    fn default() -> Self {
        Self { t0: 1.0, t1: 2.0 }
    }
}

impl Cutoff {
    fn s(&self, t: f64) -> f64 {
        ((t - self.t0) / (self.t1 - self.t0)).clamp(0.0, 1.0)
    }

    pub fn value(&self, t: f64) -> f64 {
        if t <= self.t0 {
            return 0.0;
        }
        if t >= self.t1 {
            return 1.0;
        }
        let s = self.s(t);
        s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let s = self.s(t);
        30.0 * s * s * (1.0 - s) * (1.0 - s) / (self.t1 - self.t0)
    }

    pub fn second_derivative(&self, t: f64) -> f64 {
        let s = self.s(t);
        let h = self.t1 - self.t0;
        60.0 * s * (1.0 - s) * (1.0 - 2.0 * s) / (h * h)
    }
}

#[derive(Debug, Clone)]
pub struct PhaseKernelParams {
    pub alpha: f64,
    pub theta: f64,
    pub d_perp: f64,
    pub u_ad: PeriodicProfile,
    pub uprime: PeriodicProfile,
    pub chi: Cutoff,
    /// Digest of the wave train the coefficients were computed from.
    pub wavetrain_digest: u64,
}

impl PhaseKernelParams {
    pub fn new(
        alpha: f64,
        theta: f64,
        d_perp: f64,
        u_ad: PeriodicProfile,
        uprime: PeriodicProfile,
        wavetrain_digest: u64,
    ) -> Result<Self> {
        if !(theta > 0.0 && d_perp > 0.0) {
            return Err(Error::Domain(format!(
                "kernel needs theta > 0 and d_perp > 0 (got {theta}, {d_perp})"
            )));
        }
        if u_ad.n() != uprime.n() {
            return Err(Error::Contract("u_ad and u∞′ differ in component count".into()));
        }
        Ok(Self {
            alpha,
            theta,
            d_perp,
            u_ad,
            uprime,
            chi: Cutoff::default(),
            wavetrain_digest,
        })
    }

    pub fn n(&self) -> usize {
        self.u_ad.n()
    }

    /// Scalar factor `χ(t)/(4πt√(d⊥θ)) · exp(−|dz+αt|²/(4θt) − y²/(4d⊥t))`,
    /// with `dz = ζ − ζ̄`. Exactly zero while `χ` vanishes.
    pub fn gaussian_factor(&self, dz: f64, y: f64, t: f64) -> f64 {
        let chi = self.chi.value(t);
        if chi == 0.0 {
            return 0.0;
        }
        let x = dz + self.alpha * t;
        chi / (4.0 * PI * t * (self.d_perp * self.theta).sqrt())
            * (-x * x / (4.0 * self.theta * t) - y * y / (4.0 * self.d_perp * t)).exp()
    }
}

/// `e(ζ, ζ̄, y, t)` as a row covector of length `n`.
pub fn eval_phase_kernel(p: &PhaseKernelParams, zeta: f64, zeta_bar: f64, y: f64, t: f64) -> Vec<f64> {
    let g = p.gaussian_factor(zeta - zeta_bar, y, t);
    let mut out = vec![0.0; p.n()];
    if g != 0.0 {
        p.u_ad.eval(zeta_bar.rem_euclid(1.0), 0, &mut out);
        out.iter_mut().for_each(|v| *v *= g);
    }
    out
}

/// Translational part `u∞′(ζ) e(ζ, ζ̄, y, t)` of the Green's function, as a
/// row-major `n × n` matrix.
pub fn eval_translational_part(p: &PhaseKernelParams, zeta: f64, zeta_bar: f64, y: f64, t: f64) -> Vec<f64> {
    let n = p.n();
    let e = eval_phase_kernel(p, zeta, zeta_bar, y, t);
    let mut up = vec![0.0; n];
    p.uprime.eval(zeta.rem_euclid(1.0), 0, &mut up);
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = up[i] * e[j];
        }
    }
    out
}

/// `C t^{-p} (1+t)^{-q} exp(−(|ζ−ζ̄+αt|² + y²)/(M t))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBoundTemplate {
    pub c: f64,
    pub m: f64,
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
}

impl GaussianBoundTemplate {
    pub fn eval(&self, dz: f64, y: f64, t: f64) -> f64 {
        let x = dz + self.alpha * t;
        self.c * t.powf(-self.p) * (1.0 + t).powf(-self.q) * (-(x * x + y * y) / (self.m * t)).exp()
    }
}

pub fn eval_bound_template(tpl: &GaussianBoundTemplate, zeta: f64, zeta_bar: f64, y: f64, t: f64) -> f64 {
    tpl.eval(zeta - zeta_bar, y, t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Identity {
    /// `∫ e^{az(z−2b)} dz = √π/√|a| e^{−ab²}`, `a < 0`, complex `b`.
    A4,
    /// `∫ |z|^a e^{−bz²} dz = Γ((a+1)/2) b^{−(a+1)/2}`.
    A5,
    /// `∫₀^∞ e^{−bz}/√z dz = √π/√b`.
    A6,
    /// Line-localized Gaussian convolution against a heat kernel.
    I54a,
    /// Same with a time-shifted source.
    I54b,
    /// Fully localized Gaussian convolution against a heat kernel.
    I58a,
    I58b,
}

impl Identity {
    pub const ALL: [Identity; 7] = [
        Identity::A4,
        Identity::A5,
        Identity::A6,
        Identity::I54a,
        Identity::I54b,
        Identity::I58a,
        Identity::I58b,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Identity::A4 => "A4",
            Identity::A5 => "A5",
            Identity::A6 => "A6",
            Identity::I54a => "I54a",
            Identity::I54b => "I54b",
            Identity::I58a => "I58a",
            Identity::I58b => "I58b",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|i| i.name().eq_ignore_ascii_case(s))
    }
}

/// Parameters for all identities; each identity reads only the ones it uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityParams {
    pub a: f64,
    pub b: Complex64,
    pub m: f64,
    pub t: f64,
    pub s: f64,
    pub zeta: f64,
    pub y: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for IdentityParams {
    fn default() -> Self {
        Self {
            a: -1.0,
            b: Complex64::new(0.0, 0.0),
            m: 2.0,
            t: 1.0,
            s: 0.0,
            zeta: 0.0,
            y: 0.0,
            alpha: 0.0,
            beta: 1.0,
            gamma: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub closed: Complex64,
    pub quadrature: Complex64,
}

impl IdentityCheck {
    pub fn abs_error(&self) -> f64 {
        (self.closed - self.quadrature).norm()
    }

    pub fn rel_error(&self) -> f64 {
        let scale = self.closed.norm();
        if scale == 0.0 {
            self.abs_error()
        } else {
            self.abs_error() / scale
        }
    }
}

const TRUNC_SIGMAS: f64 = 12.0;
const REL_TOL: f64 = 1e-13;

/// Integral of `exp(−Q(ζ̄, ȳ))` for a positive-definite quadratic `Q` given as a
/// closure, over a box truncated at 12 standard deviations around the mode.
/// `prec` and `mean` describe the Gaussian and are used only for truncation.
fn gaussian_2d(
    integrand: impl Fn(f64, f64) -> f64,
    prec: [[f64; 2]; 2],
    mean: [f64; 2],
) -> Result<f64> {
    let det = prec[0][0] * prec[1][1] - prec[0][1] * prec[1][0];
    // marginal variance of ζ̄ is P_yy / det
    let sx = (prec[1][1] / det).sqrt();
    let sy_cond = 1.0 / prec[1][1].sqrt();
    let outer = |zb: f64| {
        let cy = mean[1] - prec[1][0] / prec[1][1] * (zb - mean[0]);
        let half = TRUNC_SIGMAS * sy_cond;
        let split = |lo: f64, hi: f64| integrate(|yb| integrand(zb, yb), lo, hi, 0.0, REL_TOL);
        match (split(cy - half, cy), split(cy, cy + half)) {
            (Ok(l), Ok(r)) => l.value + r.value,
            _ => f64::NAN,
        }
    };
    let half = TRUNC_SIGMAS * sx;
    let l = integrate(&outer, mean[0] - half, mean[0], 0.0, REL_TOL)?;
    let r = integrate(&outer, mean[0], mean[0] + half, 0.0, REL_TOL)?;
    let v = l.value + r.value;
    if !v.is_finite() {
        return Err(Error::NoConvergence {
            iterations: 0,
            residual: f64::NAN,
        });
    }
    Ok(v)
}

fn check_domain(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Domain(msg()))
    }
}

pub fn check_integral_identity(id: Identity, p: &IdentityParams) -> Result<IdentityCheck> {
    let sqrt_pi = PI.sqrt();
    let real = |closed: f64, quad: f64| IdentityCheck {
        closed: closed.into(),
        quadrature: quad.into(),
    };
    match id {
        Identity::A4 => {
            check_domain(p.a < 0.0 && p.a.is_finite(), || format!("A4 needs a < 0, got {}", p.a))?;
            let (a, b) = (p.a, p.b);
            let closed = (-a * b * b).exp() * (sqrt_pi / a.abs().sqrt());
            // integrand is e^{a(z−b)²−ab²}: centred at Re b with width 1/√|a|
            let half = TRUNC_SIGMAS / a.abs().sqrt() + b.im.abs();
            let f = |z: f64| (a * z * (Complex64::new(z, 0.0) - 2.0 * b)).exp();
            let l = integrate_complex(f, b.re - half, b.re, 0.0, REL_TOL)?;
            let r = integrate_complex(f, b.re, b.re + half, 0.0, REL_TOL)?;
            Ok(IdentityCheck {
                closed,
                quadrature: l.value + r.value,
            })
        }
        Identity::A5 => {
            check_domain(p.a >= 0.0 && p.b.re > 0.0 && p.b.im == 0.0, || {
                format!("A5 needs a ≥ 0 and real b > 0, got a = {}, b = {}", p.a, p.b)
            })?;
            let (a, b) = (p.a, p.b.re);
            let closed = libm::tgamma((a + 1.0) / 2.0) * b.powf(-(a + 1.0) / 2.0);
            let half = (TRUNC_SIGMAS + (a + 1.0).sqrt() * 2.0) / b.sqrt();
            let f = |z: f64| z.abs().powf(a) * (-b * z * z).exp();
            let l = integrate(f, -half, 0.0, 0.0, REL_TOL)?;
            let r = integrate(f, 0.0, half, 0.0, REL_TOL)?;
            Ok(real(closed, l.value + r.value))
        }
        Identity::A6 => {
            check_domain(p.b.re > 0.0 && p.b.im == 0.0, || format!("A6 needs real b > 0, got {}", p.b))?;
            let b = p.b.re;
            let closed = sqrt_pi / b.sqrt();
            // z = w² removes the endpoint singularity: ∫₀^∞ 2e^{−bw²} dw
            let q = integrate(|w| 2.0 * (-b * w * w).exp(), 0.0, TRUNC_SIGMAS / b.sqrt(), 0.0, REL_TOL)?;
            Ok(real(closed, q.value))
        }
        Identity::I54a | Identity::I54b | Identity::I58a | Identity::I58b => {
            check_domain(p.m > 1.0, || format!("M must exceed 1, got {}", p.m))?;
            check_domain(0.0 <= p.s && p.s <= p.t, || format!("need 0 ≤ s ≤ t, got s = {}, t = {}", p.s, p.t))?;
            let line = matches!(id, Identity::I54a | Identity::I54b);
            if line {
                let norm = p.beta.hypot(p.gamma);
                if (norm - 1.0).abs() > 1e-12 {
                    return Err(Error::NotUnitVector(p.beta, p.gamma));
                }
            }
            let shifted = matches!(id, Identity::I54b | Identity::I58b);
            let s = if shifted { p.s } else { 0.0 };
            let tau = p.t - s;
            let m = p.m;
            let (zeta, y, al, be, ga, t) = (p.zeta, p.y, p.alpha, p.beta, p.gamma, p.t);
            let closed = if line {
                let w = be * zeta + ga * y + al * be * t;
                m * PI * tau * (1.0 + s).sqrt() * (-w * w / (m * (1.0 + t))).exp() / (1.0 + t).sqrt()
            } else {
                let x = zeta + al * t;
                m * PI * tau * (1.0 + s) * (-(x * x + y * y) / (m * (1.0 + t))).exp() / (1.0 + t)
            };
            if tau == 0.0 {
                // the heat factor degenerates to a point mass times zero prefactor
                return Ok(real(closed, 0.0));
            }
            let src_w = if shifted { m * (1.0 + s) } else { m };
            let integrand = |zb: f64, yb: f64| {
                let dx = zeta - zb + al * tau;
                let dy = y - yb;
                let heat = (dx * dx + dy * dy) / (m * tau);
                let src = if line {
                    let w = be * zb + ga * yb + if shifted { al * be * s } else { 0.0 };
                    w * w / src_w
                } else {
                    let x = zb + if shifted { al * s } else { 0.0 };
                    (x * x + yb * yb) / src_w
                };
                (-heat - src).exp()
            };
            // precision matrix and mode of the exponent, for truncation only
            let h = 1.0 / (m * tau);
            let (prec, rhs) = if line {
                let c = 1.0 / src_w;
                let shift = if shifted { al * be * s } else { 0.0 };
                (
                    [[h + c * be * be, c * be * ga], [c * be * ga, h + c * ga * ga]],
                    [h * (zeta + al * tau) - c * be * shift, h * y - c * ga * shift],
                )
            } else {
                let c = 1.0 / src_w;
                let shift = if shifted { al * s } else { 0.0 };
                ([[h + c, 0.0], [0.0, h + c]], [h * (zeta + al * tau) - c * shift, h * y])
            };
            let det = prec[0][0] * prec[1][1] - prec[0][1] * prec[1][0];
            let mean = [
                (prec[1][1] * rhs[0] - prec[0][1] * rhs[1]) / det,
                (prec[0][0] * rhs[1] - prec[1][0] * rhs[0]) / det,
            ];
            let quad = gaussian_2d(integrand, prec, mean)?;
            Ok(real(closed, quad))
        }
    }
}

/// Draws in-domain parameters for `id` from `rng`.
pub fn random_identity_params(id: Identity, rng: &mut impl rand::Rng) -> IdentityParams {
    let mut p = IdentityParams::default();
    match id {
        Identity::A4 => {
            p.a = -rng.gen_range(0.1..5.0);
            p.b = Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-0.5..0.5));
        }
        Identity::A5 => {
            p.a = rng.gen_range(0.0..4.0);
            p.b = rng.gen_range(0.2..5.0).into();
        }
        Identity::A6 => p.b = rng.gen_range(0.1..10.0).into(),
        _ => {
            p.m = rng.gen_range(1.1..8.0);
            p.t = rng.gen_range(0.1..20.0);
            p.s = rng.gen_range(0.0..p.t);
            p.zeta = rng.gen_range(-3.0..3.0);
            p.y = rng.gen_range(-3.0..3.0);
            p.alpha = rng.gen_range(-0.5..0.5);
            let ang: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            p.beta = ang.cos();
            p.gamma = ang.sin();
            // the closed forms only use unit vectors up to rounding
            let norm = p.beta.hypot(p.gamma);
            p.beta /= norm;
            p.gamma /= norm;
        }
    }
    p
}
