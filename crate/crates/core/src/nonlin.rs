//! Pointwise nonlinearities of the perturbation equations: the unshifted
//! `Ñ₁`, `Ñ₂` and the modulated `𝒩` (written out group by group), plus
//! quadratic-scaling probes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::ReactionDiffusionSystem;
use crate::wavetrain::WaveTrain;
use crate::{Error, Result};

fn matvec(m: &[f64], v: &[f64], out: &mut [f64]) {
    let n = v.len();
    for r in 0..n {
        out[r] = (0..n).map(|c| m[r * n + c] * v[c]).sum();
    }
}

/// `(Ñ₁, Ñ₂)` with `Ñ₁ = f(u∞+ṽ) − f(u∞) − f′(u∞)ṽ` and
/// `Ñ₂ = (f′(u∞+ṽ) − f′(u∞))(ṽ_ζ + u∞′)`.
pub fn eval_unshifted_nonlinearities(
    system: &ReactionDiffusionSystem,
    wt: &WaveTrain,
    zeta: f64,
    vt: &[f64],
    vt_z: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let n = system.n();
    let (mut u, mut up) = (vec![0.0; n], vec![0.0; n]);
    wt.eval(zeta, 0, &mut u);
    wt.eval(zeta, 1, &mut up);
    let shifted: Vec<f64> = u.iter().zip(vt).map(|(a, b)| a + b).collect();
    let (mut j0, mut j1) = (vec![0.0; n * n], vec![0.0; n * n]);
    system.jacobian_into(&u, &mut j0);
    system.jacobian_into(&shifted, &mut j1);
    (
        reaction_remainder(system, &u, &j0, vt),
        {
            let dj: Vec<f64> = j1.iter().zip(&j0).map(|(a, b)| a - b).collect();
            let arg: Vec<f64> = vt_z.iter().zip(&up).map(|(a, b)| a + b).collect();
            let mut out = vec![0.0; n];
            matvec(&dj, &arg, &mut out);
            out
        },
    )
}

/// `(f′(u∞+ṽ) − f′(u∞)) ṽ_ζ`: `Ñ₂` with its `u∞′` term removed.
pub fn unshifted_n2_quadratic_part(
    system: &ReactionDiffusionSystem,
    wt: &WaveTrain,
    zeta: f64,
    vt: &[f64],
    vt_z: &[f64],
) -> Vec<f64> {
    let n = system.n();
    let zero = vec![0.0; n];
    let (_, full) = eval_unshifted_nonlinearities(system, wt, zeta, vt, vt_z);
    let (_, lin) = eval_unshifted_nonlinearities(system, wt, zeta, vt, &zero);
    full.iter().zip(&lin).map(|(a, b)| a - b).collect()
}

/// `f(u + v) − f(u) − J v` with `J = f′(u)`.
fn reaction_remainder(system: &ReactionDiffusionSystem, u: &[f64], jac: &[f64], v: &[f64]) -> Vec<f64> {
    let n = u.len();
    let shifted: Vec<f64> = u.iter().zip(v).map(|(a, b)| a + b).collect();
    let (mut f1, mut f0, mut jv) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    system.reaction_into(&shifted, &mut f1);
    system.reaction_into(u, &mut f0);
    matvec(jac, v, &mut jv);
    (0..n).map(|c| f1[c] - f0[c] - jv[c]).collect()
}

/// Everything entering `𝒩` at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulationState {
    pub zeta: f64,
    pub v: Vec<f64>,
    pub v_z: Vec<f64>,
    pub v_y: Vec<f64>,
    pub v_zz: Vec<f64>,
    pub v_zy: Vec<f64>,
    pub psi_z: f64,
    pub psi_y: f64,
    pub psi_t: f64,
    pub psi_zz: f64,
    pub psi_zy: f64,
    pub psi_yy: f64,
    pub psi_zt: f64,
    pub psi_zzz: f64,
    pub psi_zyy: f64,
}

impl ModulationState {
    pub fn zero(n: usize, zeta: f64) -> Self {
        Self {
            zeta,
            v: vec![0.0; n],
            v_z: vec![0.0; n],
            v_y: vec![0.0; n],
            v_zz: vec![0.0; n],
            v_zy: vec![0.0; n],
            psi_z: 0.0,
            psi_y: 0.0,
            psi_t: 0.0,
            psi_zz: 0.0,
            psi_zy: 0.0,
            psi_yy: 0.0,
            psi_zt: 0.0,
            psi_zzz: 0.0,
            psi_zyy: 0.0,
        }
    }

    /// Multiplies `v`, all its derivatives and all `ψ` derivatives by `eps`.
    pub fn scaled(&self, eps: f64) -> Self {
        let s = |v: &Vec<f64>| v.iter().map(|x| eps * x).collect::<Vec<f64>>();
        Self {
            zeta: self.zeta,
            v: s(&self.v),
            v_z: s(&self.v_z),
            v_y: s(&self.v_y),
            v_zz: s(&self.v_zz),
            v_zy: s(&self.v_zy),
            psi_z: eps * self.psi_z,
            psi_y: eps * self.psi_y,
            psi_t: eps * self.psi_t,
            psi_zz: eps * self.psi_zz,
            psi_zy: eps * self.psi_zy,
            psi_yy: eps * self.psi_yy,
            psi_zt: eps * self.psi_zt,
            psi_zzz: eps * self.psi_zzz,
            psi_zyy: eps * self.psi_zyy,
        }
    }

    /// `Σ_{1≤|a|≤3} |D^a ψ|` over the derivatives carried by the state.
    pub fn psi_derivative_sum(&self) -> f64 {
        [
            self.psi_z,
            self.psi_y,
            self.psi_t,
            self.psi_zz,
            self.psi_zy,
            self.psi_yy,
            self.psi_zt,
            self.psi_zzz,
            self.psi_zyy,
        ]
        .iter()
        .map(|x| x.abs())
        .sum()
    }

    /// Random state of size `scale` taken from a smooth low-mode field, so the
    /// derivative magnitudes are commensurate with the values.
    pub fn random(n: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let zeta: f64 = rng.gen_range(0.0..1.0);
        let y: f64 = rng.gen_range(-1.0..1.0);
        let t: f64 = rng.gen_range(0.0..1.0);
        // φ(ζ,y,t) = Σ a cos(2π(lζ + my + jt) + φ0), l, m, j ∈ {0, 1}
        let mut terms = Vec::new();
        for l in 0..2 {
            for m in 0..2 {
                for j in 0..2 {
                    terms.push((l as f64, m as f64, j as f64, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..std::f64::consts::TAU)));
                }
            }
        }
        let tau = std::f64::consts::TAU;
        // D^(a,b,c) of the random field; scaled so the values stay O(scale)
        let deriv = |terms: &[(f64, f64, f64, f64, f64)], a: i32, b: i32, c: i32| -> f64 {
            let norm = tau.powi(a + b + c) * terms.len() as f64;
            terms
                .iter()
                .map(|&(l, m, j, amp, ph)| {
                    let k = (tau * l).powi(a) * (tau * m).powi(b) * (tau * j).powi(c);
                    let arg = tau * (l * zeta + m * y + j * t) + ph;
                    // cos^(d) = cos(· + dπ/2)
                    amp * k * (arg + (a + b + c) as f64 * std::f64::consts::FRAC_PI_2).cos()
                })
                .sum::<f64>()
                * scale
                / norm
        };
        let vfields: Vec<Vec<(f64, f64, f64, f64, f64)>> = (0..n)
            .map(|_| {
                terms
                    .iter()
                    .map(|&(l, m, j, _, _)| (l, m, j, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..tau)))
                    .collect()
            })
            .collect();
        let vd = |a, b| vfields.iter().map(|f| deriv(f, a, b, 0)).collect::<Vec<f64>>();
        Self {
            zeta,
            v: vd(0, 0),
            v_z: vd(1, 0),
            v_y: vd(0, 1),
            v_zz: vd(2, 0),
            v_zy: vd(1, 1),
            psi_z: deriv(&terms, 1, 0, 0),
            psi_y: deriv(&terms, 0, 1, 0),
            psi_t: deriv(&terms, 0, 0, 1),
            psi_zz: deriv(&terms, 2, 0, 0),
            psi_zy: deriv(&terms, 1, 1, 0),
            psi_yy: deriv(&terms, 0, 2, 0),
            psi_zt: deriv(&terms, 1, 0, 1),
            psi_zzz: deriv(&terms, 3, 0, 0),
            psi_zyy: deriv(&terms, 1, 2, 0),
        }
    }
}

/// The five printed groups of `𝒩`, each as an `n`-vector.
#[derive(Debug, Clone)]
pub struct ModulatedGroups {
    /// `(f(u∞+v) − f(u∞) − f′(u∞)v)(1 + ψ_ζ)`
    pub reaction: Vec<f64>,
    /// `v_ζψ_t + vψ_ζt − ω(v_ζψ_ζ + vψ_ζζ)`
    pub transport: Vec<f64>,
    /// `−D(v(k²ψ_ζζζ + ψ_ζyy) + v_ζ(3k²ψ_ζζ + ψ_yy) + 2v_yψ_ζy + 2k²v_ζζψ_ζ + v_ζy(ψ_ζ + ψ_y))`
    pub diffusion: Vec<f64>,
    /// `D/(1+ψ_ζ)·((u∞′+v_ζ)(ψ_yψ_ζy + ψ_ζψ_ζy + 2k²ψ_ζψ_ζζ) + (u∞″+v_ζζ)(ψ_yψ_ζ + k²ψ_ζ²))`
    pub first_order: Vec<f64>,
    /// `−D/(1+ψ_ζ)²·(u∞′+v_ζ)(ψ_ζψ_ζζψ_y + k²ψ_ζ²ψ_ζζ)`
    pub second_order: Vec<f64>,
}

impl ModulatedGroups {
    pub fn total(&self) -> Vec<f64> {
        (0..self.reaction.len())
            .map(|c| self.reaction[c] + self.transport[c] + self.diffusion[c] + self.first_order[c] + self.second_order[c])
            .collect()
    }
}

pub const MIN_DENOMINATOR: f64 = 0.5;

pub fn modulated_groups(
    system: &ReactionDiffusionSystem,
    wt: &WaveTrain,
    s: &ModulationState,
) -> Result<ModulatedGroups> {
    let den = 1.0 + s.psi_z;
    if den.abs() <= MIN_DENOMINATOR {
        return Err(Error::DenominatorTooSmall(den));
    }
    let n = system.n();
    let k2 = wt.k * wt.k;
    let omega = wt.omega;
    let (mut u, mut up, mut upp) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    wt.eval(s.zeta, 0, &mut u);
    wt.eval(s.zeta, 1, &mut up);
    wt.eval(s.zeta, 2, &mut upp);
    let mut j0 = vec![0.0; n * n];
    system.jacobian_into(&u, &mut j0);
    let d = |x: &[f64]| {
        let mut out = vec![0.0; n];
        system.apply_diffusion(x, &mut out);
        out
    };

    let reaction: Vec<f64> = reaction_remainder(system, &u, &j0, &s.v).iter().map(|x| x * den).collect();

    let transport: Vec<f64> = (0..n)
        .map(|c| {
            s.v_z[c] * s.psi_t + s.v[c] * s.psi_zt - omega * (s.v_z[c] * s.psi_z + s.v[c] * s.psi_zz)
        })
        .collect();

    let inner: Vec<f64> = (0..n)
        .map(|c| {
            s.v[c] * (k2 * s.psi_zzz + s.psi_zyy)
                + s.v_z[c] * (3.0 * k2 * s.psi_zz + s.psi_yy)
                + 2.0 * s.v_y[c] * s.psi_zy
                + 2.0 * k2 * s.v_zz[c] * s.psi_z
                + s.v_zy[c] * (s.psi_z + s.psi_y)
        })
        .collect();
    let diffusion: Vec<f64> = d(&inner).iter().map(|x| -x).collect();

    let a1 = s.psi_y * s.psi_zy + s.psi_z * s.psi_zy + 2.0 * k2 * s.psi_z * s.psi_zz;
    let a2 = s.psi_y * s.psi_z + k2 * s.psi_z * s.psi_z;
    let inner: Vec<f64> = (0..n)
        .map(|c| (up[c] + s.v_z[c]) * a1 + (upp[c] + s.v_zz[c]) * a2)
        .collect();
    let first_order: Vec<f64> = d(&inner).iter().map(|x| x / den).collect();

    let b = s.psi_z * s.psi_zz * s.psi_y + k2 * s.psi_z * s.psi_z * s.psi_zz;
    let inner: Vec<f64> = (0..n).map(|c| (up[c] + s.v_z[c]) * b).collect();
    let second_order: Vec<f64> = d(&inner).iter().map(|x| -x / (den * den)).collect();

    Ok(ModulatedGroups {
        reaction,
        transport,
        diffusion,
        first_order,
        second_order,
    })
}

pub fn eval_modulated_nonlinearity(
    system: &ReactionDiffusionSystem,
    wt: &WaveTrain,
    state: &ModulationState,
) -> Result<Vec<f64>> {
    Ok(modulated_groups(system, wt, state)?.total())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    /// `C` in `‖N(ε)‖ ≈ C ε^slope`.
    pub constant: f64,
}

/// Log–log least-squares slope of `norm(ε)` over `eps`.
pub fn quadratic_scaling_probe(norm: impl Fn(f64) -> Result<f64>, eps: &[f64]) -> Result<ScalingFit> {
    let (lo, hi) = eps
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), &e| (l.min(e), h.max(e)));
    if eps.len() < 3 || hi / lo < 1e3 * (1.0 - 1e-12) {
        return Err(Error::InsufficientData("scaling probe needs at least 3 decades".into()));
    }
    let mut pts = Vec::with_capacity(eps.len());
    for &e in eps {
        let v = norm(e)?;
        if !(v > 0.0) {
            return Err(Error::NonPositiveValues);
        }
        pts.push((e.ln(), v.ln()));
    }
    let (slope, intercept, _) = crate::analysis::least_squares(&pts);
    Ok(ScalingFit {
        slope,
        constant: intercept.exp(),
    })
}

pub fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Right-hand side of the quadratic bound for `𝒩` without its constant:
/// `(‖v‖ + Σ|D^aψ|)² + (‖v_y‖ + ‖v_ζ‖ + ‖v_ζζ‖ + ‖v_ζy‖)·Σ_{1≤|c|≤2}|D^cψ|`.
pub fn modulated_bound_rhs(s: &ModulationState) -> f64 {
    let first = euclid(&s.v) + s.psi_derivative_sum();
    let low = [s.psi_z, s.psi_y, s.psi_t, s.psi_zz, s.psi_zy, s.psi_yy, s.psi_zt]
        .iter()
        .map(|x| x.abs())
        .sum::<f64>();
    first * first + (euclid(&s.v_y) + euclid(&s.v_z) + euclid(&s.v_zz) + euclid(&s.v_zy)) * low
}

/// Largest `‖𝒩‖ / rhs` over `samples` random states with
/// `‖v‖ + Σ|D^aψ| ≤ size`: a finite, moderate value certifies the bound.
pub fn certify_modulated_bound(
    system: &ReactionDiffusionSystem,
    wt: &WaveTrain,
    samples: usize,
    size: f64,
    rng: &mut impl Rng,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let mut s = ModulationState::random(system.n(), 1.0, rng);
        let mag = euclid(&s.v) + s.psi_derivative_sum();
        if mag > 0.0 {
            s = s.scaled(size * rng.gen_range(1e-3..1.0) / mag);
        }
        let rhs = modulated_bound_rhs(&s);
        let val = euclid(&eval_modulated_nonlinearity(system, wt, &s)?);
        if rhs > 0.0 {
            worst = worst.max(val / rhs);
        } else if val > 0.0 {
            return Ok(f64::INFINITY);
        }
    }
    Ok(worst)
}
