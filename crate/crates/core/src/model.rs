//! Reaction-diffusion systems `u_t = D(u_xx + u_yy) + f(u)` and the built-in
//! test-bed models.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::{Error, Result};

/// A reaction term together with its exact Jacobian.
pub trait Reaction: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    /// Writes `f(u)` into `out`.
    fn eval(&self, u: &[f64], out: &mut [f64]);
    /// Writes `f'(u)` into `out`, row-major `n x n`.
    fn jacobian(&self, u: &[f64], out: &mut [f64]);
}

/// Planar λ–ω system
/// `f(u) = (λ(r)u₁ − ω̃(r)u₂, ω̃(r)u₁ + λ(r)u₂)`, where λ and ω̃ are polynomials
/// in `s = r² = u₁² + u₂²` given by their coefficient lists (constant first).
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaOmega {
    pub lambda_coeffs: Vec<f64>,
    pub omega_coeffs: Vec<f64>,
}

fn poly(coeffs: &[f64], s: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c)
}

fn dpoly(coeffs: &[f64], s: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (j, c)| acc * s + j as f64 * c)
}

impl LambdaOmega {
    /// λ as a function of the amplitude `r`.
    pub fn lambda(&self, r: f64) -> f64 {
        poly(&self.lambda_coeffs, r * r)
    }

    /// ω̃ as a function of the amplitude `r`.
    pub fn omega_tilde(&self, r: f64) -> f64 {
        poly(&self.omega_coeffs, r * r)
    }

    /// Smallest `r0 > 0` with `λ(r0) = target`, if any exists for `r0² ∈ (0, s_max]`.
    pub fn solve_amplitude(&self, target: f64, s_max: f64) -> Option<f64> {
        let g = |s: f64| poly(&self.lambda_coeffs, s) - target;
        let steps = 4000;
        let h = s_max / steps as f64;
        let mut a = 0.0;
        let mut ga = g(a);
        for i in 1..=steps {
            let b = i as f64 * h;
            let gb = g(b);
            if gb == 0.0 && b > 0.0 {
                return Some(b.sqrt());
            }
            if ga * gb < 0.0 {
                let (mut lo, mut hi) = (a, b);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if g(lo) * g(mid) <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                let s = 0.5 * (lo + hi);
                return (s > 0.0).then(|| s.sqrt());
            }
            a = b;
            ga = gb;
        }
        None
    }
}

impl Reaction for LambdaOmega {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, u: &[f64], out: &mut [f64]) {
        let s = u[0] * u[0] + u[1] * u[1];
        let l = poly(&self.lambda_coeffs, s);
        let w = poly(&self.omega_coeffs, s);
        out[0] = l * u[0] - w * u[1];
        out[1] = w * u[0] + l * u[1];
    }

    fn jacobian(&self, u: &[f64], out: &mut [f64]) {
        let (u1, u2) = (u[0], u[1]);
        let s = u1 * u1 + u2 * u2;
        let l = poly(&self.lambda_coeffs, s);
        let w = poly(&self.omega_coeffs, s);
        let dl = dpoly(&self.lambda_coeffs, s);
        let dw = dpoly(&self.omega_coeffs, s);
        out[0] = l + 2.0 * dl * u1 * u1 - 2.0 * dw * u1 * u2;
        out[1] = 2.0 * dl * u1 * u2 - w - 2.0 * dw * u2 * u2;
        out[2] = w + 2.0 * dw * u1 * u1 + 2.0 * dl * u1 * u2;
        out[3] = l + 2.0 * dw * u1 * u2 + 2.0 * dl * u2 * u2;
    }
}

/// Linear reaction `f(u) = A u`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearReaction {
    pub n: usize,
    pub matrix: Vec<f64>,
}

impl Reaction for LinearReaction {
    fn dim(&self) -> usize {
        self.n
    }

    fn eval(&self, u: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.n) {
            *o = (0..self.n).map(|j| self.matrix[i * self.n + j] * u[j]).sum();
        }
    }

    fn jacobian(&self, _u: &[f64], out: &mut [f64]) {
        out[..self.n * self.n].copy_from_slice(&self.matrix);
    }
}

#[derive(Debug, Clone)]
enum Kind {
    LambdaOmega(LambdaOmega),
    Other,
}

/// An `n`-component reaction-diffusion system with constant SPD diffusion.
///
/// Immutable after construction; clones share the reaction term.
#[derive(Debug, Clone)]
pub struct ReactionDiffusionSystem {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    diffusion: Vec<f64>,
    reaction: Arc<dyn Reaction>,
    kind: Kind,
}

impl ReactionDiffusionSystem {
    pub fn new(
        name: impl Into<String>,
        params: BTreeMap<String, f64>,
        diffusion: Vec<f64>,
        reaction: Arc<dyn Reaction>,
    ) -> Result<Self> {
        let sys = Self {
            name: name.into(),
            params,
            diffusion,
            reaction,
            kind: Kind::Other,
        };
        sys.check_diffusion()?;
        Ok(sys)
    }

    pub fn n(&self) -> usize {
        self.reaction.dim()
    }

    /// Row-major diffusion matrix.
    pub fn diffusion(&self) -> &[f64] {
        &self.diffusion
    }

    pub fn reaction(&self) -> &dyn Reaction {
        self.reaction.as_ref()
    }

    /// The λ–ω structure, when the system was built as one.
    pub fn as_lambda_omega(&self) -> Option<&LambdaOmega> {
        match &self.kind {
            Kind::LambdaOmega(lo) => Some(lo),
            Kind::Other => None,
        }
    }

    /// Checks that `D` is exactly symmetric and positive definite.
    pub fn check_diffusion(&self) -> Result<()> {
        let n = self.n();
        if self.diffusion.len() != n * n {
            return Err(Error::Contract(format!(
                "diffusion matrix has {} entries, expected {}",
                self.diffusion.len(),
                n * n
            )));
        }
        for i in 0..n {
            for j in 0..i {
                if self.diffusion[i * n + j] != self.diffusion[j * n + i] {
                    return Err(Error::Contract("diffusion matrix is not symmetric".into()));
                }
            }
        }
        let (vals, _) = self.diffusion_eigen();
        if vals.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
            return Err(Error::Contract(
                "diffusion matrix is not positive definite".into(),
            ));
        }
        Ok(())
    }

    /// Eigen-decomposition `D = Q Λ Qᵀ`; returns `(Λ, Q)` with `Q` row-major and
    /// eigenvectors as columns.
    pub fn diffusion_eigen(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n();
        let m = DMatrix::from_row_slice(n, n, &self.diffusion);
        let eig = SymmetricEigen::new(m);
        let mut q = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                q[i * n + j] = eig.eigenvectors[(i, j)];
            }
        }
        (eig.eigenvalues.iter().copied().collect(), q)
    }

    pub fn min_diffusion_eigenvalue(&self) -> f64 {
        self.diffusion_eigen()
            .0
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    fn check_dim(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.n() {
            return Err(Error::Contract(format!(
                "state has {} components, system has {}",
                u.len(),
                self.n()
            )));
        }
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::Contract("state is not finite".into()));
        }
        Ok(())
    }

    pub fn evaluate_reaction(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(u)?;
        let mut out = vec![0.0; self.n()];
        self.reaction.eval(u, &mut out);
        Ok(out)
    }

    pub fn evaluate_jacobian(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(u)?;
        let n = self.n();
        let mut out = vec![0.0; n * n];
        self.reaction.jacobian(u, &mut out);
        Ok(out)
    }

    /// Unchecked `f(u)` for hot loops.
    #[inline]
    pub fn reaction_into(&self, u: &[f64], out: &mut [f64]) {
        self.reaction.eval(u, out);
    }

    /// Unchecked `f'(u)` for hot loops.
    #[inline]
    pub fn jacobian_into(&self, u: &[f64], out: &mut [f64]) {
        self.reaction.jacobian(u, out);
    }

    /// `D v` for a single state vector.
    pub fn apply_diffusion(&self, v: &[f64], out: &mut [f64]) {
        let n = self.n();
        for i in 0..n {
            out[i] = (0..n).map(|j| self.diffusion[i * n + j] * v[j]).sum();
        }
    }
}

fn identity(n: usize) -> Vec<f64> {
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        d[i * n + i] = 1.0;
    }
    d
}

/// λ–ω system with `D = I₂`; coefficient lists are polynomials in `r²`.
pub fn builtin_lambda_omega(lambda_coeffs: &[f64], omega_coeffs: &[f64]) -> ReactionDiffusionSystem {
    let lo = LambdaOmega {
        lambda_coeffs: lambda_coeffs.to_vec(),
        omega_coeffs: omega_coeffs.to_vec(),
    };
    let mut params = BTreeMap::new();
    for (j, c) in lambda_coeffs.iter().enumerate() {
        params.insert(format!("lambda_{j}"), *c);
    }
    for (j, c) in omega_coeffs.iter().enumerate() {
        params.insert(format!("omega_{j}"), *c);
    }
    ReactionDiffusionSystem {
        name: "lambda_omega".into(),
        params,
        diffusion: identity(2),
        reaction: Arc::new(lo.clone()),
        kind: Kind::LambdaOmega(lo),
    }
}

/// Real Ginzburg–Landau: `λ(r) = 1 − r²`, `ω̃ ≡ 0`.
pub fn real_ginzburg_landau() -> ReactionDiffusionSystem {
    let mut sys = builtin_lambda_omega(&[1.0, -1.0], &[0.0]);
    sys.name = "real_gl".into();
    sys
}

/// The general λ–ω catalogue entry: `λ(r) = 1 − r²`, `ω̃(r) = −b r²` with `b = 0.5`.
pub fn lambda_omega_default() -> ReactionDiffusionSystem {
    builtin_lambda_omega(&[1.0, -1.0], &[0.0, -0.5])
}

/// Pure diffusion `u_t = Δu` in `n` components (`f ≡ 0`, `D = I`).
pub fn heat(n: usize) -> ReactionDiffusionSystem {
    ReactionDiffusionSystem {
        name: "heat".into(),
        params: BTreeMap::new(),
        diffusion: identity(n),
        reaction: Arc::new(LinearReaction {
            n,
            matrix: vec![0.0; n * n],
        }),
        kind: Kind::Other,
    }
}

fn coeff_list(params: &BTreeMap<String, f64>, prefix: &str) -> Vec<f64> {
    let mut out = Vec::new();
    while let Some(v) = params.get(&format!("{prefix}_{}", out.len())) {
        out.push(*v);
    }
    out
}

/// Builds a model from its configuration name and scalar parameters.
///
/// Recognised names: `real_gl`, `lambda_omega` (parameters `lambda_j`,
/// `omega_j`), `heat` (parameter `n`).
pub fn from_config(name: &str, params: &BTreeMap<String, f64>) -> Result<ReactionDiffusionSystem> {
    match name {
        "real_gl" => Ok(real_ginzburg_landau()),
        "lambda_omega" => {
            let l = coeff_list(params, "lambda");
            let w = coeff_list(params, "omega");
            if l.is_empty() {
                return Ok(lambda_omega_default());
            }
            let w = if w.is_empty() { vec![0.0] } else { w };
            Ok(builtin_lambda_omega(&l, &w))
        }
        "heat" => {
            let n = params.get("n").copied().unwrap_or(2.0);
            if n < 1.0 || n.fract() != 0.0 {
                return Err(Error::ConfigInvalid(format!("heat model needs integer n >= 1, got {n}")));
            }
            Ok(heat(n as usize))
        }
        other => Err(Error::ConfigInvalid(format!("unknown model `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fd_jacobian(sys: &ReactionDiffusionSystem, u: &[f64]) -> Vec<f64> {
        let n = u.len();
        let mut out = vec![0.0; n * n];
        for j in 0..n {
            let h = 1e-6 * (1.0 + u[j].abs());
            let mut up = u.to_vec();
            let mut um = u.to_vec();
            up[j] += h;
            um[j] -= h;
            let fp = sys.evaluate_reaction(&up).unwrap();
            let fm = sys.evaluate_reaction(&um).unwrap();
            for i in 0..n {
                out[i * n + j] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        out
    }

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn real_gl_reaction_values() {
        let gl = real_ginzburg_landau();
        assert_eq!(gl.evaluate_reaction(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(gl.evaluate_reaction(&[1.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        let f = gl.evaluate_reaction(&[0.5, 0.0]).unwrap();
        assert!((f[0] - 0.375).abs() < 1e-15 && f[1] == 0.0);
        let f = gl.evaluate_reaction(&[0.3, 0.4]).unwrap();
        assert!((f[0] - 0.225).abs() < 1e-15 && (f[1] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn rotation_term() {
        let sys = builtin_lambda_omega(&[1.0, -1.0], &[1.0]);
        let f = sys.evaluate_reaction(&[1.0, 0.0]).unwrap();
        assert!(f[0].abs() < 1e-15 && (f[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn real_gl_jacobian_values() {
        let gl = real_ginzburg_landau();
        assert_eq!(gl.evaluate_jacobian(&[0.0, 0.0]).unwrap(), vec![1.0, 0.0, 0.0, 1.0]);
        assert_eq!(gl.evaluate_jacobian(&[1.0, 0.0]).unwrap(), vec![-2.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let gl = real_ginzburg_landau();
        assert!(matches!(gl.evaluate_reaction(&[1.0]), Err(Error::Contract(_))));
        assert!(matches!(gl.evaluate_jacobian(&[1.0, 2.0, 3.0]), Err(Error::Contract(_))));
        assert!(gl.evaluate_reaction(&[f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn builtin_jacobians_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let systems = [
            real_ginzburg_landau(),
            lambda_omega_default(),
            builtin_lambda_omega(&[0.5, 0.3, -1.0], &[0.2, 1.0, -0.7]),
        ];
        for sys in &systems {
            for _ in 0..100 {
                let r: f64 = rng.gen_range(0.0..2.0);
                let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                let u = [r * phi.cos(), r * phi.sin()];
                let j = sys.evaluate_jacobian(&u).unwrap();
                let fd = fd_jacobian(sys, &u);
                let diff: Vec<f64> = j.iter().zip(&fd).map(|(a, b)| a - b).collect();
                assert!(norm(&diff) / (1.0 + norm(&j)) < 1e-6, "{}: {diff:?}", sys.name);
            }
        }
    }

    #[test]
    fn lambda_omega_rotation_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sys = lambda_omega_default();
        for _ in 0..100 {
            let u = [rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)];
            let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let (c, s) = (phi.cos(), phi.sin());
            let rot = |v: &[f64]| [c * v[0] - s * v[1], s * v[0] + c * v[1]];
            let lhs = sys.evaluate_reaction(&rot(&u)).unwrap();
            let rhs = rot(&sys.evaluate_reaction(&u).unwrap());
            assert!((lhs[0] - rhs[0]).abs() < 1e-12 && (lhs[1] - rhs[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn diffusion_checks() {
        for sys in [real_ginzburg_landau(), heat(3)] {
            sys.check_diffusion().unwrap();
            assert!(sys.min_diffusion_eigenvalue() > 0.0);
        }
        let bad = ReactionDiffusionSystem::new(
            "bad",
            BTreeMap::new(),
            vec![1.0, 0.5, 0.4, 1.0],
            Arc::new(LinearReaction { n: 2, matrix: vec![0.0; 4] }),
        );
        assert!(bad.is_err());
        let indefinite = ReactionDiffusionSystem::new(
            "indef",
            BTreeMap::new(),
            vec![1.0, 2.0, 2.0, 1.0],
            Arc::new(LinearReaction { n: 2, matrix: vec![0.0; 4] }),
        );
        assert!(indefinite.is_err());
    }

    #[test]
    fn amplitude_root() {
        let gl = real_ginzburg_landau();
        let lo = gl.as_lambda_omega().unwrap();
        let r0 = lo.solve_amplitude(0.2, 4.0).unwrap();
        assert!((r0 - 0.8f64.sqrt()).abs() < 1e-12);
        assert!(lo.solve_amplitude(1.5, 4.0).is_none());
    }

    #[test]
    fn config_models() {
        let mut p = BTreeMap::new();
        assert_eq!(from_config("real_gl", &p).unwrap().name, "real_gl");
        p.insert("lambda_0".into(), 1.0);
        p.insert("lambda_1".into(), -1.0);
        p.insert("omega_1".into(), 0.3);
        p.insert("omega_0".into(), 0.0);
        let sys = from_config("lambda_omega", &p).unwrap();
        assert_eq!(sys.as_lambda_omega().unwrap().omega_coeffs, vec![0.0, 0.3]);
        assert!(from_config("brusselator", &p).is_err());
    }
}
