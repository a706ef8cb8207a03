//! Nonlinear co-moving simulations from perturbed wave-train data, the
//! perturbation families, and moving-Gaussian weighted sup-norms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::field::{Fft2, Field2D, Grid2D};
use crate::model::ReactionDiffusionSystem;
use crate::stepper::{SemilinearSolver, StepperOpts};
use crate::wavetrain::{GridProfile, WaveTrain};
use crate::{Error, Result};

/// Unit direction in state space at phase `zeta`: the average of the unit
/// tangent `u∞′/|u∞′|` and the unit normal built from `u∞ − ⟨u∞⟩`, so that a
/// perturbation along it excites both the phase and the amplitude mode.
pub fn default_direction(wt: &WaveTrain, zeta: f64) -> Vec<f64> {
    let n = wt.n();
    let mut e1 = vec![0.0; n];
    e1[0] = 1.0;
    if n == 1 {
        return e1;
    }
    let mut tan = vec![0.0; n];
    wt.eval(zeta, 1, &mut tan);
    let tn = norm(&tan);
    if tn < 1e-12 {
        return e1;
    }
    tan.iter_mut().for_each(|x| *x /= tn);
    let mut u = vec![0.0; n];
    wt.eval(zeta, 0, &mut u);
    for (c, x) in u.iter_mut().enumerate() {
        *x -= wt.profile.coeff(c, 0).re;
    }
    let mut nor = orthogonalize(&u, &tan);
    if norm(&nor) < 1e-12 {
        // any vector orthogonal to the tangent
        let c = (0..n).min_by(|&a, &b| tan[a].abs().total_cmp(&tan[b].abs())).unwrap_or(0);
        let mut ec = vec![0.0; n];
        ec[c] = 1.0;
        nor = orthogonalize(&ec, &tan);
    }
    let nn = norm(&nor);
    nor.iter_mut().for_each(|x| *x /= nn);
    tan.iter().zip(&nor).map(|(a, b)| (a + b) / std::f64::consts::SQRT_2).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn orthogonalize(v: &[f64], unit: &[f64]) -> Vec<f64> {
    let p: f64 = v.iter().zip(unit).map(|(a, b)| a * b).sum();
    v.iter().zip(unit).map(|(a, b)| a - p * b).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    LineLocalized,
    FullyLocalized,
    CustomField,
}

impl PerturbationKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "line_localized" | "line" => Some(Self::LineLocalized),
            "fully_localized" | "localized" => Some(Self::FullyLocalized),
            "custom_field" | "custom" => Some(Self::CustomField),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    pub beta_gamma: (f64, f64),
    pub e0: f64,
    /// Width constant in `ζ` (and in `y` unless `m0_y` is set).
    pub m0: f64,
    pub m0_y: Option<f64>,
    pub seed: u64,
    /// Smooth random modulation along the line, bounded by 1.
    pub modulate: bool,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        Self {
            kind: PerturbationKind::FullyLocalized,
            beta_gamma: (0.0, 1.0),
            e0: 1e-2,
            m0: 1.0,
            m0_y: None,
            seed: 0,
            modulate: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Perturbation {
    pub field: Field2D,
    /// Weight constant `M` used for the check below.
    pub weight_m: f64,
    /// `sup e^{W/M}(‖v0‖ + ‖∂_ζ v0‖)` on the grid.
    pub weighted_bound: f64,
}

/// Sup over the grid of `exp(log_w(ζ, y)) · val`, computed in log space so that
/// huge weights times underflowed values do not produce NaN.
fn log_weighted_sup(grid: &Grid2D, vals: &[f64], log_w: impl Fn(f64, f64) -> f64) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for i in 0..grid.nx {
        let z = grid.zeta(i);
        for j in 0..grid.ny {
            let v = vals[i * grid.ny + j];
            if v > 0.0 {
                best = best.max(log_w(z, grid.y(j)) + v.ln());
            }
        }
    }
    if best == f64::NEG_INFINITY {
        0.0
    } else {
        best.exp()
    }
}

/// Builds `v0` for the requested family and reports its weighted bound.
///
/// For generated families the check uses `M = 2·M0` (with the widest width if
/// `ζ` and `y` widths differ): at `M = M0` the `∂_ζ v0` term is unbounded.
/// A custom field is checked against `E0` with `M = M0` and rejected if the
/// bound fails.
pub fn make_perturbation(
    spec: &PerturbationSpec,
    grid: Grid2D,
    wt: &WaveTrain,
    custom: Option<&Field2D>,
) -> Result<Perturbation> {
    let (beta, gamma) = spec.beta_gamma;
    if spec.kind == PerturbationKind::LineLocalized && ((beta * beta + gamma * gamma) - 1.0).abs() > 1e-12 {
        return Err(Error::NotUnitVector(beta, gamma));
    }
    if !(spec.m0 > 0.0) || spec.m0_y.is_some_and(|m| !(m > 0.0)) {
        return Err(Error::Contract("width constants must be positive".into()));
    }
    let n = wt.n();
    let m0 = spec.m0;
    let m0_y = spec.m0_y.unwrap_or(m0);
    let field = match spec.kind {
        PerturbationKind::CustomField => {
            let f = custom.ok_or_else(|| Error::Contract("custom_field requires a field".into()))?;
            if f.grid != grid {
                return Err(Error::IncompatibleGrid("custom field grid differs".into()));
            }
            f.clone()
        }
        PerturbationKind::LineLocalized => {
            let envelope = line_envelope(spec, grid);
            let dirs: Vec<Vec<f64>> = (0..grid.nx).map(|i| default_direction(wt, grid.zeta(i))).collect();
            let mut f = Field2D::zeros(grid, n);
            for i in 0..grid.nx {
                let z = grid.zeta(i);
                for j in 0..grid.ny {
                    let y = grid.y(j);
                    // coordinate along the line
                    let s = -gamma * z + beta * y;
                    let a = spec.e0 * (-(beta * z + gamma * y).powi(2) / m0).exp() * envelope(s);
                    f.at_mut(i, j).iter_mut().zip(&dirs[i]).for_each(|(o, d)| *o = a * d);
                }
            }
            f
        }
        PerturbationKind::FullyLocalized => {
            let dirs: Vec<Vec<f64>> = (0..grid.nx).map(|i| default_direction(wt, grid.zeta(i))).collect();
            let mut f = Field2D::zeros(grid, n);
            for i in 0..grid.nx {
                let z = grid.zeta(i);
                for j in 0..grid.ny {
                    let y = grid.y(j);
                    let a = spec.e0 * (-z * z / m0 - y * y / m0_y).exp();
                    f.at_mut(i, j).iter_mut().zip(&dirs[i]).for_each(|(o, d)| *o = a * d);
                }
            }
            f
        }
    };
    let fft = Fft2::new(grid);
    let dz = fft.derivative(&field, 1, 0);
    let sum: Vec<f64> = field.norms().iter().zip(dz.norms()).map(|(a, b)| a + b).collect();
    let weight_m = match spec.kind {
        PerturbationKind::CustomField => m0,
        _ => 2.0 * m0.max(m0_y),
    };
    let line_weight = match spec.kind {
        PerturbationKind::LineLocalized => true,
        PerturbationKind::CustomField => custom_is_line(spec),
        PerturbationKind::FullyLocalized => false,
    };
    let weighted_bound = if line_weight {
        log_weighted_sup(&grid, &sum, |z, y| (beta * z + gamma * y).powi(2) / weight_m)
    } else {
        log_weighted_sup(&grid, &sum, |z, y| (z * z + y * y) / weight_m)
    };
    if spec.kind == PerturbationKind::CustomField && weighted_bound > spec.e0 * (1.0 + 1e-12) {
        return Err(Error::WeightViolation(format!(
            "weighted norm {weighted_bound:.3e} exceeds E0 = {:.3e} at M = {weight_m}",
            spec.e0
        )));
    }
    Ok(Perturbation {
        field,
        weight_m,
        weighted_bound,
    })
}

/// Custom fields are checked against the line weight when a unit `(β, γ)` is
/// given and against the radial weight otherwise.
fn custom_is_line(spec: &PerturbationSpec) -> bool {
    let (b, g) = spec.beta_gamma;
    ((b * b + g * g) - 1.0).abs() <= 1e-12
}

fn line_envelope(spec: &PerturbationSpec, grid: Grid2D) -> impl Fn(f64) -> f64 {
    let (beta, gamma) = spec.beta_gamma;
    // period of the line coordinate on the torus
    let len = if beta.abs() < 1e-12 {
        grid.lx
    } else if gamma.abs() < 1e-12 {
        grid.ly
    } else {
        grid.lx.max(grid.ly)
    };
    let mut modes = Vec::new();
    if spec.modulate {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        for m in 1..=4 {
            let amp: f64 = rng.gen_range(-1.0..1.0) / (2.0 * m as f64 * m as f64);
            let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            modes.push((m as f64, amp, phase));
        }
    }
    // 1 + Σ a_m cos(·) with Σ|a_m| ≤ 1, rescaled into [0, 1]
    let total: f64 = modes.iter().map(|(_, a, _)| a.abs()).sum::<f64>();
    move |s: f64| {
        if modes.is_empty() {
            return 1.0;
        }
        let v: f64 = modes
            .iter()
            .map(|(m, a, p)| a * (std::f64::consts::TAU * m * s / len + p).cos())
            .sum();
        (1.0 + v) / (1.0 + total)
    }
}

#[derive(Debug, Clone)]
pub struct SimSnapshot {
    pub t: f64,
    /// `ṽ = ũ − u∞`.
    pub vtilde: Field2D,
}

impl SimSnapshot {
    pub fn utilde(&self, prof: &GridProfile) -> Field2D {
        let mut u = prof.field(self.vtilde.grid, 0).add(&self.vtilde);
        u.t = self.t;
        u
    }

    /// `(∂_ζ ṽ, ∂_y ṽ)`, spectrally.
    pub fn derivatives(&self, fft: &Fft2) -> (Field2D, Field2D) {
        (fft.derivative(&self.vtilde, 1, 0), fft.derivative(&self.vtilde, 0, 1))
    }
}

/// Evolves `ũ = u∞ + ṽ` under the full co-moving system, integrating for `ṽ`
/// with explicit part `f(u∞ + ṽ) − f(u∞) + R`, where `R` is the residual of
/// `u∞` on the grid (so `ṽ = 0` stays fixed up to dealiasing).
pub fn nonlinear_evolve(
    system: &ReactionDiffusionSystem,
    wt: &WaveTrain,
    v0: &Field2D,
    times: &[f64],
    opts: &StepperOpts,
) -> Result<Vec<SimSnapshot>> {
    crate::greens::check_grid(wt, &v0.grid)?;
    let grid = v0.grid;
    let n = system.n();
    let prof = GridProfile::new(wt, &grid);
    let solver = SemilinearSolver::new(system, wt.k, wt.omega, grid);

    // per-ζ data: u∞, f(u∞) + (A u∞)
    let base = prof.field(grid, 0);
    let au = solver.apply_linear(&base);
    let mut fu = vec![0.0; grid.nx * n];
    let mut resid = vec![0.0; grid.nx * n];
    for i in 0..grid.nx {
        system.reaction_into(prof.u(i), &mut fu[i * n..(i + 1) * n]);
        for c in 0..n {
            resid[i * n + c] = fu[i * n + c] + au.at(i, 0)[c];
        }
    }
    let ny = grid.ny;
    let mut ubuf = vec![0.0; n];
    let mut fbuf = vec![0.0; n];
    let mut term = |v: &[Vec<f64>], _t: f64, out: &mut [Vec<f64>]| {
        for i in 0..grid.nx {
            let u0 = prof.u(i);
            for j in 0..ny {
                let idx = i * ny + j;
                for c in 0..n {
                    ubuf[c] = u0[c] + v[c][idx];
                }
                system.reaction_into(&ubuf, &mut fbuf);
                for c in 0..n {
                    out[c][idx] = fbuf[c] - fu[i * n + c] + resid[i * n + c];
                }
            }
        }
    };
    let snaps = solver.evolve(v0, times, opts, &mut term)?;
    Ok(snaps
        .into_iter()
        .map(|f| SimSnapshot { t: f.t, vtilde: f })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    /// `W = |βζ + γy + αβt|²`.
    Line { beta: f64, gamma: f64 },
    /// `W = |ζ + αt|² + y²`.
    Localized,
}

impl WeightKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Line { .. } => "line",
            Self::Localized => "localized",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedValue {
    pub value: f64,
    /// The maximizer lies on the outer 10 % ring (in a direction the weight
    /// depends on).
    pub boundary: bool,
}

/// Values below this fraction of the field sup are treated as zero, so the
/// growing weight does not amplify round-off.
pub const WEIGHT_NOISE_FLOOR: f64 = 1e-10;

/// `sup e^{W(ζ,y,t)/(M(1+t))}·vals(ζ,y)` for pointwise magnitudes `vals`.
pub fn weighted_sup(grid: &Grid2D, vals: &[f64], weight: WeightKind, alpha: f64, t: f64, m: f64) -> WeightedValue {
    let sup = vals.iter().copied().fold(0.0, f64::max);
    if sup == 0.0 {
        return WeightedValue {
            value: 0.0,
            boundary: false,
        };
    }
    let floor = WEIGHT_NOISE_FLOOR * sup;
    let denom = m * (1.0 + t);
    let (uses_z, uses_y) = match weight {
        WeightKind::Line { beta, gamma } => (beta.abs() > 1e-12, gamma.abs() > 1e-12),
        WeightKind::Localized => (true, true),
    };
    let mut best = f64::NEG_INFINITY;
    let mut arg = (0, 0);
    for i in 0..grid.nx {
        let z = grid.zeta(i);
        for j in 0..grid.ny {
            let v = vals[i * grid.ny + j];
            if v <= floor {
                continue;
            }
            let y = grid.y(j);
            let w = match weight {
                WeightKind::Line { beta, gamma } => (beta * z + gamma * y + alpha * beta * t).powi(2),
                WeightKind::Localized => (z + alpha * t).powi(2) + y * y,
            };
            let lv = w / denom + v.ln();
            if lv > best {
                best = lv;
                arg = (i, j);
            }
        }
    }
    let ring = |x: f64, l: f64| x.abs() > 0.4 * l;
    let boundary = (uses_z && ring(grid.zeta(arg.0), grid.lx)) || (uses_y && ring(grid.y(arg.1), grid.ly));
    WeightedValue {
        value: best.exp(),
        boundary,
    }
}

pub fn weighted_sup_norm(field: &Field2D, weight: WeightKind, alpha: f64, t: f64, m: f64) -> WeightedValue {
    weighted_sup(&field.grid, &field.norms(), weight, alpha, t, m)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightedNormSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub boundary: Vec<bool>,
    pub weight_kind: WeightKind,
    pub m: f64,
    /// Which quantity: `vtilde`, `vtilde_zeta`, `v`, `psi`, `psi_zeta`, ...
    pub quantity: String,
}

impl WeightedNormSeries {
    pub fn new(quantity: &str, weight_kind: WeightKind, m: f64) -> Self {
        Self {
            times: Vec::new(),
            values: Vec::new(),
            boundary: Vec::new(),
            weight_kind,
            m,
            quantity: quantity.to_string(),
        }
    }

    pub fn push(&mut self, t: f64, v: WeightedValue) {
        self.times.push(t);
        self.values.push(v.value);
        self.boundary.push(v.boundary);
    }

    pub fn any_boundary_in(&self, lo: f64, hi: f64) -> bool {
        self.times
            .iter()
            .zip(&self.boundary)
            .any(|(&t, &b)| b && t >= lo && t <= hi)
    }

    pub fn value_at(&self, t: f64) -> Option<f64> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() < 1e-9)
            .map(|i| self.values[i])
    }
}

/// Candidate weight constants for the moving Gaussian.
pub const WEIGHT_M_CANDIDATES: [f64; 4] = [2.0, 4.0, 8.0, 16.0];

/// Smallest candidate `M` whose series stays off the boundary ring in
/// `[lo, hi]`; the largest candidate if none does.
pub fn select_weight_m(
    fields: &[(f64, Vec<f64>)],
    grid: &Grid2D,
    weight: WeightKind,
    alpha: f64,
    lo: f64,
    hi: f64,
) -> f64 {
    for &m in &WEIGHT_M_CANDIDATES {
        let clean = fields
            .iter()
            .filter(|(t, _)| *t >= lo && *t <= hi)
            .all(|(t, vals)| !weighted_sup(grid, vals, weight, alpha, *t, m).boundary);
        if clean {
            return m;
        }
    }
    WEIGHT_M_CANDIDATES[WEIGHT_M_CANDIDATES.len() - 1]
}

/// `t_j = t_min·r^j` up to and including the last value `≤ t_max`.
pub fn geometric_schedule(t_min: f64, t_max: f64, r: f64) -> Vec<f64> {
    assert!(t_min > 0.0 && r > 1.0);
    let mut out = Vec::new();
    let mut t = t_min;
    while t <= t_max * (1.0 + 1e-12) {
        out.push(t);
        t *= r;
    }
    out
}

pub const SCHEDULE_RATIO: f64 = 1.25;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::real_ginzburg_landau;
    use crate::wavetrain::closed_form_lambda_omega;

    fn gl() -> (ReactionDiffusionSystem, WaveTrain) {
        let sys = real_ginzburg_landau();
        let wt = closed_form_lambda_omega(&sys, 0.2f64.sqrt(), 16).unwrap();
        (sys, wt)
    }

    #[test]
    fn direction_is_unit_and_mixes_modes() {
        let (_, wt) = gl();
        for z in [0.0, 0.13, 0.5] {
            let d = default_direction(&wt, z);
            assert!((norm(&d) - 1.0).abs() < 1e-12);
            let mut up = vec![0.0; 2];
            wt.eval(z, 1, &mut up);
            let c = (d[0] * up[0] + d[1] * up[1]) / norm(&up);
            assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        }
    }

    #[test]
    fn line_perturbation_is_y_gaussian() {
        let (_, wt) = gl();
        let g = Grid2D::new(4.0, 16.0, 64, 64).unwrap();
        let spec = PerturbationSpec {
            kind: PerturbationKind::LineLocalized,
            beta_gamma: (0.0, 1.0),
            e0: 1e-2,
            m0: 1.0,
            ..Default::default()
        };
        let p = make_perturbation(&spec, g, &wt, None).unwrap();
        for i in [0, 17, 40] {
            for j in [0, 20, 32, 50] {
                let y = g.y(j);
                let nv = norm(p.field.at(i, j));
                assert!((nv - 1e-2 * (-y * y).exp()).abs() < 1e-15);
            }
        }
        let bad = PerturbationSpec {
            beta_gamma: (0.6, 0.7),
            ..spec.clone()
        };
        assert!(matches!(make_perturbation(&bad, g, &wt, None), Err(Error::NotUnitVector(..))));
        let zero = PerturbationSpec {
            kind: PerturbationKind::FullyLocalized,
            e0: 0.0,
            ..spec
        };
        assert_eq!(make_perturbation(&zero, g, &wt, None).unwrap().field.sup_norm(), 0.0);
    }

    #[test]
    fn custom_field_weight_check() {
        let (_, wt) = gl();
        let g = Grid2D::new(4.0, 16.0, 64, 64).unwrap();
        let wide = Field2D::from_fn(g, 2, |_, y, o| o[0] = 1e-3 * (-0.1 * y * y).exp());
        let spec = PerturbationSpec {
            kind: PerturbationKind::CustomField,
            beta_gamma: (0.0, 1.0),
            e0: 1e-2,
            m0: 1.0,
            ..Default::default()
        };
        assert!(matches!(
            make_perturbation(&spec, g, &wt, Some(&wide)),
            Err(Error::WeightViolation(_))
        ));
        let narrow = Field2D::from_fn(g, 2, |_, y, o| o[0] = 1e-3 * (-2.0 * y * y).exp());
        assert!(make_perturbation(&spec, g, &wt, Some(&narrow)).is_ok());
    }

    #[test]
    fn weighted_norm_cancels_weight() {
        let g = Grid2D::new(8.0, 16.0, 64, 64).unwrap();
        let (m, t, alpha) = (4.0, 3.0, 0.1);
        let f = Field2D::from_fn(g, 1, |z, y, o| o[0] = 0.7 * (-((z + alpha * t).powi(2) + y * y) / (m * (1.0 + t))).exp());
        let w = weighted_sup_norm(&f, WeightKind::Localized, alpha, t, m);
        assert!((w.value - 0.7).abs() < 1e-12);
        let zero = Field2D::zeros(g, 1);
        assert_eq!(weighted_sup_norm(&zero, WeightKind::Localized, alpha, t, m).value, 0.0);
        // much wider than the weight: maximized at the edge
        let wide = Field2D::from_fn(g, 1, |z, y, o| o[0] = (-(z * z + y * y) / 400.0).exp());
        assert!(weighted_sup_norm(&wide, WeightKind::Localized, 0.0, 0.0, 2.0).boundary);
    }

    #[test]
    fn schedule_is_geometric() {
        let s = geometric_schedule(0.8192, 100.0, 1.25);
        assert!((s[4] - 2.0).abs() < 1e-12);
        assert!(*s.last().unwrap() <= 100.0);
        assert!(s.windows(2).all(|w| (w[1] / w[0] - 1.25).abs() < 1e-12));
    }

    #[test]
    fn wave_train_is_a_fixed_point() {
        let (sys, wt) = gl();
        let g = Grid2D::new(2.0, 16.0, 32, 16).unwrap();
        let v0 = Field2D::zeros(g, 2);
        let out = nonlinear_evolve(&sys, &wt, &v0, &[5.0], &StepperOpts::default()).unwrap();
        assert!(out[0].vtilde.sup_norm() < 1e-10, "{}", out[0].vtilde.sup_norm());
    }
}
