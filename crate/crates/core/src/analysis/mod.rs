//! Decay-exponent fits, the template function `η(t)`, configuration,
//! persistence and experiment orchestration.

pub mod config;
pub mod experiment;
pub mod io;

use serde::{Deserialize, Serialize};

use crate::field::Grid2D;
use crate::sim2d::{WeightKind, WeightedNormSeries};
use crate::{Error, Result};

/// Ordinary least squares `y ≈ a x + b`; returns `(a, b, r²)`.
pub fn least_squares(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let a = sxy / sxx;
    let b = my - a * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    (a, b, r2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub exponent: f64,
    /// `log A` in `value ≈ A t^p`.
    pub intercept: f64,
    pub window: (f64, f64),
    pub r_squared: f64,
    pub n_points: usize,
}

pub const MIN_FIT_POINTS: usize = 5;

/// Log–log least squares of `values` on `times` within `[lo, hi]`.
pub fn fit_decay(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<DecayFit> {
    let (lo, hi) = window;
    let eps = 1e-9 * hi.abs().max(1.0);
    let sel: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(&t, _)| t >= lo - eps && t <= hi + eps)
        .map(|(&t, &v)| (t, v))
        .collect();
    if sel.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData(format!(
            "{} points in [{lo}, {hi}], need {MIN_FIT_POINTS}",
            sel.len()
        )));
    }
    if sel.iter().any(|&(t, v)| !(v > 0.0) || !(t > 0.0)) {
        return Err(Error::NonPositiveValues);
    }
    let pts: Vec<(f64, f64)> = sel.iter().map(|&(t, v)| (t.ln(), v.ln())).collect();
    let (a, b, r2) = least_squares(&pts);
    Ok(DecayFit {
        exponent: a,
        intercept: b,
        window,
        r_squared: r2,
        n_points: pts.len(),
    })
}

pub fn fit_decay_exponent(series: &WeightedNormSeries, window: (f64, f64)) -> Result<DecayFit> {
    fit_decay(&series.times, &series.values, window)
}

/// Pointwise magnitudes at one time, each `None` when unavailable.
#[derive(Debug, Clone, Default)]
pub struct TemplateSnapshot {
    pub t: f64,
    pub vtilde: Option<Vec<f64>>,
    pub v: Option<Vec<f64>>,
    pub psi: Option<Vec<f64>>,
    /// `Σ_{1≤|b|≤2} |D^b ψ|` (space and time derivatives).
    pub dpsi: Option<Vec<f64>>,
    pub vtilde_z: Option<Vec<f64>>,
    pub v_z: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateVariant {
    Nonlocalized,
    Localized,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EtaSeries {
    pub times: Vec<f64>,
    /// Spatial sup at each time.
    pub instantaneous: Vec<f64>,
    /// Running sup over `0 ≤ s ≤ t`.
    pub eta: Vec<f64>,
    /// Third derivatives of `ψ` are not included.
    pub omits_third_derivatives: bool,
}

impl EtaSeries {
    pub fn value_at(&self, t: f64) -> Option<f64> {
        self.times.iter().position(|&s| (s - t).abs() < 1e-9).map(|i| self.eta[i])
    }
}

/// `η(t) = sup_{s≤t} sup_{ζ,y} e^{W/(M(1+s))} [ ... ]` with the bracket of
/// the variant's proof (nonlocalized: `(1+s)(‖v‖/log(2+s) + Σ|Dψ|) +
/// √(1+s)(‖ṽ‖ + |ψ|) + √s(‖ṽ_ζ‖ + ‖v_ζ‖)`; localized: `(1+s)^{3/2}(‖v‖ +
/// Σ|Dψ|) + (1+s)(‖ṽ‖ + |ψ|) + √(s(1+s))(‖ṽ_ζ‖ + ‖v_ζ‖)`).
pub fn measure_template_eta(
    grid: &Grid2D,
    snaps: &[TemplateSnapshot],
    variant: TemplateVariant,
    weight: WeightKind,
    alpha: f64,
    m: f64,
) -> Result<EtaSeries> {
    let mut times = Vec::with_capacity(snaps.len());
    let mut inst = Vec::with_capacity(snaps.len());
    for s in snaps {
        let need = |o: &Option<Vec<f64>>, name: &str| -> Result<Vec<f64>> {
            o.clone().ok_or_else(|| Error::MissingSeries(format!("{name} at t = {}", s.t)))
        };
        let vt = need(&s.vtilde, "vtilde")?;
        let v = need(&s.v, "v")?;
        let psi = need(&s.psi, "psi")?;
        let dpsi = need(&s.dpsi, "dpsi")?;
        let vtz = need(&s.vtilde_z, "vtilde_zeta")?;
        let vz = need(&s.v_z, "v_zeta")?;
        let t = s.t;
        let (a, b, c, log_div) = match variant {
            TemplateVariant::Nonlocalized => (1.0 + t, (1.0 + t).sqrt(), t.sqrt(), (2.0 + t).ln()),
            TemplateVariant::Localized => ((1.0 + t).powf(1.5), 1.0 + t, (t * (1.0 + t)).sqrt(), 1.0),
        };
        let bracket: Vec<f64> = (0..grid.len())
            .map(|p| a * (v[p] / log_div + dpsi[p]) + b * (vt[p] + psi[p]) + c * (vtz[p] + vz[p]))
            .collect();
        times.push(t);
        inst.push(crate::sim2d::weighted_sup(grid, &bracket, weight, alpha, t, m).value);
    }
    let mut eta = Vec::with_capacity(inst.len());
    let mut run: f64 = 0.0;
    for &x in &inst {
        run = run.max(x);
        eta.push(run);
    }
    Ok(EtaSeries {
        times,
        instantaneous: inst,
        eta,
        omits_third_derivatives: true,
    })
}
