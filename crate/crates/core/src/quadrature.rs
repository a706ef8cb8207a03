//! Adaptive Gauss–Kronrod (7/15) quadrature, real and complex, on finite,
//! half-infinite and infinite intervals.

use num_complex::Complex64;

use crate::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct Quad<T> {
    pub value: T,
    pub error: f64,
    pub evals: usize,
}

fn gk15(f: &mut impl FnMut(f64) -> Complex64, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += s * WGK[j];
        if j % 2 == 1 {
            gauss += s * WG[j / 2];
        }
    }
    let kron = kron * h;
    let gauss = gauss * h;
    (kron, (kron - gauss).norm())
}

/// Adaptive bisection until the summed error estimate is below
/// `max(abs_tol, rel_tol·|I|)`.
pub fn integrate_complex(
    mut f: impl FnMut(f64) -> Complex64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Quad<Complex64>> {
    match (a.is_finite(), b.is_finite()) {
        (true, true) => adaptive(&mut f, a, b, abs_tol, rel_tol),
        (true, false) if b > 0.0 => adaptive(
            &mut |t: f64| {
                let s = 1.0 - t;
                f(a + t / s) / (s * s)
            },
            0.0,
            1.0,
            abs_tol,
            rel_tol,
        ),
        (false, true) if a < 0.0 => adaptive(
            &mut |t: f64| {
                let s = 1.0 - t;
                f(b - t / s) / (s * s)
            },
            0.0,
            1.0,
            abs_tol,
            rel_tol,
        ),
        (false, false) if a < 0.0 && b > 0.0 => adaptive(
            &mut |t: f64| {
                let s = 1.0 - t * t;
                f(t / s) * ((1.0 + t * t) / (s * s))
            },
            -1.0,
            1.0,
            abs_tol,
            rel_tol,
        ),
        _ => Err(Error::Domain(format!("bad integration interval [{a}, {b}]"))),
    }
}

pub fn integrate(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Quad<f64>> {
    let q = integrate_complex(|x| Complex64::new(f(x), 0.0), a, b, abs_tol, rel_tol)?;
    Ok(Quad {
        value: q.value.re,
        error: q.error,
        evals: q.evals,
    })
}

fn adaptive(
    f: &mut impl FnMut(f64) -> Complex64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Quad<Complex64>> {
    const MAX_INTERVALS: usize = 20_000;
    // guard against endpoint singularities of transformed integrands
    let mut g = |x: f64| {
        let v = f(x);
        if v.re.is_finite() && v.im.is_finite() {
            v
        } else {
            Complex64::new(0.0, 0.0)
        }
    };
    let (v0, e0) = gk15(&mut g, a, b);
    let mut intervals = vec![(a, b, v0, e0)];
    let mut evals = 15;
    loop {
        let total: Complex64 = intervals.iter().map(|s| s.2).sum();
        let err: f64 = intervals.iter().map(|s| s.3).sum();
        if err <= abs_tol.max(rel_tol * total.norm()) {
            return Ok(Quad {
                value: total,
                error: err,
                evals,
            });
        }
        if intervals.len() >= MAX_INTERVALS {
            return Err(Error::NoConvergence {
                iterations: intervals.len(),
                residual: err,
            });
        }
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = intervals.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            let total: Complex64 = intervals.iter().map(|s| s.2).sum();
            return Err(Error::NoConvergence {
                iterations: intervals.len(),
                residual: (total.norm() * rel_tol).max(err),
            });
        }
        let (vl, el) = gk15(&mut g, lo, mid);
        let (vr, er) = gk15(&mut g, mid, hi);
        evals += 30;
        intervals.push((lo, mid, vl, el));
        intervals.push((mid, hi, vr, er));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomials_are_exact() {
        let q = integrate(|x| x.powi(10) - 3.0 * x * x, -1.0, 2.0, 1e-13, 1e-13).unwrap();
        let exact = (2f64.powi(11) + 1.0) / 11.0 - 9.0;
        assert!((q.value - exact).abs() < 1e-11);
    }

    #[test]
    fn gaussian_on_line_and_half_line() {
        let q = integrate(|x| (-x * x).exp(), f64::NEG_INFINITY, f64::INFINITY, 1e-12, 1e-12).unwrap();
        assert!((q.value - PI.sqrt()).abs() < 1e-10);
        let q = integrate(|x| (-x).exp(), 0.0, f64::INFINITY, 1e-12, 1e-12).unwrap();
        assert!((q.value - 1.0).abs() < 1e-10);
        let q = integrate(|x| x.exp(), f64::NEG_INFINITY, 0.0, 1e-12, 1e-12).unwrap();
        assert!((q.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn oscillatory_complex() {
        let q = integrate_complex(|x| Complex64::from_polar(1.0, 3.0 * x), 0.0, PI, 1e-12, 1e-12).unwrap();
        let exact = (Complex64::from_polar(1.0, 3.0 * PI) - 1.0) / Complex64::new(0.0, 3.0);
        assert!((q.value - exact).norm() < 1e-11);
    }

    #[test]
    fn integrable_endpoint_singularity() {
        let q = integrate(|x| 1.0 / x.sqrt(), 0.0, 1.0, 1e-9, 1e-9).unwrap();
        assert!((q.value - 2.0).abs() < 1e-7);
    }

    #[test]
    fn bad_interval() {
        assert!(integrate(|x| x, f64::INFINITY, 0.0, 1e-9, 1e-9).is_err());
    }
}
