//! Period-1 trigonometric profiles and small FFT helpers.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rustfft::FftPlanner;

/// Signed wavenumber of FFT slot `idx` for length `n`.
#[inline]
pub fn signed_mode(idx: usize, n: usize) -> i64 {
    if idx <= n / 2 {
        idx as i64
    } else {
        idx as i64 - n as i64
    }
}

/// Unnormalized forward DFT in place.
pub fn fft(data: &mut [Complex64]) {
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(data.len()).process(data);
}

/// Inverse DFT in place, including the `1/n` factor.
pub fn ifft(data: &mut [Complex64]) {
    let n = data.len();
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(n).process(data);
    let s = 1.0 / n as f64;
    data.iter_mut().for_each(|z| *z *= s);
}

/// A real, `n`-component, period-1 function stored by its Fourier
/// coefficients on `n_modes` points (the Nyquist mode is always zero).
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicProfile {
    n: usize,
    n_modes: usize,
    /// `coeffs[c * n_modes + idx]`, FFT order, normalized by `1/n_modes`.
    coeffs: Vec<Complex64>,
}

impl PeriodicProfile {
    pub fn zeros(n: usize, n_modes: usize) -> Self {
        Self {
            n,
            n_modes,
            coeffs: vec![Complex64::new(0.0, 0.0); n * n_modes],
        }
    }

    /// Builds the profile from point-major samples `u[j * n + c]` at
    /// `ζ_j = j / n_modes`.
    pub fn from_samples(samples: &[f64], n: usize) -> Self {
        let n_modes = samples.len() / n;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); n * n_modes];
        for c in 0..n {
            let mut buf: Vec<Complex64> = (0..n_modes)
                .map(|j| Complex64::new(samples[j * n + c], 0.0))
                .collect();
            fft(&mut buf);
            for (idx, z) in buf.iter().enumerate() {
                coeffs[c * n_modes + idx] = *z / n_modes as f64;
            }
            if n_modes % 2 == 0 {
                coeffs[c * n_modes + n_modes / 2] = Complex64::new(0.0, 0.0);
            }
        }
        Self { n, n_modes, coeffs }
    }

    /// Builds a profile from a closure sampled on `n_modes` points.
    pub fn from_fn(n: usize, n_modes: usize, f: impl Fn(f64, &mut [f64])) -> Self {
        let mut samples = vec![0.0; n * n_modes];
        for j in 0..n_modes {
            f(j as f64 / n_modes as f64, &mut samples[j * n..(j + 1) * n]);
        }
        Self::from_samples(&samples, n)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    /// Coefficient of signed mode `m` in component `c` (zero outside the band).
    pub fn coeff(&self, c: usize, m: i64) -> Complex64 {
        let nm = self.n_modes as i64;
        if m.abs() >= (nm + 1) / 2 {
            return Complex64::new(0.0, 0.0);
        }
        let idx = if m >= 0 { m } else { m + nm } as usize;
        self.coeffs[c * self.n_modes + idx]
    }

    pub fn coeff_mut(&mut self, c: usize, m: i64) -> &mut Complex64 {
        let nm = self.n_modes as i64;
        let idx = if m >= 0 { m } else { m + nm } as usize;
        &mut self.coeffs[c * self.n_modes + idx]
    }

    /// Largest signed mode kept.
    pub fn max_mode(&self) -> i64 {
        (self.n_modes as i64 - 1) / 2
    }

    /// Evaluates the `deriv`-th derivative at `zeta` into `out` (length `n`).
    pub fn eval(&self, zeta: f64, deriv: u32, out: &mut [f64]) {
        let mm = self.max_mode();
        for (c, o) in out.iter_mut().enumerate().take(self.n) {
            let mut acc = self.coeff(c, 0).re * if deriv == 0 { 1.0 } else { 0.0 };
            for m in 1..=mm {
                let w = TAU * m as f64;
                let e = Complex64::from_polar(1.0, w * zeta);
                let factor = Complex64::new(0.0, w).powu(deriv);
                // conjugate pair m, -m
                acc += 2.0 * (self.coeff(c, m) * factor * e).re;
            }
            *o = acc;
        }
    }

    /// Samples of the `deriv`-th derivative on `points` equispaced points of
    /// `[0, 1)`, point-major. Uses zero padding, so `points` may exceed `n_modes`.
    pub fn sample(&self, points: usize, deriv: u32) -> Vec<f64> {
        let mut out = vec![0.0; points * self.n];
        let mm = self.max_mode().min((points as i64 - 1) / 2);
        for c in 0..self.n {
            let mut buf = vec![Complex64::new(0.0, 0.0); points];
            for m in -mm..=mm {
                let idx = if m >= 0 { m } else { m + points as i64 } as usize;
                let factor = Complex64::new(0.0, TAU * m as f64).powu(deriv);
                buf[idx] = self.coeff(c, m) * factor;
            }
            let mut planner = FftPlanner::new();
            planner.plan_fft_inverse(points).process(&mut buf);
            for j in 0..points {
                out[j * self.n + c] = buf[j].re;
            }
        }
        out
    }

    /// Derivative profile.
    pub fn derivative(&self) -> Self {
        let mut d = self.clone();
        for c in 0..self.n {
            for idx in 0..self.n_modes {
                let m = signed_mode(idx, self.n_modes);
                d.coeffs[c * self.n_modes + idx] *= Complex64::new(0.0, TAU * m as f64);
            }
            if self.n_modes % 2 == 0 {
                d.coeffs[c * self.n_modes + self.n_modes / 2] = Complex64::new(0.0, 0.0);
            }
        }
        d
    }

    /// `L²(0,1)` inner product `∫ a·b dζ`, exact for band-limited profiles.
    pub fn inner(&self, other: &Self) -> f64 {
        let mm = self.max_mode().max(other.max_mode());
        let mut acc = 0.0;
        for c in 0..self.n {
            for m in -mm..=mm {
                acc += (self.coeff(c, m).conj() * other.coeff(c, m)).re;
            }
        }
        acc
    }

    /// Sup-norm of the Euclidean norm, estimated on a 4x oversampled grid.
    pub fn sup_norm(&self, deriv: u32) -> f64 {
        let pts = 4 * self.n_modes;
        let s = self.sample(pts, deriv);
        s.chunks(self.n)
            .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Applies `f` to every coefficient with its component and signed mode.
    pub fn map_coeffs(&mut self, mut f: impl FnMut(usize, i64, Complex64) -> Complex64) {
        for c in 0..self.n {
            for idx in 0..self.n_modes {
                let m = signed_mode(idx, self.n_modes);
                let z = &mut self.coeffs[c * self.n_modes + idx];
                *z = f(c, m, *z);
            }
        }
    }

    /// Stable digest of the coefficient bits.
    pub fn bit_hash(&self, hasher: &mut impl std::hash::Hasher) {
        hasher.write_usize(self.n);
        hasher.write_usize(self.n_modes);
        for z in &self.coeffs {
            hasher.write_u64(z.re.to_bits());
            hasher.write_u64(z.im.to_bits());
        }
    }
}
