//! Fields on a periodic rectangle `(ζ, y) ∈ [−Lx/2, Lx/2) × [−Ly/2, Ly/2)` and
//! the 2D real FFTs used for spectral derivatives and time stepping.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::fourier::signed_mode;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    /// Domain length in ζ; an integer number of wave-train periods.
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid2D {
    pub fn new(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self> {
        if lx.fract() != 0.0 || lx < 1.0 {
            return Err(Error::IncompatibleGrid(format!("Lx = {lx} is not a whole number of periods")));
        }
        if !(ly > 0.0) || nx < 16 || ny < 16 || !nx.is_power_of_two() || !ny.is_power_of_two() {
            return Err(Error::IncompatibleGrid(format!(
                "need Ly > 0 and power-of-two sizes >= 16, got Ly = {ly}, {nx} x {ny}"
            )));
        }
        if nx % lx as usize != 0 {
            return Err(Error::IncompatibleGrid(format!("Nx = {nx} is not a multiple of Lx = {lx}")));
        }
        Ok(Self { lx, ly, nx, ny })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dzeta(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn zeta(&self, i: usize) -> f64 {
        -0.5 * self.lx + i as f64 * self.dzeta()
    }

    pub fn y(&self, j: usize) -> f64 {
        -0.5 * self.ly + j as f64 * self.dy()
    }

    /// Grid points per wave-train period.
    pub fn points_per_period(&self) -> usize {
        self.nx / self.lx as usize
    }

    pub fn kappa_zeta(&self, i: usize) -> f64 {
        TAU * signed_mode(i, self.nx) as f64 / self.lx
    }

    pub fn kappa_y(&self, j: usize) -> f64 {
        TAU * signed_mode(j, self.ny) as f64 / self.ly
    }

    pub fn cell_area(&self) -> f64 {
        self.dzeta() * self.dy()
    }
}

/// `n`-component field, ζ-major with components innermost:
/// `data[(i * ny + j) * n + c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field2D {
    pub grid: Grid2D,
    pub n: usize,
    pub t: f64,
    pub data: Vec<f64>,
}

impl Field2D {
    pub fn zeros(grid: Grid2D, n: usize) -> Self {
        Self {
            grid,
            n,
            t: 0.0,
            data: vec![0.0; grid.len() * n],
        }
    }

    pub fn from_fn(grid: Grid2D, n: usize, f: impl Fn(f64, f64, &mut [f64])) -> Self {
        let mut out = Self::zeros(grid, n);
        for i in 0..grid.nx {
            let z = grid.zeta(i);
            for j in 0..grid.ny {
                let y = grid.y(j);
                let o = (i * grid.ny + j) * n;
                f(z, y, &mut out.data[o..o + n]);
            }
        }
        out
    }

    pub fn at(&self, i: usize, j: usize) -> &[f64] {
        let o = (i * self.grid.ny + j) * self.n;
        &self.data[o..o + self.n]
    }

    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let o = (i * self.grid.ny + j) * self.n;
        &mut self.data[o..o + self.n]
    }

    /// Component planes `[c][i * ny + j]`.
    pub fn components(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|c| self.data.iter().skip(c).step_by(self.n).copied().collect())
            .collect()
    }

    pub fn from_components(grid: Grid2D, planes: &[Vec<f64>], t: f64) -> Self {
        let n = planes.len();
        let mut data = vec![0.0; grid.len() * n];
        for (c, p) in planes.iter().enumerate() {
            for (idx, v) in p.iter().enumerate() {
                data[idx * n + c] = *v;
            }
        }
        Self { grid, n, t, data }
    }

    /// Pointwise Euclidean norms.
    pub fn norms(&self) -> Vec<f64> {
        self.data
            .chunks(self.n)
            .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect()
    }

    pub fn sup_norm(&self) -> f64 {
        self.data
            .chunks(self.n)
            .map(|v| v.iter().map(|x| x * x).sum::<f64>())
            .fold(0.0, f64::max)
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= a);
        out
    }

    /// `self − other`, keeping `self.t`.
    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a -= b);
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += b);
        out
    }

    /// Translate by a whole number of periods: `out(ζ) = self(ζ − periods)`.
    pub fn roll_periods(&self, periods: i64) -> Self {
        let shift = periods * self.grid.points_per_period() as i64;
        let nx = self.grid.nx as i64;
        let row = self.grid.ny * self.n;
        let mut out = self.clone();
        for i in 0..self.grid.nx {
            let src = (i as i64 - shift).rem_euclid(nx) as usize;
            out.data[i * row..(i + 1) * row].copy_from_slice(&self.data[src * row..(src + 1) * row]);
        }
        out
    }

    /// `∫∫ field dζ dy` per component (rectangle rule, spectrally accurate).
    pub fn integral(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.n];
        for v in self.data.chunks(self.n) {
            for c in 0..self.n {
                acc[c] += v[c];
            }
        }
        acc.iter_mut().for_each(|a| *a *= self.grid.cell_area());
        acc
    }
}

/// 2D complex FFT on `nx × ny` arrays stored `i * ny + j`, plus packing of two
/// real planes into one complex transform.
#[derive(Clone)]
pub struct Fft2 {
    pub grid: Grid2D,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2").field("grid", &self.grid).finish()
    }
}

pub struct FftScratch {
    buf: Vec<Complex64>,
    tr: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Fft2 {
    pub fn new(grid: Grid2D) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid,
            row_fwd: planner.plan_fft_forward(grid.ny),
            row_inv: planner.plan_fft_inverse(grid.ny),
            col_fwd: planner.plan_fft_forward(grid.nx),
            col_inv: planner.plan_fft_inverse(grid.nx),
        }
    }

    pub fn scratch(&self) -> FftScratch {
        let len = self.grid.len();
        let s = [&self.row_fwd, &self.row_inv, &self.col_fwd, &self.col_inv]
            .iter()
            .map(|p| p.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        FftScratch {
            buf: vec![Complex64::new(0.0, 0.0); len],
            tr: vec![Complex64::new(0.0, 0.0); len],
            scratch: vec![Complex64::new(0.0, 0.0); s],
        }
    }

    fn transform(&self, data: &mut [Complex64], s: &mut FftScratch, forward: bool) {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let (row, col) = if forward {
            (&self.row_fwd, &self.col_fwd)
        } else {
            (&self.row_inv, &self.col_inv)
        };
        row.process_with_scratch(data, &mut s.scratch);
        transpose::transpose(data, &mut s.tr, ny, nx);
        col.process_with_scratch(&mut s.tr, &mut s.scratch);
        transpose::transpose(&s.tr, data, nx, ny);
    }

    /// Unnormalized forward transform in place.
    pub fn forward(&self, data: &mut [Complex64], s: &mut FftScratch) {
        self.transform(data, s, true);
    }

    /// Inverse transform in place, including `1/(nx·ny)`.
    pub fn inverse(&self, data: &mut [Complex64], s: &mut FftScratch) {
        self.transform(data, s, false);
        let scale = 1.0 / self.grid.len() as f64;
        data.iter_mut().for_each(|z| *z *= scale);
    }

    /// Spectra of one or two real planes using a single complex transform.
    pub fn forward_real(&self, a: &[f64], b: Option<&[f64]>, out_a: &mut [Complex64], out_b: Option<&mut [Complex64]>, s: &mut FftScratch) {
        let len = self.grid.len();
        let mut buf = std::mem::take(&mut s.buf);
        match b {
            Some(b) => {
                for idx in 0..len {
                    buf[idx] = Complex64::new(a[idx], b[idx]);
                }
            }
            None => {
                for idx in 0..len {
                    buf[idx] = Complex64::new(a[idx], 0.0);
                }
            }
        }
        self.forward(&mut buf, s);
        match out_b {
            Some(out_b) => {
                let (nx, ny) = (self.grid.nx, self.grid.ny);
                for i in 0..nx {
                    let mi = ((nx - i) % nx) * ny;
                    for j in 0..ny {
                        let idx = i * ny + j;
                        let z = buf[idx];
                        let zm = buf[mi + (ny - j) % ny].conj();
                        out_a[idx] = 0.5 * (z + zm);
                        out_b[idx] = Complex64::new(0.0, -0.5) * (z - zm);
                    }
                }
            }
            None => out_a.copy_from_slice(&buf),
        }
        s.buf = buf;
    }

    /// Real planes from one or two Hermitian-symmetric spectra.
    pub fn inverse_real(&self, a: &[Complex64], b: Option<&[Complex64]>, out_a: &mut [f64], out_b: Option<&mut [f64]>, s: &mut FftScratch) {
        let len = self.grid.len();
        let mut buf = std::mem::take(&mut s.buf);
        match b {
            Some(b) => {
                for idx in 0..len {
                    buf[idx] = a[idx] + Complex64::new(0.0, 1.0) * b[idx];
                }
            }
            None => buf.copy_from_slice(a),
        }
        self.inverse(&mut buf, s);
        for idx in 0..len {
            out_a[idx] = buf[idx].re;
        }
        if let Some(out_b) = out_b {
            for idx in 0..len {
                out_b[idx] = buf[idx].im;
            }
        }
        s.buf = buf;
    }

    /// Spectra of all planes (pairs share a transform).
    pub fn forward_planes(&self, planes: &[Vec<f64>], s: &mut FftScratch) -> Vec<Vec<Complex64>> {
        let len = self.grid.len();
        let mut out: Vec<Vec<Complex64>> = vec![vec![Complex64::new(0.0, 0.0); len]; planes.len()];
        let mut c = 0;
        while c < planes.len() {
            if c + 1 < planes.len() {
                let (lo, hi) = out.split_at_mut(c + 1);
                self.forward_real(&planes[c], Some(&planes[c + 1]), &mut lo[c], Some(&mut hi[0]), s);
                c += 2;
            } else {
                self.forward_real(&planes[c], None, &mut out[c], None, s);
                c += 1;
            }
        }
        out
    }

    pub fn inverse_planes(&self, spectra: &[Vec<Complex64>], s: &mut FftScratch) -> Vec<Vec<f64>> {
        let len = self.grid.len();
        let mut out = vec![vec![0.0; len]; spectra.len()];
        let mut c = 0;
        while c < spectra.len() {
            if c + 1 < spectra.len() {
                let (lo, hi) = out.split_at_mut(c + 1);
                self.inverse_real(&spectra[c], Some(&spectra[c + 1]), &mut lo[c], Some(&mut hi[0]), s);
                c += 2;
            } else {
                self.inverse_real(&spectra[c], None, &mut out[c], None, s);
                c += 1;
            }
        }
        out
    }

    /// 2/3-rule mask: true for retained modes.
    pub fn dealias_mask(&self) -> Vec<bool> {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let (cx, cy) = (nx as i64 / 3, ny as i64 / 3);
        let mut mask = vec![true; nx * ny];
        for i in 0..nx {
            for j in 0..ny {
                mask[i * ny + j] = signed_mode(i, nx).abs() <= cx && signed_mode(j, ny).abs() <= cy;
            }
        }
        mask
    }

    /// Symbol of `∂_ζ^a ∂_y^b` (odd derivatives vanish on Nyquist modes).
    pub fn derivative_symbol(&self, a: u32, b: u32) -> Vec<Complex64> {
        let g = self.grid;
        let mut out = vec![Complex64::new(0.0, 0.0); g.len()];
        for i in 0..g.nx {
            let kx = if a % 2 == 1 && 2 * i == g.nx { 0.0 } else { g.kappa_zeta(i) };
            for j in 0..g.ny {
                let ky = if b % 2 == 1 && 2 * j == g.ny { 0.0 } else { g.kappa_y(j) };
                out[i * g.ny + j] = Complex64::new(0.0, kx).powu(a) * Complex64::new(0.0, ky).powu(b);
            }
        }
        out
    }

    /// `∂_ζ^a ∂_y^b field`, spectrally.
    pub fn derivative(&self, field: &Field2D, a: u32, b: u32) -> Field2D {
        let mut s = self.scratch();
        let sym = self.derivative_symbol(a, b);
        let mut spec = self.forward_planes(&field.components(), &mut s);
        for plane in &mut spec {
            plane.iter_mut().zip(&sym).for_each(|(z, m)| *z *= m);
        }
        let planes = self.inverse_planes(&spec, &mut s);
        Field2D::from_components(field.grid, &planes, field.t)
    }

    /// Applies a Fourier multiplier to every component.
    pub fn apply_multiplier(&self, field: &Field2D, symbol: &[Complex64]) -> Field2D {
        let mut s = self.scratch();
        let mut spec = self.forward_planes(&field.components(), &mut s);
        for plane in &mut spec {
            plane.iter_mut().zip(symbol).for_each(|(z, m)| *z *= m);
        }
        let planes = self.inverse_planes(&spec, &mut s);
        Field2D::from_components(field.grid, &planes, field.t)
    }
}
