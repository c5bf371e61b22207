//! Zero-padded spectral convolution on `2N x 2N` periodic buffers.
//!
//! Fields occupy the `[0, N)^2` corner of the buffer; stencils are sampled on
//! the lattice of offsets `d h` and stored in wrapped order, so the circular
//! product equals the linear sum `sum_m f_m s_{k-m} h^2` on the box as long
//! as stencil offsets stay within `N` cells.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{MzError, Result};
use crate::field::{GridSpec, SampledField};
use crate::parallel::{for_each_chunk_mut, map_range};

/// Square 2-D transform of side `p`.
pub struct Fft2 {
    p: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    /// Shared plan for side `p`.
    pub fn plan(p: usize) -> Arc<Fft2> {
        static PLANS: OnceLock<Mutex<HashMap<usize, Arc<Fft2>>>> = OnceLock::new();
        let plans = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = plans.lock().unwrap_or_else(|e| e.into_inner());
        guard
            .entry(p)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                Arc::new(Fft2 {
                    p,
                    fwd: planner.plan_fft_forward(p),
                    inv: planner.plan_fft_inverse(p),
                })
            })
            .clone()
    }

    pub fn side(&self) -> usize {
        self.p
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.pass(data, &self.fwd);
    }

    /// Inverse transform including the `1/p^2` normalization.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.pass(data, &self.inv);
        let s = 1.0 / (self.p * self.p) as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }

    fn pass(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let p = self.p;
        assert_eq!(data.len(), p * p);
        let rows = |data: &mut [Complex64]| {
            for_each_chunk_mut(data, p, |_, row| fft.process(row));
        };
        rows(data);
        transpose(data, p);
        rows(data);
        transpose(data, p);
    }
}

fn transpose(data: &mut [Complex64], p: usize) {
    const B: usize = 32;
    for bi in (0..p).step_by(B) {
        for bj in (bi..p).step_by(B) {
            for i in bi..(bi + B).min(p) {
                let start = if bi == bj { i + 1 } else { bj };
                for j in start..(bj + B).min(p) {
                    data.swap(i * p + j, j * p + i);
                }
            }
        }
    }
}

/// A spectrum on the padded buffer of some grid.
#[derive(Clone)]
pub struct Spectrum {
    grid: GridSpec,
    data: Vec<Complex64>,
}

impl Spectrum {
    /// Transform of a field placed in the `[0, N)^2` corner.
    pub fn of_field(f: &SampledField) -> Self {
        let grid = *f.grid();
        let n = grid.resolution();
        let p = 2 * n;
        let mut data = vec![Complex64::new(0.0, 0.0); p * p];
        for (i0, row) in f.values().chunks_exact(n).enumerate() {
            for (i1, &v) in row.iter().enumerate() {
                data[i0 * p + i1] = Complex64::new(v, 0.0);
            }
        }
        Fft2::plan(p).forward(&mut data);
        Self { grid, data }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn side(&self) -> usize {
        2 * self.grid.resolution()
    }

    /// Pointwise product of two spectra on the same grid.
    pub fn mul(&self, other: &Spectrum) -> Result<Spectrum> {
        if self.grid != other.grid {
            return Err(MzError::GridMismatch);
        }
        Ok(Spectrum {
            grid: self.grid,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect(),
        })
    }

    /// Inverse transform restricted to the box.
    pub fn to_field(&self) -> SampledField {
        let mut buf = self.data.clone();
        SampledField::from_values_unchecked(self.grid, self.invert_box(&mut buf))
    }

    /// `sum |inverse(self * other)|^2` on the box, without keeping the product.
    pub(crate) fn product_box(&self, other: &Spectrum) -> Vec<f64> {
        let mut buf: Vec<Complex64> = self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect();
        self.invert_box(&mut buf)
    }

    fn invert_box(&self, buf: &mut [Complex64]) -> Vec<f64> {
        let n = self.grid.resolution();
        let p = 2 * n;
        Fft2::plan(p).inverse(buf);
        let mut out = Vec::with_capacity(n * n);
        for i0 in 0..n {
            out.extend(buf[i0 * p..i0 * p + n].iter().map(|c| c.re));
        }
        out
    }

    /// Inverse transform of the whole padded buffer (row-major, side `2N`).
    pub(crate) fn to_padded(&self) -> Vec<f64> {
        let mut buf = self.data.clone();
        Fft2::plan(self.side()).inverse(&mut buf);
        buf.into_iter().map(|c| c.re).collect()
    }
}

/// Kernel values on the offset lattice `d h`, `|d_i| <= radius_cells`.
#[derive(Clone)]
pub struct Stencil {
    grid: GridSpec,
    radius_cells: usize,
    /// Row-major `(2r+1)^2` block, offset `(-r, -r)` first.
    values: Vec<f64>,
}

impl Stencil {
    /// Samples `kernel` at every lattice offset within `radius` (physical units).
    pub fn from_fn(grid: GridSpec, radius: f64, kernel: impl Fn([f64; 2]) -> f64 + Sync + Send) -> Result<Self> {
        let h = grid.spacing();
        let r = (radius / h).floor().max(0.0) as usize;
        if r > grid.resolution() {
            return Err(MzError::Wraparound(format!(
                "stencil radius {radius} exceeds the padded buffer (max {})",
                grid.resolution() as f64 * h
            )));
        }
        let side = 2 * r + 1;
        let rows = map_range(side, |a| {
            let y0 = (a as f64 - r as f64) * h;
            (0..side)
                .map(|b| kernel([y0, (b as f64 - r as f64) * h]))
                .collect::<Vec<f64>>()
        });
        let values = rows.concat();
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            let (a, b) = (k / side, k % side);
            return Err(MzError::NonFinite {
                x: (a as f64 - r as f64) * h,
                y: (b as f64 - r as f64) * h,
                value: values[k],
            });
        }
        Ok(Self {
            grid,
            radius_cells: r,
            values,
        })
    }

    pub fn delta(grid: GridSpec) -> Self {
        let h2 = grid.cell_volume();
        Self {
            grid,
            radius_cells: 0,
            values: vec![1.0 / h2],
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn radius_cells(&self) -> usize {
        self.radius_cells
    }

    /// Value at lattice offset `(d0, d1)`, zero outside the stored block.
    pub fn value(&self, d0: i64, d1: i64) -> f64 {
        let r = self.radius_cells as i64;
        if d0.abs() > r || d1.abs() > r {
            return 0.0;
        }
        let side = 2 * r + 1;
        self.values[((d0 + r) * side + d1 + r) as usize]
    }

    /// Iterates `(d0, d1, value)` over the stored block.
    pub fn entries(&self) -> impl Iterator<Item = (i64, i64, f64)> + '_ {
        let r = self.radius_cells as i64;
        let side = (2 * r + 1) as usize;
        self.values
            .iter()
            .enumerate()
            .map(move |(k, &v)| ((k / side) as i64 - r, (k % side) as i64 - r, v))
    }

    /// Lattice sum `sum_d s_d h^n`.
    pub fn integral(&self) -> f64 {
        crate::parallel::pairwise_sum(&self.values) * self.grid.cell_volume()
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.values {
            *v *= c;
        }
    }

    /// Transform of the wrapped stencil, scaled by `h^n` so that multiplying a
    /// field spectrum realizes the Riemann convolution.
    pub fn spectrum(&self) -> Spectrum {
        let n = self.grid.resolution();
        let p = 2 * n;
        let mut data = vec![Complex64::new(0.0, 0.0); p * p];
        let vol = self.grid.cell_volume();
        let pi = p as i64;
        for (d0, d1, v) in self.entries() {
            if v != 0.0 {
                let i = d0.rem_euclid(pi) as usize;
                let j = d1.rem_euclid(pi) as usize;
                data[i * p + j] = Complex64::new(v * vol, 0.0);
            }
        }
        Fft2::plan(p).forward(&mut data);
        Spectrum { grid: self.grid, data }
    }
}

/// Convolves a field with a stencil: `out_k = sum_m f_m s_{k-m} h^n`.
pub fn convolve_stencil(f: &SampledField, s: &Stencil) -> Result<SampledField> {
    if f.grid() != s.grid() {
        return Err(MzError::GridMismatch);
    }
    Spectrum::of_field(f).mul(&s.spectrum()).map(|p| p.to_field())
}

/// Linear convolution of two cell-centered fields on one grid.
///
/// The second argument is read as a kernel whose cell `N/2` (center
/// `(h/2, h/2)`) plays the role of the origin, so `out_k = sum_m a_m
/// b_{k-m+N/2} h^n`; output index `k` therefore approximates `(a * b)(x_k +
/// h/2)`. A unit mass in cell `(N/2, N/2)` is the identity.
pub fn spectral_convolve(a: &SampledField, b: &SampledField) -> Result<SampledField> {
    a.ensure_same_grid(b)?;
    let grid = *a.grid();
    let n = grid.resolution();
    let half = (n / 2) as i64;
    // offsets run over [-N/2, N/2), so the padded buffer never wraps onto the box
    let stencil = Stencil {
        grid,
        radius_cells: n / 2,
        values: {
            let r = half;
            let side = (2 * r + 1) as usize;
            let mut v = vec![0.0; side * side];
            for (idx, &val) in b.values().iter().enumerate() {
                let d0 = (idx / n) as i64 - half;
                let d1 = (idx % n) as i64 - half;
                v[((d0 + r) as usize) * side + (d1 + r) as usize] = val;
            }
            v
        },
    };
    convolve_stencil(a, &stencil)
}
