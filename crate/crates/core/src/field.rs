//! Uniform cell-centered grids, sampled fields, Riemann-sum norms and the
//! MZF1 field file format.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{MzError, Result};
use crate::numeric::gauss_legendre;
use crate::parallel::{map_range, pairwise_sum, pairwise_sum_by};
use crate::weights::Weight;

/// A `[-L, L)^n` box sampled at `N` cell centers per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    dim: usize,
    half_width: f64,
    resolution: usize,
}

impl GridSpec {
    pub fn new(half_width: f64, resolution: usize) -> Result<Self> {
        Self::with_dim(2, half_width, resolution)
    }

    pub fn with_dim(dim: usize, half_width: f64, resolution: usize) -> Result<Self> {
        if dim != 2 {
            return Err(MzError::InvalidGrid(format!(
                "only dimension 2 is supported, got {dim}"
            )));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(MzError::InvalidGrid(format!(
                "half width must be positive, got {half_width}"
            )));
        }
        if resolution < 16 || !resolution.is_power_of_two() {
            return Err(MzError::InvalidGrid(format!(
                "resolution must be a power of two >= 16, got {resolution}"
            )));
        }
        Ok(Self {
            dim,
            half_width,
            resolution,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.resolution as f64
    }

    /// Volume of one cell, `h^n`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn len(&self) -> usize {
        self.resolution * self.resolution
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of cell center `k` along one axis.
    #[inline]
    pub fn coord(&self, k: usize) -> f64 {
        -self.half_width + (k as f64 + 0.5) * self.spacing()
    }

    #[inline]
    pub fn index(&self, i0: usize, i1: usize) -> usize {
        i0 * self.resolution + i1
    }

    #[inline]
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let n = self.resolution;
        [self.coord(idx / n), self.coord(idx % n)]
    }
}

/// Values of a real function at the cell centers of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl SampledField {
    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(MzError::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            let [x, y] = grid.point(idx);
            return Err(MzError::NonFinite {
                x,
                y,
                value: values[idx],
            });
        }
        Ok(Self { grid, values })
    }

    /// Skips the finiteness scan; callers guarantee finite values.
    pub(crate) fn from_values_unchecked(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.ensure_same_grid(other)?;
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn ensure_same_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(MzError::GridMismatch);
        }
        Ok(())
    }

    /// Riemann integral `sum_k values[k] h^n`.
    pub fn integral(&self) -> f64 {
        pairwise_sum(&self.values) * self.grid.cell_volume()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Writes the MZF1 binary form: 32-byte header then little-endian f64 values.
    pub fn write_mzf<W: Write>(&self, mut out: W) -> Result<()> {
        let mut header = [0u8; 32];
        header[0..4].copy_from_slice(b"MZF1");
        header[4..8].copy_from_slice(&(self.grid.dim as u32).to_le_bytes());
        header[8..16].copy_from_slice(&(self.grid.resolution as u64).to_le_bytes());
        header[16..24].copy_from_slice(&self.grid.half_width.to_le_bytes());
        out.write_all(&header)?;
        let mut buf = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn read_mzf<R: Read>(mut input: R) -> Result<Self> {
        let mut header = [0u8; 32];
        input.read_exact(&mut header)?;
        if &header[0..4] != b"MZF1" {
            return Err(MzError::Format("bad magic, expected MZF1".into()));
        }
        let dim = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
        let n = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
        let l = f64::from_le_bytes(header[16..24].try_into().unwrap());
        let grid = GridSpec::with_dim(dim, l, n)?;
        let mut buf = vec![0u8; grid.len() * 8];
        input.read_exact(&mut buf)?;
        let values = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::from_values(grid, values)
    }

    /// CSV with columns `index,x,y,value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "index,x,y,value")?;
        for (idx, v) in self.values.iter().enumerate() {
            let [x, y] = self.grid.point(idx);
            writeln!(out, "{idx},{x},{y},{v}")?;
        }
        Ok(())
    }
}

/// Evaluates `descriptor` at every cell center.
pub fn sample(grid: GridSpec, descriptor: impl Fn([f64; 2]) -> f64 + Sync + Send) -> Result<SampledField> {
    let n = grid.resolution();
    let rows = map_range(n, |i0| {
        (0..n)
            .map(|i1| descriptor([grid.coord(i0), grid.coord(i1)]))
            .collect::<Vec<f64>>()
    });
    SampledField::from_values(grid, rows.concat())
}

/// Riemann-sum `L^p` norm; `p = f64::INFINITY` gives the max norm.
pub fn lp_norm(f: &SampledField, p: f64) -> Result<f64> {
    check_p(p)?;
    if p.is_infinite() {
        return Ok(f.max_abs());
    }
    let vol = f.grid().cell_volume();
    let s = if p == 1.0 {
        pairwise_sum_by(f.values(), &|v: f64| v.abs())
    } else if p == 2.0 {
        pairwise_sum_by(f.values(), &|v: f64| v * v)
    } else {
        pairwise_sum_by(f.values(), &|v: f64| v.abs().powf(p))
    };
    Ok((s * vol).powf(1.0 / p))
}

/// `(sum_k |f_k|^p w_k h^n)^{1/p}`; `p = inf` is the max norm over the weight's support.
pub fn weighted_lp_norm(f: &SampledField, w: &Weight, p: f64) -> Result<f64> {
    check_p(p)?;
    let wf = w.field();
    f.ensure_same_grid(wf)?;
    if let Some(index) = wf.values().iter().position(|&v| v <= 0.0) {
        return Err(MzError::NonPositiveWeight {
            index,
            value: wf.values()[index],
        });
    }
    if p.is_infinite() {
        return Ok(f.max_abs());
    }
    let terms: Vec<f64> = f
        .values()
        .iter()
        .zip(wf.values())
        .map(|(&v, &wk)| v.abs().powf(p) * wk)
        .collect();
    Ok((pairwise_sum(&terms) * f.grid().cell_volume()).powf(1.0 / p))
}

fn check_p(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        return Err(MzError::InvalidExponent(format!("p must be >= 1, got {p}")));
    }
    Ok(())
}

/// Gauss nodes for `t in [1, 2]` together with the dyadic scale range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub t_nodes: Vec<(f64, f64)>,
    pub j_min: i32,
    pub j_max: i32,
}

impl QuadratureSpec {
    /// `nodes` Gauss–Legendre points and the widest scale range the grid resolves:
    /// `2^{j_min} >= 4h`, `2^{j_max} <= L/4`.
    pub fn for_grid(grid: &GridSpec, nodes: usize) -> Result<Self> {
        let h = grid.spacing();
        let j_min = (4.0 * h).log2().ceil() as i32;
        let j_max = (grid.half_width() / 4.0).log2().floor() as i32;
        Self::new(grid, nodes, j_min, j_max)
    }

    pub fn new(grid: &GridSpec, nodes: usize, j_min: i32, j_max: i32) -> Result<Self> {
        if nodes == 0 {
            return Err(MzError::InvalidQuadrature("need at least one t node".into()));
        }
        let q = Self {
            t_nodes: gauss_legendre(nodes, 1.0, 2.0),
            j_min,
            j_max,
        };
        q.validate(grid)?;
        Ok(q)
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        if self.j_min > self.j_max {
            return Err(MzError::InvalidQuadrature(format!(
                "empty scale range [{}, {}]",
                self.j_min, self.j_max
            )));
        }
        let wsum: f64 = self.t_nodes.iter().map(|n| n.1).sum();
        if self.t_nodes.iter().any(|&(t, w)| !(1.0..=2.0).contains(&t) || w <= 0.0) || (wsum - 1.0).abs() > 1e-12 {
            return Err(MzError::InvalidQuadrature(
                "t nodes must lie in [1,2] with positive weights summing to 1".into(),
            ));
        }
        let h = grid.spacing();
        if 2f64.powi(self.j_min) < 4.0 * h * (1.0 - 1e-12) {
            return Err(MzError::InvalidQuadrature(format!(
                "2^j_min = {} below 4h = {}",
                2f64.powi(self.j_min),
                4.0 * h
            )));
        }
        if 2f64.powi(self.j_max) > grid.half_width() / 4.0 * (1.0 + 1e-12) {
            return Err(MzError::InvalidQuadrature(format!(
                "2^j_max = {} above L/4 = {}",
                2f64.powi(self.j_max),
                grid.half_width() / 4.0
            )));
        }
        Ok(())
    }

    pub fn scales(&self) -> impl Iterator<Item = i32> {
        self.j_min..=self.j_max
    }
}
