//! Maximal operators: shifted-dyadic Hardy–Littlewood `M`, the power maximal
//! `M_r f = (M |f|^r)^{1/r}`, and the rough maximal `M_Omega`.

use crate::cubes::{shift_offsets, AreaTable};
use crate::error::{MzError, Result};
use crate::field::{GridSpec, SampledField};
use crate::parallel::{for_each_chunk_mut, map_vec};
use crate::spectral::{convolve_stencil, Stencil};
use crate::sphere::{l1_sphere_norm, AngularKernel};

/// Cube sides (cells) used by [`hl_maximal`]: powers of two from 4 cells up to `L` (`N/2` cells).
pub fn hl_sides(grid: &GridSpec) -> Vec<i64> {
    let n = grid.resolution() as i64;
    let mut out = Vec::new();
    let mut s = 4;
    while s <= n / 2 {
        out.push(s);
        s *= 2;
    }
    out
}

/// Pointwise max over the cubes of the nine shifted lattices (given sides)
/// containing each cell of the mean of `values` over the clipped cube.
pub fn shifted_dyadic_max(n: usize, values: &[f64], sides: &[i64]) -> Vec<f64> {
    let table = AreaTable::from_values(n, values);
    let offsets = shift_offsets(n);
    let ni = n as i64;
    let mut out = vec![0.0f64; n * n];
    for_each_chunk_mut(&mut out, n, |i0, row| {
        let i0 = i0 as i64;
        for off in &offsets {
            for &s in sides {
                let c0 = i0 - (i0 - off[0]).rem_euclid(s);
                let r0 = (c0.max(0) as usize, (c0 + s).min(ni) as usize);
                let mut c1 = off[1].rem_euclid(s);
                if c1 > 0 {
                    c1 -= s;
                }
                while c1 < ni {
                    let lo = c1.max(0) as usize;
                    let hi = (c1 + s).min(ni) as usize;
                    let cells = (r0.1 - r0.0) * (hi - lo);
                    let mean = table.sum_ranges([r0, (lo, hi)]) / cells as f64;
                    for v in &mut row[lo..hi] {
                        if mean > *v {
                            *v = mean;
                        }
                    }
                    c1 += s;
                }
            }
        }
    });
    out
}

/// Hardy–Littlewood maximal function over shifted dyadic cubes of sides `[4h, L]`.
pub fn hl_maximal(f: &SampledField) -> SampledField {
    let grid = *f.grid();
    let abs: Vec<f64> = f.values().iter().map(|v| v.abs()).collect();
    let out = shifted_dyadic_max(grid.resolution(), &abs, &hl_sides(&grid));
    SampledField::from_values_unchecked(grid, out)
}

/// `(M |f|^r)^{1/r}`.
pub fn mq_maximal(f: &SampledField, r: f64) -> Result<SampledField> {
    if !(r > 1.0) || !r.is_finite() {
        return Err(MzError::InvalidExponent(format!(
            "power maximal needs finite r > 1, got {r}"
        )));
    }
    let powered = f.map(|v| v.abs().powf(r));
    Ok(hl_maximal(&powered).map(|v| v.powf(1.0 / r)))
}

/// Radii `2^k h` (k >= 1) up to `L` used by [`omega_maximal`].
pub fn omega_radii(grid: &GridSpec) -> Vec<f64> {
    let h = grid.spacing();
    let mut out = Vec::new();
    let mut r = 2.0 * h;
    while r <= grid.half_width() * (1.0 + 1e-12) {
        out.push(r);
        r *= 2.0;
    }
    out
}

/// `sup_r` of lattice ball averages of `|Omega(x - y)| |f(y)|`. The origin of
/// each ball carries the spherical mean of `|Omega|`.
pub fn omega_maximal(omega: &AngularKernel, f: &SampledField) -> Result<SampledField> {
    let grid = *f.grid();
    let abs_f = f.abs();
    let centre = l1_sphere_norm(omega) / (2.0 * std::f64::consts::PI);
    let per_radius = map_vec(omega_radii(&grid), |r| -> Result<Vec<f64>> {
        let mut s = Stencil::from_fn(grid, r, |z| {
            let d = z[0].hypot(z[1]);
            if d == 0.0 {
                centre
            } else if d <= r {
                omega.eval_unchecked(z).abs()
            } else {
                0.0
            }
        })?;
        let count = Stencil::from_fn(grid, r, |z| if z[0].hypot(z[1]) <= r { 1.0 } else { 0.0 })?
            .entries()
            .filter(|e| e.2 > 0.0)
            .count();
        s.scale(1.0 / (count as f64 * grid.cell_volume()));
        Ok(convolve_stencil(&abs_f, &s)?.into_values())
    });
    let mut out = vec![0.0f64; grid.len()];
    for avg in per_radius {
        for (o, v) in out.iter_mut().zip(avg?) {
            *o = o.max(v);
        }
    }
    Ok(SampledField::from_values_unchecked(grid, out))
}
