//! Truncated annular kernels `K_t^j`, the mollifiers `phi_l`, their
//! convolutions, and the annulus regularity sums for the smoothed kernels.
//!
//! Two samplings of the same closed forms are provided. The public
//! [`TruncatedKernel`] and [`Mollifier`] hold cell-centered fields; the
//! `*_stencil` builders sample on the offset lattice `d h` used by the
//! convolution engine, so operator outputs are not shifted by half a cell.

use serde::Serialize;

use crate::error::{MzError, Result};
use crate::field::{sample, GridSpec, QuadratureSpec, SampledField};
use crate::parallel::{map_vec, pairwise_sum};
use crate::spectral::{convolve_stencil, Stencil};
use crate::sphere::AngularKernel;

/// `K_t^j` sampled at cell centers.
#[derive(Debug, Clone)]
pub struct TruncatedKernel {
    pub j: i32,
    pub t: f64,
    pub field: SampledField,
}

/// `phi_l` sampled at cell centers and renormalized to unit discrete mass.
#[derive(Debug, Clone)]
pub struct Mollifier {
    pub l: i32,
    pub field: SampledField,
}

/// Annulus `2^{j-1} t < |x| <= 2^j t`.
#[inline]
pub fn in_annulus(r: f64, j: i32, t: f64) -> bool {
    let outer = 2f64.powi(j) * t;
    r > 0.5 * outer && r <= outer
}

#[inline]
fn k_jt_value(omega: &AngularKernel, j: i32, t: f64, x: [f64; 2]) -> f64 {
    let r = x[0].hypot(x[1]);
    if in_annulus(r, j, t) {
        2f64.powi(-j) * omega.eval_unchecked(x) / r
    } else {
        0.0
    }
}

fn check_annulus(j: i32, t: f64, grid: &GridSpec) -> Result<()> {
    let h = grid.spacing();
    let outer = 2f64.powi(j) * t;
    if !(1.0..=2.0).contains(&t) || 0.5 * outer < 2.0 * h * (1.0 - 1e-12) || outer > grid.half_width() {
        return Err(MzError::Unresolvable(format!(
            "annulus for j={j}, t={t} on spacing h={h} (needs 2^(j-1)t >= 2h and 2^j t <= L)"
        )));
    }
    Ok(())
}

/// Builds `K_t^j = 2^{-j} Omega(x) |x|^{-(n-1)} chi_{2^{j-1}t < |x| <= 2^j t}` at cell centers.
pub fn build_k_jt(omega: &AngularKernel, j: i32, t: f64, grid: GridSpec) -> Result<TruncatedKernel> {
    check_annulus(j, t, &grid)?;
    let field = sample(grid, |x| k_jt_value(omega, j, t, x))?;
    Ok(TruncatedKernel { j, t, field })
}

/// Base bump `exp(-1/(1 - |4x|^2))` on `|x| < 1/4` (unnormalized).
#[inline]
pub fn bump(x: [f64; 2]) -> f64 {
    let s = 16.0 * (x[0] * x[0] + x[1] * x[1]);
    if s < 1.0 {
        (-1.0 / (1.0 - s)).exp()
    } else {
        0.0
    }
}

/// Support radius `2^{l-2}` of `phi_l`.
pub fn mollifier_radius(l: i32) -> f64 {
    2f64.powi(l - 2)
}

/// `phi_l` at cell centers; requires `2h <= 2^{l-2} <= L`.
pub fn build_mollifier(l: i32, grid: GridSpec) -> Result<Mollifier> {
    let radius = mollifier_radius(l);
    let h = grid.spacing();
    if radius < 2.0 * h * (1.0 - 1e-12) || radius > grid.half_width() {
        return Err(MzError::Unresolvable(format!(
            "mollifier support 2^(l-2) = {radius} for l={l} outside [2h, L] with h={h}"
        )));
    }
    let scale = 2f64.powi(-l);
    let raw = sample(grid, |y| bump([scale * y[0], scale * y[1]]))?;
    let mass = raw.integral();
    Ok(Mollifier {
        l,
        field: raw.scale(1.0 / mass),
    })
}

/// `phi_l` on the offset lattice with unit discrete mass. Sub-resolution
/// mollifiers (no lattice point other than the origin inside the support)
/// collapse to the discrete delta.
pub fn mollifier_stencil(l: i32, grid: GridSpec) -> Result<Stencil> {
    let radius = mollifier_radius(l);
    if radius > grid.half_width() {
        return Err(MzError::Unresolvable(format!(
            "mollifier support {radius} exceeds the box half width {}",
            grid.half_width()
        )));
    }
    let scale = 2f64.powi(-l);
    let mut s = Stencil::from_fn(grid, radius, |y| bump([scale * y[0], scale * y[1]]))?;
    let mass = s.integral();
    if mass <= 0.0 {
        return Ok(Stencil::delta(grid));
    }
    s.scale(1.0 / mass);
    Ok(s)
}

/// `K_t^j` on the offset lattice.
pub fn k_jt_stencil(omega: &AngularKernel, j: i32, t: f64, grid: GridSpec) -> Result<Stencil> {
    check_annulus(j, t, &grid)?;
    Stencil::from_fn(grid, 2f64.powi(j) * t, |x| k_jt_value(omega, j, t, x))
}

/// `Omega(x) |x|^{-(n-1)} chi_{|x| <= t}` on the offset lattice; the origin carries 0.
pub fn ball_stencil(omega: &AngularKernel, t: f64, grid: GridSpec) -> Result<Stencil> {
    if t < 2.0 * grid.spacing() * (1.0 - 1e-12) || t > grid.half_width() {
        return Err(MzError::Unresolvable(format!(
            "ball radius {t} outside [2h, L] with h={}",
            grid.spacing()
        )));
    }
    Stencil::from_fn(grid, t, |x| {
        let r = x[0].hypot(x[1]);
        if r > 0.0 && r <= t {
            omega.eval_unchecked(x) / r
        } else {
            0.0
        }
    })
}

/// `Omega(y') |y|^{-n}` on `eps < |y| < outer` (lattice).
pub fn band_stencil(omega: &AngularKernel, eps: f64, outer: f64, grid: GridSpec) -> Result<Stencil> {
    Stencil::from_fn(grid, outer, |x| {
        let r2 = x[0] * x[0] + x[1] * x[1];
        let r = r2.sqrt();
        if r > eps && r < outer {
            omega.eval_unchecked(x) / r2
        } else {
            0.0
        }
    })
}

/// `K_t^j * phi_{j-l}` at cell centers.
pub fn smooth_kernel(k: &TruncatedKernel, l: i32) -> Result<SampledField> {
    let grid = *k.field.grid();
    // admissibility follows the cell-centered mollifier contract
    build_mollifier(k.j - l, grid)?;
    let phi = mollifier_stencil(k.j - l, grid)?;
    convolve_stencil(&k.field, &phi)
}

/// Result of one annulus regularity sum.
#[derive(Debug, Clone, Serialize)]
pub struct RegularityResult {
    pub sum: f64,
    pub bound: f64,
    pub ratio: f64,
    pub scales_used: Vec<i32>,
}

/// Sums over admissible scales `j` of the `L^q` norm, over the annulus
/// `2^k R < |x| <= 2^{k+1} R`, of `sup_t |K_t^j * phi_{j-l}(x + y) - K_t^j * phi_{j-l}(x)|`,
/// and its ratio to `(2^k R)^{-n/q'} min(1, 2^l |y| / (2^k R))`.
///
/// `y` must be a lattice displacement (integer multiple of `h` per axis);
/// the supremum over `t` runs over the quadrature nodes.
#[allow(clippy::too_many_arguments)]
pub fn regularity_sum_check(
    omega: &AngularKernel,
    l: i32,
    radius: f64,
    y: [f64; 2],
    k: i32,
    q: f64,
    quad: &QuadratureSpec,
    grid: GridSpec,
) -> Result<RegularityResult> {
    let h = grid.spacing();
    let ynorm = y[0].hypot(y[1]);
    if !(radius > 0.0) || ynorm >= radius / 4.0 {
        return Err(MzError::InvalidArgument(format!(
            "need |y| < R/4, got |y|={ynorm}, R={radius}"
        )));
    }
    if q.is_nan() || q <= 1.0 {
        return Err(MzError::InvalidExponent(format!("q must exceed 1, got {q}")));
    }
    let inner = 2f64.powi(k) * radius;
    let outer = 2.0 * inner;
    if inner < 2.0 * h || outer + ynorm > grid.half_width() {
        return Err(MzError::Unresolvable(format!(
            "annulus ({inner}, {outer}] not resolvable inside the box"
        )));
    }
    let shift = [y[0] / h, y[1] / h];
    let shift_cells = [shift[0].round() as i64, shift[1].round() as i64];
    if (shift[0] - shift_cells[0] as f64).abs() > 1e-9 || (shift[1] - shift_cells[1] as f64).abs() > 1e-9 {
        return Err(MzError::InvalidArgument(format!(
            "displacement {y:?} is not a multiple of the spacing {h}"
        )));
    }
    let scales: Vec<i32> = quad
        .scales()
        .filter(|&j| build_mollifier(j - l, grid).is_ok())
        .filter(|&j| {
            // supp K * phi lies in 2^{j-2} <= |x| <= 2^{j+2}; skip scales missing the annulus
            let lo = 2f64.powi(j - 2);
            let hi = 2f64.powi(j + 2);
            hi + ynorm > inner && lo - ynorm <= outer
        })
        .collect();
    let bound = inner.powf(-2.0 / conjugate(q)) * (2f64.powi(l) * ynorm / inner).min(1.0);
    if ynorm == 0.0 {
        return Ok(RegularityResult {
            sum: 0.0,
            bound,
            ratio: 0.0,
            scales_used: scales,
        });
    }
    let n = grid.resolution();
    let vol = grid.cell_volume();
    let per_scale = map_vec(scales.clone(), |j| -> Result<f64> {
        let mut sup = vec![0.0f64; n * n];
        for &(t, _) in &quad.t_nodes {
            let kern = build_k_jt(omega, j, t, grid)?;
            let smooth = smooth_kernel(&kern, l)?;
            let v = smooth.values();
            for i0 in 0..n {
                for i1 in 0..n {
                    let s0 = i0 as i64 + shift_cells[0];
                    let s1 = i1 as i64 + shift_cells[1];
                    if s0 < 0 || s1 < 0 || s0 >= n as i64 || s1 >= n as i64 {
                        continue;
                    }
                    let d = (v[grid.index(s0 as usize, s1 as usize)] - v[grid.index(i0, i1)]).abs();
                    let cell = &mut sup[grid.index(i0, i1)];
                    *cell = cell.max(d);
                }
            }
        }
        let terms: Vec<f64> = sup
            .iter()
            .enumerate()
            .map(|(idx, &s)| {
                let [x0, x1] = grid.point(idx);
                let r = x0.hypot(x1);
                if r > inner && r <= outer {
                    s.powf(q)
                } else {
                    0.0
                }
            })
            .collect();
        Ok((pairwise_sum(&terms) * vol).powf(1.0 / q))
    });
    let mut sum = 0.0;
    for v in per_scale {
        sum += v?;
    }
    Ok(RegularityResult {
        sum,
        bound,
        ratio: sum / bound,
        scales_used: scales,
    })
}

fn conjugate(q: f64) -> f64 {
    if q.is_infinite() {
        1.0
    } else {
        q / (q - 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{bank_kernel, kernel_bank, l1_sphere_norm};

    fn grid() -> GridSpec {
        GridSpec::new(8.0, 128).unwrap()
    }

    #[test]
    fn annulus_support_is_exact() {
        let g = grid();
        for omega in kernel_bank() {
            for (j, t) in [(-1, 1.0), (0, 1.5), (2, 2.0)] {
                let k = build_k_jt(&omega, j, t, g).unwrap();
                for (idx, &v) in k.field.values().iter().enumerate() {
                    let [x, y] = g.point(idx);
                    let r = x.hypot(y);
                    if !in_annulus(r, j, t) {
                        assert_eq!(v, 0.0);
                    } else {
                        let want = 2f64.powi(-j) * omega.eval_unchecked([x, y]) / r;
                        assert_eq!(v, want);
                    }
                }
            }
        }
    }

    #[test]
    fn unresolvable_annulus_rejected() {
        let g = grid();
        let omega = bank_kernel("cos").unwrap();
        assert!(matches!(build_k_jt(&omega, -3, 1.0, g), Err(MzError::Unresolvable(_))));
        assert!(build_k_jt(&omega, 3, 1.5, g).is_err());
    }

    #[test]
    fn mass_of_constant_kernel() {
        let g = GridSpec::new(8.0, 256).unwrap();
        let one = AngularKernel::from_fn("one", 4096, f64::INFINITY, |_| 1.0).unwrap();
        let k = build_k_jt(&one, 0, 2.0, g).unwrap();
        let mass = k.field.abs().integral();
        assert!((mass - 2.0 * std::f64::consts::PI).abs() < 0.03 * 2.0 * std::f64::consts::PI);
        let omega = bank_kernel("cos").unwrap();
        let k = build_k_jt(&omega, 0, 1.5, g).unwrap();
        assert!(k.field.integral().abs() < 1e-3 * l1_sphere_norm(&omega));
    }

    #[test]
    fn mollifier_contract() {
        let g = grid();
        for l in 0..4 {
            let m = build_mollifier(l, g).unwrap();
            assert!((m.field.integral() - 1.0).abs() < 1e-6);
            assert!(m.field.values().iter().all(|&v| v >= 0.0));
            for (idx, &v) in m.field.values().iter().enumerate() {
                let [x, y] = g.point(idx);
                if x.hypot(y) > mollifier_radius(l) {
                    assert_eq!(v, 0.0);
                }
            }
        }
        assert!(build_mollifier(-2, g).is_err());
        assert!(build_mollifier(6, g).is_err());
    }

    #[test]
    fn sub_resolution_stencil_is_delta() {
        let g = grid();
        let s = mollifier_stencil(-3, g).unwrap();
        assert_eq!(s.radius_cells(), 0);
        assert!((s.integral() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn smoothing_preserves_mass() {
        let g = grid();
        let omega = bank_kernel("step").unwrap();
        let k = build_k_jt(&omega, 1, 1.25, g).unwrap();
        let s = smooth_kernel(&k, 1).unwrap();
        assert!((s.integral() - k.field.integral()).abs() < 1e-6);
        assert!(s.integral().abs() < 1e-3);
    }

    #[test]
    fn regularity_zero_displacement() {
        let g = GridSpec::new(8.0, 128).unwrap();
        let q = QuadratureSpec::new(&g, 2, 0, 1).unwrap();
        let omega = bank_kernel("cos").unwrap();
        let r = regularity_sum_check(&omega, 1, 1.0, [0.0, 0.0], 0, 4.0, &q, g).unwrap();
        assert_eq!(r.sum, 0.0);
        assert_eq!(r.ratio, 0.0);
        assert!(regularity_sum_check(&omega, 1, 1.0, [0.3, 0.0], 0, 4.0, &q, g).is_err());
        assert!(regularity_sum_check(&omega, 1, 1.0, [0.03, 0.0], 0, 4.0, &q, g).is_err());
    }
}
