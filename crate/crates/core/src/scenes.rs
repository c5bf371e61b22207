//! Built-in test functions, all supported in the inner half-box and scaled
//! with the box so the same physical scene exists on every grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{MzError, Result};
use crate::field::{sample, GridSpec, SampledField};
use crate::kernels::bump;
use crate::weights::Weight;

/// Names accepted by [`scene`]. `focus-m` is a bump of radius `2^{-m} L/2`
/// at the origin (clamped to `2h`); `spike` is a bump of radius `2h`.
pub const SCENE_NAMES: [&str; 10] = [
    "disk",
    "gaussian",
    "shifted-gaussian",
    "two-bump",
    "annulus-bump",
    "focus-2",
    "focus-3",
    "focus-4",
    "focus-5",
    "spike",
];

/// Scenes used by the equivalence and domination checks: the named bank minus `spike`.
pub fn smooth_bank_names() -> &'static [&'static str] {
    &SCENE_NAMES[..9]
}

/// Smooth bump of radius `r` centered at `c`, peak value `e^{-1}`.
pub fn bump_at(x: [f64; 2], c: [f64; 2], r: f64) -> f64 {
    bump([(x[0] - c[0]) / (4.0 * r), (x[1] - c[1]) / (4.0 * r)])
}

fn inner(grid: &GridSpec, x: [f64; 2]) -> bool {
    let half = grid.half_width() / 2.0;
    x[0].abs() <= half && x[1].abs() <= half
}

/// Focus radius `2^{-m} L/2`, never below `2h`.
pub fn focus_radius(grid: &GridSpec, m: i32) -> f64 {
    (2f64.powi(-m) * grid.half_width() / 2.0).max(2.0 * grid.spacing())
}

pub fn scene(name: &str, grid: GridSpec) -> Result<SampledField> {
    let s = grid.half_width() / 8.0;
    let g = grid;
    match name {
        "disk" => sample(g, |x| if x[0].hypot(x[1]) <= s { 1.0 } else { 0.0 }),
        "gaussian" => sample(g, |x| {
            if inner(&g, x) {
                (-(x[0] * x[0] + x[1] * x[1]) / (s * s)).exp()
            } else {
                0.0
            }
        }),
        "shifted-gaussian" => sample(g, |x| {
            let d = [x[0] - 0.75 * s, x[1] + 0.5 * s];
            if inner(&g, x) {
                (-2.0 * (d[0] * d[0] + d[1] * d[1]) / (s * s)).exp()
            } else {
                0.0
            }
        }),
        "two-bump" => sample(g, |x| {
            bump_at(x, [-1.2 * s, 0.4 * s], 0.8 * s) - 0.7 * bump_at(x, [1.0 * s, -0.6 * s], 0.5 * s)
        }),
        "annulus-bump" => sample(g, |x| {
            let r = x[0].hypot(x[1]);
            let u = (r - 1.5 * s) / (0.5 * s);
            if u.abs() < 1.0 {
                (-1.0 / (1.0 - u * u)).exp()
            } else {
                0.0
            }
        }),
        "spike" => {
            let r = 2.0 * g.spacing();
            sample(g, |x| bump_at(x, [0.0, 0.0], r))
        }
        other => {
            if let Some(m) = other.strip_prefix("focus-").and_then(|m| m.parse::<i32>().ok()) {
                let r = focus_radius(&g, m);
                sample(g, |x| bump_at(x, [0.0, 0.0], r))
            } else {
                Err(MzError::UnknownName(format!("scene '{other}'")))
            }
        }
    }
}

pub fn scene_bank(names: &[&str], grid: GridSpec) -> Result<Vec<SampledField>> {
    names.iter().map(|n| scene(n, grid)).collect()
}

/// `count` seeded sums of one to three smooth bumps with centers in the
/// quarter box and radii in `[8h, L/8]`.
pub fn random_bumps(grid: GridSpec, count: usize, seed: u64) -> Result<Vec<SampledField>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let quarter = grid.half_width() / 4.0;
    let r_lo = 8.0 * grid.spacing();
    let r_hi = (grid.half_width() / 8.0).max(r_lo);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let k = rng.gen_range(1..=3);
        let parts: Vec<([f64; 2], f64, f64)> = (0..k)
            .map(|_| {
                let c = [rng.gen_range(-quarter..quarter), rng.gen_range(-quarter..quarter)];
                let r = rng.gen_range(r_lo..=r_hi);
                let a = rng.gen_range(-1.0..1.0);
                (c, r, a)
            })
            .collect();
        out.push(sample(grid, |x| {
            parts.iter().map(|&(c, r, a)| a * bump_at(x, c, r)).sum()
        })?);
    }
    Ok(out)
}

/// Bumps of radius `2^{-m} L/2` at the origin multiplied by `sigma`
/// (typically the dual weight), `m` in `ms`.
pub fn weighted_focus(sigma: &Weight, ms: &[i32]) -> Result<Vec<SampledField>> {
    let grid = *sigma.grid();
    ms.iter()
        .map(|&m| {
            let r = focus_radius(&grid, m);
            let b = sample(grid, |x| bump_at(x, [0.0, 0.0], r))?;
            b.zip_with(sigma.field(), |u, v| u * v)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::check_inner_support;

    #[test]
    fn scenes_live_in_inner_box() {
        for l in [4.0, 8.0] {
            let g = GridSpec::new(l, 128).unwrap();
            for name in SCENE_NAMES {
                let f = scene(name, g).unwrap();
                assert!(!f.is_zero(), "{name}");
                check_inner_support(&f).unwrap();
            }
            for f in random_bumps(g, 5, 3).unwrap() {
                check_inner_support(&f).unwrap();
            }
        }
        assert!(scene("nope", GridSpec::new(8.0, 64).unwrap()).is_err());
    }
}
