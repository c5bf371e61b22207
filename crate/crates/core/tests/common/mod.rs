//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use mzlab_core::{GridSpec, SampledField};

/// `out_k = h^2 sum_m a_m b_{k-m+N/2}` by direct summation.
pub fn direct_convolve(a: &SampledField, b: &SampledField) -> Vec<f64> {
    let g = a.grid();
    let n = g.resolution() as i64;
    let half = n / 2;
    let h2 = g.cell_volume();
    let (av, bv) = (a.values(), b.values());
    let mut out = vec![0.0; (n * n) as usize];
    for k0 in 0..n {
        for k1 in 0..n {
            let mut s = 0.0;
            for m0 in 0..n {
                let i0 = k0 - m0 + half;
                if !(0..n).contains(&i0) {
                    continue;
                }
                for m1 in 0..n {
                    let i1 = k1 - m1 + half;
                    if (0..n).contains(&i1) {
                        s += av[(m0 * n + m1) as usize] * bv[(i0 * n + i1) as usize];
                    }
                }
            }
            out[(k0 * n + k1) as usize] = s * h2;
        }
    }
    out
}

/// Four-point Gauss–Legendre rule mapped to `[1, 2]`.
pub fn gauss4_on_1_2() -> [(f64, f64); 4] {
    const X: [f64; 2] = [0.339_981_043_584_856_3, 0.861_136_311_594_052_6];
    const W: [f64; 2] = [0.652_145_154_862_546_1, 0.347_854_845_137_453_9];
    [
        (1.5 - 0.5 * X[1], 0.5 * W[1]),
        (1.5 - 0.5 * X[0], 0.5 * W[0]),
        (1.5 + 0.5 * X[0], 0.5 * W[0]),
        (1.5 + 0.5 * X[1], 0.5 * W[1]),
    ]
}

/// Direct double sum for the Marcinkiewicz integral:
/// `M(x)^2 = sum_j sum_s w_s 2^{-2j} s^{-3} |sum_y omega(x-y)/|x-y| chi_{|x-y| <= 2^j s} f(y) h^2|^2`.
pub fn brute_marcinkiewicz(
    omega: impl Fn([f64; 2]) -> f64,
    f: &SampledField,
    j_range: std::ops::RangeInclusive<i32>,
) -> Vec<f64> {
    let g = f.grid();
    let n = g.resolution() as i64;
    let h = g.spacing();
    let h2 = g.cell_volume();
    let support: Vec<(i64, i64, f64)> = (0..n * n)
        .filter_map(|k| {
            let v = f.values()[k as usize];
            (v != 0.0).then_some((k / n, k % n, v))
        })
        .collect();
    let nodes = gauss4_on_1_2();
    let mut out = vec![0.0; (n * n) as usize];
    for k0 in 0..n {
        for k1 in 0..n {
            let mut acc = 0.0;
            for j in j_range.clone() {
                for &(s, w) in &nodes {
                    let t = 2f64.powi(j) * s;
                    let mut conv = 0.0;
                    for &(m0, m1, v) in &support {
                        let z = [(k0 - m0) as f64 * h, (k1 - m1) as f64 * h];
                        let r = z[0].hypot(z[1]);
                        if r > 0.0 && r <= t {
                            conv += omega(z) / r * v;
                        }
                    }
                    conv *= h2;
                    acc += w * 2f64.powi(-2 * j) * s.powi(-3) * conv * conv;
                }
            }
            out[(k0 * n + k1) as usize] = acc.sqrt();
        }
    }
    out
}

/// Prefix sums with a zero border: `table[(i+1)(n+1) + j+1] = sum_{a<=i, b<=j} v`.
fn prefix(n: usize, v: &[f64]) -> Vec<f64> {
    let mut t = vec![0.0; (n + 1) * (n + 1)];
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += v[i * n + j];
            t[(i + 1) * (n + 1) + j + 1] = t[i * (n + 1) + j + 1] + row;
        }
    }
    t
}

fn box_mean(t: &[f64], n: usize, c: [usize; 2], side: usize) -> f64 {
    let (a0, a1, b0, b1) = (c[0], c[1], c[0] + side, c[1] + side);
    let w = n + 1;
    (t[b0 * w + b1] - t[a0 * w + b1] - t[b0 * w + a1] + t[a0 * w + a1]) / (side * side) as f64
}

/// `[|x|^a]_{A_2}` on `[-half_width, half_width]^2` at resolution `n` over every
/// origin-centered cube, every cube with a corner at the origin, and `random`
/// cubes of side at least four cells from a fixed linear congruential stream.
pub fn exhaustive_a2_power(a: f64, half_width: f64, n: usize, random: usize) -> f64 {
    let h = 2.0 * half_width / n as f64;
    let coord = |k: usize| -half_width + (k as f64 + 0.5) * h;
    let mut w = vec![0.0; n * n];
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let v = coord(i).hypot(coord(j)).powf(a);
            w[i * n + j] = v;
            inv[i * n + j] = 1.0 / v;
        }
    }
    let (tw, ti) = (prefix(n, &w), prefix(n, &inv));
    let ratio = |c: [usize; 2], s: usize| box_mean(&tw, n, c, s) * box_mean(&ti, n, c, s);
    let mid = n / 2;
    let mut best: f64 = 0.0;
    for s in (2..=n).step_by(2) {
        best = best.max(ratio([mid - s / 2, mid - s / 2], s));
    }
    for s in 1..=mid {
        for c in [[mid, mid], [mid - s, mid], [mid, mid - s], [mid - s, mid - s]] {
            best = best.max(ratio(c, s));
        }
    }
    let mut state: u64 = 0x9e37_79b9_7f4a_7c15;
    let mut next = |m: usize| {
        state = state
            .wrapping_mul(6_364_136_223_846_793_005)
            .wrapping_add(1_442_695_040_888_963_407);
        ((state >> 33) as usize) % m
    };
    for k in 0..random {
        let s = 4 + next(n / 2 - 3);
        let c = if k % 2 == 0 {
            let lo = mid + 1 - s;
            [lo + next(s - 1), lo + next(s - 1)]
        } else {
            [next(n - s + 1), next(n - s + 1)]
        };
        best = best.max(ratio(c, s));
    }
    best
}

/// `sum_{l=1}^{terms} 2^l 2^{-rho 2^l eps / (1 + eps)}` summed in order.
pub fn direct_tail_sum(eps: f64, rho: f64, terms: i32) -> f64 {
    (1..=terms)
        .map(|l| 2f64.powi(l) * 2f64.powf(-rho * 2f64.powi(l) * eps / (1.0 + eps)))
        .sum()
}

/// A random field with a fixed linear congruential stream in `[-1, 1)`.
pub fn lcg_field(grid: GridSpec, seed: u64) -> SampledField {
    let mut state = seed.wrapping_mul(2_862_933_555_777_941_757).wrapping_add(3_037_000_493);
    let values = (0..grid.len())
        .map(|_| {
            state = state
                .wrapping_mul(6_364_136_223_846_793_005)
                .wrapping_add(1_442_695_040_888_963_407);
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        })
        .collect();
    SampledField::from_values(grid, values).unwrap()
}
