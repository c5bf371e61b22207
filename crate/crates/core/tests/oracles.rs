//! Library results against independent reference computations.

mod common;

use std::f64::consts::PI;

use mzlab_core::cubes::Cube;
use mzlab_core::dyadic::{
    build_grids, cz_decompose, sparse_operator, sparse_operator_r, CellMask, DyadicGridSpec, SparseFamily, SparseMember,
};
use mzlab_core::field::{lp_norm, sample, weighted_lp_norm};
use mzlab_core::kernels::{build_k_jt, build_mollifier, bump};
use mzlab_core::operators::SquarePlan;
use mzlab_core::scenes::scene;
use mzlab_core::spectral::spectral_convolve;
use mzlab_core::sphere::{bank_kernel, lq_sphere_norm, AngularKernel};
use mzlab_core::weights::{ap_constant, power_weight, tail_sum_check, CubeBank, Weight};
use mzlab_core::{GridSpec, QuadratureSpec, SampledField};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Midpoint sum of `f` over `[-l, l]^2` at resolution `n`.
fn fine_sum(l: f64, n: usize, f: impl Fn(f64, f64) -> f64) -> f64 {
    let h = 2.0 * l / n as f64;
    let c = |k: usize| -l + (k as f64 + 0.5) * h;
    (0..n).map(|i| (0..n).map(|j| f(c(i), c(j))).sum::<f64>()).sum::<f64>() * h * h
}

#[test]
fn disk_area_against_fine_grid() {
    let g = GridSpec::new(4.0, 256).unwrap();
    let disk = |x: [f64; 2]| if x[0].hypot(x[1]) <= 1.0 { 1.0 } else { 0.0 };
    let coarse = lp_norm(&sample(g, disk).unwrap(), 1.0).unwrap();
    let fine = fine_sum(4.0, 2048, |a, b| disk([a, b]));
    assert!(rel(fine, PI) < 2e-3, "oracle {fine}");
    assert!(rel(coarse, fine) < 0.02, "{coarse} vs {fine}");
}

#[test]
fn weighted_gaussian_norm_against_fine_grid() {
    let g = GridSpec::new(4.0, 256).unwrap();
    let gauss = |x: [f64; 2]| (-(x[0] * x[0] + x[1] * x[1])).exp();
    let f = sample(g, gauss).unwrap();
    let w = power_weight(1.0, 2.0, g).unwrap();
    let got = weighted_lp_norm(&f, &w, 2.0).unwrap();
    let fine = fine_sum(4.0, 2048, |a, b| gauss([a, b]).powi(2) * a.hypot(b)).sqrt();
    // 2 pi int r^2 e^{-2 r^2} dr = pi^{3/2} / 2^{5/2}
    let closed = (PI.powf(1.5) / 2f64.powf(2.5)).sqrt();
    assert!(rel(fine, closed) < 1e-4, "oracle {fine} vs {closed}");
    assert!(rel(got, fine) < 0.02, "{got} vs {fine}");
}

#[test]
fn cos_sphere_norm_is_root_pi() {
    let cos = AngularKernel::from_fn("cos", 4096, f64::INFINITY, f64::cos).unwrap();
    let got = lq_sphere_norm(&cos, 2.0).unwrap();
    let m = 1 << 16;
    let quad = (0..m)
        .map(|k| (2.0 * PI * k as f64 / m as f64).cos().powi(2))
        .sum::<f64>()
        * 2.0
        * PI
        / m as f64;
    assert!((quad - PI).abs() < 1e-12);
    assert!((got - 1.772_453_850_905_516).abs() < 1e-9, "{got}");
}

#[test]
fn constant_kernel_mass_is_two_pi() {
    let one = AngularKernel::from_fn("one", 4096, f64::INFINITY, |_| 1.0).unwrap();
    let g = GridSpec::new(8.0, 256).unwrap();
    let k = build_k_jt(&one, 0, 2.0, g).unwrap();
    let mass = k.field.abs().integral();
    // polar form: 2^{-j} * 2 pi * (2^j t - 2^{j-1} t) at j = 0, t = 2
    assert!(rel(mass, 2.0 * PI) <= 0.03, "{mass}");
}

/// `int |y| b(y) dy / int b(y) dy` for the base bump by radial quadrature.
fn bump_first_moment() -> f64 {
    let m = 200_000;
    let dr = 0.25 / m as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..m {
        let r = (k as f64 + 0.5) * dr;
        let b = bump([r, 0.0]);
        num += r * r * b;
        den += r * b;
    }
    num / den
}

#[test]
fn mollifier_moment_scales_like_two_to_the_l() {
    let g = GridSpec::new(8.0, 256).unwrap();
    let base = bump_first_moment();
    for l in 1..=3 {
        let phi = build_mollifier(l, g).unwrap();
        let moment: f64 = phi
            .field
            .values()
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let x = g.point(k);
                x[0].hypot(x[1]) * v
            })
            .sum::<f64>()
            * g.cell_volume();
        let want = 2f64.powi(l) * base;
        assert!(rel(moment, want) < 0.05, "l={l}: {moment} vs {want}");
    }
}

#[test]
fn box_convolution_is_a_tent() {
    let g = GridSpec::new(4.0, 128).unwrap();
    let b = sample(g, |x| if x[0].abs() < 1.0 && x[1].abs() < 1.0 { 1.0 } else { 0.0 }).unwrap();
    let conv = spectral_convolve(&b, &b).unwrap();
    let tent = |s: f64| (2.0 - s.abs()).max(0.0);
    let c = 0.5 * g.spacing();
    for (k, v) in conv.values().iter().enumerate() {
        let x = g.point(k);
        assert!((v - tent(x[0] + c) * tent(x[1] + c)).abs() < 1e-6);
    }
}

#[test]
fn spectral_convolution_matches_direct_sum() {
    let g = GridSpec::new(1.0, 32).unwrap();
    for seed in 0..3 {
        let a = common::lcg_field(g, 10 + seed);
        let b = common::lcg_field(g, 20 + seed);
        let fast = spectral_convolve(&a, &b).unwrap();
        let slow = common::direct_convolve(&a, &b);
        let err = fast
            .values()
            .iter()
            .zip(&slow)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }
}

#[test]
fn marcinkiewicz_matches_direct_double_sum() {
    let g = GridSpec::new(8.0, 64).unwrap();
    let qd = QuadratureSpec::for_grid(&g, 4).unwrap();
    let f = scene("disk", g).unwrap();
    type Exact = fn([f64; 2]) -> f64;
    let cases: [(&str, Exact); 2] = [
        ("cos", |z| z[0] / z[0].hypot(z[1])),
        ("sin3", |z| (3.0 * z[1].atan2(z[0])).sin()),
    ];
    for (name, exact) in cases {
        let om = bank_kernel(name).unwrap();
        let fast = SquarePlan::marcinkiewicz(&om, g, &qd).unwrap().apply(&f).unwrap().field;
        let slow = SampledField::from_values(g, common::brute_marcinkiewicz(exact, &f, qd.j_min..=qd.j_max)).unwrap();
        let err = lp_norm(&fast.sub(&slow).unwrap(), 2.0).unwrap() / lp_norm(&slow, 2.0).unwrap();
        assert!(err < 0.05, "{name}: {err}");
    }
}

#[test]
fn centered_cube_a2_matches_direct_means() {
    let g = GridSpec::new(4.0, 128).unwrap();
    let w = power_weight(1.0, 2.0, g).unwrap();
    let bank = CubeBank::centered(&g, 4);
    let got = ap_constant(&w, 2.0, &bank).unwrap();
    let n = g.resolution();
    let mut best = 0.0f64;
    for q in &bank.cubes {
        let (mut sw, mut si) = (0.0, 0.0);
        for i in q.corner[0]..q.corner[0] + q.side {
            for j in q.corner[1]..q.corner[1] + q.side {
                let v = w.field().values()[i as usize * n + j as usize];
                sw += v;
                si += 1.0 / v;
            }
        }
        let cells = (q.side * q.side) as f64;
        best = best.max(sw / cells * si / cells);
    }
    assert!(rel(got, best) < 1e-12, "{got} vs {best}");
}

#[test]
fn a2_is_attained_on_origin_straddling_cubes() {
    let g = GridSpec::new(4.0, 256).unwrap();
    let w = power_weight(1.0, 2.0, g).unwrap();
    let bank = CubeBank::standard(&g, 2000, 7);
    let all = ap_constant(&w, 2.0, &bank).unwrap();
    let mid = (g.resolution() / 2) as i64;
    let straddling = CubeBank {
        cubes: bank
            .cubes
            .iter()
            .copied()
            .filter(|q| (0..2).all(|a| q.corner[a] < mid && q.corner[a] + q.side > mid - 1))
            .collect(),
    };
    assert_eq!(ap_constant(&w, 2.0, &straddling).unwrap(), all);
}

#[test]
fn tail_sum_against_direct_summation() {
    let s = tail_sum_check(1.0, 1.0).unwrap().sum;
    // l = 1, 2, 3, 4 contribute 1, 1, 1/2, 1/16
    let head = 1.0 + 1.0 + 0.5 + 0.0625;
    assert!(s > head && s - head < 1e-3);
    assert!((s - 2.5630).abs() < 1e-3, "{s}");
    for (eps, rho) in [(1.0, 1.0), (0.1, 0.5), (0.01, 0.25), (0.5, 2.0)] {
        let got = tail_sum_check(eps, rho).unwrap().sum;
        let want = common::direct_tail_sum(eps, rho, 400);
        assert!(rel(got, want) < 1e-12, "eps={eps} rho={rho}: {got} vs {want}");
    }
}

#[test]
fn shifted_grids_cover_cubes_within_factor_six() {
    let g = GridSpec::new(8.0, 256).unwrap();
    let grids = build_grids(&g);
    let n = g.resolution() as i64;
    let mut state = 12345u64;
    let mut next = |m: i64| {
        state = state
            .wrapping_mul(6_364_136_223_846_793_005)
            .wrapping_add(1_442_695_040_888_963_407);
        ((state >> 33) % m as u64) as i64
    };
    for _ in 0..1000 {
        let s = 1 + next(n / 6);
        let q = Cube::new([next(n - s + 1), next(n - s + 1)], s);
        let covered = grids.iter().any(|spec| {
            (0..=spec.k_max).any(|k| {
                let side = 1i64 << k;
                let idx = [
                    (q.corner[0] - spec.offset[0]).div_euclid(side),
                    (q.corner[1] - spec.offset[1]).div_euclid(side),
                ];
                side <= 6 * s && spec.cube(k, idx).contains(&q)
            })
        });
        assert!(covered, "{q:?}");
    }
}

#[test]
fn cz_on_a_cube_indicator() {
    let g = GridSpec::new(8.0, 64).unwrap();
    let spec = DyadicGridSpec::standard(&g);
    let q0 = spec.cube(3, [3, 4]);
    let n = g.resolution();
    let values = (0..g.len())
        .map(|k| {
            if q0.contains_cell((k / n) as i64, (k % n) as i64) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let f = SampledField::from_values(g, values).unwrap();
    let cz = cz_decompose(&f, 0.5, &spec).unwrap();
    for i in 0..n as i64 {
        for j in 0..n as i64 {
            if q0.contains_cell(i, j) {
                assert!(cz.cubes.iter().any(|c| c.contains_cell(i, j)));
            }
        }
    }
    for b in &cz.bad_parts {
        assert!(b.mean().abs() < 1e-12);
    }
}

fn nested_pair() -> (SparseFamily, SampledField, Cube, Cube) {
    let g = GridSpec::new(1.0, 16).unwrap();
    let spec = DyadicGridSpec::standard(&g);
    let n = g.resolution();
    let outer = spec.cube(3, [0, 1]);
    let inner = spec.cube(1, [1, 5]);
    assert!(outer.contains(&inner));
    let member = |cube: Cube, level| SparseMember {
        cube,
        level,
        index: [0, 0],
        major: CellMask {
            cells: vec![true; cube.clipped_cells(n)],
        },
    };
    let family = SparseFamily {
        grid: spec,
        members: vec![member(outer, 3), member(inner, 1)],
        eta: 0.5,
    };
    let values = (0..g.len())
        .map(|k| {
            if inner.contains_cell((k / n) as i64, (k % n) as i64) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    (family, SampledField::from_values(g, values).unwrap(), outer, inner)
}

#[test]
fn sparse_operator_on_nested_pair() {
    let (family, f, outer, inner) = nested_pair();
    let n = f.grid().resolution();
    let a1 = sparse_operator(&family, &f).unwrap();
    let a2 = sparse_operator_r(&family, &f, 2.0).unwrap();
    for (k, (v1, v2)) in a1.values().iter().zip(a2.values()).enumerate() {
        let (i, j) = ((k / n) as i64, (k % n) as i64);
        let (want1, want2) = match (outer.contains_cell(i, j), inner.contains_cell(i, j)) {
            (true, true) => (1.0625, (1.0 + 1.0 / 256.0f64).sqrt()),
            (true, false) => (0.0625, 0.0625),
            _ => (0.0, 0.0),
        };
        assert_eq!(*v1, want1);
        assert!((v2 - want2).abs() < 1e-15);
    }
}

#[test]
fn constant_weight_constants_with_random_bank() {
    let g = GridSpec::new(8.0, 128).unwrap();
    let w = Weight::constant(g, 3.5).unwrap();
    let bank = CubeBank::random(&g, 500, 4, 11);
    for p in [1.5, 2.0, 6.0] {
        let v = ap_constant(&w, p, &bank).unwrap();
        assert!((v - 1.0).abs() < 1e-9, "p={p}: {v}");
    }
}
