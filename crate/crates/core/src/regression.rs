//! Golden-value regression suite: pinned computations, a JSON golden store,
//! JUnit XML and JSON summaries.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cubes::CubeBank;
use crate::domination::{geometric_levels, sparse_domination_check, weak11_check};
use crate::dyadic::{build_sparse_family, cz_decompose, lemma21_bound_check, DyadicGridSpec};
use crate::error::{MzError, Result};
use crate::experiments::{
    buckley_sweep, operator_norm_estimate, theorem11_sweep, theorem12_sweep, ExperimentConfig, NormOp,
};
use crate::field::{lp_norm, sample, weighted_lp_norm, GridSpec, QuadratureSpec, SampledField};
use crate::fourier::{approximation_decay, decay_summary, mollifier_symbol_check};
use crate::kernels::{build_k_jt, build_mollifier, regularity_sum_check};
use crate::maximal::{hl_maximal, mq_maximal, omega_maximal};
use crate::operators::{rough_singular_integral, SquarePlan};
use crate::scenes::{scene, SCENE_NAMES};
use crate::spectral::{convolve_stencil, spectral_convolve, Stencil};
use crate::sphere::{bank_kernel, bank_kernel_with, lq_sphere_norm, AngularKernel};
use crate::weights::{ap_constant, composite_constants, power_weight, reverse_holder_check, tail_sum_check, Weight};

/// Golden store shipped with the crate.
pub const DEFAULT_GOLDENS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/goldens/goldens.json");

pub const GOLDEN_FORMAT: &str = "mzlab-goldens-1";

/// Stored golden values keyed `suite/check/metric`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenStore {
    pub format: String,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub values: BTreeMap<String, f64>,
}

impl Default for GoldenStore {
    fn default() -> Self {
        Self {
            format: GOLDEN_FORMAT.into(),
            rel_tol: 1e-6,
            abs_tol: 1e-12,
            values: BTreeMap::new(),
        }
    }
}

impl GoldenStore {
    /// Loads a store; a missing file is a [`MzError::MissingArtifact`].
    pub fn load(path: &Path) -> Result<Self> {
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(MzError::MissingArtifact(format!(
                    "golden store {} not found; generate it with `mzlab regress --generate`",
                    path.display()
                )))
            }
            Err(e) => return Err(e.into()),
        };
        let store: GoldenStore = serde_json::from_str(&text)?;
        if store.format != GOLDEN_FORMAT {
            return Err(MzError::Format(format!("unknown golden format '{}'", store.format)));
        }
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    fn matches(&self, golden: f64, value: f64) -> bool {
        if golden.is_nan() || value.is_nan() {
            return golden.is_nan() && value.is_nan();
        }
        (value - golden).abs() <= self.rel_tol * golden.abs() + self.abs_tol
    }
}

/// Metrics and property failures produced by one check.
#[derive(Debug, Default)]
pub struct CheckOutput {
    metrics: Vec<(String, f64)>,
    failures: Vec<String>,
    notes: Vec<String>,
}

impl CheckOutput {
    fn metric(&mut self, name: impl Into<String>, value: f64) -> f64 {
        self.metrics.push((name.into(), value));
        value
    }

    fn require(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(msg());
        }
    }

    /// Records an expectation known not to hold on the pinned grid without failing the check.
    fn expect(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if !ok {
            self.notes.push(msg());
        }
    }
}

type CheckFn = fn() -> Result<CheckOutput>;

pub struct CheckSpec {
    pub suite: &'static str,
    pub name: &'static str,
    run: CheckFn,
}

impl CheckSpec {
    pub fn id(&self) -> String {
        format!("{}/{}", self.suite, self.name)
    }
}

/// Suites in execution order.
pub const SUITES: [&str; 8] = [
    "field",
    "sphere",
    "kernels",
    "operators",
    "weights",
    "sparse",
    "fourier",
    "experiments",
];

pub fn registry() -> Vec<CheckSpec> {
    macro_rules! c {
        ($suite:literal, $name:literal, $f:path) => {
            CheckSpec {
                suite: $suite,
                name: $name,
                run: $f,
            }
        };
    }
    vec![
        c!("field", "disk-area", field_disk_area),
        c!("field", "weighted-gaussian", field_weighted_gaussian),
        c!("sphere", "cos-l2", sphere_cos_l2),
        c!("sphere", "sing-q2-divergence", sphere_sing_divergence),
        c!("kernels", "mass-one", kernels_mass_one),
        c!("kernels", "mollifier-moment", kernels_mollifier_moment),
        c!("kernels", "tent", kernels_tent),
        c!("kernels", "regularity", kernels_regularity),
        c!("operators", "equivalence", operators_equivalence),
        c!("operators", "tsing-eps", operators_tsing_eps),
        c!("operators", "hl-unweighted", operators_hl_unweighted),
        c!("operators", "mq-dominates", operators_mq_dominates),
        c!("operators", "omega-one", operators_omega_one),
        c!("weights", "ap-one", weights_ap_one),
        c!("weights", "duality", weights_duality),
        c!("weights", "a2-power", weights_a2_power),
        c!("weights", "power-sweep", weights_power_sweep),
        c!("weights", "reverse-holder", weights_reverse_holder),
        c!("weights", "tail-sum", weights_tail_sum),
        c!("sparse", "cz", sparse_cz),
        c!("sparse", "family", sparse_family),
        c!("sparse", "domination", sparse_domination),
        c!("sparse", "weak11", sparse_weak11),
        c!("sparse", "lemma21", sparse_lemma21),
        c!("fourier", "decay", fourier_decay),
        c!("fourier", "mollifier-symbol", fourier_mollifier_symbol),
        c!("fourier", "approximation", fourier_approximation),
        c!("experiments", "buckley", experiments_buckley),
        c!("experiments", "theorem12", experiments_theorem12),
        c!("experiments", "theorem11", experiments_theorem11),
    ]
}

/// Checks whose suite or id matches `filter` (exact suite name or id prefix).
pub fn selected(filter: Option<&str>) -> Result<Vec<CheckSpec>> {
    let all = registry();
    let Some(f) = filter else { return Ok(all) };
    let chosen: Vec<CheckSpec> = all
        .into_iter()
        .filter(|c| c.suite == f || c.id().starts_with(f))
        .collect();
    if chosen.is_empty() {
        return Err(MzError::UnknownName(format!("regression filter '{f}'")));
    }
    Ok(chosen)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Error,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub suite: String,
    pub name: String,
    pub status: CheckStatus,
    pub metrics: BTreeMap<String, f64>,
    pub messages: Vec<String>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegressionReport {
    pub version: String,
    pub filter: Option<String>,
    pub passed: usize,
    pub failed: usize,
    pub checks: Vec<CheckReport>,
}

impl RegressionReport {
    pub fn pass(&self) -> bool {
        self.failed == 0
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// JUnit-style XML, one `testsuite` per suite.
    pub fn to_junit(&self) -> String {
        let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        out += &format!(
            "<testsuites name=\"mzlab-regression\" tests=\"{}\" failures=\"{}\">\n",
            self.checks.len(),
            self.failed
        );
        for suite in SUITES {
            let cases: Vec<&CheckReport> = self.checks.iter().filter(|c| c.suite == suite).collect();
            if cases.is_empty() {
                continue;
            }
            let fails = cases.iter().filter(|c| c.status != CheckStatus::Pass).count();
            out += &format!(
                "  <testsuite name=\"{suite}\" tests=\"{}\" failures=\"{fails}\">\n",
                cases.len()
            );
            for c in cases {
                out += &format!("    <testcase classname=\"{suite}\" name=\"{}\"", xml_escape(&c.name));
                if c.status == CheckStatus::Pass {
                    out += "/>\n";
                } else {
                    let kind = if c.status == CheckStatus::Error {
                        "error"
                    } else {
                        "failure"
                    };
                    out += &format!(
                        ">\n      <{kind} message=\"{}\"/>\n    </testcase>\n",
                        xml_escape(&c.messages.join("; "))
                    );
                }
            }
            out += "  </testsuite>\n";
        }
        out += "</testsuites>\n";
        out
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

struct Outcome {
    status: CheckStatus,
    metrics: BTreeMap<String, f64>,
    messages: Vec<String>,
    notes: Vec<String>,
}

fn run_one(spec: &CheckSpec) -> Outcome {
    match (spec.run)() {
        Ok(out) => Outcome {
            status: if out.failures.is_empty() {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            },
            metrics: out.metrics.into_iter().collect(),
            messages: out.failures,
            notes: out.notes,
        },
        Err(e) => Outcome {
            status: CheckStatus::Error,
            metrics: BTreeMap::new(),
            messages: vec![e.to_string()],
            notes: Vec::new(),
        },
    }
}

/// Runs the selected checks and compares every metric against `store`.
pub fn full_regression(store: &GoldenStore, filter: Option<&str>) -> Result<RegressionReport> {
    let mut checks = Vec::new();
    for spec in selected(filter)? {
        let id = spec.id();
        log::info!("regression check {id}");
        let Outcome {
            mut status,
            metrics,
            mut messages,
            notes,
        } = run_one(&spec);
        for (k, v) in &metrics {
            let key = format!("{id}/{k}");
            match store.values.get(&key) {
                None => messages.push(format!("{key}: no golden value")),
                Some(&g) if !store.matches(g, *v) => messages.push(format!("{key}: got {v}, golden {g}")),
                Some(_) => continue,
            }
            if status == CheckStatus::Pass {
                status = CheckStatus::Fail;
            }
        }
        checks.push(CheckReport {
            suite: spec.suite.into(),
            name: spec.name.into(),
            status,
            metrics,
            messages,
            notes,
        });
    }
    let failed = checks.iter().filter(|c| c.status != CheckStatus::Pass).count();
    Ok(RegressionReport {
        version: env!("CARGO_PKG_VERSION").into(),
        filter: filter.map(str::to_string),
        passed: checks.len() - failed,
        failed,
        checks,
    })
}

/// Computes the selected metrics and merges them into `store`. Checks whose
/// properties fail are still recorded; the returned list names them.
pub fn generate_goldens(store: &mut GoldenStore, filter: Option<&str>) -> Result<Vec<String>> {
    let mut problems = Vec::new();
    for spec in selected(filter)? {
        let id = spec.id();
        let out = run_one(&spec);
        if out.status == CheckStatus::Error {
            return Err(MzError::InvalidArgument(format!("{id}: {}", out.messages.join("; "))));
        }
        if out.status == CheckStatus::Fail {
            problems.push(format!("{id}: {}", out.messages.join("; ")));
        }
        for (k, v) in out.metrics {
            store.values.insert(format!("{id}/{k}"), v);
        }
    }
    Ok(problems)
}

// Pinned configurations.

fn desk_grid() -> GridSpec {
    GridSpec::new(8.0, 256).expect("valid pinned grid")
}

fn quad(grid: &GridSpec) -> Result<QuadratureSpec> {
    QuadratureSpec::for_grid(grid, 4)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

const EQUIV_KERNELS: [&str; 4] = ["cos", "sin3", "step", "sing-q4"];
const PINNED_SEED: u64 = 7;
const PINNED_BANK: usize = 2000;

fn field_disk_area() -> Result<CheckOutput> {
    let mut o = CheckOutput::default();
    let g = GridSpec::new(4.0, 256)?;
    let f = sample(g, |x| if x[0].hypot(x[1]) <= 1.0 { 1.0 } else { 0.0 })?;
    let area = o.metric("area", lp_norm(&f, 1.0)?);
    o.require(rel(area, PI) <= 0.02, || {
        format!("disk area {area} not within 2% of pi")
    });
    Ok(o)
}

fn gaussian_weighted(n: usize) -> Result<f64> {
    let g = GridSpec::new(4.0, n)?;
    let f = sample(g, |x| (-(x[0] * x[0] + x[1] * x[1])).exp())?;
    weighted_lp_norm(&f, &power_weight(1.0, 2.0, g)?, 2.0)
}

fn field_weighted_gaussian() -> Result<CheckOutput> {
    let mut o = CheckOutput::default();
    let coarse = o.metric("n256", gaussian_weighted(256)?);
    let fine = o.metric("n2048", gaussian_weighted(2048)?);
    o.require(rel(coarse, fine) <= 0.02, || {
        format!("N=256 value {coarse} vs N=2048 {fine}")
    });
    Ok(o)
}

fn sphere_cos_l2() -> Result<CheckOutput> {
    let mut o = CheckOutput::default();
    let v = o.metric("norm", lq_sphere_norm(&bank_kernel_with("cos", 1 << 16)?, 2.0)?);
    o.require(rel(v, PI.sqrt()) <= 1e-6, || format!("||cos||_2 = {v}"));
    Ok(o)
}

fn sphere_sing_divergence() -> Result<CheckOutput> {
    let mut o = CheckOutput::default();
    let mut l4 = Vec::new();
    let mut l2 = Vec::new();
    for e in [10, 12, 14, 16] {
        let k = bank_kernel_with("sing-q2", 1 << e)?;
        l4.push(lq_sphere_norm(&k, 4.0)?);
        l2.push(lq_sphere_norm(&k, 2.0)?);
    }
    o.metric("l4_growth", l4[3] / l4[0]);
    o.metric("l2_drift", l2[3] / l2[0]);
    o.require(l4.windows(2).all(|w| w[1] > w[0] * 1.05), || {
        format!("L4 norms not diverging: {l4:?}")
    });
    o.require(rel(l2[3], l2[2]) < 0.05, || format!("L2 norms not settling: {l2:?}"));
    Ok(o)
}

fn kernels_mass_one() -> Result<CheckOutput> {
    let mut o = CheckOutput::default();
    let one = AngularKernel::from_fn("one", 4096, f64::INFINITY, |_| 1.0)?;
    let k = build_k_jt(&one, 0, 2.0, desk_grid())?;
    let mass = o.metric("mass", k.field.abs().integral());
    o.require(rel(mass, 2.0 * PI) <= 0.03, || format!("mass {mass} vs 2 pi"));
    Ok(o)
}

fn kernels_mollifier_moment() -> Result<CheckOutput> {
    let mut o = CheckOutput::default();
    let g = desk_grid();
    let mut moments = Vec::new();
    for l in 0..=3 {
        let phi = build_mollifier(l, g)?;
        let m: f64 = phi
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
        moments.push(m);
    }
    for (k, w) in moments.windows(2).enumerate() {
        let r = o.metric(format!("ratio_l{k}"), w[1] / w[0]);
        o.require((r - 2.0).abs() <= 0.1, || format!("moment ratio {r} at l={k}"));
    }
    Ok(o)
}

fn kernels_tent() -> Result<CheckOutput> {
    let mut o = CheckOutput::default();
    let g = GridSpec::new(4.0, 128)?;
    let boxf = sample(g, |x| if x[0].abs() < 1.0 && x[1].abs() < 1.0 { 1.0 } else { 0.0 })?;
    let conv = spectral_convolve(&boxf, &boxf)?;
    let tent = |s: f64| (2.0 - s.abs()).max(0.0);
    let err = conv
        .values()
        .iter()
        .enumerate()
        .map(|(k, v)| {
            // output cell k approximates the convolution at x_k + h/2
            let x = g.point(k);
            let c = 0.5 * g.spacing();
            (v - tent(x[0] + c) * tent(x[1] + c)).abs()
        })
        .fold(0.0, f64::max);
    o.metric("max_error", err);
    o.require(err <= 1e-6, || format!("tent error {err}"));
    Ok(o)
}

fn kernels_regularity() -> Result<CheckOutput> {
    let mut o = CheckOutput::default();
    let g = GridSpec::new(8.0, 512)?;
    let qd = quad(&g)?;
    let omega = bank_kernel("cos")?.normalized()?;
    let radius = 0.5;
    let mut worst = 0.0f64;
    for k in 0..=2 {
        let near = regularity_sum_check(&omega, 2, radius, [radius / 16.0, 0.0], k, 4.0, &qd, g)?;
        let far = regularity_sum_check(&omega, 2, radius, [radius / 8.0, 0.0], k, 4.0, &qd, g)?;
        worst = worst.max(near.ratio).max(far.ratio);
        let growth = o.metric(format!("doubling_k{k}"), far.sum / near.sum);
        let msg = || format!("doubling ratio {growth} at k={k}");
        if k <= 1 {
            o.require((1.3..=2.7).contains(&growth), msg);
        } else {
            // the k = 2 annulus only meets the truncation edge of the top scale
            o.expect((1.3..=2.7).contains(&growth), msg);
        }
    }
    let c = o.metric("constant", worst);
    o.require(c <= 50.0, || format!("regularity constant {c} exceeds 50"));
    Ok(o)
}

/// Range of `||M~ f||_2 / ||M f||_2` over the full scene bank and four kernels.
pub fn equivalence_range(grid: GridSpec) -> Result<(f64, f64)> {
    let qd = quad(&grid)?;
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for name in EQUIV_KERNELS {
        let om = bank_kernel(name)?.normalized()?;
        let marc = SquarePlan::marcinkiewicz(&om, grid, &qd)?;
        let dy = SquarePlan::dyadic(&om, grid, &qd)?;
        for s in SCENE_NAMES {
            let f = scene(s, grid)?;
            let r = lp_norm(&dy.apply(&f)?.field, 2.0)? / lp_norm(&marc.apply(&f)?.field, 2.0)?;
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    Ok((lo, hi))
}

fn operators_equivalence() -> Result<CheckOutput> {
    let mut o = CheckOutput::default();
    let (lo, hi) = equivalence_range(desk_grid())?;
    o.metric("c1", lo);
    o.metric("c2", hi);
    o.require(lo >= 0.25 && hi <= 4.0, || format!("ratios span [{lo}, {hi}]"));
    Ok(o)
}

/// `||T_{4h} f - T_{8h} f||_2 / ||T_{4h} f||_2` on the Gaussian scene.
pub fn eps_halving_change(grid: GridSpec) -> Result<f64> {
    let h = grid.spacing();
    let om = bank_kernel("cos")?;
    let f = scene("gaussian", grid)?;
    let outer = grid.half_width() / 2.0;
    let fine = rough_singular_integral(&om, &f, 4.0 * h, outer)?;
    let coarse = rough_singular_integral(&om, &f, 8.0 * h, outer)?;
    Ok(lp_norm(&fine.sub(&coarse)?, 2.0)? / lp_norm(&fine, 2.0)?)
}

fn operators_tsing_eps() -> Result<CheckOutput> {
    let mut o = CheckOutput::default();
    let desk = o.metric("change_n256", eps_halving_change(desk_grid())?);
    let fine = o.metric("change_n512", eps_halving_change(GridSpec::new(8.0, 512)?)?);
    o.require(fine <= 0.6 * desk, || {
        format!("no first-order convergence: {desk} -> {fine}")
    });
    o.expect(desk < 0.05, || {
        format!("eps halving changes the N=256 output by {desk}")
    });
    Ok(o)
}

fn operators_hl_unweighted() -> Result<CheckOutput> {
    let mut o = CheckOutput::default();
    let g = desk_grid();
    let w = Weight::constant(g, 1.0)?;
    let mut vals = Vec::new();
    for seed in [PINNED_SEED, PINNED_SEED + 1] {
        let cfg = ExperimentConfig {
            seed,
            ..ExperimentConfig::default()
        };
        let est = operator_norm_estimate(&NormOp::HardyLittlewood, &w, 2.0, &cfg)?;
        vals.push(o.metric(format!("seed{seed}"), est.value));
    }
    o.require(vals.iter().all(|&v| v >= 1.0), || {
        format!("estimates below 1: {vals:?}")
    });
    o.require(rel(vals[1], vals[0]) <= 0.1, || format!("seed instability: {vals:?}"));
    Ok(o)
}

fn operators_mq_dominates() -> Result<CheckOutput> {
    let mut o = CheckOutput::default();
    let g = desk_grid();
    let mut worst = 0.0f64;
    for s in ["gaussian", "two-bump", "annulus-bump"] {
        let f = scene(s, g)?;
        let m = hl_maximal(&f);
        let mq = mq_maximal(&f, 2.0)?;
        let scale = m.max_abs();
        for (a, b) in mq.values().iter().zip(m.values()) {
            worst = worst.max((b - a) / scale);
        }
    }
    o.metric("worst_deficit", worst);
    o.require(worst <= 1e-12, || format!("M_2 f below M f by {worst}"));
    Ok(o)
}

/// Centered ball maximal function over radii `2h * 1.25^k < L` and `L`.
pub fn dense_ball_maximal(f: &SampledField) -> Result<SampledField> {
    let grid = *f.grid();
    let abs_f = f.abs();
    let mut out = vec![0.0f64; grid.len()];
    let mut radii = Vec::new();
    let mut r = 2.0 * grid.spacing();
    while r < grid.half_width() {
        radii.push(r);
        r *= 1.25;
    }
    radii.push(grid.half_width());
    for r in radii {
        let mut s = Stencil::from_fn(grid, r, |z| if z[0].hypot(z[1]) <= r { 1.0 } else { 0.0 })?;
        let count = s.entries().filter(|e| e.2 > 0.0).count();
        s.scale(1.0 / (count as f64 * grid.cell_volume()));
        for (o, v) in out.iter_mut().zip(convolve_stencil(&abs_f, &s)?.values()) {
            *o = o.max(*v);
        }
    }
    SampledField::from_values(grid, out)
}

fn operators_omega_one() -> Result<CheckOutput> {
    let mut o = CheckOutput::default();
    let g = desk_grid();
    let one = AngularKernel::from_fn("one", 4096, f64::INFINITY, |_| 1.0)?;
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for s in ["gaussian", "disk", "two-bump", "spike"] {
        let f = scene(s, g)?;
        let a = omega_maximal(&one, &f)?;
        let b = dense_ball_maximal(&f)?;
        let floor = 1e-3 * b.max_abs();
        for (x, y) in a.values().iter().zip(b.values()) {
            if *y > floor {
                lo = lo.min(x / y);
                hi = hi.max(x / y);
            }
        }
    }
    o.metric("min_ratio", lo);
    o.metric("max_ratio", hi);
    o.require(lo >= 0.25 && hi <= 4.0, || {
        format!("ball vs cube maximal ratios [{lo}, {hi}]")
    });
    Ok(o)
}

fn bank(grid: &GridSpec) -> CubeBank {
    CubeBank::standard(grid, PINNED_BANK, PINNED_SEED)
}

fn weights_ap_one() -> Result<CheckOutput> {
    let mut o = CheckOutput::default();
    let g = desk_grid();
    let w = Weight::constant(g, 1.0)?;
    for p in [1.5, 2.0, 4.0] {
        let v = o.metric(format!("p{p}"), ap_constant(&w, p, &bank(&g))?);
        o.require((v - 1.0).abs() <= 1e-6, || format!("[1]_A{p} = {v}"));
    }
    Ok(o)
}

fn weights_duality() -> Result<CheckOutput> {
    let mut o = CheckOutput::default();
    let g = desk_grid();
    let b = bank(&g);
    let p = 3.0;
    let w = power_weight(0.5, p, g)?;
    let lhs = ap_constant(&w, p, &b)?.powf(1.0 / (p - 1.0));
    let rhs = ap_constant(&w.dual(p)?, p / (p - 1.0), &b)?;
    let r = o.metric("ratio", lhs / rhs);
    o.require((r - 1.0).abs() <= 0.01, || format!("duality ratio {r}"));
    Ok(o)
}

fn weights_a2_power() -> Result<CheckOutput> {
    let mut o = CheckOutput::default();
    let g = GridSpec::new(4.0, 512)?;
    let w = power_weight(1.0, 2.0, g)?;
    let v = o.metric(
        "a2",
        ap_constant(&w, 2.0, &CubeBank::standard(&g, 10_000, PINNED_SEED))?,
    );
    o.require(v > 1.0, || format!("[|x|]_A2 = {v}"));
    Ok(o)
}

fn weights_power_sweep() -> Result<CheckOutput> {
    let mut o = CheckOutput::default();
    let g = desk_grid();
    let b = bank(&g);
    let mut prev: Option<(f64, f64, f64)> = None;
    let mut cn = 0.0f64;
    for a in [0.0, 0.25, 0.5, 1.0, 1.5] {
        let c = composite_constants(&power_weight(a, 2.0, g)?, 2.0, 2.0, &b)?;
        o.metric(format!("a{a}_ap"), c.ap);
        o.metric(format!("a{a}_ainf"), c.ainf);
        o.metric(format!("a{a}_curly"), c.curly);
        cn = cn.max(c.ainf / c.ap);
        if let Some((ap, ainf, curly)) = prev {
            o.require(c.ap > ap, || format!("A2 not increasing at a={a}"));
            o.require(c.ainf >= ainf, || format!("Ainf not monotone at a={a}"));
            o.require(c.curly >= curly, || format!("curly not monotone at a={a}"));
        }
        prev = Some((c.ap, c.ainf, c.curly));
    }
    o.metric("ainf_over_ap", cn);
    Ok(o)
}

fn weights_reverse_holder() -> Result<CheckOutput> {
    let mut o = CheckOutput::default();
    let g = desk_grid();
    let b = bank(&g);
    let mut prev = f64::INFINITY;
    for a in [0.25, 0.5, 1.0, 1.5] {
        let rh = reverse_holder_check(&power_weight(a, 2.0, g)?, 2.0, 0.25, &b)?;
        let eps = o.metric(format!("a{a}_eps"), rh.eps);
        o.metric(format!("a{a}_ratio"), rh.lhs / rh.rhs);
        o.require(rh.holds, || {
            format!("reverse Hoelder step fails at a={a}: {} > 4 * {}", rh.lhs, rh.rhs)
        });
        o.require(eps < prev, || format!("eps not decreasing at a={a}"));
        prev = eps;
    }
    Ok(o)
}

fn weights_tail_sum() -> Result<CheckOutput> {
    let mut o = CheckOutput::default();
    let s = o.metric("s11", tail_sum_check(1.0, 1.0)?.sum);
    o.require((s - 2.5630).abs() <= 1e-3, || format!("S(1,1) = {s}"));
    for rho in [0.25, 0.5, 1.0] {
        let mut sup = 0.0f64;
        for k in 0..=30 {
            let eps = 10f64.powf(-3.0 + 3.0 * k as f64 / 30.0);
            sup = sup.max(tail_sum_check(eps, rho)?.sum_times_eps);
        }
        o.require(sup.is_finite(), || format!("sup eps S infinite at rho={rho}"));
        o.metric(format!("sup_eps_s_rho{rho}"), sup);
    }
    Ok(o)
}

fn sparse_cz() -> Result<CheckOutput> {
    let mut o = CheckOutput::default();
    let g = desk_grid();
    let f = scene("two-bump", g)?;
    let cz = cz_decompose(&f, 0.05, &DyadicGridSpec::standard(&g))?;
    let mut recon = cz.good.clone();
    let mut worst_mean = 0.0f64;
    for b in &cz.bad_parts {
        recon = recon.add(&b.to_field(g))?;
        worst_mean = worst_mean.max(b.mean().abs());
    }
    let err = recon.sub(&f)?.max_abs();
    o.metric("cubes", cz.cubes.len() as f64);
    o.metric("reconstruction", err);
    o.metric("bad_mean", worst_mean);
    o.require(err <= 1e-12, || format!("reconstruction error {err}"));
    o.require(worst_mean <= 1e-10, || format!("bad part mean {worst_mean}"));
    Ok(o)
}

fn sparse_family() -> Result<CheckOutput> {
    let mut o = CheckOutput::default();
    let g = desk_grid();
    for s in ["gaussian", "spike"] {
        let fam = build_sparse_family(&scene(s, g)?.abs(), &DyadicGridSpec::standard(&g), 0.5)?;
        o.metric(format!("{s}_members"), fam.members.len() as f64);
        if let Err((cube, frac)) = fam.verify() {
            o.failures.push(format!("{s}: cube {cube:?} keeps {frac}"));
        }
    }
    Ok(o)
}

/// Domination constants for `cos` on a scene subset at levels `ls`.
pub fn domination_constants(grid: GridSpec, ls: &[i32]) -> Result<Vec<f64>> {
    let qd = quad(&grid)?;
    let om = bank_kernel("cos")?.normalized()?;
    let base = SquarePlan::dyadic(&om, grid, &qd)?;
    let mut out = Vec::new();
    for &l in ls {
        let plan = SquarePlan::mollify(&base, l)?;
        let mut c = 0.0f64;
        for s in ["gaussian", "two-bump", "disk"] {
            let d = sparse_domination_check(&plan, &scene(s, grid)?, 0.5, 1.0)?;
            if !d.flagged_cells.is_empty() {
                return Err(MzError::Hypothesis(format!("{s}: domination denominator vanishes")));
            }
            c = c.max(d.constant);
        }
        out.push(c);
    }
    Ok(out)
}

fn sparse_domination() -> Result<CheckOutput> {
    let mut o = CheckOutput::default();
    let fine = domination_constants(desk_grid(), &[1, 2])?;
    let coarse = domination_constants(GridSpec::new(8.0, 128)?, &[1])?;
    o.metric("l1_n256", fine[0]);
    o.metric("l2_n256", fine[1]);
    o.metric("l1_n128", coarse[0]);
    o.require(fine.iter().all(|c| c.is_finite()), || "infinite constant".into());
    o.require(rel(coarse[0], fine[0]) <= 0.25, || {
        format!("N stability {} vs {}", coarse[0], fine[0])
    });
    o.require(fine[1] <= 2.5 * fine[0], || {
        format!("l doubling growth {}", fine[1] / fine[0])
    });
    Ok(o)
}

/// Largest `lambda |{M~^l f > lambda}| / (l ||f||_1)` on the spike scene for each `l`.
pub fn weak11_constants(grid: GridSpec, ls: &[i32]) -> Result<Vec<f64>> {
    let qd = quad(&grid)?;
    let om = bank_kernel("cos")?.normalized()?;
    let base = SquarePlan::dyadic(&om, grid, &qd)?;
    let f = scene("spike", grid)?;
    let top = base.apply(&f)?.field.max_abs();
    let levels = geometric_levels(1e-3 * top, top, 24);
    ls.iter()
        .map(|&l| Ok(weak11_check(&SquarePlan::mollify(&base, l)?, &f, &levels)?.max_ratio_over_l))
        .collect()
}

fn sparse_weak11() -> Result<CheckOutput> {
    let mut o = CheckOutput::default();
    let ls = [1, 2, 4];
    let cs = weak11_constants(desk_grid(), &ls)?;
    for (l, c) in ls.iter().zip(&cs) {
        o.metric(format!("l{l}"), *c);
    }
    let chat = o.metric("c_hat", cs.iter().cloned().fold(0.0, f64::max));
    o.require(chat.is_finite() && chat > 0.0, || format!("C = {chat}"));
    Ok(o)
}

fn sparse_lemma21() -> Result<CheckOutput> {
    let mut o = CheckOutput::default();
    let g = desk_grid();
    let b = bank(&g);
    let f = scene("gaussian", g)?;
    let fam = build_sparse_family(&f.abs(), &DyadicGridSpec::standard(&g), 0.5)?;
    let mut worst = 0.0f64;
    for a in [0.0, 0.5, 1.0, 1.5] {
        let c = lemma21_bound_check(&fam, &f, &power_weight(a, 2.0, g)?, 2.0, 1.0, &b, 4.0)?;
        worst = worst.max(o.metric(format!("a{a}"), c.ratio));
    }
    o.metric("c_hat", worst);
    o.require(worst.is_finite(), || "infinite ratio".into());
    Ok(o)
}

fn fourier_decay() -> Result<CheckOutput> {
    let mut o = CheckOutput::default();
    let g = desk_grid();
    for name in ["cos", "sin3", "step", "sing-q2", "sing-q4"] {
        let om = bank_kernel(name)?;
        for j in [-1, 0] {
            let d = decay_summary(&om, j, 1.5, g)?;
            o.metric(format!("{name}_j{j}_rise"), d.rise_slope);
            o.metric(format!("{name}_j{j}_tail"), d.tail_slope);
            o.require(d.rise_slope >= 0.8, || {
                format!("{name} j={j}: rise slope {}", d.rise_slope)
            });
            o.require(d.tail_slope <= -0.1, || {
                format!("{name} j={j}: tail slope {}", d.tail_slope)
            });
            if j == -1 {
                let c = o.metric(format!("{name}_collapse"), d.collapse);
                o.require(c <= 0.1, || format!("{name}: collapse defect {c}"));
            }
        }
    }
    Ok(o)
}

fn fourier_mollifier_symbol() -> Result<CheckOutput> {
    let mut o = CheckOutput::default();
    let g = desk_grid();
    let mut worst = 0.0f64;
    for l in 1..=5 {
        worst = worst.max(o.metric(format!("l{l}"), mollifier_symbol_check(l, 0.5, g)?.max_ratio));
    }
    o.metric("c_hat", worst);
    o.require(worst.is_finite(), || "infinite ratio".into());
    Ok(o)
}

/// Approximation decay on the refined grid used for the approximation law.
pub fn approximation_run(omega: &str) -> Result<crate::fourier::ApproxDecay> {
    let g = GridSpec::new(8.0, 512)?;
    let scenes: Vec<SampledField> = ["gaussian", "two-bump", "disk"]
        .iter()
        .map(|s| scene(s, g))
        .collect::<Result<_>>()?;
    approximation_decay(
        &bank_kernel(omega)?.normalized()?,
        &scenes,
        &[1, 2, 3, 4, 5],
        &quad(&g)?,
    )
}

fn fourier_approximation() -> Result<CheckOutput> {
    let mut o = CheckOutput::default();
    let r = approximation_run("cos")?;
    let theta = o.metric("theta", r.theta_operator);
    o.metric("theta_energy", r.theta_energy);
    let agree = o.metric("agreement", r.agreement);
    o.require(theta > 0.2, || format!("theta {theta}"));
    o.require(agree <= 0.05, || format!("space/frequency disagreement {agree}"));
    Ok(o)
}

fn small_sweep_config() -> ExperimentConfig {
    ExperimentConfig {
        bank_random: PINNED_BANK,
        seed: PINNED_SEED,
        a_grid: Some(vec![0.0, 0.6, 1.2, 1.6]),
        ..ExperimentConfig::default()
    }
}

fn experiments_buckley() -> Result<CheckOutput> {
    let mut o = CheckOutput::default();
    let r = buckley_sweep(&small_sweep_config())?;
    let fit = r.fit.clone().ok_or_else(|| MzError::InvalidArgument("no fit".into()))?;
    o.metric("beta", fit.slope);
    o.metric("a0_norm", r.rows[0].norm);
    o.require(r.pass, || format!("beta {} over budget {}", fit.slope, r.budget));
    Ok(o)
}

fn experiments_theorem12() -> Result<CheckOutput> {
    let mut o = CheckOutput::default();
    let r = theorem12_sweep(&small_sweep_config())?;
    let fit = r.fit.clone().ok_or_else(|| MzError::InvalidArgument("no fit".into()))?;
    o.metric("beta", fit.slope);
    for row in &r.rows {
        o.metric(format!("a{}_norm", row.a), row.norm);
    }
    o.require(r.pass, || {
        format!("sweep failed: beta {}, rows_pass {}", fit.slope, r.rows_pass)
    });
    Ok(o)
}

fn experiments_theorem11() -> Result<CheckOutput> {
    let mut o = CheckOutput::default();
    let cfg = ExperimentConfig {
        a_grid: Some(vec![0.0, 0.9]),
        ..small_sweep_config()
    };
    let r = theorem11_sweep(&cfg)?;
    for row in &r.rows {
        o.metric(format!("a{}_norm", row.a), row.norm);
    }
    o.require(r.rows[0].norm.is_finite(), || "unweighted row not finite".into());
    o.require(r.rows_pass, || "a row exceeds its bound".into());
    Ok(o)
}
