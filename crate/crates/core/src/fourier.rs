//! Continuous-transform approximations: kernel symbols, shell decay
//! profiles, the mollifier symbol estimate, and the L² approximation law of
//! the mollified square function.

use rustfft::num_complex::Complex64;
use serde::Serialize;

use crate::error::{MzError, Result};
use crate::field::{lp_norm, GridSpec, QuadratureSpec, SampledField};
use crate::kernels::{build_k_jt, build_mollifier, TruncatedKernel};
use crate::numeric::{linear_fit, LinearFit};
use crate::operators::SquarePlan;
use crate::parallel::{map_vec, pairwise_sum};
use crate::spectral::Fft2;
use crate::sphere::{lq_sphere_norm, AngularKernel};

/// `hat g(xi) = int g(x) e^{-2 pi i x . xi} dx` on the lattice
/// `xi = m / (2L)`, `m in [-N/2, N/2)^2`, stored row-major with `m = -N/2` first.
#[derive(Debug, Clone)]
pub struct FrequencyField {
    grid: GridSpec,
    data: Vec<Complex64>,
}

impl FrequencyField {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    /// Frequency spacing `1 / (2L)`.
    pub fn spacing(&self) -> f64 {
        0.5 / self.grid.half_width()
    }

    pub fn xi(&self, idx: usize) -> [f64; 2] {
        let n = self.grid.resolution();
        let half = (n / 2) as f64;
        let d = self.spacing();
        [((idx / n) as f64 - half) * d, ((idx % n) as f64 - half) * d]
    }

    pub fn zero_index(&self) -> usize {
        let n = self.grid.resolution();
        (n / 2) * n + n / 2
    }

    pub fn at_zero(&self) -> Complex64 {
        self.data[self.zero_index()]
    }

    /// `(sum |hat g|^2 dxi^n)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        let d = self.spacing();
        let sq: Vec<f64> = self.data.iter().map(|c| c.norm_sqr()).collect();
        (pairwise_sum(&sq) * d * d).sqrt()
    }

    /// Inverse transform back to the cell-centered samples.
    pub fn inverse(&self) -> SampledField {
        let n = self.grid.resolution();
        let phase = phases(&self.grid);
        let vol = self.grid.cell_volume();
        let mut buf = vec![Complex64::new(0.0, 0.0); n * n];
        for m0 in 0..n {
            for m1 in 0..n {
                let src = m0 * n + m1;
                let k0 = (m0 + n / 2) % n;
                let k1 = (m1 + n / 2) % n;
                buf[k0 * n + k1] = self.data[src] / (phase[m0] * phase[m1] * vol);
            }
        }
        Fft2::plan(n).inverse(&mut buf);
        SampledField::from_values_unchecked(self.grid, buf.into_iter().map(|c| c.re).collect())
    }
}

/// `e^{-2 pi i (-L + h/2) xi_m}` for centered frequency index `m`.
fn phases(grid: &GridSpec) -> Vec<Complex64> {
    let n = grid.resolution();
    let x0 = -grid.half_width() + 0.5 * grid.spacing();
    let d = 0.5 / grid.half_width();
    (0..n)
        .map(|m| {
            let xi = (m as f64 - (n / 2) as f64) * d;
            Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * x0 * xi)
        })
        .collect()
}

/// Riemann approximation of the continuous transform of a sampled field.
pub fn field_symbol(f: &SampledField) -> FrequencyField {
    let grid = *f.grid();
    let n = grid.resolution();
    let mut buf: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    Fft2::plan(n).forward(&mut buf);
    let phase = phases(&grid);
    let vol = grid.cell_volume();
    let mut data = vec![Complex64::new(0.0, 0.0); n * n];
    for m0 in 0..n {
        for m1 in 0..n {
            let k0 = (m0 + n / 2) % n;
            let k1 = (m1 + n / 2) % n;
            data[m0 * n + m1] = buf[k0 * n + k1] * phase[m0] * phase[m1] * vol;
        }
    }
    FrequencyField { grid, data }
}

/// Symbol of `K_t^j`; its value at `xi = 0` is the discrete integral of `K`.
pub fn kernel_symbol(k: &TruncatedKernel) -> FrequencyField {
    field_symbol(&k.field)
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileRow {
    /// `|2^j xi|` at the shell maximum.
    pub radius: f64,
    pub magnitude: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayProfile {
    pub omega: String,
    pub j: i32,
    pub t: f64,
    pub rows: Vec<ProfileRow>,
}

impl DecayProfile {
    pub fn max_magnitude(&self) -> f64 {
        self.rows.iter().map(|r| r.magnitude).fold(0.0, f64::max)
    }

    /// Log-log fit over rows with radius in `[lo, hi]`.
    pub fn fit(&self, lo: f64, hi: f64) -> Option<LinearFit> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = self
            .rows
            .iter()
            .filter(|r| r.radius >= lo && r.radius <= hi && r.magnitude > 0.0)
            .map(|r| (r.radius.ln(), r.magnitude.ln()))
            .unzip();
        linear_fit(&xs, &ys)
    }

    /// Magnitude interpolated log-linearly at `radius`.
    pub fn at(&self, radius: f64) -> Option<f64> {
        let rows = &self.rows;
        let k = rows.iter().position(|r| r.radius >= radius)?;
        if k == 0 {
            return (rows[0].radius == radius).then_some(rows[0].magnitude);
        }
        let (a, b) = (&rows[k - 1], &rows[k]);
        let s = (radius.ln() - a.radius.ln()) / (b.radius.ln() - a.radius.ln());
        Some((a.magnitude.ln() * (1.0 - s) + b.magnitude.ln() * s).exp())
    }
}

/// Shell maxima of `|hat K_t^j|` binned geometrically in `|2^j xi|` between
/// the first nonzero frequency and the inscribed Nyquist radius, divided by
/// `||Omega||_{L^q}` at the kernel's class exponent.
pub fn decay_profile(omega: &AngularKernel, j: i32, t: f64, shells: usize, grid: GridSpec) -> Result<DecayProfile> {
    if shells < 8 {
        return Err(MzError::InvalidArgument(format!(
            "need at least 8 shells, got {shells}"
        )));
    }
    let k = build_k_jt(omega, j, t, grid)?;
    let sym = kernel_symbol(&k);
    let norm = lq_sphere_norm(omega, omega.q_class())?;
    let norm = if norm > 0.0 { norm } else { 1.0 };
    let scale = 2f64.powi(j);
    let lo = sym.spacing() * scale;
    let hi = sym.spacing() * (grid.resolution() / 2) as f64 * scale;
    let ratio = (hi / lo).ln() / shells as f64;
    let mut best: Vec<Option<(f64, f64)>> = vec![None; shells];
    for (idx, c) in sym.data().iter().enumerate() {
        let [a, b] = sym.xi(idx);
        let r = a.hypot(b) * scale;
        if r < lo * (1.0 - 1e-12) || r > hi * (1.0 + 1e-12) {
            continue;
        }
        let s = (((r / lo).ln() / ratio) as usize).min(shells - 1);
        let m = c.norm();
        match best[s] {
            Some((_, bm)) if bm >= m => {}
            _ => best[s] = Some((r, m)),
        }
    }
    Ok(DecayProfile {
        omega: omega.name().to_string(),
        j,
        t,
        rows: best
            .into_iter()
            .flatten()
            .map(|(radius, m)| ProfileRow {
                radius,
                magnitude: m / norm,
            })
            .collect(),
    })
}

/// `max_m |hat K^{j+1}(xi_m) - hat K^j(2 xi_m)| / max |hat K^j|` over lattice
/// frequencies whose double stays on the lattice: the scale-invariance defect.
pub fn symbol_collapse(omega: &AngularKernel, j: i32, t: f64, grid: GridSpec) -> Result<f64> {
    let a = kernel_symbol(&build_k_jt(omega, j, t, grid)?);
    let b = kernel_symbol(&build_k_jt(omega, j + 1, t, grid)?);
    let n = grid.resolution() as i64;
    let half = n / 2;
    let at = |m0: i64, m1: i64| ((m0 + half) * n + (m1 + half)) as usize;
    let mut defect = 0.0f64;
    for m0 in -n / 4..n / 4 {
        for m1 in -n / 4..n / 4 {
            defect = defect.max((b.data[at(m0, m1)] - a.data[at(2 * m0, 2 * m1)]).norm());
        }
    }
    let peak = a.data.iter().map(|c| c.norm()).fold(0.0, f64::max);
    Ok(if peak > 0.0 { defect / peak } else { 0.0 })
}

#[derive(Debug, Clone, Serialize)]
pub struct DecaySummary {
    pub omega: String,
    pub j: i32,
    pub t: f64,
    /// Log-log slope over the first three shells.
    pub rise_slope: f64,
    /// Log-log slope over `|2^j xi| >= 1`.
    pub tail_slope: f64,
    pub tail_r_squared: f64,
    pub collapse: f64,
}

pub fn decay_summary(omega: &AngularKernel, j: i32, t: f64, grid: GridSpec) -> Result<DecaySummary> {
    let profile = decay_profile(omega, j, t, 24, grid)?;
    let rows = &profile.rows;
    if rows.len() < 4 {
        return Err(MzError::Unresolvable(format!("only {} nonempty shells", rows.len())));
    }
    let rise = profile
        .fit(rows[0].radius, rows[2].radius)
        .ok_or_else(|| MzError::Unresolvable("degenerate rise fit".into()))?;
    let tail = profile
        .fit(1.0, f64::INFINITY)
        .ok_or_else(|| MzError::Unresolvable("no shells beyond |2^j xi| = 1".into()))?;
    Ok(DecaySummary {
        omega: omega.name().to_string(),
        j,
        t,
        rise_slope: rise.slope,
        tail_slope: tail.slope,
        tail_r_squared: tail.r_squared,
        collapse: symbol_collapse(omega, j, t, grid)?,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MollifierSymbolCheck {
    pub l: i32,
    pub varsigma: f64,
    pub max_ratio: f64,
    /// `|2^l xi|` where the ratio peaks.
    pub argmax_radius: f64,
    pub symbol_at_zero: f64,
    pub max_symbol: f64,
}

/// `max_{xi != 0} |hat phi_l(xi) - 1| / min(1, |2^l xi|^varsigma)`.
pub fn mollifier_symbol_check(l: i32, varsigma: f64, grid: GridSpec) -> Result<MollifierSymbolCheck> {
    if !(varsigma > 0.0 && varsigma < 1.0) {
        return Err(MzError::InvalidArgument(format!(
            "varsigma must lie in (0, 1), got {varsigma}"
        )));
    }
    let phi = build_mollifier(l, grid)?;
    let sym = field_symbol(&phi.field);
    let zero = sym.zero_index();
    let scale = 2f64.powi(l);
    let mut max_ratio = 0.0;
    let mut argmax_radius = 0.0;
    let mut max_symbol = 0.0f64;
    for (idx, c) in sym.data().iter().enumerate() {
        max_symbol = max_symbol.max(c.norm());
        if idx == zero {
            continue;
        }
        let [a, b] = sym.xi(idx);
        let r = a.hypot(b) * scale;
        let ratio = (c - 1.0).norm() / r.powf(varsigma).min(1.0);
        if ratio > max_ratio {
            max_ratio = ratio;
            argmax_radius = r;
        }
    }
    Ok(MollifierSymbolCheck {
        l,
        varsigma,
        max_ratio,
        argmax_radius,
        symbol_at_zero: sym.at_zero().re,
        max_symbol,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ApproxRow {
    pub scene: usize,
    pub l: i32,
    /// `||M~ f - M~^l f||_2 / ||f||_2`.
    pub operator_error: f64,
    /// `(int_1^2 sum_j ||(K - K * phi_{j-l}) * f||_2^2 dt)^{1/2} / ||f||_2` from space-domain fields.
    pub energy_space: f64,
    /// The same energy through `|hat K|^2 |1 - hat phi|^2 |hat f|^2`.
    pub energy_frequency: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ApproxDecay {
    pub omega: String,
    pub rows: Vec<ApproxRow>,
    /// Worst relative disagreement between the two energy routes.
    pub agreement: f64,
    /// `-slope` of `log2(operator_error)` against `l`, pooled over scenes.
    pub theta_operator: f64,
    /// `-slope / 1` of `log2(energy)` against `l` (the energy itself decays like `2^{-theta l}`).
    pub theta_energy: f64,
}

/// Approximation law of the mollified square function over a scene bank.
pub fn approximation_decay(
    omega: &AngularKernel,
    scenes: &[SampledField],
    l_list: &[i32],
    quad: &QuadratureSpec,
) -> Result<ApproxDecay> {
    if scenes.is_empty() || l_list.is_empty() {
        return Err(MzError::InvalidArgument("need at least one scene and one level".into()));
    }
    if l_list.windows(2).any(|w| w[0] >= w[1]) || l_list[0] < 1 {
        return Err(MzError::InvalidArgument("levels must be increasing and >= 1".into()));
    }
    let grid = *scenes[0].grid();
    let base = SquarePlan::dyadic(omega, grid, quad)?;
    let exact: Vec<SampledField> = scenes
        .iter()
        .map(|f| base.apply(f).map(|o| o.field))
        .collect::<Result<_>>()?;
    let norms: Vec<f64> = scenes.iter().map(|f| lp_norm(f, 2.0)).collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for &l in l_list {
        let plan = SquarePlan::mollify(&base, l)?;
        let per_scene = map_vec((0..scenes.len()).collect(), |s| -> Result<ApproxRow> {
            let f = &scenes[s];
            let approx = plan.apply(f)?.field;
            let diff = lp_norm(&exact[s].sub(&approx)?, 2.0)?;
            let es = base.difference_energy_spatial(&plan, f)?;
            let ef = base.difference_energy_spectral(&plan, f)?;
            Ok(ApproxRow {
                scene: s,
                l,
                operator_error: diff / norms[s],
                energy_space: es.max(0.0).sqrt() / norms[s],
                energy_frequency: ef.max(0.0).sqrt() / norms[s],
            })
        });
        for r in per_scene {
            rows.push(r?);
        }
    }
    let agreement = rows
        .iter()
        .map(|r| (r.energy_space - r.energy_frequency).abs() / r.energy_space.max(1e-300))
        .fold(0.0, f64::max);
    let fit = |get: &dyn Fn(&ApproxRow) -> f64| -> f64 {
        let (xs, ys): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .filter(|r| get(r) > 0.0)
            .map(|r| (r.l as f64, get(r).log2()))
            .unzip();
        linear_fit(&xs, &ys).map(|f| -f.slope).unwrap_or(f64::NAN)
    };
    Ok(ApproxDecay {
        omega: omega.name().to_string(),
        theta_operator: fit(&|r| r.operator_error),
        theta_energy: fit(&|r| r.energy_space),
        rows,
        agreement,
    })
}
