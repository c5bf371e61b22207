//! Square functions built from the truncated kernels: the Marcinkiewicz
//! integral, its dyadic and mollified forms, the scale-restricted sum, the
//! grand maximal function, and the truncated rough singular integral.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use crate::cubes::Cube;
use crate::error::{MzError, Result};
use crate::field::{GridSpec, QuadratureSpec, SampledField};
use crate::kernels::{ball_stencil, band_stencil, k_jt_stencil, mollifier_stencil};
use crate::parallel::{map_vec, pairwise_sum};
use crate::spectral::{convolve_stencil, Spectrum};
use crate::sphere::AngularKernel;

/// Which square function a plan evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SquareKind {
    /// `(int_0^inf |F_{Omega,t} f|^2 dt / t^3)^{1/2}`.
    Marcinkiewicz,
    /// `(int_1^2 sum_j |F_j f(x,t)|^2 dt)^{1/2}`.
    Dyadic,
    /// As `Dyadic` with kernels `K_t^j * phi_{j-l}`.
    Mollified,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputMeta {
    pub operator: SquareKind,
    pub omega: String,
    pub l: Option<i32>,
    pub j0: Option<i32>,
    pub quadrature: QuadratureSpec,
}

/// Nonnegative square-function values together with how they were produced.
#[derive(Debug, Clone)]
pub struct SquareFunctionOutput {
    pub field: SampledField,
    pub meta: OutputMeta,
}

/// One `(j, t)` term: quadrature weight and kernel spectrum.
#[derive(Clone)]
pub struct Term {
    pub j: i32,
    pub t: f64,
    pub weight: f64,
    spectrum: Arc<Spectrum>,
}

impl Term {
    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }
}

/// Kernel spectra for every `(j, t)` node of one operator on one grid.
///
/// Building a plan is the expensive step; applying it to many inputs only
/// costs one forward transform per input and one inverse per term. Plans are
/// immutable and shared freely across workers.
#[derive(Clone)]
pub struct SquarePlan {
    grid: GridSpec,
    omega: String,
    kind: SquareKind,
    l: Option<i32>,
    j0: Option<i32>,
    quad: QuadratureSpec,
    terms: Vec<Term>,
}

fn nodes(quad: &QuadratureSpec) -> Vec<(i32, f64, f64)> {
    quad.scales()
        .flat_map(|j| quad.t_nodes.iter().map(move |&(t, w)| (j, t, w)))
        .collect()
}

impl SquarePlan {
    /// Plan for `M_Omega` via `t = 2^j s`, weights `w_s 2^{-2j} s^{-3}`.
    pub fn marcinkiewicz(omega: &AngularKernel, grid: GridSpec, quad: &QuadratureSpec) -> Result<Self> {
        quad.validate(&grid)?;
        let terms = map_vec(nodes(quad), |(j, s, w)| -> Result<Term> {
            let radius = 2f64.powi(j) * s;
            let st = ball_stencil(omega, radius, grid)?;
            Ok(Term {
                j,
                t: s,
                weight: w * 2f64.powi(-2 * j) * s.powi(-3),
                spectrum: Arc::new(st.spectrum()),
            })
        });
        Self::assemble(grid, omega, SquareKind::Marcinkiewicz, None, quad, terms)
    }

    /// Plan for the dyadic form `M~_Omega`.
    pub fn dyadic(omega: &AngularKernel, grid: GridSpec, quad: &QuadratureSpec) -> Result<Self> {
        quad.validate(&grid)?;
        let terms = map_vec(nodes(quad), |(j, t, w)| -> Result<Term> {
            let st = k_jt_stencil(omega, j, t, grid)?;
            Ok(Term {
                j,
                t,
                weight: w,
                spectrum: Arc::new(st.spectrum()),
            })
        });
        Self::assemble(grid, omega, SquareKind::Dyadic, None, quad, terms)
    }

    /// Plan for `M~^l_Omega`, kernels `K_t^j * phi_{j-l}`.
    pub fn mollified(omega: &AngularKernel, grid: GridSpec, quad: &QuadratureSpec, l: i32) -> Result<Self> {
        if l < 1 {
            return Err(MzError::InvalidArgument(format!(
                "mollification level must be >= 1, got {l}"
            )));
        }
        let base = Self::dyadic(omega, grid, quad)?;
        Self::mollify(&base, l)
    }

    /// Reuses the kernel spectra of a dyadic plan.
    pub fn mollify(base: &SquarePlan, l: i32) -> Result<Self> {
        if base.kind != SquareKind::Dyadic {
            return Err(MzError::InvalidArgument("only dyadic plans can be mollified".into()));
        }
        let grid = base.grid;
        let mut phis: BTreeMap<i32, Arc<Spectrum>> = BTreeMap::new();
        for j in base.quad.scales() {
            phis.insert(j - l, Arc::new(mollifier_stencil(j - l, grid)?.spectrum()));
        }
        let terms = map_vec(base.terms.clone(), |term| -> Result<Term> {
            let phi = &phis[&(term.j - l)];
            Ok(Term {
                spectrum: Arc::new(term.spectrum.mul(phi)?),
                ..term
            })
        });
        let mut plan = base.clone();
        plan.kind = SquareKind::Mollified;
        plan.l = Some(l);
        plan.terms = terms.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(plan)
    }

    fn assemble(
        grid: GridSpec,
        omega: &AngularKernel,
        kind: SquareKind,
        l: Option<i32>,
        quad: &QuadratureSpec,
        terms: Vec<Result<Term>>,
    ) -> Result<Self> {
        Ok(Self {
            grid,
            omega: omega.name().to_string(),
            kind,
            l,
            j0: None,
            quad: quad.clone(),
            terms: terms.into_iter().collect::<Result<Vec<_>>>()?,
        })
    }

    /// The same plan summing only scales `j <= j0`.
    pub fn restricted(&self, j0: i32) -> SquarePlan {
        let mut plan = self.clone();
        plan.j0 = Some(j0);
        plan.terms.retain(|t| t.j <= j0);
        plan
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn kind(&self) -> SquareKind {
        self.kind
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn meta(&self) -> OutputMeta {
        OutputMeta {
            operator: self.kind,
            omega: self.omega.clone(),
            l: self.l,
            j0: self.j0,
            quadrature: self.quad.clone(),
        }
    }

    /// `F f` for every term, in term order (`j` major, then `t`).
    pub fn term_fields(&self, f: &SampledField) -> Result<Vec<Vec<f64>>> {
        if f.grid() != &self.grid {
            return Err(MzError::GridMismatch);
        }
        let fhat = Spectrum::of_field(f);
        Ok(map_vec(self.terms.clone(), |t| fhat.product_box(&t.spectrum)))
    }

    /// Pointwise `sum_terms weight |F f|^2`, accumulated in term order.
    pub fn square_sum(&self, f: &SampledField) -> Result<Vec<f64>> {
        let fields = self.term_fields(f)?;
        let mut acc = vec![0.0f64; self.grid.len()];
        for (term, vals) in self.terms.iter().zip(fields) {
            for (a, v) in acc.iter_mut().zip(vals) {
                *a += term.weight * v * v;
            }
        }
        Ok(acc)
    }

    /// Square function of `f`; `f` must vanish outside the inner half-box.
    pub fn apply(&self, f: &SampledField) -> Result<SquareFunctionOutput> {
        check_inner_support(f)?;
        let acc = self.square_sum(f)?;
        Ok(SquareFunctionOutput {
            field: SampledField::from_values(self.grid, acc.into_iter().map(f64::sqrt).collect())?,
            meta: self.meta(),
        })
    }

    /// `sum_terms weight ||(K^ - other K^) f^||_2^2` evaluated in frequency
    /// space by Parseval on the padded buffer. Both plans must share terms.
    pub fn difference_energy_spectral(&self, other: &SquarePlan, f: &SampledField) -> Result<f64> {
        if self.terms.len() != other.terms.len() || self.grid != other.grid {
            return Err(MzError::InvalidArgument("plans do not share their term layout".into()));
        }
        let fhat = Spectrum::of_field(f);
        let p = fhat.side();
        let scale = self.grid.cell_volume() / (p * p) as f64;
        let per_term = map_vec((0..self.terms.len()).collect(), |k| {
            let a = self.terms[k].spectrum.data();
            let b = other.terms[k].spectrum.data();
            let sq: Vec<f64> = fhat
                .data()
                .iter()
                .zip(a.iter().zip(b))
                .map(|(fv, (x, y))| ((x - y) * fv).norm_sqr())
                .collect();
            self.terms[k].weight * pairwise_sum(&sq) * scale
        });
        Ok(per_term.iter().sum())
    }

    /// Same quantity as [`Self::difference_energy_spectral`] computed from
    /// the space-domain term fields.
    pub fn difference_energy_spatial(&self, other: &SquarePlan, f: &SampledField) -> Result<f64> {
        let a = self.term_fields(f)?;
        let b = other.term_fields(f)?;
        let vol = self.grid.cell_volume();
        let mut total = 0.0;
        for ((term, x), y) in self.terms.iter().zip(a).zip(b) {
            let sq: Vec<f64> = x.iter().zip(&y).map(|(u, v)| (u - v) * (u - v)).collect();
            total += term.weight * pairwise_sum(&sq) * vol;
        }
        Ok(total)
    }
}

/// Rejects inputs that do not vanish outside `[-L/2, L/2)^2`.
pub fn check_inner_support(f: &SampledField) -> Result<()> {
    let grid = f.grid();
    let half = grid.half_width() / 2.0;
    for (idx, &v) in f.values().iter().enumerate() {
        if v != 0.0 {
            let [x, y] = grid.point(idx);
            if x.abs() > half || y.abs() > half {
                return Err(MzError::Hypothesis(format!(
                    "input must vanish outside the inner half-box; value {v} at ({x}, {y})"
                )));
            }
        }
    }
    Ok(())
}

/// `F_{Omega,t} f(x) = int_{|x-y| <= t} Omega(x-y) |x-y|^{-(n-1)} f(y) dy`.
pub fn f_omega_t(omega: &AngularKernel, f: &SampledField, t: f64) -> Result<SampledField> {
    convolve_stencil(f, &ball_stencil(omega, t, *f.grid())?)
}

pub fn marcinkiewicz(omega: &AngularKernel, f: &SampledField, quad: &QuadratureSpec) -> Result<SquareFunctionOutput> {
    SquarePlan::marcinkiewicz(omega, *f.grid(), quad)?.apply(f)
}

pub fn marcinkiewicz_dyadic(
    omega: &AngularKernel,
    f: &SampledField,
    quad: &QuadratureSpec,
) -> Result<SquareFunctionOutput> {
    SquarePlan::dyadic(omega, *f.grid(), quad)?.apply(f)
}

pub fn marcinkiewicz_mollified(
    omega: &AngularKernel,
    f: &SampledField,
    l: i32,
    quad: &QuadratureSpec,
) -> Result<SquareFunctionOutput> {
    SquarePlan::mollified(omega, *f.grid(), quad, l)?.apply(f)
}

/// `N^{l,j0}_Omega f`: the mollified square sum over `j <= j0`.
pub fn scale_restricted(
    omega: &AngularKernel,
    f: &SampledField,
    l: i32,
    j0: i32,
    quad: &QuadratureSpec,
) -> Result<SquareFunctionOutput> {
    if j0 > quad.j_max {
        return Err(MzError::InvalidArgument(format!(
            "j0 = {j0} above the scale range maximum {}",
            quad.j_max
        )));
    }
    SquarePlan::mollified(omega, *f.grid(), quad, l)?
        .restricted(j0)
        .apply(f)
}

/// Truncated `T_Omega f` over `eps < |y| < R`.
pub fn rough_singular_integral(omega: &AngularKernel, f: &SampledField, eps: f64, outer: f64) -> Result<SampledField> {
    let grid = *f.grid();
    let h = grid.spacing();
    if eps < 2.0 * h * (1.0 - 1e-12) || eps >= outer || outer > grid.half_width() / 2.0 * (1.0 + 1e-12) {
        return Err(MzError::Unresolvable(format!(
            "band ({eps}, {outer}) needs 2h <= eps < R <= L/2 with h={h}, L={}",
            grid.half_width()
        )));
    }
    convolve_stencil(f, &band_stencil(omega, eps, outer, grid)?)
}

/// `S^l f(x) = max_{Q ∋ x} max_{xi} M~^l(f chi_{(3Q)^c})(xi)` over the bank
/// cubes and their `3^n` probe cells, for any plan (normally mollified).
///
/// Uses `F(f chi_{(3Q)^c}) = F f - F(f chi_{3Q})`, with the second term
/// summed directly over `3Q` against the lattice kernels.
pub fn grand_maximal_with(plan: &SquarePlan, f: &SampledField, bank: &[Cube]) -> Result<SampledField> {
    if bank.is_empty() {
        return Err(MzError::EmptyBank);
    }
    let grid = *plan.grid();
    let n = grid.resolution();
    let full = plan.term_fields(f)?;
    let p = 2 * n;
    let kernels: Vec<Vec<f64>> = map_vec(plan.terms().to_vec(), |t| t.spectrum.to_padded());
    let values = f.values();
    let per_cube = map_vec(bank.to_vec(), |q| -> (Cube, f64) {
        let support: Vec<(usize, usize, f64)> = match q.dilate(3).clip(n) {
            Some([(a0, b0), (a1, b1)]) => {
                let mut s = Vec::new();
                for i0 in a0..b0 {
                    for i1 in a1..b1 {
                        let v = values[i0 * n + i1];
                        if v != 0.0 {
                            s.push((i0, i1, v));
                        }
                    }
                }
                s
            }
            None => Vec::new(),
        };
        let mut best = 0.0f64;
        for [x0, x1] in q.probe_cells() {
            if x0 < 0 || x1 < 0 || x0 >= n as i64 || x1 >= n as i64 {
                continue;
            }
            let (x0, x1) = (x0 as usize, x1 as usize);
            let mut acc = 0.0;
            for (k, term) in plan.terms().iter().enumerate() {
                let kern = &kernels[k];
                let mut local = 0.0;
                for &(y0, y1, v) in &support {
                    let d0 = (x0 + p - y0) % p;
                    let d1 = (x1 + p - y1) % p;
                    local += v * kern[d0 * p + d1];
                }
                let val = full[k][x0 * n + x1] - local;
                acc += term.weight * val * val;
            }
            best = best.max(acc.sqrt());
        }
        (q, best)
    });
    let mut out = vec![0.0f64; grid.len()];
    for (q, best) in per_cube {
        if let Some([(a0, b0), (a1, b1)]) = q.clip(n) {
            for i0 in a0..b0 {
                for v in &mut out[i0 * n + a1..i0 * n + b1] {
                    *v = v.max(best);
                }
            }
        }
    }
    SampledField::from_values(grid, out)
}

/// [`grand_maximal_with`] for the mollified plan at level `l`.
pub fn grand_maximal(
    omega: &AngularKernel,
    f: &SampledField,
    l: i32,
    quad: &QuadratureSpec,
    bank: &[Cube],
) -> Result<SampledField> {
    let plan = SquarePlan::mollified(omega, *f.grid(), quad, l)?;
    grand_maximal_with(&plan, f, bank)
}
