//! Muckenhoupt weights: `A_p` and `A_inf` constants, the composite constants
//! `{w}_{A_p,r}` and `(w)_{A_p}`, power weights, reverse Hölder and the
//! geometric tail sum.

use serde::Serialize;

use crate::cubes::AreaTable;
pub use crate::cubes::{Cube, CubeBank};
use crate::error::{MzError, Result};
use crate::field::{sample, GridSpec, SampledField};
use crate::parallel::map_vec;

/// Closed form a weight was built from, if any.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum WeightForm {
    Power(f64),
    Custom,
}

/// Strictly positive sampled weight.
#[derive(Debug, Clone)]
pub struct Weight {
    field: SampledField,
    form: WeightForm,
}

impl Weight {
    pub fn new(field: SampledField) -> Result<Self> {
        if let Some(index) = field.values().iter().position(|&v| v <= 0.0) {
            return Err(MzError::NonPositiveWeight {
                index,
                value: field.values()[index],
            });
        }
        Ok(Self {
            field,
            form: WeightForm::Custom,
        })
    }

    pub fn constant(grid: GridSpec, c: f64) -> Result<Self> {
        Self::new(SampledField::constant(grid, c))
    }

    pub fn field(&self) -> &SampledField {
        &self.field
    }

    pub fn form(&self) -> WeightForm {
        self.form
    }

    pub fn grid(&self) -> &GridSpec {
        self.field.grid()
    }

    /// `w^e`; power weights stay tagged.
    pub fn pow(&self, e: f64) -> Result<Weight> {
        let values: Vec<f64> = self.field.values().iter().map(|v| v.powf(e)).collect();
        if let Some(k) = values.iter().position(|v| !v.is_finite() || *v <= 0.0) {
            return Err(MzError::Overflow(format!(
                "w^{e} is not a finite positive number at cell {k} (w = {})",
                self.field.values()[k]
            )));
        }
        let form = match self.form {
            WeightForm::Power(a) => WeightForm::Power(a * e),
            WeightForm::Custom => WeightForm::Custom,
        };
        Ok(Weight {
            field: SampledField::from_values(*self.field.grid(), values)?,
            form,
        })
    }

    /// The dual weight `w^{1-p'}`.
    pub fn dual(&self, p: f64) -> Result<Weight> {
        check_p(p)?;
        self.pow(1.0 - conjugate(p))
    }

    pub fn scale(&self, c: f64) -> Result<Weight> {
        let mut w = Weight::new(self.field.scale(c))?;
        w.form = self.form;
        Ok(w)
    }
}

/// Hölder conjugate `p / (p - 1)`.
pub fn conjugate(p: f64) -> f64 {
    p / (p - 1.0)
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(MzError::InvalidExponent(format!(
            "weight exponent needs 1 < p < inf, got {p}"
        )));
    }
    Ok(())
}

fn check_bank(bank: &CubeBank) -> Result<()> {
    if bank.is_empty() {
        return Err(MzError::EmptyBank);
    }
    Ok(())
}

/// Admissible exponent window `(-n, n (p - 1))` for `|x|^a` in `A_p`.
pub fn power_window(grid: &GridSpec, p: f64) -> (f64, f64) {
    let n = grid.dim() as f64;
    (-n, n * (p - 1.0))
}

/// `w(x) = |x|^a` at cell centers, rejected outside the `A_{p_target}` window.
pub fn power_weight(a: f64, p_target: f64, grid: GridSpec) -> Result<Weight> {
    check_p(p_target)?;
    let (lo, hi) = power_window(&grid, p_target);
    if !(a > lo && a < hi) {
        return Err(MzError::WeightWindow { a, lo, hi });
    }
    let field = sample(grid, |x| x[0].hypot(x[1]).powf(a))?;
    let mut w = Weight::new(field)?;
    w.form = WeightForm::Power(a);
    Ok(w)
}

/// `max_Q <w>_Q <w^{-1/(p-1)}>_Q^{p-1}` over the bank.
pub fn ap_constant(w: &Weight, p: f64, bank: &CubeBank) -> Result<f64> {
    check_p(p)?;
    check_bank(bank)?;
    let n = w.grid().resolution();
    let e = -1.0 / (p - 1.0);
    let sigma: Vec<f64> = w.field().values().iter().map(|v| v.powf(e)).collect();
    if sigma.iter().any(|v| !v.is_finite()) {
        return Err(MzError::Overflow("w^(-1/(p-1)) overflows".into()));
    }
    let tw = AreaTable::from_values(n, w.field().values());
    let ts = AreaTable::from_values(n, &sigma);
    Ok(max_over(bank, |q| tw.mean(q) * ts.mean(q).powf(p - 1.0)))
}

/// Deterministic max of `f` over bank cubes meeting the window.
fn max_over(bank: &CubeBank, f: impl Fn(&Cube) -> f64 + Sync + Send) -> f64 {
    const CHUNK: usize = 512;
    let chunks: Vec<&[Cube]> = bank.cubes.chunks(CHUNK).collect();
    map_vec(chunks, |c| {
        c.iter()
            .fold(f64::NEG_INFINITY, |m, q| if q.side > 0 { m.max(f(q)) } else { m })
    })
    .into_iter()
    .fold(f64::NEG_INFINITY, f64::max)
}

/// `int_Q M_Q(w)` where `M_Q` is the maximal operator over the dyadic
/// descendants of `Q` (halving each side, odd sides split floor/ceil).
fn local_maximal_integral(table: &AreaTable, values: &[f64], n: usize, q: [(usize, usize); 2]) -> f64 {
    fn recurse(table: &AreaTable, values: &[f64], n: usize, r: [(usize, usize); 2], running: f64) -> f64 {
        let (a0, b0) = r[0];
        let (a1, b1) = r[1];
        let cells = (b0 - a0) * (b1 - a1);
        let mean = table.sum_ranges(r) / cells as f64;
        let m = running.max(mean);
        if cells == 1 {
            return m.max(values[a0 * n + a1]);
        }
        let split = |(a, b): (usize, usize)| -> ([(usize, usize); 2], usize) {
            if b - a > 1 {
                let mid = a + (b - a) / 2;
                ([(a, mid), (mid, b)], 2)
            } else {
                ([(a, b), (a, b)], 1)
            }
        };
        let (xs, nx) = split(r[0]);
        let (ys, ny) = split(r[1]);
        let mut s = 0.0;
        for x in &xs[..nx] {
            for y in &ys[..ny] {
                s += recurse(table, values, n, [*x, *y], m);
            }
        }
        s
    }
    recurse(table, values, n, q, 0.0)
}

/// Fujii–Wilson constant `max_Q w(Q)^{-1} int_Q M(w chi_Q)`, with the
/// maximal operator localized to the dyadic descendants of each bank cube.
pub fn ainf_constant(w: &Weight, bank: &CubeBank) -> Result<f64> {
    check_bank(bank)?;
    let n = w.grid().resolution();
    let values = w.field().values();
    let table = AreaTable::from_values(n, values);
    Ok(max_over(bank, |q| match q.clip(n) {
        Some(r) => local_maximal_integral(&table, values, n, r) / table.sum_ranges(r),
        None => f64::NEG_INFINITY,
    }))
}

/// The two composite constants together with their ingredients.
#[derive(Debug, Clone, Serialize)]
pub struct CompositeConstants {
    pub ap: f64,
    pub ainf: f64,
    pub ainf_dual: f64,
    pub curly: f64,
    pub paren: f64,
}

/// `{w}_{A_p,r} = [w]_{A_p}^{1/r} max([w]_{A_inf}^{1/r'}, [w^{1-p'}]_{A_inf}^{1/r})`
/// and `(w)_{A_p} = max([w]_{A_inf}, [w^{1-p'}]_{A_inf})`.
pub fn composite_constants(w: &Weight, p: f64, r: f64, bank: &CubeBank) -> Result<CompositeConstants> {
    check_p(p)?;
    check_p(r)?;
    let ap = ap_constant(w, p, bank)?;
    let ainf = ainf_constant(w, bank)?;
    let ainf_dual = ainf_constant(&w.dual(p)?, bank)?;
    let rp = conjugate(r);
    let curly = ap.powf(1.0 / r) * ainf.powf(1.0 / rp).max(ainf_dual.powf(1.0 / r));
    Ok(CompositeConstants {
        ap,
        ainf,
        ainf_dual,
        curly,
        paren: ainf.max(ainf_dual),
    })
}

/// Multiplicative slack allowed in the reverse Hölder comparison.
pub const RH_SLACK: f64 = 4.0;

#[derive(Debug, Clone, Serialize)]
pub struct ReverseHolder {
    pub eps: f64,
    pub paren: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// `[w^{1+eps}]_{A_inf}` against `[w]_{A_inf}^{1+eps}`.
    pub ainf_lhs: f64,
    pub ainf_rhs: f64,
    /// The same comparison for the dual weight.
    pub ainf_dual_lhs: f64,
    pub ainf_dual_rhs: f64,
}

/// Checks `[w^{1+eps}]_{A_p} <= RH_SLACK * 4 [w]_{A_p}^{1+eps}` with `eps = c / (w)_{A_p}`.
pub fn reverse_holder_check(w: &Weight, p: f64, eps_constant: f64, bank: &CubeBank) -> Result<ReverseHolder> {
    check_p(p)?;
    if !(eps_constant > 0.0) {
        return Err(MzError::InvalidArgument(format!(
            "reverse Hölder constant must be positive, got {eps_constant}"
        )));
    }
    let ap = ap_constant(w, p, bank)?;
    let dual = w.dual(p)?;
    let ainf = ainf_constant(w, bank)?;
    let ainf_dual = ainf_constant(&dual, bank)?;
    let paren = ainf.max(ainf_dual);
    let eps = eps_constant / paren;
    let lifted = w.pow(1.0 + eps)?;
    let lhs = ap_constant(&lifted, p, bank)?;
    let rhs = 4.0 * ap.powf(1.0 + eps);
    let dual_lifted = dual.pow(1.0 + eps)?;
    Ok(ReverseHolder {
        eps,
        paren,
        lhs,
        rhs,
        holds: lhs <= RH_SLACK * rhs,
        ainf_lhs: ainf_constant(&lifted, bank)?,
        ainf_rhs: ainf.powf(1.0 + eps),
        ainf_dual_lhs: ainf_constant(&dual_lifted, bank)?,
        ainf_dual_rhs: ainf_dual.powf(1.0 + eps),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TailSum {
    pub sum: f64,
    pub sum_times_eps: f64,
    pub terms: usize,
}

/// `S(eps, rho) = sum_{l >= 1} 2^l 2^{-rho 2^l eps / (1 + eps)}`, summed until
/// the terms are past their peak and below `1e-15`.
pub fn tail_sum_check(eps: f64, rho: f64) -> Result<TailSum> {
    if !(eps > 0.0 && rho > 0.0) {
        return Err(MzError::InvalidArgument(format!(
            "tail sum needs eps, rho > 0, got eps={eps}, rho={rho}"
        )));
    }
    let c = rho * eps / (1.0 + eps);
    let mut sum = 0.0;
    let mut l = 1;
    loop {
        let p = 2f64.powi(l);
        let log2_term = l as f64 - c * p;
        let term = log2_term.exp2();
        sum += term;
        let past_peak = c * p * std::f64::consts::LN_2 >= 1.0;
        if (past_peak && term < 1e-15) || l >= 1000 {
            break;
        }
        l += 1;
    }
    Ok(TailSum {
        sum,
        sum_times_eps: sum * eps,
        terms: l as usize,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        GridSpec::new(4.0, 64).unwrap()
    }

    #[test]
    fn constant_weights_are_one() {
        let g = grid();
        let bank = CubeBank::standard(&g, 200, 1);
        for c in [1.0, 3.5] {
            let w = Weight::constant(g, c).unwrap();
            for p in [1.5, 2.0, 4.0] {
                assert!((ap_constant(&w, p, &bank).unwrap() - 1.0).abs() < 1e-12);
            }
            assert!((ainf_constant(&w, &bank).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn power_window_rejects() {
        assert!(matches!(
            power_weight(2.5, 2.0, grid()),
            Err(MzError::WeightWindow { .. })
        ));
        assert!(power_weight(-2.0, 2.0, grid()).is_err());
        let w = power_weight(0.0, 2.0, grid()).unwrap();
        assert!(w.field().values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn empty_bank_rejected() {
        let w = Weight::constant(grid(), 1.0).unwrap();
        let bank = CubeBank { cubes: vec![] };
        assert!(matches!(ap_constant(&w, 2.0, &bank), Err(MzError::EmptyBank)));
        assert!(matches!(ainf_constant(&w, &bank), Err(MzError::EmptyBank)));
    }

    #[test]
    fn tail_sum_reference() {
        let s = tail_sum_check(1.0, 1.0).unwrap();
        let direct: f64 = (1..40).map(|l| 2f64.powi(l) * 2f64.powf(-(2f64.powi(l - 1)))).sum();
        assert!((s.sum - direct).abs() < 1e-13);
        assert!((s.sum - 2.562988).abs() < 1e-5);
    }
}
