//! Pointwise sparse domination of the mollified square function and its
//! weak-type level-set ratios.

use serde::Serialize;

use crate::dyadic::{families_for, sparse_operator_Lr};
use crate::error::{MzError, Result};
use crate::field::{lp_norm, SampledField};
use crate::operators::{check_inner_support, SquarePlan};

#[derive(Debug, Clone, Serialize)]
pub struct DominationCheck {
    pub l: i32,
    pub eta: f64,
    pub r: f64,
    /// `sup M~^l f / (l sum_j A_{S_j, r} f)` over cells with denominator above `1e-12`.
    pub constant: f64,
    /// Cells where the numerator is non-negligible but the denominator vanishes.
    pub flagged_cells: Vec<usize>,
    pub family_sizes: Vec<usize>,
}

/// Domination ratio for a mollified plan, with sparse families built on all
/// nine shifted systems from the stopping data `|f|^r` (`r = q'`).
pub fn sparse_domination_check(plan: &SquarePlan, f: &SampledField, eta: f64, r: f64) -> Result<DominationCheck> {
    let l = plan
        .meta()
        .l
        .ok_or_else(|| MzError::InvalidArgument("domination check needs a mollified plan".into()))?;
    check_inner_support(f)?;
    if f.is_zero() {
        return Ok(DominationCheck {
            l,
            eta,
            r,
            constant: 0.0,
            flagged_cells: Vec::new(),
            family_sizes: Vec::new(),
        });
    }
    let numerator = plan.apply(f)?.field;
    let families = families_for(f, r, eta)?;
    let mut denominator = vec![0.0f64; f.grid().len()];
    for fam in &families {
        let a = sparse_operator_Lr(fam, f, r)?;
        for (d, v) in denominator.iter_mut().zip(a.values()) {
            *d += v;
        }
    }
    let num_max = numerator.max_abs();
    let mut constant = 0.0f64;
    let mut flagged_cells = Vec::new();
    for (k, (&nu, &de)) in numerator.values().iter().zip(&denominator).enumerate() {
        if de > 1e-12 {
            constant = constant.max(nu / (l as f64 * de));
        } else if nu > 1e-12 * num_max {
            flagged_cells.push(k);
        }
    }
    Ok(DominationCheck {
        l,
        eta,
        r,
        constant,
        flagged_cells,
        family_sizes: families.iter().map(|f| f.members.len()).collect(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Weak11Row {
    pub lambda: f64,
    pub measure: f64,
    /// `lambda |{M~^l f > lambda}| / ||f||_1`.
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Weak11Check {
    pub l: i32,
    pub rows: Vec<Weak11Row>,
    pub max_ratio: f64,
    pub max_ratio_over_l: f64,
}

/// Level-set measurements of the square function of `plan` applied to `f`.
pub fn weak11_check(plan: &SquarePlan, f: &SampledField, lambdas: &[f64]) -> Result<Weak11Check> {
    let l = plan.meta().l.unwrap_or(1);
    if lambdas.iter().any(|&x| !(x > 0.0)) {
        return Err(MzError::InvalidArgument("levels must be positive".into()));
    }
    let out = plan.apply(f)?.field;
    let norm1 = lp_norm(f, 1.0)?;
    let vol = f.grid().cell_volume();
    let rows: Vec<Weak11Row> = lambdas
        .iter()
        .map(|&lambda| {
            let measure = out.values().iter().filter(|&&v| v > lambda).count() as f64 * vol;
            let ratio = if norm1 > 0.0 { lambda * measure / norm1 } else { 0.0 };
            Weak11Row { lambda, measure, ratio }
        })
        .collect();
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(Weak11Check {
        l,
        max_ratio,
        max_ratio_over_l: max_ratio / l as f64,
        rows,
    })
}

/// Geometric level grid between `lo` and `hi` with `count` points.
pub fn geometric_levels(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![lo];
    }
    let r = (hi / lo).ln() / (count - 1) as f64;
    (0..count).map(|k| lo * (r * k as f64).exp()).collect()
}
