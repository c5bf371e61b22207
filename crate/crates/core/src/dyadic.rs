//! Shifted dyadic grids, the Calderón–Zygmund decomposition, stopping-time
//! sparse families and the sparse operators built on them.

use serde::{Deserialize, Serialize};

use crate::cubes::{shift_offsets, third_shift, AreaTable, Cube};
use crate::error::{MzError, Result};
use crate::field::{weighted_lp_norm, GridSpec, SampledField};
use crate::parallel::map_vec;
use crate::weights::{ainf_constant, ap_constant, CubeBank, Weight};

/// One of the `3^n` shifted dyadic systems on the window. Level `k` holds
/// cubes of side `2^k` cells with corners at `offset + 2^k m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DyadicGridSpec {
    /// Shift per axis in units of one third: `0`, `1` or `-1`.
    pub shift: [i8; 2],
    /// The shift in cells.
    pub offset: [i64; 2],
    pub k_min: u32,
    pub k_max: u32,
    pub resolution: usize,
}

impl DyadicGridSpec {
    /// Unshifted system on a grid.
    pub fn standard(grid: &GridSpec) -> Self {
        build_grids(grid)[0]
    }

    pub fn cube(&self, k: u32, index: [i64; 2]) -> Cube {
        let s = 1i64 << k;
        Cube::new([self.offset[0] + s * index[0], self.offset[1] + s * index[1]], s)
    }

    /// Level and lattice index of a cube of this system.
    pub fn locate(&self, cube: &Cube) -> Option<(u32, [i64; 2])> {
        let s = cube.side;
        if s <= 0 || s & (s - 1) != 0 {
            return None;
        }
        let k = s.trailing_zeros();
        let d0 = cube.corner[0] - self.offset[0];
        let d1 = cube.corner[1] - self.offset[1];
        if d0.rem_euclid(s) != 0 || d1.rem_euclid(s) != 0 {
            return None;
        }
        Some((k, [d0.div_euclid(s), d1.div_euclid(s)]))
    }

    /// Cubes of level `k` meeting the window.
    pub fn level(&self, k: u32) -> Vec<Cube> {
        crate::cubes::lattice_level(self.resolution, self.offset, 1i64 << k)
    }

    /// Top-level cubes meeting the window.
    pub fn roots(&self) -> Vec<Cube> {
        self.level(self.k_max)
    }

    /// The four children of a cube that meet the window.
    pub fn children(&self, q: &Cube) -> Vec<Cube> {
        let h = q.side / 2;
        let mut out = Vec::with_capacity(4);
        for a in 0..2 {
            for b in 0..2 {
                let c = Cube::new([q.corner[0] + a * h, q.corner[1] + b * h], h);
                if c.clip(self.resolution).is_some() {
                    out.push(c);
                }
            }
        }
        out
    }
}

/// The nine shifted systems, shifts `{0, 1/3, -1/3}` per axis, levels from
/// single cells up to side `N`.
pub fn build_grids(grid: &GridSpec) -> Vec<DyadicGridSpec> {
    let n = grid.resolution();
    let c = third_shift(n);
    let k_max = n.trailing_zeros();
    shift_offsets(n)
        .into_iter()
        .map(|offset| {
            let code = |o: i64| -> i8 {
                if o == 0 {
                    0
                } else if o == c {
                    1
                } else {
                    -1
                }
            };
            DyadicGridSpec {
                shift: [code(offset[0]), code(offset[1])],
                offset,
                k_min: 0,
                k_max,
                resolution: n,
            }
        })
        .collect()
}

/// One bad part `b_i = (f - <f>_{Q_i}) chi_{Q_i}`, stored on the clipped cube.
#[derive(Debug, Clone)]
pub struct BadPart {
    pub cube: Cube,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct CZDecomposition {
    pub lambda: f64,
    pub cubes: Vec<Cube>,
    pub good: SampledField,
    pub bad_parts: Vec<BadPart>,
    /// Clipped boundary cubes whose average exceeds `2^n lambda` because the
    /// parent lost volume to the window edge.
    pub boundary_exemptions: Vec<Cube>,
}

impl BadPart {
    pub fn to_field(&self, grid: GridSpec) -> SampledField {
        let n = grid.resolution();
        let mut out = vec![0.0; n * n];
        if let Some([(a0, b0), (a1, b1)]) = self.cube.clip(n) {
            let w = b1 - a1;
            for i0 in a0..b0 {
                out[i0 * n + a1..i0 * n + b1].copy_from_slice(&self.values[(i0 - a0) * w..(i0 - a0 + 1) * w]);
            }
        }
        SampledField::from_values_unchecked(grid, out)
    }

    /// Discrete mean over the clipped cube.
    pub fn mean(&self) -> f64 {
        crate::parallel::pairwise_sum(&self.values) / self.values.len() as f64
    }
}

/// Maximal dyadic cubes of `spec` with `<|f|>_Q > lambda`, and the split `f = g + sum b_i`.
pub fn cz_decompose(f: &SampledField, lambda: f64, spec: &DyadicGridSpec) -> Result<CZDecomposition> {
    let grid = *f.grid();
    let n = grid.resolution();
    if spec.resolution != n {
        return Err(MzError::GridMismatch);
    }
    if !(lambda > 0.0) {
        return Err(MzError::InvalidArgument(format!(
            "level must be positive, got {lambda}"
        )));
    }
    let abs: Vec<f64> = f.values().iter().map(|v| v.abs()).collect();
    let table = AreaTable::from_values(n, &abs);
    let roots = spec.roots();
    for r in &roots {
        let avg = table.mean(r);
        if avg > lambda {
            return Err(MzError::LevelTooSmall { root_avg: avg, lambda });
        }
    }
    let mut selected = Vec::new();
    let mut stack = roots;
    while let Some(q) = stack.pop() {
        if q.side == 1 {
            continue;
        }
        for c in spec.children(&q) {
            if table.mean(&c) > lambda {
                selected.push(c);
            } else if table.sum(&c) > 0.0 {
                stack.push(c);
            }
        }
    }
    selected.sort_by_key(|c| (c.corner, c.side));
    let limit = 2f64.powi(grid.dim() as i32) * lambda;
    let values = f.values();
    let mut good = values.to_vec();
    let mut bad_parts = Vec::with_capacity(selected.len());
    let mut boundary_exemptions = Vec::new();
    for q in &selected {
        let avg_abs = table.mean(q);
        if avg_abs > limit * (1.0 + 1e-12) {
            boundary_exemptions.push(*q);
        }
        let [(a0, b0), (a1, b1)] = q.clip(n).expect("selected cubes meet the window");
        let mut block = Vec::with_capacity((b0 - a0) * (b1 - a1));
        for i0 in a0..b0 {
            block.extend_from_slice(&values[i0 * n + a1..i0 * n + b1]);
        }
        let mean = crate::parallel::pairwise_sum(&block) / block.len() as f64;
        for i0 in a0..b0 {
            for g in &mut good[i0 * n + a1..i0 * n + b1] {
                *g = mean;
            }
        }
        bad_parts.push(BadPart {
            cube: *q,
            values: block.iter().map(|v| v - mean).collect(),
        });
    }
    Ok(CZDecomposition {
        lambda,
        cubes: selected,
        good: SampledField::from_values(grid, good)?,
        bad_parts,
        boundary_exemptions,
    })
}

/// Cell mask over a clipped cube, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellMask {
    pub cells: Vec<bool>,
}

impl CellMask {
    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&b| b).count()
    }

    /// Run lengths of alternating values, starting with a run of `false`
    /// (possibly empty).
    pub fn to_runs(&self) -> Vec<usize> {
        let mut runs = Vec::new();
        let mut current = false;
        let mut len = 0;
        for &b in &self.cells {
            if b == current {
                len += 1;
            } else {
                runs.push(len);
                current = b;
                len = 1;
            }
        }
        runs.push(len);
        runs
    }

    pub fn from_runs(runs: &[usize]) -> Self {
        let mut cells = Vec::new();
        let mut v = false;
        for &r in runs {
            cells.extend(std::iter::repeat_n(v, r));
            v = !v;
        }
        Self { cells }
    }
}

#[derive(Debug, Clone)]
pub struct SparseMember {
    pub cube: Cube,
    pub level: u32,
    pub index: [i64; 2],
    /// `E_Q` over the clipped cube.
    pub major: CellMask,
}

#[derive(Debug, Clone)]
pub struct SparseFamily {
    pub grid: DyadicGridSpec,
    pub members: Vec<SparseMember>,
    pub eta: f64,
}

#[derive(Serialize, Deserialize)]
struct MemberRecord {
    level: u32,
    index: [i64; 2],
    runs: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct FamilyRecord {
    shift: [i8; 2],
    offset: [i64; 2],
    resolution: usize,
    eta: f64,
    cubes: Vec<MemberRecord>,
}

impl SparseFamily {
    pub fn to_json(&self) -> Result<String> {
        let rec = FamilyRecord {
            shift: self.grid.shift,
            offset: self.grid.offset,
            resolution: self.grid.resolution,
            eta: self.eta,
            cubes: self
                .members
                .iter()
                .map(|m| MemberRecord {
                    level: m.level,
                    index: m.index,
                    runs: m.major.to_runs(),
                })
                .collect(),
        };
        Ok(serde_json::to_string(&rec)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: FamilyRecord = serde_json::from_str(text)?;
        let grid = DyadicGridSpec {
            shift: rec.shift,
            offset: rec.offset,
            k_min: 0,
            k_max: rec.resolution.trailing_zeros(),
            resolution: rec.resolution,
        };
        let members = rec
            .cubes
            .into_iter()
            .map(|m| SparseMember {
                cube: grid.cube(m.level, m.index),
                level: m.level,
                index: m.index,
                major: CellMask::from_runs(&m.runs),
            })
            .collect();
        Ok(Self {
            grid,
            members,
            eta: rec.eta,
        })
    }

    /// Verifies `E_Q ⊆ Q`, `|E_Q| >= eta |Q|` (clipped volumes) and pairwise
    /// disjointness; returns the first violating cube.
    pub fn verify(&self) -> std::result::Result<(), (Cube, f64)> {
        let n = self.grid.resolution;
        let mut owner = vec![false; n * n];
        for m in &self.members {
            let Some([(a0, b0), (a1, b1)]) = m.cube.clip(n) else {
                return Err((m.cube, 0.0));
            };
            let w = b1 - a1;
            let total = (b0 - a0) * w;
            if m.major.cells.len() != total {
                return Err((m.cube, 0.0));
            }
            let frac = m.major.count() as f64 / total as f64;
            if frac < self.eta {
                return Err((m.cube, frac));
            }
            for (k, &inside) in m.major.cells.iter().enumerate() {
                if inside {
                    let idx = (a0 + k / w) * n + a1 + k % w;
                    if owner[idx] {
                        return Err((m.cube, frac));
                    }
                    owner[idx] = true;
                }
            }
        }
        Ok(())
    }
}

/// Stopping-time sparse family for `|f|` on one dyadic system: starting from
/// the top-level cubes, the maximal subcubes whose average exceeds `2/eta`
/// times the parent average are selected; `E_Q` is `Q` minus its selections.
pub fn build_sparse_family(f: &SampledField, spec: &DyadicGridSpec, eta: f64) -> Result<SparseFamily> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(MzError::InvalidArgument(format!("eta must lie in (0, 1), got {eta}")));
    }
    if f.is_zero() {
        return Err(MzError::InvalidArgument("sparse family needs a nonzero input".into()));
    }
    let n = f.grid().resolution();
    if spec.resolution != n {
        return Err(MzError::GridMismatch);
    }
    let abs: Vec<f64> = f.values().iter().map(|v| v.abs()).collect();
    let table = AreaTable::from_values(n, &abs);
    let threshold = 2.0 / eta;
    let mut members = Vec::new();
    let mut queue: Vec<Cube> = spec.roots();
    queue.reverse();
    while let Some(q) = queue.pop() {
        let avg = table.mean(&q);
        let mut stops = Vec::new();
        if avg > 0.0 {
            let mut stack = spec.children(&q);
            while let Some(c) = stack.pop() {
                if table.mean(&c) > threshold * avg {
                    stops.push(c);
                } else if c.side > 1 && table.sum(&c) > 0.0 {
                    stack.extend(spec.children(&c));
                }
            }
        }
        let [(a0, b0), (a1, b1)] = q.clip(n).expect("family cubes meet the window");
        let w = b1 - a1;
        let mut cells = vec![true; (b0 - a0) * w];
        for s in &stops {
            if let Some([(c0, d0), (c1, d1)]) = s.clip(n) {
                for i0 in c0..d0 {
                    for i1 in c1..d1 {
                        cells[(i0 - a0) * w + i1 - a1] = false;
                    }
                }
            }
        }
        let (level, index) = spec.locate(&q).expect("cube belongs to its system");
        members.push(SparseMember {
            cube: q,
            level,
            index,
            major: CellMask { cells },
        });
        stops.sort_by_key(|c| std::cmp::Reverse((c.corner, c.side)));
        queue.extend(stops);
    }
    let family = SparseFamily {
        grid: *spec,
        members,
        eta,
    };
    if let Err((cube, fraction)) = family.verify() {
        return Err(MzError::SparseInfeasible {
            cube: format!("{cube:?}"),
            fraction,
            eta,
        });
    }
    Ok(family)
}

fn accumulate(family: &SparseFamily, n: usize, value: impl Fn(&Cube) -> f64) -> Vec<f64> {
    let mut out = vec![0.0f64; n * n];
    for m in &family.members {
        let v = value(&m.cube);
        if v == 0.0 {
            continue;
        }
        if let Some([(a0, b0), (a1, b1)]) = m.cube.clip(n) {
            for i0 in a0..b0 {
                for o in &mut out[i0 * n + a1..i0 * n + b1] {
                    *o += v;
                }
            }
        }
    }
    out
}

/// `A_S f = sum_Q <f>_Q chi_Q`.
pub fn sparse_operator(family: &SparseFamily, f: &SampledField) -> Result<SampledField> {
    let n = f.grid().resolution();
    if family.grid.resolution != n {
        return Err(MzError::GridMismatch);
    }
    let table = AreaTable::new(f);
    SampledField::from_values(*f.grid(), accumulate(family, n, |q| table.mean(q)))
}

/// `A_S^r f = (sum_Q <f>_Q^r chi_Q)^{1/r}`.
pub fn sparse_operator_r(family: &SparseFamily, f: &SampledField, r: f64) -> Result<SampledField> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(MzError::InvalidExponent(format!(
            "sparse exponent must be positive, got {r}"
        )));
    }
    if r == 1.0 {
        return sparse_operator(family, f);
    }
    let n = f.grid().resolution();
    if family.grid.resolution != n {
        return Err(MzError::GridMismatch);
    }
    let table = AreaTable::new(f);
    for m in &family.members {
        let avg = table.mean(&m.cube);
        if avg < 0.0 && r.fract() != 0.0 {
            return Err(MzError::InvalidArgument(format!(
                "negative average {avg} on {:?} with fractional exponent {r}",
                m.cube
            )));
        }
    }
    let sum = accumulate(family, n, |q| table.mean(q).powf(r));
    SampledField::from_values(*f.grid(), sum.into_iter().map(|v| v.powf(1.0 / r)).collect())
}

/// `A_{S,r} f = sum_Q <|f|^r>_Q^{1/r} chi_Q`.
#[allow(non_snake_case)]
pub fn sparse_operator_Lr(family: &SparseFamily, f: &SampledField, r: f64) -> Result<SampledField> {
    if !(r >= 1.0) || !r.is_finite() {
        return Err(MzError::InvalidExponent(format!(
            "r-mean exponent must be >= 1, got {r}"
        )));
    }
    let n = f.grid().resolution();
    if family.grid.resolution != n {
        return Err(MzError::GridMismatch);
    }
    let powered: Vec<f64> = f.values().iter().map(|v| v.abs().powf(r)).collect();
    let table = AreaTable::from_values(n, &powered);
    SampledField::from_values(*f.grid(), accumulate(family, n, |q| table.mean(q).powf(1.0 / r)))
}

#[derive(Debug, Clone, Serialize)]
pub struct Lemma21Check {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub holds: bool,
}

/// `||A_S^r |f| ||_{L^p(w)} / ||f||_{L^p(w)}` against
/// `[w]_{A_p}^{1/p} ([w]_{A_inf}^{1/r - 1/p} + [w^{-1/(p-1)}]_{A_inf}^{1/p})`.
pub fn lemma21_bound_check(
    family: &SparseFamily,
    f: &SampledField,
    w: &Weight,
    p: f64,
    r: f64,
    bank: &CubeBank,
    slack: f64,
) -> Result<Lemma21Check> {
    if !(r > 0.0 && r < p) {
        return Err(MzError::InvalidExponent(format!("need 0 < r < p, got r={r}, p={p}")));
    }
    let af = sparse_operator_r(family, &f.abs(), r)?;
    let num = weighted_lp_norm(&af, w, p)?;
    let den = weighted_lp_norm(f, w, p)?;
    if den == 0.0 {
        return Err(MzError::InvalidArgument("input has zero weighted norm".into()));
    }
    let ap = ap_constant(w, p, bank)?;
    let ainf = ainf_constant(w, bank)?;
    let ainf_sigma = ainf_constant(&w.pow(-1.0 / (p - 1.0))?, bank)?;
    let rhs = ap.powf(1.0 / p) * (ainf.powf(1.0 / r - 1.0 / p) + ainf_sigma.powf(1.0 / p));
    let lhs = num / den;
    Ok(Lemma21Check {
        lhs,
        rhs,
        ratio: lhs / rhs,
        holds: lhs <= slack * rhs,
    })
}

/// Sparse families on all nine systems for `|f|^r`.
pub fn families_for(f: &SampledField, r: f64, eta: f64) -> Result<Vec<SparseFamily>> {
    let powered = f.map(|v| v.abs().powf(r));
    map_vec(build_grids(f.grid()), |spec| build_sparse_family(&powered, &spec, eta))
        .into_iter()
        .collect()
}
