//! Axis-parallel cubes in cell units, summed-area tables, shifted dyadic
//! lattices and cube banks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::field::{GridSpec, SampledField};

/// Cube `[c0, c0 + side) x [c1, c1 + side)` in cell indices. May extend past
/// the window; all measures use the clipped part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cube {
    pub corner: [i64; 2],
    pub side: i64,
}

impl Cube {
    pub fn new(corner: [i64; 2], side: i64) -> Self {
        Self { corner, side }
    }

    /// Clipped index ranges `[lo, hi)` per axis, or `None` if disjoint from the window.
    pub fn clip(&self, n: usize) -> Option<[(usize, usize); 2]> {
        let n = n as i64;
        let mut out = [(0usize, 0usize); 2];
        for (slot, &c) in out.iter_mut().zip(&self.corner) {
            let lo = c.max(0);
            let hi = (c + self.side).min(n);
            if lo >= hi {
                return None;
            }
            *slot = (lo as usize, hi as usize);
        }
        Some(out)
    }

    pub fn clipped_cells(&self, n: usize) -> usize {
        self.clip(n)
            .map(|[(a0, b0), (a1, b1)]| (b0 - a0) * (b1 - a1))
            .unwrap_or(0)
    }

    pub fn contains_cell(&self, i0: i64, i1: i64) -> bool {
        i0 >= self.corner[0]
            && i0 < self.corner[0] + self.side
            && i1 >= self.corner[1]
            && i1 < self.corner[1] + self.side
    }

    pub fn contains(&self, other: &Cube) -> bool {
        (0..2).all(|a| other.corner[a] >= self.corner[a] && other.corner[a] + other.side <= self.corner[a] + self.side)
    }

    /// Concentric dilation by an odd integer factor (`3Q` for `factor = 3`).
    pub fn dilate(&self, factor: i64) -> Cube {
        let grow = (factor - 1) * self.side / 2;
        Cube {
            corner: [self.corner[0] - grow, self.corner[1] - grow],
            side: self.side * factor,
        }
    }

    pub fn lies_in_window(&self, n: usize) -> bool {
        let n = n as i64;
        (0..2).all(|a| self.corner[a] >= 0 && self.corner[a] + self.side <= n)
    }

    /// The `3^n` probe cells: first, middle and last cell per axis.
    pub fn probe_cells(&self) -> Vec<[i64; 2]> {
        let pos = |a: usize| {
            let c = self.corner[a];
            [c, c + self.side / 2, c + self.side - 1]
        };
        let p0 = pos(0);
        let p1 = pos(1);
        let mut out = Vec::with_capacity(9);
        for a in p0 {
            for b in p1 {
                if !out.contains(&[a, b]) {
                    out.push([a, b]);
                }
            }
        }
        out
    }
}

/// Summed-area table for O(1) cube sums.
pub struct AreaTable {
    n: usize,
    table: Vec<f64>,
}

impl AreaTable {
    pub fn new(field: &SampledField) -> Self {
        Self::from_values(field.grid().resolution(), field.values())
    }

    pub fn from_values(n: usize, values: &[f64]) -> Self {
        let m = n + 1;
        let mut table = vec![0.0; m * m];
        for i0 in 0..n {
            let mut row = 0.0;
            for i1 in 0..n {
                row += values[i0 * n + i1];
                table[(i0 + 1) * m + i1 + 1] = table[i0 * m + i1 + 1] + row;
            }
        }
        Self { n, table }
    }

    /// Sum over the clipped cube.
    pub fn sum(&self, cube: &Cube) -> f64 {
        match cube.clip(self.n) {
            Some(r) => self.sum_ranges(r),
            None => 0.0,
        }
    }

    pub fn sum_ranges(&self, [(a0, b0), (a1, b1)]: [(usize, usize); 2]) -> f64 {
        let m = self.n + 1;
        self.table[b0 * m + b1] - self.table[a0 * m + b1] - self.table[b0 * m + a1] + self.table[a0 * m + a1]
    }

    /// Mean over the clipped cube (0 if disjoint from the window).
    pub fn mean(&self, cube: &Cube) -> f64 {
        match cube.clip(self.n) {
            Some(r) => {
                let cells = (r[0].1 - r[0].0) * (r[1].1 - r[1].0);
                self.sum_ranges(r) / cells as f64
            }
            None => 0.0,
        }
    }
}

/// Offset magnitude (cells) of the one-third shift for windows up to `n` cells:
/// the binary pattern `0101...01`, whose residue modulo `2^k` is within one
/// cell of `2^k / 3` or `2^{k+1} / 3` at every level.
pub fn third_shift(n: usize) -> i64 {
    let mut c: i64 = 0;
    let mut bit: i64 = 1;
    while bit < n as i64 {
        c += bit;
        bit <<= 2;
    }
    c
}

/// Per-axis offsets of the `3^n` shifted lattices, shifts drawn from `{0, 1/3, -1/3}`.
pub fn shift_offsets(n: usize) -> Vec<[i64; 2]> {
    let c = third_shift(n);
    let opts = [0, c, -c];
    let mut out = Vec::with_capacity(9);
    for a in opts {
        for b in opts {
            out.push([a, b]);
        }
    }
    out
}

/// Cubes of side `side` (cells) in the lattice with the given offset that meet the window.
pub fn lattice_level(n: usize, offset: [i64; 2], side: i64) -> Vec<Cube> {
    let n = n as i64;
    let first = |o: i64| {
        // largest corner <= 0 congruent to o modulo side
        o.rem_euclid(side) - if o.rem_euclid(side) > 0 { side } else { 0 }
    };
    let s0 = first(offset[0]);
    let s1 = first(offset[1]);
    let mut out = Vec::new();
    let mut c0 = s0;
    while c0 < n {
        let mut c1 = s1;
        while c1 < n {
            out.push(Cube::new([c0, c1], side));
            c1 += side;
        }
        c0 += side;
    }
    out
}

/// A finite family of cubes used for suprema over cubes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CubeBank {
    pub cubes: Vec<Cube>,
}

impl CubeBank {
    /// All cubes of the nine shifted lattices with power-of-two sides in
    /// `[min_side, max_side]` cells that lie entirely in the window.
    pub fn dyadic(grid: &GridSpec, min_side: i64, max_side: i64) -> Self {
        let n = grid.resolution();
        let mut cubes = Vec::new();
        for offset in shift_offsets(n) {
            let mut side = (min_side.max(1) as u64).next_power_of_two() as i64;
            while side <= max_side.min(n as i64) {
                cubes.extend(
                    lattice_level(n, offset, side)
                        .into_iter()
                        .filter(|c| c.lies_in_window(n)),
                );
                side *= 2;
            }
        }
        cubes.sort_by_key(|c| (c.side, c.corner));
        cubes.dedup();
        Self { cubes }
    }

    /// Seeded random cubes (sides in `[min_side, n/2]` cells) inside the window;
    /// half of them straddle the window center.
    pub fn random(grid: &GridSpec, count: usize, min_side: i64, seed: u64) -> Self {
        let n = grid.resolution() as i64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cubes = Vec::with_capacity(count);
        for k in 0..count {
            let side = rng.gen_range(min_side..=(n / 2).max(min_side));
            let corner = if k % 2 == 0 {
                // origin sits between cells n/2 - 1 and n/2
                let lo0 = (n / 2 - side + 1).max(0);
                let hi0 = (n / 2 - 1).min(n - side);
                [rng.gen_range(lo0..=hi0), rng.gen_range(lo0..=hi0)]
            } else {
                [rng.gen_range(0..=n - side), rng.gen_range(0..=n - side)]
            };
            cubes.push(Cube::new(corner, side));
        }
        Self { cubes }
    }

    /// Cubes centered at the origin (even sides) with sides from `min_side` to `n`.
    pub fn centered(grid: &GridSpec, min_side: i64) -> Self {
        let n = grid.resolution() as i64;
        let mut cubes = Vec::new();
        let mut side = min_side + (min_side % 2);
        while side <= n {
            cubes.push(Cube::new([n / 2 - side / 2, n / 2 - side / 2], side));
            side += 2;
        }
        Self { cubes }
    }

    /// The default bank for weight constants: shifted dyadic cubes from `4h`
    /// up, origin-centered cubes, and `random` seeded cubes.
    pub fn standard(grid: &GridSpec, random: usize, seed: u64) -> Self {
        let n = grid.resolution() as i64;
        let mut bank = Self::dyadic(grid, 4, n);
        bank.extend(Self::centered(grid, 4));
        bank.extend(Self::random(grid, random, 4, seed));
        bank
    }

    pub fn extend(&mut self, other: CubeBank) {
        self.cubes.extend(other.cubes);
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn third_shift_tracks_one_third() {
        let c = third_shift(256);
        assert_eq!(c, 85);
        for k in 1..8 {
            let s = 1i64 << k;
            let frac = c.rem_euclid(s) as f64 / s as f64;
            let d = (frac - 1.0 / 3.0).abs().min((frac - 2.0 / 3.0).abs());
            assert!(d <= 1.0 / s as f64 + 1e-12, "k={k} frac={frac}");
        }
    }

    #[test]
    fn lattice_level_tiles_window() {
        let n = 32;
        for off in shift_offsets(n) {
            for side in [1, 2, 4, 8, 16, 32] {
                let cubes = lattice_level(n, off, side);
                let mut count = vec![0u8; n * n];
                for c in &cubes {
                    if let Some([(a0, b0), (a1, b1)]) = c.clip(n) {
                        for i in a0..b0 {
                            for j in a1..b1 {
                                count[i * n + j] += 1;
                            }
                        }
                    }
                }
                assert!(count.iter().all(|&c| c == 1));
            }
        }
    }

    #[test]
    fn area_table_sums() {
        let g = GridSpec::new(1.0, 16).unwrap();
        let vals: Vec<f64> = (0..256).map(|k| k as f64).collect();
        let f = SampledField::from_values(g, vals.clone()).unwrap();
        let t = AreaTable::new(&f);
        let cube = Cube::new([3, 5], 4);
        let mut direct = 0.0;
        for i in 3..7 {
            for j in 5..9 {
                direct += vals[i * 16 + j];
            }
        }
        assert_eq!(t.sum(&cube), direct);
        let big = Cube::new([-4, -4], 40);
        assert_eq!(t.sum(&big), vals.iter().sum::<f64>());
        assert_eq!(t.mean(&Cube::new([20, 20], 2)), 0.0);
    }

    #[test]
    fn probe_cells_count() {
        assert_eq!(Cube::new([0, 0], 4).probe_cells().len(), 9);
        assert_eq!(Cube::new([0, 0], 1).probe_cells().len(), 1);
    }
}
