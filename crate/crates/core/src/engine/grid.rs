//! Exhaustive search over encoders whose rows lie on a regular simplex grid.

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numeric::checksum_f64;
use crate::table::{Alphabet, Kernel};
use crate::world::GenerativeWorld;

use super::evaluator::Evaluator;
use super::objective::{Direction, IboSpec};
use super::support::Support;

/// Tolerance used to decide that two grid values are equally optimal.
pub const SET_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct GridResult {
    pub encoder: Kernel,
    pub value: f64,
    pub points_evaluated: u64,
}

/// Row-wise grid points of an encoder: compositions of `K = 1/resolution`
/// spread over the allowed coordinates of each row.
#[derive(Debug, Clone)]
pub(crate) struct Grid {
    k: usize,
    units: u32,
    rows: Vec<Vec<Vec<u32>>>,
}

fn compositions(total: u32, slots: &[usize], k: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; k];
    fn rec(i: usize, left: u32, slots: &[usize], cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        let s = slots[i];
        if i + 1 == slots.len() {
            cur[s] = left;
            out.push(cur.clone());
            cur[s] = 0;
            return;
        }
        for c in (0..=left).rev() {
            cur[s] = c;
            rec(i + 1, left - c, slots, cur, out);
        }
        cur[s] = 0;
    }
    rec(0, total, slots, &mut cur, &mut out);
    out
}

/// Validates `resolution` and returns the number of grid units per row.
pub fn grid_units(resolution: f64) -> Result<u32> {
    if !(resolution > 0.0 && resolution <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "grid resolution must lie in (0, 1], got {resolution}"
        )));
    }
    let units = (1.0 / resolution).round();
    if (units * resolution - 1.0).abs() > 1e-9 || units > u32::MAX as f64 {
        return Err(Error::InvalidArgument(format!(
            "1/resolution must be an integer, got {}",
            1.0 / resolution
        )));
    }
    Ok(units as u32)
}

impl Grid {
    pub(crate) fn new(support: &Support, resolution: f64, budget: u128) -> Result<Self> {
        let units = grid_units(resolution)?;
        let k = support.t_size();
        let rows: Vec<Vec<Vec<u32>>> = (0..support.n_rows())
            .map(|x| compositions(units, &support.row(x), k))
            .collect();
        let grid = Self { k, units, rows };
        let required = grid.size();
        if required > budget {
            return Err(Error::BudgetExceeded {
                required,
                allowed: budget,
            });
        }
        Ok(grid)
    }

    /// Number of encoders on the grid.
    pub(crate) fn size(&self) -> u128 {
        self.rows
            .iter()
            .fold(1u128, |acc, r| acc.saturating_mul(r.len() as u128))
    }

    fn fill(&self, choice: &[usize], enc: &mut [f64]) {
        let scale = self.units as f64;
        for (x, &c) in choice.iter().enumerate() {
            let counts = &self.rows[x][c];
            for t in 0..self.k {
                enc[x * self.k + t] = counts[t] as f64 / scale;
            }
        }
    }

    fn counts(&self, choice: &[usize]) -> Vec<u32> {
        choice
            .iter()
            .enumerate()
            .flat_map(|(x, &c)| self.rows[x][c].iter().copied())
            .collect()
    }

    /// Visits every grid encoder whose first-row choice is `first`, in a
    /// fixed order.
    fn scan_first<F: FnMut(&[usize], &[f64])>(&self, first: usize, mut visit: F) {
        let n = self.rows.len();
        let mut choice = vec![0usize; n];
        choice[0] = first;
        let mut enc = vec![0.0; n * self.k];
        loop {
            self.fill(&choice, &mut enc);
            visit(&choice, &enc);
            let mut i = n;
            loop {
                if i == 1 {
                    return;
                }
                i -= 1;
                choice[i] += 1;
                if choice[i] < self.rows[i].len() {
                    break;
                }
                choice[i] = 0;
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Best {
    value: f64,
    enc: Vec<f64>,
}

fn pick(dir: Direction, a: Best, b: Best) -> Best {
    if dir.better(b.value, a.value) {
        b
    } else if dir.better(a.value, b.value) {
        a
    } else if checksum_f64(&b.enc) < checksum_f64(&a.enc) {
        b
    } else {
        a
    }
}

fn setup(
    world: &GenerativeWorld,
    t_axis: &Alphabet,
    spec: &IboSpec,
    resolution: f64,
) -> Result<(Evaluator, Grid)> {
    let ev = Evaluator::new(world, t_axis.size())?;
    let support = Support::for_spec(world, spec, t_axis.size())?;
    let grid = Grid::new(&support, resolution, world.budget())?;
    Ok((ev, grid))
}

/// Best grid encoder for `spec`. Ties (exactly equal values) go to the lowest
/// encoder checksum, so the result does not depend on scheduling.
pub fn grid_oracle(
    world: &GenerativeWorld,
    t_axis: &Alphabet,
    spec: &IboSpec,
    resolution: f64,
) -> Result<GridResult> {
    let (ev, grid) = setup(world, t_axis, spec, resolution)?;
    let dir = spec.direction();
    let best = (0..grid.rows[0].len())
        .into_par_iter()
        .map(|first| {
            let mut best: Option<Best> = None;
            grid.scan_first(first, |_, enc| {
                let value = ev.objective(spec, enc);
                let keep = match &best {
                    None => true,
                    Some(b) => !dir.better(b.value, value),
                };
                if keep {
                    let cand = Best {
                        value,
                        enc: enc.to_vec(),
                    };
                    best = Some(match best.take() {
                        None => cand,
                        Some(b) => pick(dir, b, cand),
                    });
                }
            });
            best.expect("each slice holds at least one point")
        })
        .reduce_with(|a, b| pick(dir, a, b))
        .expect("grid is nonempty");
    Ok(GridResult {
        encoder: Kernel::new(vec![world.past_axis()], t_axis.clone(), best.enc)?,
        value: best.value,
        points_evaluated: grid.size() as u64,
    })
}

/// All grid encoders within [`SET_TOL`] of the grid optimum, as integer
/// count matrices, together with the optimum value.
pub fn grid_optimal_set(
    world: &GenerativeWorld,
    t_axis: &Alphabet,
    spec: &IboSpec,
    resolution: f64,
) -> Result<(f64, Vec<Vec<u32>>)> {
    let best = grid_oracle(world, t_axis, spec, resolution)?;
    let (ev, grid) = setup(world, t_axis, spec, resolution)?;
    let dir = spec.direction();
    let mut set: Vec<Vec<u32>> = (0..grid.rows[0].len())
        .into_par_iter()
        .flat_map_iter(|first| {
            let mut hits = Vec::new();
            grid.scan_first(first, |choice, enc| {
                if dir.shortfall(ev.objective(spec, enc), best.value) <= SET_TOL {
                    hits.push(grid.counts(choice));
                }
            });
            hits
        })
        .collect();
    set.sort();
    Ok((best.value, set))
}

/// Canonical form of a count matrix under relabeling of `T`: columns sorted.
pub fn canonical_counts(counts: &[u32], n: usize, k: usize) -> Vec<u32> {
    let mut cols: Vec<Vec<u32>> = (0..k)
        .map(|t| (0..n).map(|x| counts[x * k + t]).collect())
        .collect();
    cols.sort();
    let mut out = vec![0; n * k];
    for (t, col) in cols.iter().enumerate() {
        for (x, v) in col.iter().enumerate() {
            out[x * k + t] = *v;
        }
    }
    out
}

/// Canonicalized set of count matrices.
pub fn canonical_set(set: &[Vec<u32>], n: usize, k: usize) -> BTreeSet<Vec<u32>> {
    set.iter().map(|c| canonical_counts(c, n, k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::objective::IboSpec;

    fn binary_world() -> GenerativeWorld {
        GenerativeWorld::model_a().with_train_size(1).unwrap()
    }

    #[test]
    fn counts_points() {
        let w = binary_world();
        let t = Alphabet::indexed("t", 2).unwrap();
        let r = grid_oracle(&w, &t, &IboSpec::ibp(1.0).unwrap(), 0.05).unwrap();
        assert_eq!(r.points_evaluated, 21 * 21);
    }

    #[test]
    fn resolution_one_is_deterministic_encoders() {
        let w = GenerativeWorld::model_a();
        let t = Alphabet::indexed("t", 2).unwrap();
        let r = grid_oracle(&w, &t, &IboSpec::pibp(0.1).unwrap(), 1.0).unwrap();
        assert_eq!(r.points_evaluated, 16);
        assert!(r.encoder.values().iter().all(|v| *v == 0.0 || *v == 1.0));
    }

    #[test]
    fn bad_resolution() {
        let w = binary_world();
        let t = Alphabet::indexed("t", 2).unwrap();
        let spec = IboSpec::ibp(1.0).unwrap();
        assert!(grid_oracle(&w, &t, &spec, 0.3).is_err());
        assert!(grid_oracle(&w, &t, &spec, 0.0).is_err());
    }

    #[test]
    fn budget_guard() {
        let w = GenerativeWorld::model_a().with_train_size(3).unwrap();
        let t = Alphabet::indexed("t", 3).unwrap();
        let e = grid_oracle(&w, &t, &IboSpec::ibp(1.0).unwrap(), 0.05).unwrap_err();
        assert!(matches!(e, Error::BudgetExceeded { .. }));
    }

    #[test]
    fn compositions_count() {
        // C(K + k - 1, k - 1) with K = 4, k = 3
        assert_eq!(compositions(4, &[0, 1, 2], 3).len(), 15);
        assert_eq!(compositions(4, &[1], 3), vec![vec![0, 4, 0]]);
    }

    #[test]
    fn canonical_form_ignores_labels() {
        let a = vec![1, 0, 0, 1, 1, 0];
        let b = vec![0, 1, 1, 0, 0, 1];
        assert_eq!(canonical_counts(&a, 3, 2), canonical_counts(&b, 3, 2));
    }
}
