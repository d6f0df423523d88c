use crate::error::{Error, Result};
use crate::world::GenerativeWorld;

use super::objective::IboSpec;

/// Which encoder entries `p(t | x_P)` may be nonzero. Unrestricted except for
/// trained models, where `theta` must satisfy `L(theta, x_P) <= eps`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Support {
    n: usize,
    k: usize,
    allowed: Vec<bool>,
}

impl Support {
    pub fn full(n: usize, k: usize) -> Self {
        Self {
            n,
            k,
            allowed: vec![true; n * k],
        }
    }

    /// Support implied by `spec` on `world` with `|T| = t_size`.
    pub fn for_spec(world: &GenerativeWorld, spec: &IboSpec, t_size: usize) -> Result<Self> {
        let n = world.n_datasets();
        match spec.feasibility() {
            None => Ok(Self::full(n, t_size)),
            Some(f) => {
                if f.loss.n_theta() != t_size {
                    return Err(Error::InvalidArgument(format!(
                        "trained encoder needs |T| = |Theta| = {}, got {t_size}",
                        f.loss.n_theta()
                    )));
                }
                let allowed = f.mask(world)?;
                Ok(Self {
                    n,
                    k: t_size,
                    allowed,
                })
            }
        }
    }

    pub fn is_full(&self) -> bool {
        self.allowed.iter().all(|a| *a)
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn t_size(&self) -> usize {
        self.k
    }

    /// Allowed coordinates of row `x`. A row without any allowed entry (only
    /// possible for zero-probability datasets) is treated as unrestricted.
    pub fn row(&self, x: usize) -> Vec<usize> {
        let r = &self.allowed[x * self.k..(x + 1) * self.k];
        let idx: Vec<usize> = (0..self.k).filter(|&t| r[t]).collect();
        if idx.is_empty() {
            (0..self.k).collect()
        } else {
            idx
        }
    }

    pub fn allows(&self, x: usize, t: usize) -> bool {
        self.allowed[x * self.k + t]
    }

    /// Largest mass any row of `enc` puts outside its allowed set.
    pub fn violation(&self, enc: &[f64]) -> f64 {
        (0..self.n)
            .map(|x| {
                let allowed = self.row(x);
                (0..self.k)
                    .filter(|t| !allowed.contains(t))
                    .map(|t| enc[x * self.k + t])
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}
