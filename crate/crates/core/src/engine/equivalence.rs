use crate::error::{Error, Result};
use crate::table::Alphabet;
use crate::world::GenerativeWorld;

use super::grid::{canonical_set, grid_optimal_set};
use super::objective::IboSpec;

/// Grid-level comparison of IBP at `beta` with PIBP at `lambda = 1/beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub beta: f64,
    pub lambda: f64,
    /// Grid minimum of the IBP objective.
    pub ibp_value: f64,
    /// Grid maximum of the PIBP objective.
    pub pibp_value: f64,
    /// `|ibp_value + beta * pibp_value|`.
    pub value_residual: f64,
    pub ibp_optimal_count: usize,
    pub pibp_optimal_count: usize,
    /// Optimal sets coincide after canonicalizing the labels of `T`.
    pub sets_coincide: bool,
    pub holds: bool,
}

pub const VALUE_TOL: f64 = 1e-9;

pub fn equivalence_check(
    world: &GenerativeWorld,
    t_axis: &Alphabet,
    beta: f64,
    resolution: f64,
) -> Result<EquivalenceReport> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!("beta must be > 0, got {beta}")));
    }
    let lambda = 1.0 / beta;
    let (ibp_value, ibp_set) = grid_optimal_set(world, t_axis, &IboSpec::ibp(beta)?, resolution)?;
    let (pibp_value, pibp_set) =
        grid_optimal_set(world, t_axis, &IboSpec::pibp(lambda)?, resolution)?;
    let (n, k) = (world.n_datasets(), t_axis.size());
    let sets_coincide = canonical_set(&ibp_set, n, k) == canonical_set(&pibp_set, n, k);
    let value_residual = (ibp_value + beta * pibp_value).abs();
    Ok(EquivalenceReport {
        beta,
        lambda,
        ibp_value,
        pibp_value,
        value_residual,
        ibp_optimal_count: ibp_set.len(),
        pibp_optimal_count: pibp_set.len(),
        sets_coincide,
        holds: sets_coincide && value_residual <= VALUE_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_one_exact_negatives() {
        let w = GenerativeWorld::model_a();
        let t = Alphabet::indexed("t", 2).unwrap();
        let r = equivalence_check(&w, &t, 1.0, 0.1).unwrap();
        assert_eq!(r.ibp_value, -r.pibp_value);
        assert!(r.holds);
    }

    #[test]
    fn rejects_nonpositive_beta() {
        let w = GenerativeWorld::model_a();
        let t = Alphabet::indexed("t", 2).unwrap();
        assert!(equivalence_check(&w, &t, 0.0, 0.1).is_err());
    }
}
