//! Seeded random instances: simplex points, kernels, worlds and encoders.
//!
//! Every generator takes an explicit RNG; batteries derive per-instance RNGs
//! from a master seed as `master_seed + index`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, Exp1};

use crate::table::{Alphabet, Kernel, ProbTable};
use crate::world::GenerativeWorld;

/// Deterministic RNG for `seed`.
pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform (flat Dirichlet) point on the `n`-simplex, strictly positive.
pub fn simplex<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
        let s: f64 = v.iter().sum();
        if s > 0.0 && v.iter().all(|x| *x > 0.0) {
            return v.into_iter().map(|x| x / s).collect();
        }
    }
}

/// Random kernel with flat-Dirichlet rows.
pub fn kernel<R: Rng + ?Sized>(rng: &mut R, from: Vec<Alphabet>, to: Alphabet) -> Kernel {
    let rows: usize = from.iter().map(Alphabet::size).product();
    let k = to.size();
    let values = (0..rows).flat_map(|_| simplex(rng, k)).collect();
    Kernel::new(from, to, values).expect("random rows are normalized")
}

/// Size limits for [`world`].
#[derive(Debug, Clone, Copy)]
pub struct WorldLimits {
    pub max_phi: usize,
    pub max_x: usize,
    pub max_n: usize,
    pub max_m: usize,
}

impl Default for WorldLimits {
    fn default() -> Self {
        Self {
            max_phi: 3,
            max_x: 3,
            max_n: 3,
            max_m: 2,
        }
    }
}

/// Random world with `|Phi| in 1..=max_phi`, `|X| in 2..=max_x`,
/// `N in 1..=max_n`, `M in 0..=max_m`.
pub fn world<R: Rng + ?Sized>(rng: &mut R, limits: WorldLimits) -> GenerativeWorld {
    let nphi = rng.random_range(1..=limits.max_phi.max(1));
    let nx = rng.random_range(2..=limits.max_x.max(2));
    let n = rng.random_range(1..=limits.max_n.max(1));
    let m = rng.random_range(0..=limits.max_m);
    let phi = Alphabet::indexed("phi", nphi).expect("nonempty");
    let x = Alphabet::indexed("x", nx).expect("nonempty");
    let prior = ProbTable::new(vec![phi.clone()], simplex(rng, nphi)).expect("normalized");
    let channel = kernel(rng, vec![phi], x);
    GenerativeWorld::new(prior, channel, n, m).expect("limits fit the default budget")
}

/// Random encoder `x_P -> t` with `t_size` outputs.
pub fn encoder<R: Rng + ?Sized>(rng: &mut R, world: &GenerativeWorld, t_size: usize) -> Kernel {
    let t = Alphabet::indexed("t", t_size).expect("nonempty");
    kernel(rng, vec![world.past_axis()], t)
}
