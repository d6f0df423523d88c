//! Finite generative worlds `x_F <- phi -> x_P -> t` and their exact joints.

use crate::error::{Error, Result};
use crate::info::{self, InfoValue};
use crate::numeric::KahanSum;
use crate::table::{Alphabet, Kernel, ProbTable};

/// Axis name of the training dataset `x_P`.
pub const PAST_AXIS: &str = "x_P";
/// Axis name of the future dataset `x_F`.
pub const FUTURE_AXIS: &str = "x_F";
/// Default enumeration budget in table cells.
pub const DEFAULT_BUDGET: u128 = 10_000_000;

/// Prior over the data-generating parameter, iid observation channel, and the
/// sizes of the training and future datasets.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerativeWorld {
    phi_prior: ProbTable,
    obs_channel: Kernel,
    train_size: usize,
    future_size: usize,
    budget: u128,
}

/// Exact `p(x_P, x_F)` as a dense `|X|^N x |X|^M` row-major matrix, plus both
/// marginals. Every information quantity of an encoder depends on the world
/// only through this matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PastFuture {
    pub past: Vec<f64>,
    pub future: Vec<f64>,
    pub joint: Vec<f64>,
    pub n_past: usize,
    pub n_future: usize,
}

impl PastFuture {
    /// `p(x_F | x_P)` row for dataset `d`; `None` when `p(x_P = d) = 0`.
    pub fn future_given_past(&self, d: usize) -> Option<Vec<f64>> {
        let p = self.past[d];
        if p <= 0.0 {
            return None;
        }
        Some(
            self.joint[d * self.n_future..(d + 1) * self.n_future]
                .iter()
                .map(|v| v / p)
                .collect(),
        )
    }
}

fn cells(parts: &[usize]) -> u128 {
    parts
        .iter()
        .fold(1u128, |acc, &p| acc.saturating_mul(p as u128))
}

fn pow_cells(base: usize, exp: usize) -> u128 {
    (0..exp).fold(1u128, |acc, _| acc.saturating_mul(base as u128))
}

impl GenerativeWorld {
    pub fn new(
        phi_prior: ProbTable,
        obs_channel: Kernel,
        train_size: usize,
        future_size: usize,
    ) -> Result<Self> {
        Self::with_budget(phi_prior, obs_channel, train_size, future_size, DEFAULT_BUDGET)
    }

    pub fn with_budget(
        phi_prior: ProbTable,
        obs_channel: Kernel,
        train_size: usize,
        future_size: usize,
        budget: u128,
    ) -> Result<Self> {
        if phi_prior.axes().len() != 1 {
            return Err(Error::InvalidArgument(
                "phi prior must have exactly one axis".into(),
            ));
        }
        if obs_channel.from_axes() != phi_prior.axes() {
            return Err(Error::AxisMismatch(
                "observation channel must be conditioned on the phi axis".into(),
            ));
        }
        if train_size == 0 {
            return Err(Error::InvalidArgument("training size N must be >= 1".into()));
        }
        let phi = &phi_prior.axes()[0].name;
        let x = &obs_channel.to_axis().name;
        for reserved in [PAST_AXIS, FUTURE_AXIS] {
            if phi == reserved || x == reserved {
                return Err(Error::InvalidArgument(format!(
                    "axis name `{reserved}` is reserved for datasets"
                )));
            }
        }
        let world = Self {
            phi_prior,
            obs_channel,
            train_size,
            future_size,
            budget,
        };
        world.check_budget(1)?;
        Ok(world)
    }

    /// Model A: `phi` uniform on {0,1}, `p(x = phi | phi) = 0.9`, `N = 2`, `M = 1`.
    pub fn model_a() -> Self {
        let phi = Alphabet::indexed("phi", 2).expect("valid");
        let x = Alphabet::indexed("x", 2).expect("valid");
        let channel = Kernel::new(vec![phi.clone()], x, vec![0.9, 0.1, 0.1, 0.9]).expect("valid");
        Self::new(ProbTable::uniform(phi), channel, 2, 1).expect("model A fits the budget")
    }

    pub fn with_future_size(&self, m: usize) -> Result<Self> {
        Self::with_budget(
            self.phi_prior.clone(),
            self.obs_channel.clone(),
            self.train_size,
            m,
            self.budget,
        )
    }

    pub fn with_train_size(&self, n: usize) -> Result<Self> {
        Self::with_budget(
            self.phi_prior.clone(),
            self.obs_channel.clone(),
            n,
            self.future_size,
            self.budget,
        )
    }

    pub fn phi_prior(&self) -> &ProbTable {
        &self.phi_prior
    }

    pub fn obs_channel(&self) -> &Kernel {
        &self.obs_channel
    }

    pub fn phi_axis(&self) -> &Alphabet {
        &self.phi_prior.axes()[0]
    }

    pub fn x_axis(&self) -> &Alphabet {
        self.obs_channel.to_axis()
    }

    pub fn train_size(&self) -> usize {
        self.train_size
    }

    pub fn future_size(&self) -> usize {
        self.future_size
    }

    pub fn budget(&self) -> u128 {
        self.budget
    }

    /// Cell count of the full joint with a representation alphabet of size `t_size`.
    pub fn joint_cells(&self, t_size: usize) -> u128 {
        let nx = self.x_axis().size();
        cells(&[self.phi_axis().size(), t_size])
            .saturating_mul(pow_cells(nx, self.train_size))
            .saturating_mul(pow_cells(nx, self.future_size))
    }

    pub fn check_budget(&self, t_size: usize) -> Result<()> {
        let required = self.joint_cells(t_size);
        if required > self.budget {
            return Err(Error::BudgetExceeded {
                required,
                allowed: self.budget,
            });
        }
        Ok(())
    }

    /// Composite alphabet `X^length` named `name`.
    pub fn dataset_axis(&self, name: &str, length: usize) -> Alphabet {
        Alphabet::power(name, self.x_axis(), length).expect("power of a valid alphabet is valid")
    }

    pub fn past_axis(&self) -> Alphabet {
        self.dataset_axis(PAST_AXIS, self.train_size)
    }

    pub fn future_axis(&self) -> Alphabet {
        self.dataset_axis(FUTURE_AXIS, self.future_size)
    }

    pub fn n_datasets(&self) -> usize {
        self.x_axis().size().pow(self.train_size as u32)
    }

    /// Decodes flat dataset index `d` of length `length` into sample indices.
    pub fn decode_dataset(&self, mut d: usize, length: usize) -> Vec<usize> {
        let nx = self.x_axis().size();
        let mut out = vec![0; length];
        for slot in out.iter_mut().rev() {
            *slot = d % nx;
            d /= nx;
        }
        out
    }

    /// `p(dataset | phi)` for every `phi` and every dataset of `length`
    /// samples; `|Phi| x |X|^length`, row-major.
    pub fn likelihood(&self, length: usize) -> Vec<f64> {
        let nx = self.x_axis().size();
        let nd = nx.pow(length as u32);
        let nphi = self.phi_axis().size();
        let mut out = Vec::with_capacity(nphi * nd);
        for f in 0..nphi {
            let row = self.obs_channel.row(f);
            for d in 0..nd {
                let prod = self
                    .decode_dataset(d, length)
                    .iter()
                    .fold(1.0, |acc, &x| acc * row[x]);
                out.push(prod);
            }
        }
        out
    }

    /// Marginal `p(x)` of a single observation.
    pub fn x_marginal(&self) -> Vec<f64> {
        let nx = self.x_axis().size();
        (0..nx)
            .map(|x| {
                self.phi_prior
                    .values()
                    .iter()
                    .enumerate()
                    .map(|(f, p)| p * self.obs_channel.get(f, x))
                    .collect::<KahanSum>()
                    .value()
            })
            .collect()
    }

    /// Exact `p(x_P, x_F)` with marginals.
    pub fn past_future(&self) -> PastFuture {
        let lp = self.likelihood(self.train_size);
        let lf = self.likelihood(self.future_size);
        let n_past = self.n_datasets();
        let n_future = self.x_axis().size().pow(self.future_size as u32);
        let prior = self.phi_prior.values();
        let mut joint = vec![0.0; n_past * n_future];
        for d in 0..n_past {
            for e in 0..n_future {
                joint[d * n_future + e] = prior
                    .iter()
                    .enumerate()
                    .map(|(f, p)| p * lp[f * n_past + d] * lf[f * n_future + e])
                    .collect::<KahanSum>()
                    .value();
            }
        }
        let past = (0..n_past)
            .map(|d| crate::numeric::sum(&joint[d * n_future..(d + 1) * n_future]))
            .collect();
        let future = (0..n_future)
            .map(|e| {
                (0..n_past)
                    .map(|d| joint[d * n_future + e])
                    .collect::<KahanSum>()
                    .value()
            })
            .collect();
        PastFuture {
            past,
            future,
            joint,
            n_past,
            n_future,
        }
    }

    /// Checks that `encoder` maps the training-dataset axis of this world.
    pub fn check_encoder(&self, encoder: &Kernel) -> Result<()> {
        if encoder.from_axes().len() != 1 || encoder.from_axes()[0] != self.past_axis() {
            return Err(Error::AxisMismatch(format!(
                "encoder must be conditioned on `{PAST_AXIS}` with {} symbols",
                self.n_datasets()
            )));
        }
        let t = &encoder.to_axis().name;
        if t == &self.phi_axis().name || t == &self.x_axis().name || t == FUTURE_AXIS {
            return Err(Error::OverlappingAxes(t.clone()));
        }
        Ok(())
    }

    /// Exact joint `p(phi) prod p(x_i|phi) prod p(x_j|phi) p(t|x_P)` over
    /// `(phi, x_P, x_F, t)`; the `x_F` axis is omitted when `M = 0`.
    pub fn build_joint(&self, encoder: &Kernel) -> Result<FullJoint> {
        self.check_encoder(encoder)?;
        self.check_budget(encoder.n_cols())?;
        let lp = self.likelihood(self.train_size);
        let lf = self.likelihood(self.future_size);
        let n_past = self.n_datasets();
        let n_future = lf.len() / self.phi_axis().size();
        let k = encoder.n_cols();
        let mut values = Vec::with_capacity(self.joint_cells(k) as usize);
        for (f, pf) in self.phi_prior.values().iter().enumerate() {
            for d in 0..n_past {
                let a = pf * lp[f * n_past + d];
                let row = encoder.row(d);
                for e in 0..n_future {
                    let b = a * lf[f * n_future + e];
                    values.extend(row.iter().map(|w| b * w));
                }
            }
        }
        let mut axes = vec![self.phi_axis().clone(), self.past_axis()];
        if self.future_size > 0 {
            axes.push(self.future_axis());
        }
        axes.push(encoder.to_axis().clone());
        Ok(FullJoint {
            joint: ProbTable::new(axes, values)?,
            encoder: encoder.clone(),
            world: self.clone(),
        })
    }
}

/// The exact joint of a world and an encoder, with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct FullJoint {
    joint: ProbTable,
    encoder: Kernel,
    world: GenerativeWorld,
}

/// The information quantities of one encoder, all in nats.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfoReport {
    pub i_t_xp: InfoValue,
    pub i_t_xf: InfoValue,
    pub i_t_xp_given_xf: InfoValue,
    pub i_t_xpxf: InfoValue,
    pub h_xp: InfoValue,
}

impl FullJoint {
    pub fn table(&self) -> &ProbTable {
        &self.joint
    }

    pub fn encoder(&self) -> &Kernel {
        &self.encoder
    }

    pub fn world(&self) -> &GenerativeWorld {
        &self.world
    }

    pub fn repr_axis(&self) -> &str {
        &self.encoder.to_axis().name
    }

    fn future_axes(&self) -> Vec<&str> {
        if self.world.future_size > 0 {
            vec![FUTURE_AXIS]
        } else {
            vec![]
        }
    }

    /// `p(x_P)` computed from the joint.
    pub fn past_marginal(&self) -> Result<ProbTable> {
        self.joint.marginalize(&[PAST_AXIS])
    }

    /// `p(x_P, x_F)` as a [`PastFuture`] extracted from the joint (a single
    /// unit future cell when `M = 0`).
    pub fn past_future(&self) -> Result<PastFuture> {
        let fut = self.future_axes();
        let mut keep = vec![PAST_AXIS];
        keep.extend(&fut);
        let m = self.joint.marginalize(&keep)?;
        let n_past = self.world.n_datasets();
        let n_future = m.len() / n_past;
        let past = self.past_marginal()?.values().to_vec();
        let future = if fut.is_empty() {
            vec![1.0]
        } else {
            self.joint.marginalize(&fut)?.values().to_vec()
        };
        Ok(PastFuture {
            past,
            future,
            joint: m.values().to_vec(),
            n_past,
            n_future,
        })
    }

    pub fn info_report(&self) -> Result<InfoReport> {
        let t = self.repr_axis();
        let fut = self.future_axes();
        let mut both = vec![PAST_AXIS];
        both.extend(&fut);
        Ok(InfoReport {
            i_t_xp: info::mutual_information(&self.joint, &[t], &[PAST_AXIS])?,
            i_t_xf: info::mutual_information(&self.joint, &[t], &fut)?,
            i_t_xp_given_xf: info::conditional_mutual_information(
                &self.joint,
                &[t],
                &[PAST_AXIS],
                &fut,
            )?,
            i_t_xpxf: info::mutual_information(&self.joint, &[t], &both)?,
            h_xp: info::entropy(&self.past_marginal()?)?,
        })
    }

    /// `(|I(t;x_F,x_P) - I(t;x_P)|, |I(t;x_F) - I(t;x_P) + I(t;x_P|x_F)|)`.
    pub fn decomposition_check(&self) -> Result<(f64, f64)> {
        let r = self.info_report()?;
        Ok((
            (r.i_t_xpxf.nats() - r.i_t_xp.nats()).abs(),
            (r.i_t_xf.nats() - r.i_t_xp.nats() + r.i_t_xp_given_xf.nats()).abs(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn identity_encoder(w: &GenerativeWorld) -> Kernel {
        let n = w.n_datasets();
        let t = Alphabet::indexed("t", n).unwrap();
        Kernel::deterministic(vec![w.past_axis()], t, |r| r).unwrap()
    }

    fn constant_encoder(w: &GenerativeWorld, k: usize) -> Kernel {
        let t = Alphabet::indexed("t", k).unwrap();
        let dist: Vec<f64> = (0..k).map(|i| (i + 1) as f64).collect();
        let s: f64 = dist.iter().sum();
        let dist: Vec<f64> = dist.iter().map(|v| v / s).collect();
        Kernel::constant(vec![w.past_axis()], t, &dist).unwrap()
    }

    #[test]
    fn model_a_dataset_probabilities() {
        let w = GenerativeWorld::model_a();
        let pf = w.past_future();
        // 0.5*0.81 + 0.5*0.01 and 0.5*0.09 + 0.5*0.09
        assert_abs_diff_eq!(pf.past[0], 0.41, epsilon = 1e-15);
        assert_abs_diff_eq!(pf.past[1], 0.09, epsilon = 1e-15);
        assert_abs_diff_eq!(pf.past[2], 0.09, epsilon = 1e-15);
        assert_abs_diff_eq!(pf.past[3], 0.41, epsilon = 1e-15);
        assert_abs_diff_eq!(w.x_marginal()[0], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn empty_future_set() {
        let w = GenerativeWorld::model_a().with_future_size(0).unwrap();
        let fj = w.build_joint(&identity_encoder(&w)).unwrap();
        assert_eq!(fj.table().axes().len(), 3);
        let past = fj.past_marginal().unwrap();
        let direct = w.past_future().past;
        for (a, b) in past.values().iter().zip(&direct) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
        let r = fj.info_report().unwrap();
        assert_eq!(r.i_t_xf.nats(), 0.0);
        assert_abs_diff_eq!(r.i_t_xp_given_xf.nats(), r.i_t_xp.nats(), epsilon = 1e-15);
    }

    #[test]
    fn identity_encoder_reports_dataset_entropy() {
        let w = GenerativeWorld::model_a();
        let r = w.build_joint(&identity_encoder(&w)).unwrap().info_report().unwrap();
        // -(2*0.41 ln 0.41 + 2*0.09 ln 0.09)
        let oracle = -(2.0 * 0.41 * 0.41f64.ln() + 2.0 * 0.09 * 0.09f64.ln());
        assert_abs_diff_eq!(r.h_xp.nats(), oracle, epsilon = 1e-14);
        assert_abs_diff_eq!(r.i_t_xp.nats(), r.h_xp.nats(), epsilon = 1e-14);
    }

    #[test]
    fn identity_encoder_future_information_is_past_future_mi() {
        let w = GenerativeWorld::model_a();
        let r = w.build_joint(&identity_encoder(&w)).unwrap().info_report().unwrap();
        // brute-force MI on the 4x2 (x_P, x_F) marginal
        let pf = w.past_future();
        let mut mi = 0.0;
        for d in 0..4 {
            for e in 0..2 {
                let p = pf.joint[d * 2 + e];
                mi += p * (p / (pf.past[d] * pf.future[e])).ln();
            }
        }
        assert_abs_diff_eq!(r.i_t_xf.nats(), mi, epsilon = 1e-14);
    }

    #[test]
    fn constant_encoder_is_uninformative() {
        let w = GenerativeWorld::model_a();
        let fj = w.build_joint(&constant_encoder(&w, 3)).unwrap();
        let r = fj.info_report().unwrap();
        assert!(r.i_t_xp.nats() < 1e-15);
        assert!(r.i_t_xf.nats() < 1e-15);
        let (a, b) = fj.decomposition_check().unwrap();
        assert!(a < 1e-15 && b < 1e-15);
    }

    #[test]
    fn noiseless_channel_reveals_phi() {
        let phi = Alphabet::indexed("phi", 3).unwrap();
        let x = Alphabet::indexed("x", 3).unwrap();
        let ch = Kernel::deterministic(vec![phi.clone()], x, |r| r).unwrap();
        let prior = ProbTable::new(vec![phi], vec![0.2, 0.3, 0.5]).unwrap();
        let w = GenerativeWorld::new(prior.clone(), ch, 2, 0).unwrap();
        let fj = w.build_joint(&constant_encoder(&w, 2)).unwrap();
        let i = info::mutual_information(fj.table(), &[PAST_AXIS], &["phi"]).unwrap();
        assert_abs_diff_eq!(i.nats(), info::entropy(&prior).unwrap().nats(), epsilon = 1e-14);
    }

    #[test]
    fn budget_guard_reports_counts() {
        let phi = Alphabet::indexed("phi", 2).unwrap();
        let x = Alphabet::indexed("x", 10).unwrap();
        let ch = Kernel::constant(vec![phi.clone()], x, &[0.1; 10]).unwrap();
        let err = GenerativeWorld::new(ProbTable::uniform(phi), ch, 7, 1).unwrap_err();
        match err {
            Error::BudgetExceeded { required, allowed } => {
                assert_eq!(required, 2 * 10u128.pow(8));
                assert_eq!(allowed, DEFAULT_BUDGET);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn encoder_axis_checked() {
        let w = GenerativeWorld::model_a();
        let bad = Kernel::constant(
            vec![Alphabet::indexed("x_P", 3).unwrap()],
            Alphabet::indexed("t", 2).unwrap(),
            &[0.5, 0.5],
        )
        .unwrap();
        assert!(w.build_joint(&bad).is_err());
    }

    #[test]
    fn fulljoint_markov_structure() {
        let w = GenerativeWorld::model_a();
        let t = Alphabet::indexed("t", 2).unwrap();
        let enc = Kernel::new(
            vec![w.past_axis()],
            t,
            vec![0.7, 0.3, 0.2, 0.8, 0.5, 0.5, 0.1, 0.9],
        )
        .unwrap();
        let fj = w.build_joint(&enc).unwrap();
        // p(x_F | phi, x_P, t) = p(x_F | phi)
        let k = fj.table().permute(&["phi", "x_P", "t", "x_F"]).unwrap().condition(&["phi", "x_P", "t"]).unwrap();
        for r in 0..k.n_rows() {
            let phi = r / 8;
            for e in 0..2 {
                assert_abs_diff_eq!(k.get(r, e), w.obs_channel().get(phi, e), epsilon = 1e-12);
            }
        }
        // p(t | phi, x_P, x_F) = p(t | x_P)
        let k = fj.table().condition(&["phi", "x_P", "x_F"]).unwrap();
        for r in 0..k.n_rows() {
            let d = (r / 2) % 4;
            for c in 0..2 {
                assert_abs_diff_eq!(k.get(r, c), enc.get(d, c), epsilon = 1e-12);
            }
        }
        // marginalizing t recovers the world
        let m = fj.table().marginalize(&["phi", "x_P", "x_F"]).unwrap();
        let w0 = w.build_joint(&Kernel::constant(vec![w.past_axis()], Alphabet::indexed("t", 1).unwrap(), &[1.0]).unwrap()).unwrap();
        let m0 = w0.table().marginalize(&["phi", "x_P", "x_F"]).unwrap();
        assert!(m.max_abs_diff(&m0).unwrap() < 1e-12);
    }
}
