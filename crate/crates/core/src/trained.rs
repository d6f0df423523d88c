//! Trained models as encoders `p(theta | x_P)`: empirical losses, Gibbs
//! posteriors, the mutual-information generalization bound and the
//! loss-constrained objective.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{ibo_upper_bound, BoundReport, VariationalPair};
use crate::engine::{self, IboSpec, Method, OptimizerOptions};
use crate::error::{Error, Result};
use crate::info::{InfoValue, Units};
use crate::numeric::{fmt12, log_sum_exp, KahanSum};
use crate::sampling::{self, rng_for, WorldLimits};
use crate::table::{Alphabet, Kernel, ProbTable};
use crate::world::{FullJoint, GenerativeWorld};

/// Slack used when comparing an empirical loss with `eps`.
pub const FEASIBILITY_TOL: f64 = 1e-12;

/// `loss(theta, x)` on finite alphabets.
#[derive(Debug, Clone, PartialEq)]
pub struct LossTable {
    theta: Alphabet,
    x: Alphabet,
    loss: Vec<f64>,
    range: (f64, f64),
}

impl LossTable {
    pub fn new(theta: Alphabet, x: Alphabet, loss: Vec<f64>) -> Result<Self> {
        let expected = theta.size() * x.size();
        if loss.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                got: loss.len(),
            });
        }
        if let Some((i, v)) = loss.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite {
                index: i,
                value: *v,
            });
        }
        let lo = loss.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = loss.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            theta,
            x,
            loss,
            range: (lo, hi),
        })
    }

    /// `[theta != x]` with `Theta` a copy of `X` named `theta`.
    pub fn zero_one(x: &Alphabet) -> Self {
        let n = x.size();
        let loss = (0..n * n)
            .map(|i| if i / n == i % n { 0.0 } else { 1.0 })
            .collect();
        Self::new(x.renamed("theta"), x.clone(), loss).expect("square 0/1 table is valid")
    }

    pub fn theta_axis(&self) -> &Alphabet {
        &self.theta
    }

    pub fn x_axis(&self) -> &Alphabet {
        &self.x
    }

    pub fn n_theta(&self) -> usize {
        self.theta.size()
    }

    pub fn n_x(&self) -> usize {
        self.x.size()
    }

    pub fn get(&self, theta: usize, x: usize) -> f64 {
        self.loss[theta * self.x.size() + x]
    }

    pub fn row(&self, theta: usize) -> &[f64] {
        &self.loss[theta * self.x.size()..(theta + 1) * self.x.size()]
    }

    pub fn values(&self) -> &[f64] {
        &self.loss
    }

    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    fn check_world(&self, world: &GenerativeWorld) -> Result<()> {
        if self.x.symbols != world.x_axis().symbols {
            return Err(Error::AxisMismatch(format!(
                "loss table x symbols {:?} differ from the world's {:?}",
                self.x.symbols,
                world.x_axis().symbols
            )));
        }
        Ok(())
    }
}

/// Mean of `loss(theta, x_i)` over `dataset` (sample indices).
pub fn empirical_loss(lt: &LossTable, theta: usize, dataset: &[usize]) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("dataset is empty".into()));
    }
    if theta >= lt.n_theta() {
        return Err(Error::InvalidArgument(format!("theta index {theta} out of range")));
    }
    if let Some(x) = dataset.iter().find(|x| **x >= lt.n_x()) {
        return Err(Error::InvalidArgument(format!("sample index {x} out of range")));
    }
    let s: KahanSum = dataset.iter().map(|&x| lt.get(theta, x)).collect();
    Ok(s.value() / dataset.len() as f64)
}

/// [`empirical_loss`] addressed by symbols.
pub fn empirical_loss_symbols(lt: &LossTable, theta: &str, dataset: &[&str]) -> Result<f64> {
    let t = lt
        .theta
        .index_of(theta)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown theta symbol `{theta}`")))?;
    let xs = dataset
        .iter()
        .map(|s| {
            lt.x.index_of(s)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown x symbol `{s}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    empirical_loss(lt, t, &xs)
}

/// `L(theta, d)` for every training dataset `d` of `world`, `|X^N| x |Theta|`.
pub fn dataset_losses(lt: &LossTable, world: &GenerativeWorld) -> Result<Vec<f64>> {
    lt.check_world(world)?;
    let n = world.n_datasets();
    let mut out = Vec::with_capacity(n * lt.n_theta());
    for d in 0..n {
        let xs = world.decode_dataset(d, world.train_size());
        for t in 0..lt.n_theta() {
            out.push(empirical_loss(lt, t, &xs)?);
        }
    }
    Ok(out)
}

fn check_prior(lt: &LossTable, prior: &ProbTable) -> Result<()> {
    if prior.axes().len() != 1 || prior.len() != lt.n_theta() {
        return Err(Error::AxisMismatch(format!(
            "prior must be a single axis over {} parameters",
            lt.n_theta()
        )));
    }
    Ok(())
}

/// `prior(theta) exp(-alpha N L(theta, dataset))`, normalized in the log domain.
pub fn gibbs_posterior(lt: &LossTable, prior: &ProbTable, alpha: f64, dataset: &[usize]) -> Result<ProbTable> {
    check_prior(lt, prior)?;
    if !(alpha >= 0.0) || alpha.is_nan() {
        return Err(Error::InvalidArgument(format!("alpha must be >= 0, got {alpha}")));
    }
    if alpha == 0.0 {
        return Ok(prior.clone());
    }
    let n = dataset.len() as f64;
    let logw = (0..lt.n_theta())
        .map(|t| {
            let p = prior.values()[t];
            Ok(if p <= 0.0 {
                f64::NEG_INFINITY
            } else {
                p.ln() - alpha * n * empirical_loss(lt, t, dataset)?
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    let z = log_sum_exp(&logw);
    let post = logw.iter().map(|l| (l - z).exp()).collect();
    ProbTable::new(prior.axes().to_vec(), post)
}

/// Encoder `x_P -> theta` whose rows are Gibbs posteriors.
pub fn gibbs_encoder(lt: &LossTable, prior: &ProbTable, alpha: f64, world: &GenerativeWorld) -> Result<Kernel> {
    lt.check_world(world)?;
    let mut values = Vec::with_capacity(world.n_datasets() * lt.n_theta());
    for d in 0..world.n_datasets() {
        let xs = world.decode_dataset(d, world.train_size());
        values.extend_from_slice(gibbs_posterior(lt, prior, alpha, &xs)?.values());
    }
    Kernel::new(vec![world.past_axis()], prior.axes()[0].clone(), values)
}

/// Deterministic `theta = argmin L(theta, x_P)`, ties to the lowest index.
pub fn argmin_encoder(lt: &LossTable, world: &GenerativeWorld) -> Result<Kernel> {
    let losses = dataset_losses(lt, world)?;
    let k = lt.n_theta();
    Kernel::deterministic(vec![world.past_axis()], lt.theta.clone(), |d| {
        let row = &losses[d * k..(d + 1) * k];
        let mut best = 0;
        for t in 1..k {
            if row[t] < row[best] {
                best = t;
            }
        }
        best
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMethod {
    HoeffdingRange,
    CgfScan,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaEstimate {
    pub sigma: f64,
    pub method: SigmaMethod,
}

/// Log-spaced `alpha` magnitudes in `[0.01, 100]` used by the CGF scan.
pub fn cgf_alpha_grid() -> Vec<f64> {
    (0..=400).map(|i| 10f64.powf(-2.0 + i as f64 / 100.0)).collect()
}

/// Subgaussian parameter of `loss(theta, x)` for `x ~ p(x)`.
pub fn estimate_sigma(lt: &LossTable, world: &GenerativeWorld, theta: usize, method: SigmaMethod) -> Result<SigmaEstimate> {
    lt.check_world(world)?;
    if theta >= lt.n_theta() {
        return Err(Error::InvalidArgument(format!("theta index {theta} out of range")));
    }
    let px = world.x_marginal();
    let support: Vec<usize> = (0..px.len()).filter(|&x| px[x] > 0.0).collect();
    let row = lt.row(theta);
    let sigma = match method {
        SigmaMethod::HoeffdingRange => {
            let lo = support.iter().map(|&x| row[x]).fold(f64::INFINITY, f64::min);
            let hi = support.iter().map(|&x| row[x]).fold(f64::NEG_INFINITY, f64::max);
            (hi - lo) / 2.0
        }
        SigmaMethod::CgfScan => {
            let mean: f64 = support.iter().map(|&x| px[x] * row[x]).collect::<KahanSum>().value();
            let mut best: f64 = 0.0;
            for a in cgf_alpha_grid() {
                for alpha in [a, -a] {
                    let terms: Vec<f64> = support
                        .iter()
                        .map(|&x| px[x].ln() + alpha * (row[x] - mean))
                        .collect();
                    let cgf = log_sum_exp(&terms).max(0.0);
                    best = best.max((2.0 * cgf).sqrt() / alpha.abs());
                }
            }
            best
        }
    };
    Ok(SigmaEstimate { sigma, method })
}

/// Largest per-parameter estimate (the bound needs a `sigma` valid for every theta).
pub fn sigma_for_all(lt: &LossTable, world: &GenerativeWorld, method: SigmaMethod) -> Result<SigmaEstimate> {
    let mut sigma: f64 = 0.0;
    for t in 0..lt.n_theta() {
        sigma = sigma.max(estimate_sigma(lt, world, t, method)?.sigma);
    }
    Ok(SigmaEstimate { sigma, method })
}

/// Exact generalization gap against `sqrt(2 sigma^2 / n I(theta; x'))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenBoundReport {
    /// `|E loss(theta, x) - E L(theta, x')|` with the fresh `x` drawn from
    /// the same `phi` as the training set.
    pub exact_gap: f64,
    /// The same gap with the fresh `x` drawn from the marginal `p(x)`.
    pub marginal_gap: f64,
    pub mi_bound: f64,
    pub i_theta_data: InfoValue,
    pub sigma: f64,
    pub n: usize,
    pub holds: bool,
}

pub fn generalization_report(
    world: &GenerativeWorld,
    encoder: &Kernel,
    lt: &LossTable,
    method: SigmaMethod,
) -> Result<GenBoundReport> {
    lt.check_world(world)?;
    let nd = world.n_datasets();
    let k = lt.n_theta();
    if encoder.n_rows() != nd || encoder.n_cols() != k {
        return Err(Error::AxisMismatch(format!(
            "encoder must be {nd} x {k}, got {} x {}",
            encoder.n_rows(),
            encoder.n_cols()
        )));
    }
    let nphi = world.phi_axis().size();
    let required = (nphi as u128) * (nd as u128) * (k as u128);
    if required > world.budget() {
        return Err(Error::BudgetExceeded {
            required,
            allowed: world.budget(),
        });
    }
    let sigma = sigma_for_all(lt, world, method)?.sigma;
    let lik = world.likelihood(world.train_size());
    let prior = world.phi_prior().values();
    let losses = dataset_losses(lt, world)?;
    let px = world.x_marginal();
    let mean_loss: Vec<f64> = (0..k)
        .map(|t| (0..px.len()).map(|x| px[x] * lt.get(t, x)).collect::<KahanSum>().value())
        .collect();
    let mut train = KahanSum::new();
    let mut fresh_same = KahanSum::new();
    let mut fresh_marginal = KahanSum::new();
    let mut p_data = vec![0.0; nd];
    for f in 0..nphi {
        let ch = world.obs_channel().row(f);
        let phi_loss: Vec<f64> = (0..k)
            .map(|t| ch.iter().zip(lt.row(t)).map(|(p, l)| p * l).collect::<KahanSum>().value())
            .collect();
        for d in 0..nd {
            let w = prior[f] * lik[f * nd + d];
            if w <= 0.0 {
                continue;
            }
            p_data[d] += w;
            for t in 0..k {
                let e = encoder.get(d, t);
                if e <= 0.0 {
                    continue;
                }
                train.add(w * e * losses[d * k + t]);
                fresh_same.add(w * e * phi_loss[t]);
                fresh_marginal.add(w * e * mean_loss[t]);
            }
        }
    }
    let mut p_theta = vec![0.0; k];
    for d in 0..nd {
        for t in 0..k {
            p_theta[t] += p_data[d] * encoder.get(d, t);
        }
    }
    let mut mi = KahanSum::new();
    for d in 0..nd {
        for t in 0..k {
            let e = encoder.get(d, t);
            if p_data[d] > 0.0 && e > 0.0 {
                mi.add(p_data[d] * e * (e / p_theta[t]).ln());
            }
        }
    }
    let i_theta_data = InfoValue::from_nats(mi.value())?;
    let n = world.train_size();
    let mi_bound = (2.0 * sigma * sigma / n as f64 * i_theta_data.nats()).sqrt();
    let exact_gap = (fresh_same.value() - train.value()).abs();
    Ok(GenBoundReport {
        exact_gap,
        marginal_gap: (fresh_marginal.value() - train.value()).abs(),
        mi_bound,
        i_theta_data,
        sigma,
        n,
        holds: exact_gap <= mi_bound + 1e-12,
    })
}

pub fn genbound_header(units: Units) -> String {
    format!("alpha,I_theta_data_{},sigma,n,exact_gap,mi_bound,holds", units.suffix())
}

/// CSV with one row per `(alpha, report)`.
pub fn genbound_csv(rows: &[(f64, GenBoundReport)], units: Units) -> String {
    let mut out = genbound_header(units);
    out.push('\n');
    for (alpha, r) in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt12(*alpha),
            fmt12(r.i_theta_data.in_units(units)),
            fmt12(r.sigma),
            r.n,
            fmt12(r.exact_gap),
            fmt12(r.mi_bound),
            r.holds
        ));
    }
    out
}

/// One randomly drawn `(world, loss, alpha)` triple of the battery.
#[derive(Debug, Clone)]
pub struct BatteryCase {
    pub seed: u64,
    pub alpha: f64,
    pub report: GenBoundReport,
}

/// Draws `count` triples, triple `i` from seed `master_seed + i`: a random
/// world (`|Phi|, |X| <= 3`, `N <= 3`), uniform random losses in `[0, 1]`
/// over `2..=4` parameters, a random prior, and `alpha` log-uniform in
/// `[0.01, 100]`; the encoder is the Gibbs posterior.
pub fn theorem_battery(master_seed: u64, count: usize) -> Result<Vec<BatteryCase>> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let seed = master_seed.wrapping_add(i as u64);
            let mut rng = rng_for(seed);
            let limits = WorldLimits {
                max_m: 0,
                ..WorldLimits::default()
            };
            let world = sampling::world(&mut rng, limits);
            let k = rng.random_range(2..=4);
            let theta = Alphabet::indexed("theta", k)?;
            let loss: Vec<f64> = (0..k * world.x_axis().size()).map(|_| rng.random::<f64>()).collect();
            let lt = LossTable::new(theta.clone(), world.x_axis().clone(), loss)?;
            let prior = ProbTable::new(vec![theta], sampling::simplex(&mut rng, k))?;
            let alpha = 10f64.powf(rng.random_range(-2.0..=2.0));
            let enc = gibbs_encoder(&lt, &prior, alpha, &world)?;
            let report = generalization_report(&world, &enc, &lt, SigmaMethod::HoeffdingRange)?;
            Ok(BatteryCase { seed, alpha, report })
        })
        .collect()
}

/// Hard constraint `L(theta, x_P) <= epsilon` on encoder rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Feasibility {
    pub loss: LossTable,
    pub epsilon: f64,
}

impl Feasibility {
    pub fn new(loss: LossTable, epsilon: f64) -> Result<Self> {
        if epsilon.is_nan() || epsilon < 0.0 {
            return Err(Error::InvalidArgument(format!("epsilon must be >= 0, got {epsilon}")));
        }
        Ok(Self { loss, epsilon })
    }

    /// `|X^N| x |Theta|` mask of allowed entries. Errors when a dataset of
    /// positive probability has no feasible parameter.
    pub fn mask(&self, world: &GenerativeWorld) -> Result<Vec<bool>> {
        let losses = dataset_losses(&self.loss, world)?;
        let mask: Vec<bool> = losses
            .iter()
            .map(|l| *l <= self.epsilon + FEASIBILITY_TOL)
            .collect();
        let k = self.loss.n_theta();
        let past = world.past_future().past;
        let symbols = &world.past_axis().symbols;
        let offenders: Vec<&str> = (0..world.n_datasets())
            .filter(|&d| past[d] > 0.0 && !mask[d * k..(d + 1) * k].iter().any(|a| *a))
            .map(|d| symbols[d].as_str())
            .collect();
        if !offenders.is_empty() {
            return Err(Error::Infeasible(format!(
                "no parameter has empirical loss <= {} on dataset(s) {}",
                self.epsilon,
                offenders.join(", ")
            )));
        }
        Ok(mask)
    }
}

/// `{theta : L(theta, dataset) <= eps}`, possibly empty.
pub fn feasible_set(lt: &LossTable, dataset: &[usize], epsilon: f64) -> Result<Vec<usize>> {
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::InvalidArgument(format!("epsilon must be >= 0, got {epsilon}")));
    }
    let mut out = Vec::new();
    for t in 0..lt.n_theta() {
        if empirical_loss(lt, t, dataset)? <= epsilon + FEASIBILITY_TOL {
            out.push(t);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct TrainedReport {
    pub encoder: Kernel,
    pub lambda: f64,
    pub epsilon: f64,
    /// `I(theta;x_F) + lambda I(theta;x_P)` (minimized).
    pub minimized_value: f64,
    /// `I(theta;x_P|x_F) - (1 + lambda) I(theta;x_P)` at the same encoder.
    pub ibo_value: f64,
    pub i_theta_xp: f64,
    pub i_theta_xf: f64,
    /// Restricted grid-oracle optimum of the IBO form, when within budget.
    pub grid_ibo_value: Option<f64>,
    /// Largest row mass outside the feasible set.
    pub max_violation: f64,
    pub converged: bool,
}

pub fn trained_header(units: Units) -> String {
    let u = units.suffix();
    format!(
        "lambda,epsilon,minimized_value,ibo_value,I_theta_xP_{u},I_theta_xF_{u},grid_ibo_value,max_violation,converged,encoder_checksum"
    )
}

pub fn trained_csv(rows: &[TrainedReport], units: Units) -> String {
    let mut out = trained_header(units);
    out.push('\n');
    for r in rows {
        let grid = r
            .grid_ibo_value
            .map(|v| fmt12(units.convert(v)))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            fmt12(r.lambda),
            fmt12(r.epsilon),
            fmt12(units.convert(r.minimized_value)),
            fmt12(units.convert(r.ibo_value)),
            fmt12(units.convert(r.i_theta_xp)),
            fmt12(units.convert(r.i_theta_xf)),
            grid,
            fmt12(r.max_violation),
            r.converged,
            r.encoder.checksum()
        ));
    }
    out
}

/// Minimizes `I(theta;x_F) + lambda I(theta;x_P)` over encoders supported on
/// the feasible sets, by mirror descent on the restricted simplices; the
/// restricted grid oracle (at `opts.grid_resolution`) is run as a cross-check
/// when it fits the budget.
pub fn optimize_trained_ibo(
    world: &GenerativeWorld,
    lt: &LossTable,
    epsilon: f64,
    lambda: f64,
    opts: &OptimizerOptions,
) -> Result<TrainedReport> {
    let feas = Feasibility::new(lt.clone(), epsilon)?;
    let spec = IboSpec::trained(lambda, feas)?;
    let mut o = opts.clone();
    o.method = Method::MirrorDescent;
    let t_axis = lt.theta_axis().clone();
    let r = engine::optimize_encoder(world, &t_axis, &spec, &o)?;
    let grid_ibo_value = match engine::grid_oracle(world, &t_axis, &spec, opts.grid_resolution) {
        Ok(g) => Some(g.value),
        Err(Error::BudgetExceeded { .. }) => None,
        Err(e) => return Err(e),
    };
    let support = engine::Support::for_spec(world, &spec, t_axis.size())?;
    let max_violation = support.violation(r.encoder.values());
    let report = world.build_joint(&r.encoder)?.info_report()?;
    let (ip, jf) = (report.i_t_xp.nats(), report.i_t_xf.nats());
    Ok(TrainedReport {
        lambda,
        epsilon,
        minimized_value: jf + lambda * ip,
        ibo_value: report.i_t_xp_given_xf.nats() - (1.0 + lambda) * ip,
        i_theta_xp: ip,
        i_theta_xf: jf,
        grid_ibo_value,
        max_violation,
        converged: r.converged,
        encoder: r.encoder,
    })
}

/// The variational bound applied to a trained encoder with `beta = 1 + lambda`.
pub fn trained_variational_bound(fj: &FullJoint, pair: &VariationalPair, lambda: f64) -> Result<BoundReport> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
    }
    ibo_upper_bound(fj, pair, 1.0 + lambda)
}
