//! Fixed-multiplier encoder optimization: self-consistent (Blahut-Arimoto
//! style) updates, exponentiated-gradient descent with finite-difference
//! gradients, or the grid oracle.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{checksum_f64, log_sum_exp};
use crate::sampling::{rng_for, simplex};
use crate::table::{Alphabet, Kernel};
use crate::world::GenerativeWorld;

use super::evaluator::{Evaluator, InfoPair};
use super::grid::grid_oracle;
use super::objective::{IboKind, IboSpec};
use super::support::Support;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    SelfConsistent,
    MirrorDescent,
    GridOracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerOptions {
    pub method: Method,
    pub max_iters: usize,
    /// Initial step of mirror descent (adapted by backtracking).
    pub step_size: f64,
    pub tolerance: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Grid spacing when `method = grid_oracle`.
    pub grid_resolution: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            method: Method::MirrorDescent,
            max_iters: 5000,
            step_size: 1.0,
            tolerance: 1e-10,
            restarts: 8,
            seed: 0,
            grid_resolution: 0.05,
        }
    }
}

impl OptimizerOptions {
    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerance must be > 0, got {}",
                self.tolerance
            )));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidArgument("restarts must be >= 1".into()));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "step_size must be finite and > 0, got {}",
                self.step_size
            )));
        }
        Ok(())
    }
}

/// Outcome of one optimization (best over restarts).
#[derive(Debug, Clone)]
pub struct Optimized {
    pub encoder: Kernel,
    pub value: f64,
    pub info: InfoPair,
    /// Objective after every accepted iterate of the winning restart,
    /// starting with its initial point.
    pub trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
struct Run {
    enc: Vec<f64>,
    value: f64,
    trace: Vec<f64>,
    converged: bool,
    iterations: usize,
}

/// IBP multiplier whose minimizers are the optimizers of `spec`, when the
/// self-consistent scheme applies.
fn ib_multiplier(spec: &IboSpec) -> Result<f64> {
    let nu = spec.nu();
    match spec.kind() {
        IboKind::Ibp => Ok(nu),
        IboKind::Pibp if nu > 0.0 => Ok(1.0 / nu),
        // (1 - beta) I(t;x_P) - I(t;x_F) is IBP(1/(1 - beta)) scaled by 1 - beta
        IboKind::Epibp if nu < 1.0 => Ok(1.0 / (1.0 - nu)),
        _ => Err(Error::InvalidArgument(format!(
            "self_consistent applies to IBP, PIBP with lambda > 0 and EPIBP with beta < 1; got {} at {nu}",
            spec.kind().name()
        ))),
    }
}

fn random_encoder(seed: u64, support: &Support, uniform: bool) -> Vec<f64> {
    let (n, k) = (support.n_rows(), support.t_size());
    let mut rng = rng_for(seed);
    let mut enc = vec![0.0; n * k];
    for x in 0..n {
        let idx = support.row(x);
        let w = if uniform {
            vec![1.0 / idx.len() as f64; idx.len()]
        } else {
            simplex(&mut rng, idx.len())
        };
        for (t, v) in idx.iter().zip(w) {
            enc[x * k + t] = v;
        }
    }
    enc
}

fn self_consistent(ev: &Evaluator, spec: &IboSpec, beta: f64, mut enc: Vec<f64>, opts: &OptimizerOptions) -> Run {
    let pf = ev.past_future();
    let (n, m, k) = (pf.n_past, pf.n_future, ev.t_size());
    // minimized form: sign * objective
    let sign = spec.direction().sign();
    let conds: Vec<Option<Vec<f64>>> = (0..n).map(|x| pf.future_given_past(x)).collect();
    let mut value = ev.objective(spec, &enc);
    let mut trace = vec![value];
    let mut converged = false;
    let mut iterations = 0;
    let mut logits = vec![0.0; k];
    while iterations < opts.max_iters {
        iterations += 1;
        let mut pt = vec![0.0; k];
        let mut ptf = vec![0.0; k * m];
        for x in 0..n {
            let px = pf.past[x];
            if px <= 0.0 {
                continue;
            }
            for t in 0..k {
                let e = enc[x * k + t];
                pt[t] += px * e;
                for f in 0..m {
                    ptf[t * m + f] += e * pf.joint[x * m + f];
                }
            }
        }
        let mut next = enc.clone();
        for x in 0..n {
            let Some(cond) = &conds[x] else { continue };
            for t in 0..k {
                logits[t] = if pt[t] <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    let mut kl = 0.0;
                    for f in 0..m {
                        let c = cond[f];
                        if c > 0.0 {
                            let q = ptf[t * m + f] / pt[t];
                            kl += if q > 0.0 { c * (c / q).ln() } else { f64::INFINITY };
                        }
                    }
                    if beta == 0.0 {
                        pt[t].ln()
                    } else {
                        pt[t].ln() - beta * kl
                    }
                };
            }
            let z = log_sum_exp(&logits);
            for t in 0..k {
                next[x * k + t] = (logits[t] - z).exp();
            }
        }
        // damp toward the current iterate if the full step does not descend
        let mut eta = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand: Vec<f64> = if eta == 1.0 {
                next.clone()
            } else {
                enc.iter().zip(&next).map(|(a, b)| (1.0 - eta) * a + eta * b).collect()
            };
            let v = ev.objective(spec, &cand);
            if sign * v <= sign * value + 1e-15 {
                accepted = Some((cand, v));
                break;
            }
            eta *= 0.5;
        }
        let Some((cand, v)) = accepted else {
            converged = true;
            break;
        };
        let delta = (v - value).abs();
        enc = cand;
        value = v;
        trace.push(value);
        if delta <= opts.tolerance {
            converged = true;
            break;
        }
    }
    Run {
        enc,
        value,
        trace,
        converged,
        iterations,
    }
}

const FD_STEP: f64 = 1e-7;
const FLOOR: f64 = 1e-250;

/// Finite-difference gradient of `sign * objective` over free entries.
fn gradient(ev: &Evaluator, spec: &IboSpec, sign: f64, enc: &[f64], base: f64, support: &Support) -> Vec<f64> {
    let (n, k) = (support.n_rows(), support.t_size());
    let pf = ev.past_future();
    let mut g = vec![0.0; n * k];
    let mut work = enc.to_vec();
    for x in 0..n {
        if pf.past[x] <= 0.0 {
            continue;
        }
        let idx = support.row(x);
        if idx.len() < 2 {
            continue;
        }
        for &t in &idx {
            let i = x * k + t;
            let e = enc[i];
            work[i] = e + FD_STEP;
            let up = sign * ev.objective(spec, &work);
            if e >= FD_STEP {
                work[i] = e - FD_STEP;
                let down = sign * ev.objective(spec, &work);
                g[i] = (up - down) / (2.0 * FD_STEP);
            } else {
                g[i] = (up - base) / FD_STEP;
            }
            work[i] = e;
        }
    }
    g
}

fn eg_step(enc: &[f64], g: &[f64], eta: f64, support: &Support, past: &[f64]) -> Vec<f64> {
    let (n, k) = (support.n_rows(), support.t_size());
    let mut out = enc.to_vec();
    for x in 0..n {
        if past[x] <= 0.0 {
            continue;
        }
        let idx = support.row(x);
        if idx.len() < 2 {
            continue;
        }
        // per-row scaling removes the p(x_P) factor carried by every gradient entry
        let scaled: Vec<f64> = idx.iter().map(|&t| g[x * k + t] / past[x]).collect();
        let gmin = scaled.iter().copied().fold(f64::INFINITY, f64::min);
        let mut z = 0.0;
        for (&t, s) in idx.iter().zip(&scaled) {
            let v = (enc[x * k + t] * (-eta * (s - gmin)).exp()).max(FLOOR);
            out[x * k + t] = v;
            z += v;
        }
        for &t in &idx {
            out[x * k + t] /= z;
        }
    }
    out
}

fn mirror_descent(ev: &Evaluator, spec: &IboSpec, support: &Support, mut enc: Vec<f64>, opts: &OptimizerOptions) -> Run {
    let sign = spec.direction().sign();
    let past = ev.past_future().past.clone();
    let mut f = sign * ev.objective(spec, &enc);
    let mut trace = vec![sign * f];
    let mut eta = opts.step_size;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iters {
        iterations += 1;
        let g = gradient(ev, spec, sign, &enc, f, support);
        let mut accepted = None;
        while eta > 1e-20 {
            let cand = eg_step(&enc, &g, eta, support, &past);
            let fc = sign * ev.objective(spec, &cand);
            if fc < f {
                accepted = Some((cand, fc));
                break;
            }
            eta *= 0.5;
        }
        let Some((cand, fc)) = accepted else {
            converged = true;
            break;
        };
        let delta = f - fc;
        enc = cand;
        f = fc;
        trace.push(sign * f);
        eta = (eta * 2.0).min(1e12);
        if delta <= opts.tolerance {
            converged = true;
            break;
        }
    }
    Run {
        enc,
        value: sign * f,
        trace,
        converged,
        iterations,
    }
}

/// `true` when no transfer of at most `tol` mass between two allowed entries
/// of one row improves the objective by more than `tol`.
pub fn is_local_optimum(ev: &Evaluator, spec: &IboSpec, support: &Support, enc: &[f64], tol: f64) -> bool {
    let sign = spec.direction().sign();
    let base = sign * ev.objective(spec, enc);
    let k = support.t_size();
    let mut work = enc.to_vec();
    for x in 0..support.n_rows() {
        let idx = support.row(x);
        for &a in &idx {
            let delta = tol.min(enc[x * k + a]);
            if delta <= 0.0 {
                continue;
            }
            for &b in &idx {
                if a == b {
                    continue;
                }
                work[x * k + a] -= delta;
                work[x * k + b] += delta;
                let v = sign * ev.objective(spec, &work);
                work[x * k + a] = enc[x * k + a];
                work[x * k + b] = enc[x * k + b];
                if v < base - tol {
                    return false;
                }
            }
        }
    }
    true
}

fn better_run(spec: &IboSpec, a: Run, b: Run) -> Run {
    let dir = spec.direction();
    if (a.value - b.value).abs() <= 1e-12 {
        if checksum_f64(&b.enc) < checksum_f64(&a.enc) {
            b
        } else {
            a
        }
    } else if dir.better(b.value, a.value) {
        b
    } else {
        a
    }
}

/// Optimizes `spec` over encoders `x_P -> t_axis`, best of `opts.restarts`
/// seeded restarts (restart `r` uses seed `opts.seed + r`).
pub fn optimize_encoder(
    world: &GenerativeWorld,
    t_axis: &Alphabet,
    spec: &IboSpec,
    opts: &OptimizerOptions,
) -> Result<Optimized> {
    opts.validate()?;
    let ev = Evaluator::new(world, t_axis.size())?;
    let support = Support::for_spec(world, spec, t_axis.size())?;
    let finish = |enc: Vec<f64>, value: f64, trace, converged, iterations| -> Result<Optimized> {
        let info = ev.info(&enc);
        Ok(Optimized {
            encoder: Kernel::new(vec![world.past_axis()], t_axis.clone(), enc)?,
            value,
            info,
            trace,
            converged,
            iterations,
        })
    };
    if opts.method == Method::GridOracle {
        let g = grid_oracle(world, t_axis, spec, opts.grid_resolution)?;
        let enc = g.encoder.values().to_vec();
        return finish(enc, g.value, vec![g.value], true, 1);
    }
    let beta = match opts.method {
        Method::SelfConsistent => Some(ib_multiplier(spec)?),
        _ => None,
    };
    let trained = spec.kind() == IboKind::Trained;
    let runs: Vec<Run> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let seed = opts.seed.wrapping_add(r as u64);
            let init = random_encoder(seed, &support, trained && r == 0);
            match beta {
                Some(b) => self_consistent(&ev, spec, b, init, opts),
                None => mirror_descent(&ev, spec, &support, init, opts),
            }
        })
        .collect();
    let best = runs
        .into_iter()
        .reduce(|a, b| better_run(spec, a, b))
        .expect("restarts >= 1");
    let local = is_local_optimum(&ev, spec, &support, &best.enc, opts.tolerance);
    finish(
        best.enc,
        best.value,
        best.trace,
        best.converged && local,
        best.iterations,
    )
}
