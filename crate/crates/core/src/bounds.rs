//! Variational bounds on `I(t;x_P|x_F) - beta I(t;x_P)`: a marginal
//! approximation `q(t)`, a decoder `q(x_P|t)`, the combined upper bound and
//! its rewriting through the tempered posterior `q(t) q(x_P|t)^beta / Z`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::info::{self, Units};
use crate::numeric::{fmt12, log_sum_exp, plogpq, KahanSum};
use crate::sampling;
use crate::table::{Alphabet, Kernel, ProbTable};
use crate::world::{FullJoint, PastFuture, PAST_AXIS};

/// `q(t)` together with a decoder `q(x_P | t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalPair {
    q_t: ProbTable,
    decoder: Kernel,
    factorized: bool,
}

impl VariationalPair {
    pub fn new(q_t: ProbTable, decoder: Kernel) -> Result<Self> {
        if q_t.axes().len() != 1 {
            return Err(Error::InvalidArgument("q(t) must have one axis".into()));
        }
        if decoder.from_axes() != q_t.axes() {
            return Err(Error::AxisMismatch(
                "decoder must be conditioned on the axis of q(t)".into(),
            ));
        }
        Ok(Self {
            q_t,
            decoder,
            factorized: false,
        })
    }

    /// Decoder `q(x_P|t) = prod_i q(x_i|t)` from a per-sample kernel `T -> X`
    /// and dataset length `n`; datasets are indexed first sample most
    /// significant.
    pub fn factorized(q_t: ProbTable, per_sample: &Kernel, n: usize) -> Result<Self> {
        if per_sample.from_axes() != q_t.axes() {
            return Err(Error::AxisMismatch(
                "per-sample decoder must be conditioned on the axis of q(t)".into(),
            ));
        }
        let nx = per_sample.n_cols();
        let nd = nx.pow(n as u32);
        let past = Alphabet::power(PAST_AXIS, per_sample.to_axis(), n)?;
        let mut values = Vec::with_capacity(per_sample.n_rows() * nd);
        for t in 0..per_sample.n_rows() {
            let row = per_sample.row(t);
            for d in 0..nd {
                let mut rest = d;
                let mut prod = 1.0;
                for _ in 0..n {
                    prod *= row[rest % nx];
                    rest /= nx;
                }
                values.push(prod);
            }
        }
        let decoder = Kernel::new(q_t.axes().to_vec(), past, values)?;
        Ok(Self {
            q_t,
            decoder,
            factorized: true,
        })
    }

    /// The exact pair `(p(t), p(x_P|t))` of a joint. Columns with `p(t) = 0`
    /// get the decoder row `p(x_P)`.
    pub fn exact(fj: &FullJoint) -> Result<Self> {
        let m = Moments::of(fj)?;
        let t_axis = fj.encoder().to_axis().clone();
        let q_t = ProbTable::new(vec![t_axis.clone()], m.pt.clone())?;
        let mut dec = Vec::with_capacity(m.k * m.n);
        for t in 0..m.k {
            for x in 0..m.n {
                dec.push(if m.pt[t] > 0.0 {
                    m.past[x] * m.enc[x * m.k + t] / m.pt[t]
                } else {
                    m.past[x]
                });
            }
        }
        let decoder = Kernel::new(vec![t_axis], fj.world().past_axis(), dec)?;
        Self::new(q_t, decoder)
    }

    /// Random strictly positive pair over `t_axis` and `past_axis`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, t_axis: &Alphabet, past_axis: &Alphabet) -> Result<Self> {
        let q_t = ProbTable::new(vec![t_axis.clone()], sampling::simplex(rng, t_axis.size()))?;
        let decoder = sampling::kernel(rng, vec![t_axis.clone()], past_axis.clone());
        Self::new(q_t, decoder)
    }

    pub fn q_t(&self) -> &ProbTable {
        &self.q_t
    }

    pub fn decoder(&self) -> &Kernel {
        &self.decoder
    }

    pub fn is_factorized(&self) -> bool {
        self.factorized
    }

    pub fn t_size(&self) -> usize {
        self.q_t.len()
    }

    fn check_against(&self, fj: &FullJoint) -> Result<()> {
        if self.q_t.axes()[0] != *fj.encoder().to_axis() {
            return Err(Error::AxisMismatch(
                "q(t) axis differs from the encoder output axis".into(),
            ));
        }
        if self.decoder.n_cols() != fj.world().n_datasets() {
            return Err(Error::AxisMismatch(format!(
                "decoder has {} columns, world has {} datasets",
                self.decoder.n_cols(),
                fj.world().n_datasets()
            )));
        }
        Ok(())
    }
}

/// Quantities of a full joint that every bound needs.
struct Moments {
    n: usize,
    k: usize,
    past: Vec<f64>,
    enc: Vec<f64>,
    pt: Vec<f64>,
    pf: PastFuture,
}

impl Moments {
    fn of(fj: &FullJoint) -> Result<Self> {
        let pf = fj.past_future()?;
        let enc = fj.encoder().values().to_vec();
        let (n, k) = (pf.n_past, fj.encoder().n_cols());
        let pt = (0..k)
            .map(|t| {
                (0..n)
                    .map(|x| pf.past[x] * enc[x * k + t])
                    .collect::<KahanSum>()
                    .value()
            })
            .collect();
        Ok(Self {
            n,
            k,
            past: pf.past.clone(),
            enc,
            pt,
            pf,
        })
    }

    /// `p(t | x_F = f)`; `None` when `p(x_F = f) = 0`.
    fn t_given_future(&self, f: usize) -> Option<Vec<f64>> {
        let pfut = self.pf.future[f];
        if pfut <= 0.0 {
            return None;
        }
        let m = self.pf.n_future;
        Some(
            (0..self.k)
                .map(|t| {
                    (0..self.n)
                        .map(|x| self.pf.joint[x * m + f] * self.enc[x * self.k + t])
                        .collect::<KahanSum>()
                        .value()
                        / pfut
                })
                .collect(),
        )
    }
}

/// A bound value with its slack and, for infinite bounds, the offending cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundPart {
    pub bound: f64,
    pub slack: f64,
    pub diagnostic: Option<String>,
}

/// Upper bound `E[log p(t|x_P)/q(t)] >= I(t;x_P|x_F)` with slack
/// `E_{x_F} KL(p(t|x_F) || q)`.
pub fn cond_mi_upper_bound(fj: &FullJoint, q_t: &ProbTable) -> Result<BoundPart> {
    let m = Moments::of(fj)?;
    if q_t.len() != m.k {
        return Err(Error::AxisMismatch(format!(
            "q(t) has {} entries, encoder has {} outputs",
            q_t.len(),
            m.k
        )));
    }
    let q = q_t.values();
    let mut diagnostic = None;
    let mut acc = KahanSum::new();
    for x in 0..m.n {
        if m.past[x] <= 0.0 {
            continue;
        }
        for t in 0..m.k {
            let e = m.enc[x * m.k + t];
            if e > 0.0 && q[t] <= 0.0 && diagnostic.is_none() {
                diagnostic = Some(format!("q(t={t}) = 0 but p(t|x_P={x}) = {e}"));
            }
            acc.add(m.past[x] * plogpq(e, q[t]));
        }
    }
    let mut slack = KahanSum::new();
    for f in 0..m.pf.n_future {
        if let Some(p) = m.t_given_future(f) {
            let kl: KahanSum = p.iter().zip(q).map(|(a, b)| plogpq(*a, *b)).collect();
            slack.add(m.pf.future[f] * kl.value());
        }
    }
    Ok(BoundPart {
        bound: acc.value(),
        slack: slack.value(),
        diagnostic,
    })
}

/// Lower bound `H(x_P) + E[log q(x_P|t)] <= I(t;x_P)` with slack
/// `E_t KL(p(x_P|t) || q(x_P|t))`.
pub fn barber_agakov_lower_bound(fj: &FullJoint, decoder: &Kernel) -> Result<BoundPart> {
    let m = Moments::of(fj)?;
    if decoder.n_rows() != m.k || decoder.n_cols() != m.n {
        return Err(Error::AxisMismatch(format!(
            "decoder must be {} x {}, got {} x {}",
            m.k,
            m.n,
            decoder.n_rows(),
            decoder.n_cols()
        )));
    }
    let h = info::entropy_of(&m.past)?.nats();
    let mut diagnostic = None;
    let mut acc = KahanSum::new();
    let mut slack = KahanSum::new();
    for t in 0..m.k {
        for x in 0..m.n {
            let pxt = m.past[x] * m.enc[x * m.k + t];
            if pxt <= 0.0 {
                continue;
            }
            let q = decoder.get(t, x);
            if q <= 0.0 {
                if diagnostic.is_none() {
                    diagnostic = Some(format!("q(x_P={x}|t={t}) = 0 but p(x_P, t) = {pxt}"));
                }
                acc.add(f64::NEG_INFINITY);
                slack.add(f64::INFINITY);
            } else {
                acc.add(pxt * q.ln());
                slack.add(pxt * (pxt / m.pt[t] / q).ln());
            }
        }
    }
    let lower = if diagnostic.is_some() {
        f64::NEG_INFINITY
    } else {
        h + acc.value()
    };
    Ok(BoundPart {
        bound: lower,
        slack: slack.value(),
        diagnostic,
    })
}

/// Combined upper bound on the EPIBP-form objective.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub beta: f64,
    pub bound_value: f64,
    pub exact_ibo: f64,
    pub gap: f64,
    /// `E_{x_F} KL(p(t|x_F) || q(t))`
    pub gap_term_qt: f64,
    /// `beta E_t KL(p(x_P|t) || q(x_P|t))`
    pub gap_term_decoder: f64,
    /// `E_{x_P} log Z_beta(x_P)`
    pub logz_expectation: f64,
    /// `E_{x_P} KL(p(t|x_P) || tempered posterior)`
    pub residual: f64,
    pub diagnostic: Option<String>,
}

impl BoundReport {
    /// `-beta H(x_P) - E log Z`; equals `bound_value - residual`.
    pub fn tight_rhs(&self, h_past: f64) -> f64 {
        -self.beta * h_past - self.logz_expectation
    }
}

pub const BOUND_HEADER: &str =
    "beta,bound,exact_ibo,gap,gap_term_qt,gap_term_decoder,E_logZ,residual";

pub fn bound_csv(reports: &[BoundReport], units: Units) -> String {
    let mut out = String::from(BOUND_HEADER);
    out.push('\n');
    for r in reports {
        let cols = [
            r.bound_value,
            r.exact_ibo,
            r.gap,
            r.gap_term_qt,
            r.gap_term_decoder,
            r.logz_expectation,
            r.residual,
        ];
        out.push_str(&fmt12(r.beta));
        for c in cols {
            out.push(',');
            out.push_str(&fmt12(units.convert(c)));
        }
        out.push('\n');
    }
    out
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "beta must be finite and >= 0, got {beta}"
        )));
    }
    Ok(())
}

/// `bound = E[log p(t|x_P)/q(t)] - beta E[log q(x_P|t)] - beta H(x_P)`
/// against `I(t;x_P|x_F) - beta I(t;x_P)`.
pub fn ibo_upper_bound(fj: &FullJoint, pair: &VariationalPair, beta: f64) -> Result<BoundReport> {
    check_beta(beta)?;
    pair.check_against(fj)?;
    let r = fj.info_report()?;
    let exact_ibo = r.i_t_xp_given_xf.nats() - beta * r.i_t_xp.nats();
    let cmi = cond_mi_upper_bound(fj, pair.q_t())?;
    let (bound_value, decoder_term, diag) = if beta == 0.0 {
        (cmi.bound, 0.0, cmi.diagnostic)
    } else {
        let ba = barber_agakov_lower_bound(fj, pair.decoder())?;
        (
            cmi.bound - beta * ba.bound,
            beta * ba.slack,
            cmi.diagnostic.or(ba.diagnostic),
        )
    };
    let (rhs, residual) = tight_bound_value(fj, pair, beta)?;
    let h = r.h_xp.nats();
    Ok(BoundReport {
        beta,
        bound_value,
        exact_ibo,
        gap: bound_value - exact_ibo,
        gap_term_qt: cmi.slack,
        gap_term_decoder: decoder_term,
        logz_expectation: -beta * h - rhs,
        residual,
        diagnostic: diag,
    })
}

/// Closed-form coordinate minimization of the bound: `q(t) <- p(t)`, then
/// `q(x_P|t) <- p(x_P|t)`. Each step is the exact minimizer of its block and
/// the blocks do not interact, so one sweep reaches the minimum.
pub fn minimize_bound(fj: &FullJoint, beta: f64) -> Result<(VariationalPair, BoundReport)> {
    let pair = VariationalPair::exact(fj)?;
    let report = ibo_upper_bound(fj, &pair, beta)?;
    Ok((pair, report))
}

/// `log sum_s q(s) q(x_P|s)^beta` for dataset index `x`, in the log domain.
/// Terms with `q(s) = 0`, or `q(x_P|s) = 0` at `beta > 0`, are dropped; the
/// result is `-inf` when nothing remains.
pub fn log_z(pair: &VariationalPair, beta: f64, x: usize) -> f64 {
    let terms = log_weights(pair, beta, x);
    log_sum_exp(&terms)
}

fn log_weights(pair: &VariationalPair, beta: f64, x: usize) -> Vec<f64> {
    let q = pair.q_t.values();
    (0..q.len())
        .map(|s| {
            if q[s] <= 0.0 {
                return f64::NEG_INFINITY;
            }
            if beta == 0.0 {
                return q[s].ln();
            }
            let lik = pair.decoder.get(s, x);
            if lik <= 0.0 {
                f64::NEG_INFINITY
            } else {
                q[s].ln() + beta * lik.ln()
            }
        })
        .collect()
}

/// `q(t) q(x_P|t)^beta / Z_beta(x_P)` for dataset index `x`.
pub fn tempered_posterior(pair: &VariationalPair, beta: f64, x: usize) -> Result<ProbTable> {
    check_beta(beta)?;
    if x >= pair.decoder.n_cols() {
        return Err(Error::InvalidArgument(format!(
            "dataset index {x} out of range ({} datasets)",
            pair.decoder.n_cols()
        )));
    }
    if beta == 0.0 {
        return Ok(pair.q_t.clone());
    }
    let w = log_weights(pair, beta, x);
    let z = log_sum_exp(&w);
    if !z.is_finite() {
        return Err(Error::SupportViolation(format!(
            "Z_beta(x_P={x}) has empty support"
        )));
    }
    let post: Vec<f64> = w.iter().map(|l| (l - z).exp()).collect();
    ProbTable::new(pair.q_t.axes().to_vec(), post)
}

/// `(rhs, residual)` with `rhs = -beta H(x_P) - E log Z_beta(x_P)` and
/// `residual = E_{x_P} KL(p(t|x_P) || tempered posterior)`, so that
/// `bound = rhs + residual`.
pub fn tight_bound_value(fj: &FullJoint, pair: &VariationalPair, beta: f64) -> Result<(f64, f64)> {
    check_beta(beta)?;
    pair.check_against(fj)?;
    let m = Moments::of(fj)?;
    let h = info::entropy_of(&m.past)?.nats();
    let mut elogz = KahanSum::new();
    let mut residual = KahanSum::new();
    for x in 0..m.n {
        let px = m.past[x];
        if px <= 0.0 {
            continue;
        }
        let w = log_weights(pair, beta, x);
        let z = log_sum_exp(&w);
        if !z.is_finite() {
            return Ok((f64::INFINITY, f64::INFINITY));
        }
        elogz.add(px * z);
        let mut kl = KahanSum::new();
        for t in 0..m.k {
            let e = m.enc[x * m.k + t];
            if e > 0.0 {
                let lt = w[t] - z;
                kl.add(if lt == f64::NEG_INFINITY {
                    f64::INFINITY
                } else {
                    e * (e.ln() - lt)
                });
            }
        }
        residual.add(px * kl.value());
    }
    Ok((-beta * h - elogz.value(), residual.value()))
}

/// Encoder whose rows are the tempered posteriors of `pair`; with it the
/// factorization residual vanishes.
pub fn encoder_from_pair(pair: &VariationalPair, beta: f64) -> Result<Kernel> {
    let n = pair.decoder.n_cols();
    let mut values = Vec::with_capacity(n * pair.t_size());
    for x in 0..n {
        values.extend_from_slice(tempered_posterior(pair, beta, x)?.values());
    }
    Kernel::new(
        vec![pair.decoder.to_axis().clone()],
        pair.q_t.axes()[0].clone(),
        values,
    )
}

/// Bayes factorization of `encoder` from a reference `r(x_P)`:
/// `q(t) = sum_x r(x) p(t|x)`, `q(x|t) = r(x) p(t|x) / q(t)`. With
/// `beta = 1` the tempered posterior reproduces the encoder wherever `r > 0`.
pub fn bayes_factorization(encoder: &Kernel, reference: &[f64]) -> Result<VariationalPair> {
    let (n, k) = (encoder.n_rows(), encoder.n_cols());
    if reference.len() != n {
        return Err(Error::ShapeMismatch {
            expected: n,
            got: reference.len(),
        });
    }
    info::entropy_of(reference)?;
    let qt: Vec<f64> = (0..k)
        .map(|t| {
            (0..n)
                .map(|x| reference[x] * encoder.get(x, t))
                .collect::<KahanSum>()
                .value()
        })
        .collect();
    let mut dec = Vec::with_capacity(n * k);
    for t in 0..k {
        for x in 0..n {
            dec.push(if qt[t] > 0.0 {
                reference[x] * encoder.get(x, t) / qt[t]
            } else {
                reference[x]
            });
        }
    }
    let t_axis = encoder.to_axis().clone();
    let past = encoder.from_axes()[0].clone();
    VariationalPair::new(
        ProbTable::new(vec![t_axis.clone()], qt)?,
        Kernel::new(vec![t_axis], past, dec)?,
    )
}
