//! Closed-form information quantities of an encoder, computed straight from
//! `p(x_P, x_F)` on a flat row-major encoder matrix. This is the inner loop of
//! every optimizer and of the grid oracle.

use crate::error::{Error, Result};
use crate::world::{GenerativeWorld, PastFuture};

use super::objective::IboSpec;

/// `I(t;x_P)` and `I(t;x_F)` in nats. `I(t;x_P|x_F)` follows from the Markov
/// chain as their difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfoPair {
    pub i_past: f64,
    pub i_future: f64,
}

impl InfoPair {
    pub fn i_past_given_future(&self) -> f64 {
        (self.i_past - self.i_future).max(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct Evaluator {
    pf: PastFuture,
    k: usize,
}

impl Evaluator {
    pub fn new(world: &GenerativeWorld, t_size: usize) -> Result<Self> {
        if t_size == 0 {
            return Err(Error::InvalidArgument("|T| must be >= 1".into()));
        }
        world.check_budget(t_size)?;
        Ok(Self {
            pf: world.past_future(),
            k: t_size,
        })
    }

    pub fn from_past_future(pf: PastFuture, t_size: usize) -> Self {
        Self { pf, k: t_size }
    }

    pub fn past_future(&self) -> &PastFuture {
        &self.pf
    }

    pub fn n_rows(&self) -> usize {
        self.pf.n_past
    }

    pub fn t_size(&self) -> usize {
        self.k
    }

    /// Information pair of the `n_rows x t_size` encoder `enc`. Rows need not
    /// be normalized; the formulas are evaluated on the linear extension,
    /// which is what finite differences need.
    pub fn info(&self, enc: &[f64]) -> InfoPair {
        let (n, m, k) = (self.pf.n_past, self.pf.n_future, self.k);
        debug_assert_eq!(enc.len(), n * k);
        let mut pt = vec![0.0; k];
        let mut ptf = vec![0.0; k * m];
        for x in 0..n {
            let px = self.pf.past[x];
            if px <= 0.0 {
                continue;
            }
            let row = &enc[x * k..(x + 1) * k];
            let jrow = &self.pf.joint[x * m..(x + 1) * m];
            for (t, &e) in row.iter().enumerate() {
                if e <= 0.0 {
                    continue;
                }
                pt[t] += px * e;
                let dst = &mut ptf[t * m..(t + 1) * m];
                for (d, j) in dst.iter_mut().zip(jrow) {
                    *d += e * j;
                }
            }
        }
        let mut i_past = 0.0;
        for x in 0..n {
            let px = self.pf.past[x];
            if px <= 0.0 {
                continue;
            }
            for (t, &e) in enc[x * k..(x + 1) * k].iter().enumerate() {
                if e > 0.0 && pt[t] > 0.0 {
                    i_past += px * e * (e / pt[t]).ln();
                }
            }
        }
        let mut i_future = 0.0;
        for t in 0..k {
            if pt[t] <= 0.0 {
                continue;
            }
            for f in 0..m {
                let p = ptf[t * m + f];
                let q = pt[t] * self.pf.future[f];
                if p > 0.0 && q > 0.0 {
                    i_future += p * (p / q).ln();
                }
            }
        }
        InfoPair {
            i_past: i_past.max(0.0),
            i_future: i_future.max(0.0),
        }
    }

    pub fn objective(&self, spec: &IboSpec, enc: &[f64]) -> f64 {
        let ip = self.info(enc);
        spec.value(ip.i_past, ip.i_future, ip.i_past_given_future())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{Alphabet, Kernel};
    use approx::assert_abs_diff_eq;

    #[test]
    fn agrees_with_full_joint() {
        let w = GenerativeWorld::model_a();
        let ev = Evaluator::new(&w, 3).unwrap();
        let enc = vec![0.7, 0.2, 0.1, 0.1, 0.1, 0.8, 0.3, 0.3, 0.4, 0.0, 0.5, 0.5];
        let k = Kernel::new(vec![w.past_axis()], Alphabet::indexed("t", 3).unwrap(), enc.clone())
            .unwrap();
        let r = w.build_joint(&k).unwrap().info_report().unwrap();
        let ip = ev.info(&enc);
        assert_abs_diff_eq!(ip.i_past, r.i_t_xp.nats(), epsilon = 1e-13);
        assert_abs_diff_eq!(ip.i_future, r.i_t_xf.nats(), epsilon = 1e-13);
        assert_abs_diff_eq!(
            ip.i_past_given_future(),
            r.i_t_xp_given_xf.nats(),
            epsilon = 1e-13
        );
    }

    #[test]
    fn zero_t_rejected() {
        assert!(Evaluator::new(&GenerativeWorld::model_a(), 0).is_err());
    }
}
