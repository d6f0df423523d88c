//! Exact entropy, KL divergence, mutual information and conditional mutual
//! information over [`ProbTable`]s, in nats.

use std::fmt;

use crate::error::{Error, Result};
use crate::numeric::{neg_plogp, plogpq, KahanSum};
use crate::table::{ProbTable, NORM_TOL};

/// Tolerance below zero tolerated (and clamped) for information quantities.
pub const NEG_TOL: f64 = 1e-12;

/// A nonnegative information quantity in nats, possibly `+inf`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct InfoValue(f64);

impl InfoValue {
    pub const ZERO: InfoValue = InfoValue(0.0);
    pub const INFINITE: InfoValue = InfoValue(f64::INFINITY);

    /// Clamps values in `[-1e-12, 0)` to zero; rejects anything more negative or NaN.
    pub fn from_nats(raw: f64) -> Result<Self> {
        if raw.is_nan() {
            return Err(Error::NegativeInformation(raw));
        }
        if raw < -NEG_TOL {
            return Err(Error::NegativeInformation(raw));
        }
        Ok(InfoValue(raw.max(0.0)))
    }

    pub fn nats(self) -> f64 {
        self.0
    }

    pub fn bits(self) -> f64 {
        self.0 / std::f64::consts::LN_2
    }

    pub fn in_units(self, units: Units) -> f64 {
        match units {
            Units::Nats => self.nats(),
            Units::Bits => self.bits(),
        }
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }
}

impl fmt::Display for InfoValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} nats", self.0)
    }
}

/// Output units for information quantities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Units {
    #[default]
    Nats,
    Bits,
}

impl Units {
    pub fn convert(self, nats: f64) -> f64 {
        match self {
            Units::Nats => nats,
            Units::Bits => nats / std::f64::consts::LN_2,
        }
    }

    pub fn suffix(self) -> &'static str {
        match self {
            Units::Nats => "nats",
            Units::Bits => "bits",
        }
    }
}

/// Shannon entropy of the full table (joint entropy when it has several axes).
pub fn entropy(p: &ProbTable) -> Result<InfoValue> {
    let acc: KahanSum = p.values().iter().map(|&v| neg_plogp(v)).collect();
    InfoValue::from_nats(acc.value())
}

/// Entropy of a raw probability vector, validating normalization first.
pub fn entropy_of(p: &[f64]) -> Result<InfoValue> {
    for (index, &value) in p.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite { index, value });
        }
        if value < -NORM_TOL {
            return Err(Error::NegativeProbability { index, value });
        }
    }
    let total = crate::numeric::sum(p);
    if (1.0 - total).abs() > NORM_TOL {
        return Err(Error::NotNormalized {
            sum: total,
            deficit: 1.0 - total,
        });
    }
    let acc: KahanSum = p.iter().map(|&v| neg_plogp(v.max(0.0))).collect();
    InfoValue::from_nats(acc.value())
}

/// `KL(p || q)`; `+inf` when `p` is not absolutely continuous w.r.t. `q`.
pub fn kl_divergence(p: &ProbTable, q: &ProbTable) -> Result<InfoValue> {
    if p.axes() != q.axes() {
        return Err(Error::AxisMismatch(
            "KL divergence needs identical axes".into(),
        ));
    }
    kl_of(p.values(), q.values())
}

/// `KL(p || q)` over raw vectors of equal length.
pub fn kl_of(p: &[f64], q: &[f64]) -> Result<InfoValue> {
    if p.len() != q.len() {
        return Err(Error::AxisMismatch(format!(
            "lengths differ: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    let mut acc = KahanSum::new();
    for (&a, &b) in p.iter().zip(q) {
        let t = plogpq(a, b);
        if t == f64::INFINITY {
            return Ok(InfoValue::INFINITE);
        }
        acc.add(t);
    }
    InfoValue::from_nats(acc.value())
}

fn check_disjoint(sets: &[&[&str]]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for set in sets {
        for n in *set {
            if !seen.insert(*n) {
                return Err(Error::OverlappingAxes(n.to_string()));
            }
        }
    }
    Ok(())
}

/// Names from `wanted` in the order they appear in the table; fixes the
/// summation order independently of how the caller lists the axes.
fn canonical<'a>(joint: &'a ProbTable, wanted: &[&[&str]]) -> Result<Vec<&'a str>> {
    for set in wanted {
        for n in *set {
            joint.axis_index(n)?;
        }
    }
    Ok(joint
        .axes()
        .iter()
        .map(|a| a.name.as_str())
        .filter(|n| wanted.iter().any(|s| s.contains(n)))
        .collect())
}

/// For each cell of `table`, the flat index into the marginal over `subset`
/// (subset listed in table order).
fn projection(table: &ProbTable, subset: &[&str]) -> Result<Vec<usize>> {
    let shape = table.shape();
    let positions: Vec<Option<usize>> = table
        .axes()
        .iter()
        .map(|a| subset.iter().position(|n| *n == a.name))
        .collect();
    let sub_shape: Vec<usize> = subset
        .iter()
        .map(|n| table.axis(n).map(|a| a.size()))
        .collect::<Result<_>>()?;
    let sub_strides = crate::table::strides(&sub_shape);
    let mut idx = vec![0usize; shape.len()];
    let mut out = Vec::with_capacity(table.len());
    for _ in 0..table.len() {
        let mut o = 0;
        for (d, p) in positions.iter().enumerate() {
            if let Some(p) = p {
                o += idx[d] * sub_strides[*p];
            }
        }
        out.push(o);
        crate::table::increment(&mut idx, &shape);
    }
    Ok(out)
}

fn subset_in_order<'a>(order: &[&'a str], set: &[&str]) -> Vec<&'a str> {
    order.iter().copied().filter(|n| set.contains(n)).collect()
}

/// `I(A; B)` = KL(joint || product of marginals). Axes not in `a` or `b` are
/// marginalized first. An empty side gives zero.
pub fn mutual_information(joint: &ProbTable, a: &[&str], b: &[&str]) -> Result<InfoValue> {
    check_disjoint(&[a, b])?;
    let order = canonical(joint, &[a, b])?;
    if a.is_empty() || b.is_empty() {
        return Ok(InfoValue::ZERO);
    }
    let m = joint.marginalize(&order)?;
    let a_ord = subset_in_order(&order, a);
    let b_ord = subset_in_order(&order, b);
    let pa = m.marginalize(&a_ord)?;
    let pb = m.marginalize(&b_ord)?;
    let ia = projection(&m, &a_ord)?;
    let ib = projection(&m, &b_ord)?;
    let mut acc = KahanSum::new();
    for (cell, &p) in m.values().iter().enumerate() {
        if p > 0.0 {
            let q = pa.values()[ia[cell]] * pb.values()[ib[cell]];
            acc.add(p * (p / q).ln());
        }
    }
    InfoValue::from_nats(acc.value())
}

/// `I(A; B | C)` by the defining sum
/// `E[log p(a,b,c) p(c) / (p(a,c) p(b,c))]` over exact marginals.
/// An empty `c` reduces to [`mutual_information`].
pub fn conditional_mutual_information(
    joint: &ProbTable,
    a: &[&str],
    b: &[&str],
    c: &[&str],
) -> Result<InfoValue> {
    check_disjoint(&[a, b, c])?;
    let order = canonical(joint, &[a, b, c])?;
    if a.is_empty() || b.is_empty() {
        return Ok(InfoValue::ZERO);
    }
    if c.is_empty() {
        return mutual_information(joint, a, b);
    }
    let m = joint.marginalize(&order)?;
    let ac: Vec<&str> = order
        .iter()
        .copied()
        .filter(|n| a.contains(n) || c.contains(n))
        .collect();
    let bc: Vec<&str> = order
        .iter()
        .copied()
        .filter(|n| b.contains(n) || c.contains(n))
        .collect();
    let c_ord = subset_in_order(&order, c);
    let pac = m.marginalize(&ac)?;
    let pbc = m.marginalize(&bc)?;
    let pc = m.marginalize(&c_ord)?;
    let iac = projection(&m, &ac)?;
    let ibc = projection(&m, &bc)?;
    let ic = projection(&m, &c_ord)?;
    let mut acc = KahanSum::new();
    for (cell, &p) in m.values().iter().enumerate() {
        if p > 0.0 {
            let num = p * pc.values()[ic[cell]];
            let den = pac.values()[iac[cell]] * pbc.values()[ibc[cell]];
            acc.add(p * (num / den).ln());
        }
    }
    InfoValue::from_nats(acc.value())
}
