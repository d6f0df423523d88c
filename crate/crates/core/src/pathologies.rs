//! `I(X; f(X))` for deterministic maps: exact on discrete alphabets, and as
//! a quantization-refinement sequence for continuous `X` on `[0, 1]`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::info::{self, Units};
use crate::numeric::{fmt12, KahanSum};
use crate::table::{Alphabet, Kernel, ProbTable};

/// A total map between finite alphabets, stored as codomain indices.
#[derive(Debug, Clone, PartialEq)]
pub struct DeterministicMap {
    domain: Alphabet,
    codomain: Alphabet,
    table: Vec<usize>,
}

impl DeterministicMap {
    pub fn new(domain: Alphabet, codomain: Alphabet, table: Vec<usize>) -> Result<Self> {
        if table.len() != domain.size() {
            return Err(Error::ShapeMismatch {
                expected: domain.size(),
                got: table.len(),
            });
        }
        if let Some(v) = table.iter().find(|v| **v >= codomain.size()) {
            return Err(Error::InvalidArgument(format!(
                "map value {v} outside codomain of size {}",
                codomain.size()
            )));
        }
        Ok(Self {
            domain,
            codomain,
            table,
        })
    }

    pub fn identity(domain: &Alphabet) -> Self {
        let table = (0..domain.size()).collect();
        Self::new(domain.clone(), domain.renamed(format!("f({})", domain.name)), table)
            .expect("identity is total")
    }

    pub fn domain(&self) -> &Alphabet {
        &self.domain
    }

    pub fn codomain(&self) -> &Alphabet {
        &self.codomain
    }

    pub fn apply(&self, x: usize) -> usize {
        self.table[x]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfInfo {
    pub i_value: f64,
    pub h_x: f64,
    pub h_fx: f64,
}

/// Exact `I(X; f(X))` from the joint `p(x) [y = f(x)]`, with `H(X)` and `H(f(X))`.
pub fn discrete_self_info(p_x: &ProbTable, f: &DeterministicMap) -> Result<SelfInfo> {
    if p_x.axes().len() != 1 || p_x.axes()[0] != f.domain {
        return Err(Error::AxisMismatch(
            "p(X) must be a single axis equal to the map's domain".into(),
        ));
    }
    let mut codomain = f.codomain.clone();
    if codomain.name == f.domain.name {
        codomain = codomain.renamed(format!("f({})", f.domain.name));
    }
    let y_name = codomain.name.clone();
    let k = Kernel::deterministic(vec![f.domain.clone()], codomain, |x| f.table[x])?;
    let joint = p_x.product_join(&k)?;
    let x_name = f.domain.name.as_str();
    Ok(SelfInfo {
        i_value: info::mutual_information(&joint, &[x_name], &[&y_name])?.nats(),
        h_x: info::entropy(p_x)?.nats(),
        h_fx: info::entropy(&joint.marginalize(&[&y_name])?)?.nats(),
    })
}

/// Densities on `[0, 1]` with closed-form CDFs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Density {
    Uniform01,
    /// Symmetric triangle with mode 1/2.
    Triangular01,
    TruncatedGaussian { mu: f64, sigma: f64 },
}

impl Density {
    fn validate(&self) -> Result<()> {
        if let Density::TruncatedGaussian { mu, sigma } = self {
            if !(mu.is_finite() && sigma.is_finite() && *sigma > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "truncated gaussian needs finite mu and sigma > 0, got ({mu}, {sigma})"
                )));
            }
        }
        Ok(())
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match *self {
            Density::Uniform01 => x,
            Density::Triangular01 => {
                if x < 0.5 {
                    2.0 * x * x
                } else {
                    1.0 - 2.0 * (1.0 - x) * (1.0 - x)
                }
            }
            Density::TruncatedGaussian { mu, sigma } => {
                let phi = |v: f64| 0.5 * (1.0 + erf((v - mu) / (sigma * std::f64::consts::SQRT_2)));
                let (lo, hi) = (phi(0.0), phi(1.0));
                (phi(x) - lo) / (hi - lo)
            }
        }
    }

    fn mass(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            0.0
        } else {
            (self.cdf(b) - self.cdf(a)).max(0.0)
        }
    }
}

/// Maps applied to `X in [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ContinuousMap {
    Identity,
    Affine { a: f64, b: f64 },
    Square,
    /// `floor(2x) / 2`; not injective.
    FloorHalves,
}

impl ContinuousMap {
    fn validate(&self) -> Result<()> {
        if let ContinuousMap::Affine { a, b } = self {
            if !(a.is_finite() && b.is_finite()) {
                return Err(Error::InvalidArgument("affine coefficients must be finite".into()));
            }
        }
        Ok(())
    }

    /// `(min, max)` of the map over `[0, 1]`.
    fn range(&self) -> (f64, f64) {
        match *self {
            ContinuousMap::Identity | ContinuousMap::Square | ContinuousMap::FloorHalves => (0.0, 1.0),
            ContinuousMap::Affine { a, b } => (b.min(a + b), b.max(a + b)),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            ContinuousMap::Identity => x,
            ContinuousMap::Affine { a, b } => a * x + b,
            ContinuousMap::Square => x * x,
            ContinuousMap::FloorHalves => (2.0 * x).floor() / 2.0,
        }
    }

    /// Preimage in `[0, 1]` of the output interval `[lo, hi)` (closed at
    /// `hi` when `closed`), as disjoint intervals up to null sets.
    fn preimage(&self, lo: f64, hi: f64, closed: bool) -> Vec<(f64, f64)> {
        let clip = |a: f64, b: f64| {
            let (a, b) = (a.max(0.0), b.min(1.0));
            if b > a {
                vec![(a, b)]
            } else {
                vec![]
            }
        };
        match *self {
            ContinuousMap::Identity => clip(lo, hi),
            ContinuousMap::Square => clip(lo.max(0.0).sqrt(), hi.max(0.0).sqrt()),
            ContinuousMap::Affine { a, b } => {
                if a > 0.0 {
                    clip((lo - b) / a, (hi - b) / a)
                } else if a < 0.0 {
                    clip((hi - b) / a, (lo - b) / a)
                } else if b >= lo && (b < hi || (closed && b <= hi)) {
                    vec![(0.0, 1.0)]
                } else {
                    vec![]
                }
            }
            ContinuousMap::FloorHalves => [(0.0, 0.5, 0.0), (0.5, 1.0, 0.5)]
                .iter()
                .filter(|(_, _, v)| *v >= lo && (*v < hi || (closed && *v <= hi)))
                .map(|(a, b, _)| (*a, *b))
                .collect(),
        }
    }
}

/// Discretizes `X` onto the `k` left endpoints `i/k` (each carrying the
/// density mass of its cell) and `f` onto the distinct values it takes there.
pub fn grid_map(density: Density, map: ContinuousMap, k: usize) -> Result<(ProbTable, DeterministicMap)> {
    density.validate()?;
    map.validate()?;
    if k == 0 {
        return Err(Error::InvalidArgument("grid needs at least one point".into()));
    }
    let points: Vec<f64> = (0..k).map(|i| i as f64 / k as f64).collect();
    let masses: Vec<f64> = points
        .iter()
        .map(|&a| density.mass(a, a + 1.0 / k as f64))
        .collect();
    let total: f64 = masses.iter().sum();
    let domain = Alphabet::new("X", points.iter().map(|p| fmt12(*p)).collect())?;
    let p_x = ProbTable::new(vec![domain.clone()], masses.iter().map(|m| m / total).collect())?;
    let images: Vec<f64> = points.iter().map(|&x| map.eval(x)).collect();
    let mut distinct = images.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let table = images
        .iter()
        .map(|v| distinct.binary_search_by(|d| d.total_cmp(v)).expect("value is present"))
        .collect();
    let codomain = Alphabet::new("fX", distinct.iter().map(|v| fmt12(*v)).collect())?;
    Ok((p_x, DeterministicMap::new(domain, codomain, table)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantizationSpec {
    pub density: Density,
    pub map: ContinuousMap,
    pub bin_counts: Vec<usize>,
}

impl QuantizationSpec {
    pub fn validate(&self) -> Result<()> {
        self.density.validate()?;
        self.map.validate()?;
        if self.bin_counts.is_empty() {
            return Err(Error::InvalidArgument("bin_counts is empty".into()));
        }
        if self.bin_counts.iter().any(|k| *k < 2) {
            return Err(Error::InvalidArgument("every bin count must be >= 2".into()));
        }
        if self.bin_counts.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "bin_counts must be strictly increasing".into(),
            ));
        }
        Ok(())
    }

    /// Powers of two from 2 to 256.
    pub fn powers_of_two(density: Density, map: ContinuousMap) -> Self {
        Self {
            density,
            map,
            bin_counts: (1..=8).map(|e| 1usize << e).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizedRow {
    pub k: usize,
    pub i_nats: f64,
    pub h_x: f64,
    pub h_fx: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizationResult {
    pub rows: Vec<QuantizedRow>,
    /// Least-squares slope of `I_k` against `ln k`.
    pub slope: f64,
}

pub fn quantization_header(units: Units) -> String {
    let u = units.suffix();
    format!("k,I_{u},H_X_{u},H_fX_{u}")
}

impl QuantizationResult {
    pub fn to_csv(&self, units: Units) -> String {
        let mut out = quantization_header(units);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.k,
                fmt12(units.convert(r.i_nats)),
                fmt12(units.convert(r.h_x)),
                fmt12(units.convert(r.h_fx))
            ));
        }
        out
    }
}

/// Exact joint bin masses `P(X in B_i, f(X) in C_j)`, `k x k_out` row-major.
fn binned_joint(spec: &QuantizationSpec, k: usize) -> (Vec<f64>, usize) {
    let (fmin, fmax) = spec.map.range();
    let k_out = if fmax > fmin { k } else { 1 };
    let width = (fmax - fmin) / k_out as f64;
    let mut joint = vec![0.0; k * k_out];
    for j in 0..k_out {
        let last = j + 1 == k_out;
        let (lo, hi) = if k_out == 1 {
            (fmin, fmax)
        } else {
            (fmin + j as f64 * width, if last { fmax } else { fmin + (j + 1) as f64 * width })
        };
        for (a, b) in spec.map.preimage(lo, hi, last) {
            for i in 0..k {
                let (bl, bh) = (i as f64 / k as f64, (i + 1) as f64 / k as f64);
                joint[i * k_out + j] += spec.density.mass(a.max(bl), b.min(bh));
            }
        }
    }
    (joint, k_out)
}

fn quantized_row(spec: &QuantizationSpec, k: usize) -> Result<QuantizedRow> {
    let (joint, k_out) = binned_joint(spec, k);
    let px: Vec<f64> = (0..k).map(|i| joint[i * k_out..(i + 1) * k_out].iter().sum()).collect();
    let py: Vec<f64> = (0..k_out)
        .map(|j| (0..k).map(|i| joint[i * k_out + j]).collect::<KahanSum>().value())
        .collect();
    let mut mi = KahanSum::new();
    for i in 0..k {
        for j in 0..k_out {
            let p = joint[i * k_out + j];
            if p > 0.0 {
                mi.add(p * (p / (px[i] * py[j])).ln());
            }
        }
    }
    Ok(QuantizedRow {
        k,
        i_nats: mi.value().max(0.0),
        h_x: info::entropy_of(&px)?.nats(),
        h_fx: info::entropy_of(&py)?.nats(),
    })
}

/// `I_k = I(X_k; f(X)_k)` for every `k` of the schedule (equal-width bins on
/// `[0, 1]` for inputs and on the range of `f` for outputs).
pub fn quantized_mi_divergence(spec: &QuantizationSpec) -> Result<QuantizationResult> {
    spec.validate()?;
    let rows = spec
        .bin_counts
        .par_iter()
        .map(|&k| quantized_row(spec, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(QuantizationResult {
        slope: log_slope(&rows),
        rows,
    })
}

fn log_slope(rows: &[QuantizedRow]) -> f64 {
    if rows.len() < 2 {
        return 0.0;
    }
    let xs: Vec<f64> = rows.iter().map(|r| (r.k as f64).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = rows.iter().map(|r| r.i_nats).sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(rows).map(|(x, r)| (x - mx) * (r.i_nats - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
