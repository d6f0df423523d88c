//! Dense probability tables and stochastic kernels over named finite axes.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::KahanSum;

/// Normalization tolerance applied on construction.
pub const NORM_TOL: f64 = 1e-12;

/// A named finite support.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabet {
    pub name: String,
    pub symbols: Vec<String>,
}

impl Alphabet {
    pub fn new(name: impl Into<String>, symbols: Vec<String>) -> Result<Self> {
        let name = name.into();
        if symbols.is_empty() {
            return Err(Error::InvalidAlphabet {
                name,
                reason: "alphabet must have at least one symbol".into(),
            });
        }
        let mut seen = HashSet::with_capacity(symbols.len());
        for s in &symbols {
            if !seen.insert(s.as_str()) {
                return Err(Error::InvalidAlphabet {
                    name,
                    reason: format!("duplicate symbol `{s}`"),
                });
            }
        }
        Ok(Self { name, symbols })
    }

    /// Alphabet with symbols `"0", "1", ..., "size-1"`.
    pub fn indexed(name: impl Into<String>, size: usize) -> Result<Self> {
        Self::new(name, (0..size).map(|i| i.to_string()).collect())
    }

    /// Cartesian product of `parts`, row-major (first part most significant),
    /// with tuple labels such as `(0,1)`.
    pub fn product(name: impl Into<String>, parts: &[&Alphabet]) -> Result<Self> {
        let mut labels: Vec<Vec<&str>> = vec![Vec::new()];
        for part in parts {
            let mut next = Vec::with_capacity(labels.len() * part.size());
            for prefix in &labels {
                for s in &part.symbols {
                    let mut l = prefix.clone();
                    l.push(s.as_str());
                    next.push(l);
                }
            }
            labels = next;
        }
        let symbols = labels
            .into_iter()
            .map(|l| format!("({})", l.join(",")))
            .collect();
        Self::new(name, symbols)
    }

    /// `base^length`, lexicographic with the first sample most significant.
    pub fn power(name: impl Into<String>, base: &Alphabet, length: usize) -> Result<Self> {
        let parts: Vec<&Alphabet> = std::iter::repeat_n(base, length).collect();
        Self::product(name, &parts)
    }

    pub fn size(&self) -> usize {
        self.symbols.len()
    }

    pub fn renamed(&self, name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            symbols: self.symbols.clone(),
        }
    }

    pub fn index_of(&self, symbol: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s == symbol)
    }
}

fn check_unique_names(axes: &[Alphabet]) -> Result<()> {
    let mut seen = HashSet::new();
    for a in axes {
        if !seen.insert(a.name.as_str()) {
            return Err(Error::AxisMismatch(format!("duplicate axis name `{}`", a.name)));
        }
    }
    Ok(())
}

/// Validates a probability vector in place: finite, nonnegative up to the
/// clamping tolerance, summing to one within [`NORM_TOL`]. Renormalizes when
/// the sum is not exactly one.
fn normalize_in_place(values: &mut [f64]) -> std::result::Result<(), (f64, f64)> {
    for v in values.iter_mut() {
        if *v < 0.0 && *v >= -NORM_TOL {
            *v = 0.0;
        }
    }
    let total = crate::numeric::sum(values);
    let deficit = 1.0 - total;
    if deficit.abs() > NORM_TOL {
        return Err((total, deficit));
    }
    if total != 1.0 {
        for v in values.iter_mut() {
            *v /= total;
        }
    }
    Ok(())
}

fn check_entries(values: &[f64]) -> Result<()> {
    for (index, &value) in values.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite { index, value });
        }
        if value < -NORM_TOL {
            return Err(Error::NegativeProbability { index, value });
        }
    }
    Ok(())
}

/// Row-major strides for `shape` (last axis fastest).
pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// An N-way probability tensor over named finite axes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbTable {
    axes: Vec<Alphabet>,
    values: Vec<f64>,
}

impl ProbTable {
    pub fn new(axes: Vec<Alphabet>, mut values: Vec<f64>) -> Result<Self> {
        check_unique_names(&axes)?;
        let expected: usize = axes.iter().map(Alphabet::size).product();
        if values.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                got: values.len(),
            });
        }
        check_entries(&values)?;
        normalize_in_place(&mut values)
            .map_err(|(sum, deficit)| Error::NotNormalized { sum, deficit })?;
        Ok(Self { axes, values })
    }

    /// Uniform distribution over one axis.
    pub fn uniform(axis: Alphabet) -> Self {
        let n = axis.size();
        Self {
            axes: vec![axis],
            values: vec![1.0 / n as f64; n],
        }
    }

    /// Point mass on `index` of one axis.
    pub fn point_mass(axis: Alphabet, index: usize) -> Result<Self> {
        if index >= axis.size() {
            return Err(Error::InvalidArgument(format!(
                "index {index} outside axis `{}` of size {}",
                axis.name,
                axis.size()
            )));
        }
        let mut values = vec![0.0; axis.size()];
        values[index] = 1.0;
        Ok(Self {
            axes: vec![axis],
            values,
        })
    }

    pub fn axes(&self) -> &[Alphabet] {
        &self.axes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Alphabet::size).collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn axis_index(&self, name: &str) -> Result<usize> {
        self.axes
            .iter()
            .position(|a| a.name == name)
            .ok_or_else(|| Error::UnknownAxis(name.to_string()))
    }

    pub fn axis(&self, name: &str) -> Result<&Alphabet> {
        Ok(&self.axes[self.axis_index(name)?])
    }

    pub fn has_axis(&self, name: &str) -> bool {
        self.axes.iter().any(|a| a.name == name)
    }

    /// Value at a multi-index given in table axis order.
    pub fn get(&self, index: &[usize]) -> f64 {
        let st = strides(&self.shape());
        let flat: usize = index.iter().zip(&st).map(|(i, s)| i * s).sum();
        self.values[flat]
    }

    /// Sums out every axis not in `keep`; output axes follow the order of `keep`.
    /// An empty `keep` yields the trivial one-cell table.
    pub fn marginalize(&self, keep: &[&str]) -> Result<ProbTable> {
        let positions = keep
            .iter()
            .map(|n| self.axis_index(n))
            .collect::<Result<Vec<_>>>()?;
        let mut seen = HashSet::new();
        for n in keep {
            if !seen.insert(*n) {
                return Err(Error::OverlappingAxes(n.to_string()));
            }
        }
        let shape = self.shape();
        let out_shape: Vec<usize> = positions.iter().map(|&p| shape[p]).collect();
        let out_strides = strides(&out_shape);
        let out_len: usize = out_shape.iter().product();
        let mut acc = vec![KahanSum::new(); out_len];
        let mut idx = vec![0usize; shape.len()];
        for &v in &self.values {
            let o: usize = positions
                .iter()
                .zip(&out_strides)
                .map(|(&p, &s)| idx[p] * s)
                .sum();
            acc[o].add(v);
            increment(&mut idx, &shape);
        }
        let axes = positions.iter().map(|&p| self.axes[p].clone()).collect();
        let values = acc.iter().map(KahanSum::value).collect();
        ProbTable::new(axes, values)
    }

    /// Reorders axes to `order` (which must be a permutation of the axis names).
    pub fn permute(&self, order: &[&str]) -> Result<ProbTable> {
        if order.len() != self.axes.len() {
            return Err(Error::AxisMismatch(format!(
                "permutation has {} axes, table has {}",
                order.len(),
                self.axes.len()
            )));
        }
        self.marginalize(order)
    }

    /// Kernel `p(rest | given)`, where `rest` is every other axis in table order
    /// (combined into one product axis when there is more than one).
    pub fn condition(&self, given: &[&str]) -> Result<Kernel> {
        let rest: Vec<&str> = self
            .axes
            .iter()
            .map(|a| a.name.as_str())
            .filter(|n| !given.contains(n))
            .collect();
        if rest.is_empty() {
            return Err(Error::InvalidArgument(
                "conditioning on every axis leaves nothing to condition".into(),
            ));
        }
        let mut order: Vec<&str> = given.to_vec();
        order.extend(&rest);
        let joint = self.permute(&order)?;
        let from_axes: Vec<Alphabet> = given
            .iter()
            .map(|n| self.axis(n).cloned())
            .collect::<Result<_>>()?;
        let rest_axes: Vec<&Alphabet> = rest.iter().map(|n| self.axis(n)).collect::<Result<_>>()?;
        let to_axis = if rest_axes.len() == 1 {
            rest_axes[0].clone()
        } else {
            Alphabet::product(rest.join(","), &rest_axes)?
        };
        let n_rows: usize = from_axes.iter().map(Alphabet::size).product();
        let n_cols = to_axis.size();
        let mut values = Vec::with_capacity(n_rows * n_cols);
        for r in 0..n_rows {
            let row = &joint.values[r * n_cols..(r + 1) * n_cols];
            let mass = crate::numeric::sum(row);
            if mass <= 0.0 {
                return Err(Error::ZeroProbabilityEvent(describe_event(&from_axes, r)));
            }
            values.extend(row.iter().map(|v| v / mass));
        }
        Kernel::new(from_axes, to_axis, values)
    }

    /// Chain-rule composition `p(a) * k(b | sources)`, where the kernel's source
    /// axes must all be present in this table. The kernel's target axis is
    /// appended as the last axis.
    pub fn product_join(&self, kernel: &Kernel) -> Result<ProbTable> {
        if self.has_axis(&kernel.to_axis.name) {
            return Err(Error::OverlappingAxes(kernel.to_axis.name.clone()));
        }
        let mut positions = Vec::with_capacity(kernel.from_axes.len());
        for a in &kernel.from_axes {
            let p = self.axis_index(&a.name)?;
            if self.axes[p] != *a {
                return Err(Error::AxisMismatch(format!(
                    "kernel source `{}` does not match table axis",
                    a.name
                )));
            }
            positions.push(p);
        }
        let shape = self.shape();
        let k_shape: Vec<usize> = kernel.from_axes.iter().map(Alphabet::size).collect();
        let k_strides = strides(&k_shape);
        let n_cols = kernel.n_cols();
        let mut values = Vec::with_capacity(self.values.len() * n_cols);
        let mut idx = vec![0usize; shape.len()];
        for &v in &self.values {
            let row: usize = positions
                .iter()
                .zip(&k_strides)
                .map(|(&p, &s)| idx[p] * s)
                .sum();
            values.extend(kernel.row(row).iter().map(|k| v * k));
            increment(&mut idx, &shape);
        }
        let mut axes = self.axes.clone();
        axes.push(kernel.to_axis.clone());
        ProbTable::new(axes, values)
    }

    /// Outer product of independent tables (axes concatenated).
    pub fn outer(&self, other: &ProbTable) -> Result<ProbTable> {
        let mut axes = self.axes.clone();
        axes.extend(other.axes.iter().cloned());
        let mut values = Vec::with_capacity(self.len() * other.len());
        for a in &self.values {
            for b in &other.values {
                values.push(a * b);
            }
        }
        ProbTable::new(axes, values)
    }

    /// Largest absolute entrywise difference; axes must match exactly.
    pub fn max_abs_diff(&self, other: &ProbTable) -> Result<f64> {
        if self.axes != other.axes {
            return Err(Error::AxisMismatch("tables have different axes".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

fn describe_event(axes: &[Alphabet], mut flat: usize) -> String {
    let shape: Vec<usize> = axes.iter().map(Alphabet::size).collect();
    let st = strides(&shape);
    let mut parts = Vec::with_capacity(axes.len());
    for (a, s) in axes.iter().zip(&st) {
        let i = flat / s;
        flat %= s;
        parts.push(format!("{}={}", a.name, a.symbols[i]));
    }
    parts.join(", ")
}

/// Row-major odometer increment.
pub(crate) fn increment(idx: &mut [usize], shape: &[usize]) {
    for d in (0..idx.len()).rev() {
        idx[d] += 1;
        if idx[d] < shape[d] {
            return;
        }
        idx[d] = 0;
    }
}

/// A row-stochastic kernel from the product of `from_axes` to `to_axis`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    from_axes: Vec<Alphabet>,
    to_axis: Alphabet,
    values: Vec<f64>,
}

impl Kernel {
    pub fn new(from_axes: Vec<Alphabet>, to_axis: Alphabet, mut values: Vec<f64>) -> Result<Self> {
        check_unique_names(&from_axes)?;
        if from_axes.iter().any(|a| a.name == to_axis.name) {
            return Err(Error::OverlappingAxes(to_axis.name.clone()));
        }
        let n_rows: usize = from_axes.iter().map(Alphabet::size).product();
        let n_cols = to_axis.size();
        if values.len() != n_rows * n_cols {
            return Err(Error::ShapeMismatch {
                expected: n_rows * n_cols,
                got: values.len(),
            });
        }
        check_entries(&values)?;
        for (r, row) in values.chunks_mut(n_cols).enumerate() {
            normalize_in_place(row).map_err(|(sum, deficit)| Error::RowNotNormalized {
                row: r,
                sum,
                deficit,
            })?;
        }
        Ok(Self {
            from_axes,
            to_axis,
            values,
        })
    }

    /// Kernel whose rows all equal `dist`.
    pub fn constant(from_axes: Vec<Alphabet>, to_axis: Alphabet, dist: &[f64]) -> Result<Self> {
        let n_rows: usize = from_axes.iter().map(Alphabet::size).product();
        let values = (0..n_rows).flat_map(|_| dist.iter().copied()).collect();
        Self::new(from_axes, to_axis, values)
    }

    /// Deterministic kernel sending row `r` to column `map(r)`.
    pub fn deterministic(
        from_axes: Vec<Alphabet>,
        to_axis: Alphabet,
        map: impl Fn(usize) -> usize,
    ) -> Result<Self> {
        let n_rows: usize = from_axes.iter().map(Alphabet::size).product();
        let n_cols = to_axis.size();
        let mut values = vec![0.0; n_rows * n_cols];
        for r in 0..n_rows {
            let c = map(r);
            if c >= n_cols {
                return Err(Error::InvalidArgument(format!(
                    "deterministic map sends row {r} to column {c} >= {n_cols}"
                )));
            }
            values[r * n_cols + c] = 1.0;
        }
        Self::new(from_axes, to_axis, values)
    }

    pub fn from_axes(&self) -> &[Alphabet] {
        &self.from_axes
    }

    pub fn to_axis(&self) -> &Alphabet {
        &self.to_axis
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_rows(&self) -> usize {
        self.from_axes.iter().map(Alphabet::size).product()
    }

    pub fn n_cols(&self) -> usize {
        self.to_axis.size()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.n_cols();
        &self.values[r * c..(r + 1) * c]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.n_cols() + c]
    }

    /// Same rows, target axis renamed.
    pub fn with_to_axis_name(&self, name: impl Into<String>) -> Result<Self> {
        Kernel::new(
            self.from_axes.clone(),
            self.to_axis.renamed(name),
            self.values.clone(),
        )
    }

    /// Short checksum of the row-major entries.
    pub fn checksum(&self) -> String {
        crate::numeric::checksum_f64(&self.values)
    }
}
