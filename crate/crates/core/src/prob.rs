//! Exact discrete information measures.
//!
//! All logarithms are natural internally; [`Unit`] converts at the reporting
//! boundary. The convention `0 · log 0 = 0` is used throughout, and a model
//! that assigns zero probability to an emitted symbol is an error rather than
//! an infinite code length.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance applied to normalization checks on construction.
pub const NORM_TOL: f64 = 1e-12;

/// Default floor for [`code_length_floored`]; small enough to be effectively off.
pub const DEFAULT_FLOOR: f64 = 1e-300;

/// Logarithm base used when reporting a quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    #[default]
    Bits,
    Nats,
}

impl Unit {
    /// Convert a value measured in nats into this unit.
    #[inline]
    pub fn from_nats(self, nats: f64) -> f64 {
        match self {
            Unit::Bits => nats / std::f64::consts::LN_2,
            Unit::Nats => nats,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Unit::Bits => "bits",
            Unit::Nats => "nats",
        }
    }
}

impl std::str::FromStr for Unit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bits" => Ok(Unit::Bits),
            "nats" => Ok(Unit::Nats),
            other => Err(Error::InvalidArgument(format!("unknown unit `{other}`"))),
        }
    }
}

/// `x · ln x` with the `0 · ln 0 = 0` convention.
#[inline]
pub(crate) fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

fn check_entries(values: &[f64]) -> Result<()> {
    for (index, &value) in values.iter().enumerate() {
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::InvalidEntry { index, value });
        }
    }
    Ok(())
}

/// A normalized probability vector over a finite alphabet.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Validates non-negativity and normalization to [`NORM_TOL`].
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::EmptyAlphabet);
        }
        check_entries(&probs)?;
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self(probs))
    }

    /// Divides by the total mass. Intended for data read from files or
    /// accumulated by hand.
    pub fn renormalize(mut weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyAlphabet);
        }
        check_entries(&weights)?;
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::NotNormalized { sum });
        }
        weights.iter_mut().for_each(|w| *w /= sum);
        Ok(Self(weights))
    }

    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::EmptyAlphabet);
        }
        Ok(Self(vec![1.0 / m as f64; m]))
    }

    pub fn indicator(m: usize, index: usize) -> Result<Self> {
        if index >= m {
            return Err(Error::DimensionMismatch {
                what: "indicator index",
                expected: m,
                got: index,
            });
        }
        let mut v = vec![0.0; m];
        v[index] = 1.0;
        Ok(Self(v))
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_deterministic(&self) -> bool {
        self.0.iter().filter(|&&p| p > 0.0).count() == 1
    }
}

impl std::ops::Index<usize> for ProbVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl<'de> Deserialize<'de> for ProbVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<f64>::deserialize(d)?;
        ProbVector::new(raw).map_err(serde::de::Error::custom)
    }
}

/// Column-stochastic matrix of conditional probabilities `p(to | from)`.
///
/// Stored column-major so that each conditional distribution is contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TransitionMatrix {
    /// Builds from per-`from` columns, each a distribution over `to`.
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let cols = columns.len();
        if cols == 0 {
            return Err(Error::EmptyAlphabet);
        }
        let rows = columns[0].len();
        if rows == 0 {
            return Err(Error::EmptyAlphabet);
        }
        let mut data = Vec::with_capacity(rows * cols);
        for c in &columns {
            if c.len() != rows {
                return Err(Error::DimensionMismatch {
                    what: "transition column length",
                    expected: rows,
                    got: c.len(),
                });
            }
            data.extend_from_slice(c);
        }
        Self::from_col_major(rows, cols, data)
    }

    /// Builds from a row-major `rows × cols` table (`rows[to][from]`).
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let r = rows.len();
        if r == 0 {
            return Err(Error::EmptyAlphabet);
        }
        let c = rows[0].len();
        let mut data = vec![0.0; r * c];
        for (to, row) in rows.iter().enumerate() {
            if row.len() != c {
                return Err(Error::DimensionMismatch {
                    what: "transition row length",
                    expected: c,
                    got: row.len(),
                });
            }
            for (from, &v) in row.iter().enumerate() {
                data[from * r + to] = v;
            }
        }
        Self::from_col_major(r, c, data)
    }

    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyAlphabet);
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                what: "transition data length",
                expected: rows * cols,
                got: data.len(),
            });
        }
        check_entries(&data)?;
        for (column, col) in data.chunks(rows).enumerate() {
            let sum: f64 = col.iter().sum();
            if (sum - 1.0).abs() > NORM_TOL {
                return Err(Error::ColumnNotNormalized { column, sum });
            }
        }
        Ok(Self { rows, cols, data })
    }

    /// Like [`from_columns`](Self::from_columns) but divides each column by its sum.
    pub fn renormalize_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let cols = columns
            .into_iter()
            .map(|c| ProbVector::renormalize(c).map(ProbVector::into_inner))
            .collect::<Result<Vec<_>>>()?;
        Self::from_columns(cols)
    }

    pub fn identity(m: usize) -> Result<Self> {
        let cols = (0..m)
            .map(|j| ProbVector::indicator(m, j).map(ProbVector::into_inner))
            .collect::<Result<Vec<_>>>()?;
        Self::from_columns(cols)
    }

    /// Every column equal to `column`.
    pub fn constant(column: &ProbVector, cols: usize) -> Result<Self> {
        Self::from_columns(vec![column.as_slice().to_vec(); cols])
    }

    /// Deterministic map: column `from` is the indicator of `map[from]`.
    pub fn deterministic(map: &[usize], rows: usize) -> Result<Self> {
        let cols = map
            .iter()
            .map(|&to| ProbVector::indicator(rows, to).map(ProbVector::into_inner))
            .collect::<Result<Vec<_>>>()?;
        Self::from_columns(cols)
    }

    /// Number of `to` symbols.
    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of `from` symbols.
    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, to: usize, from: usize) -> f64 {
        self.data[from * self.rows + to]
    }

    #[inline]
    pub fn column(&self, from: usize) -> &[f64] {
        &self.data[from * self.rows..(from + 1) * self.rows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.rows)
    }

    /// Row-major copy (`out[to][from]`), the serialization layout.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|to| (0..self.cols).map(|from| self.get(to, from)).collect())
            .collect()
    }

    /// If every column is an indicator, returns the map `from -> to`.
    pub fn as_deterministic(&self) -> Option<Vec<usize>> {
        self.columns()
            .map(|c| {
                let mut nz = c.iter().enumerate().filter(|(_, &v)| v > 0.0);
                match (nz.next(), nz.next()) {
                    (Some((i, _)), None) => Some(i),
                    _ => None,
                }
            })
            .collect()
    }

    /// Chained transition `self ∘ first`: `(self·first)(c|a) = Σ_b self(c|b) first(b|a)`.
    pub fn compose(&self, first: &TransitionMatrix) -> Result<TransitionMatrix> {
        if first.rows != self.cols {
            return Err(Error::DimensionMismatch {
                what: "composed inner alphabet",
                expected: self.cols,
                got: first.rows,
            });
        }
        let mut data = vec![0.0; self.rows * first.cols];
        for a in 0..first.cols {
            let out = &mut data[a * self.rows..(a + 1) * self.rows];
            for (b, &pb) in first.column(a).iter().enumerate() {
                if pb == 0.0 {
                    continue;
                }
                for (o, &v) in out.iter_mut().zip(self.column(b)) {
                    *o += v * pb;
                }
            }
        }
        TransitionMatrix::from_col_major(self.rows, first.cols, data)
    }
}

/// `−Σ p log p`.
pub fn entropy(p: &ProbVector, unit: Unit) -> f64 {
    unit.from_nats(entropy_nats(p.as_slice()))
}

pub(crate) fn entropy_nats(p: &[f64]) -> f64 {
    -p.iter().map(|&x| xlogx(x)).sum::<f64>()
}

fn same_len(p: &ProbVector, q: &ProbVector) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            what: "alphabet size",
            expected: p.len(),
            got: q.len(),
        });
    }
    Ok(())
}

/// Relative entropy `G(p, q) = Σ p log(p / q)`.
pub fn relative_entropy(p: &ProbVector, q: &ProbVector, unit: Unit) -> Result<f64> {
    same_len(p, q)?;
    Ok(unit.from_nats(relative_entropy_nats(p.as_slice(), q.as_slice())?))
}

pub(crate) fn relative_entropy_nats(p: &[f64], q: &[f64]) -> Result<f64> {
    let mut g = 0.0;
    for (index, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi > 0.0 {
            if qi <= 0.0 {
                return Err(Error::SupportMismatch { index });
            }
            g += pi * (pi / qi).ln();
        }
    }
    // Rounding can produce tiny negatives when p ≈ q.
    Ok(g.max(0.0))
}

/// Code length `L(p, q) = −Σ p log q = H(p) + G(p, q)`.
pub fn code_length(p: &ProbVector, q: &ProbVector, unit: Unit) -> Result<f64> {
    same_len(p, q)?;
    Ok(unit.from_nats(cross_entropy_nats(p.as_slice(), q.as_slice())?))
}

/// Code length with the model clamped from below at `floor`, giving a finite
/// surrogate when `q` has holes in the support of `p`.
pub fn code_length_floored(p: &ProbVector, q: &ProbVector, floor: f64, unit: Unit) -> Result<f64> {
    same_len(p, q)?;
    if !(floor > 0.0) {
        return Err(Error::InvalidArgument("floor must be positive".into()));
    }
    let v = p
        .as_slice()
        .iter()
        .zip(q.as_slice())
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| -pi * qi.max(floor).ln())
        .sum::<f64>();
    Ok(unit.from_nats(v))
}

pub(crate) fn cross_entropy_nats(p: &[f64], q: &[f64]) -> Result<f64> {
    let mut l = 0.0;
    for (index, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi > 0.0 {
            if qi <= 0.0 {
                return Err(Error::SupportMismatch { index });
            }
            l -= pi * qi.ln();
        }
    }
    Ok(l)
}

/// Marginal `Σ_from t(to|from) p(from)`.
pub fn push_forward(t: &TransitionMatrix, p: &ProbVector) -> Result<ProbVector> {
    if t.cols() != p.len() {
        return Err(Error::DimensionMismatch {
            what: "push_forward input",
            expected: t.cols(),
            got: p.len(),
        });
    }
    Ok(ProbVector(push_forward_raw(t, p.as_slice())))
}

pub(crate) fn push_forward_raw(t: &TransitionMatrix, p: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; t.rows()];
    for (from, &pf) in p.iter().enumerate() {
        if pf == 0.0 {
            continue;
        }
        for (o, &v) in out.iter_mut().zip(t.column(from)) {
            *o += v * pf;
        }
    }
    out
}

/// Converts a forward pass `(t, prior)` into the backward pass `(r, m)` with
/// `r(from|to) m(to) = t(to|from) prior(from)`.
pub fn bayes_reverse(t: &TransitionMatrix, prior: &ProbVector) -> Result<(TransitionMatrix, ProbVector)> {
    let m = push_forward(t, prior)?;
    if let Some(index) = m.as_slice().iter().position(|&v| v <= 0.0) {
        return Err(Error::ZeroMarginal { index });
    }
    let rows = t.cols();
    let cols = t.rows();
    let mut data = vec![0.0; rows * cols];
    for to in 0..cols {
        let mt = m[to];
        let col = &mut data[to * rows..(to + 1) * rows];
        for (from, c) in col.iter_mut().enumerate() {
            *c = t.get(to, from) * prior[from] / mt;
        }
    }
    Ok((TransitionMatrix::from_col_major(rows, cols, data)?, m))
}

/// `Σ_from prior(from) · H(t(·|from))`.
pub fn conditional_entropy(t: &TransitionMatrix, prior: &ProbVector, unit: Unit) -> Result<f64> {
    if t.cols() != prior.len() {
        return Err(Error::DimensionMismatch {
            what: "conditional_entropy prior",
            expected: t.cols(),
            got: prior.len(),
        });
    }
    let h: f64 = t
        .columns()
        .zip(prior.as_slice())
        .map(|(c, &w)| if w > 0.0 { w * entropy_nats(c) } else { 0.0 })
        .sum();
    Ok(unit.from_nats(h))
}
