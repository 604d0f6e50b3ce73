//! Layered Markov source/model pairs and the joint code-length objective.
//!
//! A [`LayeredChain`] stores the source in its bottom-up form (input prior
//! plus forward transitions) and the model in its top-down form (backward
//! transitions plus top prior). Every other orientation is derived with
//! [`bayes_reverse`] when needed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{
    bayes_reverse, cross_entropy_nats, entropy_nats, push_forward, ProbVector, TransitionMatrix, Unit,
};

/// Cell cap for oracle-only joint tables.
pub const DEFAULT_CELL_CAP: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct LayeredChain {
    layer_sizes: Vec<usize>,
    source_prior: ProbVector,
    source_forward: Vec<TransitionMatrix>,
    model_backward: Vec<TransitionMatrix>,
    model_top: ProbVector,
}

impl LayeredChain {
    pub fn new(
        source_prior: ProbVector,
        source_forward: Vec<TransitionMatrix>,
        model_backward: Vec<TransitionMatrix>,
        model_top: ProbVector,
    ) -> Result<Self> {
        if source_forward.len() != model_backward.len() {
            return Err(Error::DimensionMismatch {
                what: "number of model transitions",
                expected: source_forward.len(),
                got: model_backward.len(),
            });
        }
        let mut layer_sizes = vec![source_prior.len()];
        for (l, t) in source_forward.iter().enumerate() {
            if t.cols() != layer_sizes[l] {
                return Err(Error::DimensionMismatch {
                    what: "source_forward columns",
                    expected: layer_sizes[l],
                    got: t.cols(),
                });
            }
            layer_sizes.push(t.rows());
        }
        for (l, t) in model_backward.iter().enumerate() {
            if t.rows() != layer_sizes[l] || t.cols() != layer_sizes[l + 1] {
                return Err(Error::DimensionMismatch {
                    what: "model_backward shape",
                    expected: layer_sizes[l] * layer_sizes[l + 1],
                    got: t.rows() * t.cols(),
                });
            }
        }
        let top = *layer_sizes.last().expect("at least one layer");
        if model_top.len() != top {
            return Err(Error::DimensionMismatch {
                what: "model_top size",
                expected: top,
                got: model_top.len(),
            });
        }
        Ok(Self {
            layer_sizes,
            source_prior,
            source_forward,
            model_backward,
            model_top,
        })
    }

    /// Source chain with the perfect model: every backward transition is the
    /// Bayes reversal of the source and the top prior is the source's top
    /// marginal.
    pub fn with_perfect_model(source_prior: ProbVector, source_forward: Vec<TransitionMatrix>) -> Result<Self> {
        let mut marginal = source_prior.clone();
        let mut backward = Vec::with_capacity(source_forward.len());
        for t in &source_forward {
            let (r, m) = bayes_reverse(t, &marginal)?;
            backward.push(r);
            marginal = m;
        }
        Self::new(source_prior, source_forward, backward, marginal)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    /// Number of transitions `L` (one less than the number of layers).
    pub fn depth(&self) -> usize {
        self.source_forward.len()
    }

    pub fn source_prior(&self) -> &ProbVector {
        &self.source_prior
    }

    pub fn source_forward(&self) -> &[TransitionMatrix] {
        &self.source_forward
    }

    pub fn model_backward(&self) -> &[TransitionMatrix] {
        &self.model_backward
    }

    pub fn model_top(&self) -> &ProbVector {
        &self.model_top
    }

    pub fn with_model(&self, model_backward: Vec<TransitionMatrix>, model_top: ProbVector) -> Result<Self> {
        Self::new(self.source_prior.clone(), self.source_forward.clone(), model_backward, model_top)
    }
}

/// Layer marginals `P¹ .. P^L` of the source.
pub fn source_marginals(c: &LayeredChain) -> Vec<ProbVector> {
    let mut out = Vec::with_capacity(c.depth());
    let mut p = c.source_prior.clone();
    for t in &c.source_forward {
        p = push_forward(t, &p).expect("chain shapes validated on construction");
        out.push(p.clone());
    }
    out
}

fn all_marginals(c: &LayeredChain) -> Vec<ProbVector> {
    let mut v = vec![c.source_prior.clone()];
    v.extend(source_marginals(c));
    v
}

/// Per-layer contributions of the reversed decomposition, in nats.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveTerms {
    /// `Σ_{i_l} P^l_{i_l} K_{i_l}(P^{l+1|l}, Q^{l|l+1})` for each transition.
    pub layer_terms: Vec<f64>,
    /// `L(P^L, Q^L)`.
    pub top_term: f64,
}

impl ObjectiveTerms {
    pub fn total(&self) -> f64 {
        self.layer_terms.iter().fold(0.0, |a, v| a + v) + self.top_term
    }
}

/// `K_i(P^{l+1|l}, Q^{l|l+1}) = −Σ_j P^{l+1|l}(j|i) log Q^{l|l+1}(i|j)`, in nats.
pub(crate) fn k_term(forward: &TransitionMatrix, backward: &TransitionMatrix, i: usize) -> Result<f64> {
    let mut k = 0.0;
    for (j, &p) in forward.column(i).iter().enumerate() {
        if p > 0.0 {
            let q = backward.get(i, j);
            if q <= 0.0 {
                return Err(Error::SupportMismatch { index: i });
            }
            k -= p * q.ln();
        }
    }
    Ok(k)
}

/// The reversed-flow decomposition with its per-layer breakdown (nats).
pub fn objective_reversed_terms(c: &LayeredChain) -> Result<ObjectiveTerms> {
    let marginals = all_marginals(c);
    let mut layer_terms = Vec::with_capacity(c.depth());
    for l in 0..c.depth() {
        let (fw, bw) = (&c.source_forward[l], &c.model_backward[l]);
        let mut term = 0.0;
        for (i, &p) in marginals[l].as_slice().iter().enumerate() {
            if p > 0.0 {
                term += p * k_term(fw, bw, i)?;
            }
        }
        layer_terms.push(term);
    }
    let top = marginals.last().expect("at least one layer");
    let top_term = cross_entropy_nats(top.as_slice(), c.model_top.as_slice())?;
    Ok(ObjectiveTerms { layer_terms, top_term })
}

/// `L(P, Q) = Σ_l Σ_{i_l} P^l K_{i_l}(P^{l+1|l}, Q^{l|l+1}) + L(P^L, Q^L)`.
pub fn objective_reversed(c: &LayeredChain, unit: Unit) -> Result<f64> {
    Ok(unit.from_nats(objective_reversed_terms(c)?.total()))
}

/// The same objective through the backward-source decomposition
/// `Σ_l Σ_{i_{l+1}} P^{l+1} L_{i_{l+1}}(P^{l|l+1}, Q^{l|l+1}) + L(P^L, Q^L)`.
pub fn objective_forward(c: &LayeredChain, unit: Unit) -> Result<f64> {
    let mut total = 0.0;
    let mut marginal = c.source_prior.clone();
    for (fw, bw) in c.source_forward.iter().zip(&c.model_backward) {
        let (reversed, next) = bayes_reverse(fw, &marginal)?;
        for (j, &pj) in next.as_slice().iter().enumerate() {
            total += pj * cross_entropy_nats(reversed.column(j), bw.column(j))?;
        }
        marginal = next;
    }
    total += cross_entropy_nats(marginal.as_slice(), c.model_top.as_slice())?;
    Ok(unit.from_nats(total))
}

/// Model marginal at layer 0: `Q⁰ = Q^{0|1} ⋯ Q^{L−1|L} Q^L`.
pub fn model_input_marginal(c: &LayeredChain) -> ProbVector {
    let mut q = c.model_top.clone();
    for bw in c.model_backward.iter().rev() {
        q = push_forward(bw, &q).expect("chain shapes validated on construction");
    }
    q
}

/// Conventional input code length `L(P⁰, Q⁰)`; never exceeds the joint objective.
pub fn input_code_length(c: &LayeredChain, unit: Unit) -> Result<f64> {
    let q0 = model_input_marginal(c);
    Ok(unit.from_nats(cross_entropy_nats(c.source_prior.as_slice(), q0.as_slice())?))
}

/// Skipped-middle objective for a 3-layer chain: only layers 0 and 2 are coded,
/// `−Σ P⁰ Σ P^{2|0} log Q^{0|2} + L(P², Q²)`.
pub fn skip_layer_objective(c: &LayeredChain, unit: Unit) -> Result<f64> {
    if c.layer_sizes.len() != 3 {
        return Err(Error::DimensionMismatch {
            what: "skip_layer_objective layer count",
            expected: 3,
            got: c.layer_sizes.len(),
        });
    }
    let p20 = c.source_forward[1].compose(&c.source_forward[0])?;
    let q02 = c.model_backward[0].compose(&c.model_backward[1])?;
    let mut total = 0.0;
    for (i, &p) in c.source_prior.as_slice().iter().enumerate() {
        if p > 0.0 {
            total += p * k_term(&p20, &q02, i)?;
        }
    }
    let p2 = push_forward(&p20, &c.source_prior)?;
    total += cross_entropy_nats(p2.as_slice(), c.model_top.as_slice())?;
    Ok(unit.from_nats(total))
}

/// Dense joint distribution over the states of every layer. Oracle use only.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    dims: Vec<usize>,
    values: Vec<f64>,
}

impl JointTable {
    pub fn new(dims: Vec<usize>, values: Vec<f64>, cap: usize) -> Result<Self> {
        let cells = cell_count(&dims, cap)?;
        if values.len() != cells {
            return Err(Error::DimensionMismatch {
                what: "joint table cells",
                expected: cells,
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidEntry { index, value: values[index] });
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > 1e-10 {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self { dims, values })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mixed-radix index with the last dimension varying fastest.
    pub fn index_of(&self, states: &[usize]) -> usize {
        states.iter().zip(&self.dims).fold(0, |acc, (&s, &d)| acc * d + s)
    }

    /// Inverse of [`index_of`](Self::index_of).
    pub fn states_of(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for (o, &d) in out.iter_mut().zip(&self.dims).rev() {
            *o = index % d;
            index /= d;
        }
        out
    }

    pub fn entropy(&self, unit: Unit) -> f64 {
        unit.from_nats(entropy_nats(&self.values))
    }

    /// Marginal over the listed axes (in the listed order), packed mixed-radix.
    pub fn marginal(&self, axes: &[usize]) -> Vec<f64> {
        let sub_dims: Vec<usize> = axes.iter().map(|&a| self.dims[a]).collect();
        let size: usize = sub_dims.iter().product();
        let mut out = vec![0.0; size];
        for (idx, &v) in self.values.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let s = self.states_of(idx);
            let k = axes.iter().zip(&sub_dims).fold(0, |acc, (&a, &d)| acc * d + s[a]);
            out[k] += v;
        }
        out
    }
}

pub(crate) fn cell_count(dims: &[usize], cap: usize) -> Result<usize> {
    let mut cells: usize = 1;
    for &d in dims {
        if d == 0 {
            return Err(Error::EmptyAlphabet);
        }
        cells = cells.saturating_mul(d);
    }
    if cells > cap {
        return Err(Error::CapExceeded { cells, cap });
    }
    Ok(cells)
}

/// Joint source `P⁰ P^{1|0} ⋯ P^{L|L−1}` over all layers.
pub fn joint_source(c: &LayeredChain, cap: usize) -> Result<JointTable> {
    let dims = c.layer_sizes.clone();
    let cells = cell_count(&dims, cap)?;
    let mut values = vec![0.0; cells];
    let probe = JointTable { dims: dims.clone(), values: Vec::new() };
    for (idx, v) in values.iter_mut().enumerate() {
        let s = probe.states_of(idx);
        let mut p = c.source_prior[s[0]];
        for (l, t) in c.source_forward.iter().enumerate() {
            if p == 0.0 {
                break;
            }
            p *= t.get(s[l + 1], s[l]);
        }
        *v = p;
    }
    JointTable::new(dims, values, cap)
}

/// Joint model `Q^{0|1} ⋯ Q^{L−1|L} Q^L` over all layers.
pub fn joint_model(c: &LayeredChain, cap: usize) -> Result<JointTable> {
    let dims = c.layer_sizes.clone();
    let cells = cell_count(&dims, cap)?;
    let mut values = vec![0.0; cells];
    let probe = JointTable { dims: dims.clone(), values: Vec::new() };
    let top = dims.len() - 1;
    for (idx, v) in values.iter_mut().enumerate() {
        let s = probe.states_of(idx);
        let mut q = c.model_top[s[top]];
        for (l, t) in c.model_backward.iter().enumerate() {
            q *= t.get(s[l], s[l + 1]);
        }
        *v = q;
    }
    JointTable::new(dims, values, cap)
}

/// Oracle: `−Σ joint_P log joint_Q` by explicit enumeration of every joint state.
pub fn objective_bruteforce(c: &LayeredChain, unit: Unit, cap: usize) -> Result<f64> {
    let p = joint_source(c, cap)?;
    let q = joint_model(c, cap)?;
    let mut total = 0.0;
    for (idx, (&pv, &qv)) in p.values.iter().zip(&q.values).enumerate() {
        if pv > 0.0 {
            if qv <= 0.0 {
                return Err(Error::SupportMismatch { index: idx });
            }
            total -= pv * qv.ln();
        }
    }
    Ok(unit.from_nats(total))
}

/// Serialized form of a [`LayeredChain`]. Matrices are row-major
/// (`matrix[to][from]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainDoc {
    pub layer_sizes: Vec<usize>,
    pub source_prior: Vec<f64>,
    pub source_forward: Vec<Vec<Vec<f64>>>,
    pub model_backward: Vec<Vec<Vec<f64>>>,
    pub model_top: Vec<f64>,
}

impl From<&LayeredChain> for ChainDoc {
    fn from(c: &LayeredChain) -> Self {
        Self {
            layer_sizes: c.layer_sizes.clone(),
            source_prior: c.source_prior.as_slice().to_vec(),
            source_forward: c.source_forward.iter().map(TransitionMatrix::to_rows).collect(),
            model_backward: c.model_backward.iter().map(TransitionMatrix::to_rows).collect(),
            model_top: c.model_top.as_slice().to_vec(),
        }
    }
}

impl TryFrom<ChainDoc> for LayeredChain {
    type Error = Error;

    fn try_from(d: ChainDoc) -> Result<Self> {
        let forward = d
            .source_forward
            .into_iter()
            .map(TransitionMatrix::from_rows)
            .collect::<Result<Vec<_>>>()?;
        let backward = d
            .model_backward
            .into_iter()
            .map(TransitionMatrix::from_rows)
            .collect::<Result<Vec<_>>>()?;
        let chain = LayeredChain::new(
            ProbVector::new(d.source_prior)?,
            forward,
            backward,
            ProbVector::new(d.model_top)?,
        )?;
        if chain.layer_sizes != d.layer_sizes {
            return Err(Error::InvalidArgument(format!(
                "layer_sizes {:?} disagree with matrix shapes {:?}",
                d.layer_sizes, chain.layer_sizes
            )));
        }
        Ok(chain)
    }
}
