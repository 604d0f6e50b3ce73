//! Helmholtz-machine objective for two-layer discrete instances.
//!
//! `D_HM` drops the cost of specifying the hidden state given the input, so it
//! sits between the input code length and the joint objective:
//! `L(P⁰, Q⁰) ≤ D_HM ≤ L(P, Q)`.

use serde::{Deserialize, Serialize};

use crate::chain::{input_code_length, k_term, model_input_marginal, objective_reversed, LayeredChain};
use crate::error::{Error, Result};
use crate::prob::{bayes_reverse, entropy_nats, relative_entropy_nats, TransitionMatrix, Unit};

/// A two-layer chain: input prior `P⁰`, recognition `P^{1|0}`, generative
/// `Q^{0|1}` and hidden prior `Q¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoLayerInstance(LayeredChain);

impl TwoLayerInstance {
    pub fn new(chain: LayeredChain) -> Result<Self> {
        if chain.depth() != 1 {
            return Err(Error::DimensionMismatch { what: "two-layer instance depth", expected: 1, got: chain.depth() });
        }
        Ok(Self(chain))
    }

    pub fn chain(&self) -> &LayeredChain {
        &self.0
    }

    fn rec(&self) -> &TransitionMatrix {
        &self.0.source_forward()[0]
    }

    fn gen(&self) -> &TransitionMatrix {
        &self.0.model_backward()[0]
    }

    /// `Q^{1|0}`: Bayes reversal of the generative pair `(Q^{0|1}, Q¹)`.
    pub fn model_reversal(&self) -> Result<TransitionMatrix> {
        Ok(bayes_reverse(self.gen(), self.0.model_top())?.0)
    }
}

impl TryFrom<LayeredChain> for TwoLayerInstance {
    type Error = Error;

    fn try_from(c: LayeredChain) -> Result<Self> {
        Self::new(c)
    }
}

fn nats_dhm(inst: &TwoLayerInstance) -> Result<f64> {
    let q0 = model_input_marginal(inst.chain());
    let q10 = inst.model_reversal()?;
    let rec = inst.rec();
    let mut total = 0.0;
    for (i0, &p0) in inst.chain().source_prior().as_slice().iter().enumerate() {
        if p0 == 0.0 {
            continue;
        }
        for (i1, &p) in rec.column(i0).iter().enumerate() {
            if p > 0.0 {
                let q = q0[i0] * q10.get(i1, i0);
                if q <= 0.0 {
                    return Err(Error::SupportMismatch { index: i0 });
                }
                total += p0 * p * (p.ln() - q.ln());
            }
        }
    }
    Ok(total)
}

/// `D_HM = −Σ P⁰ Σ P^{1|0} log(Q⁰ Q^{1|0}) + Σ P⁰ Σ P^{1|0} log P^{1|0}`.
pub fn d_hm(inst: &TwoLayerInstance, unit: Unit) -> Result<f64> {
    Ok(unit.from_nats(nats_dhm(inst)?))
}

/// The two competing parts of `D_HM`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HmDecomposition {
    /// `Σ P⁰ K_{i₀}(P^{1|0}, Q^{0|1})`, shared with the joint objective.
    pub sparse_term: f64,
    /// `Σ P⁰ G_{i₀}(P^{1|0}, Q¹)`.
    pub distributed_term: f64,
}

impl HmDecomposition {
    pub fn total(&self) -> f64 {
        self.sparse_term + self.distributed_term
    }
}

pub fn hm_decomposition(inst: &TwoLayerInstance, unit: Unit) -> Result<HmDecomposition> {
    let (rec, gen, q1) = (inst.rec(), inst.gen(), inst.chain().model_top());
    let mut sparse = 0.0;
    let mut distributed = 0.0;
    for (i0, &p0) in inst.chain().source_prior().as_slice().iter().enumerate() {
        if p0 > 0.0 {
            sparse += p0 * k_term(rec, gen, i0)?;
            distributed += p0 * relative_entropy_nats(rec.column(i0), q1.as_slice())?;
        }
    }
    Ok(HmDecomposition { sparse_term: unit.from_nats(sparse), distributed_term: unit.from_nats(distributed) })
}

/// `L(P⁰, Q⁰) ≤ D_HM ≤ L(P, Q)` with both gaps and their closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub l00: f64,
    pub d_hm: f64,
    pub lpq: f64,
    /// `D_HM − L(P⁰, Q⁰)`.
    pub lower_gap: f64,
    /// `L(P, Q) − D_HM`.
    pub upper_gap: f64,
    /// `Σ P⁰ G_{i₀}(P^{1|0}, Q^{1|0})`, equal to the lower gap.
    pub reversal_divergence: f64,
    /// `Σ P⁰ H_{i₀}(P^{1|0})`, equal to the upper gap.
    pub conditional_entropy: f64,
    /// Both gaps are ≥ −tol and match their closed forms to tol.
    pub holds: bool,
}

pub fn sandwich_report(inst: &TwoLayerInstance, unit: Unit, tol: f64) -> Result<SandwichReport> {
    let c = inst.chain();
    let l00 = input_code_length(c, unit)?;
    let dhm = d_hm(inst, unit)?;
    let lpq = objective_reversed(c, unit)?;
    let q10 = inst.model_reversal()?;
    let rec = inst.rec();
    let mut div = 0.0;
    let mut h = 0.0;
    for (i0, &p0) in c.source_prior().as_slice().iter().enumerate() {
        if p0 > 0.0 {
            div += p0 * relative_entropy_nats(rec.column(i0), q10.column(i0))?;
            h += p0 * entropy_nats(rec.column(i0));
        }
    }
    let (div, h) = (unit.from_nats(div), unit.from_nats(h));
    let (lower_gap, upper_gap) = (dhm - l00, lpq - dhm);
    let holds = lower_gap >= -tol && upper_gap >= -tol && (lower_gap - div).abs() <= tol && (upper_gap - h).abs() <= tol;
    Ok(SandwichReport { l00, d_hm: dhm, lpq, lower_gap, upper_gap, reversal_divergence: div, conditional_entropy: h, holds })
}

/// `−Σ P⁰ log Q¹(y(i₀))` for a deterministic recognition map; the distributed
/// term in that case.
pub fn deterministic_distributed_term(inst: &TwoLayerInstance, unit: Unit) -> Result<f64> {
    let map = inst
        .rec()
        .as_deterministic()
        .ok_or(Error::NotDeterministic { layer: 0, column: 0 })?;
    let q1 = inst.chain().model_top();
    let mut total = 0.0;
    for (i0, &p0) in inst.chain().source_prior().as_slice().iter().enumerate() {
        if p0 > 0.0 {
            let q = q1[map[i0]];
            if q <= 0.0 {
                return Err(Error::SupportMismatch { index: i0 });
            }
            total -= p0 * q.ln();
        }
    }
    Ok(unit.from_nats(total))
}
