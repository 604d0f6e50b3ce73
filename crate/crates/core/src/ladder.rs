//! VQ ladders: soft quantisers stacked over `L + 1` layers.
//!
//! The objective is `Σ_l D_VQ^l/(4σ_l²) + L(P^L, Q^L) − Σ_l log(V_l/(√(2π)σ_l)^d_l)`.
//! Stage `l` maps the layer-`l` representation to layer-`l+1` code indices.
//! By default the layer-`l` representation of state `y` is the one-hot vector
//! `e_y`, so stage `l ≥ 1` encoders are tables over layer-`l` states and the
//! stage inputs are weighted by the layer marginal `P^l`. The posterior
//! representation instead feeds each data point's posterior vector upwards.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::map_indexed;
use crate::prob::{code_length, push_forward, ProbVector, TransitionMatrix, Unit};
use crate::vq::{
    argmin, centroids_with_respawn, dvq, sample_codebook, sq_dist, EmpiricalInput, GaussianCodebook, SoftEncoder,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    #[default]
    OneHot,
    Posterior,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderStage {
    pub encoder: SoftEncoder,
    pub codebook: GaussianCodebook,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VqLadder {
    stages: Vec<LadderStage>,
    top_prior: ProbVector,
    representation: Representation,
}

impl VqLadder {
    pub fn new(stages: Vec<LadderStage>, top_prior: ProbVector, representation: Representation) -> Result<Self> {
        let first = stages.first().ok_or(Error::EmptyAlphabet)?;
        let n = first.encoder.points();
        for (l, s) in stages.iter().enumerate() {
            if s.encoder.codes() != s.codebook.len() {
                return Err(Error::DimensionMismatch { what: "stage encoder rows vs codes", expected: s.codebook.len(), got: s.encoder.codes() });
            }
            if l == 0 {
                continue;
            }
            let below = stages[l - 1].codebook.len();
            if s.codebook.dim() != below {
                return Err(Error::DimensionMismatch { what: "stage code dimension vs layer size below", expected: below, got: s.codebook.dim() });
            }
            let cols = match representation {
                Representation::OneHot => below,
                Representation::Posterior => n,
            };
            if s.encoder.points() != cols {
                return Err(Error::DimensionMismatch { what: "stage encoder columns", expected: cols, got: s.encoder.points() });
            }
        }
        let top = stages.last().map(|s| s.codebook.len()).unwrap_or(0);
        if top_prior.len() != top {
            return Err(Error::DimensionMismatch { what: "top prior", expected: top, got: top_prior.len() });
        }
        Ok(Self { stages, top_prior, representation })
    }

    pub fn stages(&self) -> &[LadderStage] {
        &self.stages
    }

    pub fn top_prior(&self) -> &ProbVector {
        &self.top_prior
    }

    pub fn representation(&self) -> Representation {
        self.representation
    }

    pub fn depth(&self) -> usize {
        self.stages.len()
    }

    /// Alphabet sizes `M_1..M_L`.
    pub fn codes(&self) -> Vec<usize> {
        self.stages.iter().map(|s| s.codebook.len()).collect()
    }
}

fn one_hot_points(m: usize) -> Vec<Vec<f64>> {
    (0..m)
        .map(|i| {
            let mut v = vec![0.0; m];
            v[i] = 1.0;
            v
        })
        .collect()
}

/// Marginal over the codes of a stage given its input measure.
fn stage_output(enc: &SoftEncoder, input: &EmpiricalInput) -> Result<ProbVector> {
    crate::vq::output_marginal(enc, input)
}

/// Input measure of every stage, plus the top marginal `P^L`.
pub fn stage_inputs(ladder: &VqLadder, data: &EmpiricalInput) -> Result<(Vec<EmpiricalInput>, ProbVector)> {
    let mut inputs = Vec::with_capacity(ladder.depth());
    let mut current = data.clone();
    for (l, s) in ladder.stages.iter().enumerate() {
        if l == 0 && s.encoder.points() != data.len() {
            return Err(Error::DimensionMismatch { what: "stage-0 encoder columns vs data points", expected: data.len(), got: s.encoder.points() });
        }
        let out = stage_output(&s.encoder, &current)?;
        let next = match ladder.representation {
            Representation::OneHot => EmpiricalInput::new(one_hot_points(out.len()), out.as_slice().to_vec())?,
            Representation::Posterior => {
                let pts = (0..data.len()).map(|n| s.encoder.row(n).to_vec()).collect();
                EmpiricalInput::new(pts, data.weights().to_vec())?
            }
        };
        inputs.push(current);
        current = next;
    }
    let top = match ladder.representation {
        Representation::OneHot => ProbVector::renormalize(current.weights().to_vec())?,
        Representation::Posterior => stage_output(&ladder.stages.last().expect("non-empty").encoder, &inputs[ladder.depth() - 1])?,
    };
    Ok((inputs, top))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StageTerms {
    pub dvq: f64,
    pub distortion_term: f64,
    pub constant_term: f64,
}

/// Objective breakdown, in nats.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderTerms {
    pub stages: Vec<StageTerms>,
    pub top_term: f64,
}

impl LadderTerms {
    pub fn total(&self) -> f64 {
        self.stages.iter().map(|s| s.distortion_term + s.constant_term).fold(0.0, |a, b| a + b) + self.top_term
    }
}

pub fn ladder_terms(ladder: &VqLadder, data: &EmpiricalInput) -> Result<LadderTerms> {
    let (inputs, top) = stage_inputs(ladder, data)?;
    let stages = ladder
        .stages
        .iter()
        .zip(&inputs)
        .map(|(s, input)| {
            let d = dvq(&s.encoder, &s.codebook, input)?;
            let sigma = s.codebook.sigma();
            Ok(StageTerms { dvq: d, distortion_term: d / (4.0 * sigma * sigma), constant_term: s.codebook.constant_nats() })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LadderTerms { stages, top_term: code_length(&top, &ladder.top_prior, Unit::Nats)? })
}

pub fn ladder_objective(ladder: &VqLadder, data: &EmpiricalInput, unit: Unit) -> Result<(f64, LadderTerms)> {
    let terms = ladder_terms(ladder, data)?;
    Ok((unit.from_nats(terms.total()), terms))
}

fn require_one_hot(ladder: &VqLadder, what: &str) -> Result<()> {
    if ladder.representation != Representation::OneHot {
        return Err(Error::InvalidArgument(format!("{what} needs the one-hot representation")));
    }
    Ok(())
}

/// Cost-to-go `g_l(y)` for every layer `l = 1..=L`: the expected remaining
/// objective contributed by a unit of mass at state `y` of layer `l`.
fn costs_to_go(ladder: &VqLadder) -> Result<Vec<Vec<f64>>> {
    let depth = ladder.depth();
    let mut g: Vec<Vec<f64>> = vec![Vec::new(); depth + 1];
    g[depth] = ladder
        .top_prior
        .as_slice()
        .iter()
        .map(|&q| if q > 0.0 { -q.ln() } else { f64::INFINITY })
        .collect();
    for l in (1..depth).rev() {
        let s = &ladder.stages[l];
        let beta = 1.0 / (2.0 * s.codebook.sigma().powi(2));
        let m = s.encoder.points();
        let e = one_hot_points(m);
        g[l] = (0..m)
            .map(|y| {
                s.encoder
                    .row(y)
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| **p > 0.0)
                    .map(|(yn, p)| p * (beta * sq_dist(&e[y], &s.codebook.vectors()[yn]) + g[l + 1][yn]))
                    .sum()
            })
            .collect();
    }
    Ok(g)
}

/// `∂ total / ∂ Pr(y_{l+1} | input)` for stage `l`, as an `inputs × codes`
/// table (in nats). The objective is linear in each encoder table given the
/// others, so this is also the exact per-entry cost used by the trainer.
pub fn encoder_gradient(ladder: &VqLadder, data: &EmpiricalInput, stage: usize) -> Result<Vec<Vec<f64>>> {
    require_one_hot(ladder, "encoder gradient")?;
    if stage >= ladder.depth() {
        return Err(Error::InvalidArgument(format!("stage {stage} out of range")));
    }
    let (inputs, _) = stage_inputs(ladder, data)?;
    let g = costs_to_go(ladder)?;
    let s = &ladder.stages[stage];
    let beta = 1.0 / (2.0 * s.codebook.sigma().powi(2));
    let input = &inputs[stage];
    Ok((0..input.len())
        .map(|n| {
            let x = &input.points()[n];
            s.codebook
                .vectors()
                .iter()
                .enumerate()
                .map(|(y, c)| input.weights()[n] * (beta * sq_dist(x, c) + g[stage + 1][y]))
                .collect()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderConfig {
    /// `M_1..M_L`.
    pub codes: Vec<usize>,
    /// `σ_1..σ_L` (fixed per stage).
    pub sigmas: Vec<f64>,
    pub sweeps: usize,
    #[serde(default)]
    pub q_update: bool,
    #[serde(default = "one")]
    pub volume: f64,
    #[serde(default)]
    pub representation: Representation,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderTraceRow {
    pub sweep: usize,
    pub terms: LadderTerms,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct LadderRun {
    pub ladder: VqLadder,
    pub trace: Vec<LadderTraceRow>,
    pub respawns: usize,
}

fn hard_assign(input: &EmpiricalInput, code: &GaussianCodebook, extra: &[f64]) -> Result<SoftEncoder> {
    let beta = 1.0 / (2.0 * code.sigma().powi(2));
    let assign = map_indexed(input.len(), |n| {
        let x = &input.points()[n];
        argmin(code.vectors().iter().zip(extra).map(|(c, g)| beta * sq_dist(x, c) + g))
    });
    SoftEncoder::hard(&assign, code.len())
}

/// Bottom-up sweeps of exact coordinate minimisation. Each stage encoder is
/// the winner-take-all on `‖x − x'(y)‖²/(2σ_l²) + g_{l+1}(y)` where `g` is the
/// cost-to-go through the (fixed) stages above; each codebook then moves to
/// its centroids. Only the one-hot representation is trainable.
pub fn train_ladder(data: &EmpiricalInput, cfg: &LadderConfig, seed: u64) -> Result<LadderRun> {
    if cfg.representation != Representation::OneHot {
        return Err(Error::InvalidArgument("ladder training supports the one-hot representation only".into()));
    }
    if cfg.codes.is_empty() || cfg.codes.contains(&0) {
        return Err(Error::EmptyAlphabet);
    }
    if cfg.sigmas.len() != cfg.codes.len() {
        return Err(Error::DimensionMismatch { what: "sigmas vs stages", expected: cfg.codes.len(), got: cfg.sigmas.len() });
    }
    if cfg.sweeps == 0 {
        return Err(Error::InvalidArgument("sweeps must be at least 1".into()));
    }
    // Initial codebooks: sampled inputs of each stage; initial upper encoders:
    // plain nearest code.
    let mut stages = Vec::with_capacity(cfg.codes.len());
    let mut input = data.clone();
    for (l, (&m, &sigma)) in cfg.codes.iter().zip(&cfg.sigmas).enumerate() {
        let code = GaussianCodebook::new(sample_codebook(&input, m, seed.wrapping_add(l as u64))?, sigma, cfg.volume)?;
        let enc = hard_assign(&input, &code, &vec![0.0; m])?;
        let out = stage_output(&enc, &input)?;
        input = EmpiricalInput::new(one_hot_points(m), out.into_inner())?;
        stages.push(LadderStage { encoder: enc, codebook: code });
    }
    let top = ProbVector::uniform(*cfg.codes.last().expect("non-empty"))?;
    let mut ladder = VqLadder::new(stages, top, Representation::OneHot)?;
    let mut trace = Vec::with_capacity(cfg.sweeps);
    let mut respawns = 0;
    for sweep in 0..cfg.sweeps {
        for l in 0..ladder.depth() {
            let g = costs_to_go(&ladder)?;
            let (inputs, _) = stage_inputs(&ladder, data)?;
            let input = &inputs[l];
            let enc = hard_assign(input, &ladder.stages[l].codebook, &g[l + 1])?;
            let (vectors, r) = centroids_with_respawn(&enc, input, ladder.stages[l].codebook.vectors());
            respawns += r;
            ladder.stages[l].codebook = ladder.stages[l].codebook.with_vectors(vectors)?;
            ladder.stages[l].encoder = enc;
        }
        if cfg.q_update {
            let (_, top) = stage_inputs(&ladder, data)?;
            ladder.top_prior = top;
        }
        let terms = ladder_terms(&ladder, data)?;
        let total = terms.total();
        trace.push(LadderTraceRow { sweep, terms, total });
    }
    Ok(LadderRun { ladder, trace, respawns })
}

/// Layer marginals `P^1..P^L` of a one-hot ladder.
pub fn layer_marginals(ladder: &VqLadder, data: &EmpiricalInput) -> Result<Vec<ProbVector>> {
    require_one_hot(ladder, "layer marginals")?;
    let mut out = Vec::with_capacity(ladder.depth());
    let mut p = stage_output(&ladder.stages[0].encoder, data)?;
    out.push(p.clone());
    for s in &ladder.stages[1..] {
        p = push_forward(s.encoder.matrix(), &p)?;
        out.push(p.clone());
    }
    Ok(out)
}

/// Stage encoder table as a transition matrix (for one-hot stages `l ≥ 1`
/// this is `P^{l+1|l}`).
pub fn stage_transition(ladder: &VqLadder, stage: usize) -> &TransitionMatrix {
    ladder.stages[stage].encoder.matrix()
}
