//! Two-layer Gaussian soft vector quantiser.
//!
//! The generative model reconstructs `x'(y)` with an isotropic Gaussian of
//! width `σ`; the recognition model is an encoder table `Pr(y|x)` over the
//! training points. The objective is
//! `D_VQ/(4σ²) + L(P¹, q) − log(V/(√(2π)σ)^d)`.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{map_indexed, ordered_sum};
use crate::prob::{code_length, ProbVector, TransitionMatrix, Unit, NORM_TOL};
use crate::synth::rng;

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_vectors(vectors: &[Vec<f64>], what: &'static str) -> Result<usize> {
    let d = vectors.first().map(Vec::len).ok_or(Error::EmptyAlphabet)?;
    if d == 0 {
        return Err(Error::InvalidArgument(format!("{what} have dimension 0")));
    }
    for (i, v) in vectors.iter().enumerate() {
        if v.len() != d {
            return Err(Error::DimensionMismatch { what, expected: d, got: v.len() });
        }
        if let Some(&value) = v.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidEntry { index: i, value });
        }
    }
    Ok(d)
}

/// Reconstruction vectors plus the Gaussian width and volume element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, try_from = "CodebookDoc")]
pub struct GaussianCodebook {
    vectors: Vec<Vec<f64>>,
    sigma: f64,
    volume: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CodebookDoc {
    vectors: Vec<Vec<f64>>,
    sigma: f64,
    volume: f64,
}

impl TryFrom<CodebookDoc> for GaussianCodebook {
    type Error = Error;
    fn try_from(d: CodebookDoc) -> Result<Self> {
        GaussianCodebook::new(d.vectors, d.sigma, d.volume)
    }
}

impl GaussianCodebook {
    pub fn new(vectors: Vec<Vec<f64>>, sigma: f64, volume: f64) -> Result<Self> {
        check_vectors(&vectors, "code vectors")?;
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
        }
        if !(volume > 0.0 && volume.is_finite()) {
            return Err(Error::InvalidArgument(format!("volume must be positive, got {volume}")));
        }
        Ok(Self { vectors, sigma, volume })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        Self::new(self.vectors.clone(), sigma, self.volume)
    }

    pub fn with_vectors(&self, vectors: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(vectors, self.sigma, self.volume)
    }

    /// `−log(V/(√(2π)σ)^d)` in nats.
    pub fn constant_nats(&self) -> f64 {
        let d = self.dim() as f64;
        -self.volume.ln() + d * ((2.0 * std::f64::consts::PI).sqrt() * self.sigma).ln()
    }
}

/// Weighted empirical measure over input vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, try_from = "InputDoc")]
pub struct EmpiricalInput {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InputDoc {
    points: Vec<Vec<f64>>,
    weights: Option<Vec<f64>>,
}

impl TryFrom<InputDoc> for EmpiricalInput {
    type Error = Error;
    fn try_from(d: InputDoc) -> Result<Self> {
        match d.weights {
            Some(w) => EmpiricalInput::new(d.points, w),
            None => EmpiricalInput::uniform(d.points),
        }
    }
}

impl EmpiricalInput {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        check_vectors(&points, "input points")?;
        if weights.len() != points.len() {
            return Err(Error::DimensionMismatch { what: "input weights", expected: points.len(), got: weights.len() });
        }
        let weights = ProbVector::new(weights)?.into_inner();
        Ok(Self { points, weights })
    }

    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::EmptyAlphabet);
        }
        Self::new(points, vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim()];
        for (x, &w) in self.points.iter().zip(&self.weights) {
            for (mi, xi) in m.iter_mut().zip(x) {
                *mi += w * xi;
            }
        }
        m
    }
}

/// Encoder table `Pr(y|x_n)`: one probability column per training point.
///
/// Stored as probabilities rather than logits so the winner-take-all limit
/// (exact zeros) is representable.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftEncoder {
    probs: TransitionMatrix,
}

impl SoftEncoder {
    pub fn new(probs: TransitionMatrix) -> Self {
        Self { probs }
    }

    /// Softmax of per-point logit columns (`logits[n][y]`).
    pub fn from_logits(logits: &[Vec<f64>]) -> Result<Self> {
        let cols = logits.iter().map(|l| softmax(l)).collect::<Vec<_>>();
        Ok(Self { probs: TransitionMatrix::from_columns(cols)? })
    }

    /// One-hot encoder from a per-point assignment.
    pub fn hard(assign: &[usize], codes: usize) -> Result<Self> {
        Ok(Self { probs: TransitionMatrix::deterministic(assign, codes)? })
    }

    pub fn uniform(codes: usize, points: usize) -> Result<Self> {
        Ok(Self { probs: TransitionMatrix::constant(&ProbVector::uniform(codes)?, points)? })
    }

    pub fn codes(&self) -> usize {
        self.probs.rows()
    }

    pub fn points(&self) -> usize {
        self.probs.cols()
    }

    /// `Pr(·|x_n)`.
    pub fn row(&self, n: usize) -> &[f64] {
        self.probs.column(n)
    }

    pub fn matrix(&self) -> &TransitionMatrix {
        &self.probs
    }
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&l| if l == f64::NEG_INFINITY { 0.0 } else { (l - max).exp() }).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

fn check_shapes(enc: &SoftEncoder, code: &GaussianCodebook, data: &EmpiricalInput) -> Result<()> {
    if enc.points() != data.len() {
        return Err(Error::DimensionMismatch { what: "encoder columns vs data points", expected: data.len(), got: enc.points() });
    }
    if enc.codes() != code.len() {
        return Err(Error::DimensionMismatch { what: "encoder rows vs code vectors", expected: code.len(), got: enc.codes() });
    }
    if code.dim() != data.dim() {
        return Err(Error::DimensionMismatch { what: "code vs data dimension", expected: data.dim(), got: code.dim() });
    }
    Ok(())
}

/// Per-point contribution `w_n Σ_y Pr(y|x_n) ‖x_n − x'(y)‖²` (without the 2).
pub(crate) fn point_distortion(enc: &SoftEncoder, vectors: &[Vec<f64>], data: &EmpiricalInput, n: usize) -> f64 {
    let x = &data.points[n];
    let s: f64 = enc
        .row(n)
        .iter()
        .zip(vectors)
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, c)| p * sq_dist(x, c))
        .sum();
    data.weights[n] * s
}

/// `D_VQ = 2 Σ_x w(x) Σ_y Pr(y|x) ‖x − x'(y)‖²`.
pub fn dvq(enc: &SoftEncoder, code: &GaussianCodebook, data: &EmpiricalInput) -> Result<f64> {
    check_shapes(enc, code, data)?;
    Ok(2.0 * ordered_sum(data.len(), |n| point_distortion(enc, &code.vectors, data, n)))
}

/// `P¹(y) = Σ_x w(x) Pr(y|x)`.
pub fn output_marginal(enc: &SoftEncoder, data: &EmpiricalInput) -> Result<ProbVector> {
    if enc.points() != data.len() {
        return Err(Error::DimensionMismatch { what: "encoder columns vs data points", expected: data.len(), got: enc.points() });
    }
    let mut p = vec![0.0; enc.codes()];
    for (n, &w) in data.weights.iter().enumerate() {
        for (py, e) in p.iter_mut().zip(enc.row(n)) {
            *py += w * e;
        }
    }
    ProbVector::renormalize(p)
}

/// The three objective terms, in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoLayerTerms {
    pub dvq: f64,
    pub distortion_term: f64,
    pub code_length_term: f64,
    pub constant_term: f64,
}

impl TwoLayerTerms {
    pub fn total(&self) -> f64 {
        self.distortion_term + self.code_length_term + self.constant_term
    }
}

pub fn two_layer_terms(
    enc: &SoftEncoder,
    code: &GaussianCodebook,
    data: &EmpiricalInput,
    q: &ProbVector,
) -> Result<TwoLayerTerms> {
    let d = dvq(enc, code, data)?;
    if q.len() != code.len() {
        return Err(Error::DimensionMismatch { what: "output prior", expected: code.len(), got: q.len() });
    }
    let p1 = output_marginal(enc, data)?;
    Ok(TwoLayerTerms {
        dvq: d,
        distortion_term: d / (4.0 * code.sigma * code.sigma),
        code_length_term: code_length(&p1, q, Unit::Nats)?,
        constant_term: code.constant_nats(),
    })
}

pub fn two_layer_objective(
    enc: &SoftEncoder,
    code: &GaussianCodebook,
    data: &EmpiricalInput,
    q: &ProbVector,
    unit: Unit,
) -> Result<f64> {
    Ok(unit.from_nats(two_layer_terms(enc, code, data, q)?.total()))
}

/// Per-code responsibility `Σ_x w(x) Pr(y|x)` and weighted sums of `x`.
fn responsibility_sums(enc: &SoftEncoder, data: &EmpiricalInput) -> (Vec<f64>, Vec<Vec<f64>>) {
    let d = data.dim();
    let mut mass = vec![0.0; enc.codes()];
    let mut sums = vec![vec![0.0; d]; enc.codes()];
    for (n, x) in data.points.iter().enumerate() {
        let w = data.weights[n];
        for (y, &p) in enc.row(n).iter().enumerate() {
            if p > 0.0 {
                mass[y] += w * p;
                for (s, xi) in sums[y].iter_mut().zip(x) {
                    *s += w * p * xi;
                }
            }
        }
    }
    (mass, sums)
}

/// Responsibility-weighted centroids. Fails with the first dead code.
pub fn optimal_reconstruction(enc: &SoftEncoder, data: &EmpiricalInput) -> Result<Vec<Vec<f64>>> {
    if enc.points() != data.len() {
        return Err(Error::DimensionMismatch { what: "encoder columns vs data points", expected: data.len(), got: enc.points() });
    }
    let (mass, sums) = responsibility_sums(enc, data);
    mass.iter()
        .zip(sums)
        .enumerate()
        .map(|(y, (&m, s))| {
            if m > 0.0 {
                Ok(s.into_iter().map(|v| v / m).collect())
            } else {
                Err(Error::DeadCode { index: y })
            }
        })
        .collect()
}

/// Posterior `∝ q(y) exp(−β‖x − x'(y)‖²)`, log-sum-exp stabilised.
pub fn optimal_encoder_row(x: &[f64], code: &GaussianCodebook, q: &ProbVector, beta: f64) -> ProbVector {
    let logits: Vec<f64> = code
        .vectors
        .iter()
        .zip(q.as_slice())
        .map(|(c, &qy)| if qy > 0.0 { qy.ln() - beta * sq_dist(x, c) } else { f64::NEG_INFINITY })
        .collect();
    ProbVector::new(softmax(&logits)).unwrap_or_else(|_| ProbVector::renormalize(softmax(&logits)).expect("softmax"))
}

/// Winner-take-all limit: `argmin β‖x − x'(y)‖² − log q(y)`, lowest index on
/// ties. For fixed codebook and `q` this is the exact minimiser of the
/// objective over encoders, which is linear in `Pr(y|x)`.
pub fn hard_encoder_row(x: &[f64], code: &GaussianCodebook, q: &ProbVector, beta: f64) -> usize {
    let scores = code
        .vectors
        .iter()
        .zip(q.as_slice())
        .map(|(c, &qy)| if qy > 0.0 { beta * sq_dist(x, c) - qy.ln() } else { f64::INFINITY });
    argmin(scores)
}

pub(crate) fn argmin(scores: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, s) in scores.enumerate() {
        if s < best.1 {
            best = (i, s);
        }
    }
    best.0
}

/// Two-sided distortion `Σ_x w Σ_y Pr(y|x) Σ_x' Pr(x'|y) ‖x − x'‖²` with
/// `Pr(x'|y)` the Bayes reversal of the encoder over the data. Equals [`dvq`]
/// at optimal centroids (pairwise scatter is twice the variance).
pub fn two_sided_dvq(enc: &SoftEncoder, data: &EmpiricalInput) -> Result<f64> {
    let (mass, _) = responsibility_sums(enc, data);
    let n = data.len();
    let s = ordered_sum(n, |i| {
        let x = &data.points[i];
        let mut acc = 0.0;
        for (y, &py) in enc.row(i).iter().enumerate() {
            if py == 0.0 || mass[y] == 0.0 {
                continue;
            }
            let inner: f64 = (0..n)
                .map(|j| data.weights[j] * enc.row(j)[y] / mass[y] * sq_dist(x, &data.points[j]))
                .sum();
            acc += py * inner;
        }
        data.weights[i] * acc
    });
    Ok(s)
}

/// `∂D_VQ/∂x'(y) = −4 Σ_x w(x) Pr(y|x) (x − x'(y))`.
pub fn dvq_gradient(enc: &SoftEncoder, code: &GaussianCodebook, data: &EmpiricalInput) -> Result<Vec<Vec<f64>>> {
    check_shapes(enc, code, data)?;
    let (mass, sums) = responsibility_sums(enc, data);
    Ok(code
        .vectors
        .iter()
        .zip(mass.iter().zip(sums))
        .map(|(c, (&m, s))| c.iter().zip(s).map(|(ci, si)| -4.0 * (si - m * ci)).collect())
        .collect())
}

/// How the encoder step is solved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode", deny_unknown_fields)]
pub enum EncoderMode {
    /// Exact minimiser of the objective: winner-take-all on the Gaussian
    /// score. Keeps the trace monotone.
    Hard,
    /// Softmax posterior at `β·1/(2σ²)`; minimises the objective minus the
    /// encoder's conditional entropy, so the trace need not be monotone.
    Posterior { beta_scale: f64 },
}

impl Default for EncoderMode {
    fn default() -> Self {
        EncoderMode::Hard
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SoftVqConfig {
    pub codes: usize,
    pub sigma0: f64,
    #[serde(default = "one")]
    pub sigma_ratio: f64,
    #[serde(default)]
    pub q_update: bool,
    pub iterations: usize,
    #[serde(default = "one")]
    pub volume: f64,
    #[serde(default)]
    pub encoder: EncoderMode,
    /// Overrides the seeded sample of data points.
    #[serde(default)]
    pub initial_codebook: Option<Vec<Vec<f64>>>,
}

fn one() -> f64 {
    1.0
}

impl SoftVqConfig {
    pub fn new(codes: usize, sigma0: f64, iterations: usize) -> Self {
        Self {
            codes,
            sigma0,
            sigma_ratio: 1.0,
            q_update: false,
            iterations,
            volume: 1.0,
            encoder: EncoderMode::Hard,
            initial_codebook: None,
        }
    }

    pub fn sigma_at(&self, t: usize) -> f64 {
        self.sigma0 * self.sigma_ratio.powi(t as i32)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.codes == 0 {
            return Err(Error::EmptyAlphabet);
        }
        if self.iterations == 0 {
            return Err(Error::InvalidArgument("iterations must be at least 1".into()));
        }
        if !(self.sigma_ratio > 0.0 && self.sigma_ratio <= 1.0) {
            return Err(Error::InvalidArgument(format!("sigma_ratio must be in (0, 1], got {}", self.sigma_ratio)));
        }
        if let EncoderMode::Posterior { beta_scale } = self.encoder {
            if !(beta_scale > 0.0 && beta_scale.is_finite()) {
                return Err(Error::InvalidArgument(format!("beta_scale must be positive, got {beta_scale}")));
            }
        }
        Ok(())
    }
}

/// One trace row, all terms in nats except `dvq`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub sigma: f64,
    pub dvq: f64,
    pub distortion_term: f64,
    pub code_length_term: f64,
    pub constant_term: f64,
    pub total: f64,
}

impl TraceRow {
    pub(crate) fn from_terms(iteration: usize, sigma: f64, t: &TwoLayerTerms) -> Self {
        Self {
            iteration,
            sigma,
            dvq: t.dvq,
            distortion_term: t.distortion_term,
            code_length_term: t.code_length_term,
            constant_term: t.constant_term,
            total: t.total(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SoftVqRun {
    pub encoder: SoftEncoder,
    pub codebook: GaussianCodebook,
    pub prior: ProbVector,
    pub trace: Vec<TraceRow>,
    /// Number of dead-code respawns over the run.
    pub respawns: usize,
}

/// Seeded sample of `m` distinct data points.
pub fn sample_codebook(data: &EmpiricalInput, m: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if m > data.len() {
        return Err(Error::InvalidArgument(format!("cannot sample {m} distinct points from {}", data.len())));
    }
    let mut r = rng(seed);
    Ok(sample(&mut r, data.len(), m).into_iter().map(|i| data.points[i].clone()).collect())
}

/// Encoder step shared by the trainers.
pub fn encode_all(data: &EmpiricalInput, code: &GaussianCodebook, q: &ProbVector, mode: EncoderMode) -> Result<SoftEncoder> {
    let beta = 1.0 / (2.0 * code.sigma * code.sigma);
    match mode {
        EncoderMode::Hard => {
            let assign = map_indexed(data.len(), |n| hard_encoder_row(&data.points[n], code, q, beta));
            SoftEncoder::hard(&assign, code.len())
        }
        EncoderMode::Posterior { beta_scale } => {
            let cols = map_indexed(data.len(), |n| optimal_encoder_row(&data.points[n], code, q, beta * beta_scale).into_inner());
            Ok(SoftEncoder::new(TransitionMatrix::from_columns(cols)?))
        }
    }
}

/// Centroid step with the dead-code policy: each zero-responsibility code is
/// moved onto the data point with the largest per-point distortion (distinct
/// points, in decreasing order). A dead code carries no responsibility so the
/// move leaves the objective unchanged. Returns the codebook and the number
/// of respawns.
pub(crate) fn centroids_with_respawn(
    enc: &SoftEncoder,
    data: &EmpiricalInput,
    current: &[Vec<f64>],
) -> (Vec<Vec<f64>>, usize) {
    let (mass, sums) = responsibility_sums(enc, data);
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(mass.len());
    let mut dead = Vec::new();
    for (y, (&m, s)) in mass.iter().zip(sums).enumerate() {
        if m > 0.0 {
            out.push(s.into_iter().map(|v| v / m).collect());
        } else {
            out.push(current[y].clone());
            dead.push(y);
        }
    }
    if !dead.is_empty() {
        let mut contrib: Vec<(usize, f64)> =
            map_indexed(data.len(), |n| point_distortion(enc, &out, data, n)).into_iter().enumerate().collect();
        contrib.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for (y, (n, _)) in dead.iter().zip(contrib.iter().cycle()) {
            out[*y] = data.points[*n].clone();
        }
    }
    (out, dead.len())
}

/// Exact alternating minimisation: encoder, codebook, then optionally the
/// output prior. The trace records the objective after every iteration.
pub fn train_soft_vq(data: &EmpiricalInput, cfg: &SoftVqConfig, seed: u64) -> Result<SoftVqRun> {
    cfg.validate()?;
    let init = match &cfg.initial_codebook {
        Some(v) => {
            if v.len() != cfg.codes {
                return Err(Error::DimensionMismatch { what: "initial codebook", expected: cfg.codes, got: v.len() });
            }
            v.clone()
        }
        None => sample_codebook(data, cfg.codes, seed)?,
    };
    let mut code = GaussianCodebook::new(init, cfg.sigma0, cfg.volume)?;
    if code.dim() != data.dim() {
        return Err(Error::DimensionMismatch { what: "code vs data dimension", expected: data.dim(), got: code.dim() });
    }
    let mut q = ProbVector::uniform(cfg.codes)?;
    let mut trace = Vec::with_capacity(cfg.iterations);
    let mut respawns = 0;
    let mut enc = SoftEncoder::uniform(cfg.codes, data.len())?;
    for t in 0..cfg.iterations {
        code = code.with_sigma(cfg.sigma_at(t))?;
        enc = encode_all(data, &code, &q, cfg.encoder)?;
        let (vectors, r) = centroids_with_respawn(&enc, data, &code.vectors);
        respawns += r;
        code = code.with_vectors(vectors)?;
        if cfg.q_update {
            q = output_marginal(&enc, data)?;
        }
        let terms = two_layer_terms(&enc, &code, data, &q)?;
        trace.push(TraceRow::from_terms(t, code.sigma, &terms));
    }
    Ok(SoftVqRun { encoder: enc, codebook: code, prior: q, trace, respawns })
}

/// True when every step with unchanged `σ` is non-increasing within `tol`.
pub fn trace_is_monotone(trace: &[TraceRow], tol: f64) -> bool {
    trace
        .windows(2)
        .filter(|w| w[0].sigma == w[1].sigma)
        .all(|w| w[1].total <= w[0].total + tol)
}

/// Sanity check that an encoder table is column-stochastic.
pub fn encoder_is_normalized(enc: &SoftEncoder) -> bool {
    enc.probs.columns().all(|c| (c.iter().sum::<f64>() - 1.0).abs() <= NORM_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn line(xs: &[f64]) -> EmpiricalInput {
        EmpiricalInput::uniform(xs.iter().map(|&x| vec![x]).collect()).unwrap()
    }

    fn book(xs: &[f64], sigma: f64) -> GaussianCodebook {
        GaussianCodebook::new(xs.iter().map(|&x| vec![x]).collect(), sigma, 1.0).unwrap()
    }

    #[test]
    fn perfect_reconstruction_has_zero_distortion() {
        let data = line(&[0.0, 1.0]);
        let enc = SoftEncoder::hard(&[0, 1], 2).unwrap();
        assert_eq!(dvq(&enc, &book(&[0.0, 1.0], 1.0), &data).unwrap(), 0.0);
    }

    #[test]
    fn single_code_at_mean_gives_twice_variance() {
        let data = line(&[0.0, 1.0, 3.0, 4.0]);
        let mean = 2.0;
        let var = [4.0, 1.0, 1.0, 4.0].iter().sum::<f64>() / 4.0;
        let enc = SoftEncoder::uniform(1, 4).unwrap();
        assert_abs_diff_eq!(dvq(&enc, &book(&[mean], 1.0), &data).unwrap(), 2.0 * var, epsilon = 1e-12);
    }

    #[test]
    fn hand_weighted_centroid() {
        let data = line(&[0.0, 1.0]);
        let enc = SoftEncoder::new(TransitionMatrix::from_columns(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap());
        let c = optimal_reconstruction(&enc, &data).unwrap();
        assert_abs_diff_eq!(c[0][0], 0.2 / 1.1, epsilon = 1e-12);
        assert_abs_diff_eq!(c[1][0], 0.8 / 0.9, epsilon = 1e-12);
    }

    #[test]
    fn dead_code_reported() {
        let data = line(&[0.0, 1.0]);
        let enc = SoftEncoder::hard(&[0, 0], 2).unwrap();
        assert_eq!(optimal_reconstruction(&enc, &data), Err(Error::DeadCode { index: 1 }));
    }

    #[test]
    fn symmetric_posterior() {
        let q = ProbVector::uniform(2).unwrap();
        let p = optimal_encoder_row(&[0.0], &book(&[-1.0, 1.0], 1.0), &q, 0.5);
        assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-15);
        // Extreme beta must not overflow.
        let p = optimal_encoder_row(&[0.1], &book(&[-1.0, 1.0], 1.0), &q, 1e12);
        assert_eq!(p.as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn hard_row_breaks_ties_low() {
        let q = ProbVector::uniform(3).unwrap();
        assert_eq!(hard_encoder_row(&[0.0], &book(&[1.0, -1.0, 5.0], 1.0), &q, 0.5), 0);
    }

    #[test]
    fn perfect_prior_gives_entropy_term() {
        let data = line(&[0.0, 0.2, 1.0]);
        let enc = SoftEncoder::hard(&[0, 0, 1], 2).unwrap();
        let p1 = output_marginal(&enc, &data).unwrap();
        let t = two_layer_terms(&enc, &book(&[0.1, 1.0], 0.3), &data, &p1).unwrap();
        assert_abs_diff_eq!(t.code_length_term, crate::prob::entropy(&p1, Unit::Nats), epsilon = 1e-12);
    }

    #[test]
    fn two_sided_form_matches_at_centroids() {
        let data = line(&[0.0, 0.3, 1.0, 1.4, 2.0]);
        let enc = SoftEncoder::from_logits(&[
            vec![1.0, 0.0],
            vec![0.5, 0.2],
            vec![-0.3, 0.4],
            vec![-1.0, 1.0],
            vec![0.0, 2.0],
        ])
        .unwrap();
        let c = optimal_reconstruction(&enc, &data).unwrap();
        let d = dvq(&enc, &GaussianCodebook::new(c, 1.0, 1.0).unwrap(), &data).unwrap();
        assert_abs_diff_eq!(two_sided_dvq(&enc, &data).unwrap(), d, epsilon = 1e-12);
    }

    #[test]
    fn single_code_lands_on_mean() {
        let data = line(&[0.0, 1.0, 5.0]);
        let run = train_soft_vq(&data, &SoftVqConfig::new(1, 0.5, 1), 3).unwrap();
        assert_abs_diff_eq!(run.codebook.vectors()[0][0], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn exact_cover_drives_distortion_to_zero() {
        let data = line(&[0.0, 1.0, 2.0, 7.0]);
        let run = train_soft_vq(&data, &SoftVqConfig::new(4, 0.01, 5), 9).unwrap();
        assert_eq!(run.trace.last().unwrap().dvq, 0.0);
    }

    #[test]
    fn codebook_json_round_trip() {
        let b = book(&[0.5, 1.5], 0.2);
        let s = serde_json::to_string(&b).unwrap();
        assert_eq!(serde_json::from_str::<GaussianCodebook>(&s).unwrap(), b);
        assert!(serde_json::from_str::<GaussianCodebook>(r#"{"vectors":[[1]],"sigma":-1,"volume":1}"#).is_err());
        assert!(serde_json::from_str::<GaussianCodebook>(r#"{"vectors":[[1]],"sigma":1,"volume":1,"x":0}"#).is_err());
    }
}
