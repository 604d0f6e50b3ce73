//! Partitioned-mixture recognition models.
//!
//! `K` recognition models each see a patch of the output alphabet (row `k` of
//! the assignment matrix `A`). Each model normalises the Bayes posterior over
//! its own patch and the outputs are averaged, so the result is a sum of
//! locally normalised posteriors rather than one global posterior. Averaging
//! several models' reconstructions gives an upper bound on D_VQ that admits
//! factorial codes.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::chain::cell_count;
use crate::error::{Error, Result};
use crate::par::{map_indexed, ordered_sum};
use crate::prob::{code_length, ProbVector, TransitionMatrix, Unit};
use crate::vq::{
    centroids_with_respawn, sample_codebook, softmax, sq_dist, EmpiricalInput, GaussianCodebook, SoftEncoder,
    TraceRow, TwoLayerTerms,
};

/// Model count, patch weights `A[k][i] ≥ 0` and the output prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PmdConfigDoc", into = "PmdConfigDoc")]
pub struct PmdConfig {
    assignment: Vec<Vec<f64>>,
    prior: ProbVector,
}

/// JSON form: `{"K": .., "patches": [[..]..]}` or `{"K": .., "matrix": [[..]..]}`
/// plus `"prior"`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PmdConfigDoc {
    #[serde(rename = "K")]
    k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    patches: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    matrix: Option<Vec<Vec<f64>>>,
    prior: ProbVector,
}

impl TryFrom<PmdConfigDoc> for PmdConfig {
    type Error = Error;

    fn try_from(d: PmdConfigDoc) -> Result<Self> {
        let cfg = match (d.patches, d.matrix) {
            (Some(p), None) => PmdConfig::from_patches(&p, d.prior)?,
            (None, Some(m)) => PmdConfig::new(m, d.prior)?,
            _ => return Err(Error::InvalidArgument("give exactly one of `patches` or `matrix`".into())),
        };
        if cfg.models() != d.k {
            return Err(Error::DimensionMismatch { what: "K vs assignment rows", expected: d.k, got: cfg.models() });
        }
        Ok(cfg)
    }
}

impl From<PmdConfig> for PmdConfigDoc {
    fn from(c: PmdConfig) -> Self {
        PmdConfigDoc { k: c.models(), patches: None, matrix: Some(c.assignment), prior: c.prior }
    }
}

impl PmdConfig {
    pub fn new(assignment: Vec<Vec<f64>>, prior: ProbVector) -> Result<Self> {
        if assignment.is_empty() {
            return Err(Error::EmptyAlphabet);
        }
        let m = prior.len();
        let mut covered = vec![false; m];
        for (k, row) in assignment.iter().enumerate() {
            if row.len() != m {
                return Err(Error::DimensionMismatch { what: "assignment row", expected: m, got: row.len() });
            }
            if let Some((index, &value)) = row.iter().enumerate().find(|(_, a)| !(a.is_finite() && **a >= 0.0)) {
                return Err(Error::InvalidEntry { index, value });
            }
            if !row.iter().any(|&a| a > 0.0) {
                return Err(Error::InvalidArgument(format!("model {k} has an empty patch")));
            }
            for (c, &a) in covered.iter_mut().zip(row) {
                *c |= a > 0.0;
            }
        }
        if let Some(i) = covered.iter().position(|c| !c) {
            return Err(Error::InvalidArgument(format!("index {i} is not covered by any model")));
        }
        Ok(Self { assignment, prior })
    }

    /// Binary patches given as index lists.
    pub fn from_patches(patches: &[Vec<usize>], prior: ProbVector) -> Result<Self> {
        let m = prior.len();
        let mut rows = Vec::with_capacity(patches.len());
        for p in patches {
            let mut row = vec![0.0; m];
            for &i in p {
                if i >= m {
                    return Err(Error::InvalidArgument(format!("patch index {i} out of range for {m} outputs")));
                }
                row[i] = 1.0;
            }
            rows.push(row);
        }
        Self::new(rows, prior)
    }

    /// `k` overlapping binary patches on a ring of `m` outputs, centred at
    /// `⌊j·m/k⌋` with half-width `w`.
    pub fn ring_patches(m: usize, k: usize, w: usize, prior: ProbVector) -> Result<Self> {
        if k == 0 || k > m {
            return Err(Error::InvalidArgument(format!("need 1 <= K <= M, got K={k}, M={m}")));
        }
        let patches: Vec<Vec<usize>> = (0..k)
            .map(|j| {
                let c = j * m / k;
                let width = (2 * w + 1).min(m);
                (0..width).map(|o| (c + m + o - w.min(m)) % m).collect()
            })
            .collect();
        Self::from_patches(&patches, prior)
    }

    pub fn models(&self) -> usize {
        self.assignment.len()
    }

    pub fn outputs(&self) -> usize {
        self.prior.len()
    }

    pub fn assignment(&self) -> &[Vec<f64>] {
        &self.assignment
    }

    pub fn prior(&self) -> &ProbVector {
        &self.prior
    }

    fn check_column(&self, lik: &[f64]) -> Result<()> {
        if lik.len() != self.outputs() {
            return Err(Error::DimensionMismatch { what: "likelihood column", expected: self.outputs(), got: lik.len() });
        }
        if let Some((index, &value)) = lik.iter().enumerate().find(|(_, l)| !(l.is_finite() && **l >= 0.0)) {
            return Err(Error::InvalidEntry { index, value });
        }
        Ok(())
    }

    fn numerators(&self, lik: &[f64]) -> Vec<Vec<f64>> {
        self.assignment
            .iter()
            .map(|row| row.iter().zip(lik).zip(self.prior.as_slice()).map(|((a, l), p)| l * a * p).collect())
            .collect()
    }

    /// Per-model posteriors from log-likelihoods. Each row is normalised over
    /// its patch.
    fn patch_posteriors_log(&self, loglik: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.assignment
            .iter()
            .enumerate()
            .map(|(k, row)| {
                let logits: Vec<f64> = row
                    .iter()
                    .zip(self.prior.as_slice())
                    .zip(loglik)
                    .map(|((&a, &p), &l)| if a * p > 0.0 { (a * p).ln() + l } else { f64::NEG_INFINITY })
                    .collect();
                if logits.iter().all(|&l| l == f64::NEG_INFINITY) {
                    return Err(Error::DeadModel { k });
                }
                Ok(softmax(&logits))
            })
            .collect()
    }
}

/// `(1/K) Σ_k lik·A_k·prior / Σ_i' lik·A_k·prior`.
pub fn pmd_posterior(lik: &[f64], cfg: &PmdConfig) -> Result<ProbVector> {
    cfg.check_column(lik)?;
    let k = cfg.models() as f64;
    let mut out = vec![0.0; cfg.outputs()];
    for (j, num) in cfg.numerators(lik).into_iter().enumerate() {
        let z: f64 = num.iter().sum();
        if !(z > 0.0) {
            return Err(Error::DeadModel { k: j });
        }
        for (o, v) in out.iter_mut().zip(num) {
            *o += v / z;
        }
    }
    ProbVector::renormalize(out.into_iter().map(|v| v / k).collect())
}

/// Full Bayesian average: one global denominator over every model and index.
pub fn bayes_posterior(lik: &[f64], cfg: &PmdConfig) -> Result<ProbVector> {
    cfg.check_column(lik)?;
    let mut out = vec![0.0; cfg.outputs()];
    for num in cfg.numerators(lik) {
        for (o, v) in out.iter_mut().zip(num) {
            *o += v;
        }
    }
    let z: f64 = out.iter().sum();
    if !(z > 0.0) {
        return Err(Error::ZeroEvidence);
    }
    ProbVector::renormalize(out.into_iter().map(|v| v / z).collect())
}

/// One recognition model of a bank: posterior table and its codebook.
#[derive(Debug, Clone)]
pub struct BankModel {
    pub encoder: SoftEncoder,
    pub vectors: Vec<Vec<f64>>,
}

/// `n` independent recognition models whose reconstructions are averaged.
#[derive(Debug, Clone)]
pub struct FactorialEncoderBank {
    models: Vec<BankModel>,
}

impl FactorialEncoderBank {
    pub fn new(models: Vec<BankModel>) -> Result<Self> {
        let first = models.first().ok_or(Error::EmptyAlphabet)?;
        let points = first.encoder.points();
        let dim = first.vectors.first().map(Vec::len).ok_or(Error::EmptyAlphabet)?;
        for m in &models {
            if m.encoder.codes() != m.vectors.len() {
                return Err(Error::DimensionMismatch { what: "encoder rows vs code vectors", expected: m.vectors.len(), got: m.encoder.codes() });
            }
            if m.encoder.points() != points {
                return Err(Error::DimensionMismatch { what: "bank encoder columns", expected: points, got: m.encoder.points() });
            }
            if let Some(v) = m.vectors.iter().find(|v| v.len() != dim) {
                return Err(Error::DimensionMismatch { what: "bank code dimension", expected: dim, got: v.len() });
            }
        }
        Ok(Self { models })
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn models(&self) -> &[BankModel] {
        &self.models
    }

    fn dim(&self) -> usize {
        self.models[0].vectors[0].len()
    }

    fn check_data(&self, data: &EmpiricalInput) -> Result<()> {
        if self.models[0].encoder.points() != data.len() {
            return Err(Error::DimensionMismatch { what: "bank encoder columns vs data points", expected: data.len(), got: self.models[0].encoder.points() });
        }
        if self.dim() != data.dim() {
            return Err(Error::DimensionMismatch { what: "code vs data dimension", expected: data.dim(), got: self.dim() });
        }
        Ok(())
    }

    fn radices(&self) -> Vec<usize> {
        self.models.iter().map(|m| m.vectors.len()).collect()
    }
}

fn posterior_mean(p: &[f64], vectors: &[Vec<f64>], dim: usize) -> (Vec<f64>, f64) {
    let mut mu = vec![0.0; dim];
    let mut s = 0.0;
    for (&py, c) in p.iter().zip(vectors) {
        if py > 0.0 {
            for (m, ci) in mu.iter_mut().zip(c) {
                *m += py * ci;
            }
            s += py * c.iter().map(|v| v * v).sum::<f64>();
        }
    }
    (mu, s)
}

/// Per-point `E‖x − (1/n) Σ_k X_k‖²` with independent `X_k ~ Pr(·|x,k)` over
/// `x'_k`. Writing `μ_k = E X_k` and `s_k = E‖X_k‖²`, independence turns every
/// cross-model expectation into `μ_j·μ_k`, leaving
/// `‖x − (1/n) Σ μ_k‖² + (1/n²) Σ_k (s_k − ‖μ_k‖²)`.
fn factorial_point(x: &[f64], parts: &[(Vec<f64>, f64)]) -> f64 {
    let n = parts.len() as f64;
    let mut mean = vec![0.0; x.len()];
    let mut var = 0.0;
    for (mu, s) in parts {
        for (m, v) in mean.iter_mut().zip(mu) {
            *m += v / n;
        }
        var += s - mu.iter().map(|v| v * v).sum::<f64>();
    }
    sq_dist(x, &mean) + var / (n * n)
}

/// `2 Σ_x w Σ_{y_1..y_n} Π_k Pr(y_k|x,k) ‖x − (1/n) Σ_k x'_k(y_k)‖²`, in
/// closed form.
pub fn factorial_dvq_bound(bank: &FactorialEncoderBank, data: &EmpiricalInput) -> Result<f64> {
    bank.check_data(data)?;
    let d = bank.dim();
    Ok(2.0
        * ordered_sum(data.len(), |n| {
            let parts: Vec<_> = bank.models.iter().map(|m| posterior_mean(m.encoder.row(n), &m.vectors, d)).collect();
            data.weights()[n] * factorial_point(&data.points()[n], &parts)
        }))
}

/// `(2/n) Σ w Σ_y Pr(y|x)‖x − x'(y)‖² + (2(n−1)/n) Σ w ‖x − Σ_y Pr(y|x) x'(y)‖²`:
/// the factorial bound for `n` copies of one model.
pub fn repeated_model_bound(enc: &SoftEncoder, code: &GaussianCodebook, data: &EmpiricalInput, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("model count n must be at least 1".into()));
    }
    if enc.points() != data.len() || enc.codes() != code.len() || code.dim() != data.dim() {
        return Err(Error::DimensionMismatch { what: "encoder, codebook and data", expected: data.len(), got: enc.points() });
    }
    let nf = n as f64;
    let (a, b) = map_indexed(data.len(), |i| {
        let x = &data.points()[i];
        let w = data.weights()[i];
        let p = enc.row(i);
        let spread: f64 = p.iter().zip(code.vectors()).filter(|(q, _)| **q > 0.0).map(|(q, c)| q * sq_dist(x, c)).sum();
        let (mu, _) = posterior_mean(p, code.vectors(), code.dim());
        (w * spread, w * sq_dist(x, &mu))
    })
    .into_iter()
    .fold((0.0, 0.0), |(a, b), (u, v)| (a + u, b + v));
    Ok(2.0 / nf * a + 2.0 * (nf - 1.0) / nf * b)
}

/// Visits every joint code `(y_1..y_n)` in mixed-radix order (last model
/// fastest).
fn for_each_joint(radices: &[usize], mut f: impl FnMut(usize, &[usize])) {
    let mut states = vec![0; radices.len()];
    let mut flat = 0;
    loop {
        f(flat, &states);
        flat += 1;
        let mut k = radices.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            states[k] += 1;
            if states[k] < radices[k] {
                break;
            }
            states[k] = 0;
        }
    }
}

fn joint_prob(bank: &FactorialEncoderBank, n: usize, states: &[usize]) -> f64 {
    bank.models.iter().zip(states).map(|(m, &y)| m.encoder.row(n)[y]).product()
}

/// Joint codebook `(1/n) Σ_k x'_k(y_k)`: the bound's own reconstruction.
pub fn averaged_joint_codebook(bank: &FactorialEncoderBank, cap: usize) -> Result<Vec<Vec<f64>>> {
    let radices = bank.radices();
    let cells = cell_count(&radices, cap)?;
    let nf = bank.len() as f64;
    let mut out = Vec::with_capacity(cells);
    for_each_joint(&radices, |_, states| {
        let mut v = vec![0.0; bank.dim()];
        for (m, &y) in bank.models.iter().zip(states) {
            for (o, c) in v.iter_mut().zip(&m.vectors[y]) {
                *o += c / nf;
            }
        }
        out.push(v);
    });
    Ok(out)
}

/// Optimal joint codebook: the data centroid of each joint code under the
/// product posterior. Codes with no mass keep the averaged vector.
pub fn optimal_joint_codebook(bank: &FactorialEncoderBank, data: &EmpiricalInput, cap: usize) -> Result<Vec<Vec<f64>>> {
    bank.check_data(data)?;
    let mut out = averaged_joint_codebook(bank, cap)?;
    let radices = bank.radices();
    let d = bank.dim();
    let mut mass = vec![0.0; out.len()];
    let mut sums = vec![vec![0.0; d]; out.len()];
    for (n, (x, &w)) in data.points().iter().zip(data.weights()).enumerate() {
        for_each_joint(&radices, |j, states| {
            let p = w * joint_prob(bank, n, states);
            if p > 0.0 {
                mass[j] += p;
                for (s, xi) in sums[j].iter_mut().zip(x) {
                    *s += p * xi;
                }
            }
        });
    }
    for ((o, m), s) in out.iter_mut().zip(mass).zip(sums) {
        if m > 0.0 {
            *o = s.into_iter().map(|v| v / m).collect();
        }
    }
    Ok(out)
}

/// `2 Σ_x w Σ_{y_1..y_n} Π_k Pr(y_k|x,k) ‖x − x'(y_1..y_n)‖²` by enumerating
/// the product code. `joint` is indexed in mixed-radix order, last model
/// fastest.
pub fn exact_product_dvq(bank: &FactorialEncoderBank, data: &EmpiricalInput, joint: &[Vec<f64>], cap: usize) -> Result<f64> {
    bank.check_data(data)?;
    let radices = bank.radices();
    let cells = cell_count(&radices, cap)?;
    if joint.len() != cells {
        return Err(Error::DimensionMismatch { what: "joint codebook", expected: cells, got: joint.len() });
    }
    if let Some(v) = joint.iter().find(|v| v.len() != data.dim()) {
        return Err(Error::DimensionMismatch { what: "joint code dimension", expected: data.dim(), got: v.len() });
    }
    Ok(2.0
        * ordered_sum(data.len(), |n| {
            let x = &data.points()[n];
            let mut s = 0.0;
            for_each_joint(&radices, |j, states| {
                let p = joint_prob(bank, n, states);
                if p > 0.0 {
                    s += p * sq_dist(x, &joint[j]);
                }
            });
            data.weights()[n] * s
        }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PmdTrainConfig {
    pub pmd: PmdConfig,
    pub sigma0: f64,
    #[serde(default = "one")]
    pub sigma_ratio: f64,
    pub iterations: usize,
    #[serde(default = "one")]
    pub volume: f64,
    /// Overrides the seeded sample of data points.
    #[serde(default)]
    pub initial_codebook: Option<Vec<Vec<f64>>>,
}

fn one() -> f64 {
    1.0
}

impl PmdTrainConfig {
    pub fn new(pmd: PmdConfig, sigma0: f64, iterations: usize) -> Self {
        Self { pmd, sigma0, sigma_ratio: 1.0, iterations, volume: 1.0, initial_codebook: None }
    }

    pub fn sigma_at(&self, t: usize) -> f64 {
        self.sigma0 * self.sigma_ratio.powi(t as i32)
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma_ratio > 0.0 && self.sigma_ratio <= 1.0) {
            return Err(Error::InvalidArgument(format!("sigma_ratio must be in (0, 1], got {}", self.sigma_ratio)));
        }
        // A patch without prior mass has zero evidence for every input.
        for (k, row) in self.pmd.assignment.iter().enumerate() {
            if !row.iter().zip(self.pmd.prior.as_slice()).any(|(a, p)| a * p > 0.0) {
                return Err(Error::DeadModel { k });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PmdRun {
    pub codebook: GaussianCodebook,
    /// Averaged posterior `Pr(i|x)`.
    pub posterior: SoftEncoder,
    /// Per-model posteriors, each zero outside its patch.
    pub patches: Vec<SoftEncoder>,
    pub trace: Vec<TraceRow>,
    pub respawns: usize,
}

/// E-step: per-model patch posteriors under Gaussian likelihoods, evaluated in
/// the log domain, and their average.
pub fn pmd_encode(data: &EmpiricalInput, code: &GaussianCodebook, cfg: &PmdConfig) -> Result<(SoftEncoder, Vec<SoftEncoder>)> {
    if code.len() != cfg.outputs() {
        return Err(Error::DimensionMismatch { what: "codebook vs PMD outputs", expected: cfg.outputs(), got: code.len() });
    }
    let beta = 1.0 / (2.0 * code.sigma() * code.sigma());
    let k = cfg.models();
    let per_point = map_indexed(data.len(), |n| {
        let x = &data.points()[n];
        let loglik: Vec<f64> = code.vectors().iter().map(|c| -(beta * sq_dist(x, c))).collect();
        cfg.patch_posteriors_log(&loglik)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut avg = Vec::with_capacity(data.len());
    let mut patch_cols = vec![Vec::with_capacity(data.len()); k];
    for rows in per_point {
        let mut a = vec![0.0; cfg.outputs()];
        for r in &rows {
            for (o, v) in a.iter_mut().zip(r) {
                *o += v;
            }
        }
        avg.push(a.into_iter().map(|v| v / k as f64).collect());
        for (cols, r) in patch_cols.iter_mut().zip(rows) {
            cols.push(r);
        }
    }
    let patches = patch_cols
        .into_iter()
        .map(|c| Ok(SoftEncoder::new(TransitionMatrix::from_columns(c)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok((SoftEncoder::new(TransitionMatrix::from_columns(avg)?), patches))
}

fn bank_for(patches: &[SoftEncoder], vectors: &[Vec<f64>]) -> Result<FactorialEncoderBank> {
    FactorialEncoderBank::new(patches.iter().map(|e| BankModel { encoder: e.clone(), vectors: vectors.to_vec() }).collect())
}

/// Factorial bound over the `K` patch models with a shared codebook, reported
/// in the two-layer form: bound/(4σ²) + L(P¹, prior) + constant.
pub fn pmd_terms(
    posterior: &SoftEncoder,
    patches: &[SoftEncoder],
    code: &GaussianCodebook,
    data: &EmpiricalInput,
    prior: &ProbVector,
) -> Result<TwoLayerTerms> {
    let bound = factorial_dvq_bound(&bank_for(patches, code.vectors())?, data)?;
    let p1 = crate::vq::output_marginal(posterior, data)?;
    Ok(TwoLayerTerms {
        dvq: bound,
        distortion_term: bound / (4.0 * code.sigma() * code.sigma()),
        code_length_term: code_length(&p1, prior, Unit::Nats)?,
        constant_term: code.constant_nats(),
    })
}

/// M-step for `K ≥ 2`: the codebook minimising the factorial bound for fixed
/// patch posteriors. With `r = (1/K) Σ_k π_k` the bound per point is
/// `‖x − rᵀC‖² + (1/K) Σ_i r_i‖c_i‖² − (1/K²) Σ_k ‖π_kᵀC‖²`, so the normal
/// equations are `G C = Σ w r xᵀ` with
/// `G = Σ w [r rᵀ + diag(r)/K − (1/K²) Σ_k π_k π_kᵀ]`.
/// `G` can be singular (a lone-index patch only fixes a sum of codes); the
/// minimiser nearest the current codebook is taken. Dead codes are respawned
/// at the highest-bound data points.
fn factorial_codebook(
    posterior: &SoftEncoder,
    patches: &[SoftEncoder],
    data: &EmpiricalInput,
    current: &[Vec<f64>],
) -> Result<(Vec<Vec<f64>>, usize)> {
    let m = current.len();
    let d = data.dim();
    let kf = patches.len() as f64;
    let mut g = DMatrix::<f64>::zeros(m, m);
    let mut b = DMatrix::<f64>::zeros(m, d);
    for (n, (x, &w)) in data.points().iter().zip(data.weights()).enumerate() {
        let r = posterior.row(n);
        for i in 0..m {
            if r[i] == 0.0 {
                continue;
            }
            g[(i, i)] += w * r[i] / kf;
            for j in 0..m {
                g[(i, j)] += w * r[i] * r[j];
            }
            for (t, xt) in x.iter().enumerate() {
                b[(i, t)] += w * r[i] * xt;
            }
        }
        for p in patches {
            let pi = p.row(n);
            for i in (0..m).filter(|&i| pi[i] > 0.0) {
                for j in (0..m).filter(|&j| pi[j] > 0.0) {
                    g[(i, j)] -= w * pi[i] * pi[j] / (kf * kf);
                }
            }
        }
    }
    let mass: Vec<f64> = (0..m).map(|i| (0..data.len()).map(|n| data.weights()[n] * posterior.row(n)[i]).sum()).collect();
    let live: Vec<usize> = (0..m).filter(|&i| mass[i] > 0.0).collect();
    let mut out = current.to_vec();
    if !live.is_empty() {
        let l = live.len();
        let gl = DMatrix::from_fn(l, l, |a, c| g[(live[a], live[c])]);
        let cl = DMatrix::from_fn(l, d, |a, t| current[live[a]][t]);
        let rhs = DMatrix::from_fn(l, d, |a, t| b[(live[a], t)]) - &gl * &cl;
        let svd = gl.svd(true, true);
        let eps = 1e-12 * svd.singular_values.max();
        let delta = svd.solve(&rhs, eps).map_err(|e| Error::InvalidArgument(format!("codebook solve failed: {e}")))?;
        for (a, &i) in live.iter().enumerate() {
            for t in 0..d {
                out[i][t] = cl[(a, t)] + delta[(a, t)];
            }
        }
    }
    let dead: Vec<usize> = (0..m).filter(|&i| mass[i] <= 0.0).collect();
    if !dead.is_empty() {
        let parts_at = |n: usize| -> Vec<(Vec<f64>, f64)> { patches.iter().map(|p| posterior_mean(p.row(n), &out, d)).collect() };
        let mut contrib: Vec<(usize, f64)> = (0..data.len())
            .map(|n| (n, data.weights()[n] * factorial_point(&data.points()[n], &parts_at(n))))
            .collect();
        contrib.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for (&y, (n, _)) in dead.iter().zip(contrib.iter().cycle()) {
            out[y] = data.points()[*n].clone();
        }
    }
    Ok((out, dead.len()))
}

/// Alternating minimisation: PMD posteriors as the E-step, then the codebook
/// minimising the factorial bound. With `K = 1` the M-step is the plain
/// centroid step, so the run matches the soft quantiser's posterior mode with
/// a fixed prior. The output prior is never updated.
pub fn train_pmd_stage(data: &EmpiricalInput, cfg: &PmdTrainConfig, seed: u64) -> Result<PmdRun> {
    cfg.validate()?;
    let m = cfg.pmd.outputs();
    let init = match &cfg.initial_codebook {
        Some(v) => {
            if v.len() != m {
                return Err(Error::DimensionMismatch { what: "initial codebook", expected: m, got: v.len() });
            }
            v.clone()
        }
        None => sample_codebook(data, m, seed)?,
    };
    let mut code = GaussianCodebook::new(init, cfg.sigma0, cfg.volume)?;
    if code.dim() != data.dim() {
        return Err(Error::DimensionMismatch { what: "code vs data dimension", expected: data.dim(), got: code.dim() });
    }
    let (mut posterior, mut patches) = pmd_encode(data, &code, &cfg.pmd)?;
    let mut trace = Vec::with_capacity(cfg.iterations);
    let mut respawns = 0;
    for t in 0..cfg.iterations {
        code = code.with_sigma(cfg.sigma_at(t))?;
        (posterior, patches) = pmd_encode(data, &code, &cfg.pmd)?;
        let (vectors, r) = if patches.len() == 1 {
            centroids_with_respawn(&posterior, data, code.vectors())
        } else {
            factorial_codebook(&posterior, &patches, data, code.vectors())?
        };
        respawns += r;
        code = code.with_vectors(vectors)?;
        let terms = pmd_terms(&posterior, &patches, &code, data, cfg.pmd.prior())?;
        trace.push(TraceRow::from_terms(t, code.sigma(), &terms));
    }
    Ok(PmdRun { codebook: code, posterior, patches, trace, respawns })
}

/// For each patch model, the fraction of variance of its mean reconstruction
/// `Σ_i π_k(i|x) x'(i)` explained by grouping the data on each ground-truth
/// factor. `labels[n][f]` is the level of factor `f` at point `n`.
pub fn factor_alignment<L: AsRef<[usize]>>(
    patches: &[SoftEncoder],
    code: &GaussianCodebook,
    data: &EmpiricalInput,
    labels: &[L],
) -> Result<Vec<Vec<f64>>> {
    if labels.len() != data.len() {
        return Err(Error::DimensionMismatch { what: "labels vs data points", expected: data.len(), got: labels.len() });
    }
    let factors = labels.first().map(|l| l.as_ref().len()).unwrap_or(0);
    let d = code.dim();
    patches
        .iter()
        .map(|p| {
            if p.points() != data.len() || p.codes() != code.len() {
                return Err(Error::DimensionMismatch { what: "patch encoder shape", expected: data.len(), got: p.points() });
            }
            let recon: Vec<Vec<f64>> = (0..data.len()).map(|n| posterior_mean(p.row(n), code.vectors(), d).0).collect();
            let w = data.weights();
            let mut mean = vec![0.0; d];
            for (r, &wn) in recon.iter().zip(w) {
                for (m, v) in mean.iter_mut().zip(r) {
                    *m += wn * v;
                }
            }
            let total: f64 = recon.iter().zip(w).map(|(r, &wn)| wn * sq_dist(r, &mean)).sum();
            Ok((0..factors)
                .map(|f| {
                    let levels = labels.iter().map(|l| l.as_ref()[f]).max().map_or(0, |v| v + 1);
                    let mut gw = vec![0.0; levels];
                    let mut gs = vec![vec![0.0; d]; levels];
                    for ((r, &wn), l) in recon.iter().zip(w).zip(labels) {
                        let g = l.as_ref()[f];
                        gw[g] += wn;
                        for (s, v) in gs[g].iter_mut().zip(r) {
                            *s += wn * v;
                        }
                    }
                    let between: f64 = gw
                        .iter()
                        .zip(&gs)
                        .filter(|(&gw, _)| gw > 0.0)
                        .map(|(&gw, s)| {
                            let gm: Vec<f64> = s.iter().map(|v| v / gw).collect();
                            gw * sq_dist(&gm, &mean)
                        })
                        .sum();
                    if total > 0.0 { between / total } else { 0.0 }
                })
                .collect())
        })
        .collect()
}
