//! Probability leakage and topographic maps.
//!
//! A third layer `z` above the code layer `y` induces the leakage matrix
//! `Pr(y'|y) = Σ_z Pr(y'|z) Pr(z|y)`. Routing the encoder through it gives
//! the leaked distortion, whose minimisation behaves like a batch Kohonen map.

use serde::{Deserialize, Serialize};

use crate::chain::LayeredChain;
use crate::error::{Error, Result};
use crate::par::{map_indexed, ordered_sum};
use crate::prob::{bayes_reverse, code_length, push_forward, ProbVector, TransitionMatrix, Unit};
use crate::vq::{
    argmin, centroids_with_respawn, dvq, output_marginal, sample_codebook, sq_dist, EmpiricalInput, GaussianCodebook,
    SoftEncoder, TraceRow, TwoLayerTerms,
};

/// Leakage matrix stored together with the factorisation that generates it.
#[derive(Debug, Clone, PartialEq)]
pub struct LeakageMatrix {
    z_given_y: TransitionMatrix,
    y_given_z: TransitionMatrix,
    leak: TransitionMatrix,
}

impl LeakageMatrix {
    pub fn identity(m: usize) -> Result<Self> {
        compose_leakage(TransitionMatrix::identity(m)?, TransitionMatrix::identity(m)?)
    }

    /// `Pr(y'|y)`, `M₁ × M₁`.
    pub fn matrix(&self) -> &TransitionMatrix {
        &self.leak
    }

    pub fn z_given_y(&self) -> &TransitionMatrix {
        &self.z_given_y
    }

    pub fn y_given_z(&self) -> &TransitionMatrix {
        &self.y_given_z
    }

    pub fn codes(&self) -> usize {
        self.leak.rows()
    }

    pub fn parents(&self) -> usize {
        self.z_given_y.rows()
    }
}

/// `Pr(y'|y) = Σ_z Pr(y'|z) Pr(z|y)`.
pub fn compose_leakage(z_given_y: TransitionMatrix, y_given_z: TransitionMatrix) -> Result<LeakageMatrix> {
    if z_given_y.cols() != y_given_z.rows() {
        return Err(Error::DimensionMismatch { what: "Pr(z|y) columns vs Pr(y'|z) rows", expected: y_given_z.rows(), got: z_given_y.cols() });
    }
    let leak = y_given_z.compose(&z_given_y)?;
    Ok(LeakageMatrix { z_given_y, y_given_z, leak })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Chain,
    Ring,
    Grid,
}

/// Neighbourhood factorisation: each code `y` sits under parent block
/// `b(y)`; `Pr(z|y)` is the kernel centred on `b(y)` and `Pr(y'|z)` is
/// uniform over the children of `z`. For the grid the code and parent counts
/// must be perfect squares and the kernel is applied separably.
///
/// In JSON the kernel is either given as `kernel` or generated from
/// `gaussian_width` (see [`LeakSpec::gaussian`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LeakSpecDoc")]
pub struct LeakSpec {
    pub topology: Topology,
    pub parents: usize,
    /// Weights `w₋ᵣ..wᵣ`; odd length, non-negative, not all zero.
    pub kernel: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LeakSpecDoc {
    topology: Topology,
    parents: usize,
    #[serde(default)]
    kernel: Option<Vec<f64>>,
    #[serde(default)]
    gaussian_width: Option<f64>,
}

impl TryFrom<LeakSpecDoc> for LeakSpec {
    type Error = Error;
    fn try_from(d: LeakSpecDoc) -> Result<Self> {
        match (d.kernel, d.gaussian_width) {
            (Some(kernel), None) => Ok(Self { topology: d.topology, parents: d.parents, kernel }),
            (None, Some(w)) if w > 0.0 && w.is_finite() => Ok(Self::gaussian(d.topology, d.parents, w)),
            (None, Some(w)) => Err(Error::InvalidArgument(format!("gaussian_width must be positive, got {w}"))),
            _ => Err(Error::InvalidArgument("give exactly one of `kernel` or `gaussian_width`".into())),
        }
    }
}

fn block(y: usize, codes: usize, parents: usize) -> usize {
    y * parents / codes
}

fn square_side(n: usize, what: &str) -> Result<usize> {
    let s = (n as f64).sqrt().round() as usize;
    if s * s != n {
        return Err(Error::InvalidArgument(format!("grid {what} count {n} is not a perfect square")));
    }
    Ok(s)
}

/// Kernel weights over parents `0..parents` centred at `centre` (1-D).
fn kernel_row(kernel: &[f64], centre: usize, parents: usize, wrap: bool) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let mut row = vec![0.0; parents];
    for (k, &w) in kernel.iter().enumerate() {
        let z = centre as isize + k as isize - r;
        if wrap {
            row[z.rem_euclid(parents as isize) as usize] += w;
        } else if (0..parents as isize).contains(&z) {
            row[z as usize] += w;
        }
    }
    row
}

fn children_uniform(map: &[usize], parents: usize) -> Result<TransitionMatrix> {
    let codes = map.len();
    let mut cols = vec![vec![0.0; codes]; parents];
    for (y, &z) in map.iter().enumerate() {
        cols[z][y] = 1.0;
    }
    TransitionMatrix::renormalize_columns(cols)
}

impl LeakSpec {
    pub fn build(&self, codes: usize) -> Result<LeakageMatrix> {
        if self.kernel.len() % 2 == 0 {
            return Err(Error::InvalidArgument("kernel length must be odd".into()));
        }
        if let Some((i, &v)) = self.kernel.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidEntry { index: i, value: v });
        }
        if self.parents == 0 || codes == 0 {
            return Err(Error::EmptyAlphabet);
        }
        if self.parents > codes {
            return Err(Error::InvalidArgument(format!("{} parents exceed {codes} codes", self.parents)));
        }
        let (map, z_cols): (Vec<usize>, Vec<Vec<f64>>) = match self.topology {
            Topology::Chain | Topology::Ring => {
                let wrap = self.topology == Topology::Ring;
                let map: Vec<usize> = (0..codes).map(|y| block(y, codes, self.parents)).collect();
                let cols = map.iter().map(|&b| kernel_row(&self.kernel, b, self.parents, wrap)).collect();
                (map, cols)
            }
            Topology::Grid => {
                let side = square_side(codes, "code")?;
                let pside = square_side(self.parents, "parent")?;
                let mut map = Vec::with_capacity(codes);
                let mut cols = Vec::with_capacity(codes);
                for y in 0..codes {
                    let (r, c) = (block(y / side, side, pside), block(y % side, side, pside));
                    map.push(r * pside + c);
                    let kr = kernel_row(&self.kernel, r, pside, false);
                    let kc = kernel_row(&self.kernel, c, pside, false);
                    cols.push(kr.iter().flat_map(|a| kc.iter().map(move |b| a * b)).collect());
                }
                (map, cols)
            }
        };
        let z_given_y = TransitionMatrix::renormalize_columns(z_cols)?;
        compose_leakage(z_given_y, children_uniform(&map, self.parents)?)
    }
}

/// Encoder composed with the leakage: `Pr(y'|x) = Σ_y Pr(y'|y) Pr(y|x)`.
pub fn leak_encoder(enc: &SoftEncoder, leak: &LeakageMatrix) -> Result<SoftEncoder> {
    Ok(SoftEncoder::new(leak.leak.compose(enc.matrix())?))
}

pub fn leaked_dvq(enc: &SoftEncoder, code: &GaussianCodebook, data: &EmpiricalInput, leak: &LeakageMatrix) -> Result<f64> {
    dvq(&leak_encoder(enc, leak)?, code, data)
}

/// Objective of the three-layer map with the leaked distortion, in nats:
/// `leaked D_VQ/(4σ²) + L(P², q) − log(V/(√(2π)σ)^d)` with `P²` the parent
/// marginal and `q` the parent prior.
pub fn topo_terms(
    enc: &SoftEncoder,
    code: &GaussianCodebook,
    data: &EmpiricalInput,
    leak: &LeakageMatrix,
    q: &ProbVector,
) -> Result<TwoLayerTerms> {
    let d = leaked_dvq(enc, code, data, leak)?;
    let p2 = push_forward(&leak.z_given_y, &output_marginal(enc, data)?)?;
    Ok(TwoLayerTerms {
        dvq: d,
        distortion_term: d / (4.0 * code.sigma() * code.sigma()),
        code_length_term: code_length(&p2, q, Unit::Nats)?,
        constant_term: code.constant_nats(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopoConfig {
    pub codes: usize,
    /// `None` means identity leakage.
    #[serde(default)]
    pub leak: Option<LeakSpec>,
    /// Leakage phases run before the main one, typically with wider kernels
    /// to unfold the map. Each phase is a fixed leakage.
    #[serde(default)]
    pub warmup: Vec<WarmupPhase>,
    pub sigma0: f64,
    #[serde(default = "one")]
    pub sigma_ratio: f64,
    pub iterations: usize,
    #[serde(default = "one")]
    pub volume: f64,
    #[serde(default)]
    pub initial_codebook: Option<Vec<Vec<f64>>>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WarmupPhase {
    pub leak: LeakSpec,
    pub iterations: usize,
}

impl LeakSpec {
    /// Sampled Gaussian kernel of standard deviation `width` (in parent
    /// steps), truncated at `3·width`.
    pub fn gaussian(topology: Topology, parents: usize, width: f64) -> Self {
        let r = (3.0 * width).ceil() as isize;
        let kernel = (-r..=r).map(|k| (-(k * k) as f64 / (2.0 * width * width)).exp()).collect();
        Self { topology, parents, kernel }
    }
}

/// Trace row tagged with the leakage phase (warmup phases first, the main
/// leakage last).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TopoTraceRow {
    pub phase: usize,
    #[serde(flatten)]
    pub row: TraceRow,
}

/// Non-increasing within `tol` wherever phase and `σ` are unchanged.
pub fn topo_trace_is_monotone(trace: &[TopoTraceRow], tol: f64) -> bool {
    trace
        .windows(2)
        .filter(|w| w[0].phase == w[1].phase && w[0].row.sigma == w[1].row.sigma)
        .all(|w| w[1].row.total <= w[0].row.total + tol)
}

/// Diagnostics for 1-D order along the code index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderingMetrics {
    /// Adjacent pairs breaking the dominant direction of the first coordinate.
    pub inversions: usize,
    /// Path length along the index divided by the path length after sorting.
    pub path_length_ratio: f64,
}

pub fn ordering_metrics(vectors: &[Vec<f64>]) -> OrderingMetrics {
    let first: Vec<f64> = vectors.iter().map(|v| v[0]).collect();
    let up = first.windows(2).filter(|w| w[1] < w[0]).count();
    let down = first.windows(2).filter(|w| w[1] > w[0]).count();
    let path = |vs: &[&Vec<f64>]| vs.windows(2).map(|w| sq_dist(w[0], w[1]).sqrt()).sum::<f64>();
    let mut sorted: Vec<&Vec<f64>> = vectors.iter().collect();
    let raw = path(&sorted);
    sorted.sort_by(|a, b| a.iter().zip(b.iter()).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    let best = path(&sorted);
    OrderingMetrics {
        inversions: up.min(down),
        path_length_ratio: if best > 0.0 { raw / best } else { 1.0 },
    }
}

#[derive(Debug, Clone)]
pub struct TopoRun {
    pub encoder: SoftEncoder,
    pub codebook: GaussianCodebook,
    pub leakage: LeakageMatrix,
    pub trace: Vec<TopoTraceRow>,
    pub ordering: OrderingMetrics,
    pub respawns: usize,
}

/// Alternating minimisation of the leaked objective. The encoder step is the
/// exact winner-take-all on the leaked score
/// `Σ_y' Pr(y'|y)‖x − x'(y')‖²/(2σ²) − Σ_z Pr(z|y) log q(z)`; the codebook
/// step takes centroids of the leaked responsibilities. The parent prior is
/// uniform. Warmup phases run first with their own leakage; `σ` follows one
/// geometric schedule across all phases.
pub fn train_topo_map(data: &EmpiricalInput, cfg: &TopoConfig, seed: u64) -> Result<TopoRun> {
    if cfg.codes == 0 {
        return Err(Error::EmptyAlphabet);
    }
    if cfg.iterations == 0 {
        return Err(Error::InvalidArgument("iterations must be at least 1".into()));
    }
    if !(cfg.sigma_ratio > 0.0 && cfg.sigma_ratio <= 1.0) {
        return Err(Error::InvalidArgument(format!("sigma_ratio must be in (0, 1], got {}", cfg.sigma_ratio)));
    }
    let leak = match &cfg.leak {
        Some(spec) => spec.build(cfg.codes)?,
        None => LeakageMatrix::identity(cfg.codes)?,
    };
    let mut phases = cfg
        .warmup
        .iter()
        .map(|w| Ok((w.leak.build(cfg.codes)?, w.iterations)))
        .collect::<Result<Vec<_>>>()?;
    phases.push((leak.clone(), cfg.iterations));
    let init = match &cfg.initial_codebook {
        Some(v) if v.len() != cfg.codes => {
            return Err(Error::DimensionMismatch { what: "initial codebook", expected: cfg.codes, got: v.len() })
        }
        Some(v) => v.clone(),
        None => sample_codebook(data, cfg.codes, seed)?,
    };
    let mut code = GaussianCodebook::new(init, cfg.sigma0, cfg.volume)?;
    if code.dim() != data.dim() {
        return Err(Error::DimensionMismatch { what: "code vs data dimension", expected: data.dim(), got: code.dim() });
    }
    let mut trace = Vec::new();
    let mut respawns = 0;
    let mut enc = SoftEncoder::uniform(cfg.codes, data.len())?;
    let mut t = 0;
    for (phase, (leak, iterations)) in phases.iter().enumerate() {
        let q = ProbVector::uniform(leak.parents())?;
        let log_q: Vec<f64> = q.as_slice().iter().map(|v| v.ln()).collect();
        // −Σ_z Pr(z|y) log q(z), fixed within the phase.
        let prior_cost: Vec<f64> = (0..cfg.codes)
            .map(|y| -leak.z_given_y.column(y).iter().zip(&log_q).filter(|(p, _)| **p > 0.0).map(|(p, l)| p * l).sum::<f64>())
            .collect();
        for _ in 0..*iterations {
            let sigma = cfg.sigma0 * cfg.sigma_ratio.powi(t as i32);
            code = code.with_sigma(sigma)?;
            let beta = 1.0 / (2.0 * sigma * sigma);
            let assign = map_indexed(data.len(), |n| {
                let x = &data.points()[n];
                let dist: Vec<f64> = code.vectors().iter().map(|c| sq_dist(x, c)).collect();
                argmin((0..cfg.codes).map(|y| {
                    let leaked: f64 =
                        leak.leak.column(y).iter().zip(&dist).filter(|(p, _)| **p > 0.0).map(|(p, d)| p * d).sum();
                    beta * leaked + prior_cost[y]
                }))
            });
            enc = SoftEncoder::hard(&assign, cfg.codes)?;
            let (vectors, r) = centroids_with_respawn(&leak_encoder(&enc, leak)?, data, code.vectors());
            respawns += r;
            code = code.with_vectors(vectors)?;
            let terms = topo_terms(&enc, &code, data, leak, &q)?;
            trace.push(TopoTraceRow { phase, row: TraceRow::from_terms(t, sigma, &terms) });
            t += 1;
        }
    }
    let ordering = ordering_metrics(code.vectors());
    Ok(TopoRun { encoder: enc, codebook: code, leakage: leak, trace, ordering, respawns })
}

/// Values of the equivalent distortion forms for a discrete three-layer
/// instance whose layer-0 states sit at `points`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SkipIdentityReport {
    /// `2 Σ P⁰ Σ_z Pr(z|x)‖x − x'(z)‖²` at optimal `x'(z)`.
    pub layer02_centroid: f64,
    /// `Σ P⁰ Σ_z Pr(z|x) Σ_x' Pr(x'|z)‖x − x'‖²`.
    pub layer02_two_sided: f64,
    /// Same with dummy sums over `y`, `y'`.
    pub dummy_layer1: f64,
    /// `Σ P⁰ Σ_y' Pr(y'|x) Σ_x' Pr(x'|y')‖x − x'‖²` with leaked `Pr(y'|x)`.
    pub layer01_leaked: f64,
    /// `2 Σ P⁰ Σ_y' Pr(y'|x)‖x − x'(y')‖²` at the leaked centroids. This
    /// replacement has the same minimisers but not the same value, so it is
    /// reported without being checked.
    pub layer01_leaked_centroid: f64,
    pub max_abs_diff: f64,
    pub agrees: bool,
}

fn centroid_dvq(enc: &TransitionMatrix, points: &[Vec<f64>], prior: &ProbVector) -> Result<f64> {
    let data = EmpiricalInput::new(points.to_vec(), prior.as_slice().to_vec())?;
    let enc = SoftEncoder::new(enc.clone());
    let (vectors, _) = centroids_with_respawn(&enc, &data, &vec![vec![0.0; data.dim()]; enc.codes()]);
    dvq(&enc, &GaussianCodebook::new(vectors, 1.0, 1.0)?, &data)
}

/// `Σ_x P(x) Σ_u A(u|x) Σ_x' B(x'|u) ‖x − x'‖²`.
fn two_sided(a: &TransitionMatrix, b: &TransitionMatrix, points: &[Vec<f64>], prior: &ProbVector) -> f64 {
    ordered_sum(points.len(), |i| {
        let x = &points[i];
        let s: f64 = (0..a.rows())
            .map(|u| a.get(u, i) * (0..points.len()).map(|j| b.get(j, u) * sq_dist(x, &points[j])).sum::<f64>())
            .sum();
        prior[i] * s
    })
}

/// Checks that the layer-0/2 distortion equals the leaked layer-0/1 form.
/// `chain` supplies `P⁰`, `Pr(y|x)` and `Pr(z|y)`; `Pr(y'|z)` and the
/// reconstruction kernels are the Bayes reversals under the source.
pub fn skip_identity_check(points: &[Vec<f64>], chain: &LayeredChain, tol: f64) -> Result<SkipIdentityReport> {
    if chain.depth() != 2 {
        return Err(Error::InvalidArgument(format!("skip identity needs 3 layers, got {}", chain.depth() + 1)));
    }
    let p0 = chain.source_prior();
    if points.len() != p0.len() {
        return Err(Error::DimensionMismatch { what: "points vs layer-0 states", expected: p0.len(), got: points.len() });
    }
    let y_x = &chain.source_forward()[0];
    let z_y = &chain.source_forward()[1];
    let z_x = z_y.compose(y_x)?;
    let (x_y, p1) = bayes_reverse(y_x, p0)?;
    let (x_z, _) = bayes_reverse(&z_x, p0)?;
    let (yp_z, _) = bayes_reverse(z_y, &p1)?;
    let leak = compose_leakage(z_y.clone(), yp_z)?;
    let yp_x = leak.leak.compose(y_x)?;

    let layer02_centroid = centroid_dvq(&z_x, points, p0)?;
    let layer02_two_sided = two_sided(&z_x, &x_z, points, p0);
    let dummy_layer1 = ordered_sum(points.len(), |i| {
        let x = &points[i];
        let mut acc = 0.0;
        for y in 0..y_x.rows() {
            for z in 0..z_y.rows() {
                for yp in 0..y_x.rows() {
                    let w = y_x.get(y, i) * z_y.get(z, y) * leak.y_given_z.get(yp, z);
                    if w != 0.0 {
                        acc += w * (0..points.len()).map(|j| x_y.get(j, yp) * sq_dist(x, &points[j])).sum::<f64>();
                    }
                }
            }
        }
        p0[i] * acc
    });
    let layer01_leaked = two_sided(&yp_x, &x_y, points, p0);
    let layer01_leaked_centroid = centroid_dvq(&yp_x, points, p0)?;

    let max_abs_diff = [layer02_two_sided, dummy_layer1, layer01_leaked]
        .iter()
        .map(|v| (v - layer02_centroid).abs())
        .fold(0.0, f64::max);
    Ok(SkipIdentityReport {
        layer02_centroid,
        layer02_two_sided,
        dummy_layer1,
        layer01_leaked,
        layer01_leaked_centroid,
        max_abs_diff,
        agrees: max_abs_diff <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{random_chain, rng};
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_factors_give_identity() {
        let l = LeakageMatrix::identity(3).unwrap();
        assert_eq!(l.matrix(), &TransitionMatrix::identity(3).unwrap());
    }

    #[test]
    fn single_parent_uniform_leak() {
        let z = TransitionMatrix::deterministic(&[0, 0, 0], 1).unwrap();
        let y = TransitionMatrix::from_columns(vec![vec![1.0 / 3.0; 3]]).unwrap();
        let l = compose_leakage(z, y).unwrap();
        for c in l.matrix().columns() {
            for v in c {
                assert_abs_diff_eq!(*v, 1.0 / 3.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn ring_blocks_of_two() {
        let spec = LeakSpec { topology: Topology::Ring, parents: 2, kernel: vec![1.0] };
        let l = spec.build(4).unwrap();
        let expect = [[0.5, 0.5, 0.0, 0.0], [0.5, 0.5, 0.0, 0.0], [0.0, 0.0, 0.5, 0.5], [0.0, 0.0, 0.5, 0.5]];
        for (r, row) in expect.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                assert_abs_diff_eq!(l.matrix().get(r, c), *v, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn chain_kernel_truncates_at_edges() {
        let spec = LeakSpec { topology: Topology::Chain, parents: 4, kernel: vec![0.25, 0.5, 0.25] };
        let l = spec.build(4).unwrap();
        assert_abs_diff_eq!(l.matrix().get(0, 0), 0.5 / 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(l.matrix().get(1, 0), 0.25 / 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(l.matrix().get(1, 1), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn grid_is_column_stochastic() {
        let spec = LeakSpec { topology: Topology::Grid, parents: 4, kernel: vec![0.2, 0.6, 0.2] };
        let l = spec.build(16).unwrap();
        for c in l.matrix().columns() {
            assert_abs_diff_eq!(c.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
        assert!(LeakSpec { topology: Topology::Grid, parents: 4, kernel: vec![1.0] }.build(12).is_err());
    }

    #[test]
    fn ordering_of_sorted_codebook() {
        let v: Vec<Vec<f64>> = [0.0, 1.0, 2.0, 3.0].iter().map(|&x| vec![x]).collect();
        assert_eq!(ordering_metrics(&v), OrderingMetrics { inversions: 0, path_length_ratio: 1.0 });
        let v: Vec<Vec<f64>> = [0.0, 2.0, 1.0, 3.0].iter().map(|&x| vec![x]).collect();
        let m = ordering_metrics(&v);
        assert_eq!(m.inversions, 1);
        assert_abs_diff_eq!(m.path_length_ratio, 5.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn skip_identity_on_random_instance() {
        let mut r = rng(5);
        let c = random_chain(&mut r, &[4, 3, 2]);
        let points: Vec<Vec<f64>> = vec![vec![0.0, 0.1], vec![1.0, -0.5], vec![0.3, 2.0], vec![-1.0, 0.4]];
        let rep = skip_identity_check(&points, &c, 1e-9).unwrap();
        assert!(rep.agrees, "{rep:?}");
    }

    #[test]
    fn leak_spec_json_forms() {
        let a: LeakSpec = serde_json::from_str(r#"{"topology":"chain","parents":4,"kernel":[0.25,0.5,0.25]}"#).unwrap();
        assert_eq!(a.kernel, [0.25, 0.5, 0.25]);
        let g: LeakSpec = serde_json::from_str(r#"{"topology":"ring","parents":4,"gaussian_width":1.0}"#).unwrap();
        assert_eq!(g, LeakSpec::gaussian(Topology::Ring, 4, 1.0));
        assert!(serde_json::from_str::<LeakSpec>(r#"{"topology":"chain","parents":4}"#).is_err());
        assert!(serde_json::from_str::<LeakSpec>(r#"{"topology":"chain","parents":4,"kernel":[1],"width":2}"#).is_err());
    }
}
