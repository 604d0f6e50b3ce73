//! Seeded synthetic sources and datasets.
//!
//! All randomness flows from a single [`ChaCha8Rng`] seeded with a `u64`, so
//! every generator is reproducible across platforms.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
pub use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::ace::{TreeSource, TreeTopology};
use crate::chain::{cell_count, LayeredChain, DEFAULT_CELL_CAP};
use crate::error::{Error, Result};
use crate::prob::{ProbVector, TransitionMatrix};
use crate::vq::EmpiricalInput;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Flat-Dirichlet draw; every entry strictly positive.
pub fn random_prob(rng: &mut impl Rng, m: usize) -> ProbVector {
    let w: Vec<f64> = (0..m).map(|_| -(1.0 - rng.random::<f64>()).ln() + 1e-3).collect();
    ProbVector::renormalize(w).expect("positive weights")
}

pub fn random_transition(rng: &mut impl Rng, rows: usize, cols: usize) -> TransitionMatrix {
    let columns = (0..cols).map(|_| random_prob(rng, rows).into_inner()).collect();
    TransitionMatrix::from_columns(columns).expect("random columns are normalized")
}

/// Random source and an independent random (imperfect) model.
pub fn random_chain(rng: &mut impl Rng, sizes: &[usize]) -> LayeredChain {
    let prior = random_prob(rng, sizes[0]);
    let forward = sizes.windows(2).map(|w| random_transition(rng, w[1], w[0])).collect();
    let backward = sizes.windows(2).map(|w| random_transition(rng, w[0], w[1])).collect();
    let top = random_prob(rng, *sizes.last().expect("non-empty sizes"));
    LayeredChain::new(prior, forward, backward, top).expect("shapes follow sizes")
}

/// Random surjective map `0..from -> 0..to` (requires `from >= to`).
pub fn random_surjection(rng: &mut impl Rng, from: usize, to: usize) -> Vec<usize> {
    assert!(from >= to && to > 0, "surjection needs from >= to > 0");
    let mut map: Vec<usize> = (0..to).collect();
    map.extend((to..from).map(|_| rng.random_range(0..to)));
    map.shuffle(rng);
    map
}

/// Deterministic source chain (surjective maps, so every marginal is
/// positive) paired with its perfect model.
pub fn random_deterministic_chain(rng: &mut impl Rng, sizes: &[usize]) -> Result<LayeredChain> {
    if sizes.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidArgument("deterministic chains need non-increasing layer sizes".into()));
    }
    let prior = random_prob(rng, sizes[0]);
    let forward = sizes
        .windows(2)
        .map(|w| TransitionMatrix::deterministic(&random_surjection(rng, w[0], w[1]), w[1]))
        .collect::<Result<Vec<_>>>()?;
    LayeredChain::with_perfect_model(prior, forward)
}

/// `n` points uniform on the axis-aligned box `[lo, hi]^dim`, uniform weights.
pub fn uniform_box(rng: &mut impl Rng, n: usize, dim: usize, lo: f64, hi: f64) -> Result<EmpiricalInput> {
    let points = (0..n)
        .map(|_| (0..dim).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect())
        .collect();
    EmpiricalInput::uniform(points)
}

/// Isotropic Gaussian mixture with equal component weights. Returns the data
/// and the component label of every point.
pub fn gaussian_mixture(
    rng: &mut impl Rng,
    n: usize,
    centers: &[Vec<f64>],
    width: f64,
) -> Result<(EmpiricalInput, Vec<usize>)> {
    if centers.is_empty() {
        return Err(Error::InvalidArgument("mixture needs at least one center".into()));
    }
    let mut labels = Vec::with_capacity(n);
    let points = (0..n)
        .map(|_| {
            let k = rng.random_range(0..centers.len());
            labels.push(k);
            centers[k].iter().map(|&c| c + width * standard_normal(rng)).collect()
        })
        .collect();
    Ok((EmpiricalInput::uniform(points)?, labels))
}

/// Two independent factors on orthogonal axes: `x = (a + noise, b + noise)`
/// with `a, b` uniform over `levels`. Returns data and the `(a, b)` level
/// indices of every point.
pub fn two_factors(
    rng: &mut impl Rng,
    n: usize,
    levels: &[f64],
    noise: f64,
) -> Result<(EmpiricalInput, Vec<[usize; 2]>)> {
    if levels.is_empty() {
        return Err(Error::InvalidArgument("factor levels must be non-empty".into()));
    }
    let mut labels = Vec::with_capacity(n);
    let points = (0..n)
        .map(|_| {
            let a = rng.random_range(0..levels.len());
            let b = rng.random_range(0..levels.len());
            labels.push([a, b]);
            vec![
                levels[a] + noise * standard_normal(rng),
                levels[b] + noise * standard_normal(rng),
            ]
        })
        .collect();
    Ok((EmpiricalInput::uniform(points)?, labels))
}

/// Random deterministic tree source. Every layer groups consecutive nodes in
/// pairs (a trailing odd node forms its own cluster) and maps each cluster
/// surjectively onto a parent alphabet of size `2..=max_alphabet` (capped by
/// the cluster's state count). The layer-0 joint is a flat-Dirichlet draw over
/// `nodes` nodes of size `alphabet`; top nodes are paired the same way.
pub fn random_tree(
    rng: &mut impl Rng,
    nodes: usize,
    alphabet: usize,
    depth: usize,
    max_alphabet: usize,
) -> Result<TreeSource> {
    if nodes == 0 || alphabet == 0 || depth == 0 || max_alphabet < 2 {
        return Err(Error::InvalidArgument("tree needs nodes, alphabet, depth >= 1 and max_alphabet >= 2".into()));
    }
    let pairs = |n: usize| -> Vec<Vec<usize>> { (0..n).step_by(2).map(|i| (i..(i + 2).min(n)).collect()).collect() };
    let mut alphabets = vec![vec![alphabet; nodes]];
    let mut clusters = Vec::with_capacity(depth + 1);
    let mut maps = Vec::with_capacity(depth);
    for l in 0..depth {
        let cl = pairs(alphabets[l].len());
        let mut parent = Vec::with_capacity(cl.len());
        let mut layer_maps = Vec::with_capacity(cl.len());
        for members in &cl {
            let states: usize = members.iter().map(|&m| alphabets[l][m]).product();
            let hi = max_alphabet.min(states);
            let a = if hi <= 2 { hi } else { rng.random_range(2..=hi) };
            layer_maps.push(random_surjection(rng, states, a));
            parent.push(a);
        }
        clusters.push(cl);
        maps.push(layer_maps);
        alphabets.push(parent);
    }
    clusters.push(pairs(alphabets[depth].len()));
    let cells = cell_count(&alphabets[0], DEFAULT_CELL_CAP)?;
    let joint = random_prob(rng, cells).into_inner();
    TreeSource::new(TreeTopology::new(alphabets, clusters)?, joint, maps)
}

fn standard_normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}
