//! Adaptive cluster expansion: tree-structured deterministic sources with a
//! perfect tree-structured model, and the Gaussian hierarchical VQ.
//!
//! Each layer's nodes are partitioned into clusters of siblings; cluster `c`
//! of layer `l` is mapped deterministically onto node `c` of layer `l + 1`.
//! Top-layer nodes are also grouped into clusters, which define the factorial
//! top model. Cluster states are packed mixed-radix over the member nodes in
//! ascending node order, last member fastest.

use serde::{Deserialize, Serialize};

use crate::chain::{cell_count, objective_reversed, LayeredChain, JointTable, DEFAULT_CELL_CAP};
use crate::error::{Error, Result};
use crate::par::map_indexed;
use crate::prob::{code_length, cross_entropy_nats, entropy, entropy_nats, ProbVector, TransitionMatrix, Unit};
use crate::vq::{dvq, EmpiricalInput, GaussianCodebook, SoftEncoder};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeTopology {
    /// `alphabets[l][node]`: alphabet size of every node of every layer.
    alphabets: Vec<Vec<usize>>,
    /// `clusters[l][c]`: ascending member nodes of cluster `c` in layer `l`.
    clusters: Vec<Vec<Vec<usize>>>,
}

impl TreeTopology {
    pub fn new(alphabets: Vec<Vec<usize>>, clusters: Vec<Vec<Vec<usize>>>) -> Result<Self> {
        if alphabets.len() < 2 {
            return Err(Error::InvalidArgument("a tree needs at least two layers".into()));
        }
        if clusters.len() != alphabets.len() {
            return Err(Error::DimensionMismatch { what: "cluster layers", expected: alphabets.len(), got: clusters.len() });
        }
        for (l, (nodes, cl)) in alphabets.iter().zip(&clusters).enumerate() {
            if nodes.is_empty() || nodes.contains(&0) {
                return Err(Error::EmptyAlphabet);
            }
            let mut seen = vec![false; nodes.len()];
            for members in cl {
                if members.is_empty() || members.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidArgument(format!("layer {l}: cluster members must be non-empty and ascending")));
                }
                for &m in members {
                    if m >= nodes.len() || seen[m] {
                        return Err(Error::InvalidArgument(format!("layer {l}: clusters do not partition the nodes")));
                    }
                    seen[m] = true;
                }
            }
            if seen.contains(&false) {
                return Err(Error::InvalidArgument(format!("layer {l}: clusters do not partition the nodes")));
            }
            if l + 1 < alphabets.len() && cl.len() != alphabets[l + 1].len() {
                return Err(Error::DimensionMismatch { what: "clusters vs parent nodes", expected: alphabets[l + 1].len(), got: cl.len() });
            }
        }
        Ok(Self { alphabets, clusters })
    }

    /// Number of layers minus one.
    pub fn depth(&self) -> usize {
        self.alphabets.len() - 1
    }

    pub fn alphabets(&self) -> &[Vec<usize>] {
        &self.alphabets
    }

    pub fn clusters(&self) -> &[Vec<Vec<usize>>] {
        &self.clusters
    }

    /// Number of joint states of cluster `c` in layer `l`.
    pub fn cluster_states(&self, l: usize, c: usize) -> usize {
        self.clusters[l][c].iter().map(|&m| self.alphabets[l][m]).product()
    }

    fn cluster_index(&self, l: usize, c: usize, states: &[usize]) -> usize {
        self.clusters[l][c].iter().fold(0, |acc, &m| acc * self.alphabets[l][m] + states[m])
    }
}

/// Deterministic tree-structured source.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeSource {
    topology: TreeTopology,
    layer0: JointTable,
    /// `maps[l][c][cluster state]` = parent node state.
    maps: Vec<Vec<Vec<usize>>>,
}

impl TreeSource {
    pub fn new(topology: TreeTopology, layer0: Vec<f64>, maps: Vec<Vec<Vec<usize>>>) -> Result<Self> {
        let layer0 = JointTable::new(topology.alphabets[0].clone(), layer0, DEFAULT_CELL_CAP)?;
        if maps.len() != topology.depth() {
            return Err(Error::DimensionMismatch { what: "map layers", expected: topology.depth(), got: maps.len() });
        }
        for (l, layer) in maps.iter().enumerate() {
            if layer.len() != topology.clusters[l].len() {
                return Err(Error::DimensionMismatch { what: "maps per layer", expected: topology.clusters[l].len(), got: layer.len() });
            }
            for (c, table) in layer.iter().enumerate() {
                let states = topology.cluster_states(l, c);
                if table.len() != states {
                    return Err(Error::DimensionMismatch { what: "map table size", expected: states, got: table.len() });
                }
                let parent = topology.alphabets[l + 1][c];
                if let Some(&bad) = table.iter().find(|&&t| t >= parent) {
                    return Err(Error::InvalidArgument(format!("layer {l} cluster {c}: map value {bad} outside parent alphabet {parent}")));
                }
            }
        }
        Ok(Self { topology, layer0, maps })
    }

    pub fn topology(&self) -> &TreeTopology {
        &self.topology
    }

    pub fn layer0(&self) -> &JointTable {
        &self.layer0
    }

    pub fn maps(&self) -> &[Vec<Vec<usize>>] {
        &self.maps
    }

    pub fn with_maps(&self, maps: Vec<Vec<Vec<usize>>>) -> Result<Self> {
        Self::new(self.topology.clone(), self.layer0.values().to_vec(), maps)
    }

    fn parent_states(&self, l: usize, states: &[usize]) -> Vec<usize> {
        (0..self.topology.clusters[l].len())
            .map(|c| self.maps[l][c][self.topology.cluster_index(l, c, states)])
            .collect()
    }

    /// Exact joint over the nodes of every layer.
    pub fn layer_joints(&self, cap: usize) -> Result<Vec<JointTable>> {
        let mut out = vec![self.layer0.clone()];
        for l in 0..self.topology.depth() {
            let dims = self.topology.alphabets[l + 1].clone();
            let cells = cell_count(&dims, cap)?;
            let below = &out[l];
            let mut values = vec![0.0; cells];
            for (idx, &v) in below.values().iter().enumerate() {
                if v > 0.0 {
                    let parents = self.parent_states(l, &below.states_of(idx));
                    values[mixed_index(&dims, &parents)] += v;
                }
            }
            out.push(JointTable::new(dims, values, cap)?);
        }
        Ok(out)
    }
}

fn mixed_index(dims: &[usize], states: &[usize]) -> usize {
    states.iter().zip(dims).fold(0, |acc, (&s, &d)| acc * d + s)
}

fn uniform_cells(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeSourceDoc {
    pub alphabets: Vec<Vec<usize>>,
    pub clusters: Vec<Vec<Vec<usize>>>,
    pub layer0_joint: Vec<f64>,
    pub maps: Vec<Vec<Vec<usize>>>,
}

impl From<&TreeSource> for TreeSourceDoc {
    fn from(t: &TreeSource) -> Self {
        Self {
            alphabets: t.topology.alphabets.clone(),
            clusters: t.topology.clusters.clone(),
            layer0_joint: t.layer0.values().to_vec(),
            maps: t.maps.clone(),
        }
    }
}

impl TryFrom<TreeSourceDoc> for TreeSource {
    type Error = Error;
    fn try_from(d: TreeSourceDoc) -> Result<Self> {
        TreeSource::new(TreeTopology::new(d.alphabets, d.clusters)?, d.layer0_joint, d.maps)
    }
}

/// Both sides of `L(P, Q) = H(P⁰) − H(P^L) + L(P^L, Q^L)` for a chain with
/// deterministic forward maps and a perfect backward model.
pub fn ace_flat_identity(chain: &LayeredChain, unit: Unit) -> Result<(f64, f64)> {
    for (layer, t) in chain.source_forward().iter().enumerate() {
        if t.as_deterministic().is_none() {
            let column = (0..t.cols())
                .find(|&i| !t.column(i).iter().all(|&v| v == 0.0 || v == 1.0))
                .unwrap_or(0);
            return Err(Error::NotDeterministic { layer, column });
        }
    }
    let lhs = objective_reversed(chain, unit)?;
    let marginals = crate::chain::source_marginals(chain);
    let top = marginals.last().expect("at least one layer");
    let rhs = entropy(chain.source_prior(), unit) - entropy(top, unit) + code_length(top, chain.model_top(), unit)?;
    Ok((lhs, rhs))
}

/// Per-layer cluster and component (node) entropies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeEntropies {
    /// `cluster[l][c] = H(P_c^l)`, joint over the cluster members.
    pub cluster: Vec<Vec<f64>>,
    /// `component[l][node] = H(P_node^l)`.
    pub component: Vec<Vec<f64>>,
}

pub fn cluster_entropy_decomposition(ts: &TreeSource, unit: Unit, cap: usize) -> Result<TreeEntropies> {
    let joints = ts.layer_joints(cap)?;
    let topo = &ts.topology;
    let cluster = joints
        .iter()
        .enumerate()
        .map(|(l, j)| topo.clusters[l].iter().map(|m| unit.from_nats(entropy_nats(&j.marginal(m)))).collect())
        .collect();
    let component = joints
        .iter()
        .map(|j| (0..j.dims().len()).map(|n| unit.from_nats(entropy_nats(&j.marginal(&[n])))).collect())
        .collect();
    Ok(TreeEntropies { cluster, component })
}

impl TreeEntropies {
    /// `I(P_c^l) = Σ_{members} H(P_m^l) − H(P_c^l)`.
    pub fn mutual_information(&self, topo: &TreeTopology, l: usize, c: usize) -> f64 {
        topo.clusters[l][c].iter().map(|&m| self.component[l][m]).sum::<f64>() - self.cluster[l][c]
    }

    /// `Σ_{l<L} Σ_c H(P_c^l) − Σ_{l≥1} Σ_nodes H(P_node^l)`.
    pub fn decomposition(&self) -> f64 {
        let depth = self.cluster.len() - 1;
        let clusters: f64 = self.cluster[..depth].iter().flatten().sum();
        let components: f64 = self.component[1..].iter().flatten().sum();
        clusters - components
    }
}

pub fn cluster_mutual_information(ts: &TreeSource, l: usize, c: usize, unit: Unit, cap: usize) -> Result<f64> {
    if l > ts.topology.depth() || c >= ts.topology.clusters.get(l).map_or(0, Vec::len) {
        return Err(Error::InvalidArgument(format!("no cluster {c} in layer {l}")));
    }
    Ok(cluster_entropy_decomposition(ts, unit, cap)?.mutual_information(&ts.topology, l, c))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AceValue {
    pub value: f64,
    pub mi_sum: f64,
    pub h0_sum: f64,
}

/// Closed form `−Σ_{l≥1} Σ_c I(P_c^l) + Σ_c H(P_c⁰)` for the perfect tree
/// model with a factorial top model over the top-layer clusters.
pub fn ace_tree_objective(ts: &TreeSource, unit: Unit, cap: usize) -> Result<AceValue> {
    let h = cluster_entropy_decomposition(ts, unit, cap)?;
    let topo = &ts.topology;
    let mi_sum: f64 = (1..=topo.depth())
        .flat_map(|l| (0..topo.clusters[l].len()).map(move |c| (l, c)))
        .map(|(l, c)| h.mutual_information(topo, l, c))
        .sum();
    let h0_sum: f64 = h.cluster[0].iter().sum();
    Ok(AceValue { value: h0_sum - mi_sum, mi_sum, h0_sum })
}

/// The tree source written as a flat layered chain: layer states are joint
/// node states, the forward maps are deterministic, the backward model is the
/// product over clusters of the per-cluster Bayes reversals, and the top
/// model is the product of the top-cluster marginals. A parent state with
/// zero mass gets a uniform reversal column.
pub fn tree_as_chain(ts: &TreeSource, cap: usize) -> Result<LayeredChain> {
    let joints = ts.layer_joints(cap)?;
    let topo = &ts.topology;
    let mut forward = Vec::with_capacity(topo.depth());
    let mut backward = Vec::with_capacity(topo.depth());
    for l in 0..topo.depth() {
        let (below, above) = (&joints[l], &joints[l + 1]);
        let (m, n) = (below.values().len(), above.values().len());
        cell_count(&[m, n], cap)?;
        let map: Vec<usize> = (0..m).map(|i| above.index_of(&ts.parent_states(l, &below.states_of(i)))).collect();
        forward.push(TransitionMatrix::deterministic(&map, n)?);
        // Per-cluster reversal tables R_c[parent][cluster state].
        let reversals: Vec<Vec<Vec<f64>>> = topo.clusters[l]
            .iter()
            .enumerate()
            .map(|(c, members)| {
                let pc = below.marginal(members);
                let parent = topo.alphabets[l + 1][c];
                let mut cols = vec![vec![0.0; pc.len()]; parent];
                for (a, &p) in pc.iter().enumerate() {
                    cols[ts.maps[l][c][a]][a] += p;
                }
                cols.into_iter()
                    .map(|col| {
                        let z: f64 = col.iter().sum();
                        if z > 0.0 {
                            col.into_iter().map(|v| v / z).collect()
                        } else {
                            uniform_cells(pc.len())
                        }
                    })
                    .collect()
            })
            .collect();
        let cols = map_indexed(n, |j| {
            let parents = above.states_of(j);
            (0..m)
                .map(|i| {
                    let s = below.states_of(i);
                    (0..topo.clusters[l].len())
                        .map(|c| reversals[c][parents[c]][topo.cluster_index(l, c, &s)])
                        .product()
                })
                .collect()
        });
        backward.push(TransitionMatrix::renormalize_columns(cols)?);
    }
    let top_joint = joints.last().expect("at least two layers");
    let l_top = topo.depth();
    let top_marginals: Vec<Vec<f64>> = topo.clusters[l_top].iter().map(|m| top_joint.marginal(m)).collect();
    let top: Vec<f64> = (0..top_joint.values().len())
        .map(|j| {
            let s = top_joint.states_of(j);
            (0..topo.clusters[l_top].len())
                .map(|c| top_marginals[c][topo.cluster_index(l_top, c, &s)])
                .product()
        })
        .collect();
    LayeredChain::new(
        ProbVector::renormalize(joints[0].values().to_vec())?,
        forward,
        backward,
        ProbVector::renormalize(top)?,
    )
}

/// `L(P, Q)` of the flattened tree by the general chain decomposition.
pub fn tree_objective_structural(ts: &TreeSource, unit: Unit, cap: usize) -> Result<f64> {
    objective_reversed(&tree_as_chain(ts, cap)?, unit)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapCandidate {
    pub maps: Vec<Vec<usize>>,
    pub structural: f64,
    pub value: f64,
    pub mi_sum: f64,
}

/// Every combination of deterministic maps for the clusters of `layer`,
/// keeping the other layers fixed.
pub fn map_sweep(ts: &TreeSource, layer: usize, unit: Unit, max_candidates: usize) -> Result<Vec<MapCandidate>> {
    let topo = &ts.topology;
    if layer >= topo.depth() {
        return Err(Error::InvalidArgument(format!("layer {layer} has no maps")));
    }
    // Each cluster map is a number in base `parent` with `states` digits.
    let shapes: Vec<(usize, usize)> = (0..topo.clusters[layer].len())
        .map(|c| (topo.cluster_states(layer, c), topo.alphabets[layer + 1][c]))
        .collect();
    let mut total: usize = 1;
    for &(s, p) in &shapes {
        total = total.saturating_mul(p.saturating_pow(s as u32));
    }
    if total > max_candidates {
        return Err(Error::CapExceeded { cells: total, cap: max_candidates });
    }
    let results = map_indexed(total, |mut k| {
        let mut layer_maps = Vec::with_capacity(shapes.len());
        for &(s, p) in &shapes {
            let mut table = vec![0; s];
            for t in table.iter_mut().rev() {
                *t = k % p;
                k /= p;
            }
            layer_maps.push(table);
        }
        let mut maps = ts.maps.clone();
        maps[layer] = layer_maps.clone();
        let cand = ts.with_maps(maps)?;
        let v = ace_tree_objective(&cand, unit, DEFAULT_CELL_CAP)?;
        Ok(MapCandidate {
            maps: layer_maps,
            structural: tree_objective_structural(&cand, unit, DEFAULT_CELL_CAP)?,
            value: v.value,
            mi_sum: v.mi_sum,
        })
    });
    results.into_iter().collect()
}

/// One cluster of a hierarchical VQ layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterStage {
    /// Indices into the layer representation that this cluster encodes.
    pub inputs: Vec<usize>,
    /// `Pr(y_c | x_n)`, one column per data point.
    pub encoder: SoftEncoder,
    pub codebook: GaussianCodebook,
}

/// Tree of soft VQs. The layer-`l+1` representation of a data point is the
/// concatenation of its per-cluster posterior vectors at layer `l`. The top
/// model is factorial over the top clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalVq {
    pub layers: Vec<Vec<ClusterStage>>,
    pub top_priors: Vec<ProbVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HierarchicalTerms {
    /// `[l][c]` distortion terms `D_VQ^{l,c}/(4σ²)` (nats).
    pub distortion: Vec<Vec<f64>>,
    pub dvq: Vec<Vec<f64>>,
    pub constants: Vec<Vec<f64>>,
    pub top_term: f64,
}

impl HierarchicalTerms {
    pub fn total(&self) -> f64 {
        let d: f64 = self.distortion.iter().flatten().sum();
        let c: f64 = self.constants.iter().flatten().sum();
        d + c + self.top_term
    }
}

pub fn hierarchical_vq_terms(h: &HierarchicalVq, data: &EmpiricalInput) -> Result<HierarchicalTerms> {
    if h.layers.is_empty() {
        return Err(Error::EmptyAlphabet);
    }
    let mut rep: Vec<Vec<f64>> = data.points().to_vec();
    let (mut dvqs, mut distortion, mut constants) = (Vec::new(), Vec::new(), Vec::new());
    for layer in &h.layers {
        let dim = rep[0].len();
        let mut covered = vec![false; dim];
        for s in layer {
            for &i in &s.inputs {
                if i >= dim || covered[i] {
                    return Err(Error::InvalidArgument("cluster inputs must partition the layer representation".into()));
                }
                covered[i] = true;
            }
        }
        if covered.contains(&false) {
            return Err(Error::InvalidArgument("cluster inputs must partition the layer representation".into()));
        }
        let (mut dl, mut tl, mut cl) = (Vec::new(), Vec::new(), Vec::new());
        for s in layer {
            let pts = rep.iter().map(|r| s.inputs.iter().map(|&i| r[i]).collect()).collect();
            let input = EmpiricalInput::new(pts, data.weights().to_vec())?;
            let d = dvq(&s.encoder, &s.codebook, &input)?;
            dl.push(d);
            tl.push(d / (4.0 * s.codebook.sigma().powi(2)));
            cl.push(s.codebook.constant_nats());
        }
        rep = (0..data.len())
            .map(|n| layer.iter().flat_map(|s| s.encoder.row(n).iter().copied()).collect())
            .collect();
        dvqs.push(dl);
        distortion.push(tl);
        constants.push(cl);
    }
    let top = h.layers.last().expect("non-empty");
    if h.top_priors.len() != top.len() {
        return Err(Error::DimensionMismatch { what: "top priors vs top clusters", expected: top.len(), got: h.top_priors.len() });
    }
    let mut top_term = 0.0;
    for (s, q) in top.iter().zip(&h.top_priors) {
        let p = crate::vq::output_marginal(&s.encoder, data)?;
        top_term += cross_entropy_nats(p.as_slice(), q.as_slice())?;
    }
    Ok(HierarchicalTerms { distortion, dvq: dvqs, constants, top_term })
}

pub fn hierarchical_vq_objective(h: &HierarchicalVq, data: &EmpiricalInput, unit: Unit) -> Result<f64> {
    Ok(unit.from_nats(hierarchical_vq_terms(h, data)?.total()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn correlated_pair() -> TreeSource {
        // Two identical uniform bits in one cluster, mapped by identity pairs
        // onto a 4-state parent.
        let topo = TreeTopology::new(vec![vec![2, 2], vec![4]], vec![vec![vec![0, 1]], vec![vec![0]]]).unwrap();
        TreeSource::new(topo, vec![0.5, 0.0, 0.0, 0.5], vec![vec![vec![0, 1, 2, 3]]]).unwrap()
    }

    #[test]
    fn parity_flat_identity() {
        // 2 uniform bits -> parity.
        let fw = TransitionMatrix::deterministic(&[0, 1, 1, 0], 2).unwrap();
        let c = LayeredChain::with_perfect_model(ProbVector::uniform(4).unwrap(), vec![fw]).unwrap();
        let (lhs, rhs) = ace_flat_identity(&c, Unit::Bits).unwrap();
        assert_abs_diff_eq!(lhs, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rhs, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn stochastic_forward_rejected() {
        let c = LayeredChain::with_perfect_model(
            ProbVector::uniform(2).unwrap(),
            vec![TransitionMatrix::from_columns(vec![vec![0.5, 0.5], vec![1.0, 0.0]]).unwrap()],
        )
        .unwrap();
        assert_eq!(ace_flat_identity(&c, Unit::Bits), Err(Error::NotDeterministic { layer: 0, column: 0 }));
    }

    #[test]
    fn correlated_bits_entropies() {
        let ts = correlated_pair();
        let h = cluster_entropy_decomposition(&ts, Unit::Bits, DEFAULT_CELL_CAP).unwrap();
        assert_abs_diff_eq!(h.cluster[0][0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h.component[0][0] + h.component[0][1], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h.mutual_information(ts.topology(), 0, 0), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn parity_triple_information() {
        let topo = TreeTopology::new(vec![vec![2, 2, 2], vec![2]], vec![vec![vec![0, 1, 2]], vec![vec![0]]]).unwrap();
        let even: Vec<f64> = (0..8u32).map(|s| if s.count_ones() % 2 == 0 { 0.25 } else { 0.0 }).collect();
        let ts = TreeSource::new(topo, even, vec![vec![vec![0; 8]]]).unwrap();
        assert_abs_diff_eq!(cluster_mutual_information(&ts, 0, 0, Unit::Bits, DEFAULT_CELL_CAP).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn closed_form_matches_structural() {
        // Layer 0: four bits, clusters {0,1},{2,3}; layer 1: two 3-ary nodes
        // in one top cluster.
        let topo = TreeTopology::new(vec![vec![2, 2, 2, 2], vec![3, 3]], vec![vec![vec![0, 1], vec![2, 3]], vec![vec![0, 1]]]).unwrap();
        let joint: Vec<f64> = (1..=16).map(|v| v as f64 / 136.0).collect();
        let ts = TreeSource::new(topo, joint, vec![vec![vec![0, 1, 2, 2], vec![2, 0, 0, 1]]]).unwrap();
        let closed = ace_tree_objective(&ts, Unit::Bits, DEFAULT_CELL_CAP).unwrap();
        let structural = tree_objective_structural(&ts, Unit::Bits, DEFAULT_CELL_CAP).unwrap();
        assert_abs_diff_eq!(closed.value, structural, epsilon = 1e-10);
    }

    #[test]
    fn tree_doc_round_trip() {
        let ts = correlated_pair();
        let doc = TreeSourceDoc::from(&ts);
        let back = TreeSource::try_from(serde_json::from_str::<TreeSourceDoc>(&serde_json::to_string(&doc).unwrap()).unwrap()).unwrap();
        assert_eq!(back, ts);
    }
}
