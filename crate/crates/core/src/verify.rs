//! Self-check suite: every identity and inequality the library relies on,
//! evaluated on seeded random instances.
//!
//! Checks are grouped by scope (`prob-core`, `markov-objective`, `soft-vq`,
//! `ladder-topo`, `ace`, `pmd`, `helmholtz`). Each reports the number of
//! cases, the largest violation seen and the first few failures.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ace::{ace_flat_identity, ace_tree_objective, cluster_entropy_decomposition, map_sweep, tree_objective_structural};
use crate::chain::{
    input_code_length, joint_source, objective_bruteforce, objective_forward, objective_reversed, objective_reversed_terms,
    source_marginals, ChainDoc, LayeredChain, DEFAULT_CELL_CAP,
};
use crate::error::{Error, Result};
use crate::helmholtz::{hm_decomposition, sandwich_report, TwoLayerInstance};
use crate::ladder::{encoder_gradient, ladder_objective, ladder_terms, LadderStage, Representation, VqLadder};
use crate::pmd::{
    averaged_joint_codebook, bayes_posterior, exact_product_dvq, factorial_dvq_bound, optimal_joint_codebook, pmd_posterior,
    repeated_model_bound, BankModel, FactorialEncoderBank, PmdConfig,
};
use crate::prob::{
    bayes_reverse, code_length, entropy, push_forward, relative_entropy, ProbVector, TransitionMatrix, Unit, NORM_TOL,
};
use crate::synth::{
    random_chain, random_deterministic_chain, random_prob, random_transition, random_tree, rng, uniform_box, ChaCha8Rng,
};
use crate::topo::{
    compose_leakage, leaked_dvq, skip_identity_check, topo_trace_is_monotone, train_topo_map, LeakSpec, LeakageMatrix,
    TopoConfig, Topology,
};
use crate::vq::{
    dvq, dvq_gradient, encode_all, optimal_encoder_row, optimal_reconstruction, output_marginal, train_soft_vq,
    trace_is_monotone, two_layer_objective, two_sided_dvq, EmpiricalInput, EncoderMode, GaussianCodebook, SoftEncoder,
    SoftVqConfig,
};

pub const SCOPES: [&str; 7] = ["prob-core", "markov-objective", "soft-vq", "ladder-topo", "ace", "pmd", "helmholtz"];

const MAX_FAILURES: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub id: String,
    pub scope: String,
    pub title: String,
    pub passed: bool,
    pub cases: usize,
    /// Largest violation of the checked relation (0 when it holds exactly).
    pub max_error: f64,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub scope: String,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn failed_ids(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.id.as_str()).collect()
    }
}

#[derive(Default)]
struct Tally {
    cases: usize,
    max_error: f64,
    failures: Vec<String>,
}

impl Tally {
    fn fail(&mut self, err: f64, what: impl FnOnce() -> String) {
        self.max_error = self.max_error.max(err);
        if self.failures.len() < MAX_FAILURES {
            self.failures.push(what());
        }
    }

    /// `|a − b| ≤ tol`.
    fn close(&mut self, a: f64, b: f64, tol: f64, what: impl FnOnce() -> String) {
        self.cases += 1;
        let e = (a - b).abs();
        if e > tol || !e.is_finite() {
            self.fail(e, || format!("{}: {a} vs {b}", what()));
        } else {
            self.max_error = self.max_error.max(e);
        }
    }

    /// `a ≤ b + tol`.
    fn le(&mut self, a: f64, b: f64, tol: f64, what: impl FnOnce() -> String) {
        self.cases += 1;
        let e = (a - b).max(0.0);
        if a > b + tol || a.is_nan() || b.is_nan() {
            self.fail(e, || format!("{}: {a} > {b}", what()));
        } else {
            self.max_error = self.max_error.max(e);
        }
    }

    fn holds(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.fail(f64::INFINITY, what);
        }
    }
}

type CheckFn = fn(&mut ChaCha8Rng, &mut Tally) -> Result<()>;

struct Check {
    scope: &'static str,
    id: &'static str,
    title: &'static str,
    run: CheckFn,
}

const CHECKS: &[Check] = &[
    Check { scope: "prob-core", id: "prob.gibbs_inequality", title: "relative entropy is non-negative and vanishes only for equal distributions", run: prob_gibbs },
    Check { scope: "prob-core", id: "prob.code_length_split", title: "code length = entropy + relative entropy", run: prob_split },
    Check { scope: "prob-core", id: "prob.bayes_round_trip", title: "double Bayes reversal recovers the transition and prior", run: prob_round_trip },
    Check { scope: "prob-core", id: "prob.push_forward_normalized", title: "push-forward output is normalized", run: prob_push_forward },
    Check { scope: "prob-core", id: "prob.unit_consistency", title: "bits = nats / ln 2; fair die entropy = log2 6", run: prob_units },
    Check { scope: "markov-objective", id: "chain.decomposition_equivalence", title: "forward, reversed and brute-force objectives agree", run: chain_decomposition },
    Check { scope: "markov-objective", id: "chain.input_sandwich", title: "input code length never exceeds the joint objective", run: chain_sandwich },
    Check { scope: "markov-objective", id: "chain.perfect_model_floor", title: "perfect model attains the joint entropy and perturbations never go below it", run: chain_floor },
    Check { scope: "markov-objective", id: "chain.top_removal", title: "dropping the top layer keeps the remaining layer terms", run: chain_top_removal },
    Check { scope: "soft-vq", id: "vq.grid_assembly", title: "two-layer objective equals the discretized chain objective", run: vq_grid_assembly },
    Check { scope: "soft-vq", id: "vq.coordinate_steps", title: "encoder, centroid and prior steps never increase the objective", run: vq_coordinate_steps },
    Check { scope: "soft-vq", id: "vq.centroid_optimality", title: "perturbing an optimal code vector increases distortion", run: vq_centroid_optimality },
    Check { scope: "soft-vq", id: "vq.posterior_normalization", title: "posterior encoder rows sum to 1", run: vq_posterior_normalization },
    Check { scope: "soft-vq", id: "vq.winner_take_all_limit", title: "posterior mass on the nearest code grows to 1 with beta", run: vq_wta },
    Check { scope: "soft-vq", id: "vq.two_sided_form", title: "two-sided distortion equals the centroid form at optimal centroids", run: vq_two_sided },
    Check { scope: "soft-vq", id: "vq.dvq_gradient", title: "distortion gradient matches finite differences", run: vq_gradient },
    Check { scope: "soft-vq", id: "vq.trace_monotone", title: "soft-VQ training trace is non-increasing at fixed width", run: vq_trace },
    Check { scope: "ladder-topo", id: "topo.leakage_normalized", title: "composed leakage is column-stochastic", run: topo_leak_normalized },
    Check { scope: "ladder-topo", id: "topo.identity_leakage", title: "identity leakage leaves distortion unchanged", run: topo_identity_leak },
    Check { scope: "ladder-topo", id: "topo.leakage_hurts", title: "leakage never lowers distortion at unleaked centroids", run: topo_leak_hurts },
    Check { scope: "ladder-topo", id: "topo.trace_monotone", title: "topographic training trace is non-increasing per phase", run: topo_trace },
    Check { scope: "ladder-topo", id: "topo.identity_reproduces_vq", title: "identity-leakage map reproduces the soft-VQ trace", run: topo_identity_run },
    Check { scope: "ladder-topo", id: "topo.skip_identity", title: "skip-layer distortion equals the leaked layer-0/1 form", run: topo_skip },
    Check { scope: "ladder-topo", id: "ladder.single_stage", title: "one-stage ladder equals the two-layer objective", run: ladder_single },
    Check { scope: "ladder-topo", id: "ladder.encoder_gradient", title: "ladder encoder gradient matches finite differences", run: ladder_gradient },
    Check { scope: "ladder-topo", id: "ladder.self_supervision", title: "upper stage parameters change the lower stage gradient", run: ladder_coupling },
    Check { scope: "ace", id: "ace.flat_identity", title: "deterministic chain objective = H(P0) - H(PL) + L(PL,QL)", run: ace_flat },
    Check { scope: "ace", id: "ace.input_equals_joint", title: "deterministic source with perfect model: input code length = joint objective", run: ace_input_joint },
    Check { scope: "ace", id: "ace.tree_decomposition", title: "closed form, entropy decomposition and enumeration agree on trees", run: ace_tree },
    Check { scope: "ace", id: "ace.mi_nonnegative", title: "cluster mutual information is non-negative", run: ace_mi },
    Check { scope: "ace", id: "ace.map_sweep", title: "minimum objective over maps = maximum summed mutual information", run: ace_sweep },
    Check { scope: "pmd", id: "pmd.normalization", title: "PMD and Bayes posteriors sum to 1", run: pmd_normalization },
    Check { scope: "pmd", id: "pmd.single_model_reduction", title: "K = 1 posteriors equal the single-model posterior", run: pmd_k1 },
    Check { scope: "pmd", id: "pmd.single_model_bounds", title: "n = 1 bounds equal the distortion", run: pmd_n1 },
    Check { scope: "pmd", id: "pmd.bound_chain", title: "optimal product code <= factorial bound = averaged product code", run: pmd_bound_chain },
    Check { scope: "pmd", id: "pmd.repeated_model", title: "repeated-model bound = factorial bound of identical models", run: pmd_repeated },
    Check { scope: "pmd", id: "pmd.locality", title: "PMD posterior is invariant to per-patch rescaling, Bayes is not", run: pmd_locality },
    Check { scope: "helmholtz", id: "hm.sandwich", title: "L(P0,Q0) <= D_HM <= L(P,Q) with exact gap identities", run: hm_sandwich },
    Check { scope: "helmholtz", id: "hm.decomposition", title: "sparse + distributed terms = D_HM; distributed term >= 0", run: hm_decomp },
    Check { scope: "helmholtz", id: "hm.degenerate", title: "deterministic source with perfect model collapses the sandwich", run: hm_degenerate },
];

/// Ids of every check, in execution order.
pub fn check_ids() -> Vec<(&'static str, &'static str)> {
    CHECKS.iter().map(|c| (c.scope, c.id)).collect()
}

/// Runs every check in `scope` (`"all"` or one of [`SCOPES`]). Each check
/// draws from its own generator seeded from `seed` and its position.
pub fn run_verify(scope: &str, seed: u64) -> Result<VerifyReport> {
    if scope != "all" && !SCOPES.contains(&scope) {
        return Err(Error::InvalidArgument(format!("unknown scope `{scope}`; expected all or one of {}", SCOPES.join(", "))));
    }
    let checks: Vec<CheckResult> = CHECKS
        .iter()
        .enumerate()
        .filter(|(_, c)| scope == "all" || c.scope == scope)
        .map(|(i, c)| {
            let mut r = rng(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64));
            let mut t = Tally::default();
            if let Err(e) = (c.run)(&mut r, &mut t) {
                t.fail(f64::INFINITY, || format!("error: {e}"));
            }
            CheckResult {
                id: c.id.into(),
                scope: c.scope.into(),
                title: c.title.into(),
                passed: t.failures.is_empty(),
                cases: t.cases,
                max_error: t.max_error,
                failures: t.failures,
            }
        })
        .collect();
    Ok(VerifyReport { seed, scope: scope.into(), passed: checks.iter().all(|c| c.passed), checks })
}

/// A serialized chain to check, optionally with its expected objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainFixture {
    pub name: String,
    pub chain: ChainDoc,
    /// Expected `L(P, Q)` in bits.
    #[serde(default)]
    pub expected_objective_bits: Option<f64>,
}

fn column_errors(name: &str, what: &str, v: &[f64], t: &mut Tally) {
    let s: f64 = v.iter().sum();
    t.close(s, 1.0, NORM_TOL, || format!("{name}: {what} is not normalized (sum vs 1)"));
    if let Some(x) = v.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        t.fail(f64::INFINITY, || format!("{name}: {what} has invalid entry {x}"));
    }
}

/// Checks one fixture: normalization of every distribution first, then the
/// chain identities, then the expected value if given.
pub fn verify_chain_fixture(f: &ChainFixture) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let mut push = |id: &str, title: &str, t: Tally| {
        out.push(CheckResult {
            id: format!("fixture.{}.{id}", f.name),
            scope: "fixture".into(),
            title: title.into(),
            passed: t.failures.is_empty(),
            cases: t.cases,
            max_error: t.max_error,
            failures: t.failures,
        })
    };
    let d = &f.chain;
    let mut t = Tally::default();
    column_errors(&f.name, "source_prior", &d.source_prior, &mut t);
    column_errors(&f.name, "model_top", &d.model_top, &mut t);
    for (kind, mats) in [("source_forward", &d.source_forward), ("model_backward", &d.model_backward)] {
        for (l, rows) in mats.iter().enumerate() {
            let cols = rows.first().map_or(0, Vec::len);
            for c in 0..cols {
                let col: Vec<f64> = rows.iter().map(|r| r.get(c).copied().unwrap_or(f64::NAN)).collect();
                column_errors(&f.name, &format!("{kind}[{l}] column {c}"), &col, &mut t);
            }
        }
    }
    let normalized = t.failures.is_empty();
    push("normalization", "every distribution of the fixture is normalized", t);
    if !normalized {
        return out;
    }
    let chain = match LayeredChain::try_from(d.clone()) {
        Ok(c) => c,
        Err(e) => {
            let mut t = Tally::default();
            t.fail(f64::INFINITY, || format!("{}: {e}", f.name));
            push("structure", "fixture describes a valid layered chain", t);
            return out;
        }
    };
    let mut t = Tally::default();
    let r = (|| -> Result<()> {
        let rev = objective_reversed(&chain, Unit::Bits)?;
        t.close(objective_forward(&chain, Unit::Bits)?, rev, 1e-10, || "forward vs reversed".into());
        t.close(objective_bruteforce(&chain, Unit::Bits, DEFAULT_CELL_CAP)?, rev, 1e-10, || "brute force vs reversed".into());
        Ok(())
    })();
    if let Err(e) = r {
        t.fail(f64::INFINITY, || format!("error: {e}"));
    }
    push("decomposition_equivalence", "forward, reversed and brute-force objectives agree", t);
    let mut t = Tally::default();
    match (input_code_length(&chain, Unit::Bits), objective_reversed(&chain, Unit::Bits)) {
        (Ok(a), Ok(b)) => t.le(a, b, 1e-12, || "input code length vs joint objective".into()),
        (Err(e), _) | (_, Err(e)) => t.fail(f64::INFINITY, || format!("error: {e}")),
    }
    push("input_sandwich", "input code length never exceeds the joint objective", t);
    if let Some(expected) = f.expected_objective_bits {
        let mut t = Tally::default();
        match objective_reversed(&chain, Unit::Bits) {
            Ok(v) => t.close(v, expected, 1e-10, || "objective vs expected".into()),
            Err(e) => t.fail(f64::INFINITY, || format!("error: {e}")),
        }
        push("expected_objective", "objective matches the recorded value", t);
    }
    out
}

fn random_sizes(r: &mut ChaCha8Rng) -> Vec<usize> {
    let layers = r.random_range(2..=4);
    (0..layers).map(|_| r.random_range(2..=5)).collect()
}

fn prob_gibbs(r: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for _ in 0..1000 {
        let m = r.random_range(2..=6);
        let (p, q) = (random_prob(r, m), random_prob(r, m));
        let g = relative_entropy(&p, &q, Unit::Bits)?;
        t.le(0.0, g, 0.0, || "G(p,q) >= 0".into());
        let gap = p.as_slice().iter().zip(q.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if gap > 1e-6 {
            t.holds(g > 0.0, || format!("G(p,q) = {g} for distinct p, q"));
        }
        t.close(relative_entropy(&p, &p, Unit::Bits)?, 0.0, 1e-12, || "G(p,p)".into());
    }
    Ok(())
}

fn prob_split(r: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for _ in 0..1000 {
        let m = r.random_range(2..=6);
        let (p, q) = (random_prob(r, m), random_prob(r, m));
        let l = code_length(&p, &q, Unit::Bits)?;
        t.close(l, entropy(&p, Unit::Bits) + relative_entropy(&p, &q, Unit::Bits)?, 1e-12, || "L vs H + G".into());
    }
    Ok(())
}

fn prob_round_trip(r: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for _ in 0..200 {
        let (rows, cols) = (r.random_range(2..=5), r.random_range(2..=5));
        let tr = random_transition(r, rows, cols);
        let prior = random_prob(r, cols);
        let (rev, m) = bayes_reverse(&tr, &prior)?;
        let (back, prior2) = bayes_reverse(&rev, &m)?;
        for c in 0..cols {
            t.close(prior2[c], prior[c], 1e-10, || format!("prior entry {c}"));
            for o in 0..rows {
                t.close(back.get(o, c), tr.get(o, c), 1e-10, || format!("entry ({o}, {c})"));
            }
        }
    }
    Ok(())
}

fn prob_push_forward(r: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for _ in 0..500 {
        let (rows, cols) = (r.random_range(1..=6), r.random_range(1..=6));
        let out = push_forward(&random_transition(r, rows, cols), &random_prob(r, cols))?;
        t.close(out.as_slice().iter().sum(), 1.0, 1e-12, || "push-forward sum".into());
    }
    Ok(())
}

fn prob_units(r: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for _ in 0..200 {
        let m = r.random_range(1..=8);
        let p = random_prob(r, m);
        t.close(entropy(&p, Unit::Bits), entropy(&p, Unit::Nats) / std::f64::consts::LN_2, 1e-12, || "bits vs nats".into());
    }
    t.close(entropy(&ProbVector::uniform(6)?, Unit::Bits), 6f64.log2(), 1e-12, || "fair die".into());
    Ok(())
}

fn chain_decomposition(r: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for k in 0..500 {
        let sizes = random_sizes(r);
        let c = random_chain(r, &sizes);
        let rev = objective_reversed(&c, Unit::Bits)?;
        t.close(objective_forward(&c, Unit::Bits)?, rev, 1e-10, || format!("chain {k}: forward vs reversed"));
        t.close(objective_bruteforce(&c, Unit::Bits, DEFAULT_CELL_CAP)?, rev, 1e-10, || format!("chain {k}: brute force vs reversed"));
    }
    Ok(())
}

fn chain_sandwich(r: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for k in 0..500 {
        let sizes = random_sizes(r);
        let c = random_chain(r, &sizes);
        t.le(input_code_length(&c, Unit::Bits)?, objective_reversed(&c, Unit::Bits)?, 1e-12, || format!("chain {k}"));
    }
    Ok(())
}

fn chain_floor(r: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for k in 0..20 {
        let sizes = random_sizes(r);
        let base = random_chain(r, &sizes);
        let c = LayeredChain::with_perfect_model(base.source_prior().clone(), base.source_forward().to_vec())?;
        let floor = objective_reversed(&c, Unit::Nats)?;
        t.close(floor, joint_source(&c, DEFAULT_CELL_CAP)?.entropy(Unit::Nats), 1e-10, || format!("chain {k}: floor vs joint entropy"));
        for _ in 0..5 {
            let mut backward = c.model_backward().to_vec();
            let mut top = c.model_top().as_slice().to_vec();
            let l = r.random_range(0..=backward.len());
            if l == backward.len() {
                let i = r.random_range(0..top.len());
                top[i] *= 1.0 + r.random::<f64>();
            } else {
                let mut cols: Vec<Vec<f64>> = backward[l].columns().map(<[f64]>::to_vec).collect();
                let j = r.random_range(0..cols.len());
                let i = r.random_range(0..cols[j].len());
                cols[j][i] *= 1.0 + r.random::<f64>();
                backward[l] = TransitionMatrix::renormalize_columns(cols)?;
            }
            let perturbed = c.with_model(backward, ProbVector::renormalize(top)?)?;
            t.le(floor, objective_reversed(&perturbed, Unit::Nats)?, 1e-12, || format!("chain {k}: perturbed model"));
        }
    }
    Ok(())
}

fn chain_top_removal(r: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for k in 0..100 {
        let layers = r.random_range(3..=4);
        let sizes: Vec<usize> = (0..layers).map(|_| r.random_range(2..=5)).collect();
        let c = random_chain(r, &sizes);
        let depth = c.depth();
        let marginals = source_marginals(&c);
        let top = marginals[depth - 2].clone();
        let cut = LayeredChain::new(
            c.source_prior().clone(),
            c.source_forward()[..depth - 1].to_vec(),
            c.model_backward()[..depth - 1].to_vec(),
            top.clone(),
        )?;
        let (full, short) = (objective_reversed_terms(&c)?, objective_reversed_terms(&cut)?);
        for (l, (a, b)) in short.layer_terms.iter().zip(&full.layer_terms).enumerate() {
            t.le(*a, *b, 1e-12, || format!("chain {k}: layer {l} term"));
        }
        t.close(short.top_term, entropy(&top, Unit::Nats), 1e-12, || format!("chain {k}: truncated top term"));
    }
    Ok(())
}

/// Chain over `cells` grid cells (plus one residual state that absorbs the
/// Gaussian mass outside the grid) and the codes, whose objective equals the
/// Gaussian two-layer objective when `V` is the cell width.
pub fn gaussian_grid_chain(
    enc: &SoftEncoder,
    code: &GaussianCodebook,
    data: &EmpiricalInput,
    q: &ProbVector,
) -> Result<LayeredChain> {
    let n = data.len();
    let v = code.volume();
    let s = code.sigma();
    let d = code.dim() as f64;
    let norm = v / (2.0 * std::f64::consts::PI * s * s).powf(d / 2.0);
    let mut prior = data.weights().to_vec();
    prior.push(0.0);
    let mut fw: Vec<Vec<f64>> = (0..n).map(|i| enc.row(i).to_vec()).collect();
    fw.push(vec![1.0 / code.len() as f64; code.len()]);
    let bw: Vec<Vec<f64>> = code
        .vectors()
        .iter()
        .map(|c| {
            let mut col: Vec<f64> =
                data.points().iter().map(|x| norm * (-crate::vq::sq_dist(x, c) / (2.0 * s * s)).exp()).collect();
            let inside: f64 = col.iter().sum();
            col.push((1.0 - inside).max(0.0));
            col
        })
        .collect();
    LayeredChain::new(
        ProbVector::new(prior)?,
        vec![TransitionMatrix::from_columns(fw)?],
        vec![TransitionMatrix::renormalize_columns(bw)?],
        q.clone(),
    )
}

fn vq_grid_assembly(r: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    let cells = 64;
    let width = 1.0 / cells as f64;
    let centres: Vec<Vec<f64>> = (0..cells).map(|i| vec![(i as f64 + 0.5) * width]).collect();
    for k in 0..3 {
        let m = 2 + k;
        let weights = random_prob(r, cells).into_inner();
        let data = EmpiricalInput::new(centres.clone(), weights)?;
        let vectors: Vec<Vec<f64>> = (0..m).map(|_| vec![0.3 + 0.4 * r.random::<f64>()]).collect();
        let code = GaussianCodebook::new(vectors, 0.08, width)?;
        let q = random_prob(r, m);
        let enc = encode_all(&data, &code, &q, EncoderMode::Posterior { beta_scale: 1.0 })?;
        let chain = gaussian_grid_chain(&enc, &code, &data, &q)?;
        t.close(
            two_layer_objective(&enc, &code, &data, &q, Unit::Nats)?,
            objective_reversed(&chain, Unit::Nats)?,
            1e-8,
            || format!("fixture {k}"),
        );
    }
    Ok(())
}

struct VqInstance {
    data: EmpiricalInput,
    code: GaussianCodebook,
    q: ProbVector,
    enc: SoftEncoder,
}

fn vq_instance(r: &mut ChaCha8Rng) -> Result<VqInstance> {
    let dim = r.random_range(1..=2);
    let data = uniform_box(r, 12, dim, 0.0, 1.0)?;
    let m = r.random_range(2..=4);
    let vectors = uniform_box(r, m, dim, 0.0, 1.0)?.points().to_vec();
    let code = GaussianCodebook::new(vectors, 0.2 + 0.5 * r.random::<f64>(), 0.1)?;
    let q = random_prob(r, m);
    let logits: Vec<Vec<f64>> = (0..data.len()).map(|_| (0..m).map(|_| 3.0 * r.random::<f64>()).collect()).collect();
    Ok(VqInstance { data, code, q, enc: SoftEncoder::from_logits(&logits)? })
}

fn vq_coordinate_steps(r: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for k in 0..100 {
        let VqInstance { data, code, q, enc } = vq_instance(r)?;
        let before = two_layer_objective(&enc, &code, &data, &q, Unit::Nats)?;
        let hard = encode_all(&data, &code, &q, EncoderMode::Hard)?;
        t.le(two_layer_objective(&hard, &code, &data, &q, Unit::Nats)?, before, 1e-9, || format!("instance {k}: encoder step"));
        let moved = code.with_vectors(optimal_reconstruction(&enc, &data)?)?;
        t.le(two_layer_objective(&enc, &moved, &data, &q, Unit::Nats)?, before, 1e-9, || format!("instance {k}: centroid step"));
        let p1 = output_marginal(&enc, &data)?;
        t.le(two_layer_objective(&enc, &code, &data, &p1, Unit::Nats)?, before, 1e-9, || format!("instance {k}: prior step"));
    }
    Ok(())
}

fn vq_centroid_optimality(r: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    let eps = 1e-4;
    for k in 0..30 {
        let VqInstance { data, code, enc, .. } = vq_instance(r)?;
        let opt = optimal_reconstruction(&enc, &data)?;
        let base = dvq(&enc, &code.with_vectors(opt.clone())?, &data)?;
        for y in 0..opt.len() {
            for a in 0..opt[y].len() {
                for sgn in [-1.0, 1.0] {
                    let mut v = opt.clone();
                    v[y][a] += sgn * eps;
                    let d = dvq(&enc, &code.with_vectors(v)?, &data)?;
                    t.holds(d > base, || format!("instance {k}: code {y} axis {a} sign {sgn}: {d} <= {base}"));
                }
            }
        }
    }
    Ok(())
}

fn vq_posterior_normalization(r: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for _ in 0..100 {
        let VqInstance { data, code, q, .. } = vq_instance(r)?;
        for x in data.points() {
            let beta = 10f64.powf(r.random_range(-2.0..6.0));
            let p = optimal_encoder_row(x, &code, &q, beta);
            t.close(p.as_slice().iter().sum(), 1.0, 1e-12, || format!("beta {beta}"));
        }
    }
    Ok(())
}

fn vq_wta(r: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for k in 0..50 {
        let VqInstance { data, code, q, .. } = vq_instance(r)?;
        let x = &data.points()[0];
        let nearest = crate::vq::argmin(code.vectors().iter().map(|c| crate::vq::sq_dist(x, c)));
        let mut prev = 0.0;
        let mut beta = 0.1;
        for _ in 0..9 {
            let p = optimal_encoder_row(x, &code, &q, beta)[nearest];
            t.le(prev, p, 1e-15, || format!("instance {k}: beta {beta}"));
            prev = p;
            beta *= 10.0;
        }
        t.close(prev, 1.0, 1e-9, || format!("instance {k}: limit"));
    }
    Ok(())
}

fn vq_two_sided(r: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for k in 0..50 {
        let VqInstance { data, code, enc, .. } = vq_instance(r)?;
        let opt = code.with_vectors(optimal_reconstruction(&enc, &data)?)?;
        t.close(two_sided_dvq(&enc, &data)?, dvq(&enc, &opt, &data)?, 1e-9, || format!("instance {k}"));
    }
    Ok(())
}

fn vq_gradient(r: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    let h = 1e-6;
    for k in 0..30 {
        let VqInstance { data, code, enc, .. } = vq_instance(r)?;
        let g = dvq_gradient(&enc, &code, &data)?;
        for y in 0..code.len() {
            for a in 0..code.dim() {
                let shifted = |s: f64| -> Result<f64> {
                    let mut v = code.vectors().to_vec();
                    v[y][a] += s;
                    dvq(&enc, &code.with_vectors(v)?, &data)
                };
                let fd = (shifted(h)? - shifted(-h)?) / (2.0 * h);
                t.close(fd, g[y][a], 1e-6, || format!("instance {k}: code {y} axis {a}"));
            }
        }
    }
    Ok(())
}

fn vq_trace(r: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for k in 0..5 {
        let data = uniform_box(r, 150, 2, 0.0, 1.0)?;
        let mut cfg = SoftVqConfig::new(6, 0.1, 25);
        cfg.q_update = k % 2 == 1;
        let run = train_soft_vq(&data, &cfg, r.random())?;
        t.holds(trace_is_monotone(&run.trace, 1e-9), || format!("run {k}"));
    }
    Ok(())
}

fn topo_leak_normalized(r: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for _ in 0..100 {
        let (m, p) = (r.random_range(2..=8), r.random_range(1..=5));
        let l = compose_leakage(random_transition(r, p, m), random_transition(r, m, p))?;
        for c in l.matrix().columns() {
            t.close(c.iter().sum(), 1.0, 1e-12, || "leakage column".into());
        }
    }
    Ok(())
}

fn topo_identity_leak(r: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for k in 0..50 {
        let VqInstance { data, code, enc, .. } = vq_instance(r)?;
        let id = LeakageMatrix::identity(code.len())?;
        t.close(leaked_dvq(&enc, &code, &data, &id)?, dvq(&enc, &code, &data)?, 0.0, || format!("instance {k}"));
    }
    Ok(())
}

fn topo_leak_hurts(r: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for k in 0..100 {
        let VqInstance { data, code, enc, .. } = vq_instance(r)?;
        let code = code.with_vectors(optimal_reconstruction(&enc, &data)?)?;
        let m = code.len();
        let p = r.random_range(1..=m);
        let leak = compose_leakage(random_transition(r, p, m), random_transition(r, m, p))?;
        t.le(dvq(&enc, &code, &data)?, leaked_dvq(&enc, &code, &data, &leak)?, 1e-12, || format!("instance {k}"));
    }
    Ok(())
}

fn topo_trace(r: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for k in 0..3 {
        let data = uniform_box(r, 120, 1, 0.0, 1.0)?;
        let cfg = TopoConfig {
            codes: 10,
            leak: Some(LeakSpec { topology: Topology::Chain, parents: 10, kernel: vec![0.25, 0.5, 0.25] }),
            warmup: vec![],
            sigma0: 0.05,
            sigma_ratio: 1.0,
            iterations: 15,
            volume: 1.0,
            initial_codebook: None,
        };
        let run = train_topo_map(&data, &cfg, r.random())?;
        t.holds(topo_trace_is_monotone(&run.trace, 1e-9), || format!("run {k}"));
    }
    Ok(())
}

fn topo_identity_run(r: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    let data = uniform_box(r, 100, 2, 0.0, 1.0)?;
    let seed = r.random();
    let cfg = TopoConfig {
        codes: 5,
        leak: None,
        warmup: vec![],
        sigma0: 0.1,
        sigma_ratio: 1.0,
        iterations: 12,
        volume: 1.0,
        initial_codebook: None,
    };
    let topo = train_topo_map(&data, &cfg, seed)?;
    let vq = train_soft_vq(&data, &SoftVqConfig::new(5, 0.1, 12), seed)?;
    t.holds(topo.trace.len() == vq.trace.len(), || "trace lengths differ".into());
    for (a, b) in topo.trace.iter().zip(&vq.trace) {
        t.close(a.row.total, b.total, 1e-9, || format!("iteration {}", b.iteration));
    }
    Ok(())
}

fn topo_skip(r: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for k in 0..30 {
        let c = random_chain(r, &[4, 3, 2]);
        let points = uniform_box(r, 4, 2, -1.0, 1.0)?.points().to_vec();
        let rep = skip_identity_check(&points, &c, 1e-9)?;
        t.close(rep.max_abs_diff, 0.0, 1e-9, || format!("instance {k}"));
    }
    Ok(())
}

fn random_ladder(r: &mut ChaCha8Rng) -> Result<(VqLadder, EmpiricalInput)> {
    let data = uniform_box(r, 8, 1, 0.0, 2.0)?;
    let (m1, m2) = (3, 2);
    let assign: Vec<usize> = (0..data.len()).map(|n| n % m1).collect();
    let s0 = LadderStage {
        encoder: SoftEncoder::hard(&assign, m1)?,
        codebook: GaussianCodebook::new(uniform_box(r, m1, 1, 0.0, 2.0)?.points().to_vec(), 0.3, 1.0)?,
    };
    let s1 = LadderStage {
        encoder: SoftEncoder::new(random_transition(r, m2, m1)),
        codebook: GaussianCodebook::new(uniform_box(r, m2, m1, 0.0, 1.0)?.points().to_vec(), 0.5, 1.0)?,
    };
    Ok((VqLadder::new(vec![s0, s1], random_prob(r, m2), Representation::OneHot)?, data))
}

fn ladder_single(r: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for k in 0..30 {
        let VqInstance { data, code, q, enc } = vq_instance(r)?;
        let expect = two_layer_objective(&enc, &code, &data, &q, Unit::Bits)?;
        let l = VqLadder::new(vec![LadderStage { encoder: enc, codebook: code }], q, Representation::OneHot)?;
        t.close(ladder_objective(&l, &data, Unit::Bits)?.0, expect, 1e-12, || format!("instance {k}"));
    }
    Ok(())
}

fn ladder_gradient(r: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    let eps = 1e-6;
    for k in 0..20 {
        let (l, data) = random_ladder(r)?;
        for stage in 0..2 {
            let g = encoder_gradient(&l, &data, stage)?;
            let enc = &l.stages()[stage].encoder;
            let n = r.random_range(0..enc.points());
            let from = (0..enc.codes()).find(|&y| enc.row(n)[y] > 2.0 * eps).unwrap_or(0);
            let to = (from + 1) % enc.codes();
            let mut cols: Vec<Vec<f64>> = (0..enc.points()).map(|i| enc.row(i).to_vec()).collect();
            cols[n][from] -= eps;
            cols[n][to] += eps;
            let mut stages = l.stages().to_vec();
            stages[stage].encoder = SoftEncoder::new(TransitionMatrix::from_columns(cols)?);
            let moved = VqLadder::new(stages, l.top_prior().clone(), Representation::OneHot)?;
            let fd = (ladder_terms(&moved, &data)?.total() - ladder_terms(&l, &data)?.total()) / eps;
            t.close(fd, g[n][to] - g[n][from], 1e-5, || format!("ladder {k}: stage {stage}"));
        }
    }
    Ok(())
}

fn ladder_coupling(r: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for k in 0..10 {
        let (l, data) = random_ladder(r)?;
        let mut stages = l.stages().to_vec();
        let other = uniform_box(r, stages[1].codebook.len(), stages[1].codebook.dim(), 0.0, 1.0)?.points().to_vec();
        stages[1].codebook = stages[1].codebook.with_vectors(other)?;
        let l2 = VqLadder::new(stages, l.top_prior().clone(), Representation::OneHot)?;
        let (g1, g2) = (encoder_gradient(&l, &data, 0)?, encoder_gradient(&l2, &data, 0)?);
        let diff = g1.iter().flatten().zip(g2.iter().flatten()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        t.holds(diff > 1e-6, || format!("ladder {k}: stage-0 gradient unchanged ({diff})"));
    }
    Ok(())
}

fn det_sizes(r: &mut ChaCha8Rng) -> Vec<usize> {
    let mut sizes = vec![r.random_range(3..=6)];
    for _ in 0..r.random_range(1..=3) {
        let last = *sizes.last().expect("non-empty");
        sizes.push(r.random_range(1..=last));
    }
    sizes
}

fn ace_flat(r: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for k in 0..20 {
        let sizes = det_sizes(r);
        let base = random_deterministic_chain(r, &sizes)?;
        // Perfect backward model with a random top prior, so the top term varies.
        let top = random_prob(r, *base.layer_sizes().last().expect("layers"));
        let c = base.with_model(base.model_backward().to_vec(), top)?;
        let (lhs, rhs) = ace_flat_identity(&c, Unit::Bits)?;
        t.close(lhs, rhs, 1e-10, || format!("chain {k}: lhs vs rhs"));
        t.close(objective_bruteforce(&c, Unit::Bits, DEFAULT_CELL_CAP)?, rhs, 1e-10, || format!("chain {k}: brute force"));
    }
    Ok(())
}

fn ace_input_joint(r: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for k in 0..20 {
        let sizes = det_sizes(r);
        let c = random_deterministic_chain(r, &sizes)?;
        t.close(input_code_length(&c, Unit::Bits)?, objective_reversed(&c, Unit::Bits)?, 1e-10, || format!("chain {k}"));
    }
    Ok(())
}

fn small_tree(r: &mut ChaCha8Rng) -> Result<crate::ace::TreeSource> {
    let nodes = r.random_range(2..=5);
    let depth = r.random_range(1..=2);
    random_tree(r, nodes, 2, depth, 3)
}

fn ace_tree(r: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for k in 0..20 {
        let ts = small_tree(r)?;
        let v = ace_tree_objective(&ts, Unit::Bits, DEFAULT_CELL_CAP)?;
        let structural = tree_objective_structural(&ts, Unit::Bits, DEFAULT_CELL_CAP)?;
        t.close(v.value, structural, 1e-10, || format!("tree {k}: closed form vs enumeration"));
        let h = cluster_entropy_decomposition(&ts, Unit::Bits, DEFAULT_CELL_CAP)?;
        let top: f64 = h.cluster.last().expect("layers").iter().sum();
        t.close(structural - top, h.decomposition(), 1e-10, || format!("tree {k}: entropy decomposition"));
    }
    Ok(())
}

fn ace_mi(r: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for k in 0..20 {
        let ts = small_tree(r)?;
        let h = cluster_entropy_decomposition(&ts, Unit::Bits, DEFAULT_CELL_CAP)?;
        for (l, layer) in ts.topology().clusters().iter().enumerate() {
            for c in 0..layer.len() {
                t.le(0.0, h.mutual_information(ts.topology(), l, c), 1e-12, || format!("tree {k}: cluster ({l}, {c})"));
            }
        }
    }
    Ok(())
}

fn ace_sweep(r: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for k in 0..5 {
        let ts = random_tree(r, 2, 2, 1, 2)?;
        let cands = map_sweep(&ts, 0, Unit::Bits, 1 << 16)?;
        let best_value = cands.iter().map(|c| c.value).fold(f64::INFINITY, f64::min);
        let best_mi = cands.iter().map(|c| c.mi_sum).fold(f64::NEG_INFINITY, f64::max);
        for c in &cands {
            t.close(c.value, c.structural, 1e-10, || format!("tree {k}: closed form vs enumeration"));
            // Minimisers of the objective are exactly the maximisers of Σ MI.
            let is_min = c.value <= best_value + 1e-10;
            let is_max = c.mi_sum >= best_mi - 1e-10;
            t.holds(is_min == is_max, || format!("tree {k}: maps {:?}", c.maps));
        }
    }
    Ok(())
}

fn random_pmd(r: &mut ChaCha8Rng, m: usize) -> Result<PmdConfig> {
    let k = r.random_range(1..=m);
    // Smallest half-width that still covers every output.
    let w = r.random_range(m.div_ceil(k) / 2..=m / 2);
    PmdConfig::ring_patches(m, k, w, random_prob(r, m))
}

fn random_lik(r: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    (0..m).map(|_| 0.01 + r.random::<f64>()).collect()
}

fn pmd_normalization(r: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for _ in 0..200 {
        let m = r.random_range(2..=8);
        let cfg = random_pmd(r, m)?;
        let lik = random_lik(r, m);
        t.close(pmd_posterior(&lik, &cfg)?.as_slice().iter().sum(), 1.0, 1e-12, || "pmd".into());
        t.close(bayes_posterior(&lik, &cfg)?.as_slice().iter().sum(), 1.0, 1e-12, || "bayes".into());
    }
    Ok(())
}

fn pmd_k1(r: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for _ in 0..200 {
        let m = r.random_range(2..=8);
        let cfg = PmdConfig::new(vec![vec![1.0; m]], random_prob(r, m))?;
        let lik = random_lik(r, m);
        let z: f64 = lik.iter().zip(cfg.prior().as_slice()).map(|(l, p)| l * p).sum();
        let (p, b) = (pmd_posterior(&lik, &cfg)?, bayes_posterior(&lik, &cfg)?);
        for i in 0..m {
            let e = lik[i] * cfg.prior()[i] / z;
            t.close(p[i], e, 1e-12, || format!("pmd entry {i}"));
            t.close(b[i], e, 1e-12, || format!("bayes entry {i}"));
        }
    }
    Ok(())
}

fn random_model(r: &mut ChaCha8Rng, points: usize, dim: usize) -> Result<BankModel> {
    let m = r.random_range(2..=3);
    Ok(BankModel {
        encoder: SoftEncoder::new(random_transition(r, m, points)),
        vectors: uniform_box(r, m, dim, -1.0, 1.0)?.points().to_vec(),
    })
}

fn pmd_n1(r: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for k in 0..50 {
        let data = uniform_box(r, 5, 2, -1.0, 1.0)?;
        let model = random_model(r, 5, 2)?;
        let code = GaussianCodebook::new(model.vectors.clone(), 1.0, 1.0)?;
        let d = dvq(&model.encoder, &code, &data)?;
        let bank = FactorialEncoderBank::new(vec![model.clone()])?;
        t.close(factorial_dvq_bound(&bank, &data)?, d, 1e-12, || format!("instance {k}: factorial"));
        t.close(repeated_model_bound(&model.encoder, &code, &data, 1)?, d, 1e-12, || format!("instance {k}: repeated"));
        t.close(exact_product_dvq(&bank, &data, &model.vectors, 64)?, d, 1e-12, || format!("instance {k}: product"));
    }
    Ok(())
}

fn pmd_bound_chain(r: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for k in 0..50 {
        let data = uniform_box(r, 6, 2, -1.0, 1.0)?;
        let n = r.random_range(2..=3);
        let bank = FactorialEncoderBank::new((0..n).map(|_| random_model(r, 6, 2)).collect::<Result<_>>()?)?;
        let bound = factorial_dvq_bound(&bank, &data)?;
        let avg = averaged_joint_codebook(&bank, 1 << 12)?;
        let opt = optimal_joint_codebook(&bank, &data, 1 << 12)?;
        let exact = exact_product_dvq(&bank, &data, &opt, 1 << 12)?;
        t.le(exact, bound, 1e-12, || format!("instance {k}: optimal vs bound"));
        t.close(exact_product_dvq(&bank, &data, &avg, 1 << 12)?, bound, 1e-12, || format!("instance {k}: averaged vs bound"));
        let other: Vec<Vec<f64>> = avg.iter().map(|v| v.iter().map(|x| x + 0.1 * (r.random::<f64>() - 0.5)).collect()).collect();
        t.le(exact, exact_product_dvq(&bank, &data, &other, 1 << 12)?, 1e-12, || format!("instance {k}: optimal vs other"));
    }
    Ok(())
}

fn pmd_repeated(r: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for k in 0..50 {
        let data = uniform_box(r, 5, 2, -1.0, 1.0)?;
        let model = random_model(r, 5, 2)?;
        let code = GaussianCodebook::new(model.vectors.clone(), 1.0, 1.0)?;
        let n = r.random_range(2..=5);
        let bank = FactorialEncoderBank::new(vec![model.clone(); n])?;
        t.close(
            repeated_model_bound(&model.encoder, &code, &data, n)?,
            factorial_dvq_bound(&bank, &data)?,
            1e-12,
            || format!("instance {k}: n = {n}"),
        );
    }
    Ok(())
}

fn pmd_locality(r: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for k in 0..50 {
        let cfg = PmdConfig::from_patches(&[vec![0, 1], vec![2, 3, 4]], random_prob(r, 5))?;
        let lik = random_lik(r, 5);
        let factor = 2.0 + 5.0 * r.random::<f64>();
        let scaled: Vec<f64> = lik.iter().enumerate().map(|(i, &l)| if i < 2 { l * factor } else { l }).collect();
        let (p, ps) = (pmd_posterior(&lik, &cfg)?, pmd_posterior(&scaled, &cfg)?);
        let (b, bs) = (bayes_posterior(&lik, &cfg)?, bayes_posterior(&scaled, &cfg)?);
        let mut bayes_diff: f64 = 0.0;
        for i in 0..5 {
            t.close(p[i], ps[i], 1e-12, || format!("instance {k}: pmd entry {i}"));
            bayes_diff = bayes_diff.max((b[i] - bs[i]).abs());
        }
        t.holds(bayes_diff > 1e-6, || format!("instance {k}: bayes posterior unchanged ({bayes_diff})"));
    }
    Ok(())
}

fn hm_sandwich(r: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for k in 0..1000 {
        let inst = TwoLayerInstance::new(random_chain(r, &[2, 2]))?;
        let s = sandwich_report(&inst, Unit::Bits, 1e-12)?;
        t.le(s.l00, s.d_hm, 1e-12, || format!("instance {k}: lower"));
        t.le(s.d_hm, s.lpq, 1e-12, || format!("instance {k}: upper"));
        t.close(s.lower_gap, s.reversal_divergence, 1e-12, || format!("instance {k}: lower gap identity"));
        t.close(s.upper_gap, s.conditional_entropy, 1e-12, || format!("instance {k}: upper gap identity"));
    }
    Ok(())
}

fn hm_decomp(r: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for k in 0..300 {
        let sizes = [r.random_range(2..=4), r.random_range(2..=4)];
        let inst = TwoLayerInstance::new(random_chain(r, &sizes))?;
        let d = hm_decomposition(&inst, Unit::Bits)?;
        t.close(d.total(), crate::helmholtz::d_hm(&inst, Unit::Bits)?, 1e-12, || format!("instance {k}: sum"));
        t.le(0.0, d.distributed_term, 1e-12, || format!("instance {k}: distributed term"));
    }
    Ok(())
}

fn hm_degenerate(r: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for k in 0..50 {
        let m0 = r.random_range(2..=5);
        let m1 = r.random_range(1..=m0);
        let inst = TwoLayerInstance::new(random_deterministic_chain(r, &[m0, m1])?)?;
        let s = sandwich_report(&inst, Unit::Bits, 1e-12)?;
        t.close(s.l00, s.d_hm, 1e-12, || format!("instance {k}: lower"));
        t.close(s.d_hm, s.lpq, 1e-12, || format!("instance {k}: upper"));
    }
    Ok(())
}
