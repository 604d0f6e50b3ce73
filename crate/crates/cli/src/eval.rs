use markov_coder::ace::{ace_tree_objective, cluster_entropy_decomposition, tree_objective_structural, TreeSource, TreeSourceDoc};
use markov_coder::chain::{
    input_code_length, joint_source, objective_bruteforce, objective_forward, objective_reversed_terms, ChainDoc,
    LayeredChain, DEFAULT_CELL_CAP,
};
use markov_coder::helmholtz::{hm_decomposition, sandwich_report, TwoLayerInstance};
use markov_coder::prob::Unit;
use markov_coder::topo::skip_identity_check;
use serde::Serialize;

use crate::config::{load, SkipSpec};
use crate::error::{CliError, Result};
use crate::output::{num, OutDir, Table};
use crate::{Ctx, EvalKind};

#[derive(Serialize)]
struct ChainReport {
    unit: Unit,
    layer_sizes: Vec<usize>,
    total: f64,
    total_forward: f64,
    layer_terms: Vec<f64>,
    top_term: f64,
    input_code_length: f64,
    /// Only when the joint table fits under the cell cap.
    joint_source_entropy: Option<f64>,
    total_bruteforce: Option<f64>,
}

#[derive(Serialize)]
struct AceReport {
    unit: Unit,
    value: f64,
    mi_sum: f64,
    h0_sum: f64,
    /// Enumeration of the tree written as a flat chain.
    structural: f64,
    /// `[layer][cluster]` mutual information, layers 1 and up.
    cluster_mi: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct HmReport {
    unit: Unit,
    l00: f64,
    d_hm: f64,
    lpq: f64,
    lower_gap: f64,
    upper_gap: f64,
    reversal_divergence: f64,
    conditional_entropy: f64,
    sparse_term: f64,
    distributed_term: f64,
    holds: bool,
}

fn chain_report(c: &LayeredChain, unit: Unit) -> Result<ChainReport> {
    let terms = objective_reversed_terms(c)?;
    let joint = joint_source(c, DEFAULT_CELL_CAP).ok();
    Ok(ChainReport {
        unit,
        layer_sizes: c.layer_sizes().to_vec(),
        total: unit.from_nats(terms.total()),
        total_forward: objective_forward(c, unit)?,
        layer_terms: terms.layer_terms.iter().map(|&t| unit.from_nats(t)).collect(),
        top_term: unit.from_nats(terms.top_term),
        input_code_length: input_code_length(c, unit)?,
        joint_source_entropy: joint.map(|j| j.entropy(unit)),
        total_bruteforce: objective_bruteforce(c, unit, DEFAULT_CELL_CAP).ok(),
    })
}

fn print_line(name: &str, v: f64, unit: Unit) {
    println!("{name:<24} {v:.12} {}", unit.name());
}

pub fn run(ctx: &Ctx, kind: EvalKind) -> Result<OutDir> {
    let path = ctx.config.as_deref().ok_or_else(|| CliError::Usage("eval needs --config PATH (the spec file)".into()))?;
    let unit = ctx.unit.unwrap_or_default();
    let mut out = OutDir::new(ctx.out.clone());
    match kind {
        EvalKind::Chain => {
            let (doc, _): (ChainDoc, _) = load(path)?;
            let r = chain_report(&LayeredChain::try_from(doc)?, unit)?;
            print_line("total", r.total, unit);
            for (l, t) in r.layer_terms.iter().enumerate() {
                print_line(&format!("layer_term[{l}]"), *t, unit);
            }
            print_line("top_term", r.top_term, unit);
            print_line("input_code_length", r.input_code_length, unit);
            if let Some(h) = r.joint_source_entropy {
                print_line("joint_source_entropy", h, unit);
            }
            out.json("eval_chain.json", &r)?;
        }
        EvalKind::Skip => {
            let (spec, _): (SkipSpec, _) = load(path)?;
            let r = skip_identity_check(&spec.points, &LayeredChain::try_from(spec.chain)?, 1e-9)?;
            println!("layer02_centroid        {:.12}", r.layer02_centroid);
            println!("layer02_two_sided       {:.12}", r.layer02_two_sided);
            println!("dummy_layer1            {:.12}", r.dummy_layer1);
            println!("layer01_leaked          {:.12}", r.layer01_leaked);
            println!("layer01_leaked_centroid {:.12}", r.layer01_leaked_centroid);
            println!("agrees                  {} (max diff {:e})", r.agrees, r.max_abs_diff);
            out.json("eval_skip.json", &r)?;
        }
        EvalKind::Ace => {
            let (doc, _): (TreeSourceDoc, _) = load(path)?;
            let ts = TreeSource::try_from(doc)?;
            let v = ace_tree_objective(&ts, unit, DEFAULT_CELL_CAP)?;
            let h = cluster_entropy_decomposition(&ts, unit, DEFAULT_CELL_CAP)?;
            let topo = ts.topology();
            let cluster_mi = (1..=topo.depth())
                .map(|l| (0..topo.clusters()[l].len()).map(|c| h.mutual_information(topo, l, c)).collect())
                .collect();
            let r = AceReport {
                unit,
                value: v.value,
                mi_sum: v.mi_sum,
                h0_sum: v.h0_sum,
                structural: tree_objective_structural(&ts, unit, DEFAULT_CELL_CAP)?,
                cluster_mi,
            };
            print_line("value", r.value, unit);
            print_line("h0_sum", r.h0_sum, unit);
            print_line("mi_sum", r.mi_sum, unit);
            print_line("structural", r.structural, unit);
            out.json("eval_ace.json", &r)?;
        }
        EvalKind::Hm => {
            let (doc, _): (ChainDoc, _) = load(path)?;
            let inst = TwoLayerInstance::new(LayeredChain::try_from(doc)?)?;
            let s = sandwich_report(&inst, unit, 1e-12)?;
            let d = hm_decomposition(&inst, unit)?;
            let r = HmReport {
                unit,
                l00: s.l00,
                d_hm: s.d_hm,
                lpq: s.lpq,
                lower_gap: s.lower_gap,
                upper_gap: s.upper_gap,
                reversal_divergence: s.reversal_divergence,
                conditional_entropy: s.conditional_entropy,
                sparse_term: d.sparse_term,
                distributed_term: d.distributed_term,
                holds: s.holds,
            };
            print_line("L(P0,Q0)", r.l00, unit);
            print_line("D_HM", r.d_hm, unit);
            print_line("L(P,Q)", r.lpq, unit);
            print_line("lower_gap", r.lower_gap, unit);
            print_line("upper_gap", r.upper_gap, unit);
            println!("sandwich holds           {}", r.holds);
            out.json("eval_hm.json", &r)?;
            let mut t = Table::new(["l00", "d_hm", "lpq", "lower_gap", "upper_gap", "sparse_term", "distributed_term"]);
            t.push([r.l00, r.d_hm, r.lpq, r.lower_gap, r.upper_gap, r.sparse_term, r.distributed_term].map(num).to_vec());
            out.csv("eval_hm.csv", &t)?;
        }
    }
    Ok(out)
}
