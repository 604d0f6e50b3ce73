use std::path::Path;

use markov_coder::ladder::{train_ladder, LadderConfig};
use markov_coder::pmd::{factor_alignment, train_pmd_stage, PmdTrainConfig};
use markov_coder::prob::Unit;
use markov_coder::topo::{topo_trace_is_monotone, train_topo_map, OrderingMetrics, TopoConfig};
use markov_coder::vq::{train_soft_vq, trace_is_monotone, GaussianCodebook, SoftVqConfig, TraceRow};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::config::{load, DatasetDoc, TrainFile};
use crate::error::{CliError, Result};
use crate::output::{config_hash, num, OutDir, Table};
use crate::{Ctx, TrainKind};

#[derive(Serialize)]
struct FinalTerms {
    dvq: f64,
    distortion_term: f64,
    code_length_term: f64,
    constant_term: f64,
    total: f64,
}

impl FinalTerms {
    fn from_row(r: &TraceRow, unit: Unit) -> Self {
        Self {
            dvq: r.dvq,
            distortion_term: unit.from_nats(r.distortion_term),
            code_length_term: unit.from_nats(r.code_length_term),
            constant_term: unit.from_nats(r.constant_term),
            total: unit.from_nats(r.total),
        }
    }
}

#[derive(Serialize)]
struct FinalOnly<T: Serialize> {
    #[serde(rename = "final")]
    last: T,
}

#[derive(Serialize)]
struct Summary<T: Serialize> {
    kind: &'static str,
    seed: u64,
    unit: Unit,
    config_hash: String,
    iterations: usize,
    respawns: usize,
    /// Trace non-increasing (1e-9) wherever the width and leakage are fixed.
    monotone: Option<bool>,
    #[serde(flatten)]
    extra: T,
}

#[derive(Serialize)]
struct CodebookOut<'a> {
    #[serde(flatten)]
    codebook: &'a GaussianCodebook,
    prior: &'a [f64],
}

fn trace_header(unit: Unit, leading: &[&str]) -> Vec<String> {
    let mut h: Vec<String> = leading.iter().map(|s| s.to_string()).collect();
    h.extend(["iteration", "sigma", "dvq", "distortion_term", "code_length_term", "constant_term"].map(String::from));
    h.push(format!("total_{}", unit.name()));
    h
}

fn trace_cells(r: &TraceRow, unit: Unit) -> Vec<String> {
    vec![
        r.iteration.to_string(),
        num(r.sigma),
        num(r.dvq),
        num(unit.from_nats(r.distortion_term)),
        num(unit.from_nats(r.code_length_term)),
        num(unit.from_nats(r.constant_term)),
        num(unit.from_nats(r.total)),
    ]
}

fn vq_table(trace: &[TraceRow], unit: Unit) -> Table {
    let mut t = Table::new(trace_header(unit, &[]));
    for r in trace {
        t.push(trace_cells(r, unit));
    }
    t
}

struct Loaded<T> {
    model: T,
    data: DatasetDoc,
    seed: u64,
    unit: Unit,
    hash: String,
}

fn load_train<T: DeserializeOwned>(ctx: &Ctx, kind: &str) -> Result<Loaded<T>> {
    let path = ctx.config.as_deref().ok_or_else(|| CliError::Usage(format!("train {kind} needs --config PATH")))?;
    let (file, raw): (TrainFile<T>, _) = load(path)?;
    let seed = ctx.seed.or(file.seed).unwrap_or(0);
    let unit = ctx.unit.or(file.unit).unwrap_or_default();
    let base = path.parent().unwrap_or(Path::new("."));
    let data = file.data.resolve(base, seed)?;
    Ok(Loaded { model: file.model, data, seed, unit, hash: config_hash(&format!("train {kind}"), &raw, seed) })
}

/// The trainer draws from its own stream so its initial codebook sample is
/// independent of the generator that produced the data.
fn trainer_seed(seed: u64) -> u64 {
    seed.wrapping_add(1)
}

pub fn run(ctx: &Ctx, kind: TrainKind) -> Result<OutDir> {
    let mut out = OutDir::new(ctx.out.clone());
    match kind {
        TrainKind::Vq => {
            let l: Loaded<SoftVqConfig> = load_train(ctx, "vq")?;
            let r = train_soft_vq(&l.data.input()?, &l.model, trainer_seed(l.seed))?;
            let last = r.trace.last().expect("at least one iteration");
            out.json("codebook.json", &CodebookOut { codebook: &r.codebook, prior: r.prior.as_slice() })?;
            out.csv("trace.csv", &vq_table(&r.trace, l.unit))?;
            out.json(
                "summary.json",
                &Summary {
                    kind: "vq",
                    seed: l.seed,
                    unit: l.unit,
                    config_hash: l.hash,
                    iterations: r.trace.len(),
                    respawns: r.respawns,
                    monotone: (l.model.sigma_ratio == 1.0).then(|| trace_is_monotone(&r.trace, 1e-9)),
                    extra: FinalOnly { last: FinalTerms::from_row(last, l.unit) },
                },
            )?;
        }
        TrainKind::Topo => {
            let l: Loaded<TopoConfig> = load_train(ctx, "topo")?;
            let r = train_topo_map(&l.data.input()?, &l.model, trainer_seed(l.seed))?;
            let last = r.trace.last().expect("at least one iteration");
            let uniform = vec![1.0 / r.codebook.len() as f64; r.codebook.len()];
            out.json("codebook.json", &CodebookOut { codebook: &r.codebook, prior: &uniform })?;
            let mut t = Table::new(trace_header(l.unit, &["phase"]));
            for row in &r.trace {
                let mut cells = vec![row.phase.to_string()];
                cells.extend(trace_cells(&row.row, l.unit));
                t.push(cells);
            }
            out.csv("trace.csv", &t)?;
            #[derive(Serialize)]
            struct Extra {
                #[serde(rename = "final")]
                last: FinalTerms,
                ordering_metrics: OrderingMetrics,
            }
            out.json(
                "summary.json",
                &Summary {
                    kind: "topo",
                    seed: l.seed,
                    unit: l.unit,
                    config_hash: l.hash,
                    iterations: r.trace.len(),
                    respawns: r.respawns,
                    monotone: (l.model.sigma_ratio == 1.0).then(|| topo_trace_is_monotone(&r.trace, 1e-9)),
                    extra: Extra { last: FinalTerms::from_row(&last.row, l.unit), ordering_metrics: r.ordering },
                },
            )?;
        }
        TrainKind::Ladder => {
            let l: Loaded<LadderConfig> = load_train(ctx, "ladder")?;
            let r = train_ladder(&l.data.input()?, &l.model, trainer_seed(l.seed))?;
            let stages = r.ladder.stages();
            #[derive(Serialize)]
            struct LadderOut<'a> {
                stages: Vec<&'a GaussianCodebook>,
                top_prior: &'a [f64],
            }
            out.json(
                "codebook.json",
                &LadderOut { stages: stages.iter().map(|s| &s.codebook).collect(), top_prior: r.ladder.top_prior().as_slice() },
            )?;
            let mut header = vec!["sweep".to_string()];
            for k in 0..stages.len() {
                header.extend([format!("stage{k}_dvq"), format!("stage{k}_distortion_term"), format!("stage{k}_constant_term")]);
            }
            header.extend(["top_term".to_string(), format!("total_{}", l.unit.name())]);
            let mut t = Table::new(header);
            for row in &r.trace {
                let mut cells = vec![row.sweep.to_string()];
                for s in &row.terms.stages {
                    cells.extend([num(s.dvq), num(l.unit.from_nats(s.distortion_term)), num(l.unit.from_nats(s.constant_term))]);
                }
                cells.extend([num(l.unit.from_nats(row.terms.top_term)), num(l.unit.from_nats(row.total))]);
                t.push(cells);
            }
            out.csv("trace.csv", &t)?;
            let last = r.trace.last().expect("at least one sweep");
            #[derive(Serialize)]
            struct LadderFinal {
                top_term: f64,
                total: f64,
            }
            let monotone = r.trace.windows(2).all(|w| w[1].total <= w[0].total + 1e-9);
            out.json(
                "summary.json",
                &Summary {
                    kind: "ladder",
                    seed: l.seed,
                    unit: l.unit,
                    config_hash: l.hash,
                    iterations: r.trace.len(),
                    respawns: r.respawns,
                    monotone: Some(monotone),
                    extra: FinalOnly { last: LadderFinal { top_term: l.unit.from_nats(last.terms.top_term), total: l.unit.from_nats(last.total) } },
                },
            )?;
        }
        TrainKind::Pmd => {
            let l: Loaded<PmdTrainConfig> = load_train(ctx, "pmd")?;
            let input = l.data.input()?;
            let r = train_pmd_stage(&input, &l.model, trainer_seed(l.seed))?;
            out.json("codebook.json", &CodebookOut { codebook: &r.codebook, prior: l.model.pmd.prior().as_slice() })?;
            out.csv("trace.csv", &vq_table(&r.trace, l.unit))?;
            let alignment = match &l.data.labels {
                Some(labels) => Some(factor_alignment(&r.patches, &r.codebook, &input, labels)?),
                None => None,
            };
            let last = r.trace.last();
            #[derive(Serialize)]
            struct Extra {
                #[serde(rename = "final")]
                last: Option<FinalTerms>,
                /// `[patch][factor]` explained-variance fraction.
                factor_alignment: Option<Vec<Vec<f64>>>,
            }
            out.json(
                "summary.json",
                &Summary {
                    kind: "pmd",
                    seed: l.seed,
                    unit: l.unit,
                    config_hash: l.hash,
                    iterations: r.trace.len(),
                    respawns: r.respawns,
                    monotone: None,
                    extra: Extra { last: last.map(|x| FinalTerms::from_row(x, l.unit)), factor_alignment: alignment },
                },
            )?;
        }
    }
    Ok(out)
}
