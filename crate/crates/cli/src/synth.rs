use markov_coder::ace::TreeSourceDoc;
use markov_coder::chain::ChainDoc;
use markov_coder::synth::{random_chain, random_deterministic_chain, random_tree, rng};
use serde::de::DeserializeOwned;

use crate::config::{factor_data, gmm_data, load, uniform_data, ChainParams, TreeParams};
use crate::error::{CliError, Result};
use crate::output::OutDir;
use crate::{Ctx, SynthKind};

fn params<T: DeserializeOwned + Default>(ctx: &Ctx) -> Result<T> {
    match &ctx.config {
        Some(p) => Ok(load(p)?.0),
        None => Ok(T::default()),
    }
}

pub fn run(ctx: &Ctx, kind: SynthKind) -> Result<OutDir> {
    let seed = ctx.seed.unwrap_or(0);
    let mut out = OutDir::new(ctx.out.clone());
    match kind {
        SynthKind::Uniform => out.json("uniform.json", &uniform_data(&params(ctx)?, seed)?)?,
        SynthKind::Gmm => out.json("gmm.json", &gmm_data(&params(ctx)?, seed)?)?,
        SynthKind::Factors => out.json("factors.json", &factor_data(&params(ctx)?, seed)?)?,
        SynthKind::Chain => {
            let p: ChainParams = params(ctx)?;
            if p.sizes.len() < 2 || p.sizes.contains(&0) {
                return Err(CliError::Usage(format!("chain sizes need at least two positive entries, got {:?}", p.sizes)));
            }
            let mut r = rng(seed);
            let c = if p.deterministic { random_deterministic_chain(&mut r, &p.sizes)? } else { random_chain(&mut r, &p.sizes) };
            out.json("chain.json", &ChainDoc::from(&c))?;
        }
        SynthKind::Tree => {
            let p: TreeParams = params(ctx)?;
            let t = random_tree(&mut rng(seed), p.nodes, p.alphabet, p.depth, p.max_alphabet)?;
            out.json("tree.json", &TreeSourceDoc::from(&t))?;
        }
    }
    Ok(out)
}
