use markov_coder::verify::{run_verify, verify_chain_fixture, CheckResult};
use serde::Serialize;

use crate::config::{load, VerifyFile};
use crate::error::Result;
use crate::output::OutDir;
use crate::Ctx;

#[derive(Serialize)]
struct Report<'a> {
    seed: u64,
    scope: &'a str,
    passed: bool,
    failing: Vec<&'a str>,
    checks: &'a [CheckResult],
}

/// Runs the suite and any fixtures; returns the output dir and whether
/// everything passed.
pub fn run(ctx: &Ctx, scope: &str) -> Result<(OutDir, bool)> {
    let seed = ctx.seed.unwrap_or(0);
    let fixtures = match &ctx.config {
        Some(p) => load::<VerifyFile>(p)?.0.fixtures,
        None => Vec::new(),
    };
    let mut checks = run_verify(scope, seed)?.checks;
    for f in &fixtures {
        checks.extend(verify_chain_fixture(f));
    }
    for c in &checks {
        let tag = if c.passed { "ok  " } else { "FAIL" };
        println!("{tag} {:<36} cases={:<5} max_err={:.3e}  {}", c.id, c.cases, c.max_error, c.title);
        for f in &c.failures {
            println!("       {f}");
        }
    }
    let failing: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.id.as_str()).collect();
    let passed = failing.is_empty();
    println!("{} of {} checks passed", checks.len() - failing.len(), checks.len());
    if !passed {
        eprintln!("failing checks: {}", failing.join(", "));
    }
    let mut out = OutDir::new(ctx.out.clone());
    out.json("verify.json", &Report { seed, scope, passed, failing, checks: &checks })?;
    Ok((out, passed))
}
