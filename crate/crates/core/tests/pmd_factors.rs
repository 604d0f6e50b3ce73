use markov_coder::pmd::{factor_alignment, train_pmd_stage, PmdConfig, PmdTrainConfig};
use markov_coder::synth::{rng, two_factors};
use markov_coder::ProbVector;

/// Each patch's reconstruction is explained by a different ground-truth
/// factor, and better by its own factor than by the other one.
fn aligned(al: &[Vec<f64>]) -> bool {
    (al[0][0] > al[0][1] && al[1][1] > al[1][0]) || (al[0][1] > al[0][0] && al[1][0] > al[1][1])
}

fn run(seed: u64) -> Vec<Vec<f64>> {
    let (data, labels) = two_factors(&mut rng(100 + seed), 300, &[-1.0, 0.0, 1.0], 0.1).unwrap();
    let cfg = PmdConfig::from_patches(&[vec![0, 1, 2], vec![3, 4, 5]], ProbVector::uniform(6).unwrap()).unwrap();
    let mut tc = PmdTrainConfig::new(cfg, 0.8, 40);
    tc.sigma_ratio = 0.97;
    let out = train_pmd_stage(&data, &tc, seed).unwrap();
    factor_alignment(&out.patches, &out.codebook, &data, &labels).unwrap()
}

#[test]
fn two_patches_recover_two_factors() {
    let al = run(3);
    assert!(aligned(&al), "{al:?}");
    let own = al[0][0].max(al[0][1]).min(al[1][0].max(al[1][1]));
    assert!(own > 0.9, "{al:?}");
}

#[test]
fn factor_recovery_is_typical() {
    let hits = (0..10).filter(|&s| aligned(&run(s))).count();
    assert!(hits >= 8, "{hits}/10 seeds aligned");
}
