use markov_coder::chain::{input_code_length, objective_forward, objective_reversed, LayeredChain};
use markov_coder::helmholtz::{sandwich_report, TwoLayerInstance};
use markov_coder::pmd::{bayes_posterior, pmd_posterior, PmdConfig};
use markov_coder::prob::{bayes_reverse, code_length, entropy, relative_entropy, ProbVector, TransitionMatrix, Unit};
use proptest::prelude::*;

fn weights(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, m)
}

fn dist(m: usize) -> impl Strategy<Value = ProbVector> {
    weights(m).prop_map(|w| ProbVector::renormalize(w).unwrap())
}

fn transition(rows: usize, cols: usize) -> impl Strategy<Value = TransitionMatrix> {
    prop::collection::vec(weights(rows), cols).prop_map(|c| TransitionMatrix::renormalize_columns(c).unwrap())
}

fn pair(m: usize) -> impl Strategy<Value = (ProbVector, ProbVector)> {
    (dist(m), dist(m))
}

/// Three-layer chain with sizes in 2..=4.
fn chain() -> impl Strategy<Value = LayeredChain> {
    (2usize..=4, 2usize..=4, 2usize..=4).prop_flat_map(|(a, b, c)| {
        (dist(a), transition(b, a), transition(c, b), transition(a, b), transition(b, c), dist(c)).prop_map(
            |(p0, f1, f2, g1, g2, top)| LayeredChain::new(p0, vec![f1, f2], vec![g1, g2], top).unwrap(),
        )
    })
}

/// `−Σ P log Q` over every joint cell `(i0, i1, i2)`.
fn cross_entropy_by_cells(c: &LayeredChain) -> f64 {
    let (f, g) = (c.source_forward(), c.model_backward());
    let s = c.layer_sizes();
    let mut total = 0.0;
    for i0 in 0..s[0] {
        for i1 in 0..s[1] {
            for i2 in 0..s[2] {
                let p = c.source_prior().as_slice()[i0] * f[0].get(i1, i0) * f[1].get(i2, i1);
                let q = c.model_top().as_slice()[i2] * g[1].get(i1, i2) * g[0].get(i0, i1);
                total -= p * q.ln();
            }
        }
    }
    total
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn gibbs_and_split((p, q) in (2usize..8).prop_flat_map(pair)) {
        let g = relative_entropy(&p, &q, Unit::Nats).unwrap();
        prop_assert!(g >= 0.0);
        let l = code_length(&p, &q, Unit::Nats).unwrap();
        let by_hand: f64 = p.as_slice().iter().zip(q.as_slice()).map(|(a, b)| -a * b.ln()).sum();
        prop_assert!((l - by_hand).abs() < 1e-12);
        prop_assert!((l - entropy(&p, Unit::Nats) - g).abs() < 1e-12);
    }

    #[test]
    fn bits_are_scaled_nats((p, q) in (1usize..8).prop_flat_map(pair)) {
        let n = code_length(&p, &q, Unit::Nats).unwrap();
        let b = code_length(&p, &q, Unit::Bits).unwrap();
        prop_assert!((b * std::f64::consts::LN_2 - n).abs() < 1e-12);
    }

    #[test]
    fn bayes_reverse_is_joint_preserving(
        (t, prior) in (2usize..5, 2usize..5).prop_flat_map(|(r, c)| (transition(r, c), dist(c)))
    ) {
        let (rev, m) = bayes_reverse(&t, &prior).unwrap();
        for i in 0..t.cols() {
            for o in 0..t.rows() {
                let fwd = prior.as_slice()[i] * t.get(o, i);
                let back = m.as_slice()[o] * rev.get(i, o);
                prop_assert!((fwd - back).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn chain_objectives_match_enumeration(c in chain()) {
        let oracle = cross_entropy_by_cells(&c);
        let rev = objective_reversed(&c, Unit::Nats).unwrap();
        prop_assert!((rev - oracle).abs() < 1e-10, "{rev} vs {oracle}");
        prop_assert!((objective_forward(&c, Unit::Nats).unwrap() - rev).abs() < 1e-10);
        prop_assert!(input_code_length(&c, Unit::Nats).unwrap() <= rev + 1e-12);
    }

    #[test]
    fn helmholtz_sandwich(
        c in (2usize..5, 2usize..5).prop_flat_map(|(a, b)| (dist(a), transition(b, a), transition(a, b), dist(b)))
            .prop_map(|(p0, f, g, top)| LayeredChain::new(p0, vec![f], vec![g], top).unwrap())
    ) {
        let s = sandwich_report(&TwoLayerInstance::new(c).unwrap(), Unit::Nats, 1e-12).unwrap();
        prop_assert!(s.holds, "{s:?}");
    }

    #[test]
    fn pmd_posterior_ignores_patch_scaling(
        lik in weights(6),
        prior in dist(6),
        scale in 0.1f64..10.0,
    ) {
        let cfg = PmdConfig::from_patches(&[vec![0, 1, 2], vec![2, 3, 4, 5]], prior).unwrap();
        let p = pmd_posterior(&lik, &cfg).unwrap();
        prop_assert!((p.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!((bayes_posterior(&lik, &cfg).unwrap().as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let scaled: Vec<f64> = lik.iter().map(|l| l * scale).collect();
        let ps = pmd_posterior(&scaled, &cfg).unwrap();
        for (a, b) in p.as_slice().iter().zip(ps.as_slice()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
