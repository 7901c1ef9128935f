use std::f64::consts::SQRT_2;

use blind_mimo::assignment::max_score_assignment;
use blind_mimo::optimizer::step_metrics;
use blind_mimo::rng::{substream, Stream};
use blind_mimo::{
    correlation_matrix, generate_channel, log_likelihood_laplacian, synthesize_received,
    CorrelationMatrix, Matrix, ReceivedBlock, ScenarioConfig, SymbolBlock, UnmixingMatrix,
};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-3.0f64..3.0, rows * cols)
        .prop_map(move |v| Matrix::from_vec(rows, cols, v))
}

/// Square `B` bounded away from singular, plus a block `Y`.
fn instance() -> impl Strategy<Value = (UnmixingMatrix, ReceivedBlock)> {
    (1usize..=6, 1usize..=24).prop_flat_map(|(k, t)| {
        (matrix(k, k), matrix(k, t)).prop_filter_map("near-singular B", |(b, y)| {
            let n = b.nrows();
            let b = b + Matrix::identity(n, n) * 4.0;
            blind_mimo::linalg::log_abs_det(&b).ok()?;
            Some((UnmixingMatrix::new(b).ok()?, ReceivedBlock::new(y)))
        })
    })
}

fn signed_permutation(k: usize) -> impl Strategy<Value = Matrix> {
    (
        Just((0..k).collect::<Vec<_>>()).prop_shuffle(),
        prop::collection::vec(any::<bool>(), k),
    )
        .prop_map(move |(order, flips)| {
            let mut p = Matrix::zeros(k, k);
            for (i, (&j, &f)) in order.iter().zip(&flips).enumerate() {
                p[(i, j)] = if f { -1.0 } else { 1.0 };
            }
            p
        })
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn likelihood_ignores_signed_row_permutations(
        ((b, y), p) in instance().prop_flat_map(|inst| {
            let k = inst.0.users();
            (Just(inst), signed_permutation(k))
        })
    ) {
        let pb = UnmixingMatrix::new(&p * b.as_matrix()).unwrap();
        let a = log_likelihood_laplacian(&b, &y).unwrap();
        let c = log_likelihood_laplacian(&pb, &y).unwrap();
        prop_assert!((a - c).abs() <= 1e-9, "{a} vs {c}");
    }

    #[test]
    fn likelihood_is_additive_over_columns((b, y) in instance(), cut in 0.0f64..1.0) {
        let t = y.block_len();
        let split = (cut * t as f64) as usize;
        let left = ReceivedBlock::new(y.entries.columns(0, split).into_owned());
        let right = ReceivedBlock::new(y.entries.columns(split, t - split).into_owned());
        let whole = log_likelihood_laplacian(&b, &y).unwrap();
        let parts = log_likelihood_laplacian(&b, &left).unwrap() + log_likelihood_laplacian(&b, &right).unwrap();
        prop_assert!((whole - parts).abs() <= 1e-9);
    }

    #[test]
    fn likelihood_scale_covariance((b, y) in instance(), c in 0.1f64..5.0) {
        let k = b.users() as f64;
        let t = y.block_len() as f64;
        let l1: f64 = (b.as_matrix() * &y.entries).iter().map(|v| v.abs()).sum();
        let log_det = blind_mimo::linalg::log_abs_det(b.as_matrix()).unwrap();
        let scaled = UnmixingMatrix::new(b.as_matrix() * c).unwrap();
        let expected = k * t * c.ln() - c * SQRT_2 * l1 + t * log_det;
        let got = log_likelihood_laplacian(&scaled, &y).unwrap();
        prop_assert!((got - expected).abs() <= 1e-9, "{got} vs {expected}");
    }

    #[test]
    fn correlations_are_bounded(
        (x, xh) in (1usize..=5, 1usize..=30).prop_flat_map(|(k, t)| (matrix(k, t), matrix(k, t)))
    ) {
        let x = SymbolBlock::single_cell(x);
        if let Ok(rho) = correlation_matrix(&x, &xh) {
            prop_assert!(rho.as_matrix().iter().all(|v| v.abs() <= 1.0 + 1e-12));
        }
    }

    #[test]
    fn assignment_is_optimal(score in (1usize..=6).prop_flat_map(|k| {
        prop::collection::vec(0.0f64..1.0, k * k).prop_map(move |v| Matrix::from_vec(k, k, v))
    })) {
        let k = score.nrows();
        let total = |p: &[usize]| p.iter().enumerate().map(|(i, &j)| score[(i, j)]).sum::<f64>();
        let got = max_score_assignment(&score);
        let best = permutations(k).iter().map(|p| total(p)).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((total(&got) - best).abs() <= 1e-12);
        let rho = CorrelationMatrix::new(score.clone()).unwrap();
        prop_assert_eq!(blind_mimo::match_permutation(&rho).permutation, got);
    }

    #[test]
    fn noiseless_synthesis_is_linear(seed in any::<u64>(), a in matrix(4, 9), b in matrix(4, 9)) {
        let config = ScenarioConfig::single_cell(4, 9, seed);
        let h = generate_channel(&config, &mut substream(seed, Stream::Channel)).unwrap();
        let mut rng = substream(seed, Stream::Noise);
        let ya = synthesize_received(&h, &SymbolBlock::single_cell(a.clone()), &config, &mut rng).unwrap();
        let yb = synthesize_received(&h, &SymbolBlock::single_cell(b.clone()), &config, &mut rng).unwrap();
        let ysum = synthesize_received(&h, &SymbolBlock::single_cell(&a + &b), &config, &mut rng).unwrap();
        prop_assert!((ysum.entries - (ya.entries + yb.entries)).amax() <= 1e-12);
    }

    #[test]
    fn average_step_never_exceeds_maximum(a in matrix(3, 3), b in matrix(3, 3)) {
        let (avg, max) = step_metrics(&UnmixingMatrix::new(a).unwrap(), &UnmixingMatrix::new(b).unwrap());
        prop_assert!(avg <= max);
    }
}
