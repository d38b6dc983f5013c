use malnet_core::graph::{barabasi_albert, watts_strogatz, Graph};
use malnet_core::loss::{build_matrices, decision_loss, expected_loss, qp_form, realized_loss, LossMatrices, LossWeights};
use malnet_core::numerics::Vector;
use malnet_core::oracle::brute_force;
use malnet_core::pgd::{self, GradientMode, PgdConfig};
use malnet_core::relax::{randomized_round, round_projection, solve_qcqp};
use malnet_core::uncertainty::{sample_configuration, MaliciousnessModel};
use proptest::prelude::*;

fn instance(n: usize, edges: &[(usize, usize)], mu: &[f64]) -> (Graph, MaliciousnessModel, LossMatrices) {
    let g = Graph::from_edges(n, edges.iter().copied()).unwrap();
    let model = MaliciousnessModel::independent(Vector::from_row_slice(mu)).unwrap();
    let mats = build_matrices(&g, &model).unwrap();
    (g, model, mats)
}

fn arb_instance(max_n: usize) -> impl Strategy<Value = (usize, Vec<(usize, usize)>, Vec<f64>)> {
    (2..=max_n).prop_flat_map(|n| {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
        let m = pairs.len();
        (
            Just(n),
            proptest::sample::subsequence(pairs, 0..=m),
            proptest::collection::vec(0.0f64..=1.0, n),
        )
    })
}

fn arb_weights() -> impl Strategy<Value = LossWeights> {
    (0.0f64..1.0, 0.0f64..1.0, 0.01f64..1.0).prop_map(|(a, b, c)| LossWeights::normalized(a, b, c).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quadratic_form_reproduces_loss_on_binary_decisions(
        (n, edges, mu) in arb_instance(8),
        w in arb_weights(),
        mask in any::<u32>(),
    ) {
        let (_, _, mats) = instance(n, &edges, &mu);
        let qp = qp_form(&mats, &w);
        let s: Vec<u8> = (0..n).map(|i| ((mask >> i) & 1) as u8).collect();
        let sv = Vector::from_iterator(n, s.iter().map(|&x| x as f64));
        let direct = decision_loss(&mats, &w, &s).unwrap();
        prop_assert!((qp.objective(&sv) - direct).abs() <= 1e-10 * (1.0 + direct.abs()));
        prop_assert!((qp.objective_unsymmetrized(&sv) - direct).abs() <= 1e-10 * (1.0 + direct.abs()));
    }

    #[test]
    fn relaxation_sandwiches_the_optimum(
        (n, edges, mu) in arb_instance(9),
        w in arb_weights(),
        seed in any::<u64>(),
    ) {
        let (_, _, mats) = instance(n, &edges, &mu);
        let oracle = brute_force(&mats, &w).unwrap();
        let sol = solve_qcqp(&qp_form(&mats, &w)).unwrap();
        let v = oracle.v_star;
        prop_assert!(sol.lower_bound <= v + 1e-8 * (1.0 + v.abs()));
        let proj = round_projection(&sol.s_star, &mats, &w).unwrap();
        let rand = randomized_round(&sol.s_star, &mats, &w, 8, seed).unwrap();
        let mint = pgd::solve(&mats, &w, &PgdConfig { restarts: 4, ..PgdConfig::default() }, seed).unwrap();
        for loss in [proj.expected_loss, rand.expected_loss, mint.loss] {
            prop_assert!(loss >= v - 1e-10);
        }
    }

    #[test]
    fn exact_gradient_matches_finite_differences(
        (n, edges, mu) in arb_instance(10),
        w in arb_weights(),
        point in proptest::collection::vec(0.0f64..=1.0, 10),
    ) {
        let (_, _, mats) = instance(n, &edges, &mu);
        let s = Vector::from_row_slice(&point[..n]);
        let grad = pgd::gradient(&mats, &w, &s, GradientMode::Exact).unwrap().total();
        let h = 1e-6;
        for i in 0..n {
            let mut plus = s.clone();
            let mut minus = s.clone();
            plus[i] += h;
            minus[i] -= h;
            let fd = (expected_loss(&mats, &w, &plus).unwrap() - expected_loss(&mats, &w, &minus).unwrap()) / (2.0 * h);
            prop_assert!((grad[i] - fd).abs() <= 1e-5 * (1.0 + fd.abs()), "coord {i}: {} vs {fd}", grad[i]);
        }
    }

    #[test]
    fn box_projection_is_non_expansive(
        pair in (1usize..=64).prop_flat_map(|n| (
            proptest::collection::vec(-3.0f64..3.0, n),
            proptest::collection::vec(-3.0f64..3.0, n),
        )),
    ) {
        let x = Vector::from_vec(pair.0);
        let y = Vector::from_vec(pair.1);
        let px = pgd::project_box(&x);
        let py = pgd::project_box(&y);
        prop_assert!((px - py).norm() <= (x - y).norm() + 1e-12);
    }
}

#[test]
fn expected_loss_matches_sampled_realized_loss() {
    let g = watts_strogatz(12, 4, 0.2, 3).unwrap();
    let mu: Vec<f64> = (0..12).map(|i| ((i * 7) % 11) as f64 / 10.0).collect();
    let model = MaliciousnessModel::independent(Vector::from_vec(mu)).unwrap();
    let mats = build_matrices(&g, &model).unwrap();
    let w = LossWeights::new(0.2, 0.5, 0.3).unwrap();
    let s: Vec<u8> = (0..12).map(|i| u8::from(i % 3 == 0)).collect();
    let draws = 20_000;
    let samples: Vec<f64> = (0..draws)
        .map(|k| {
            let pi = sample_configuration(&model, k).unwrap();
            realized_loss(&g, &pi, &s, &w).unwrap().total
        })
        .collect();
    let mean = samples.iter().sum::<f64>() / draws as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
    let se = (var / draws as f64).sqrt();
    let expected = decision_loss(&mats, &w, &s).unwrap();
    assert!((mean - expected).abs() <= 3.0 * se, "mean {mean}, expected {expected}, se {se}");
}

#[test]
fn paper_gradient_equals_exact_for_symmetric_m() {
    let (_, _, mut mats) = instance(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5)], &[0.1, 0.9, 0.4, 0.6, 0.2, 0.8]);
    mats.m = (&mats.m + mats.m.transpose()) * 0.5;
    let w = LossWeights::equal();
    let s = Vector::from_vec(vec![0.3, 0.7, 0.1, 0.9, 0.5, 0.2]);
    let paper = pgd::gradient(&mats, &w, &s, GradientMode::Paper).unwrap().total();
    let exact = pgd::gradient(&mats, &w, &s, GradientMode::Exact).unwrap().total();
    assert!((paper - exact).amax() <= 1e-12);
}

#[test]
fn complete_information_is_recovered_by_both_solvers() {
    for seed in 0..5 {
        let g = barabasi_albert(40, 2, seed).unwrap();
        let mu: Vec<f64> = (0..40).map(|i| if (i * 13 + seed as usize).is_multiple_of(10) { 1.0 } else { 0.0 }).collect();
        let model = MaliciousnessModel::independent(Vector::from_vec(mu.clone())).unwrap();
        let mats = build_matrices(&g, &model).unwrap();
        let w = LossWeights::new(0.2, 0.7, 0.1).unwrap();
        let truth: Vec<u8> = mu.iter().map(|&p| p as u8).collect();
        let mint = pgd::solve(&mats, &w, &PgdConfig::default(), seed).unwrap();
        assert_eq!(mint.loss, 0.0);
        let sol = solve_qcqp(&qp_form(&mats, &w)).unwrap();
        let proj = round_projection(&sol.s_star, &mats, &w).unwrap();
        assert_eq!(proj.expected_loss, 0.0);
        assert_eq!(proj.s, truth);
    }
}
