mod common;

use hardcomplete_core::factorize::{
    bounded_factorize, project_rows_to_rowspace, rebase_factorization, sdp_min_rownorm_factor,
    DEFAULT_SDP_MAX_ITER,
};
use hardcomplete_core::gadgets::{
    csp_completeness, csp_gadget, gram_system_to_partial, partition_completeness, partition_gadget,
    Family, Label, OneInKSatInstance, PartitionInstance,
};
use hardcomplete_core::gram_decode::{
    decode_assignment, decode_partition, max_product_change, repair_internal, variable_labels,
};
use hardcomplete_core::graph::{
    balance_by_copies, coloring_factorization, completion_from_coloring, graph_to_partial,
    pad_partial, Coloring, Graph,
};
use hardcomplete_core::linalg::row_norms;
use hardcomplete_core::matrix::{
    coherence, consistency, is_psd, numerical_rank, DenseMatrix, Factorization, PartialMatrix,
    DEFAULT_RANK_TOL,
};
use hardcomplete_core::oracle::{brute_coloring, brute_one_in_k, brute_partition};
use hardcomplete_core::rng;
use hardcomplete_core::rounding::{
    decode_coloring, decode_independent_set, filter_accurate_submatrix, ConeRoundingParams,
    NetColoringParams,
};
use hardcomplete_core::solve::{complete_bounded_rank, SolverConfig};
use nalgebra::DMatrix;
use num_rational::Ratio;
use num_traits::Zero;
use proptest::prelude::*;
use rand::Rng as _;

fn random_partial(seed: u64, n: usize, c: f64, fraction: f64) -> PartialMatrix {
    let mut g = rng::seeded(seed);
    let mut pm = PartialMatrix::new(n, c).unwrap();
    for i in 0..n {
        for j in i..n {
            if g.random::<f64>() < fraction {
                pm.reveal(i, j, (g.random::<f64>() * 2.0 - 1.0) * c)
                    .unwrap();
            }
        }
    }
    pm
}

fn random_graph(seed: u64, n: usize, p: f64) -> Graph {
    let mut g = rng::seeded(seed);
    let edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .filter(|_| g.random::<f64>() < p)
        .collect();
    Graph::new(n, edges).unwrap()
}

fn block_diag(m: &DenseMatrix, n: usize) -> DenseMatrix {
    let mut out = DMatrix::zeros(n, n);
    out.view_mut((0, 0), (m.nrows(), m.ncols()))
        .copy_from(m.as_matrix());
    DenseMatrix::new(out).unwrap()
}

fn exact_residue_is_zero(
    inst: &PartitionInstance,
    split: &hardcomplete_core::gadgets::PartitionSplit,
) -> bool {
    inst.residue(split).unwrap() == Ratio::zero()
}

// matrix-core

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn consistency_is_rotation_invariant(seed in any::<u64>(), n in 2usize..10, r in 1usize..5, frac in 0.2f64..1.0) {
        let mut g = rng::seeded(seed);
        let f = Factorization::new(rng::gaussian_matrix(&mut g, n, r), rng::gaussian_matrix(&mut g, n, r)).unwrap();
        let pm = random_partial(seed ^ 1, n, 3.0, frac);
        let q = rng::random_orthogonal(&mut g, r);
        let a = consistency(&pm, &f.reconstruct()).unwrap();
        let b = consistency(&pm, &f.rotated(&q).unwrap().reconstruct()).unwrap();
        prop_assert!((a.rmse_sum - b.rmse_sum).abs() <= 1e-9 * a.rmse_sum.max(1.0));
        prop_assert!((a.max_entry_err - b.max_entry_err).abs() <= 1e-9);
        prop_assert_eq!(a.coeff_bound_ok, b.coeff_bound_ok);
    }

    #[test]
    fn reconstruction_rank_is_at_most_dimension(seed in any::<u64>(), n in 1usize..12, r in 1usize..6) {
        let mut g = rng::seeded(seed);
        let f = Factorization::new(rng::gaussian_matrix(&mut g, n, r), rng::gaussian_matrix(&mut g, n, r)).unwrap();
        prop_assert!(numerical_rank(&f.reconstruct(), DEFAULT_RANK_TOL) <= r);
    }

    #[test]
    fn equal_magnitude_rank_one_has_unit_coherence(signs in proptest::collection::vec(any::<bool>(), 1..20), a in 0.1f64..10.0) {
        let x = nalgebra::DVector::from_iterator(signs.len(), signs.iter().map(|&s| if s { a } else { -a }));
        let m = DenseMatrix::new(&x * x.transpose()).unwrap();
        prop_assert!((coherence(&m, DEFAULT_RANK_TOL).unwrap() - 1.0).abs() < 1e-9);
    }
}

// graph-reduction

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn coloring_completion_is_exact_with_class_rank(seed in any::<u64>(), n in 1usize..=20, k in 1usize..=5, p in 0.0f64..0.6) {
        let mut g = rng::seeded(seed);
        // Random proper coloring: random color per vertex, edges only across colors.
        let colors: Vec<usize> = (0..n).map(|_| g.random_range(0..k)).collect();
        let edges: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .filter(|&(i, j)| colors[i] != colors[j])
            .filter(|_| g.random::<f64>() < p)
            .collect();
        let graph = Graph::new(n, edges).unwrap();
        let f = Coloring::new(k, colors).unwrap();
        let m = completion_from_coloring(&graph, &f).unwrap();
        let rep = consistency(&graph_to_partial(&graph), &m).unwrap();
        prop_assert_eq!(rep.rmse_sum, 0.0);
        prop_assert_eq!(rep.max_entry_err, 0.0);
        prop_assert!(rep.coeff_bound_ok);
        prop_assert_eq!(numerical_rank(&m, DEFAULT_RANK_TOL), f.nonempty_classes());
    }

    #[test]
    fn padding_keeps_block_completion(seed in any::<u64>(), n in 1usize..8, r in 1usize..4, factor in 1usize..5) {
        let mut g = rng::seeded(seed);
        let m = common::random_symmetric_low_rank(&mut g, n, r, 1.0);
        let mut pm = PartialMatrix::new(n, 1.0).unwrap();
        for i in 0..n {
            for j in i..n {
                if g.random::<f64>() < 0.5 {
                    pm.reveal(i, j, m[(i, j)]).unwrap();
                }
            }
        }
        let padded = pad_partial(&pm, factor).unwrap();
        let witness = block_diag(&m, n * factor);
        let rep = consistency(&padded, &witness).unwrap();
        prop_assert!(rep.max_entry_err <= 1e-12);
        prop_assert_eq!(numerical_rank(&witness, DEFAULT_RANK_TOL), numerical_rank(&m, DEFAULT_RANK_TOL));
        let bound = 1.0 - pm.unrevealed_count() as f64 / ((n * factor) as f64).powi(2);
        prop_assert!(padded.revealed_fraction() >= bound - 1e-12);
    }

    #[test]
    fn balancing_is_proper_and_even(seed in any::<u64>(), n in 1usize..=12, k in 2usize..=4, p in 0.0f64..0.5) {
        let graph = random_graph(seed, n, p);
        if let Some(f) = brute_coloring(&graph, k).unwrap() {
            let (big, bf) = balance_by_copies(&graph, &f).unwrap();
            bf.check_proper(&big).unwrap();
            let sizes = bf.class_sizes();
            prop_assert!(sizes.iter().all(|&s| s == n), "sizes {:?}", sizes);
        }
    }
}

// bounded-factorization

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// The `(cr)^{1/4}` bound applies for `c <= 1`; above that the optimum can
    /// exceed it (see the acceptance suite).
    #[test]
    fn bounded_factorization_invariants(seed in any::<u64>(), n in 2usize..=30, r in 1usize..=4, c in 0.25f64..=1.0, symmetric in any::<bool>()) {
        let mut g = rng::seeded(seed);
        let r = r.min(n);
        let m = if symmetric {
            common::random_symmetric_low_rank(&mut g, n, r, c)
        } else {
            common::random_low_rank(&mut g, n, n, r, c)
        };
        let out = bounded_factorize(&m, 1e-8).unwrap();
        prop_assert_eq!(out.factorization.dim(), numerical_rank(&m, DEFAULT_RANK_TOL));
        prop_assert!(out.reconstruction_error <= 1e-6, "error {}", out.reconstruction_error);
        prop_assert!(out.within_bound(1e-3), "norm {} bound {}", out.max_row_norm, out.norm_bound);
    }

    #[test]
    fn projection_and_rebasing_never_grow_rows(seed in any::<u64>(), n in 2usize..=16, r in 1usize..=3) {
        let mut g = rng::seeded(seed);
        let r = r.min(n);
        let m = common::random_low_rank(&mut g, n, n, r, 1.0);
        let sdp = sdp_min_rownorm_factor(&m, 1e-8, DEFAULT_SDP_MAX_ITER).unwrap();
        let v_proj = project_rows_to_rowspace(&sdp.u, &sdp.v, DEFAULT_RANK_TOL);
        for (before, after) in row_norms(&sdp.v).zip(row_norms(&v_proj)) {
            prop_assert!(after <= before + 1e-9);
        }
        prop_assert_eq!(numerical_rank(&DenseMatrix::new(v_proj.clone()).unwrap(), DEFAULT_RANK_TOL), r);
        let rebased = rebase_factorization(&sdp.u, &v_proj, r, DEFAULT_RANK_TOL).unwrap();
        let f = &rebased.factorization;
        for (before, after) in row_norms(&sdp.u).zip(row_norms(f.u())) {
            prop_assert!(after <= before + 1e-9);
        }
        for (before, after) in row_norms(&v_proj).zip(row_norms(f.v())) {
            prop_assert!(after <= before + 1e-9);
        }
    }
}

// completion-decoders

fn planted_two_colorable(seed: u64, n: usize) -> (Graph, Coloring, Factorization) {
    let (g, f) = Graph::planted(n, 2, 0.3, seed);
    let q = rng::random_orthogonal(&mut rng::seeded(seed ^ 7), 2);
    let fact = coloring_factorization(&f).rotated(&q).unwrap();
    (g, f, fact)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn independent_set_is_sound_and_reproducible(seed in any::<u64>(), n in 2usize..40) {
        let (g, _, fact) = planted_two_colorable(seed, n);
        let survivors: Vec<usize> = (0..n).collect();
        let params = ConeRoundingParams::new(1.0, 2, seed).unwrap();
        let a = decode_independent_set(&fact, &params, &survivors).unwrap();
        prop_assert!(g.is_independent(&a.members));
        let b = decode_independent_set(&fact, &params, &survivors).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn net_coloring_is_proper_under_small_noise(seed in any::<u64>(), n in 3usize..40, noise in 0.0f64..0.04) {
        let (g, f) = Graph::planted(n, 3, 0.3, seed);
        let mut r = rng::seeded(seed ^ 3);
        let base = coloring_factorization(&f).rotated(&rng::random_orthogonal(&mut r, 3)).unwrap();
        let u = base.u() + rng::gaussian_matrix(&mut r, n, 3).map(|x| x.clamp(-2.0, 2.0)) * noise;
        let v = base.v() + rng::gaussian_matrix(&mut r, n, 3).map(|x| x.clamp(-2.0, 2.0)) * noise;
        let noisy = Factorization::new(u, v).unwrap();
        let recon = noisy.reconstruct();
        let rep = consistency(&graph_to_partial(&g), &recon).unwrap();
        let c = recon.max_abs();
        let params = NetColoringParams::new(c, 3, rep.max_entry_err).unwrap();
        // Rows must respect the (cr)^{1/4} norm bound for the net argument.
        prop_assume!(noisy.max_row_norm() <= params.half_side());
        let coloring = decode_coloring(&noisy, &params).unwrap();
        coloring.check_proper(&g).unwrap();
    }

    #[test]
    fn filtering_is_monotone_in_delta(seed in any::<u64>(), n in 1usize..15, d1 in 0.0f64..1.0, d2 in 0.0f64..1.0) {
        let pm = random_partial(seed, n, 1.0, 0.6);
        let mut g = rng::seeded(seed ^ 5);
        let m = DenseMatrix::new(rng::gaussian_matrix(&mut g, n, n) * 0.5).unwrap();
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let small = filter_accurate_submatrix(&pm, &m, lo).unwrap();
        let large = filter_accurate_submatrix(&pm, &m, hi).unwrap();
        prop_assert!(small.iter().all(|i| large.contains(i)));
    }
}

#[test]
fn cap_probability_matches_arc_measure_in_the_plane() {
    // In R^2 a unit vector survives iff the direction lies within the arc of
    // half-width acos(t) around it: probability acos(t) / pi.
    let trials = 20_000u64;
    let u = DMatrix::from_row_slice(1, 2, &[0.6, 0.8]);
    let fact = Factorization::new(u.clone(), u).unwrap();
    let base = ConeRoundingParams::new(1.0, 2, 0).unwrap();
    let expected = libm::acos(base.cap_threshold()) / std::f64::consts::PI;
    let hits = (0..trials)
        .filter(|&t| {
            let params = ConeRoundingParams {
                seed: rng::derive_seed(99, t),
                ..base
            };
            !decode_independent_set(&fact, &params, &[0])
                .unwrap()
                .members
                .is_empty()
        })
        .count();
    let p = hits as f64 / trials as f64;
    let se = (expected * (1.0 - expected) / trials as f64).sqrt();
    assert!(
        (p - expected).abs() <= 3.0 * se,
        "empirical {p}, analytic {expected}, se {se}"
    );
}

// psd-gadgets

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn partition_completeness_is_exact_rank_two_psd(seed in any::<u64>(), n in 2usize..=8) {
        let (inst, split) = common::partitionable(&mut rng::seeded(seed), n);
        let sys = partition_gadget(&inst).unwrap();
        let va = partition_completeness(&inst, &split).unwrap();
        prop_assert!(sys.max_residual(&va).unwrap() <= 1e-12);
        let gram = va.gram(sys.labels()).unwrap();
        prop_assert!(numerical_rank(&gram, DEFAULT_RANK_TOL) <= 2);
        prop_assert!(is_psd(&gram, 1e-9).unwrap());
    }

    #[test]
    fn csp_completeness_is_exact_rank_2k_psd(seed in any::<u64>(), k in 3usize..=4, extra in 0usize..4, m in 0usize..=6) {
        let (inst, f) = common::planted_one_in_k(&mut rng::seeded(seed), k, k + extra, m);
        let sys = csp_gadget(&inst).unwrap();
        let va = csp_completeness(&inst, &f).unwrap();
        prop_assert_eq!(va.dim(), 2 * k);
        prop_assert!(sys.max_residual(&va).unwrap() <= 1e-12);
        let gram = va.gram(sys.labels()).unwrap();
        prop_assert!(numerical_rank(&gram, DEFAULT_RANK_TOL) <= 2 * k);
        prop_assert!(is_psd(&gram, 1e-9).unwrap());
    }

    #[test]
    fn system_to_partial_is_deterministic(seed in any::<u64>(), n in 2usize..=6) {
        let (inst, _) = common::partitionable(&mut rng::seeded(seed), n);
        let a = gram_system_to_partial(&partition_gadget(&inst).unwrap()).unwrap();
        let b = gram_system_to_partial(&partition_gadget(&inst).unwrap()).unwrap();
        prop_assert_eq!(a, b);
    }
}

// psd-decoders

fn same_split_up_to_complement(
    a: &hardcomplete_core::gadgets::PartitionSplit,
    b: &hardcomplete_core::gadgets::PartitionSplit,
    n: usize,
) -> bool {
    a == b || *a == b.complement(n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn partition_decoder_is_sound_and_rotation_invariant(seed in any::<u64>(), n in 2usize..=10, noise in 0.0f64..1e-11) {
        let mut g = rng::seeded(seed);
        let (inst, split) = common::partitionable(&mut g, n);
        let sys = partition_gadget(&inst).unwrap();
        let va = partition_completeness(&inst, &split).unwrap().perturbed(noise, seed);
        prop_assume!(sys.max_residual(&va).unwrap() <= 1e-9);
        let flat = decode_partition(&sys, &va, 1e-6).unwrap();
        prop_assert!(exact_residue_is_zero(&inst, &flat.split));

        let spun = va.transformed(&rng::random_orthogonal(&mut g, 2)).unwrap();
        let d2 = decode_partition(&sys, &spun, 1e-6).unwrap();
        prop_assert!(same_split_up_to_complement(&flat.split, &d2.split, n));

        let lifted = va.embedded(3, 0).unwrap().transformed(&rng::random_orthogonal(&mut g, 3)).unwrap();
        let d3 = decode_partition(&sys, &lifted, 1e-6).unwrap();
        prop_assert!(exact_residue_is_zero(&inst, &d3.split));
        prop_assert!(same_split_up_to_complement(&flat.split, &d3.split, n));
    }

    #[test]
    fn assignment_decoder_is_rotation_invariant(seed in any::<u64>(), k in 3usize..=4, extra in 0usize..3, m in 1usize..=6) {
        let mut g = rng::seeded(seed);
        let (inst, f) = common::planted_one_in_k(&mut g, k, k + extra, m);
        let sys = csp_gadget(&inst).unwrap();
        let va = csp_completeness(&inst, &f).unwrap();
        let plain = decode_assignment(&sys, &va, 0.0).unwrap();
        prop_assert_eq!(&plain.assignment, &f);
        let spun = va.transformed(&rng::random_orthogonal(&mut g, 2 * k)).unwrap();
        prop_assert_eq!(decode_assignment(&sys, &spun, 0.0).unwrap().assignment, f);
    }
}

fn clause_drift(
    before: &hardcomplete_core::gadgets::VectorAssignment,
    after: &hardcomplete_core::gadgets::VectorAssignment,
    m: usize,
) -> f64 {
    let dot = |va: &hardcomplete_core::gadgets::VectorAssignment, c: usize| {
        va.get(&Label::Clause(0))
            .unwrap()
            .dot(va.get(&Label::Clause(c)).unwrap())
    };
    (1..=m)
        .map(|c| (dot(after, c) - dot(before, c)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn repair_bounds_hold_on_noise_grid() {
    for k in [3usize, 4] {
        for eps in [1e-12f64, 1e-10, 1e-8] {
            for trial in 0..100u64 {
                let seed = rng::derive_seed(k as u64 * 1000 + (eps.log10().abs() as u64), trial);
                let mut g = rng::seeded(seed);
                let (inst, f) = common::planted_one_in_k(&mut g, k, k + 2, 4);
                let sys = csp_gadget(&inst).unwrap();
                let noisy = csp_completeness(&inst, &f)
                    .unwrap()
                    .perturbed(eps / (2.0 * k as f64), seed);
                let measured = sys.max_residual(&noisy).unwrap();
                let (fixed, rep) = repair_internal(&noisy, &sys, measured).unwrap();
                assert!(
                    rep.internal_residual_after <= 1e-12,
                    "k={k} eps={eps}: {}",
                    rep.internal_residual_after
                );
                assert!(
                    rep.max_drift <= rep.drift_bound(),
                    "k={k} eps={eps}: drift {}",
                    rep.max_drift
                );
                let product = max_product_change(&noisy, &fixed, &variable_labels(&inst)).unwrap();
                assert!(
                    product <= rep.product_bound(),
                    "k={k} eps={eps}: product {product}"
                );
                let clause_bound = 35.0 * (2.0 * k as f64 * rep.eps).sqrt();
                assert!(clause_drift(&noisy, &fixed, inst.clauses().len()) <= clause_bound);
                assert!(
                    sys.residuals_by_family(&fixed).unwrap()[&Family::InternalVariable] <= 1e-12
                );
            }
        }
    }
}

// solvers-oracles

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn brute_coloring_completes_exactly(seed in any::<u64>(), n in 1usize..=10, k in 1usize..=4, p in 0.0f64..0.7) {
        let g = random_graph(seed, n, p);
        if let Some(f) = brute_coloring(&g, k).unwrap() {
            let rep = consistency(&graph_to_partial(&g), &completion_from_coloring(&g, &f).unwrap()).unwrap();
            prop_assert_eq!(rep.rmse_sum, 0.0);
        }
    }

    #[test]
    fn brute_partition_roundtrips(weights in proptest::collection::vec(1i128..=12, 2..=9), den in 1i128..=6) {
        let inst = PartitionInstance::from_ratios(weights.iter().map(|&w| Ratio::new(w, den)).collect()).unwrap();
        match brute_partition(&inst).unwrap() {
            Some(split) => {
                prop_assert!(exact_residue_is_zero(&inst, &split));
                let sys = partition_gadget(&inst).unwrap();
                let va = partition_completeness(&inst, &split).unwrap();
                let decoded = decode_partition(&sys, &va, 1e-9).unwrap();
                prop_assert!(exact_residue_is_zero(&inst, &decoded.split));
            }
            None => {
                // Independent check: no subset sums to half the total.
                let n = weights.len();
                let total: i128 = weights.iter().sum();
                let any = (0u32..(1 << n)).any(|mask| {
                    2 * (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| weights[i]).sum::<i128>() == total
                });
                prop_assert!(!any);
            }
        }
    }

    #[test]
    fn brute_one_in_k_roundtrips(seed in any::<u64>(), k in 3usize..=4, extra in 0usize..4, m in 0usize..=6, planted in any::<bool>()) {
        let mut g = rng::seeded(seed);
        let inst = if planted {
            common::planted_one_in_k(&mut g, k, k + extra, m).0
        } else {
            random_one_in_k(&mut g, k, k + extra, m)
        };
        match brute_one_in_k(&inst).unwrap() {
            Some(f) => {
                prop_assert_eq!(inst.first_violated(&f).unwrap(), None);
                let sys = csp_gadget(&inst).unwrap();
                let va = csp_completeness(&inst, &f).unwrap();
                prop_assert_eq!(decode_assignment(&sys, &va, 0.0).unwrap().assignment, f);
            }
            None => {
                prop_assert!(!planted);
                let n = inst.n_vars();
                let any = (0u32..(1 << n)).any(|mask| {
                    let values = (0..n).map(|i| if mask >> i & 1 == 1 { -1 } else { 1 }).collect();
                    let f = hardcomplete_core::gadgets::Assignment::new(values).unwrap();
                    inst.first_violated(&f).unwrap().is_none()
                });
                prop_assert!(!any);
            }
        }
    }

    #[test]
    fn completion_respects_coefficient_bound(seed in any::<u64>(), n in 1usize..10, r in 1usize..4, c in 0.1f64..3.0) {
        let pm = random_partial(seed, n, c, 0.7);
        let mut cfg = SolverConfig::new(r, c);
        cfg.seed = seed;
        cfg.max_iter = 200;
        cfg.restarts = 2;
        let out = complete_bounded_rank(&pm, &cfg).unwrap();
        prop_assert!(out.matrix.max_abs() <= c);
    }
}

fn random_one_in_k(g: &mut rng::Rng, k: usize, n_vars: usize, m: usize) -> OneInKSatInstance {
    use rand::seq::SliceRandom;
    let mut vars: Vec<usize> = (1..=n_vars).collect();
    let clauses = (0..m)
        .map(|_| {
            vars.shuffle(g);
            vars[..k]
                .iter()
                .map(|&var| hardcomplete_core::gadgets::Literal {
                    var,
                    positive: g.random::<bool>(),
                })
                .collect()
        })
        .collect();
    OneInKSatInstance::new(k, n_vars, clauses).unwrap()
}
