mod common;

use buffered_flow::graph::{normalize_edges, MAT_TOL};
use buffered_flow::resolvent::{
    direct_resolvent_a, discrete_resolvent_c, resolvent_a_series, resolvent_c, ResolventInput,
};
use buffered_flow::solver::{apply_generator, step, GeneratorPart};
use buffered_flow::spectral::FIXED_TOL;
use buffered_flow::{
    build_matrices, equilibrium_state, generate_family, perron_fixed_vector, strongly_connected, validate, Family,
    FlowModel, FlowState, MetricGraph, Profile, StepPolicy,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::random_state;

fn graph(n: usize, fraction: f64, seed: u64) -> MetricGraph {
    generate_family(Family::RandomScc {
        n,
        buffer_fraction: fraction,
        seed,
    })
    .unwrap()
}

fn signed_state(model: &FlowModel, seed: u64) -> FlowState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = model.zero_state();
    s.cells.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
    s.buffers.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
    s
}

fn graph_params() -> impl Strategy<Value = (usize, f64, u64)> {
    (2usize..9, 0.05f64..=1.0, any::<u64>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_families_are_valid_and_strongly_connected((n, f, seed) in graph_params()) {
        let g = graph(n, f, seed);
        prop_assert!(validate(&g, Profile::Buffered).is_valid());
        prop_assert!(strongly_connected(&g));
        prop_assert!(g.edges.len() >= n);
    }

    #[test]
    fn incidence_and_adjacency_invariants((n, f, seed) in graph_params()) {
        let b = build_matrices(&graph(n, f, seed)).unwrap();
        for e in 0..b.num_edges() {
            prop_assert_eq!(b.phi_out.col_nnz(e), 1);
            prop_assert_eq!(b.phi_in.col_nnz(e), 1);
        }
        for s in b.adjacency.col_sums() {
            prop_assert!((s - 1.0).abs() <= MAT_TOL);
        }
        let recomposed = b.b_nb.add(&b.b_buf.matmul(&b.phi_in_buffered()));
        prop_assert!(recomposed.max_abs_diff(&b.adjacency) <= MAT_TOL);
    }

    #[test]
    fn normalization_is_idempotent((n, f, seed) in graph_params()) {
        let once = normalize_edges(&graph(n, f, seed));
        prop_assert!(once.is_normalized());
        prop_assert_eq!(normalize_edges(&once), once);
    }

    #[test]
    fn json_round_trip((n, f, seed) in graph_params()) {
        let g = graph(n, f, seed);
        prop_assert_eq!(MetricGraph::from_json(&g.to_json()).unwrap(), g);
    }

    #[test]
    fn perron_vector_is_positive_and_fixed((n, f, seed) in graph_params()) {
        let b = build_matrices(&graph(n, f, seed)).unwrap();
        let w = perron_fixed_vector(&b, FIXED_TOL).unwrap();
        prop_assert!(w.entries.iter().all(|v| *v > 0.0));
        prop_assert!((w.entries.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(w.residual <= FIXED_TOL);
    }

    #[test]
    fn steps_conserve_mass_and_positivity((n, f, seed) in graph_params(), theta in 0.1f64..=1.0) {
        let model = FlowModel::new(graph(n, f, seed), 12).unwrap();
        let policy = StepPolicy::with_theta(theta);
        let mut s = random_state(&model, seed ^ 1, 1.0);
        for _ in 0..40 {
            s = step(&model, &s, &policy).unwrap();
            prop_assert!(s.min_value() >= 0.0);
        }
        prop_assert!((s.total_mass() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn steps_are_linear_and_contractive((n, f, seed) in graph_params(), a in -3.0f64..3.0) {
        let model = FlowModel::new(graph(n, f, seed), 10).unwrap();
        let policy = StepPolicy::default();
        let x = signed_state(&model, seed);
        let y = signed_state(&model, seed.wrapping_add(1));
        let combo = x.add_scaled(a, &y).unwrap();
        let (tx, ty) = (step(&model, &x, &policy).unwrap(), step(&model, &y, &policy).unwrap());
        let t_combo = step(&model, &combo, &policy).unwrap();
        let expected = tx.add_scaled(a, &ty).unwrap();
        prop_assert!(t_combo.distance(&expected).unwrap() <= 1e-12 * (1.0 + combo.norm()));
        // a positive, mass-preserving map is an l1 contraction
        prop_assert!(tx.distance(&ty).unwrap() <= x.distance(&y).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn distance_is_a_metric((n, f, seed) in graph_params()) {
        let model = FlowModel::new(graph(n, f, seed), 6).unwrap();
        let x = signed_state(&model, seed);
        let y = signed_state(&model, seed ^ 7);
        let z = signed_state(&model, seed ^ 11);
        let d = |p: &FlowState, q: &FlowState| p.distance(q).unwrap();
        prop_assert_eq!(d(&x, &x), 0.0);
        prop_assert!((d(&x, &y) - d(&y, &x)).abs() <= 1e-15);
        prop_assert!(d(&x, &z) <= d(&x, &y) + d(&y, &z) + 1e-12);
    }

    #[test]
    fn equilibrium_matches_mass_and_generator_conserves((n, f, seed) in graph_params(), mass in 0.1f64..10.0) {
        let model = FlowModel::new(graph(n, f, seed), 16).unwrap();
        let w = perron_fixed_vector(&model.bundle, FIXED_TOL).unwrap();
        let eq = equilibrium_state(&model, &w, mass).unwrap();
        prop_assert!((eq.total_mass() - mass).abs() <= 1e-12 * mass);
        prop_assert!(eq.state.min_value() > 0.0);
        let af = apply_generator(&model, &random_state(&model, seed, mass), GeneratorPart::Full).unwrap();
        prop_assert!(af.total_mass().abs() <= 1e-9 * mass);
    }

    #[test]
    fn resolvents_are_positive((n, f, seed) in graph_params(), lambda in 0.5f64..8.0) {
        let model = FlowModel::new(graph(n, f, seed), 12).unwrap();
        let g = random_state(&model, seed, 1.0);
        let discrete = discrete_resolvent_c(&model, lambda, &g).unwrap();
        prop_assert!(discrete.min_value() >= 0.0);
        if let Ok(out) = resolvent_c(&model, &ResolventInput::new(lambda, g.clone())) {
            prop_assert!(out.f.min_value() >= 0.0);
            for ((b, z), k) in out.f.buffers.iter().zip(&g.buffers).zip(&model.bundle.buffer_rates) {
                prop_assert_eq!(*b, z / (lambda + k));
            }
        }
        let series = resolvent_a_series(&model, &ResolventInput::new(lambda, g), 1e-13).unwrap();
        prop_assert!(series.f.min_value() >= -1e-15);
    }

    #[test]
    fn series_agrees_with_direct_solve((n, f, seed) in graph_params(), lambda in 0.5f64..8.0) {
        let model = FlowModel::new(graph(n, f, seed), 8).unwrap();
        let input = ResolventInput::new(lambda, signed_state(&model, seed));
        let series = resolvent_a_series(&model, &input, 1e-13).unwrap();
        let direct = direct_resolvent_a(&model, &input).unwrap();
        prop_assert!(series.f.distance(&direct).unwrap() <= 1e-9);
        prop_assert!(series.residual <= 1e-9);
    }

    #[test]
    fn series_on_equilibrium_is_scaled_equilibrium((n, f, seed) in graph_params(), lambda in 1.0f64..8.0) {
        let model = FlowModel::new(graph(n, f, seed), 32).unwrap();
        let w = perron_fixed_vector(&model.bundle, FIXED_TOL).unwrap();
        let eq = equilibrium_state(&model, &w, 1.0).unwrap();
        let out = resolvent_a_series(&model, &ResolventInput::new(lambda, eq.state.clone()), 1e-13).unwrap();
        // A_h f* is only zero up to the grid error, and R(λ, A_h) has norm 1/λ
        let tolerance = buffered_flow::spectral::kernel_residual(&model, &eq.state).unwrap() / lambda.powi(2);
        prop_assert!(out.f.distance(&eq.state.scaled(1.0 / lambda)).unwrap() <= tolerance + 1e-12);
    }
}

#[test]
fn resolvent_residual_is_first_order() {
    // kink on a grid interface for every n below, so refinement is regular
    let velocity = buffered_flow::VelocityProfile::piecewise_linear(vec![(0.0, 1.0), (0.5, 2.0), (1.0, 0.8)]);
    let g = common::cycle_with(3, velocity);
    let residual = |n: usize| {
        let model = FlowModel::new(g.clone(), n).unwrap();
        let input = ResolventInput::from_fn(&model, 5.0, |_, x| 1.0 + x * x, &[1.0]).unwrap();
        resolvent_c(&model, &input).unwrap().residual
    };
    let (r64, r128, r256) = (residual(64), residual(128), residual(256));
    for ratio in [r64 / r128, r128 / r256] {
        assert!((1.7..=2.3).contains(&ratio), "{r64} {r128} {r256}");
    }
}
