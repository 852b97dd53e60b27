use std::path::PathBuf;

use proptest::prelude::*;
use securent_core::evaluation::EvaluationReport;
use securent_core::measurement::{generate_probe_series, CongestionScenario};
use securent_core::obfuscation::*;
use securent_core::topology::*;
use securent_core::Error;

fn ernet() -> (Topology, PathSet, RoutingMatrix) {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    let mf = MonitorFixture::parse(&std::fs::read_to_string(dir.join("ernet.monitors")).unwrap()).unwrap();
    let t = load_graphml(&std::fs::read(dir.join("ernet.graphml")).unwrap())
        .unwrap()
        .with_monitors(&mf.monitors)
        .unwrap();
    let ps = compute_paths_for_pairs(&t, &mf.effective_pairs()).unwrap();
    let r = build_routing_matrix(&ps, t.links().len()).unwrap();
    (t, ps, r)
}

fn degrees(t: &Topology) -> Vec<usize> {
    (0..t.nodes().len()).map(|n| t.degree(n)).collect()
}

// Straight transcription of the projected-gradient loop, kept separate from
// the library so both can be checked against each other.
fn oracle(a: &[f64], b: &[f64], gamma: f64, eta: f64, t_max: usize) -> (Vec<f64>, usize) {
    let sb: f64 = b.iter().sum();
    let sa: f64 = a.iter().sum();
    let mut y: Vec<f64> = a.iter().map(|v| v * (sb / sa)).collect();
    let loss = |y: &[f64]| y.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>();
    let l0 = loss(&y);
    let mut t = 0;
    while loss(&y) > gamma * l0 && t < t_max {
        let step: Vec<f64> = y.iter().zip(b).map(|(p, q)| (p - eta * 2.0 * (p - q)).max(0.0)).collect();
        let s: f64 = step.iter().sum();
        y = step.iter().map(|v| v * (sb / s)).collect();
        t += 1;
    }
    (y, t)
}

fn params(gamma: f64) -> ModuleParams {
    ModuleParams { eta: 0.1, t_max: 1000, gamma }
}

#[test]
fn two_entry_case_matches_oracle() {
    let run = protection_computing_module(&[2.0, 4.0], &[3.0, 3.0], &params(0.01)).unwrap();
    let (want, iters) = oracle(&[2.0, 4.0], &[3.0, 3.0], 0.01, 0.1, 1000);
    assert_eq!(run.iterations, iters);
    for (a, b) in run.output.iter().zip(&want) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!(run.converged);
    assert!(run.final_loss() <= 0.01 * run.initial_loss());
    assert!((run.output.iter().sum::<f64>() - 6.0).abs() < 1e-12);
}

#[test]
fn loss_strictly_falls_over_first_iterations() {
    let run = protection_computing_module(&[1.0, 5.0], &[4.0, 2.0], &ModuleParams { eta: 0.1, t_max: 10, gamma: 1e-12 }).unwrap();
    assert_eq!(run.iterations, 10);
    for w in run.losses.windows(2) {
        assert!(w[1] < w[0], "{:?}", run.losses);
    }
}

#[test]
fn rescaled_fixed_point_is_immediate() {
    let target = [1.0, 3.0, 2.0];
    let run = protection_computing_module(&[2.0, 6.0, 4.0], &target, &params(0.5)).unwrap();
    assert_eq!(run.iterations, 0);
    assert_eq!(run.output, target);
}

#[test]
fn single_path_noise_is_forced_to_hop_count() {
    let run = protection_computing_module(&[7.0], &[3.0], &params(0.9)).unwrap();
    assert_eq!(run.output, [3.0]);
}

#[test]
fn module_rejects_length_mismatch() {
    assert!(protection_computing_module(&[1.0], &[1.0, 2.0], &params(0.5)).is_err());
    assert!(protection_computing_module(&[], &[], &params(0.5)).is_err());
}

#[test]
fn fake_delay_examples() {
    assert_eq!(fake_link_delays(&[4.0], 10.0).unwrap(), [2.0]);
    let v = fake_link_delays(&[1e-4, 1e-3, 1e-2], 1.0).unwrap();
    assert!(v.iter().all(|x| *x < 1.0));
    assert!(v[0] > v[1] && v[1] > v[2]);
    assert!(v[0] > 0.9998);
    assert!(fake_link_delays(&[0.0], 1.0).is_err());
    assert!(fake_link_delays(&[1.0], 0.0).is_err());
}

#[test]
fn auto_scaling_hits_target_mean() {
    let l = [0.5, 2.0, 7.0, 3.3];
    let c = scaling_for_mean(&l, 1.0).unwrap();
    let x = fake_link_delays(&l, c).unwrap();
    assert!((x.iter().sum::<f64>() / 4.0 - 1.0).abs() < 1e-12);
}

fn tiny_fake(rows: &[Vec<u8>]) -> FakeTopology {
    let n_links = rows[0].len();
    let nodes = (0..=n_links).map(|i| i.to_string()).collect();
    let links = (0..n_links).map(|i| Link { a: i, b: i + 1, weight: 1.0 }).collect();
    FakeTopology {
        graph: Topology::new(nodes, links).unwrap(),
        paths: PathSet::default(),
        routing: RoutingMatrix::from_rows(rows, n_links).unwrap(),
        lengths: vec![1.0; n_links],
    }
}

#[test]
fn raw_noise_examples() {
    let f = tiny_fake(&[vec![1, 1]]);
    assert_eq!(raw_noise(&f, &[2.0, 3.0]).unwrap(), [5.0]);
    let e = 1e-7;
    assert_eq!(raw_noise(&f, &[e, e]).unwrap(), [2.0 * e]);
    assert!(raw_noise(&f, &[1.0]).is_err());
}

#[test]
fn triangle_cannot_be_rewired() {
    let t = Topology::new(
        vec!["a".into(), "b".into(), "c".into()],
        vec![Link { a: 0, b: 1, weight: 1.0 }, Link { a: 1, b: 2, weight: 1.0 }, Link { a: 0, b: 2, weight: 1.0 }],
    )
    .unwrap()
    .with_monitors(&["a", "b"])
    .unwrap();
    let ps = compute_paths(&t, &["a", "b"]).unwrap();
    let e = generate_fake_topology(&t, &ps, 1, 0.34).unwrap_err();
    assert!(matches!(e, Error::Generation(_)), "{e:?}");
}

#[test]
fn ernet_fake_keeps_degrees_and_path_count() {
    let (t, ps, r) = ernet();
    for seed in 0..10 {
        let f = generate_fake_topology(&t, &ps, seed, 0.3).unwrap();
        assert_eq!(degrees(&f.graph), degrees(&t));
        let real: std::collections::HashSet<_> = t.links().iter().map(|l| (l.a.min(l.b), l.a.max(l.b))).collect();
        assert!(f.graph.links().iter().any(|l| !real.contains(&(l.a.min(l.b), l.a.max(l.b)))));
        assert_eq!(f.routing.n_paths(), 12);
        assert!((0..12).all(|i| !f.routing.path_links(i).is_empty()));
        let (lo, hi) = t.weight_range();
        assert!(f.lengths.iter().all(|l| *l >= lo && *l <= hi));
        assert_eq!(r.n_paths(), f.routing.n_paths());
    }
}

#[test]
fn ernet_adjusted_noise_sums_to_total_hops() {
    let (t, ps, r) = ernet();
    let f = generate_fake_topology(&t, &ps, 3, 0.5).unwrap();
    let x = fake_link_delays(&f.lengths, 1.0).unwrap();
    let d = adjusted_noise(&r, &f, &x, &ModuleParams::default()).unwrap();
    let hops: usize = r.hop_counts().iter().sum();
    assert!((d.iter().sum::<f64>() - hops as f64).abs() <= 1e-9 * hops as f64);
    assert!(d.iter().all(|v| *v >= 0.0));
}

#[test]
fn apply_protection_examples() {
    assert_eq!(apply_protection(&[5.0, 7.0], &[1.0, 2.0], 0.5).unwrap(), [5.5, 8.0]);
    assert!(apply_protection(&[1.0], &[1.0, 2.0], 1.0).is_err());
    assert!(apply_protection(&[1.0], &[1.0], 0.0).is_err());
}

#[test]
fn objective_examples() {
    let y = [3.0, 4.0];
    assert_eq!(objective_score(&y, &y, 1.0, 0.0, 5.0, 5.0), 0.0);
    assert_eq!(objective_score(&y, &[0.0, 0.0], 0.3, 0.7, 0.0, 0.0), 5.0);
    // Second candidate is worse on distortion, similarity and nrmse.
    let good = objective_score(&y, &[3.5, 4.0], 0.6, 0.2, 2.0, 3.0);
    let bad = objective_score(&y, &[4.0, 5.0], 0.8, 0.4, 2.0, 3.0);
    assert!(bad > good);
}

fn report(similarity: f64, nrmse: f64, distortion: f64) -> EvaluationReport {
    EvaluationReport {
        topology: "t".into(),
        method: "securent".into(),
        n_probes: 1,
        p: 0.1,
        seed: 0,
        similarity,
        f1: 1.0,
        nrmse,
        objective: 0.0,
        distortion,
    }
}

#[test]
fn select_best_examples() {
    let (t, ps, r) = ernet();
    let plan = build_plan(&t, &ps, &r, &PlanConfig::default()).unwrap();
    assert!(select_best(&[], 1.0, 1.0).is_err());
    assert_eq!(select_best(&[(plan.clone(), report(0.5, 0.5, 1.0))], 1.0, 1.0).unwrap(), 0);
    let tie = [(plan.clone(), report(0.5, 0.5, 1.0)), (plan.clone(), report(0.5, 0.5, 1.0))];
    assert_eq!(select_best(&tie, 1.0, 1.0).unwrap(), 0);
}

#[test]
fn select_best_is_grid_minimum() {
    let (t, ps, r) = ernet();
    let sc = CongestionScenario::with_defaults(0.1, r.n_links()).unwrap();
    let truth = generate_probe_series(&r, &sc, 50, 2).unwrap();
    let mut cands = Vec::new();
    for seed in 0..3u64 {
        for alpha in [0.5, 1.0, 2.0] {
            let cfg = PlanConfig {
                alpha,
                fake_seed: seed,
                ..PlanConfig::default()
            };
            let plan = build_plan(&t, &ps, &r, &cfg).unwrap();
            let (prot, _) = plan.protect_series(&truth, seed).unwrap();
            let d: f64 = (0..truth.n_paths())
                .map(|i| {
                    let m = prot.rounds.iter().zip(&truth.rounds).map(|(a, b)| a[i] - b[i]).sum::<f64>() / 50.0;
                    m * m
                })
                .sum::<f64>()
                .sqrt();
            // Similarity and nrmse stand-ins that vary with the candidate.
            cands.push((plan, report(1.0 / (1.0 + alpha), 0.1 * alpha + seed as f64 * 0.01, d)));
        }
    }
    let best = select_best(&cands, 10.0, 1.0).unwrap();
    let score = |r: &EvaluationReport| objective_from_distortion(r.distortion, r.similarity, r.nrmse, 10.0, 1.0);
    for (i, (_, rep)) in cands.iter().enumerate() {
        assert!(score(&cands[best].1) <= score(rep));
        if score(rep) == score(&cands[best].1) {
            assert!(best <= i);
        }
    }
}

#[test]
fn plans_are_deterministic_and_replayable() {
    let (t, ps, r) = ernet();
    let cfg = PlanConfig {
        fake_seed: 42,
        ..PlanConfig::default()
    };
    let a = build_plan(&t, &ps, &r, &cfg).unwrap();
    let b = build_plan(&t, &ps, &r, &cfg).unwrap();
    assert_eq!(a.to_text(), b.to_text());
    let h = parse_plan(&a.to_text()).unwrap();
    assert_eq!(h.alpha, a.alpha);
    assert_eq!(h.c, a.c);
    assert_eq!(h.adjusted_noise, a.adjusted_noise);
    assert_eq!(h.fake_seed, 42);
    assert_eq!(h.fake_routing.len(), 12);
    let sc = CongestionScenario::with_defaults(0.1, r.n_links()).unwrap();
    let s = generate_probe_series(&r, &sc, 20, 9).unwrap();
    assert_eq!(a.protect_series(&s, 5).unwrap().0, b.protect_series(&s, 5).unwrap().0);
}

#[test]
fn per_round_noise_keeps_plan_budget() {
    let (t, ps, r) = ernet();
    let plan = build_plan(&t, &ps, &r, &PlanConfig::default()).unwrap();
    let hops: f64 = r.hop_counts().iter().sum::<usize>() as f64;
    for round in 0..50 {
        let d = plan.round_noise(3, round).unwrap();
        assert!((d.iter().sum::<f64>() - hops).abs() < 1e-9 * hops);
        assert!(d.iter().all(|v| *v >= 0.0));
    }
    let sc = CongestionScenario::with_defaults(0.1, r.n_links()).unwrap();
    let s = generate_probe_series(&r, &sc, 40, 1).unwrap();
    let (_, total) = plan.protect_series(&s, 3).unwrap();
    assert!((total - plan.alpha * 40.0 * hops).abs() < 1e-6 * total);
}

#[test]
fn uniform_baseline_examples() {
    let y = [3.0, 4.0, 5.0];
    let (p, total) = baseline_uniform_noise(&y, 0.0, 1).unwrap();
    assert_eq!((p.as_slice(), total), (y.as_slice(), 0.0));
    assert_eq!(baseline_uniform_noise(&y, 2.0, 8).unwrap(), baseline_uniform_noise(&y, 2.0, 8).unwrap());
    let (p, total) = baseline_uniform_noise(&y, 2.0, 8).unwrap();
    let added: f64 = p.iter().zip(&y).map(|(a, b)| a - b).sum();
    assert!((added - total).abs() < 1e-12);
    assert!(p.iter().zip(&y).all(|(a, b)| a >= b && *a <= b + 2.0));
}

#[test]
fn uniform_scale_matches_securent_budget() {
    let (t, ps, r) = ernet();
    let plan = build_plan(&t, &ps, &r, &PlanConfig::default()).unwrap();
    let sc = CongestionScenario::with_defaults(0.1, r.n_links()).unwrap();
    let s = generate_probe_series(&r, &sc, 100, 4).unwrap();
    let (_, budget) = plan.protect_series(&s, 6).unwrap();
    let scale = calibrate_uniform_scale(&s, budget, 12, 1e-3).unwrap();
    let (_, total) = uniform_series(&s, scale, 12).unwrap();
    assert!((total - budget).abs() <= 0.01 * budget);
}

fn vec_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (5usize..=50).prop_flat_map(|n| {
        (
            proptest::collection::vec(0.01f64..100.0, n),
            proptest::collection::vec(0.01f64..100.0, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn module_contract((a, b) in vec_pair(), eta in 0.01f64..=0.25, gamma in 0.001f64..0.99) {
        let run = protection_computing_module(&a, &b, &ModuleParams { eta, t_max: 1000, gamma }).unwrap();
        let sb: f64 = b.iter().sum();
        prop_assert!((run.output.iter().sum::<f64>() - sb).abs() <= 1e-9 * sb);
        prop_assert!(run.output.iter().all(|v| *v >= 0.0));
        for w in run.losses.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
        if run.iterations < 1000 {
            prop_assert!(run.converged);
            prop_assert!(run.final_loss() <= gamma * run.initial_loss());
        }
        let (want, iters) = oracle(&a, &b, gamma, eta, 1000);
        prop_assert_eq!(run.iterations, iters);
        for (x, y) in run.output.iter().zip(&want) {
            prop_assert!((x - y).abs() <= 1e-9 * y.abs().max(1.0));
        }
    }

    #[test]
    fn fake_delays_reverse_length_order(l in proptest::collection::vec(1e-3f64..1e3, 2..40), c in 0.1f64..100.0) {
        let x = fake_link_delays(&l, c).unwrap();
        let mut by_len: Vec<usize> = (0..l.len()).collect();
        by_len.sort_by(|&i, &j| l[i].total_cmp(&l[j]));
        for w in by_len.windows(2) {
            if l[w[0]] < l[w[1]] {
                prop_assert!(x[w[0]] > x[w[1]]);
            }
        }
    }

    #[test]
    fn protection_is_additive(y in proptest::collection::vec(0.1f64..100.0, 1..20), alpha in 1e-6f64..10.0, seed in any::<u64>()) {
        let d: Vec<f64> = baseline_uniform_noise(&vec![0.0; y.len()], 3.0, seed).unwrap().0;
        let p = apply_protection(&y, &d, alpha).unwrap();
        for i in 0..y.len() {
            prop_assert!(p[i] >= y[i]);
            prop_assert!(((p[i] - y[i]) - alpha * d[i]).abs() <= 1e-9 * p[i].max(1.0));
        }
    }
}
