use proptest::prelude::*;
use rand::Rng;
use securent_core::evaluation::*;
use securent_core::measurement::{generate_probe_series, CongestionScenario};
use securent_core::seed;
use securent_core::topology::RoutingMatrix;

fn view(n: usize, edges: &[(usize, usize)], anchors: &[usize]) -> GraphView {
    GraphView {
        nodes: (0..n).map(|i| format!("n{i}")).collect(),
        edges: edges.to_vec(),
        anchors: anchors.to_vec(),
    }
}

// Exhaustive edit cost: try every partial injective mapping of free nodes.
fn brute_g0(g: &GraphView, h: &GraphView) -> f64 {
    let mut map: Vec<Option<usize>> = vec![None; g.nodes.len()];
    let mut used = vec![false; h.nodes.len()];
    for &a in &g.anchors {
        if let Some(b) = h.anchors.iter().copied().find(|&b| h.nodes[b] == g.nodes[a]) {
            map[a] = Some(b);
            used[b] = true;
        }
    }
    let free: Vec<usize> = (0..g.nodes.len()).filter(|&i| map[i].is_none()).collect();
    fn cost(g: &GraphView, h: &GraphView, map: &[Option<usize>]) -> usize {
        let mapped = map.iter().flatten().count();
        let mut kept = 0;
        for &(a, b) in &g.edges {
            if let (Some(x), Some(y)) = (map[a], map[b]) {
                if h.edges.iter().any(|&(p, q)| (p, q) == (x, y) || (q, p) == (x, y)) {
                    kept += 1;
                }
            }
        }
        (g.nodes.len() - mapped) + (h.nodes.len() - mapped) + (g.edges.len() - kept) + (h.edges.len() - kept)
    }
    fn go(k: usize, free: &[usize], g: &GraphView, h: &GraphView, map: &mut Vec<Option<usize>>, used: &mut Vec<bool>, best: &mut usize) {
        if k == free.len() {
            *best = (*best).min(cost(g, h, map));
            return;
        }
        go(k + 1, free, g, h, map, used, best);
        for w in 0..h.nodes.len() {
            if !used[w] {
                used[w] = true;
                map[free[k]] = Some(w);
                go(k + 1, free, g, h, map, used, best);
                map[free[k]] = None;
                used[w] = false;
            }
        }
    }
    let mut best = usize::MAX;
    go(0, &free, g, h, &mut map, &mut used, &mut best);
    best as f64
}

#[test]
fn identical_and_empty_graphs() {
    let g = view(4, &[(0, 1), (1, 2), (2, 3), (3, 0)], &[0]);
    let same = edit_costs(&g, &g);
    assert_eq!((same.g0, same.g1, same.g2), (0.0, 8.0, 8.0));
    assert_eq!(similarity(same.g0, same.g1, same.g2).unwrap(), 1.0);
    let gone = edit_costs(&g, &GraphView::empty());
    assert_eq!((gone.g0, gone.g1, gone.g2), (8.0, 8.0, 0.0));
    assert_eq!(similarity(gone.g0, gone.g1, gone.g2).unwrap(), 0.0);
    assert!(similarity(0.0, 0.0, 0.0).is_err());
}

#[test]
fn triangle_missing_one_edge() {
    let tri = view(3, &[(0, 1), (1, 2), (0, 2)], &[]);
    let cut = view(3, &[(0, 1), (1, 2)], &[]);
    let ec = edit_costs(&tri, &cut);
    assert_eq!((ec.g0, ec.g1, ec.g2), (1.0, 6.0, 5.0));
    assert_eq!(brute_g0(&tri, &cut), 1.0);
    let s = similarity(ec.g0, ec.g1, ec.g2).unwrap();
    assert!((s - (1.0 - 1.0 / 11.0)).abs() < 1e-12);
}

#[test]
fn zero_spread_classification() {
    let r = RoutingMatrix::from_rows(&[vec![1, 1, 0], vec![0, 1, 1], vec![0, 0, 1]], 3).unwrap();
    let rule = ThresholdRule {
        spread: 0.0,
        ..ThresholdRule::default()
    };
    assert_eq!(classify_congested_paths(&[2.0, 2.0, 1.0], &r, &rule), [false; 3]);
    // Link 0 congested at 10 ms.
    assert_eq!(classify_congested_paths(&[11.0, 2.0, 1.0], &r, &rule), [true, false, false]);
}

#[test]
fn default_threshold_false_positive_rate_is_low() {
    let rows: Vec<Vec<u8>> = (0..12).map(|i| (0..13).map(|j| u8::from(j == i || (j == 12 && i % 2 == 0) || j == (i + 5) % 12)).collect()).collect();
    let r = RoutingMatrix::from_rows(&rows, 13).unwrap();
    let sc = CongestionScenario::with_defaults(0.1, 13).unwrap();
    let s = generate_probe_series(&r, &sc, 1000, 21).unwrap();
    let rule = ThresholdRule::default();
    let (mut fp, mut negatives) = (0, 0);
    for (y, states) in s.rounds.iter().zip(&s.link_states) {
        let flags = classify_congested_paths(y, &r, &rule);
        for i in 0..r.n_paths() {
            if r.path_links(i).iter().all(|&j| !states[j]) {
                negatives += 1;
                fp += flags[i] as usize;
            }
        }
    }
    assert!((fp as f64) < 0.02 * negatives as f64, "{fp} of {negatives}");
}

#[test]
fn offsets_absorb_constant_shifts() {
    let r = RoutingMatrix::from_rows(&[vec![1, 1], vec![0, 1]], 2).unwrap();
    let rounds = vec![vec![7.0, 1.0], vec![7.5, 1.0], vec![6.5, 1.0]];
    assert_eq!(calibrate_offsets(&rounds, &r, 1.0), [5.0, 0.0]);
}

#[test]
fn clink_examples() {
    let r = RoutingMatrix::from_rows(&[vec![1, 0], vec![0, 1], vec![1, 1]], 2).unwrap();
    let pri = [0.1, 0.1];
    assert_eq!(clink_detect(&[false; 3], &r, &pri).unwrap(), [false, false]);
    let single = RoutingMatrix::from_rows(&[vec![1]], 1).unwrap();
    assert_eq!(clink_detect(&[true], &single, &[0.2]).unwrap(), [true]);
    // Path 2 congested but both its links lie on good paths.
    assert!(matches!(clink_detect(&[false, false, true], &r, &pri), Err(securent_core::Error::Infeasible(_))));
    let part = clink_detect_partial(&[false, false, true], &r, &pri).unwrap();
    assert_eq!((part.links, part.unexplained), (vec![false, false], vec![2]));
    assert!(clink_detect(&[true, false, false], &r, &[0.0, 0.5]).is_err());
}

fn brute_clink(states: &[bool], r: &RoutingMatrix, priors: &[f64]) -> f64 {
    let nl = r.n_links();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << nl) {
        let on = |j: usize| mask >> j & 1 == 1;
        let ok = (0..r.n_paths()).all(|i| r.path_links(i).iter().any(|&j| on(j)) == states[i]);
        if ok {
            best = best.min((0..nl).filter(|&j| on(j)).map(|j| -priors[j].ln()).sum());
        }
    }
    best
}

#[test]
fn clink_matches_exhaustive_optimum() {
    let mut rng = seed::rng(99);
    for _ in 0..300 {
        let nl = rng.random_range(1..=10);
        let np = rng.random_range(1..=10);
        let rows: Vec<Vec<u8>> = (0..np)
            .map(|_| {
                let mut row: Vec<u8> = (0..nl).map(|_| u8::from(rng.random::<f64>() < 0.35)).collect();
                if row.iter().all(|v| *v == 0) {
                    row[rng.random_range(0..nl)] = 1;
                }
                row
            })
            .collect();
        let r = RoutingMatrix::from_rows(&rows, nl).unwrap();
        let truth: Vec<bool> = (0..nl).map(|_| rng.random::<f64>() < 0.3).collect();
        let states: Vec<bool> = (0..np).map(|i| r.path_links(i).iter().any(|&j| truth[j])).collect();
        let priors: Vec<f64> = if rng.random::<bool>() {
            vec![0.1; nl]
        } else {
            (0..nl).map(|_| rng.random_range(0.01..0.6)).collect()
        };
        let got = clink_detect(&states, &r, &priors).unwrap();
        let explained: Vec<bool> = (0..np).map(|i| r.path_links(i).iter().any(|&j| got[j])).collect();
        assert_eq!(explained, states);
        let w: f64 = (0..nl).filter(|&j| got[j]).map(|j| -priors[j].ln()).sum();
        assert!((w - brute_clink(&states, &r, &priors)).abs() < 1e-9);
    }
}

#[test]
fn f1_examples() {
    assert_eq!(f1_score(&[true, false], &[true, false]).unwrap(), 1.0);
    assert_eq!(f1_score(&[false, true], &[false, false]).unwrap(), 0.0);
    assert_eq!(f1_score(&[false; 3], &[false; 3]).unwrap(), 1.0);
    let t = [true, true, true, false, false];
    let p = [true, true, false, true, false];
    assert!((f1_score(&t, &p).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    assert!(f1_score(&[true], &[true, false]).is_err());
}

#[test]
fn nrmse_examples() {
    assert_eq!(nrmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
    assert_eq!(nrmse(&[3.0, -7.5, 2.0], &[0.0; 3]).unwrap(), 1.0);
    assert!((nrmse(&[3.0, 4.0], &[0.0, 0.0]).unwrap() - 1.0).abs() < 1e-12);
    assert!((nrmse(&[3.0, 4.0], &[3.0, 0.0]).unwrap() - 0.8).abs() < 1e-12);
    assert!(nrmse(&[0.0, 0.0], &[1.0, 1.0]).is_err());
    assert!(nrmse(&[1.0], &[1.0, 2.0]).is_err());
    assert_eq!(inference_similarity(0.25), 0.75);
    assert_eq!(inference_similarity(2.5), 0.0);
}

#[test]
fn nnls_identity_and_full_rank() {
    let id = RoutingMatrix::from_rows(&[vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]], 3).unwrap();
    let y = [1.5, 0.25, 4.0];
    let x: Vec<f64> = trusted_link_inference(&y, &id).unwrap().into_iter().map(Option::unwrap).collect();
    assert_eq!(x, y);

    let r = RoutingMatrix::from_rows(&[vec![1, 1, 0], vec![0, 1, 1], vec![1, 0, 1], vec![1, 1, 1]], 3).unwrap();
    let truth = [1.2, 3.4, 0.7];
    let y = r.mul_vec(&truth).unwrap();
    let est = trusted_link_inference(&y, &r).unwrap();
    for (e, t) in est.iter().zip(truth) {
        assert!((e.unwrap() - t).abs() <= 1e-6 * t);
    }
}

#[test]
fn nnls_flags_unmeasured_links() {
    let r = RoutingMatrix::from_rows(&[vec![1, 0, 1], vec![1, 0, 0]], 3).unwrap();
    let est = trusted_link_inference(&[3.0, 1.0], &r).unwrap();
    assert!(est[1].is_none());
    assert!(est[0].is_some() && est[2].is_some());
    let zero = RoutingMatrix::from_rows(&[vec![1, 0]], 2).unwrap();
    assert!(trusted_link_inference(&[1.0], &zero).is_ok());
    let empty = securent_core::topology::build_routing_matrix(&Default::default(), 3).unwrap();
    assert!(trusted_link_inference(&[], &empty).is_err());
}

fn residual(r: &RoutingMatrix, x: &[f64], y: &[f64]) -> f64 {
    r.mul_vec(x).unwrap().iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}

#[test]
fn nnls_beats_truth_on_rank_deficient_systems() {
    let mut rng = seed::rng(5);
    for _ in 0..100 {
        let nl = rng.random_range(3..8);
        let np = rng.random_range(1..nl);
        let rows: Vec<Vec<u8>> = (0..np)
            .map(|i| (0..nl).map(|j| u8::from(j == i % nl || rng.random::<f64>() < 0.4)).collect())
            .collect();
        let r = RoutingMatrix::from_rows(&rows, nl).unwrap();
        let truth: Vec<f64> = (0..nl).map(|_| rng.random_range(0.5..5.0)).collect();
        let y: Vec<f64> = r.mul_vec(&truth).unwrap().iter().map(|v| v + rng.random_range(-0.5..0.5)).collect();
        let est: Vec<f64> = trusted_link_inference(&y, &r).unwrap().into_iter().map(|e| e.unwrap_or(0.0)).collect();
        assert!(est.iter().all(|v| *v >= 0.0));
        assert!(residual(&r, &est, &y) <= residual(&r, &truth, &y) + 1e-6);
    }
}

#[test]
fn report_row_has_header_arity() {
    let rep = EvaluationReport {
        topology: "ernet".into(),
        method: "none".into(),
        n_probes: 200,
        p: 0.1,
        seed: 3,
        similarity: 1.0,
        f1: 0.5,
        nrmse: 0.25,
        objective: -1.0,
        distortion: 0.0,
    };
    assert_eq!(rep.csv_row().split(',').count(), EvaluationReport::CSV_HEADER.split(',').count());
    assert_eq!(rep.csv_row(), "ernet,none,200,0.1,3,1,0.5,0.25,-1");
}

fn small_views() -> impl Strategy<Value = (GraphView, GraphView)> {
    let one = |tag: &'static str| {
        (2usize..=5).prop_flat_map(move |n| {
            let edges = proptest::collection::vec((0..n, 0..n), 0..8);
            let anchors = proptest::collection::vec(any::<bool>(), n);
            (Just(n), edges, anchors).prop_map(move |(n, e, a)| {
                let mut edges: Vec<(usize, usize)> = e.into_iter().filter(|(x, y)| x != y).map(|(x, y)| (x.min(y), x.max(y))).collect();
                edges.sort();
                edges.dedup();
                // Anchors share names across graphs; free nodes do not.
                let nodes = (0..n).map(|i| if a[i] { format!("m{i}") } else { format!("{tag}{i}") }).collect();
                GraphView {
                    nodes,
                    edges,
                    anchors: (0..n).filter(|&i| a[i]).collect(),
                }
            })
        })
    };
    (one("g"), one("h"))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn edit_costs_match_exhaustive_search((g, h) in small_views()) {
        let ec = edit_costs(&g, &h);
        prop_assert!(ec.exact);
        prop_assert_eq!(ec.g0, brute_g0(&g, &h));
        let s = similarity(ec.g0, ec.g1, ec.g2).unwrap();
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert_eq!(edit_costs(&g, &g).g0, 0.0);
    }

    #[test]
    fn nrmse_is_scale_free(y in proptest::collection::vec(-50.0f64..50.0, 1..30), noise in proptest::collection::vec(-5.0f64..5.0, 30), c in 1e-3f64..1e3) {
        prop_assume!(y.iter().any(|v| v.abs() > 1e-3));
        let yh: Vec<f64> = y.iter().zip(&noise).map(|(a, b)| a + b).collect();
        let a = nrmse(&y, &yh).unwrap();
        let b = nrmse(&y.iter().map(|v| v * c).collect::<Vec<_>>(), &yh.iter().map(|v| v * c).collect::<Vec<_>>()).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
    }

    #[test]
    fn f1_ignores_link_order(pairs in proptest::collection::vec((any::<bool>(), any::<bool>()), 1..30), key in any::<u64>()) {
        let (t, p): (Vec<bool>, Vec<bool>) = pairs.iter().copied().unzip();
        let mut idx: Vec<usize> = (0..t.len()).collect();
        use rand::seq::SliceRandom;
        idx.shuffle(&mut seed::rng(key));
        let tp: Vec<bool> = idx.iter().map(|&i| t[i]).collect();
        let pp: Vec<bool> = idx.iter().map(|&i| p[i]).collect();
        let f = f1_score(&t, &p).unwrap();
        prop_assert_eq!(f, f1_score(&tp, &pp).unwrap());
        prop_assert!((0.0..=1.0).contains(&f));
    }
}
