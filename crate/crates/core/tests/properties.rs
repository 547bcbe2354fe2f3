use disparity::centrality::{self, GenderRanking, HiIndexConfig, Measure, PageRankConfig, ScoreTable};
use disparity::diffusion::{estimate_spread, exact_spread_small, ProbGraph};
use disparity::glass_ceiling::{ccdf, mann_whitney_u};
use disparity::graph::{filter_inactive, Gender, GraphBuilder, InteractionGraph, InteractionType};
use disparity::seeding::{female_quota, invert_omega, isotonic_fit, select_seeds, ScalingSample, ScalingTable};
use proptest::prelude::*;

fn gender() -> impl Strategy<Value = Gender> {
    prop_oneof![Just(Gender::Female), Just(Gender::Male)]
}

/// Genders plus `(sender, receiver, count)` rows, self-loops excluded.
fn raw_graph(max_nodes: usize, max_edges: usize) -> impl Strategy<Value = (Vec<Gender>, Vec<(usize, usize, u64)>)> {
    (2..=max_nodes).prop_flat_map(move |n| {
        (
            prop::collection::vec(gender(), n),
            prop::collection::vec((0..n, 0..n, 1..=6u64), 0..=max_edges)
                .prop_map(|es| es.into_iter().filter(|e| e.0 != e.1).collect()),
        )
    })
}

fn build(genders: &[Gender], edges: &[(usize, usize, u64)], scale: u64) -> InteractionGraph {
    let mut b = GraphBuilder::new(InteractionType::Comment);
    for (v, &g) in genders.iter().enumerate() {
        b.add_node(&v.to_string(), g);
    }
    for &(s, r, c) in edges {
        b.add_interactions(&s.to_string(), &r.to_string(), c * scale).unwrap();
    }
    b.build()
}

fn edge_list(g: &InteractionGraph) -> Vec<(String, String, u64)> {
    g.edges().map(|(u, v, w)| (g.id(u).to_string(), g.id(v).to_string(), w)).collect()
}

fn prob_graph() -> impl Strategy<Value = ProbGraph> {
    (2..=7usize).prop_flat_map(|n| {
        (
            prop::collection::vec(gender(), n),
            prop::collection::btree_map((0..n, 0..n), 0.0..=1.0f64, 0..=10),
        )
            .prop_map(|(genders, edges)| {
                let edges = edges.into_iter().filter(|((u, v), _)| u != v).map(|((u, v), p)| (u, v, p)).collect();
                ProbGraph::from_edges(genders, edges).unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn filter_is_idempotent((genders, edges) in raw_graph(20, 60), min_total in 1..6u64) {
        let g = build(&genders, &edges, 1);
        let once = filter_inactive(&g, min_total);
        let twice = filter_inactive(&once, min_total);
        prop_assert_eq!(once.ids(), twice.ids());
        prop_assert_eq!(edge_list(&once), edge_list(&twice));
        for v in 0..once.node_count() {
            prop_assert!(once.total_weight(v) >= min_total);
        }
    }

    #[test]
    fn hi_index_bounds((genders, edges) in raw_graph(20, 80), zeta in 0.0..=1.0f64) {
        let g = build(&genders, &edges, 1);
        let h = centrality::hi_index(&g, HiIndexConfig::default());
        let th = centrality::target_hi_index(&g, zeta, HiIndexConfig::default()).unwrap();
        for v in 0..g.node_count() {
            let hv = h.scores()[v];
            prop_assert!(hv >= 0.0 && hv <= g.in_edges(v).len() as f64);
            prop_assert!(th.scores()[v] >= 0.0 && th.scores()[v] <= hv + 1e-12);
        }
    }

    #[test]
    fn pagerank_ignores_weight_scale((genders, edges) in raw_graph(15, 50), scale in 2..5u64) {
        let cfg = PageRankConfig::default();
        let a = centrality::pagerank(&build(&genders, &edges, 1), &cfg).unwrap();
        let b = centrality::pagerank(&build(&genders, &edges, scale), &cfg).unwrap();
        for (x, y) in a.table.scores().iter().zip(b.table.scores()) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn ccdf_invariant_under_monotone_transform(genders in prop::collection::vec(gender(), 1..40), seed in any::<u64>()) {
        let g = build(&genders, &[], 1);
        let scores: Vec<f64> = (0..genders.len()).map(|i| ((seed >> (i % 60)) % 7) as f64).collect();
        let shifted: Vec<f64> = scores.iter().map(|x| (x * 3.0 + 1.0).exp()).collect();
        let a = ScoreTable::new(Measure::InDegree, None, &g, scores);
        let b = ScoreTable::new(Measure::InDegree, None, &g, shifted);
        for gd in Gender::BOTH {
            if g.count_of(gd) == 0 {
                prop_assert!(ccdf(&a, &g, gd).is_err());
                continue;
            }
            let fa: Vec<f64> = ccdf(&a, &g, gd).unwrap().points.iter().map(|p| p.1).collect();
            let fb: Vec<f64> = ccdf(&b, &g, gd).unwrap().points.iter().map(|p| p.1).collect();
            prop_assert_eq!(fa.first().copied(), Some(1.0));
            prop_assert!(fa.windows(2).all(|w| w[0] > w[1]));
            prop_assert_eq!(fa, fb);
        }
    }

    #[test]
    fn u_test_symmetry(a in prop::collection::vec(0..12i32, 1..30), b in prop::collection::vec(0..12i32, 1..30)) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        let ab = mann_whitney_u(&a, &b).unwrap();
        let ba = mann_whitney_u(&b, &a).unwrap();
        prop_assert_eq!(ab.u_statistic + ba.u_statistic, (a.len() * b.len()) as f64);
        prop_assert_eq!(ab.p_value, ba.p_value);
        prop_assert!(ab.p_value > 0.0 && ab.p_value <= 1.0);
    }

    #[test]
    fn exact_spread_grows_with_seeds(pg in prob_graph(), s1 in 0..7usize, s2 in 0..7usize) {
        let n = pg.node_count();
        let (s1, s2) = (s1 % n, s2 % n);
        let one = exact_spread_small(&pg, &[s1]).unwrap();
        let both = exact_spread_small(&pg, &[s1, s2]).unwrap();
        prop_assert!(both.mean_spread + 1e-12 >= one.mean_spread);
        prop_assert!(one.mean_spread >= 1.0 - 1e-12 && one.mean_spread <= n as f64 + 1e-12);
        prop_assert!((0.0..=1.0).contains(&one.female_ratio));
    }

    #[test]
    fn estimate_respects_bounds(pg in prob_graph(), seed in any::<u64>()) {
        let e = estimate_spread(&pg, &[0], 200, seed).unwrap();
        prop_assert!(e.mean_spread >= 1.0 && e.mean_spread <= pg.node_count() as f64);
        prop_assert!((0.0..=1.0).contains(&e.mean_female_ratio));
        prop_assert!(e.std_spread >= 0.0);
    }

    #[test]
    fn isotonic_fit_is_monotone_and_mean_preserving(y in prop::collection::vec(-5.0..5.0f64, 0..30)) {
        let fit = isotonic_fit(&y);
        prop_assert_eq!(fit.len(), y.len());
        prop_assert!(fit.windows(2).all(|w| w[0] <= w[1] + 1e-12));
        let (sy, sf): (f64, f64) = (y.iter().sum(), fit.iter().sum());
        prop_assert!((sy - sf).abs() < 1e-9);
    }

    #[test]
    fn inversion_is_monotone_in_target(
        s in prop::collection::vec(0.0..=1.0f64, 2..12),
        z1 in 0.0..=1.0f64,
        z2 in 0.0..=1.0f64,
    ) {
        let k = s.len();
        let tbl = ScalingTable {
            measure: Measure::TargetHiIndex,
            zeta: None,
            samples: s.iter().enumerate().map(|(i, &s)| ScalingSample { r: i as f64 / (k - 1) as f64, s, spread: 1.0 }).collect(),
            skipped: vec![],
        };
        let (lo, hi) = if z1 <= z2 { (z1, z2) } else { (z2, z1) };
        let a = invert_omega(&tbl, lo).unwrap();
        let b = invert_omega(&tbl, hi).unwrap();
        prop_assert!((0.0..=1.0).contains(&a.r));
        // With equal spreads, flats resolve to their first point, so order holds.
        prop_assert!(a.r <= b.r + 1e-12, "{} -> {}, {} -> {}", lo, a.r, hi, b.r);
    }

    #[test]
    fn select_seeds_sizes(females in 0..30usize, males in 0..30usize, k in 1..30usize, r in 0.0..=1.0f64) {
        let ranking = GenderRanking {
            measure: Measure::TargetHiIndex,
            zeta: Some(0.5),
            females: (0..females).collect(),
            males: (females..females + males).collect(),
            tiebreak: centrality::TIEBREAK_ASCENDING_ID,
        };
        let quota = female_quota(r, k);
        match select_seeds(&ranking, r, k) {
            Ok(set) => {
                prop_assert_eq!(set.members.len(), k);
                prop_assert_eq!(set.female_count, quota);
                prop_assert!(set.members[..quota].iter().all(|&v| v < females));
                prop_assert!(set.members[quota..].iter().all(|&v| v >= females));
            }
            Err(_) => prop_assert!(quota > females || k - quota > males),
        }
    }
}
