use bapsearch::equivalence::{collider_equivalents, greedy_equivalence_class, translate_parameters};
use bapsearch::graph::enumerate;
use bapsearch::model::{phi, sample_data, sample_parameters};
use bapsearch::ricf::{log_likelihood, ricf};
use bapsearch::rng::stream;
use bapsearch::search::{greedy_search, sample_uniform_bap, StartKind};
use bapsearch::{GraphClass, MixedGraph, Parameters, RicfOptions, SampleCovariance, Scorer, SearchConfig};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

fn data(g: &MixedGraph, n: usize, seed: u64) -> (Parameters, DMatrix<f64>) {
    let mut r = stream(seed, &[]);
    let theta = sample_parameters(g, &mut r).unwrap();
    let x = sample_data(&theta, n, &mut r).unwrap();
    (theta, x)
}

fn motivating() -> MixedGraph {
    MixedGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3)], &[(1, 3)]).unwrap()
}

/// BIC-style Gaussian DAG score from per-vertex regressions.
fn regression_score(g: &MixedGraph, s: &SampleCovariance) -> f64 {
    let n = s.n() as f64;
    let sm = s.mle_cov();
    let mut ll = 0.0;
    for v in 0..g.num_vertices() {
        let pa = g.parents(v);
        let mut var = sm[(v, v)];
        if !pa.is_empty() {
            let spp = DMatrix::from_fn(pa.len(), pa.len(), |a, b| sm[(pa[a], pa[b])]);
            let spv = DMatrix::from_fn(pa.len(), 1, |a, _| sm[(pa[a], v)]);
            var -= (spv.transpose() * spp.lu().solve(&spv).unwrap())[(0, 0)];
        }
        ll -= 0.5 * n * ((2.0 * std::f64::consts::PI * var).ln() + 1.0);
    }
    (ll - (g.num_vertices() + g.num_edges()) as f64 * n.ln()) / n
}

#[test]
fn dag_score_matches_regression_score() {
    let mut r = stream(40, &[]);
    for k in 0..30 {
        let d = r.random_range(2..=6);
        let g = bapsearch::search::sample_uniform_in(d, &mut r, GraphClass::Dag, None, None);
        let (_, x) = data(&g, 400, k);
        let scorer = Scorer::new(SampleCovariance::from_data(&x).unwrap(), RicfOptions::default());
        let s = scorer.score(&g).unwrap();
        assert!((s - regression_score(&g, scorer.sample())).abs() < 1e-8);
    }
}

#[test]
fn score_is_relabeling_invariant() {
    let mut r = stream(41, &[]);
    for k in 0..20 {
        let g = sample_uniform_bap(5, &mut r, None, None);
        let (_, x) = data(&g, 300, 100 + k);
        let mut perm: Vec<usize> = (0..5).collect();
        perm.shuffle(&mut r);
        // column perm[v] of the new data is old column v
        let mut inv = [0; 5];
        for (v, &p) in perm.iter().enumerate() {
            inv[p] = v;
        }
        let xp = DMatrix::from_fn(x.nrows(), 5, |i, j| x[(i, inv[j])]);
        // capped RICF depends on the update order, so compare converged fits
        let opts = RicfOptions {
            max_iter: 5000,
            tol: 1e-12,
            ..RicfOptions::default()
        };
        let a = Scorer::new(SampleCovariance::from_data(&x).unwrap(), opts);
        let b = Scorer::new(SampleCovariance::from_data(&xp).unwrap(), opts);
        let sa = a.score(&g).unwrap();
        let sb = b.score(&g.permute(&perm).unwrap()).unwrap();
        assert!((sa - sb).abs() < 1e-9, "{sa} {sb}");
    }
}

#[test]
fn null_edge_costs_the_penalty() {
    let truth = MixedGraph::from_edges(3, &[(0, 1)], &[]).unwrap();
    let n = 20000;
    let (_, x) = data(&truth, n, 7);
    let scorer = Scorer::new(SampleCovariance::from_data(&x).unwrap(), RicfOptions::default());
    let with = MixedGraph::from_edges(3, &[(0, 1), (1, 2)], &[]).unwrap();
    let drop = scorer.score(&truth).unwrap() - scorer.score(&with).unwrap();
    let pen = (n as f64).ln() / n as f64;
    // the likelihood gain is chi-square(1) / (2n)
    assert!(drop > 0.0 && drop <= pen, "{drop} vs {pen}");
    assert!(drop >= pen - 15.0 / (2.0 * n as f64), "{drop} vs {pen}");
}

#[test]
fn collider_equivalent_variant_ties() {
    let g = motivating();
    let (_, x) = data(&g, 2000, 8);
    let s = SampleCovariance::from_data(&x).unwrap();
    let opts = RicfOptions {
        max_iter: 2000,
        tol: 1e-12,
        ..RicfOptions::default()
    };
    let scorer = Scorer::new(s, opts);
    let reference = scorer.score(&g).unwrap();
    let variants = collider_equivalents(&g).unwrap();
    assert!(variants.len() > 1);
    for h in variants {
        assert!((scorer.score(&h).unwrap() - reference).abs() < 1e-8, "{h}");
    }
}

#[test]
fn saturated_supermodel_recovers_exact_covariance() {
    let g = motivating();
    let (theta, _) = data(&g, 10, 9);
    let sigma = bapsearch::model::phi(&g, &theta).unwrap();
    let n = 500;
    let s = SampleCovariance::new(&sigma * (n as f64 / (n - 1) as f64), n).unwrap();
    // 0->1->2->3 plus 1<->3 and every other pair directed forward
    let sup = MixedGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (0, 2), (0, 3)], &[(1, 3)]).unwrap();
    let opts = RicfOptions {
        max_iter: 1000,
        tol: 1e-13,
        ..RicfOptions::default()
    };
    let fit = ricf(&sup, &s, &opts).unwrap();
    let sat = log_likelihood(&sigma, s.cov(), n).unwrap();
    assert!((fit.loglik - sat).abs() < 1e-8);
    assert!(fit.theta_hat.check_sparsity(&sup).is_ok());
}

#[test]
fn greedy_matches_exhaustive_on_three_vertices() {
    let all = enumerate(3, GraphClass::Bap).unwrap();
    let truth = MixedGraph::from_edges(3, &[(0, 1)], &[(1, 2)]).unwrap();
    let (_, x) = data(&truth, 3000, 10);
    let scorer = Scorer::new(SampleCovariance::from_data(&x).unwrap(), RicfOptions::default());
    let best = all.iter().map(|g| scorer.score(g).unwrap()).fold(f64::NEG_INFINITY, f64::max);
    let out = greedy_search(
        &scorer,
        &SearchConfig {
            restarts: 20,
            seed: 3,
            ..SearchConfig::default()
        },
    )
    .unwrap();
    assert!(out.score >= best - 1e-8);
    for r in &out.trace.restarts {
        for s in &r.steps {
            assert!(s.graph.is_bap());
        }
    }
}

#[test]
fn forward_search_ascends_from_empty() {
    let g = motivating();
    let (_, x) = data(&g, 1000, 11);
    let scorer = Scorer::new(SampleCovariance::from_data(&x).unwrap(), RicfOptions::default());
    let out = greedy_search(
        &scorer,
        &SearchConfig {
            forward_only: true,
            ..SearchConfig::default()
        },
    )
    .unwrap();
    assert_eq!(out.trace.restarts.len(), 1);
    let r = &out.trace.restarts[0];
    assert_eq!(r.start, StartKind::Forward);
    assert_eq!(r.steps[0].graph, MixedGraph::empty(4));
    for w in r.steps.windows(2) {
        assert!(w[1].score > w[0].score);
        assert_eq!(w[1].graph.num_edges(), w[0].graph.num_edges() + 1);
    }
    assert!(r.steps.len() > 1);
}

#[test]
fn search_is_reproducible() {
    let g = motivating();
    let (_, x) = data(&g, 400, 12);
    let cfg = SearchConfig {
        restarts: 4,
        seed: 77,
        neighbor_subset: Some(6),
        ..SearchConfig::default()
    };
    let run = || {
        let scorer = Scorer::new(SampleCovariance::from_data(&x).unwrap(), RicfOptions::default());
        let out = greedy_search(&scorer, &cfg).unwrap();
        let paths: Vec<Vec<(f64, MixedGraph)>> = out
            .trace
            .restarts
            .iter()
            .map(|r| r.steps.iter().map(|s| (s.score, s.graph.clone())).collect())
            .collect();
        (out.best, out.score, paths)
    };
    assert_eq!(run(), run());
}

#[test]
fn equivalence_class_respects_filters_and_tolerance() {
    let truth = MixedGraph::from_edges(4, &[(0, 1), (1, 2)], &[(2, 3)]).unwrap();
    let (_, x) = data(&truth, 1000, 13);
    let scorer = Scorer::new(SampleCovariance::from_data(&x).unwrap(), RicfOptions::default());
    let class = greedy_equivalence_class(&truth, &scorer, 1e-10).unwrap();
    let seeds = collider_equivalents(&truth).unwrap();
    for s in &seeds {
        assert!(class.contains(s));
    }
    for m in &class.members {
        assert_eq!(m.graph.skeleton(), truth.skeleton());
        assert_eq!(m.graph.v_structures(), truth.v_structures());
        if m.provenance == bapsearch::equivalence::Provenance::GreedyFound {
            assert!((m.score - class.zeta).abs() <= 1e-10);
        }
    }
    let wide = greedy_equivalence_class(&truth, &scorer, 1e9).unwrap();
    assert!(wide.len() >= class.len());
}

#[test]
fn translation_round_trip() {
    let mut r = stream(42, &[]);
    let mut checked = 0;
    while checked < 30 {
        let d = r.random_range(3..=5);
        let g1 = sample_uniform_bap(d, &mut r, None, None);
        let class = collider_equivalents(&g1).unwrap();
        let g2 = class[r.random_range(0..class.len())].clone();
        let t1 = sample_parameters(&g1, &mut r).unwrap().standardized().unwrap();
        let t2 = translate_parameters(&t1, &g1, &g2).unwrap();
        assert!((phi(&g1, &t1).unwrap() - phi(&g2, &t2).unwrap()).amax() < 1e-9);
        let back = translate_parameters(&t2, &g2, &g1).unwrap();
        assert!((&back.b - &t1.b).amax() < 1e-9);
        assert!((&back.omega - &t1.omega).amax() < 1e-9);
        let eig = nalgebra::SymmetricEigen::new(t2.omega.clone()).eigenvalues.min();
        assert!(eig > -1e-10);
        checked += 1;
    }
}
