//! Distributional equivalence of BAPs: same-collider enumeration (a
//! sufficient condition), skeleton, v-structure and m-separation checks
//! (necessary conditions), the score-based empirical class, and parameter
//! translation between collider-equivalent graphs.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use log::warn;
use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphClass, MixedGraph, Moves};
use crate::model::Parameters;
use crate::ricf::{RicfOptions, SampleCovariance};
use crate::rng::{self, tag};
use crate::score::{score, ScoreCache, Scorer};

/// Largest skeleton accepted by [`collider_equivalents`].
pub const COLLIDER_EDGE_LIMIT: usize = 20;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Orient {
    Forward,
    Backward,
    Both,
}

impl Orient {
    const ALL: [Orient; 3] = [Orient::Forward, Orient::Backward, Orient::Both];

    /// Whether the edge `(lo, hi)` has an arrowhead at `v`.
    fn head_at(self, lo: usize, v: usize) -> bool {
        match self {
            Orient::Forward => v != lo,
            Orient::Backward => v == lo,
            Orient::Both => true,
        }
    }
}

/// Every BAP with the skeleton and collider triples of `g`, sorted;
/// includes `g` itself.
pub fn collider_equivalents(g: &MixedGraph) -> Result<Vec<MixedGraph>> {
    if !g.is_bap() {
        return Err(Error::NotBap);
    }
    let edges: Vec<(usize, usize)> = g.skeleton().into_iter().collect();
    if edges.len() > COLLIDER_EDGE_LIMIT {
        return Err(Error::TooLarge {
            what: "skeleton edge count for collider enumeration",
            limit: COLLIDER_EDGE_LIMIT,
        });
    }
    let colliders = g.collider_triples();
    let edge_index: BTreeMap<(usize, usize), usize> =
        edges.iter().enumerate().map(|(k, &e)| (e, k)).collect();
    // for each edge, the adjacent-triple checks that become decidable once it is set
    let mut checks: Vec<Vec<(usize, usize, usize, bool)>> = vec![Vec::new(); edges.len()];
    let d = g.num_vertices();
    for j in 0..d {
        let nbrs: Vec<usize> = (0..d).filter(|&u| u != j && g.adjacent(u, j)).collect();
        for (x, &i) in nbrs.iter().enumerate() {
            for &k in &nbrs[x + 1..] {
                let e1 = edge_index[&(i.min(j), i.max(j))];
                let e2 = edge_index[&(k.min(j), k.max(j))];
                let want = colliders.contains(&(i, j, k));
                checks[e1.max(e2)].push((e1.min(e2), e1.max(e2), j, want));
            }
        }
    }
    let mut state = vec![Orient::Forward; edges.len()];
    let mut out = Vec::new();
    assign(0, &edges, &checks, &mut state, d, &mut out);
    out.sort();
    Ok(out)
}

fn assign(
    k: usize,
    edges: &[(usize, usize)],
    checks: &[Vec<(usize, usize, usize, bool)>],
    state: &mut [Orient],
    d: usize,
    out: &mut Vec<MixedGraph>,
) {
    if k == edges.len() {
        let mut h = MixedGraph::empty(d);
        for (e, &(lo, hi)) in edges.iter().enumerate() {
            match state[e] {
                Orient::Forward => h.add_directed(lo, hi),
                Orient::Backward => h.add_directed(hi, lo),
                Orient::Both => h.add_bidirected(lo, hi),
            }
        }
        if h.is_acyclic() {
            out.push(h);
        }
        return;
    }
    for o in Orient::ALL {
        state[k] = o;
        let ok = checks[k].iter().all(|&(e1, e2, j, want)| {
            let h1 = state[e1].head_at(edges[e1].0, j);
            let h2 = state[e2].head_at(edges[e2].0, j);
            (h1 && h2) == want
        });
        if ok {
            assign(k + 1, edges, checks, state, d, out);
        }
    }
}

/// A conditional independence statement `a ⊥ b | cond`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Separation {
    pub a: usize,
    pub b: usize,
    pub cond: Vec<usize>,
}

/// Which necessary conditions for equivalence fail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub skeleton_differs: bool,
    pub v_structures_differ: bool,
    /// A separation holding in exactly one of the two graphs.
    pub m_separation_witness: Option<Separation>,
    /// Whether all conditioning sets were checked or only a sample.
    pub m_separation_exhaustive: bool,
}

impl ViolationReport {
    /// True when some necessary condition fails, proving non-equivalence.
    pub fn certifies_non_equivalence(&self) -> bool {
        self.skeleton_differs || self.v_structures_differ || self.m_separation_witness.is_some()
    }
}

/// Exhaustive m-separation comparison up to this many vertices.
pub const MSEP_EXHAUSTIVE_LIMIT: usize = 6;

/// Settings for the sampled m-separation comparison on larger graphs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MsepSampling {
    /// Conditioning sets drawn per vertex pair.
    pub sets_per_pair: usize,
    pub seed: u64,
}

impl Default for MsepSampling {
    fn default() -> Self {
        MsepSampling {
            sets_per_pair: 64,
            seed: 0,
        }
    }
}

/// Compares skeletons, v-structures and m-separations of two graphs.
pub fn necessary_violations(g1: &MixedGraph, g2: &MixedGraph) -> Result<ViolationReport> {
    necessary_violations_with(g1, g2, MsepSampling::default())
}

pub fn necessary_violations_with(
    g1: &MixedGraph,
    g2: &MixedGraph,
    sampling: MsepSampling,
) -> Result<ViolationReport> {
    let d = g1.num_vertices();
    if g2.num_vertices() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: g2.num_vertices(),
        });
    }
    if !g1.is_acyclic() || !g2.is_acyclic() {
        return Err(Error::Cyclic);
    }
    let exhaustive = d <= MSEP_EXHAUSTIVE_LIMIT;
    let mut witness = None;
    let mut rng = rng::stream(sampling.seed, &[tag::MSEP_SUBSAMPLE]);
    'pairs: for a in 0..d {
        for b in a + 1..d {
            let rest: Vec<usize> = (0..d).filter(|&v| v != a && v != b).collect();
            let sets: Vec<u64> = if exhaustive {
                (0..1u64 << rest.len()).collect()
            } else {
                (0..sampling.sets_per_pair)
                    .map(|_| rng.random::<u64>() & ((1u64 << rest.len().min(63)) - 1))
                    .collect()
            };
            for mask in sets {
                let cond: Vec<usize> = rest
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| mask >> k & 1 == 1)
                    .map(|(_, &v)| v)
                    .collect();
                if g1.m_separated(a, b, &cond)? != g2.m_separated(a, b, &cond)? {
                    witness = Some(Separation { a, b, cond });
                    break 'pairs;
                }
            }
        }
    }
    Ok(ViolationReport {
        skeleton_differs: g1.skeleton() != g2.skeleton(),
        v_structures_differ: g1.v_structures() != g2.v_structures(),
        m_separation_witness: witness,
        m_separation_exhaustive: exhaustive,
    })
}

/// Result of comparing the induced subgraphs on a vertex subset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubgraphReport {
    pub vertices: Vec<usize>,
    pub violations: ViolationReport,
    /// Score difference of the induced subgraphs on the restricted data.
    pub score_gap: Option<f64>,
    /// Non-equivalence of the subgraphs, hence of the full graphs.
    pub non_equivalent: bool,
}

/// Compares `g1` and `g2` restricted to `w`. Non-equivalent subgraphs imply
/// non-equivalent graphs. With data the subgraphs are also scored, and a
/// gap above `tolerance` counts as separating them.
pub fn subgraph_equivalence_check(
    g1: &MixedGraph,
    g2: &MixedGraph,
    w: &[usize],
    data: Option<(&SampleCovariance, &RicfOptions)>,
    tolerance: f64,
) -> Result<SubgraphReport> {
    if w.len() < 2 {
        return Err(Error::InvalidQuery("vertex subset needs at least two vertices".into()));
    }
    let (s1, _) = g1.induced_subgraph(w)?;
    let (s2, _) = g2.induced_subgraph(w)?;
    let violations = necessary_violations(&s1, &s2)?;
    let score_gap = match data {
        Some((sample, opts)) => {
            let sub = sample.restrict(w)?;
            let cache = ScoreCache::new();
            Some((score(&s1, &sub, opts, &cache)? - score(&s2, &sub, opts, &cache)?).abs())
        }
        None => None,
    };
    let non_equivalent = violations.certifies_non_equivalence() || score_gap.is_some_and(|g| g > tolerance);
    Ok(SubgraphReport {
        vertices: w.to_vec(),
        violations,
        score_gap,
        non_equivalent,
    })
}

/// How a graph entered an empirical equivalence class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ColliderIdentical,
    GreedyFound,
}

/// Graphs scoring within `epsilon` of the reference score `zeta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceClass {
    pub reference: MixedGraph,
    pub zeta: f64,
    pub epsilon: f64,
    pub members: Vec<ClassMember>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMember {
    pub graph: MixedGraph,
    pub provenance: Provenance,
    pub score: f64,
}

impl EquivalenceClass {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn graphs(&self) -> impl Iterator<Item = &MixedGraph> {
        self.members.iter().map(|m| &m.graph)
    }

    pub fn contains(&self, g: &MixedGraph) -> bool {
        self.members.iter().any(|m| &m.graph == g)
    }
}

/// Builds the empirical equivalence class of `g`.
///
/// Seeds are the collider-equivalent graphs (or `g` alone when its skeleton
/// is too large to enumerate). From every seed, edge-type changes are
/// explored depth first up to depth `d (d - 1) / 2`; a neighbor with other
/// v-structures is skipped, and one scoring within `epsilon` of `zeta` is
/// accepted and expanded.
pub fn greedy_equivalence_class(
    g: &MixedGraph,
    scorer: &Scorer,
    epsilon: f64,
) -> Result<EquivalenceClass> {
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::InvalidQuery("epsilon must be non-negative".into()));
    }
    let zeta = scorer.score(g)?;
    let seeds = match collider_equivalents(g) {
        Ok(s) => s,
        Err(Error::TooLarge { .. }) => {
            warn!("skeleton of {g} too large for collider enumeration; seeding with the graph alone");
            vec![g.clone()]
        }
        Err(e) => return Err(e),
    };
    let d = g.num_vertices();
    let max_depth = d * d.saturating_sub(1) / 2;
    let v_ref = g.v_structures();
    let mut members: BTreeMap<MixedGraph, (Provenance, f64)> = BTreeMap::new();
    let seed_scores: Vec<Result<f64>> = seeds.par_iter().map(|s| scorer.score(s)).collect();
    for (s, sc) in seeds.iter().zip(seed_scores) {
        members.insert(s.clone(), (Provenance::ColliderIdentical, sc?));
    }
    let mut visited: HashSet<MixedGraph> = seeds.iter().cloned().collect();
    let mut stack: Vec<(MixedGraph, usize)> = seeds.iter().rev().map(|s| (s.clone(), 0)).collect();
    while let Some((cur, depth)) = stack.pop() {
        if depth >= max_depth {
            continue;
        }
        let fresh: Vec<MixedGraph> = cur
            .neighbors_with(GraphClass::Bap, Moves::CHANGE, None)
            .into_iter()
            .filter(|h| !visited.contains(h) && h.v_structures() == v_ref)
            .collect();
        let scores: Vec<Result<f64>> = fresh.par_iter().map(|h| scorer.score(h)).collect();
        let mut accepted = Vec::new();
        for (h, sc) in fresh.into_iter().zip(scores) {
            visited.insert(h.clone());
            let sc = sc?;
            if (sc - zeta).abs() <= epsilon {
                members.entry(h.clone()).or_insert((Provenance::GreedyFound, sc));
                accepted.push(h);
            }
        }
        for h in accepted.into_iter().rev() {
            stack.push((h, depth + 1));
        }
    }
    Ok(EquivalenceClass {
        reference: g.clone(),
        zeta,
        epsilon,
        members: members
            .into_iter()
            .map(|(graph, (provenance, score))| ClassMember {
                graph,
                provenance,
                score,
            })
            .collect(),
    })
}

fn edge_label(g: &MixedGraph, theta: &Parameters, a: usize, b: usize) -> f64 {
    if g.has_directed(a, b) {
        theta.b[(b, a)]
    } else if g.has_directed(b, a) {
        theta.b[(a, b)]
    } else {
        theta.omega[(a, b)]
    }
}

/// Moves standardized parameters of `g1` onto the collider-equivalent `g2`
/// with the same implied covariance: edge labels are copied pair by pair
/// whatever the edge type, then the error variances of `g2` are solved
/// in topological order so that all implied variances equal one.
pub fn translate_parameters(theta1: &Parameters, g1: &MixedGraph, g2: &MixedGraph) -> Result<Parameters> {
    let d = g1.num_vertices();
    if g2.num_vertices() != d || theta1.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: g2.num_vertices(),
        });
    }
    theta1.check_sparsity(g1)?;
    if g1.skeleton() != g2.skeleton() || g1.collider_triples() != g2.collider_triples() {
        return Err(Error::Incompatible(
            "graphs must share skeleton and collider triples".into(),
        ));
    }
    let order = g2.topological_order().ok_or(Error::Cyclic)?;
    let mut b = DMatrix::zeros(d, d);
    let mut omega = DMatrix::zeros(d, d);
    for (lo, hi) in g1.skeleton() {
        let lambda = edge_label(g1, theta1, lo, hi);
        if g2.has_directed(lo, hi) {
            b[(hi, lo)] = lambda;
        } else if g2.has_directed(hi, lo) {
            b[(lo, hi)] = lambda;
        } else {
            omega[(lo, hi)] = lambda;
            omega[(hi, lo)] = lambda;
        }
    }
    // A = (I - B)^-1 by rows in topological order
    let mut a = DMatrix::<f64>::zeros(d, d);
    for &v in &order {
        a[(v, v)] = 1.0;
        for p in g2.parents(v) {
            let row = a.row(p) * b[(v, p)];
            let mut target = a.row_mut(v);
            target += row;
        }
    }
    let base = &a * &omega * a.transpose();
    for &v in &order {
        let mut rhs = 1.0 - base[(v, v)];
        for &h in &order {
            if h != v {
                rhs -= a[(v, h)] * a[(v, h)] * omega[(h, h)];
            }
        }
        omega[(v, v)] = rhs;
    }
    Ok(Parameters { b, omega })
}

/// Collider-equivalent graphs of `g` as a set, for membership checks.
pub fn collider_class_set(g: &MixedGraph) -> Result<BTreeSet<MixedGraph>> {
    Ok(collider_equivalents(g)?.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{phi, sample_data, sample_parameters};

    fn g(d: usize, dir: &[(usize, usize)], bi: &[(usize, usize)]) -> MixedGraph {
        MixedGraph::from_edges(d, dir, bi).unwrap()
    }

    #[test]
    fn single_edge_class() {
        let got = collider_equivalents(&g(2, &[(0, 1)], &[])).unwrap();
        let mut want = vec![g(2, &[(0, 1)], &[]), g(2, &[(1, 0)], &[]), g(2, &[], &[(0, 1)])];
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn chain_class_has_no_collider_at_middle() {
        let got = collider_equivalents(&g(3, &[(0, 1), (1, 2)], &[])).unwrap();
        // 9 assignments minus the 4 with two heads at vertex 1
        assert_eq!(got.len(), 5);
        for h in &got {
            assert!(h.collider_triples().is_empty());
        }
    }

    #[test]
    fn collider_class_keeps_both_heads() {
        let got = collider_equivalents(&g(3, &[(0, 1), (2, 1)], &[])).unwrap();
        let mut want = vec![
            g(3, &[(0, 1), (2, 1)], &[]),
            g(3, &[(2, 1)], &[(0, 1)]),
            g(3, &[(0, 1)], &[(1, 2)]),
            g(3, &[], &[(0, 1), (1, 2)]),
        ];
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn class_is_symmetric() {
        let base = g(4, &[(0, 1), (1, 2), (0, 3)], &[(2, 3)]);
        for h in collider_equivalents(&base).unwrap() {
            assert!(collider_class_set(&h).unwrap().contains(&base));
        }
    }

    #[test]
    fn class_member_filters() {
        let a = g(4, &[(0, 2), (3, 1)], &[(0, 1), (0, 3), (2, 3)]);
        let b = g(4, &[(0, 2), (0, 3), (3, 1)], &[(0, 1), (2, 3)]);
        let c = g(4, &[(0, 2), (3, 1)], &[(0, 1), (0, 3), (2, 3), (1, 2)]);
        let ab = necessary_violations(&a, &b).unwrap();
        assert!(!ab.skeleton_differs && !ab.v_structures_differ);
        assert!(ab.m_separation_witness.is_some());
        assert!(necessary_violations(&a, &c).unwrap().skeleton_differs);
        assert!(!necessary_violations(&a, &a).unwrap().certifies_non_equivalence());
    }

    #[test]
    fn translation_identity_and_chain() {
        let mut r = rng::stream(5, &[]);
        let g1 = g(3, &[(1, 0), (1, 2)], &[]);
        let g2 = g(3, &[(1, 0), (2, 1)], &[]);
        let t1 = sample_parameters(&g1, &mut r).unwrap().standardized().unwrap();
        let same = translate_parameters(&t1, &g1, &g1).unwrap();
        assert!((&same.b - &t1.b).amax() < 1e-12 && (&same.omega - &t1.omega).amax() < 1e-12);
        let t2 = translate_parameters(&t1, &g1, &g2).unwrap();
        let p1 = phi(&g1, &t1).unwrap();
        let p2 = phi(&g2, &t2).unwrap();
        assert!((p1 - p2).amax() < 1e-10);
    }

    #[test]
    fn translation_rejects_different_colliders() {
        let g1 = g(3, &[(0, 1), (1, 2)], &[]);
        let g2 = g(3, &[(0, 1), (2, 1)], &[]);
        let t = Parameters::identity(3);
        assert!(matches!(translate_parameters(&t, &g1, &g2), Err(Error::Incompatible(_))));
    }

    #[test]
    fn subgraph_pairs_and_triples() {
        let a = g(3, &[(0, 1), (1, 2)], &[]);
        let b = g(3, &[(0, 1), (2, 1)], &[]);
        let c = g(3, &[(0, 1)], &[]);
        assert!(subgraph_equivalence_check(&a, &c, &[1, 2], None, 0.0).unwrap().non_equivalent);
        assert!(!subgraph_equivalence_check(&a, &b, &[0, 1], None, 0.0).unwrap().non_equivalent);
        assert!(subgraph_equivalence_check(&a, &b, &[0, 1, 2], None, 0.0).unwrap().non_equivalent);
        assert!(subgraph_equivalence_check(&a, &b, &[0], None, 0.0).is_err());
    }

    #[test]
    fn greedy_class_on_chain_data() {
        let truth = g(3, &[(0, 1), (1, 2)], &[]);
        let mut r = rng::stream(8, &[]);
        let theta = sample_parameters(&truth, &mut r).unwrap();
        let x = sample_data(&theta, 500, &mut r).unwrap();
        let scorer = Scorer::new(SampleCovariance::from_data(&x).unwrap(), RicfOptions::default());
        let class = greedy_equivalence_class(&truth, &scorer, 1e-10).unwrap();
        assert!(class.contains(&truth));
        for m in &class.members {
            assert_eq!(m.graph.skeleton(), truth.skeleton());
            assert_eq!(m.graph.v_structures(), truth.v_structures());
        }
        assert!(class.len() >= 5);
    }
}
