//! Structure search: the MCMC sampler for uniformly random BAPs and greedy
//! hill climbing with random restarts.

use std::time::Instant;

use log::{debug, warn};
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphClass, MixedGraph, Moves};
use crate::ricf::FitResult;
use crate::rng::{self, tag};
use crate::score::Scorer;

/// Proposal drawn by one chain step: an ordered position and a coin.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Proposal {
    pub i: usize,
    pub j: usize,
    pub sigma: bool,
}

fn within_cap(g: &MixedGraph, cap: Option<usize>, v: usize) -> bool {
    cap.is_none_or(|a| g.in_degree(v) <= a)
}

/// Applies the move `(i, j, sigma)` to `g`.
///
/// The pair counts as occupied at `(i, j)` when `i -> j` or `i <-> j` is
/// present; then `sigma = 0` removes that edge and `sigma = 1` does nothing.
/// Otherwise `sigma = 0` adds `i -> j` and `sigma = 1` adds `i <-> j`, each a
/// no-op if the result would leave the class (a cycle, a bow, a bidirected
/// edge in a DAG) or break the in-degree cap. In particular, when `j -> i`
/// is present the position `(i, j)` never changes the graph, which keeps the
/// chain symmetric.
pub fn mcmc_apply(
    g: &MixedGraph,
    p: Proposal,
    class: GraphClass,
    max_in_degree: Option<usize>,
) -> MixedGraph {
    let Proposal { i, j, sigma } = p;
    let mut next = g.clone();
    if g.has_directed(i, j) || g.has_bidirected(i, j) {
        if !sigma {
            next.clear_pair(i, j);
        }
        return next;
    }
    if g.has_directed(j, i) {
        return next;
    }
    if sigma {
        if class == GraphClass::Dag {
            return next;
        }
        next.add_bidirected(i, j);
        if within_cap(&next, max_in_degree, i) && within_cap(&next, max_in_degree, j) {
            return next;
        }
    } else if !g.has_directed_path(j, i) {
        next.add_directed(i, j);
        if within_cap(&next, max_in_degree, j) {
            return next;
        }
    }
    g.clone()
}

/// Draws one proposal uniformly. Requires `d >= 2`.
pub fn draw_proposal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Proposal {
    let i = rng.random_range(0..d);
    let mut j = rng.random_range(0..d - 1);
    if j >= i {
        j += 1;
    }
    Proposal {
        i,
        j,
        sigma: rng.random_bool(0.5),
    }
}

/// One step of the BAP chain.
pub fn mcmc_step<R: Rng + ?Sized>(
    g: &MixedGraph,
    rng: &mut R,
    max_in_degree: Option<usize>,
) -> MixedGraph {
    mcmc_step_in(g, rng, GraphClass::Bap, max_in_degree)
}

/// One step of the chain restricted to `class` (BAP or DAG).
pub fn mcmc_step_in<R: Rng + ?Sized>(
    g: &MixedGraph,
    rng: &mut R,
    class: GraphClass,
    max_in_degree: Option<usize>,
) -> MixedGraph {
    if g.num_vertices() < 2 {
        return g.clone();
    }
    let p = draw_proposal(g.num_vertices(), rng);
    mcmc_apply(g, p, class, max_in_degree)
}

/// Default burn-in `c * d^4` with `c = 1`.
pub fn default_burn_in(d: usize) -> usize {
    d.pow(4)
}

/// Runs the chain from the empty graph and returns the final state.
pub fn sample_uniform_bap<R: Rng + ?Sized>(
    d: usize,
    rng: &mut R,
    max_in_degree: Option<usize>,
    burn_in: Option<usize>,
) -> MixedGraph {
    sample_uniform_in(d, rng, GraphClass::Bap, max_in_degree, burn_in)
}

/// As [`sample_uniform_bap`] for an arbitrary class.
pub fn sample_uniform_in<R: Rng + ?Sized>(
    d: usize,
    rng: &mut R,
    class: GraphClass,
    max_in_degree: Option<usize>,
    burn_in: Option<usize>,
) -> MixedGraph {
    let mut g = MixedGraph::empty(d);
    for _ in 0..burn_in.unwrap_or_else(|| default_burn_in(d)) {
        g = mcmc_step_in(&g, rng, class, max_in_degree);
    }
    g
}

/// The "naive" sampler: each vertex pair independently gets no edge, a
/// forward directed edge or a bidirected edge, and vertices are then
/// relabeled by a uniform permutation. Not uniform over BAPs.
pub fn sample_naive_bap<R: Rng + ?Sized>(d: usize, rng: &mut R) -> MixedGraph {
    let mut g = MixedGraph::empty(d);
    for i in 0..d {
        for j in i + 1..d {
            match rng.random_range(0..3) {
                1 => g.add_directed(i, j),
                2 => g.add_bidirected(i, j),
                _ => {}
            }
        }
    }
    let mut perm: Vec<usize> = (0..d).collect();
    perm.shuffle(rng);
    g.permute(&perm).expect("valid permutation")
}

/// Exact single-step probability as `outcomes / total`, where `total`
/// counts all `2 d (d - 1)` equally likely (position, coin) outcomes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepProbability {
    pub outcomes: u64,
    pub total: u64,
}

impl StepProbability {
    pub fn value(&self) -> f64 {
        if self.total == 0 {
            1.0
        } else {
            self.outcomes as f64 / self.total as f64
        }
    }
}

/// Probability that one BAP chain step moves `g` to `h`.
pub fn transition_probability(
    g: &MixedGraph,
    h: &MixedGraph,
    max_in_degree: Option<usize>,
) -> Result<StepProbability> {
    transition_probability_in(g, h, GraphClass::Bap, max_in_degree)
}

/// [`transition_probability`] for an arbitrary class.
pub fn transition_probability_in(
    g: &MixedGraph,
    h: &MixedGraph,
    class: GraphClass,
    max_in_degree: Option<usize>,
) -> Result<StepProbability> {
    let d = g.num_vertices();
    if h.num_vertices() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: h.num_vertices(),
        });
    }
    if d < 2 {
        return Ok(StepProbability {
            outcomes: u64::from(g == h),
            total: 0,
        });
    }
    let mut outcomes = 0;
    for i in 0..d {
        for j in 0..d {
            if i == j {
                continue;
            }
            for sigma in [false, true] {
                if mcmc_apply(g, Proposal { i, j, sigma }, class, max_in_degree) == *h {
                    outcomes += 1;
                }
            }
        }
    }
    Ok(StepProbability {
        outcomes,
        total: 2 * (d * (d - 1)) as u64,
    })
}

/// Search settings shared by all restarts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Number of random restarts.
    pub restarts: usize,
    /// Cap on arrowheads per vertex, for starts and moves.
    pub max_in_degree: Option<usize>,
    pub class: GraphClass,
    /// Score only this many uniformly drawn neighbors per step.
    pub neighbor_subset: Option<usize>,
    pub seed: u64,
    /// Additions only, starting from the empty graph.
    pub forward_only: bool,
    /// Run one extra forward search from the empty graph.
    pub include_forward_run: bool,
    /// Extra starting graphs searched with the full move set.
    pub seed_graphs: Vec<MixedGraph>,
    /// Steps of chain burn-in for random starts; `d^4` when unset.
    pub burn_in: Option<usize>,
    /// Safety cap on steps per restart.
    pub max_steps: Option<usize>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            restarts: 10,
            max_in_degree: None,
            class: GraphClass::Bap,
            neighbor_subset: None,
            seed: 0,
            forward_only: false,
            include_forward_run: false,
            seed_graphs: Vec::new(),
            burn_in: None,
            max_steps: None,
        }
    }
}

/// One accepted state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    /// Seconds since the restart began.
    pub elapsed: f64,
    pub score: f64,
    pub graph: MixedGraph,
}

/// How a restart was started.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartKind {
    Random,
    Forward,
    Seeded,
}

/// Path of one restart, in order of acceptance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestartTrace {
    pub index: usize,
    pub start: StartKind,
    pub steps: Vec<TraceStep>,
    pub scored_neighbors: usize,
}

impl RestartTrace {
    pub fn final_step(&self) -> Option<&TraceStep> {
        self.steps.last()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub restarts: Vec<RestartTrace>,
    /// Restarts abandoned because their start graph could not be fitted.
    pub skipped: usize,
}

/// Result of [`greedy_search`].
#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub best: MixedGraph,
    pub score: f64,
    pub fit: FitResult,
    pub trace: SearchTrace,
}

/// Minimum score gain for a move to be accepted.
pub const MIN_IMPROVEMENT: f64 = 1e-12;

struct Start {
    kind: StartKind,
    graph: MixedGraph,
    moves: Moves,
}

fn plan_starts(d: usize, cfg: &SearchConfig) -> Vec<Start> {
    let mut starts = Vec::new();
    if cfg.forward_only {
        // identical runs unless neighbors are subsampled
        let runs = if cfg.neighbor_subset.is_some() { cfg.restarts.max(1) } else { 1 };
        for _ in 0..runs {
            starts.push(Start {
                kind: StartKind::Forward,
                graph: MixedGraph::empty(d),
                moves: Moves::FORWARD,
            });
        }
    } else {
        for r in 0..cfg.restarts {
            let mut rng = rng::stream(cfg.seed, &[tag::RESTART, r as u64]);
            let graph = sample_uniform_in(d, &mut rng, cfg.class, cfg.max_in_degree, cfg.burn_in);
            starts.push(Start {
                kind: StartKind::Random,
                graph,
                moves: Moves::ALL,
            });
        }
        if cfg.include_forward_run {
            starts.push(Start {
                kind: StartKind::Forward,
                graph: MixedGraph::empty(d),
                moves: Moves::FORWARD,
            });
        }
    }
    for g in &cfg.seed_graphs {
        starts.push(Start {
            kind: StartKind::Seeded,
            graph: g.clone(),
            moves: Moves::ALL,
        });
    }
    starts
}

fn climb(scorer: &Scorer, cfg: &SearchConfig, index: usize, start: &Start) -> Option<RestartTrace> {
    let clock = Instant::now();
    let mut rng = rng::stream(cfg.seed, &[tag::SEARCH, index as u64]);
    let mut current = start.graph.clone();
    let mut current_score = match scorer.score(&current) {
        Ok(s) => s,
        Err(e) => {
            warn!("restart {index}: start graph could not be scored: {e}");
            return None;
        }
    };
    let mut steps = vec![TraceStep {
        step: 0,
        elapsed: clock.elapsed().as_secs_f64(),
        score: current_score,
        graph: current.clone(),
    }];
    let mut scored = 0;
    let cap = cfg.max_steps.unwrap_or(usize::MAX);
    while steps.len() <= cap {
        let mut neighbors = current.neighbors_with(cfg.class, start.moves, cfg.max_in_degree);
        if let Some(k) = cfg.neighbor_subset {
            if k < neighbors.len() {
                let mut picked = index::sample(&mut rng, neighbors.len(), k).into_vec();
                picked.sort_unstable();
                neighbors = picked.into_iter().map(|i| neighbors[i].clone()).collect();
            }
        }
        let mut best: Option<(f64, MixedGraph)> = None;
        for h in neighbors {
            scored += 1;
            match scorer.score(&h) {
                Ok(s) => {
                    if best.as_ref().is_none_or(|(b, _)| s > *b) {
                        best = Some((s, h));
                    }
                }
                Err(e) => debug!("restart {index}: neighbor {h} skipped: {e}"),
            }
        }
        match best {
            Some((s, h)) if s > current_score + MIN_IMPROVEMENT => {
                current = h;
                current_score = s;
                steps.push(TraceStep {
                    step: steps.len(),
                    elapsed: clock.elapsed().as_secs_f64(),
                    score: s,
                    graph: current.clone(),
                });
            }
            _ => break,
        }
    }
    Some(RestartTrace {
        index,
        start: start.kind,
        steps,
        scored_neighbors: scored,
    })
}

/// Greedy hill climbing from every planned start; restarts run in parallel
/// and are merged in index order, so results do not depend on scheduling.
pub fn greedy_search(scorer: &Scorer, cfg: &SearchConfig) -> Result<SearchOutcome> {
    let d = scorer.sample().dim();
    for g in &cfg.seed_graphs {
        if g.num_vertices() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: g.num_vertices(),
            });
        }
        if !g.is_admissible(cfg.class) {
            return Err(Error::InvalidQuery(format!("seed graph {g} is not in the search class")));
        }
    }
    let starts = plan_starts(d, cfg);
    if starts.is_empty() {
        return Err(Error::Config("search needs at least one start".into()));
    }
    let results: Vec<Option<RestartTrace>> = starts
        .par_iter()
        .enumerate()
        .map(|(i, s)| climb(scorer, cfg, i, s))
        .collect();
    let skipped = results.iter().filter(|r| r.is_none()).count();
    let restarts: Vec<RestartTrace> = results.into_iter().flatten().collect();
    let mut best: Option<&TraceStep> = None;
    for r in &restarts {
        let last = r.final_step().expect("trace has a start");
        if best.is_none_or(|b| last.score > b.score) {
            best = Some(last);
        }
    }
    let best = best.ok_or_else(|| Error::Config("every restart failed to fit".into()))?;
    let (graph, score) = (best.graph.clone(), best.score);
    let fit = scorer.fit(&graph)?;
    Ok(SearchOutcome {
        best: graph,
        score,
        fit,
        trace: SearchTrace { restarts, skipped },
    })
}
