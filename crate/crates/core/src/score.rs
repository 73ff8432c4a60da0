//! District-decomposed scoring with a concurrent cache of submodel fits.
//!
//! For a district `C` with outside parents `P = pa(C) \ C` the submodel has
//! vertices `C ∪ P`, keeps the directed edges pointing into `C` and the
//! bidirected edges inside `C`, and nothing else. Its term is the submodel's
//! log-likelihood minus the marginal log-likelihood of each vertex of `P`.
//! The terms sum to the log-likelihood of the full graph.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use dashmap::DashMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::MixedGraph;
use crate::ricf::{
    district_loglik, penalized_score, ricf, ricf_core, FitResult, RicfOptions, SampleCovariance,
};

/// Identity of one district submodel on one dataset, in original labels.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CacheKey {
    pub dataset: u64,
    /// Hash of the fitting options; fits under different options never mix.
    pub context: u64,
    pub district: Vec<usize>,
    pub parents: Vec<usize>,
    pub directed: Vec<(usize, usize)>,
    pub bidirected: Vec<(usize, usize)>,
}

impl CacheKey {
    /// Key from explicit parts; vertex sets and edge lists are canonicalized.
    pub fn new(
        district: &[usize],
        directed: &[(usize, usize)],
        bidirected: &[(usize, usize)],
        parents: &[usize],
        dataset: u64,
    ) -> Self {
        let mut district = district.to_vec();
        district.sort_unstable();
        district.dedup();
        let mut parents = parents.to_vec();
        parents.sort_unstable();
        parents.dedup();
        let mut directed = directed.to_vec();
        directed.sort_unstable();
        directed.dedup();
        let mut bidirected: Vec<_> = bidirected
            .iter()
            .map(|&(a, b)| (a.min(b), a.max(b)))
            .collect();
        bidirected.sort_unstable();
        bidirected.dedup();
        CacheKey {
            dataset,
            context: 0,
            district,
            parents,
            directed,
            bidirected,
        }
    }

    /// Key of the submodel `g` induces around `district`.
    pub fn for_district(g: &MixedGraph, district: &[usize], dataset: u64) -> Self {
        let mut inside = vec![false; g.num_vertices()];
        for &v in district {
            inside[v] = true;
        }
        let mut directed = Vec::new();
        let mut parents = Vec::new();
        for &v in district {
            for p in g.parents(v) {
                directed.push((p, v));
                if !inside[p] {
                    parents.push(p);
                }
            }
        }
        let bidirected: Vec<_> = g
            .bidirected_edges()
            .into_iter()
            .filter(|&(a, b)| inside[a] && inside[b])
            .collect();
        CacheKey::new(district, &directed, &bidirected, &parents, dataset)
    }

    fn with_context(mut self, context: u64) -> Self {
        self.context = context;
        self
    }

    /// Stable hex digest of the key.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.dataset.to_le_bytes());
        h.update(self.context.to_le_bytes());
        for (tag, list) in [(b'C', &self.district), (b'P', &self.parents)] {
            h.update([tag]);
            h.update((list.len() as u64).to_le_bytes());
            for &v in list {
                h.update((v as u64).to_le_bytes());
            }
        }
        for (tag, list) in [(b'D', &self.directed), (b'B', &self.bidirected)] {
            h.update([tag]);
            h.update((list.len() as u64).to_le_bytes());
            for &(a, b) in list {
                h.update((a as u64).to_le_bytes());
                h.update((b as u64).to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

/// Fitted district term stored in the cache.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistrictFit {
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Concurrent map from submodel key to fitted term. Inserts of equal keys
/// carry equal values, so racing writers are harmless.
#[derive(Debug, Default)]
pub struct ScoreCache {
    map: DashMap<CacheKey, DistrictFit>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl ScoreCache {
    pub fn new() -> Self {
        ScoreCache::default()
    }

    pub fn get(&self, key: &CacheKey) -> Option<DistrictFit> {
        let found = self.map.get(key).map(|v| *v);
        if found.is_some() {
            self.hits.fetch_add(1, Ordering::Relaxed);
        } else {
            self.misses.fetch_add(1, Ordering::Relaxed);
        }
        found
    }

    pub fn insert(&self, key: CacheKey, value: DistrictFit) {
        self.map.insert(key, value);
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn clear(&self) {
        self.map.clear();
    }
}

/// A district term together with its vertex set.
#[derive(Clone, Debug, PartialEq)]
pub struct DecomposedTerm {
    pub district: Vec<usize>,
    pub fit: DistrictFit,
}

fn options_context(opts: &RicfOptions) -> u64 {
    let mut h = Sha256::new();
    h.update((opts.max_iter as u64).to_le_bytes());
    h.update(opts.tol.to_bits().to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Fits the submodel of one district and returns its term.
fn fit_district(
    g: &MixedGraph,
    district: &[usize],
    sample: &SampleCovariance,
    opts: &RicfOptions,
) -> Result<DistrictFit> {
    let key = CacheKey::for_district(g, district, sample.id());
    let mut vertices: Vec<usize> = district.iter().chain(key.parents.iter()).copied().collect();
    vertices.sort_unstable();
    let local = |v: usize| vertices.binary_search(&v).expect("vertex in submodel");
    let directed: Vec<_> = key.directed.iter().map(|&(a, b)| (local(a), local(b))).collect();
    let bidirected: Vec<_> = key
        .bidirected
        .iter()
        .map(|&(a, b)| (local(a), local(b)))
        .collect();
    let sub = MixedGraph::from_edges(vertices.len(), &directed, &bidirected)?;
    let sub_sample = sample.restrict(&vertices)?;
    let n = sub_sample.n();
    let state = ricf_core(&sub, &sub_sample.mle_cov(), n, opts)?;
    let local_district: Vec<usize> = district.iter().map(|&v| local(v)).collect();
    let loglik = district_loglik(&local_district, &state.theta, sub_sample.cov(), n)?;
    Ok(DistrictFit {
        loglik,
        converged: state.converged,
        iterations: state.iterations,
    })
}

/// Per-district terms of the log-likelihood of `g`, fitted without a cache.
pub fn decomposed_loglik(
    g: &MixedGraph,
    sample: &SampleCovariance,
    opts: &RicfOptions,
) -> Result<(f64, Vec<DecomposedTerm>)> {
    check_inputs(g, sample)?;
    let mut terms = Vec::new();
    for c in g.districts() {
        let fit = fit_district(g, &c, sample, opts)?;
        terms.push(DecomposedTerm { district: c, fit });
    }
    Ok((terms.iter().map(|t| t.fit.loglik).sum(), terms))
}

/// Joint log-likelihood of a district submodel minus the parent marginals.
/// Equivalent to the district term; exposed for checking the identity.
pub fn district_term_by_marginals(
    g: &MixedGraph,
    district: &[usize],
    sample: &SampleCovariance,
    opts: &RicfOptions,
) -> Result<f64> {
    let key = CacheKey::for_district(g, district, sample.id());
    let mut vertices: Vec<usize> = district.iter().chain(key.parents.iter()).copied().collect();
    vertices.sort_unstable();
    let local = |v: usize| vertices.binary_search(&v).expect("vertex in submodel");
    let directed: Vec<_> = key.directed.iter().map(|&(a, b)| (local(a), local(b))).collect();
    let bidirected: Vec<_> = key.bidirected.iter().map(|&(a, b)| (local(a), local(b))).collect();
    let sub = MixedGraph::from_edges(vertices.len(), &directed, &bidirected)?;
    let sub_sample = sample.restrict(&vertices)?;
    let joint = ricf(&sub, &sub_sample, opts)?;
    let mut marginal = 0.0;
    for &p in &key.parents {
        let lp = local(p);
        let var = joint.theta_hat.omega[(lp, lp)];
        let one = nalgebra::DMatrix::from_element(1, 1, var);
        let s = nalgebra::DMatrix::from_element(1, 1, sub_sample.cov()[(lp, lp)]);
        marginal += crate::ricf::log_likelihood(&one, &s, sub_sample.n())?;
    }
    Ok(joint.loglik - marginal)
}

fn check_inputs(g: &MixedGraph, sample: &SampleCovariance) -> Result<()> {
    if sample.dim() != g.num_vertices() {
        return Err(Error::DimensionMismatch {
            expected: g.num_vertices(),
            found: sample.dim(),
        });
    }
    if !g.is_bap() {
        return Err(Error::NotBap);
    }
    Ok(())
}

/// Penalized score of `g` through the district decomposition and `cache`.
pub fn score(
    g: &MixedGraph,
    sample: &SampleCovariance,
    opts: &RicfOptions,
    cache: &ScoreCache,
) -> Result<f64> {
    check_inputs(g, sample)?;
    let context = options_context(opts);
    let mut total = 0.0;
    for c in g.districts() {
        let key = CacheKey::for_district(g, &c, sample.id()).with_context(context);
        let fit = match cache.get(&key) {
            Some(f) => f,
            None => {
                let f = fit_district(g, &c, sample, opts)?;
                cache.insert(key, f);
                f
            }
        };
        total += fit.loglik;
    }
    Ok(penalized_score(
        total,
        g.num_vertices(),
        g.num_edges(),
        sample.n(),
        opts.penalty,
    ))
}

/// A dataset, fitting options and a shared cache bundled for repeated scoring.
#[derive(Clone, Debug)]
pub struct Scorer {
    sample: Arc<SampleCovariance>,
    opts: RicfOptions,
    cache: Arc<ScoreCache>,
}

impl Scorer {
    pub fn new(sample: SampleCovariance, opts: RicfOptions) -> Self {
        Scorer::with_cache(Arc::new(sample), opts, Arc::new(ScoreCache::new()))
    }

    pub fn with_cache(sample: Arc<SampleCovariance>, opts: RicfOptions, cache: Arc<ScoreCache>) -> Self {
        Scorer { sample, opts, cache }
    }

    pub fn sample(&self) -> &SampleCovariance {
        &self.sample
    }

    pub fn options(&self) -> &RicfOptions {
        &self.opts
    }

    pub fn cache(&self) -> &ScoreCache {
        &self.cache
    }

    pub fn score(&self, g: &MixedGraph) -> Result<f64> {
        score(g, &self.sample, &self.opts, &self.cache)
    }

    /// Full monolithic fit, for reporting parameters of a chosen graph.
    pub fn fit(&self, g: &MixedGraph) -> Result<FitResult> {
        ricf(g, &self.sample, &self.opts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_data, sample_parameters};
    use crate::rng;
    use nalgebra::DMatrix;

    fn motivating() -> MixedGraph {
        MixedGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3)], &[(1, 3)]).unwrap()
    }

    fn sample_for(g: &MixedGraph, n: usize, seed: u64) -> SampleCovariance {
        let mut r = rng::stream(seed, &[]);
        let theta = sample_parameters(g, &mut r).unwrap();
        SampleCovariance::from_data(&sample_data(&theta, n, &mut r).unwrap()).unwrap()
    }

    #[test]
    fn motivating_districts_give_three_terms() {
        let g = motivating();
        let s = sample_for(&g, 200, 1);
        let (total, terms) = decomposed_loglik(&g, &s, &RicfOptions::default()).unwrap();
        let sets: Vec<_> = terms.iter().map(|t| t.district.clone()).collect();
        assert_eq!(sets, vec![vec![0], vec![1, 3], vec![2]]);
        let mono = ricf(&g, &s, &RicfOptions::default()).unwrap();
        assert!((total - mono.loglik).abs() < 1e-8);
    }

    #[test]
    fn marginal_form_matches_district_term() {
        let g = motivating();
        let s = sample_for(&g, 300, 5);
        let opts = RicfOptions::default();
        let (_, terms) = decomposed_loglik(&g, &s, &opts).unwrap();
        for t in terms {
            let alt = district_term_by_marginals(&g, &t.district, &s, &opts).unwrap();
            assert!((alt - t.fit.loglik).abs() < 1e-8);
        }
    }

    #[test]
    fn empty_graph_identity_score() {
        let n = 100;
        let s = SampleCovariance::new(DMatrix::identity(3, 3), n).unwrap();
        let got = score(&MixedGraph::empty(3), &s, &RicfOptions::default(), &ScoreCache::new()).unwrap();
        let sigma = DMatrix::<f64>::identity(3, 3) * 0.99;
        let ll = crate::ricf::log_likelihood(&sigma, s.cov(), n).unwrap();
        let want = (ll - 3.0 * (n as f64).ln()) / n as f64;
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn key_depends_on_local_structure_only() {
        let a = MixedGraph::from_edges(4, &[(0, 1), (2, 3)], &[(1, 2)]).unwrap();
        let b = MixedGraph::from_edges(4, &[(0, 1), (2, 3), (0, 3)], &[(1, 2)]).unwrap();
        assert_eq!(
            CacheKey::for_district(&a, &[1, 2], 7),
            CacheKey::for_district(&b, &[1, 2], 7)
        );
        let c = MixedGraph::from_edges(4, &[(0, 1), (3, 2)], &[(1, 2)]).unwrap();
        assert_ne!(
            CacheKey::for_district(&a, &[1, 2], 7).fingerprint(),
            CacheKey::for_district(&c, &[1, 2], 7).fingerprint()
        );
        assert_ne!(
            CacheKey::for_district(&a, &[1, 2], 7),
            CacheKey::for_district(&a, &[1, 2], 8)
        );
    }

    #[test]
    fn warm_cache_is_bitwise_equal() {
        let g = motivating();
        let s = sample_for(&g, 120, 3);
        let scorer = Scorer::new(s, RicfOptions::default());
        let cold = scorer.score(&g).unwrap();
        assert_eq!(scorer.cache().hits(), 0);
        let warm = scorer.score(&g).unwrap();
        assert_eq!(cold.to_bits(), warm.to_bits());
        assert_eq!(scorer.cache().hits(), 3);
    }

    #[test]
    fn rejects_bows() {
        let g = MixedGraph::from_edges(3, &[(0, 1), (1, 2)], &[(1, 2)]).unwrap();
        let s = SampleCovariance::new(DMatrix::identity(3, 3), 10).unwrap();
        assert!(matches!(
            score(&g, &s, &RicfOptions::default(), &ScoreCache::new()),
            Err(Error::NotBap)
        ));
    }
}
