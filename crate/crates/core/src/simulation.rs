//! End-to-end workflows: the simulation study that scores recovered causal
//! effects by ROC, and BAP-versus-DAG search on a dataset.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use log::{info, warn};
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::effects::{average_roc, min_abs_effects, roc_auc, EffectBounds, RocCurve, RocPoint};
use crate::equivalence::{greedy_equivalence_class, ClassMember};
use crate::error::{Error, Result};
use crate::graph::{GraphClass, MixedGraph};
use crate::io::{Dataset, SCHEMA_VERSION};
use crate::model::{causal_effects, sample_data, sample_parameters, Parameters};
use crate::ricf::{RicfOptions, SampleCovariance};
use crate::rng::{self, tag};
use crate::score::{ScoreCache, Scorer};
use crate::search::{greedy_search, sample_uniform_bap, SearchConfig, SearchTrace};

/// Which parameters produce the reference effect bounds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthEffects {
    /// Refit every member of the true graph's class on the simulated data.
    #[default]
    Refit,
    /// Use the generating parameters of the true graph alone.
    True,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub replicates: usize,
    pub d: usize,
    /// In-degree cap for the generated graphs.
    pub max_in_degree: Option<usize>,
    pub n: usize,
    pub restarts: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub standardize: bool,
    pub truth_effects: TruthEffects,
    /// In-degree cap applied during search; unconstrained when unset.
    pub search_max_in_degree: Option<usize>,
    pub neighbor_subset: Option<usize>,
    pub ricf: RicfOptions,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            replicates: 20,
            d: 8,
            max_in_degree: Some(2),
            n: 1000,
            restarts: 30,
            epsilon: 1e-10,
            seed: 1,
            standardize: true,
            truth_effects: TruthEffects::Refit,
            search_max_in_degree: None,
            neighbor_subset: None,
            ricf: RicfOptions::default(),
        }
    }
}

impl SimulationConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SimulationConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        SimulationConfig::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 || self.d == 0 || self.restarts == 0 {
            return Err(Error::Config("replicates, d and restarts must be positive".into()));
        }
        if self.n < self.d + 1 {
            return Err(Error::Config(format!("n = {} is too small for d = {}", self.n, self.d)));
        }
        if self.epsilon.is_nan() || self.epsilon < 0.0 {
            return Err(Error::Config("epsilon must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateReport {
    pub index: usize,
    pub truth: MixedGraph,
    pub theta: Parameters,
    pub estimate: MixedGraph,
    pub estimate_score: f64,
    pub truth_score: f64,
    pub truth_class: Vec<ClassMember>,
    pub estimate_class: Vec<ClassMember>,
    pub truth_bounds: EffectBounds,
    pub estimate_bounds: EffectBounds,
    pub roc: RocCurve,
    pub skipped_restarts: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateFailure {
    pub index: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub schema_version: u32,
    pub config: SimulationConfig,
    pub replicates: Vec<ReplicateReport>,
    pub failures: Vec<ReplicateFailure>,
    /// Mean over replicates with a defined AUC.
    pub mean_auc: Option<f64>,
    pub average_roc: Vec<RocPoint>,
}

impl SimulationReport {
    /// ROC points of every replicate and of the average, as CSV.
    pub fn roc_csv(&self) -> String {
        let mut out = String::from("curve,fpr,tpr\n");
        for r in &self.replicates {
            for p in &r.roc.points {
                let _ = writeln!(out, "{},{},{}", r.index, p.fpr, p.tpr);
            }
        }
        for p in &self.average_roc {
            let _ = writeln!(out, "average,{},{}", p.fpr, p.tpr);
        }
        out
    }
}

fn derived_seed(master: u64, path: &[u64]) -> u64 {
    rng::stream(master, path).next_u64()
}

/// Runs one replicate: generate, simulate, search, build both classes,
/// bound the effects and compare.
pub fn run_replicate(cfg: &SimulationConfig, index: usize) -> Result<ReplicateReport> {
    let r = index as u64;
    let truth = sample_uniform_bap(
        cfg.d,
        &mut rng::stream(cfg.seed, &[tag::REPLICATE, r, tag::TRUTH_GRAPH]),
        cfg.max_in_degree,
        None,
    );
    let theta = sample_parameters(&truth, &mut rng::stream(cfg.seed, &[tag::REPLICATE, r, tag::PARAMETERS]))?;
    let x = sample_data(&theta, cfg.n, &mut rng::stream(cfg.seed, &[tag::REPLICATE, r, tag::DATA]))?;
    let mut data = Dataset::unnamed(x, format!("simulation seed {} replicate {index}", cfg.seed));
    if cfg.standardize {
        data = data.standardize()?;
    }
    let scorer = Scorer::new(data.covariance()?, cfg.ricf);
    let search_cfg = SearchConfig {
        restarts: cfg.restarts,
        max_in_degree: cfg.search_max_in_degree,
        class: GraphClass::Bap,
        neighbor_subset: cfg.neighbor_subset,
        seed: derived_seed(cfg.seed, &[tag::REPLICATE, r, tag::SEARCH]),
        include_forward_run: true,
        ..SearchConfig::default()
    };
    let found = greedy_search(&scorer, &search_cfg)?;
    let truth_class = greedy_equivalence_class(&truth, &scorer, cfg.epsilon)?;
    let estimate_class = greedy_equivalence_class(&found.best, &scorer, cfg.epsilon)?;
    let truth_bounds = match cfg.truth_effects {
        TruthEffects::Refit => min_abs_effects(&truth_class, &scorer)?,
        TruthEffects::True => EffectBounds::from_effects(&causal_effects(&truth, &theta)?),
    };
    let estimate_bounds = min_abs_effects(&estimate_class, &scorer)?;
    let roc = roc_auc(&truth_bounds, &estimate_bounds)?;
    Ok(ReplicateReport {
        index,
        truth_score: truth_class.zeta,
        truth,
        theta,
        estimate: found.best,
        estimate_score: found.score,
        truth_class: truth_class.members,
        estimate_class: estimate_class.members,
        truth_bounds,
        estimate_bounds,
        roc,
        skipped_restarts: found.trace.skipped,
    })
}

/// Runs all replicates in parallel; the report depends only on the config.
pub fn run_simulation(cfg: &SimulationConfig) -> Result<SimulationReport> {
    cfg.validate()?;
    let results: Vec<Result<ReplicateReport>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|i| {
            let out = run_replicate(cfg, i);
            match &out {
                Ok(rep) => info!("replicate {i}: auc {:?}", rep.roc.auc),
                Err(e) => warn!("replicate {i} failed: {e}"),
            }
            out
        })
        .collect();
    let mut replicates = Vec::new();
    let mut failures = Vec::new();
    for (index, r) in results.into_iter().enumerate() {
        match r {
            Ok(rep) => replicates.push(rep),
            Err(e) => failures.push(ReplicateFailure {
                index,
                message: e.to_string(),
            }),
        }
    }
    let aucs: Vec<f64> = replicates.iter().filter_map(|r| r.roc.auc).collect();
    let mean_auc = (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64);
    let curves: Vec<&RocCurve> = replicates.iter().filter(|r| r.roc.auc.is_some()).map(|r| &r.roc).collect();
    Ok(SimulationReport {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        average_roc: average_roc(&curves),
        replicates,
        failures,
        mean_auc,
    })
}

/// Settings for [`fit_dataset`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub bap_restarts: usize,
    pub dag_restarts: usize,
    pub seed: u64,
    pub standardize: bool,
    pub log_transform: bool,
    pub max_in_degree: Option<usize>,
    /// Start one BAP search from the best DAG.
    pub inject_best_dag: bool,
    pub ricf: RicfOptions,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            bap_restarts: 100,
            dag_restarts: 1000,
            seed: 1,
            standardize: true,
            log_transform: false,
            max_in_degree: None,
            inject_best_dag: true,
            ricf: RicfOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSummary {
    pub class: GraphClass,
    pub best: MixedGraph,
    pub score: f64,
    pub loglik: f64,
    pub trace: SearchTrace,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub schema_version: u32,
    pub source: String,
    pub columns: Vec<String>,
    pub n: usize,
    pub config: FitConfig,
    pub dag: SearchSummary,
    pub bap: SearchSummary,
}

/// Searches `data` for the best DAG and the best BAP.
pub fn fit_dataset(data: &Dataset, cfg: &FitConfig) -> Result<ComparisonReport> {
    let mut prepared = data.clone();
    if cfg.log_transform {
        prepared = prepared.log_transform()?;
    }
    if cfg.standardize {
        prepared = prepared.standardize()?;
    }
    let sample: Arc<SampleCovariance> = Arc::new(prepared.covariance()?);
    let scorer = Scorer::with_cache(sample, cfg.ricf, Arc::new(ScoreCache::new()));
    let dag_cfg = SearchConfig {
        restarts: cfg.dag_restarts,
        class: GraphClass::Dag,
        max_in_degree: cfg.max_in_degree,
        seed: derived_seed(cfg.seed, &[tag::SEARCH, 0]),
        ..SearchConfig::default()
    };
    let dag = greedy_search(&scorer, &dag_cfg)?;
    let bap_cfg = SearchConfig {
        restarts: cfg.bap_restarts,
        class: GraphClass::Bap,
        max_in_degree: cfg.max_in_degree,
        seed: derived_seed(cfg.seed, &[tag::SEARCH, 1]),
        seed_graphs: if cfg.inject_best_dag { vec![dag.best.clone()] } else { Vec::new() },
        ..SearchConfig::default()
    };
    let bap = greedy_search(&scorer, &bap_cfg)?;
    let summary = |class, out: crate::search::SearchOutcome| SearchSummary {
        class,
        best: out.best,
        score: out.score,
        loglik: out.fit.loglik,
        trace: out.trace,
    };
    Ok(ComparisonReport {
        schema_version: SCHEMA_VERSION,
        source: data.source.clone(),
        columns: prepared.names.clone(),
        n: prepared.n(),
        config: cfg.clone(),
        dag: summary(GraphClass::Dag, dag),
        bap: summary(GraphClass::Bap, bap),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smoke() -> SimulationConfig {
        SimulationConfig {
            replicates: 2,
            d: 4,
            n: 200,
            restarts: 5,
            seed: 3,
            ..SimulationConfig::default()
        }
    }

    #[test]
    fn smoke_run_is_deterministic() {
        let a = run_simulation(&smoke()).unwrap();
        let b = run_simulation(&smoke()).unwrap();
        assert_eq!(a.replicates.len() + a.failures.len(), 2);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        for r in &a.replicates {
            for i in 0..4 {
                assert_eq!(r.truth_bounds.matrix[(i, i)], 1.0);
                assert_eq!(r.estimate_bounds.matrix[(i, i)], 1.0);
            }
            if let Some(auc) = r.roc.auc {
                assert!((0.0..=1.0).contains(&auc));
            }
        }
    }

    #[test]
    fn config_from_toml() {
        let cfg = SimulationConfig::from_toml("replicates = 3\nd = 5\nn = 100\n[ricf]\nmax_iter = 20\n").unwrap();
        assert_eq!(cfg.replicates, 3);
        assert_eq!(cfg.ricf.max_iter, 20);
        assert_eq!(cfg.restarts, 30);
        assert!(SimulationConfig::from_toml("d = 5\nn = 3\n").is_err());
        assert!(SimulationConfig::from_toml("bogus = 1\n").is_err());
    }

    #[test]
    fn dataset_comparison_with_injected_dag() {
        let g = MixedGraph::from_edges(4, &[(0, 1), (1, 2)], &[(2, 3)]).unwrap();
        let mut r = rng::stream(11, &[]);
        let theta = sample_parameters(&g, &mut r).unwrap();
        let data = Dataset::unnamed(sample_data(&theta, 300, &mut r).unwrap(), "test");
        let cfg = FitConfig {
            bap_restarts: 3,
            dag_restarts: 3,
            ..FitConfig::default()
        };
        let rep = fit_dataset(&data, &cfg).unwrap();
        assert!(rep.bap.score >= rep.dag.score);
        assert!(rep.dag.best.is_dag());
    }
}
