use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bapsearch::effects::min_abs_effects;
use bapsearch::equivalence::{greedy_equivalence_class, EquivalenceClass};
use bapsearch::graph::{enumerate, GraphClass, ENUMERATION_LIMIT};
use bapsearch::io::{self, Dataset, SCHEMA_VERSION};
use bapsearch::rng;
use bapsearch::search::{greedy_search, sample_uniform_bap, SearchConfig};
use bapsearch::simulation::{fit_dataset, run_simulation, FitConfig, SimulationConfig, TruthEffects};
use bapsearch::{RicfOptions, Scorer};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

/// Structure learning for bow-free acyclic path diagrams.
#[derive(Parser)]
#[command(name = "bap", version)]
struct Cli {
    /// Master random seed.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Worker threads; all cores when unset.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a graph to data and print the fit as JSON.
    Fit {
        #[arg(long)]
        graph: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        ricf: RicfArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Greedy structure search with random restarts.
    Search {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        search: SearchArgs,
        #[command(flatten)]
        ricf: RicfArgs,
        /// Also search DAGs and start one BAP search from the best DAG.
        #[arg(long)]
        compare_dag: bool,
        #[arg(long, default_value_t = 100)]
        dag_restarts: usize,
        /// Write the best graph here.
        #[arg(long)]
        graph_out: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw uniformly random BAPs.
    SampleBap {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        max_in_degree: Option<usize>,
        #[arg(long, default_value_t = 1)]
        count: usize,
        /// Chain steps; d^4 when unset.
        #[arg(long)]
        burn_in: Option<usize>,
        /// Directory for `graph_<k>.txt` files; stdout when unset.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Empirical equivalence class of a graph on data.
    EquivClass {
        #[arg(long)]
        graph: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        ricf: RicfArgs,
        #[arg(long, default_value_t = 1e-10)]
        epsilon: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Minimal absolute causal effects over a class written by `equiv-class`.
    Effects {
        #[arg(long)]
        class: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        ricf: RicfArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulation study from a TOML config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        replicates: Option<usize>,
        /// Use the generating parameters for the reference effects.
        #[arg(long)]
        true_effects: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        roc_out: Option<PathBuf>,
    },
    /// List every graph of a class on a few vertices.
    Enumerate {
        #[arg(long)]
        d: usize,
        #[arg(long, default_value = "bap")]
        class: GraphClass,
        /// Print only the count.
        #[arg(long)]
        count: bool,
    },
}

#[derive(Args)]
struct DataArgs {
    /// CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Fit raw covariances instead of standardized data.
    #[arg(long)]
    no_standardize: bool,
    /// Take logarithms before anything else.
    #[arg(long)]
    log_transform: bool,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset> {
        let mut ds = Dataset::read_csv(&self.data).with_context(|| format!("reading {}", self.data.display()))?;
        if self.log_transform {
            ds = ds.log_transform()?;
        }
        if !self.no_standardize {
            ds = ds.standardize()?;
        }
        Ok(ds)
    }
}

#[derive(Args)]
struct RicfArgs {
    #[arg(long, default_value_t = 10)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Multiplier on the (d + #edges) log n penalty.
    #[arg(long, default_value_t = 1.0)]
    penalty: f64,
}

impl RicfArgs {
    fn options(&self) -> RicfOptions {
        RicfOptions {
            max_iter: self.max_iter,
            tol: self.tol,
            penalty: self.penalty,
            track_loglik: false,
        }
    }
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value = "bap")]
    class: GraphClass,
    #[arg(long)]
    max_in_degree: Option<usize>,
    #[arg(long)]
    neighbor_subset: Option<usize>,
    #[arg(long)]
    forward_only: bool,
    /// Add one forward search from the empty graph.
    #[arg(long)]
    include_forward: bool,
    #[arg(long)]
    burn_in: Option<usize>,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_json(out: Option<&Path>, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit(out, &text)
}

fn check_dims(g: &bapsearch::MixedGraph, ds: &Dataset) -> Result<()> {
    if g.num_vertices() != ds.d() {
        bail!("graph has {} vertices but the data have {} columns", g.num_vertices(), ds.d());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Fit { graph, data, ricf, out } => {
            let g = io::read_graph(&graph)?;
            let ds = data.load()?;
            check_dims(&g, &ds)?;
            let fit = bapsearch::ricf(&g, &ds.covariance()?, &ricf.options())?;
            if !fit.converged {
                log::warn!("RICF stopped after {} sweeps without converging", fit.iterations);
            }
            emit_json(
                out.as_deref(),
                &json!({ "schema_version": SCHEMA_VERSION, "graph": g, "columns": ds.names, "fit": fit }),
            )
        }
        Command::Search {
            data,
            search,
            ricf,
            compare_dag,
            dag_restarts,
            graph_out,
            out,
        } => {
            if compare_dag {
                let raw = Dataset::read_csv(&data.data)?;
                let cfg = FitConfig {
                    bap_restarts: search.restarts,
                    dag_restarts,
                    seed,
                    standardize: !data.no_standardize,
                    log_transform: data.log_transform,
                    max_in_degree: search.max_in_degree,
                    inject_best_dag: true,
                    ricf: ricf.options(),
                };
                let report = fit_dataset(&raw, &cfg)?;
                eprintln!("best BAP score {:.6}, best DAG score {:.6}", report.bap.score, report.dag.score);
                if let Some(p) = &graph_out {
                    io::write_graph(p, &report.bap.best)?;
                }
                return emit_json(out.as_deref(), &serde_json::to_value(&report)?);
            }
            let ds = data.load()?;
            let scorer = Scorer::new(ds.covariance()?, ricf.options());
            let cfg = SearchConfig {
                restarts: search.restarts,
                max_in_degree: search.max_in_degree,
                class: search.class,
                neighbor_subset: search.neighbor_subset,
                seed,
                forward_only: search.forward_only,
                include_forward_run: search.include_forward,
                burn_in: search.burn_in,
                ..SearchConfig::default()
            };
            let found = greedy_search(&scorer, &cfg)?;
            eprintln!("best score {:.6}: {}", found.score, found.best);
            if let Some(p) = &graph_out {
                io::write_graph(p, &found.best)?;
            }
            emit_json(
                out.as_deref(),
                &json!({
                    "schema_version": SCHEMA_VERSION,
                    "columns": ds.names,
                    "config": cfg,
                    "best": found.best,
                    "score": found.score,
                    "fit": found.fit,
                    "trace": found.trace,
                }),
            )
        }
        Command::SampleBap {
            d,
            max_in_degree,
            count,
            burn_in,
            out_dir,
        } => {
            if d == 0 {
                bail!("d must be at least 1");
            }
            if let Some(dir) = &out_dir {
                fs::create_dir_all(dir)?;
            }
            let mut text = String::new();
            for k in 0..count {
                let mut r = rng::stream(seed, &[rng::tag::SAMPLE, k as u64]);
                let g = sample_uniform_bap(d, &mut r, max_in_degree, burn_in);
                match &out_dir {
                    Some(dir) => io::write_graph(dir.join(format!("graph_{k}.txt")), &g)?,
                    None => {
                        text.push_str(&format!("# sample {k}\n"));
                        text.push_str(&io::format_graph(&g));
                    }
                }
            }
            emit(None, &text)
        }
        Command::EquivClass {
            graph,
            data,
            ricf,
            epsilon,
            out,
        } => {
            let g = io::read_graph(&graph)?;
            let ds = data.load()?;
            check_dims(&g, &ds)?;
            let scorer = Scorer::new(ds.covariance()?, ricf.options());
            let class = greedy_equivalence_class(&g, &scorer, epsilon)?;
            eprintln!("{} members", class.len());
            emit_json(out.as_deref(), &serde_json::to_value(&class)?)
        }
        Command::Effects { class, data, ricf, out } => {
            let class: EquivalenceClass = io::read_json(&class)?;
            let ds = data.load()?;
            check_dims(&class.reference, &ds)?;
            let scorer = Scorer::new(ds.covariance()?, ricf.options());
            let bounds = min_abs_effects(&class, &scorer)?;
            if bounds.members_failed > 0 {
                log::warn!("{} class members could not be fitted", bounds.members_failed);
            }
            emit(out.as_deref(), &io::matrix_to_csv(&ds.names, &bounds.matrix))
        }
        Command::Simulate {
            config,
            replicates,
            true_effects,
            out,
            roc_out,
        } => {
            let mut cfg = SimulationConfig::load(&config)?;
            if let Some(r) = replicates {
                cfg.replicates = r;
            }
            if true_effects {
                cfg.truth_effects = TruthEffects::True;
            }
            cfg.validate()?;
            let report = run_simulation(&cfg)?;
            match report.mean_auc {
                Some(a) => eprintln!("mean AUC {a:.4} over {} replicates", report.replicates.len()),
                None => eprintln!("no replicate had a defined AUC"),
            }
            if let Some(p) = &roc_out {
                fs::write(p, report.roc_csv())?;
            }
            emit_json(out.as_deref(), &serde_json::to_value(&report)?)
        }
        Command::Enumerate { d, class, count } => {
            if d > ENUMERATION_LIMIT {
                bail!("enumeration is limited to d <= {ENUMERATION_LIMIT}");
            }
            let all = enumerate(d, class)?;
            if count {
                return emit(None, &format!("{}\n", all.len()));
            }
            let mut text = String::new();
            for (k, g) in all.iter().enumerate() {
                text.push_str(&format!("# graph {k}\n"));
                text.push_str(&io::format_graph(g));
            }
            emit(None, &text)
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    }
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
