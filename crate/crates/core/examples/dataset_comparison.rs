//! Best DAG against best BAP on a CSV file, or on simulated data when no path
//! is given.
use bapsearch::io::Dataset;
use bapsearch::model::{sample_data, sample_parameters};
use bapsearch::rng::stream;
use bapsearch::simulation::{fit_dataset, FitConfig};
use bapsearch::MixedGraph;

fn main() -> bapsearch::Result<()> {
    let data = match std::env::args().nth(1) {
        Some(path) => Dataset::read_csv(path)?,
        None => {
            // a confounded pair that no DAG on these variables can express
            let g = MixedGraph::from_edges(4, &[(0, 1), (3, 2)], &[(1, 2)])?;
            let mut rng = stream(19, &[]);
            let x = sample_data(&sample_parameters(&g, &mut rng)?, 2000, &mut rng)?;
            Dataset::unnamed(x, "simulated")
        }
    };
    let cfg = FitConfig {
        bap_restarts: 20,
        dag_restarts: 100,
        ..FitConfig::default()
    };
    let report = fit_dataset(&data, &cfg)?;
    println!("{} ({} rows, columns {:?})", report.source, report.n, report.columns);
    println!("DAG {:.6}  {}", report.dag.score, report.dag.best);
    println!("BAP {:.6}  {}", report.bap.score, report.bap.best);
    Ok(())
}
