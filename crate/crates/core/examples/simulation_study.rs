//! Runs a small simulation study and prints the averaged ROC curve.
//! Pass a TOML config path to override the built-in settings.
use bapsearch::simulation::{run_simulation, SimulationConfig};

fn main() -> bapsearch::Result<()> {
    let cfg = match std::env::args().nth(1) {
        Some(path) => SimulationConfig::load(path)?,
        None => SimulationConfig {
            replicates: 6,
            d: 7,
            n: 1000,
            restarts: 10,
            ..SimulationConfig::default()
        },
    };
    let report = run_simulation(&cfg)?;
    for r in &report.replicates {
        println!("replicate {}: AUC {:?}, truth {}", r.index, r.roc.auc, r.truth);
    }
    for f in &report.failures {
        println!("replicate {} failed: {}", f.index, f.message);
    }
    println!("mean AUC {:?}", report.mean_auc);
    for p in report.average_roc.iter().step_by(20) {
        println!("  fpr {:.2} tpr {:.3}", p.fpr, p.tpr);
    }
    Ok(())
}
