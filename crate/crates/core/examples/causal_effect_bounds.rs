//! Lower bounds on total effects over an equivalence class, and the ROC of an
//! estimated graph's bounds against the truth's.
use bapsearch::effects::{min_abs_effects, roc_auc};
use bapsearch::equivalence::greedy_equivalence_class;
use bapsearch::model::{sample_data, sample_parameters};
use bapsearch::rng::stream;
use bapsearch::search::sample_uniform_bap;
use bapsearch::{greedy_search, RicfOptions, SampleCovariance, Scorer, SearchConfig};

fn main() -> bapsearch::Result<()> {
    let mut rng = stream(17, &[]);
    let truth = sample_uniform_bap(6, &mut rng, Some(2), None);
    let x = sample_data(&sample_parameters(&truth, &mut rng)?, 1000, &mut rng)?;
    let scorer = Scorer::new(SampleCovariance::from_data(&x)?, RicfOptions::default());

    let reference = min_abs_effects(&greedy_equivalence_class(&truth, &scorer, 1e-10)?, &scorer)?;
    let found = greedy_search(&scorer, &SearchConfig { restarts: 10, ..SearchConfig::default() })?;
    let estimate = min_abs_effects(&greedy_equivalence_class(&found.best, &scorer, 1e-10)?, &scorer)?;

    println!("truth {truth}\nestimate {}", found.best);
    println!("reference bounds{:.3}", reference.matrix);
    println!("estimated bounds{:.3}", estimate.matrix);
    let roc = roc_auc(&reference, &estimate)?;
    match roc.auc {
        Some(a) => println!("AUC {a:.3} ({} positives, {} negatives)", roc.positives, roc.negatives),
        None => println!("AUC undefined ({} positives, {} negatives)", roc.positives, roc.negatives),
    }
    Ok(())
}
