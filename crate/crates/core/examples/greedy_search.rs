//! Greedy search with random restarts on data from a known BAP.
use bapsearch::model::{sample_data, sample_parameters};
use bapsearch::rng::stream;
use bapsearch::search::sample_uniform_bap;
use bapsearch::{greedy_search, RicfOptions, SampleCovariance, Scorer, SearchConfig};

fn main() -> bapsearch::Result<()> {
    let mut rng = stream(8, &[]);
    let truth = sample_uniform_bap(6, &mut rng, Some(2), None);
    let theta = sample_parameters(&truth, &mut rng)?;
    let x = sample_data(&theta, 1000, &mut rng)?;
    let scorer = Scorer::new(SampleCovariance::from_data(&x)?, RicfOptions::default());

    let cfg = SearchConfig {
        restarts: 10,
        seed: 3,
        include_forward_run: true,
        ..SearchConfig::default()
    };
    let out = greedy_search(&scorer, &cfg)?;
    println!("truth    {truth}  score {:.6}", scorer.score(&truth)?);
    println!("estimate {}  score {:.6}", out.best, out.score);
    for r in &out.trace.restarts {
        let last = r.steps.last().unwrap();
        println!("  restart {} ({:?}): {} steps, final {:.6}", r.index, r.start, r.steps.len(), last.score);
    }
    println!("cache: {} entries, {} hits, {} misses", scorer.cache().len(), scorer.cache().hits(), scorer.cache().misses());
    Ok(())
}
