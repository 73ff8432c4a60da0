//! Draws BAPs from the edge-toggling chain and tallies how often each
//! three-vertex graph appears.
use bapsearch::graph::enumerate;
use bapsearch::rng::stream;
use bapsearch::search::sample_uniform_bap;
use bapsearch::GraphClass;
use std::collections::BTreeMap;

fn main() -> bapsearch::Result<()> {
    let mut rng = stream(2024, &[]);
    let draws = 6200;
    let mut counts = BTreeMap::new();
    for _ in 0..draws {
        *counts.entry(sample_uniform_bap(3, &mut rng, None, None)).or_insert(0usize) += 1;
    }
    let states = enumerate(3, GraphClass::Bap)?.len();
    let (lo, hi) = (counts.values().min().unwrap(), counts.values().max().unwrap());
    println!("{} of {states} graphs seen, frequencies {lo}..{hi} (expected {})", counts.len(), draws / states);

    let capped = sample_uniform_bap(8, &mut rng, Some(2), None);
    println!("d=8 with at most 2 arrowheads per vertex: {capped}");
    Ok(())
}
