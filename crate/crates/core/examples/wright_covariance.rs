//! Compares the matrix parametrization of the covariance with trek sums.
use bapsearch::model::{causal_effects, phi, sample_parameters, wright_covariance_standardized};
use bapsearch::rng::stream;
use bapsearch::MixedGraph;

fn main() -> bapsearch::Result<()> {
    // 0 -> 1 -> 2 -> 3 with 1 <-> 3
    let g = MixedGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3)], &[(1, 3)])?;
    let theta = sample_parameters(&g, &mut stream(5, &[]))?.standardized()?;
    let sigma = phi(&g, &theta)?;
    let treks = wright_covariance_standardized(&g, &theta)?;
    println!("implied covariance{sigma:.4}");
    println!("max difference to trek sums: {:.2e}", (&sigma - &treks).amax());
    for t in g.simple_treks(0, 3)? {
        println!("trek 0..3: {t:?}");
    }
    println!("total effects{:.4}", causal_effects(&g, &theta)?);
    Ok(())
}
