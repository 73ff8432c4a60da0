//! Fits a BAP to simulated data with RICF and shows the per-district terms.
use bapsearch::model::{sample_data, sample_parameters};
use bapsearch::rng::stream;
use bapsearch::{ricf, MixedGraph, RicfOptions, SampleCovariance};

fn main() -> bapsearch::Result<()> {
    let g = MixedGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3)], &[(1, 3)])?;
    let mut rng = stream(11, &[]);
    let truth = sample_parameters(&g, &mut rng)?;
    let x = sample_data(&truth, 2000, &mut rng)?;
    let sample = SampleCovariance::from_data(&x)?;

    let opts = RicfOptions {
        max_iter: 200,
        tol: 1e-10,
        track_loglik: true,
        ..RicfOptions::default()
    };
    let fit = ricf(&g, &sample, &opts)?;
    println!("converged={} after {} sweeps", fit.converged, fit.iterations);
    println!("loglik {:.4}, score {:.6}", fit.loglik, fit.score);
    for t in &fit.per_district {
        println!("  district {:?}: {:.4}", t.vertices, t.loglik);
    }
    println!("loglik per sweep: {:?}", fit.loglik_trace);
    println!("true B{:.3}estimated B{:.3}", truth.b, fit.theta_hat.b);
    Ok(())
}
