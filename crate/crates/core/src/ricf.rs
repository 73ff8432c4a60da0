//! Gaussian likelihood and maximum likelihood fitting of a BAP by residual
//! iterative conditional fitting (RICF).
//!
//! Everything here depends on the data only through the sample covariance
//! `S` (divisor `n - 1`) and the sample size `n`. The likelihood is
//! maximized at `Sigma` matching `S_mle = (n - 1) / n * S`, which is what
//! RICF fits against.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::MixedGraph;
use crate::model::{implied_covariance, Parameters};

/// Sample covariance with its sample size and a content-derived identity.
#[derive(Clone, Debug)]
pub struct SampleCovariance {
    cov: DMatrix<f64>,
    n: usize,
    id: u64,
}

impl SampleCovariance {
    /// Wraps an unbiased (divisor `n - 1`) covariance estimate.
    pub fn new(cov: DMatrix<f64>, n: usize) -> Result<Self> {
        if !cov.is_square() {
            return Err(Error::DimensionMismatch {
                expected: cov.nrows(),
                found: cov.ncols(),
            });
        }
        let d = cov.nrows();
        if n < d + 1 || n < 2 {
            return Err(Error::InsufficientSamples {
                n,
                d,
                required: (d + 1).max(2),
            });
        }
        let id = fingerprint_matrix(&cov, n);
        Ok(SampleCovariance { cov, n, id })
    }

    /// Column-centred covariance of an `n x d` data matrix.
    pub fn from_data(x: &DMatrix<f64>) -> Result<Self> {
        let (n, d) = x.shape();
        if n < d + 1 || n < 2 {
            return Err(Error::InsufficientSamples {
                n,
                d,
                required: (d + 1).max(2),
            });
        }
        let mut centred = x.clone();
        for mut col in centred.column_iter_mut() {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
        }
        let cov = centred.transpose() * &centred / (n - 1) as f64;
        let cov = (&cov + cov.transpose()) * 0.5;
        SampleCovariance::new(cov, n)
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.cov.nrows()
    }

    /// Stable identity of the covariance contents and sample size.
    pub fn id(&self) -> u64 {
        self.id
    }

    /// `(n - 1) / n * S`, the maximum likelihood scale.
    pub fn mle_cov(&self) -> DMatrix<f64> {
        &self.cov * ((self.n - 1) as f64 / self.n as f64)
    }

    /// Covariance of the variables `w`, in that order.
    pub fn restrict(&self, w: &[usize]) -> Result<SampleCovariance> {
        for &v in w {
            if v >= self.dim() {
                return Err(Error::VertexOutOfRange {
                    vertex: v,
                    d: self.dim(),
                });
            }
        }
        let sub = DMatrix::from_fn(w.len(), w.len(), |a, b| self.cov[(w[a], w[b])]);
        SampleCovariance::new(sub, self.n)
    }
}

fn fingerprint_matrix(m: &DMatrix<f64>, n: usize) -> u64 {
    let mut h = Sha256::new();
    h.update((n as u64).to_le_bytes());
    h.update((m.nrows() as u64).to_le_bytes());
    for v in m.iter() {
        h.update(v.to_bits().to_le_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Gaussian log-likelihood in nats:
/// `-(n/2) (log|2 pi Sigma| + (n-1)/n tr(Sigma^-1 S))`.
pub fn log_likelihood(sigma: &DMatrix<f64>, s: &DMatrix<f64>, n: usize) -> Result<f64> {
    let d = sigma.nrows();
    if s.shape() != sigma.shape() || !sigma.is_square() {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: s.nrows(),
        });
    }
    let chol = sigma
        .clone()
        .cholesky()
        .ok_or(Error::Singular("model covariance"))?;
    let logdet: f64 = chol.l_dirty().diagonal().iter().map(|x| 2.0 * x.ln()).sum();
    let trace = chol.solve(s).trace();
    let nf = n as f64;
    Ok(-0.5 * nf * (d as f64 * (2.0 * PI).ln() + logdet + (nf - 1.0) / nf * trace))
}

/// Penalized score `(loglik - penalty * (d + #edges) * log n) / n`;
/// `penalty = 1` is the default form.
pub fn penalized_score(loglik: f64, d: usize, edges: usize, n: usize, penalty: f64) -> f64 {
    let nf = n as f64;
    (loglik - penalty * (d + edges) as f64 * nf.ln()) / nf
}

/// Tuning for RICF and the score built on it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RicfOptions {
    /// Maximum number of sweeps over the vertices.
    pub max_iter: usize,
    /// Convergence threshold on the largest parameter change in a sweep.
    pub tol: f64,
    /// Multiplier on the `(d + #edges) log n` penalty.
    pub penalty: f64,
    /// Record the log-likelihood after every sweep.
    pub track_loglik: bool,
}

impl Default for RicfOptions {
    fn default() -> Self {
        RicfOptions {
            max_iter: 10,
            tol: 1e-8,
            penalty: 1.0,
            track_loglik: false,
        }
    }
}

/// Log-likelihood contribution of one district.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistrictTerm {
    pub vertices: Vec<usize>,
    pub loglik: f64,
}

/// Outcome of fitting one graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub theta_hat: Parameters,
    pub loglik: f64,
    pub score: f64,
    pub converged: bool,
    /// Sweeps performed.
    pub iterations: usize,
    pub per_district: Vec<DistrictTerm>,
    /// Log-likelihood after each sweep when `track_loglik` is set.
    pub loglik_trace: Vec<f64>,
}

pub(crate) struct RicfState {
    pub theta: Parameters,
    pub converged: bool,
    pub iterations: usize,
    pub trace: Vec<f64>,
}

/// Runs RICF against the maximum-likelihood-scaled covariance `s_mle`.
///
/// Districts are iterated independently: once the largest change of a
/// district's parameters in a sweep falls below `tol` it is frozen. Vertices
/// without spouses are solved exactly by least squares in the first sweep.
pub(crate) fn ricf_core(
    g: &MixedGraph,
    s_mle: &DMatrix<f64>,
    n: usize,
    opts: &RicfOptions,
) -> Result<RicfState> {
    let d = g.num_vertices();
    if s_mle.shape() != (d, d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: s_mle.nrows(),
        });
    }
    if !g.is_bap() {
        return Err(Error::NotBap);
    }
    if d > 0 && s_mle.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite("sample covariance"));
    }
    let parents: Vec<Vec<usize>> = (0..d).map(|v| g.parents(v)).collect();
    let spouses: Vec<Vec<usize>> = (0..d).map(|v| g.spouses(v)).collect();
    let districts = g.districts();

    let mut theta = Parameters {
        b: DMatrix::zeros(d, d),
        omega: DMatrix::from_diagonal(&s_mle.diagonal()),
    };
    let mut done = vec![false; districts.len()];
    let mut trace = Vec::new();
    let mut iterations = 0;
    while iterations < opts.max_iter.max(1) && done.iter().any(|x| !x) {
        iterations += 1;
        for (k, district) in districts.iter().enumerate() {
            if done[k] {
                continue;
            }
            let mut change: f64 = 0.0;
            for &v in district {
                change = change.max(update_vertex(
                    v,
                    &parents[v],
                    &spouses[v],
                    district,
                    s_mle,
                    &mut theta,
                )?);
            }
            let has_spouses = district.iter().any(|&v| !spouses[v].is_empty());
            if !has_spouses || change < opts.tol {
                done[k] = true;
            }
        }
        if opts.track_loglik {
            let sigma = implied_covariance(&theta)?;
            let s = s_mle * (n as f64 / (n - 1) as f64);
            trace.push(log_likelihood(&sigma, &s, n)?);
        }
    }
    Ok(RicfState {
        theta,
        converged: done.iter().all(|&x| x),
        iterations,
        trace,
    })
}

/// One conditional update of vertex `v`; returns the largest absolute change
/// among the parameters it touched.
fn update_vertex(
    v: usize,
    pa: &[usize],
    sp: &[usize],
    district: &[usize],
    s: &DMatrix<f64>,
    theta: &mut Parameters,
) -> Result<f64> {
    let d = s.nrows();
    let old_b: Vec<f64> = pa.iter().map(|&p| theta.b[(v, p)]).collect();
    let old_o: Vec<f64> = sp.iter().map(|&q| theta.omega[(v, q)]).collect();
    let old_vv = theta.omega[(v, v)];

    if sp.is_empty() {
        let mut new_vv = s[(v, v)];
        if !pa.is_empty() {
            let spp = DMatrix::from_fn(pa.len(), pa.len(), |a, b| s[(pa[a], pa[b])]);
            let spv = DVector::from_fn(pa.len(), |a, _| s[(pa[a], v)]);
            let coef = spp
                .cholesky()
                .ok_or(Error::Singular("parent covariance"))?
                .solve(&spv);
            for (a, &p) in pa.iter().enumerate() {
                theta.b[(v, p)] = coef[a];
            }
            new_vv -= spv.dot(&coef);
        }
        theta.omega[(v, v)] = new_vv;
    } else {
        let others: Vec<usize> = district.iter().copied().filter(|&u| u != v).collect();
        let m = others.len();
        let omega_oo = DMatrix::from_fn(m, m, |a, b| theta.omega[(others[a], others[b])]);
        let w = omega_oo
            .cholesky()
            .ok_or(Error::Singular("district error covariance"))?
            .inverse();
        // residual rows (I - B) restricted to the other district members
        let resid = DMatrix::from_fn(m, d, |a, c| {
            let o = others[a];
            f64::from(u8::from(o == c)) - theta.b[(o, c)]
        });
        let k = pa.len() + sp.len();
        let mut t = DMatrix::zeros(k, d);
        for (a, &p) in pa.iter().enumerate() {
            t[(a, p)] = 1.0;
        }
        for (a, &q) in sp.iter().enumerate() {
            let qi = others.iter().position(|&u| u == q).expect("spouse in district");
            let row = w.row(qi) * &resid;
            t.row_mut(pa.len() + a).copy_from(&row);
        }
        let ts = &t * s;
        let cov = &ts * t.transpose();
        let c = ts.column(v).into_owned();
        let coef = cov
            .cholesky()
            .ok_or(Error::Singular("RICF regressors"))?
            .solve(&c);
        for (a, &p) in pa.iter().enumerate() {
            theta.b[(v, p)] = coef[a];
        }
        for (a, &q) in sp.iter().enumerate() {
            let val = coef[pa.len() + a];
            theta.omega[(v, q)] = val;
            theta.omega[(q, v)] = val;
        }
        let resvar = s[(v, v)] - c.dot(&coef);
        let omega_vo = DVector::from_fn(m, |a, _| theta.omega[(v, others[a])]);
        theta.omega[(v, v)] = resvar + (omega_vo.transpose() * &w * &omega_vo)[(0, 0)];
    }

    let mut change = (theta.omega[(v, v)] - old_vv).abs();
    for (a, &p) in pa.iter().enumerate() {
        change = change.max((theta.b[(v, p)] - old_b[a]).abs());
    }
    for (a, &q) in sp.iter().enumerate() {
        change = change.max((theta.omega[(v, q)] - old_o[a]).abs());
    }
    Ok(change)
}

/// Log-likelihood of one district from fitted parameters: the Gaussian
/// density of the district's residuals `((I - B) X)_C` under `Omega_CC`.
pub(crate) fn district_loglik(
    district: &[usize],
    theta: &Parameters,
    s: &DMatrix<f64>,
    n: usize,
) -> Result<f64> {
    let d = s.nrows();
    let m = district.len();
    let rows = DMatrix::from_fn(m, d, |a, c| {
        let v = district[a];
        f64::from(u8::from(v == c)) - theta.b[(v, c)]
    });
    let resid_cov = &rows * s * rows.transpose();
    let omega = DMatrix::from_fn(m, m, |a, b| theta.omega[(district[a], district[b])]);
    log_likelihood(&omega, &resid_cov, n)
}

/// Fits `g` to the sample by RICF and evaluates likelihood and score.
pub fn ricf(g: &MixedGraph, sample: &SampleCovariance, opts: &RicfOptions) -> Result<FitResult> {
    let d = g.num_vertices();
    if sample.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: sample.dim(),
        });
    }
    let n = sample.n();
    let state = ricf_core(g, &sample.mle_cov(), n, opts)?;
    let sigma = implied_covariance(&state.theta)?;
    let loglik = log_likelihood(&sigma, sample.cov(), n)?;
    let per_district = g
        .districts()
        .into_iter()
        .map(|c| {
            let loglik = district_loglik(&c, &state.theta, sample.cov(), n)?;
            Ok(DistrictTerm { vertices: c, loglik })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FitResult {
        score: penalized_score(loglik, d, g.num_edges(), n, opts.penalty),
        theta_hat: state.theta,
        loglik,
        converged: state.converged,
        iterations: state.iterations,
        per_district,
        loglik_trace: state.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_data, sample_parameters};
    use crate::rng;

    fn sample_for(g: &MixedGraph, n: usize, seed: u64) -> SampleCovariance {
        let mut r = rng::stream(seed, &[]);
        let theta = sample_parameters(g, &mut r).unwrap();
        SampleCovariance::from_data(&sample_data(&theta, n, &mut r).unwrap()).unwrap()
    }

    #[test]
    fn likelihood_at_identity() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let l = log_likelihood(&i2, &i2, 100).unwrap();
        let want = -50.0 * (2.0 * (2.0 * PI).ln() + 0.99 * 2.0);
        assert!((l - want).abs() < 1e-10);
    }

    #[test]
    fn saturated_covariance_maximizes_likelihood() {
        let s = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.1, 0.5, 1.0, -0.3, 0.1, -0.3, 1.5]);
        let n = 50;
        let best = &s * (49.0 / 50.0);
        let lmax = log_likelihood(&best, &s, n).unwrap();
        for (i, j) in [(0, 0), (0, 1), (1, 2), (2, 2)] {
            for eps in [1e-3, -1e-3] {
                let mut p = best.clone();
                p[(i, j)] += eps;
                if i != j {
                    p[(j, i)] += eps;
                }
                assert!(log_likelihood(&p, &s, n).unwrap() < lmax);
            }
        }
    }

    #[test]
    fn scaling_changes_only_log_determinant() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 2.0]);
        let sigma = DMatrix::from_row_slice(2, 2, &[1.2, 0.1, 0.1, 1.7]);
        let (n, c) = (40, 3.5);
        let a = log_likelihood(&sigma, &s, n).unwrap();
        let b = log_likelihood(&(&sigma * c), &(&s * c), n).unwrap();
        assert!((a - b - 0.5 * n as f64 * 2.0 * c.ln()).abs() < 1e-9);
    }

    #[test]
    fn singular_sigma_is_an_error() {
        let z = DMatrix::<f64>::zeros(2, 2);
        assert!(log_likelihood(&z, &DMatrix::identity(2, 2), 10).is_err());
    }

    #[test]
    fn empty_graph_fit_is_diagonal() {
        let g = MixedGraph::empty(3);
        let sample = sample_for(&MixedGraph::from_edges(3, &[(0, 1)], &[(1, 2)]).unwrap(), 80, 2);
        let fit = ricf(&g, &sample, &RicfOptions::default()).unwrap();
        let s = sample.cov();
        for i in 0..3 {
            assert!((fit.theta_hat.omega[(i, i)] - s[(i, i)] * 79.0 / 80.0).abs() < 1e-12);
        }
        assert_eq!(fit.theta_hat.b, DMatrix::zeros(3, 3));
        assert!(fit.converged);
    }

    #[test]
    fn dag_fit_is_least_squares() {
        let g = MixedGraph::from_edges(3, &[(0, 2), (1, 2)], &[]).unwrap();
        let sample = sample_for(&g, 200, 9);
        let fit = ricf(&g, &sample, &RicfOptions::default()).unwrap();
        let s = sample.cov();
        let spp = DMatrix::from_row_slice(2, 2, &[s[(0, 0)], s[(0, 1)], s[(1, 0)], s[(1, 1)]]);
        let coef = spp.try_inverse().unwrap() * DVector::from_vec(vec![s[(0, 2)], s[(1, 2)]]);
        assert!((fit.theta_hat.b[(2, 0)] - coef[0]).abs() < 1e-10);
        assert!((fit.theta_hat.b[(2, 1)] - coef[1]).abs() < 1e-10);
        let resid = s[(2, 2)] - s[(2, 0)] * coef[0] - s[(2, 1)] * coef[1];
        assert!((fit.theta_hat.omega[(2, 2)] - resid * 199.0 / 200.0).abs() < 1e-10);
        assert!(fit.converged);
    }

    #[test]
    fn recovers_exact_covariance() {
        let g = MixedGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3)], &[(1, 3)]).unwrap();
        let mut r = rng::stream(21, &[]);
        let theta = sample_parameters(&g, &mut r).unwrap();
        let n = 1000;
        // feed S so that the MLE scale equals the true covariance exactly
        let sigma = implied_covariance(&theta).unwrap();
        let sample = SampleCovariance::new(&sigma * (n as f64 / (n - 1) as f64), n).unwrap();
        let opts = RicfOptions {
            max_iter: 500,
            tol: 1e-12,
            ..Default::default()
        };
        let fit = ricf(&g, &sample, &opts).unwrap();
        let sat = log_likelihood(&sigma, sample.cov(), n).unwrap();
        assert!((fit.loglik - sat).abs() < 1e-8, "{} vs {}", fit.loglik, sat);
        assert!((&fit.theta_hat.b - &theta.b).amax() < 1e-6);
    }

    #[test]
    fn likelihood_is_non_decreasing() {
        let g = MixedGraph::from_edges(4, &[(0, 1), (2, 3)], &[(1, 2), (0, 3), (1, 3)]).unwrap();
        let sample = sample_for(&g, 150, 4);
        let opts = RicfOptions {
            max_iter: 50,
            track_loglik: true,
            ..Default::default()
        };
        let fit = ricf(&g, &sample, &opts).unwrap();
        for w in fit.loglik_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "{:?}", fit.loglik_trace);
        }
        assert!((fit.loglik - fit.loglik_trace.last().unwrap()).abs() < 1e-9);
    }

    #[test]
    fn district_terms_sum_to_loglik() {
        let g = MixedGraph::from_edges(5, &[(0, 1), (1, 2), (3, 4)], &[(1, 3), (2, 4)]).unwrap();
        let fit = ricf(&g, &sample_for(&g, 300, 8), &RicfOptions::default()).unwrap();
        let total: f64 = fit.per_district.iter().map(|t| t.loglik).sum();
        assert!((total - fit.loglik).abs() < 1e-8);
        let recomputed = penalized_score(fit.loglik, 5, g.num_edges(), 300, 1.0);
        assert!((fit.score - recomputed).abs() < 1e-12);
    }

    #[test]
    fn too_few_samples() {
        let x = DMatrix::<f64>::zeros(3, 3);
        assert!(matches!(
            SampleCovariance::from_data(&x),
            Err(Error::InsufficientSamples { required: 4, .. })
        ));
    }

    #[test]
    fn non_pd_sample_rejected() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let sample = SampleCovariance::new(s, 10).unwrap();
        assert!(matches!(
            ricf(&MixedGraph::empty(2), &sample, &RicfOptions::default()),
            Err(Error::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn non_convergence_is_reported() {
        let g = MixedGraph::from_edges(4, &[(0, 2)], &[(0, 1), (1, 2), (2, 3), (1, 3)]).unwrap();
        let sample = sample_for(&g, 60, 12);
        let opts = RicfOptions {
            max_iter: 1,
            ..Default::default()
        };
        let fit = ricf(&g, &sample, &opts).unwrap();
        assert_eq!(fit.iterations, 1);
        assert!(!fit.converged);
        assert!(fit.loglik.is_finite());
    }
}
