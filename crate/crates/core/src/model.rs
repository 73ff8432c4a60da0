//! Linear Gaussian parametrization of a path diagram.
//!
//! Row `i` of `B` holds the weights of the edges pointing into vertex `i`:
//! `B[(i, j)]` is the coefficient of `j -> i`, so `X = B X + eps` and the
//! total-effect matrix `(I - B)^{-1}` has the effect of `j` on `i` at `(i, j)`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{MixedGraph, Trek};

/// Largest vertex count accepted by the trek-sum covariance routines.
pub const TREK_ORACLE_LIMIT: usize = 8;

/// Symmetric covariance matrix `Sigma`.
pub type CovarianceMatrix = DMatrix<f64>;
/// Total causal effects; `(i, j)` is the effect of `j` on `i`.
pub type EffectMatrix = DMatrix<f64>;

/// Edge weights `B` and error covariance `Omega` of a linear SEM.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    #[serde(with = "matrix_rows")]
    pub b: DMatrix<f64>,
    #[serde(with = "matrix_rows")]
    pub omega: DMatrix<f64>,
}

/// Serializes a matrix as a list of rows.
pub mod matrix_rows {
    use nalgebra::DMatrix;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
        m.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Option<DMatrix<f64>> {
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return None;
        }
        Some(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
    }

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(&rows).ok_or_else(|| D::Error::custom("rows of unequal length"))
    }
}

impl Parameters {
    pub fn new(b: DMatrix<f64>, omega: DMatrix<f64>) -> Result<Self> {
        let d = b.nrows();
        if b.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: b.ncols() });
        }
        if omega.shape() != (d, d) {
            return Err(Error::DimensionMismatch { expected: d, found: omega.nrows() });
        }
        Ok(Parameters { b, omega })
    }

    /// `B = 0`, `Omega = I`.
    pub fn identity(d: usize) -> Self {
        Parameters {
            b: DMatrix::zeros(d, d),
            omega: DMatrix::identity(d, d),
        }
    }

    pub fn dim(&self) -> usize {
        self.b.nrows()
    }

    /// Checks that nonzero entries of `B` and off-diagonal `Omega` sit on
    /// edges of `g` and that `Omega` is symmetric.
    pub fn check_sparsity(&self, g: &MixedGraph) -> Result<()> {
        let d = self.dim();
        if g.num_vertices() != d {
            return Err(Error::DimensionMismatch {
                expected: g.num_vertices(),
                found: d,
            });
        }
        for i in 0..d {
            for j in 0..d {
                let bij = self.b[(i, j)];
                if bij != 0.0 && (i == j || !g.has_directed(j, i)) {
                    return Err(Error::SparsityViolation { row: i, col: j });
                }
                if i != j && self.omega[(i, j)] != 0.0 && !g.has_bidirected(i, j) {
                    return Err(Error::SparsityViolation { row: i, col: j });
                }
                let scale = self.omega[(i, j)].abs().max(1.0);
                if (self.omega[(i, j)] - self.omega[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidQuery("Omega is not symmetric".into()));
                }
            }
        }
        Ok(())
    }

    /// Full membership in the parameter space of `g`: sparsity plus a
    /// positive semi-definite `Omega` (eigenvalues above `-1e-10`).
    pub fn is_valid_for(&self, g: &MixedGraph) -> bool {
        self.check_sparsity(g).is_ok() && min_eigenvalue(&self.omega) >= -1e-10
    }

    /// Rescales to unit implied variances: `B' = D B D^-1`, `Omega' = D Omega D`
    /// with `D = diag(phi)^{-1/2}`.
    pub fn standardized(&self) -> Result<Parameters> {
        let sigma = implied_covariance(self)?;
        let d = self.dim();
        let mut scale = vec![0.0; d];
        for i in 0..d {
            if sigma[(i, i)] <= 0.0 {
                return Err(Error::NotPositiveDefinite("implied covariance"));
            }
            scale[i] = sigma[(i, i)].sqrt();
        }
        let b = DMatrix::from_fn(d, d, |i, j| self.b[(i, j)] * scale[j] / scale[i]);
        let omega = DMatrix::from_fn(d, d, |i, j| self.omega[(i, j)] / (scale[i] * scale[j]));
        Ok(Parameters { b, omega })
    }
}

pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// `(I - B)^{-1} Omega (I - B)^{-T}` without any graph check.
pub(crate) fn implied_covariance(theta: &Parameters) -> Result<CovarianceMatrix> {
    let d = theta.dim();
    let i_minus_b = DMatrix::identity(d, d) - &theta.b;
    let inv = i_minus_b
        .lu()
        .try_inverse()
        .ok_or(Error::Singular("I - B"))?;
    let sigma = &inv * &theta.omega * inv.transpose();
    Ok((&sigma + sigma.transpose()) * 0.5)
}

/// Covariance map: the covariance implied by `theta` on graph `g`.
pub fn phi(g: &MixedGraph, theta: &Parameters) -> Result<CovarianceMatrix> {
    theta.check_sparsity(g)?;
    if !g.is_acyclic() {
        return Err(Error::Cyclic);
    }
    implied_covariance(theta)
}

/// Product of edge labels along a trek.
fn edge_contribution(t: &Trek, theta: &Parameters) -> f64 {
    let mut c = 1.0;
    for side in [&t.left, &t.right] {
        for w in side.windows(2) {
            c *= theta.b[(w[1], w[0])];
        }
    }
    if t.has_bidirected {
        c *= theta.omega[(t.left[0], t.right[0])];
    }
    c
}

fn trek_oracle_guard(g: &MixedGraph, theta: &Parameters) -> Result<()> {
    if g.num_vertices() > TREK_ORACLE_LIMIT {
        return Err(Error::TooLarge {
            what: "vertex count for trek enumeration",
            limit: TREK_ORACLE_LIMIT,
        });
    }
    theta.check_sparsity(g)?;
    if !g.is_acyclic() {
        return Err(Error::Cyclic);
    }
    Ok(())
}

/// Implied variances from the diagonal trek expansion: all treks from `i` to
/// itself, bidirected ones weighted by their edge labels and the rest by
/// `Omega` at the head, plus `Omega[(i, i)]`.
fn trek_variances(g: &MixedGraph, theta: &Parameters) -> Result<Vec<f64>> {
    (0..g.num_vertices())
        .map(|i| {
            let mut v = theta.omega[(i, i)];
            for t in g.treks(i, i)? {
                let head = t.head().map_or(1.0, |h| theta.omega[(h, h)]);
                v += edge_contribution(&t, theta) * head;
            }
            Ok(v)
        })
        .collect()
}

/// Covariance via the unstandardized trek-sum formulas.
///
/// Off-diagonal entries sum over simple treks, with head-bearing treks
/// weighted by the implied variance at their head. Exponential in the graph
/// size; limited to [`TREK_ORACLE_LIMIT`] vertices.
pub fn wright_covariance_unstandardized(
    g: &MixedGraph,
    theta: &Parameters,
) -> Result<CovarianceMatrix> {
    trek_oracle_guard(g, theta)?;
    let d = g.num_vertices();
    let var = trek_variances(g, theta)?;
    let mut sigma = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(var.clone()));
    for i in 0..d {
        for j in i + 1..d {
            let mut s = 0.0;
            for t in g.simple_treks(i, j)? {
                let head = t.head().map_or(1.0, |h| var[h]);
                s += edge_contribution(&t, theta) * head;
            }
            sigma[(i, j)] = s;
            sigma[(j, i)] = s;
        }
    }
    Ok(sigma)
}

/// Covariance of standardized parameters as plain simple-trek sums.
/// Fails with [`Error::NotStandardized`] unless every implied variance is 1.
pub fn wright_covariance_standardized(
    g: &MixedGraph,
    theta: &Parameters,
) -> Result<CovarianceMatrix> {
    trek_oracle_guard(g, theta)?;
    let d = g.num_vertices();
    let var = trek_variances(g, theta)?;
    if let Some((vertex, &variance)) = var.iter().enumerate().find(|(_, v)| (**v - 1.0).abs() > 1e-9)
    {
        return Err(Error::NotStandardized { vertex, variance });
    }
    let mut sigma = DMatrix::identity(d, d);
    for i in 0..d {
        for j in i + 1..d {
            let s: f64 = g
                .simple_treks(i, j)?
                .iter()
                .map(|t| edge_contribution(t, theta))
                .sum();
            sigma[(i, j)] = s;
            sigma[(j, i)] = s;
        }
    }
    Ok(sigma)
}

/// Total effects `(I - B)^{-1}`, built row by row in topological order so that
/// pairs without a directed path get exact zeros.
pub fn causal_effects(g: &MixedGraph, theta: &Parameters) -> Result<EffectMatrix> {
    theta.check_sparsity(g)?;
    let order = g.topological_order().ok_or(Error::Cyclic)?;
    let d = g.num_vertices();
    let mut e = DMatrix::zeros(d, d);
    for &i in &order {
        e[(i, i)] = 1.0;
        for p in g.parents(i) {
            let w = theta.b[(i, p)];
            for k in 0..d {
                let add = w * e[(p, k)];
                e[(i, k)] += add;
            }
        }
    }
    Ok(e)
}

/// Minimum eigenvalue below which a sampled `Omega` is redrawn.
pub const MIN_OMEGA_EIGENVALUE: f64 = 1e-6;

/// Random parameters for a BAP: standard normal edge labels, error variances
/// equal to the absolute off-diagonal row sum of `Omega` plus a chi-square(1)
/// draw. `Omega` is redrawn while its smallest eigenvalue is below
/// [`MIN_OMEGA_EIGENVALUE`].
pub fn sample_parameters<R: Rng + ?Sized>(g: &MixedGraph, rng: &mut R) -> Result<Parameters> {
    if !g.is_bap() {
        return Err(Error::NotBap);
    }
    let d = g.num_vertices();
    let mut b = DMatrix::zeros(d, d);
    for (from, to) in g.directed_edges() {
        b[(to, from)] = StandardNormal.sample(rng);
    }
    let chi = ChiSquared::new(1.0).expect("valid degrees of freedom");
    let bidirected = g.bidirected_edges();
    loop {
        let mut omega = DMatrix::zeros(d, d);
        for &(i, j) in &bidirected {
            let w: f64 = StandardNormal.sample(rng);
            omega[(i, j)] = w;
            omega[(j, i)] = w;
        }
        for i in 0..d {
            let row: f64 = (0..d).filter(|&j| j != i).map(|j| omega[(i, j)].abs()).sum();
            omega[(i, i)] = row + chi.sample(rng);
        }
        if min_eigenvalue(&omega) >= MIN_OMEGA_EIGENVALUE {
            return Ok(Parameters { b, omega });
        }
    }
}

/// `n` i.i.d. rows from `N(0, phi(theta))` via the Cholesky factor.
pub fn sample_data<R: Rng + ?Sized>(theta: &Parameters, n: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    let sigma = implied_covariance(theta)?;
    let d = theta.dim();
    let chol = sigma
        .cholesky()
        .ok_or(Error::NotPositiveDefinite("implied covariance"))?;
    let l = chol.l();
    let z = DMatrix::from_fn(d, n, |_, _| StandardNormal.sample(rng));
    Ok((l * z).transpose())
}
