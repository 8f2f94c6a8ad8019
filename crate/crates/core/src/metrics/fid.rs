//! Gaussian feature summaries and the Frechet distance between them.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vectors::VectorSet;

/// Eigenvalues in `[-PSD_TOLERANCE, 0)` are treated as rounding noise.
pub const PSD_TOLERANCE: f64 = 1e-6;

/// Mean and unbiased covariance of a feature set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianSummary {
    pub mu: Vec<f64>,
    /// `L x L`, row-major.
    pub sigma: Vec<f64>,
}

impl GaussianSummary {
    pub fn new(mu: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        let l = mu.len();
        if sigma.len() != l * l {
            return Err(Error::dims(format!("covariance must be {l}x{l}")));
        }
        if mu.iter().chain(&sigma).any(|v| !v.is_finite()) {
            return Err(Error::numerical("non-finite summary"));
        }
        for i in 0..l {
            for j in 0..i {
                if (sigma[i * l + j] - sigma[j * l + i]).abs() > 1e-6 {
                    return Err(Error::numerical("covariance is not symmetric"));
                }
            }
        }
        Ok(GaussianSummary { mu, sigma })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    fn sigma_matrix(&self) -> DMatrix<f64> {
        let l = self.dim();
        DMatrix::from_row_slice(l, l, &self.sigma)
    }
}

/// Column means and unbiased (divisor `N - 1`) sample covariance.
pub fn gaussian_summary(set: &VectorSet) -> Result<GaussianSummary> {
    let n = set.len();
    if n < 2 {
        return Err(Error::invalid("covariance needs at least 2 samples"));
    }
    let l = set.dim();
    let mut mu = vec![0f64; l];
    for r in set.rows() {
        for (m, &v) in mu.iter_mut().zip(r) {
            *m += v as f64;
        }
    }
    mu.iter_mut().for_each(|m| *m /= n as f64);
    let mut sigma = vec![0f64; l * l];
    for r in set.rows() {
        let d: Vec<f64> = r.iter().zip(&mu).map(|(&v, m)| v as f64 - m).collect();
        for i in 0..l {
            for j in i..l {
                sigma[i * l + j] += d[i] * d[j];
            }
        }
    }
    for i in 0..l {
        for j in i..l {
            let v = sigma[i * l + j] / (n - 1) as f64;
            sigma[i * l + j] = v;
            sigma[j * l + i] = v;
        }
    }
    GaussianSummary::new(mu, sigma)
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of a symmetric matrix with tiny negatives clamped to zero.
fn psd_eigen(m: &DMatrix<f64>, what: &str) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let mut eig = SymmetricEigen::new(symmetrize(m));
    for v in eig.eigenvalues.iter_mut() {
        if *v < -PSD_TOLERANCE {
            return Err(Error::numerical(format!(
                "{what} is not positive semi-definite (eigenvalue {v:e})"
            )));
        }
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok(eig)
}

fn psd_sqrt(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let eig = psd_eigen(m, what)?;
    let root = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|v| v.sqrt()));
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&root) * eig.eigenvectors.transpose())
}

/// Squared Frechet distance
/// `|mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a S_b)^(1/2))`.
///
/// The trace of the cross term is evaluated as the sum of square roots of the
/// eigenvalues of the symmetric matrix `S_a^(1/2) S_b S_a^(1/2)`.
pub fn frechet_distance(a: &GaussianSummary, b: &GaussianSummary) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::dims(format!("summaries of length {} and {}", a.dim(), b.dim())));
    }
    let mean_term: f64 = a.mu.iter().zip(&b.mu).map(|(x, y)| (x - y).powi(2)).sum();
    let sa = a.sigma_matrix();
    let sb = b.sigma_matrix();
    psd_eigen(&sb, "second covariance")?;
    let root_a = psd_sqrt(&sa, "first covariance")?;
    let inner = &root_a * &sb * &root_a;
    let cross: f64 = psd_eigen(&inner, "covariance product")?
        .eigenvalues
        .iter()
        .map(|v| v.sqrt())
        .sum();
    let d2 = mean_term + sa.trace() + sb.trace() - 2.0 * cross;
    Ok(d2.max(0.0))
}
