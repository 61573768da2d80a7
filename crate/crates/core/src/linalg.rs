//! Symmetric eigendecomposition pseudoinverse used by the weighted
//! least-squares certificate and the lemma checks.

use nalgebra::{DMatrix, DVector};

/// Eigendecomposition of a symmetric PSD matrix with a rank-revealing cutoff.
#[derive(Debug, Clone)]
pub struct SymPinv {
    pub dim: usize,
    /// Eigenvalues, ascending.
    pub eigenvalues: DVector<f64>,
    /// Matching orthonormal eigenvectors (columns).
    pub eigenvectors: DMatrix<f64>,
    /// Eigenvalues at or below this are treated as zero.
    pub cutoff: f64,
    pinv: DMatrix<f64>,
}

impl SymPinv {
    /// Cutoff is sigma_max · k · machine-epsilon · 64.
    pub fn new(g: &DMatrix<f64>) -> Self {
        let dim = g.nrows();
        let eig = g.clone().symmetric_eigen();
        let sigma_max = eig.eigenvalues.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
        let cutoff = sigma_max * dim as f64 * f64::EPSILON * 64.0;
        let inv_vals: Vec<f64> = eig
            .eigenvalues
            .iter()
            .map(|&l| if l > cutoff { 1.0 / l } else { 0.0 })
            .collect();
        let mut pinv = DMatrix::zeros(dim, dim);
        for (j, &iv) in inv_vals.iter().enumerate() {
            if iv != 0.0 {
                let col = eig.eigenvectors.column(j);
                // pinv += iv * col * col^T
                for r in 0..dim {
                    for c in 0..dim {
                        pinv[(r, c)] += iv * col[r] * col[c];
                    }
                }
            }
        }
        SymPinv {
            dim,
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
            cutoff,
            pinv,
        }
    }

    pub fn pinv(&self) -> &DMatrix<f64> {
        &self.pinv
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.pinv * v
    }

    /// True iff the component of `g` outside the numerical range of G is
    /// at most `tol·‖g‖`.
    pub fn in_range(&self, g: &DVector<f64>, tol: f64) -> bool {
        let norm = g.norm();
        if norm == 0.0 {
            return true;
        }
        let mut null_sq = 0.0;
        for (j, &l) in self.eigenvalues.iter().enumerate() {
            if l <= self.cutoff {
                let c = self.eigenvectors.column(j).dot(g);
                null_sq += c * c;
            }
        }
        null_sq.sqrt() <= tol * norm
    }

    /// Null-space component norm of the coordinate direction e_i, relative
    /// to 1; small values mean the point is identified by the design.
    pub fn coord_null_component(&self, i: usize) -> f64 {
        let mut null_sq = 0.0;
        for (j, &l) in self.eigenvalues.iter().enumerate() {
            if l <= self.cutoff {
                let c = self.eigenvectors[(i, j)];
                null_sq += c * c;
            }
        }
        null_sq.sqrt()
    }
}
