//! Minimal dense linear algebra for the handful of tiny (n <= ~30) symmetric
//! positive definite systems this crate solves. Matrices are row-major flat
//! vectors.

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub(crate) struct CholeskyFactor {
    pub n: usize,
    /// Row-major lower triangle; entries above the diagonal are zero.
    pub l: Vec<f64>,
}

/// Attempts L * L^T = a for row-major symmetric `a` of size n x n.
/// Returns None if a pivot is non-positive (matrix not positive definite).
pub(crate) fn cholesky(a: &[f64], n: usize) -> Option<CholeskyFactor> {
    debug_assert_eq!(a.len(), n * n);
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return None;
                }
                l[i * n + j] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Some(CholeskyFactor { n, l })
}

impl CholeskyFactor {
    /// Solves L x = b by forward substitution.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                x[i] -= self.l[i * n + k] * x[k];
            }
            x[i] /= self.l[i * n + i];
        }
        x
    }

    /// Solves L^T x = b by back substitution.
    pub fn solve_upper(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                x[i] -= self.l[k * n + i] * x[k];
            }
            x[i] /= self.l[i * n + i];
        }
        x
    }

    /// Solves (L L^T) x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.solve_upper(&self.solve_lower(b))
    }

    /// Sum of the log diagonal entries, i.e. 0.5 * log det (L L^T).
    pub fn log_det_half(&self) -> f64 {
        (0..self.n).map(|i| self.l[i * self.n + i].ln()).sum()
    }
}

/// Solves the SPD system a x = b, used for ridge normal equations.
pub(crate) fn solve_spd(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    cholesky(a, n).map(|f| f.solve(b))
}
