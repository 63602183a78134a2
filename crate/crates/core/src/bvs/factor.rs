//! Incremental upper-triangular factorization of a growing/shrinking Gram
//! submatrix, with the projected response carried alongside.
//!
//! For the active column set S (in insertion order) the factor R satisfies
//! `R^T R = G[S,S]` and `z` satisfies `R^T z = b[S]`, so the explained sum of
//! squares is `||z||^2`. Columns are appended by one forward solve and removed
//! by a sweep of Givens rotations; both cost O(s^2).

/// Relative tolerance below which a pivot counts as numerically zero.
const PIVOT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct RegFactor {
    /// Column j stores R[0..=j, j].
    cols: Vec<Vec<f64>>,
    /// Forward-substituted response projection.
    z: Vec<f64>,
}

/// Quantities needed to append a column, produced without mutating the factor.
#[derive(Debug, Clone)]
pub struct PendingColumn {
    w: Vec<f64>,
    pivot: f64,
    z_new: f64,
}

impl PendingColumn {
    /// Increase of the explained sum of squares if this column is appended.
    pub fn explained_gain(&self) -> f64 {
        self.z_new * self.z_new
    }
}

impl Default for RegFactor {
    fn default() -> Self {
        Self::new()
    }
}

impl RegFactor {
    pub fn new() -> Self {
        RegFactor { cols: Vec::new(), z: Vec::new() }
    }

    /// Number of active columns.
    pub fn len(&self) -> usize {
        self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cols.is_empty()
    }

    /// `||z||^2`, the explained sum of squares.
    pub fn explained(&self) -> f64 {
        self.z.iter().map(|v| v * v).sum()
    }

    /// Prepares appending a column with Gram entries `g = G[S, j]`, diagonal
    /// `d = G[j, j]` and response projection `b_j`. Returns `None` when the
    /// column is numerically collinear with the active set.
    pub fn prepare_add(&self, g: &[f64], d: f64, b_j: f64) -> Option<PendingColumn> {
        debug_assert_eq!(g.len(), self.len());
        let w = self.solve_transposed(g);
        let pivot_sq = d - w.iter().map(|v| v * v).sum::<f64>();
        if pivot_sq <= PIVOT_TOL * d.max(f64::MIN_POSITIVE) {
            return None;
        }
        let pivot = pivot_sq.sqrt();
        let dot: f64 = w.iter().zip(&self.z).map(|(a, b)| a * b).sum();
        Some(PendingColumn { w, pivot, z_new: (b_j - dot) / pivot })
    }

    /// Commits a prepared column.
    pub fn push(&mut self, pending: PendingColumn) {
        let PendingColumn { mut w, pivot, z_new } = pending;
        w.push(pivot);
        self.cols.push(w);
        self.z.push(z_new);
    }

    /// Removes column `k`, restoring triangularity with Givens rotations.
    /// Returns the drop in the explained sum of squares.
    pub fn remove(&mut self, k: usize) -> f64 {
        self.cols.remove(k);
        let s = self.cols.len();
        for j in k..s {
            // Column j temporarily holds rows 0..=j+1; rotate rows (j, j+1)
            // to zero the subdiagonal entry.
            let a = self.cols[j][j];
            let b = self.cols[j][j + 1];
            let r = a.hypot(b);
            let (c, sn) = (a / r, b / r);
            self.cols[j][j] = r;
            self.cols[j].truncate(j + 1);
            for m in j + 1..s {
                let (x, y) = (self.cols[m][j], self.cols[m][j + 1]);
                self.cols[m][j] = c * x + sn * y;
                self.cols[m][j + 1] = c * y - sn * x;
            }
            let (x, y) = (self.z[j], self.z[j + 1]);
            self.z[j] = c * x + sn * y;
            self.z[j + 1] = c * y - sn * x;
        }
        let removed = self.z.pop().expect("factor holds at least one column");
        removed * removed
    }

    /// Drop in the explained sum of squares if column `k` were removed,
    /// computed without mutating the factor: `beta_k^2 / (G[S,S]^-1)_kk`.
    pub fn explained_drop(&self, k: usize) -> f64 {
        let s = self.len();
        // beta = R^-1 z by back substitution; only beta_k is needed but the
        // full solve is the same O(s^2).
        let mut beta = self.z.clone();
        for i in (0..s).rev() {
            beta[i] /= self.cols[i][i];
            for m in 0..i {
                beta[m] -= self.cols[i][m] * beta[i];
            }
        }
        // v = R^-T e_k, so ||v||^2 = (G[S,S]^-1)_kk.
        let mut inv_kk = 0.0;
        let mut v = vec![0.0; s];
        v[k] = 1.0 / self.cols[k][k];
        inv_kk += v[k] * v[k];
        for i in k + 1..s {
            let dot: f64 = (k..i).map(|m| self.cols[i][m] * v[m]).sum();
            v[i] = -dot / self.cols[i][i];
            inv_kk += v[i] * v[i];
        }
        beta[k] * beta[k] / inv_kk
    }

    /// Solves `R^T w = g` by forward substitution.
    fn solve_transposed(&self, g: &[f64]) -> Vec<f64> {
        let s = self.len();
        let mut w = vec![0.0; s];
        for i in 0..s {
            let dot: f64 = (0..i).map(|m| self.cols[i][m] * w[m]).sum();
            w[i] = (g[i] - dot) / self.cols[i][i];
        }
        w
    }

    /// Upper-triangular entry `R[i, j]`, for tests and diagnostics.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i <= j {
            self.cols[j][i]
        } else {
            0.0
        }
    }
}
