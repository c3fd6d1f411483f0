use nalgebra::{DMatrix, DVector, RowDVector};

use super::TransferError;

/// Output of the Neumann-series construction.
#[derive(Clone, Debug, PartialEq)]
pub struct NeumannResult {
    pub vector: RowDVector<f64>,
    pub terms: usize,
    /// `‖vP − v‖₁`.
    pub residual: f64,
}

/// Increment below which the series is considered summed.
pub const NEUMANN_TOL: f64 = 1e-14;

/// `π Σ_k Δ^k`, normalized: the invariant law of `P = 1·π + Δ` when
/// `Δ` is strictly substochastic.
pub fn neumann_invariant(
    p: &DMatrix<f64>,
    pi: &RowDVector<f64>,
    delta: &DMatrix<f64>,
) -> Result<NeumannResult, TransferError> {
    let n = p.nrows();
    if p.ncols() != n || delta.shape() != (n, n) || pi.len() != n {
        return Err(TransferError::InvalidInput("shape mismatch".into()));
    }
    for (row, r) in delta.row_iter().enumerate() {
        let sum: f64 = r.iter().map(|v| v.abs()).sum();
        if sum >= 1.0 {
            return Err(TransferError::NotSubstochastic { row, sum });
        }
    }
    let ones = DVector::from_element(n, 1.0);
    let recon = &ones * pi + delta;
    if (recon - p).abs().max() > 1e-12 {
        return Err(TransferError::InvalidInput(
            "P is not 1·π + Δ for the given π and Δ".into(),
        ));
    }
    let mut term = pi.clone();
    let mut v = pi.clone();
    let mut terms = 1;
    while term.abs().sum() >= NEUMANN_TOL && terms < 1_000_000 {
        term = &term * delta;
        v += &term;
        terms += 1;
    }
    let total = v.sum();
    v /= total;
    let residual = (&v * p - &v).abs().sum();
    Ok(NeumannResult {
        vector: v,
        terms,
        residual,
    })
}

/// Seeded random chain `P = 1·π + Δ` on `n` states: `π` carries a total mass
/// drawn from `[0.05, 0.95)` and every row of `Δ` carries the rest.
pub fn random_chain(seed: u64, n: usize) -> (DMatrix<f64>, RowDVector<f64>, DMatrix<f64>) {
    use rand::Rng;
    let mut r = crate::rng::stream(seed, 0);
    let mass: f64 = r.random_range(0.05..0.95);
    let raw: Vec<f64> = (0..n).map(|_| r.random::<f64>() + 1e-3).collect();
    let s: f64 = raw.iter().sum();
    let pi = RowDVector::from_iterator(n, raw.iter().map(|v| mass * v / s));
    let mut delta = DMatrix::zeros(n, n);
    for i in 0..n {
        let row: Vec<f64> = (0..n).map(|_| r.random::<f64>() + 1e-3).collect();
        let s: f64 = row.iter().sum();
        for j in 0..n {
            delta[(i, j)] = (1.0 - mass) * row[j] / s;
        }
    }
    let ones = DVector::from_element(n, 1.0);
    (&ones * &pi + &delta, pi, delta)
}

/// Invariant law of a stochastic matrix from the eigenvector of `Pᵀ` for the
/// eigenvalue closest to 1.
pub fn eigen_invariant(p: &DMatrix<f64>) -> Result<RowDVector<f64>, TransferError> {
    let n = p.nrows();
    let eig = p.transpose().complex_eigenvalues();
    let (k, lambda) = eig
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - 1.0).norm().total_cmp(&(b.1 - 1.0).norm()))
        .ok_or_else(|| TransferError::InvalidInput("empty matrix".into()))?;
    if (lambda - 1.0).norm() > 1e-8 {
        return Err(TransferError::InvalidInput(format!(
            "no eigenvalue near 1 (closest {lambda}, index {k})"
        )));
    }
    // Null vector of Pᵀ − I by inverse iteration on a slightly shifted matrix.
    let a = p.transpose() - DMatrix::identity(n, n) * (1.0 + 1e-10);
    let lu = a.lu();
    let mut v = DVector::from_element(n, 1.0 / n as f64);
    for _ in 0..3 {
        v = lu
            .solve(&v)
            .ok_or_else(|| TransferError::InvalidInput("singular shift".into()))?;
        let s = v.sum();
        v /= s;
    }
    Ok(v.transpose())
}
