use nalgebra::Matrix2;

use super::ErgodicError;
use crate::geometry::{MapHandle, Point};

/// Number of equal windows used for the convergence diagnostic.
pub const LYAPUNOV_WINDOWS: usize = 10;

/// Lyapunov exponents along one orbit.
#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovSpectrum {
    /// Ascending.
    pub exponents: Vec<f64>,
    pub n_iterates: usize,
    pub start: Point,
    /// Sums of `log |R_ii|` from the QR renormalizations, in QR column order.
    pub log_accumulators: Vec<f64>,
    /// `(1/n) log J(φⁿ, x)` over the same iterates.
    pub mean_log_jacobian: f64,
    /// Sum of the exponents averaged over each of the last two windows.
    pub window_sums: (f64, f64),
    pub converged: bool,
}

/// QR-renormalized tangent iteration from `x0` after `burn_in` steps.
///
/// `tolerance` bounds the allowed gap between the exponent estimates of the
/// last two windows before the result is flagged as not converged.
pub fn lyapunov_spectrum(
    map: &MapHandle,
    x0: &Point,
    n: usize,
    burn_in: usize,
    tolerance: f64,
) -> Result<LyapunovSpectrum, ErgodicError> {
    if n < 100 {
        return Err(ErgodicError::InvalidInput(
            "lyapunov_spectrum needs at least 100 iterates".into(),
        ));
    }
    let dim = map.dim();
    let mut x = *x0;
    for _ in 0..burn_in {
        x = map.apply(&x)?;
    }
    let start = x;
    let mut q = Matrix2::identity();
    let mut acc = vec![0.0; dim];
    let mut log_j = 0.0;
    let wlen = n / LYAPUNOV_WINDOWS;
    let mut window_est: Vec<Vec<f64>> = Vec::new();
    let mut wacc = vec![0.0; dim];
    for i in 0..n {
        let (y, t, dlj) = map.step(&x)?;
        log_j += dlj;
        if dim == 1 {
            let r = t[(0, 0)].abs();
            if !(r > 0.0) {
                return Err(ErgodicError::Degenerate {
                    point: x.coords().to_vec(),
                });
            }
            acc[0] += r.ln();
            wacc[0] += r.ln();
        } else {
            let qr = (t * q).qr();
            let r = qr.r();
            q = qr.q();
            for j in 0..2 {
                let rj = r[(j, j)].abs();
                if !(rj > 0.0) {
                    return Err(ErgodicError::Degenerate {
                        point: x.coords().to_vec(),
                    });
                }
                acc[j] += rj.ln();
                wacc[j] += rj.ln();
            }
        }
        if wlen > 0 && (i + 1) % wlen == 0 {
            window_est.push(wacc.iter().map(|v| v / wlen as f64).collect());
            wacc.iter_mut().for_each(|v| *v = 0.0);
        }
        x = y;
    }
    let mut exponents: Vec<f64> = acc.iter().map(|v| v / n as f64).collect();
    exponents.sort_by(|a, b| a.total_cmp(b));
    let (converged, window_sums) = match window_est.len() {
        0 | 1 => (true, (exponents.iter().sum(), exponents.iter().sum())),
        m => {
            let (a, b) = (&window_est[m - 2], &window_est[m - 1]);
            let gap = a
                .iter()
                .zip(b)
                .map(|(u, v)| (u - v).abs())
                .fold(0.0, f64::max);
            (gap <= tolerance, (a.iter().sum(), b.iter().sum()))
        }
    };
    Ok(LyapunovSpectrum {
        exponents,
        n_iterates: n,
        start,
        log_accumulators: acc,
        mean_log_jacobian: log_j / n as f64,
        window_sums,
        converged,
    })
}
