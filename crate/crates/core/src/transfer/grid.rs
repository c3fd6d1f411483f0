use super::TransferError;

/// Samples of a function on the periodic grid `{j/N}`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Result<Self, TransferError> {
        let n = values.len();
        if n < 16 || !n.is_power_of_two() {
            return Err(TransferError::InvalidInput(format!(
                "grid size {n} must be a power of two and at least 16"
            )));
        }
        Ok(GridFunction { values })
    }

    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self, TransferError> {
        GridFunction::new((0..n).map(|j| f(j as f64 / n as f64)).collect())
    }

    pub fn constant(n: usize, c: f64) -> Result<Self, TransferError> {
        GridFunction::new(vec![c; n])
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n() as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Periodic trapezoid integral over `[0,1)`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.n() as f64
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&mut self, c: f64) {
        self.values.iter_mut().for_each(|v| *v *= c);
    }

    pub fn spline(&self) -> PeriodicSpline {
        PeriodicSpline::new(&self.values)
    }
}

/// Max over the grid of `|Δ^j ρ| / h^j` for `j = 0..=k`.
///
/// Odd orders are taken on the half-shifted grid, which is where the
/// centered stencil of an odd difference lives.
pub fn difference_sups(values: &[f64], k: usize, step: usize) -> Vec<f64> {
    let n = values.len() / step;
    let h = step as f64 / values.len() as f64;
    let mut d: Vec<f64> = (0..n).map(|i| values[i * step]).collect();
    let mut out = Vec::with_capacity(k + 1);
    out.push(d.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    let mut scale = 1.0;
    for _ in 1..=k {
        let first = d[0];
        for i in 0..n - 1 {
            d[i] = d[i + 1] - d[i];
        }
        d[n - 1] = first - d[n - 1];
        scale *= h;
        out.push(d.iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale);
    }
    out
}

/// Grid `C^k` seminorm: the sum over orders `0..=k` of the finite-difference sups.
pub fn ck_seminorm(rho: &GridFunction, k: usize) -> Result<f64, TransferError> {
    if k > 4 {
        return Err(TransferError::InvalidInput("ck_seminorm supports k <= 4".into()));
    }
    if rho.n() < 1 << (k + 4) {
        return Err(TransferError::InvalidInput(format!(
            "order {k} needs N >= {}",
            1 << (k + 4)
        )));
    }
    Ok(difference_sups(rho.values(), k, 1).iter().sum())
}

/// Interpolating periodic cubic spline through equally spaced samples.
#[derive(Clone, Debug)]
pub struct PeriodicSpline {
    y: Vec<f64>,
    m: Vec<f64>,
}

impl PeriodicSpline {
    pub fn new(y: &[f64]) -> Self {
        let n = y.len();
        let h = 1.0 / n as f64;
        let rhs: Vec<f64> = (0..n)
            .map(|j| 6.0 * (y[(j + 1) % n] - 2.0 * y[j] + y[(j + n - 1) % n]) / (h * h))
            .collect();
        PeriodicSpline {
            y: y.to_vec(),
            m: solve_cyclic_141(&rhs),
        }
    }

    /// Value at `x`, taken modulo 1.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.y.len();
        let s = x.rem_euclid(1.0) * n as f64;
        let mut j = s.floor() as usize;
        let mut t = s - j as f64;
        if j >= n {
            j = 0;
            t = 0.0;
        }
        let j1 = (j + 1) % n;
        let h = 1.0 / n as f64;
        let u = 1.0 - t;
        u * self.y[j]
            + t * self.y[j1]
            + h * h / 6.0 * ((u * u * u - u) * self.m[j] + (t * t * t - t) * self.m[j1])
    }
}

/// Solve the cyclic system `m[j-1] + 4 m[j] + m[j+1] = r[j]`.
///
/// Uses the Sherman–Morrison correction on top of a Thomas sweep.
fn solve_cyclic_141(r: &[f64]) -> Vec<f64> {
    let n = r.len();
    let (a, b, c) = (1.0, 4.0, 1.0);
    let (alpha, beta) = (c, a);
    let gamma = -b;
    let mut diag = vec![b; n];
    diag[0] = b - gamma;
    diag[n - 1] = b - alpha * beta / gamma;
    let x = thomas(a, &diag, c, r);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = thomas(a, &diag, c, &u);
    let fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}

fn thomas(a: f64, diag: &[f64], c: f64, r: &[f64]) -> Vec<f64> {
    let n = r.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = c / diag[0];
    dp[0] = r[0] / diag[0];
    for i in 1..n {
        let den = diag[i] - a * cp[i - 1];
        cp[i] = c / den;
        dp[i] = (r[i] - a * dp[i - 1]) / den;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}
