//! Gauss–Legendre rules and interpolatory integration weights.

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Lagrange basis polynomials through `xs`, evaluated at `t`.
pub fn lagrange_basis(xs: &[f64], t: f64) -> Vec<f64> {
    (0..xs.len())
        .map(|j| {
            xs.iter()
                .enumerate()
                .filter(|&(k, _)| k != j)
                .map(|(_, &xk)| (t - xk) / (xs[j] - xk))
                .product()
        })
        .collect()
}

/// Weights `q` with `∫_a^b p = Σ q_j p(xs_j)` for every polynomial of degree
/// below `xs.len()`.
pub fn interpolatory_weights(xs: &[f64], a: f64, b: f64) -> Vec<f64> {
    let (gx, gw) = gauss_legendre(xs.len().max(2));
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut q = vec![0.0; xs.len()];
    for (x, w) in gx.iter().zip(&gw) {
        let l = lagrange_basis(xs, mid + half * x);
        for (qj, lj) in q.iter_mut().zip(&l) {
            *qj += half * w * lj;
        }
    }
    q
}
