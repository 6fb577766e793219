//! Symmetric and general tridiagonal kernels.

/// Solves `a_i x_{i-1} + b_i x_i + c_i x_{i+1} = d_i` (Thomas algorithm).
/// `a[0]` and `c[n-1]` are ignored.
pub fn solve(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = if n > 1 { c[0] / b[0] } else { 0.0 };
    dp[0] = d[0] / b[0];
    for i in 1..n {
        let m = b[i] - a[i] * cp[i - 1];
        if i + 1 < n {
            cp[i] = c[i] / m;
        }
        dp[i] = (d[i] - a[i] * dp[i - 1]) / m;
    }
    let mut x = dp;
    for i in (0..n.saturating_sub(1)).rev() {
        x[i] -= cp[i] * x[i + 1];
    }
    x
}

/// Number of eigenvalues below `x` of the symmetric tridiagonal matrix with
/// diagonal `d` and off-diagonal `e` (`e[i]` couples `i` and `i+1`).
pub fn sturm_count(d: &[f64], e: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..d.len() {
        let off = if i == 0 { 0.0 } else { e[i - 1] * e[i - 1] / q };
        q = d[i] - x - off;
        if q == 0.0 {
            q = -f64::EPSILON * (d[i].abs() + x.abs() + 1.0);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

pub fn gershgorin(d: &[f64], e: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..d.len() {
        let rad = if i > 0 { e[i - 1].abs() } else { 0.0 } + if i < e.len() { e[i].abs() } else { 0.0 };
        lo = lo.min(d[i] - rad);
        hi = hi.max(d[i] + rad);
    }
    (lo, hi)
}

/// The `k`-th smallest eigenvalue (0-based) by Sturm bisection.
pub fn eigenvalue(d: &[f64], e: &[f64], k: usize) -> f64 {
    let (mut lo, mut hi) = gershgorin(d, e);
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    lo -= 1e-12 * span;
    hi += 1e-12 * span;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(d, e, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Eigenvector for an accurate eigenvalue `mu` by inverse iteration,
/// normalised to unit Euclidean length.
pub fn eigenvector(d: &[f64], e: &[f64], mu: f64) -> Vec<f64> {
    let n = d.len();
    let (lo, hi) = gershgorin(d, e);
    let shift = mu - 1e-13 * (hi - lo).abs().max(1.0);
    let a: Vec<f64> = (0..n).map(|i| if i == 0 { 0.0 } else { e[i - 1] }).collect();
    let c: Vec<f64> = (0..n).map(|i| if i + 1 < n { e[i] } else { 0.0 }).collect();
    let b: Vec<f64> = d.iter().map(|x| x - shift).collect();
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    for _ in 0..4 {
        let w = solve(&a, &b, &c, &v);
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        v = w.into_iter().map(|x| x / norm).collect();
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_matches_dense_product() {
        let a = [0.0, 1.0, -2.0, 0.5];
        let b = [4.0, 5.0, 6.0, 3.0];
        let c = [1.0, 0.5, 1.0, 0.0];
        let x = [1.0, -2.0, 3.0, 0.25];
        let d: Vec<f64> = (0..4)
            .map(|i| b[i] * x[i] + if i > 0 { a[i] * x[i - 1] } else { 0.0 } + if i < 3 { c[i] * x[i + 1] } else { 0.0 })
            .collect();
        let got = solve(&a, &b, &c, &d);
        for i in 0..4 {
            assert!((got[i] - x[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn discrete_laplacian_spectrum() {
        // -u'' on n interior points of (0, 1): 4/h^2 sin^2(k pi h / 2).
        let n = 200;
        let h = 1.0 / (n + 1) as f64;
        let d = vec![2.0 / (h * h); n];
        let e = vec![-1.0 / (h * h); n - 1];
        for k in 0..3 {
            let exact = 4.0 / (h * h) * ((k + 1) as f64 * std::f64::consts::PI * h / 2.0).sin().powi(2);
            assert!((eigenvalue(&d, &e, k) - exact).abs() < 1e-9 * exact);
        }
        let v = eigenvector(&d, &e, eigenvalue(&d, &e, 0));
        let s = v[0].signum();
        assert!(v.iter().all(|x| x * s > 0.0));
        for (i, x) in v.iter().enumerate() {
            let exact = (std::f64::consts::PI * (i + 1) as f64 * h).sin();
            let scale = (2.0 * h).sqrt();
            assert!((x * s - scale * exact).abs() < 1e-10);
        }
    }

    #[test]
    fn sturm_counts_are_monotone() {
        let d = [2.0, -1.0, 3.0, 0.5];
        let e = [1.0, 0.3, -0.7];
        let mut prev = 0;
        for k in 0..100 {
            let c = sturm_count(&d, &e, -5.0 + 0.1 * k as f64);
            assert!(c >= prev);
            prev = c;
        }
        assert_eq!(prev, 4);
    }
}
