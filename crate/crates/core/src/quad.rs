//! Gauss-Legendre panels.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Nodes and weights of the n-point rule on [-1, 1] (Newton on P_n).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for m in 2..=n {
                let p2 = ((2 * m - 1) as f64 * z * p1 - (m - 1) as f64 * p0) / m as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
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

pub(crate) fn gl16() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(16))
}

/// ∫_a^b f with one 16-point panel.
pub(crate) fn panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (x, w) = gl16();
    let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
    x.iter().zip(w).map(|(xi, wi)| wi * f(c + r * xi)).sum::<f64>() * r
}

/// Adaptive bisection on 16-point panels until halves agree to `tol`, or
/// to a few ulps of the panel sum once rounding dominates.
pub(crate) fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn go<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (l, r) = (panel(f, a, m), panel(f, m, b));
        let change = (l + r - whole).abs();
        if depth == 0 || change <= tol || change <= 1e-14 * (l.abs() + r.abs()) {
            return l + r;
        }
        go(f, a, m, l, tol / 2.0, depth - 1) + go(f, m, b, r, tol / 2.0, depth - 1)
    }
    go(f, a, b, panel(f, a, b), tol, 30)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(16);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let m30: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(30)).sum();
        assert!((m30 - 2.0 / 31.0).abs() < 1e-14);
        let (x1, w1) = gauss_legendre(1);
        assert_eq!((x1[0], w1[0]), (0.0, 2.0));
    }

    #[test]
    fn adaptive_handles_peaks() {
        let v = adaptive(&|x: f64| 1e-3 / (x * x + 1e-6), -1.0, 1.0, 1e-12);
        let exact = 2.0 * (1e3f64).atan();
        assert!((v - exact).abs() < 1e-10);
    }
}
