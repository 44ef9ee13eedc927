//! One-dimensional Gauss rules on `[0, 1]` and their tensor products.

use std::f64::consts::PI;

/// Value and derivative of the Legendre polynomial `P_n` at `x` in `[-1, 1]`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// A quadrature rule with points and weights on `[0, 1]`.
#[derive(Clone, Debug)]
pub struct Rule1d {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule1d {
    /// Gauss-Legendre rule with `n` points, exact for polynomials of degree `2n - 1`.
    pub fn gauss_legendre(n: usize) -> Rule1d {
        assert!(n >= 1);
        let mut points = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            let mut x = -(PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre(n, x);
            points[i] = 0.5 * (x + 1.0);
            weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
        }
        Rule1d { points, weights }
    }

    /// Gauss-Lobatto rule with `n >= 2` points including both endpoints.
    pub fn gauss_lobatto(n: usize) -> Rule1d {
        assert!(n >= 2);
        let m = n - 1;
        let mut points = vec![0.0; n];
        let mut weights = vec![0.0; n];
        points[n - 1] = 1.0;
        let w_end = 1.0 / (m * n) as f64;
        weights[0] = w_end;
        weights[n - 1] = w_end;
        // interior nodes are the roots of P_m'; Newton on P_m' using the Legendre ODE
        for i in 1..m {
            let mut x = -(PI * i as f64 / m as f64).cos();
            for _ in 0..100 {
                let (p, dp) = legendre(m, x);
                let d2p = (2.0 * x * dp - (m * (m + 1)) as f64 * p) / (1.0 - x * x);
                let dx = dp / d2p;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (p, _) = legendre(m, x);
            points[i] = 0.5 * (x + 1.0);
            weights[i] = 1.0 / ((m * n) as f64 * p * p);
        }
        Rule1d { points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Tensor-product rule on the unit square; point `(i, j)` is stored at `i + n * j`.
#[derive(Clone, Debug)]
pub struct Rule2d {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl Rule2d {
    pub fn tensor(rule: &Rule1d) -> Rule2d {
        let n = rule.len();
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                points.push([rule.points[i], rule.points[j]]);
                weights.push(rule.weights[i] * rule.weights[j]);
            }
        }
        Rule2d { points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrate(rule: &Rule1d, p: usize) -> f64 {
        rule.points.iter().zip(&rule.weights).map(|(x, w)| w * x.powi(p as i32)).sum()
    }

    #[test]
    fn gauss_legendre_exactness() {
        for n in 1..8 {
            let rule = Rule1d::gauss_legendre(n);
            for p in 0..2 * n {
                let exact = 1.0 / (p + 1) as f64;
                assert!((integrate(&rule, p) - exact).abs() < 1e-14, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn gauss_lobatto_exactness() {
        for n in 2..8 {
            let rule = Rule1d::gauss_lobatto(n);
            assert_eq!(rule.points[0], 0.0);
            assert_eq!(rule.points[n - 1], 1.0);
            for p in 0..2 * n - 2 {
                let exact = 1.0 / (p + 1) as f64;
                assert!((integrate(&rule, p) - exact).abs() < 1e-14, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn lobatto_three_points() {
        let rule = Rule1d::gauss_lobatto(3);
        assert!((rule.points[1] - 0.5).abs() < 1e-15);
        assert!((rule.weights[1] - 2.0 / 3.0).abs() < 1e-15);
    }
}
