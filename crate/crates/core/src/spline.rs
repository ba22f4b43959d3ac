//! Natural cubic spline over strictly increasing, possibly non-uniform knots.

use crate::error::{Error, Result};

/// Interpolating natural cubic spline (zero second derivative at both ends).
#[derive(Debug, Clone)]
pub struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Second derivatives at the knots.
    m2: Vec<f64>,
}

impl CubicSpline {
    /// Build from knot positions and values. Requires at least four knots
    /// with strictly increasing, finite positions.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::invalid(
                "spline knots",
                format!("{} positions vs {} values", xs.len(), ys.len()),
            ));
        }
        if xs.len() < 4 {
            return Err(Error::invalid(
                "spline knots",
                format!("need at least 4 samples, got {}", xs.len()),
            ));
        }
        for w in xs.windows(2) {
            if w[1] <= w[0] || (w[1] - w[0]).is_nan() {
                return Err(Error::invalid(
                    "spline knots",
                    format!("positions not strictly increasing at {} -> {}", w[0], w[1]),
                ));
            }
        }
        if xs.iter().chain(ys.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("spline knots", "non-finite sample"));
        }

        let n = xs.len();
        // Thomas algorithm for the tridiagonal second-derivative system.
        let mut diag = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        let mut upper = vec![0.0; n];
        diag[0] = 1.0;
        diag[n - 1] = 1.0;
        for i in 1..n - 1 {
            let h0 = xs[i] - xs[i - 1];
            let h1 = xs[i + 1] - xs[i];
            diag[i] = (h0 + h1) / 3.0;
            upper[i] = h1 / 6.0;
            rhs[i] = (ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0;
        }
        // Forward sweep. Lower band for row i is h0/6; rows 0 and n-1 are
        // identity (natural boundary), so the sweep runs over the interior.
        for i in 2..n - 1 {
            let lower = (xs[i] - xs[i - 1]) / 6.0;
            let w = lower / diag[i - 1];
            diag[i] -= w * upper[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        let mut m2 = vec![0.0; n];
        for i in (1..n - 1).rev() {
            m2[i] = (rhs[i] - upper[i] * m2[i + 1]) / diag[i];
        }

        Ok(Self { xs, ys, m2 })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    fn segment(&self, x: f64) -> usize {
        match self.xs.binary_search_by(|k| k.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(self.xs.len() - 2),
            Err(i) => i.clamp(1, self.xs.len() - 1) - 1,
        }
    }

    /// Interpolated value. `x` must lie inside the domain; callers enforce that.
    pub fn eval(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        a * self.ys[i]
            + b * self.ys[i + 1]
            + ((a * a * a - a) * self.m2[i] + (b * b * b - b) * self.m2[i + 1]) * h * h / 6.0
    }

    /// First derivative of the interpolant.
    pub fn deriv(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        (self.ys[i + 1] - self.ys[i]) / h
            + ((3.0 * b * b - 1.0) * self.m2[i + 1] - (3.0 * a * a - 1.0) * self.m2[i]) * h / 6.0
    }

    /// Second derivative of the interpolant.
    pub fn second_deriv(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        a * self.m2[i] + b * self.m2[i + 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn interpolates_knots_exactly() {
        let xs = vec![0.0, 0.7, 1.1, 2.0, 3.5, 4.0];
        let ys = vec![1.0, -0.3, 0.4, 2.2, 0.0, 1.0];
        let s = CubicSpline::new(xs.clone(), ys.clone()).unwrap();
        for (x, y) in xs.iter().zip(ys.iter()) {
            assert!((s.eval(*x) - y).abs() < 1e-14);
        }
    }

    #[test]
    fn linear_data_reproduced_exactly() {
        let xs = grid(-2.0, 5.0, 9);
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.5).collect();
        let s = CubicSpline::new(xs, ys).unwrap();
        for k in 0..100 {
            let x = -2.0 + 7.0 * k as f64 / 99.0;
            assert!((s.eval(x) - (3.0 * x - 1.5)).abs() < 1e-12);
            assert!((s.deriv(x) - 3.0).abs() < 1e-12);
            assert!(s.second_deriv(x).abs() < 1e-12);
        }
    }

    #[test]
    fn smooth_function_and_derivatives_converge() {
        // sin on [0, pi] with 101 knots: interior errors ~ h^4 for the value
        // and ~ h^2 for the curvature.
        let xs = grid(0.0, std::f64::consts::PI, 101);
        let ys: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        let s = CubicSpline::new(xs, ys).unwrap();
        for k in 1..50 {
            let x = 1.0 + k as f64 * 0.02;
            assert!((s.eval(x) - x.sin()).abs() < 1e-7);
            assert!((s.deriv(x) - x.cos()).abs() < 1e-5);
            assert!((s.second_deriv(x) + x.sin()).abs() < 1e-3);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(CubicSpline::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 2.0]).is_err());
        assert!(CubicSpline::new(vec![0.0, 1.0, 1.0, 2.0], vec![0.0; 4]).is_err());
        assert!(CubicSpline::new(vec![0.0, 1.0, 2.0, 3.0], vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let xs = grid(0.0, 10.0, 41);
        let ys: Vec<f64> = xs.iter().map(|x| (0.3 * x).cos() + 0.1 * x).collect();
        let s = CubicSpline::new(xs, ys).unwrap();
        let h = 1e-6;
        for k in 1..30 {
            let x = 1.0 + 0.27 * k as f64;
            let fd = (s.eval(x + h) - s.eval(x - h)) / (2.0 * h);
            assert!((s.deriv(x) - fd).abs() < 1e-8, "x={x}");
        }
    }
}
