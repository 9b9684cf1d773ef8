//! Piecewise cubic Hermite interpolation.
//!
//! Two constructors: `monotone` derives slopes with the Fritsch-Carlson
//! limiter (shape preserving), `hermite` takes exact derivatives supplied by
//! the caller.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ds: Vec<f64>,
}

impl CubicSpline {
    /// Monotone (Fritsch-Carlson) cubic through `(xs, ys)`; `xs` strictly increasing.
    pub fn monotone(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        check_grid(&xs, &ys)?;
        let n = xs.len();
        let mut ds = vec![0.0; n];
        if n == 2 {
            let s = (ys[1] - ys[0]) / (xs[1] - xs[0]);
            ds[0] = s;
            ds[1] = s;
            return Ok(Self { xs, ys, ds });
        }
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
        for i in 1..n - 1 {
            if delta[i - 1] * delta[i] <= 0.0 {
                ds[i] = 0.0;
            } else {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                ds[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
        ds[0] = endpoint_slope(h[0], h[1], delta[0], delta[1]);
        ds[n - 1] = endpoint_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        Ok(Self { xs, ys, ds })
    }

    /// Cubic Hermite with caller-supplied derivatives.
    pub fn hermite(xs: Vec<f64>, ys: Vec<f64>, ds: Vec<f64>) -> Result<Self> {
        check_grid(&xs, &ys)?;
        if ds.len() != xs.len() {
            return Err(Error::InvalidParameter {
                name: "ds",
                message: "derivative vector length mismatch".into(),
            });
        }
        Ok(Self { xs, ys, ds })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    /// Evaluate at `x`, clamped to the grid range.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let i = match self
            .xs
            .binary_search_by(|v| v.partial_cmp(&x).unwrap())
        {
            Ok(i) => return self.ys[i],
            Err(i) => i - 1,
        };
        let h = self.xs[i + 1] - self.xs[i];
        let s = (x - self.xs[i]) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        h00 * self.ys[i] + h10 * h * self.ds[i] + h01 * self.ys[i + 1] + h11 * h * self.ds[i + 1]
    }
}

fn endpoint_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    // One-sided three-point estimate with the standard shape-preserving limits.
    let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if s * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && s.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        s
    }
}

fn check_grid(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() < 2 || xs.len() != ys.len() {
        return Err(Error::InvalidParameter {
            name: "xs",
            message: "need at least two nodes and matching lengths".into(),
        });
    }
    if xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter {
            name: "xs",
            message: "abscissae must be strictly increasing".into(),
        });
    }
    Ok(())
}
