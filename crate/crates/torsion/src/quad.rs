//! Adaptive composite Gauss-Legendre quadrature.
//!
//! A 10-point Gauss-Legendre rule is applied per panel; the panel error is
//! estimated by comparing the whole-panel value against the sum over the two
//! halves, and panels are bisected until the local tolerance is met.

use crate::error::{Error, Result};
use std::sync::OnceLock;

/// Controls the adaptive quadrature used throughout the crate.
#[derive(Debug, Clone)]
pub struct QuadratureSpec {
    pub abs_tolerance: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tolerance: 1e-10,
            max_subdivisions: 1 << 16,
        }
    }
}

impl QuadratureSpec {
    pub fn with_tolerance(abs_tolerance: f64) -> Result<Self> {
        let spec = Self {
            abs_tolerance,
            ..Self::default()
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tolerance > 0.0) {
            return Err(Error::InvalidParameter {
                name: "abs_tolerance",
                message: format!("must be positive, got {}", self.abs_tolerance),
            });
        }
        if self.max_subdivisions < 4 {
            return Err(Error::InvalidParameter {
                name: "max_subdivisions",
                message: format!("must be at least 4, got {}", self.max_subdivisions),
            });
        }
        Ok(())
    }

    /// Same rule with the tolerance divided by `n`, for splitting a budget
    /// across `n` subintervals.
    pub fn scaled(&self, n: usize) -> Self {
        Self {
            abs_tolerance: self.abs_tolerance / n.max(1) as f64,
            max_subdivisions: self.max_subdivisions,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
}

const GL_POINTS: usize = 10;

fn gauss_legendre_rule() -> &'static ([f64; GL_POINTS], [f64; GL_POINTS]) {
    static RULE: OnceLock<([f64; GL_POINTS], [f64; GL_POINTS])> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_POINTS;
        let mut nodes = [0.0; GL_POINTS];
        let mut weights = [0.0; GL_POINTS];
        for k in 0..n {
            // Newton iteration from the Chebyshev-based initial guess.
            let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (pn, dpn) = legendre_and_derivative(n, x);
                let dx = pn / dpn;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dpn) = legendre_and_derivative(n, x);
            nodes[k] = x;
            weights[k] = 2.0 / ((1.0 - x * x) * dpn * dpn);
        }
        (nodes, weights)
    })
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn panel<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64) -> f64 {
    let (nodes, weights) = gauss_legendre_rule();
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut sum = 0.0;
    for k in 0..GL_POINTS {
        sum += weights[k] * f(mid + half * nodes[k]);
    }
    sum * half
}

/// Integrate `f` over `[a, b]` to the spec's absolute tolerance.
pub fn integrate<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error_estimate: 0.0,
        });
    }
    if a > b {
        let r = integrate(f, b, a, spec)?;
        return Ok(QuadResult {
            value: -r.value,
            error_estimate: r.error_estimate,
        });
    }
    let total_len = b - a;
    let mut stack: Vec<(f64, f64, f64)> = vec![(a, b, panel(f, a, b))];
    let mut value = 0.0;
    let mut error_estimate = 0.0;
    let mut subdivisions = 0usize;
    while let Some((lo, hi, whole)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = panel(f, lo, mid);
        let right = panel(f, mid, hi);
        let refined = left + right;
        let err = (whole - refined).abs();
        let local_tol = spec.abs_tolerance * (hi - lo) / total_len;
        if err <= local_tol || err <= 1e-14 * refined.abs() || (hi - lo) <= 1e-15 * total_len {
            value += refined;
            error_estimate += err;
        } else {
            subdivisions += 1;
            if subdivisions > spec.max_subdivisions {
                return Err(Error::QuadratureNonConvergence {
                    achieved: error_estimate + err,
                    tolerance: spec.abs_tolerance,
                });
            }
            stack.push((lo, mid, left));
            stack.push((mid, hi, right));
        }
    }
    Ok(QuadResult {
        value,
        error_estimate,
    })
}
