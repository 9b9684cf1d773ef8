//! Star-shaped domains described by a boundary radius b(theta).

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Boundary radius as a truncated Fourier series
/// b(theta) = a0 + sum_k (a_k cos k theta + b_k sin k theta).
///
/// Positivity of b guarantees that the base point lies inside the domain.
#[derive(Debug, Clone)]
pub struct StarDomain {
    pub a0: f64,
    pub cos_coeffs: Vec<f64>,
    pub sin_coeffs: Vec<f64>,
}

const SCAN_POINTS: usize = 4096;

impl StarDomain {
    pub fn new(a0: f64, cos_coeffs: Vec<f64>, sin_coeffs: Vec<f64>) -> Result<Self> {
        let domain = Self {
            a0,
            cos_coeffs,
            sin_coeffs,
        };
        let (min, _) = domain.extrema();
        if !(min > 0.0) {
            return Err(Error::InvalidParameter {
                name: "domain",
                message: format!("boundary radius must stay positive; min b = {min}"),
            });
        }
        Ok(domain)
    }

    /// Circle of radius `r`.
    pub fn ball(r: f64) -> Result<Self> {
        Self::new(r, Vec::new(), Vec::new())
    }

    /// Fourier coefficients from equispaced boundary samples (trigonometric
    /// interpolation, discrete Fourier transform up to the Nyquist mode).
    pub fn from_samples(values: &[f64]) -> Result<Self> {
        let m = values.len();
        if m < 4 {
            return Err(Error::InvalidParameter {
                name: "values",
                message: "need at least 4 boundary samples".into(),
            });
        }
        let a0 = values.iter().sum::<f64>() / m as f64;
        let kmax = (m - 1) / 2;
        let mut cos_coeffs = vec![0.0; kmax];
        let mut sin_coeffs = vec![0.0; kmax];
        for k in 1..=kmax {
            let mut c = 0.0;
            let mut s = 0.0;
            for (j, &v) in values.iter().enumerate() {
                let ang = 2.0 * PI * (k * j) as f64 / m as f64;
                c += v * ang.cos();
                s += v * ang.sin();
            }
            cos_coeffs[k - 1] = 2.0 * c / m as f64;
            sin_coeffs[k - 1] = 2.0 * s / m as f64;
        }
        Self::new(a0, cos_coeffs, sin_coeffs)
    }

    pub fn b(&self, theta: f64) -> f64 {
        let mut v = self.a0;
        for (i, &a) in self.cos_coeffs.iter().enumerate() {
            v += a * ((i + 1) as f64 * theta).cos();
        }
        for (i, &b) in self.sin_coeffs.iter().enumerate() {
            v += b * ((i + 1) as f64 * theta).sin();
        }
        v
    }

    pub fn b_prime(&self, theta: f64) -> f64 {
        let mut v = 0.0;
        for (i, &a) in self.cos_coeffs.iter().enumerate() {
            let k = (i + 1) as f64;
            v -= a * k * (k * theta).sin();
        }
        for (i, &b) in self.sin_coeffs.iter().enumerate() {
            let k = (i + 1) as f64;
            v += b * k * (k * theta).cos();
        }
        v
    }

    /// (min, max) of b over a period: dense scan refined by golden-section
    /// search around the best samples.
    pub fn extrema(&self) -> (f64, f64) {
        let step = 2.0 * PI / SCAN_POINTS as f64;
        let mut i_min = 0;
        let mut i_max = 0;
        let mut v_min = f64::INFINITY;
        let mut v_max = f64::NEG_INFINITY;
        for i in 0..SCAN_POINTS {
            let v = self.b(i as f64 * step);
            if v < v_min {
                v_min = v;
                i_min = i;
            }
            if v > v_max {
                v_max = v;
                i_max = i;
            }
        }
        let refine = |i: usize, sign: f64| -> f64 {
            let mut lo = (i as f64 - 1.0) * step;
            let mut hi = (i as f64 + 1.0) * step;
            let phi = (5f64.sqrt() - 1.0) / 2.0;
            let mut x1 = hi - phi * (hi - lo);
            let mut x2 = lo + phi * (hi - lo);
            let mut f1 = sign * self.b(x1);
            let mut f2 = sign * self.b(x2);
            for _ in 0..70 {
                if f1 < f2 {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - phi * (hi - lo);
                    f1 = sign * self.b(x1);
                } else {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + phi * (hi - lo);
                    f2 = sign * self.b(x2);
                }
            }
            sign * f1.min(f2)
        };
        (refine(i_min, 1.0), refine(i_max, -1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_boundary() {
        let d = StarDomain::ball(1.0).unwrap();
        let (lo, hi) = d.extrema();
        assert_abs_diff_eq!(lo, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hi, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn cosine_perturbation_extrema() {
        let d = StarDomain::new(1.0, vec![0.0, 0.3], vec![]).unwrap();
        let (lo, hi) = d.extrema();
        assert_abs_diff_eq!(lo, 0.7, epsilon = 1e-9);
        assert_abs_diff_eq!(hi, 1.3, epsilon = 1e-9);
    }

    #[test]
    fn sine_perturbation_extrema() {
        let d = StarDomain::new(1.0, vec![], vec![0.0, 0.0, 0.1]).unwrap();
        let (lo, hi) = d.extrema();
        assert_abs_diff_eq!(lo, 0.9, epsilon = 1e-9);
        assert_abs_diff_eq!(hi, 1.1, epsilon = 1e-9);
    }

    #[test]
    fn rejects_nonpositive_boundary() {
        assert!(StarDomain::new(1.0, vec![0.0, 1.5], vec![]).is_err());
        assert!(StarDomain::ball(-1.0).is_err());
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let d = StarDomain::new(1.0, vec![0.2, -0.1], vec![0.05]).unwrap();
        for i in 0..12 {
            let th = i as f64 * 0.5;
            let h = 1e-6;
            let fd = (d.b(th + h) - d.b(th - h)) / (2.0 * h);
            assert_abs_diff_eq!(d.b_prime(th), fd, epsilon = 1e-8);
        }
    }

    #[test]
    fn samples_round_trip() {
        let d = StarDomain::new(1.0, vec![0.1, 0.3], vec![0.0, -0.2]).unwrap();
        let m = 64;
        let vals: Vec<f64> = (0..m)
            .map(|j| d.b(2.0 * PI * j as f64 / m as f64))
            .collect();
        let d2 = StarDomain::from_samples(&vals).unwrap();
        for i in 0..50 {
            let th = i as f64 * 0.13;
            assert_abs_diff_eq!(d2.b(th), d.b(th), epsilon = 1e-10);
        }
    }
}
