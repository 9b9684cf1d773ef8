//! Exact radial solutions of the p-torsion problem on geodesic balls.
//!
//! The primary route integrates V'(t) = -Phi(t), the collapsed form of the
//! radial ODE (one bounded-integrand quadrature). `v_nested_form` evaluates
//! the triple-quadrature representation literally and serves as an
//! independent cross-check of the same solution.

use crate::error::{Error, Result};
use crate::interp::CubicSpline;
use crate::quad::{integrate, QuadratureSpec};
use crate::warp::{unit_sphere_area, RealFn, WarpProfile};
use std::io::Write;
use std::sync::Arc;

/// Grid-sampled radial torsion function V with V' on a geodesic ball.
pub struct RadialSolution {
    pub p: f64,
    pub radius: f64,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub derivs: Vec<f64>,
    eta: RealFn,
    spline: CubicSpline,
}

impl RadialSolution {
    /// V at an off-grid point by monotone cubic interpolation.
    pub fn value_at(&self, t: f64) -> f64 {
        self.spline.eval(t)
    }

    pub fn eta_at(&self, t: f64) -> f64 {
        (self.eta)(t)
    }

    fn from_parts(
        p: f64,
        radius: f64,
        grid: Vec<f64>,
        values: Vec<f64>,
        derivs: Vec<f64>,
        eta: RealFn,
    ) -> Result<Self> {
        // V must be strictly decreasing and vanish at the boundary.
        debug_assert_eq!(*values.last().unwrap(), 0.0);
        let spline = CubicSpline::monotone(grid.clone(), values.clone())?;
        Ok(Self {
            p,
            radius,
            grid,
            values,
            derivs,
            eta,
            spline,
        })
    }
}

fn check_radial_args(p: f64, r: f64, r_max: f64, grid_size: usize) -> Result<()> {
    if !(p >= 1.001) {
        return Err(Error::InvalidParameter {
            name: "p",
            message: format!("exponent must be at least 1.001, got {p}"),
        });
    }
    if !(r > 0.0) || r > r_max {
        return Err(Error::InvalidParameter {
            name: "r",
            message: format!("radius must lie in (0, {r_max}], got {r}"),
        });
    }
    if grid_size < 17 {
        return Err(Error::InvalidParameter {
            name: "grid_size",
            message: format!("grid must have at least 17 nodes, got {grid_size}"),
        });
    }
    Ok(())
}

pub const DEFAULT_GRID_SIZE: usize = 1025;

/// Solves the p-torsion problem on the geodesic ball of radius `r`.
///
/// Builds the cumulative ball volume on the solution grid, forms
/// Phi = (A/S)^(1/(p-1)) and integrates V(t) = int_t^r Phi.
pub fn solve_radial(
    profile: &Arc<WarpProfile>,
    p: f64,
    r: f64,
    grid_size: usize,
    quad: &QuadratureSpec,
) -> Result<RadialSolution> {
    check_radial_args(p, r, profile.usable_max_radius(), grid_size)?;
    quad.validate()?;
    let n = profile.dim;
    let omega = unit_sphere_area(n);
    let prof = profile.clone();
    let sphere = move |t: f64| omega * prof.rho(t).powi(n as i32 - 1);

    let cells = grid_size - 1;
    let h = r / cells as f64;
    let grid: Vec<f64> = (0..grid_size).map(|i| i as f64 * h).collect();

    // Cumulative A on the grid; per-cell tolerance keeps the total error
    // well below the 1e-10 identity budget.
    let cell_spec = QuadratureSpec {
        abs_tolerance: (quad.abs_tolerance / cells as f64).min(1e-13),
        max_subdivisions: quad.max_subdivisions,
    };
    let mut volumes = vec![0.0; grid_size];
    for i in 0..cells {
        let inc = integrate(&sphere, grid[i], grid[i + 1], &cell_spec)?.value;
        volumes[i + 1] = volumes[i] + inc;
    }

    let inv = 1.0 / (p - 1.0);
    let nf = n as f64;
    let phi_at = |t: f64| -> f64 {
        if t < 1e-8 {
            return (t / nf).powf(inv);
        }
        let i = ((t / h) as usize).min(cells - 1);
        let a = volumes[i] + integrate(&sphere, grid[i], t, &cell_spec).map_or(0.0, |q| q.value);
        (a / sphere(t)).powf(inv)
    };

    let mut values = vec![0.0; grid_size];
    for i in (0..cells).rev() {
        let inc = integrate(&phi_at, grid[i], grid[i + 1], &cell_spec)?.value;
        values[i] = values[i + 1] + inc;
    }

    let mut derivs: Vec<f64> = grid.iter().map(|&t| -phi_at(t)).collect();
    derivs[0] = 0.0;

    let prof = profile.clone();
    let nm1 = (n - 1) as f64;
    let eta: RealFn = Arc::new(move |t: f64| nm1 * prof.rho_prime(t) / prof.rho(t));
    RadialSolution::from_parts(p, r, grid, values, derivs, eta)
}

/// Interior normal derivative at the ball boundary, Phi(r) = -V'(r).
pub fn boundary_normal_derivative(sol: &RadialSolution) -> f64 {
    -sol.derivs.last().unwrap()
}

/// Max residual of d/dt |V'|^(p-1) + eta |V'|^(p-1) = 1 over interior grid
/// nodes, centered differences, skipping the two nodes nearest the pole
/// where eta diverges.
pub fn ode_residual(sol: &RadialSolution) -> f64 {
    let n = sol.grid.len();
    let h = sol.grid[1] - sol.grid[0];
    let w: Vec<f64> = sol
        .derivs
        .iter()
        .map(|&v| v.abs().powf(sol.p - 1.0))
        .collect();
    let mut worst = 0.0f64;
    for i in 3..n - 1 {
        let ddt = (w[i + 1] - w[i - 1]) / (2.0 * h);
        let res = (ddt + sol.eta_at(sol.grid[i]) * w[i] - 1.0).abs();
        worst = worst.max(res);
    }
    worst
}

/// Evaluates the nested triple-quadrature representation of v^r at distance
/// `t`: outer integral over the exponential prefactor times the bracket
/// |B_r|/|dB_r| - int e^{-int eta}, each level by quadrature.
pub fn v_nested_form(
    profile: &Arc<WarpProfile>,
    p: f64,
    r: f64,
    t: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    check_radial_args(p, r, profile.usable_max_radius(), 17)?;
    if !(t > 0.0) || t > r {
        return Err(Error::InvalidParameter {
            name: "t",
            message: format!("evaluation point must lie in (0, r], got {t}"),
        });
    }
    if t == r {
        return Ok(0.0);
    }
    let n = profile.dim;
    let omega = unit_sphere_area(n);
    let prof = profile.clone();
    let eta_fn = move |s: f64| (n - 1) as f64 * prof.rho_prime(s) / prof.rho(s);
    let sphere = |s: f64| omega * profile.rho(s).powi(n as i32 - 1);

    // |B_r| / |dB_r| by direct quadrature.
    let vol = integrate(&sphere, 0.0, r, quad)?.value;
    let ratio0 = vol / sphere(r);

    // Anchor grids for the two inner levels, accumulated from the boundary.
    const CELLS: usize = 512;
    let dt = (r - t) / CELLS as f64;
    let anchor = |k: usize| t + k as f64 * dt;
    let cell_spec = QuadratureSpec {
        abs_tolerance: (quad.abs_tolerance / CELLS as f64).min(1e-13),
        max_subdivisions: quad.max_subdivisions,
    };

    let mut eta_cum = vec![0.0; CELLS + 1]; // int_tau^r eta at anchors
    for k in (0..CELLS).rev() {
        let inc = integrate(&eta_fn, anchor(k), anchor(k + 1), &cell_spec)?.value;
        eta_cum[k] = eta_cum[k + 1] + inc;
    }
    let eta_int_at = |tau: f64| -> f64 {
        let k = (((tau - t) / dt) as usize).min(CELLS - 1);
        eta_cum[k + 1]
            + integrate(&eta_fn, tau, anchor(k + 1), &cell_spec).map_or(0.0, |q| q.value)
    };
    let decay = |tau: f64| (-eta_int_at(tau)).exp();

    let mut decay_cum = vec![0.0; CELLS + 1]; // int_s^r e^{-int eta} at anchors
    for k in (0..CELLS).rev() {
        let inc = integrate(&decay, anchor(k), anchor(k + 1), &cell_spec)?.value;
        decay_cum[k] = decay_cum[k + 1] + inc;
    }
    // Consistency of the bracket at the anchors.
    for k in 0..=CELLS {
        let bracket = ratio0 - decay_cum[k];
        if bracket < -1e-10 {
            return Err(Error::BracketInconsistency {
                value: bracket,
                t: anchor(k),
            });
        }
    }
    let decay_int_at = |s: f64| -> f64 {
        let k = (((s - t) / dt) as usize).min(CELLS - 1);
        decay_cum[k + 1]
            + integrate(&decay, s, anchor(k + 1), &cell_spec).map_or(0.0, |q| q.value)
    };

    let inv = 1.0 / (p - 1.0);
    let outer = |s: f64| -> f64 {
        let bracket = (ratio0 - decay_int_at(s)).max(0.0);
        (eta_int_at(s) * inv).exp() * bracket.powf(inv)
    };
    Ok(integrate(&outer, t, r, quad)?.value)
}

/// Radial solve for a user-supplied eta (any isoparametric distance).
///
/// Integrates |V'(t)|^{p-1} = e^{int_t^r eta} [C - int_t^r e^{-int_tau^r eta}]
/// with C fixed so that V'(0) = 0. The eta singularity at the pole is
/// handled by switching to a logarithmic variable below t = 1e-4.
pub fn solve_radial_custom_eta(
    eta_fn: RealFn,
    p: f64,
    r: f64,
    grid_size: usize,
    quad: &QuadratureSpec,
) -> Result<RadialSolution> {
    check_radial_args(p, r, f64::INFINITY, grid_size)?;
    quad.validate()?;
    let cells = grid_size - 1;
    let h = r / cells as f64;
    let grid: Vec<f64> = (0..grid_size).map(|i| i as f64 * h).collect();
    let cell_spec = QuadratureSpec {
        abs_tolerance: (quad.abs_tolerance / cells as f64).min(1e-13),
        max_subdivisions: quad.max_subdivisions,
    };

    const SPLIT: f64 = 1e-4;
    let eta_ref = eta_fn.clone();
    // int_a^b eta with a log-substitution grid below the split point.
    let eta_piece = |a: f64, b: f64| -> Result<f64> {
        debug_assert!(a <= b);
        let mut total = 0.0;
        let lo = a.max(SPLIT.min(b));
        if lo < b {
            total += integrate(&*eta_ref, lo, b, &cell_spec)?.value;
        }
        if a < lo {
            let f = |u: f64| {
                let s = u.exp();
                eta_ref(s) * s
            };
            total += integrate(&f, a.max(1e-300).ln(), lo.ln(), &cell_spec)?.value;
        }
        Ok(total)
    };

    // int_{t_i}^r eta accumulated on the grid (skipping the pole node).
    let mut eta_cum = vec![0.0; grid_size];
    for i in (1..cells).rev() {
        eta_cum[i] = eta_cum[i + 1] + eta_piece(grid[i], grid[i + 1])?;
    }
    let eta_int_at = |tau: f64| -> f64 {
        if tau >= r {
            return 0.0;
        }
        let i = ((tau / h) as usize).min(cells - 1).max(1);
        if tau >= grid[i] {
            eta_cum[i + 1] + eta_piece(tau, grid[i + 1]).unwrap_or(f64::INFINITY)
        } else {
            // below the first interior node
            eta_cum[1] + eta_piece(tau, grid[1]).unwrap_or(f64::INFINITY)
        }
    };
    let decay = |tau: f64| -> f64 {
        if tau <= 0.0 {
            0.0
        } else {
            (-eta_int_at(tau)).exp()
        }
    };

    // Cumulative int_0^{t_i} e^{-int_tau^r eta} d tau.
    let mut decay_cum = vec![0.0; grid_size];
    for i in 0..cells {
        decay_cum[i + 1] = decay_cum[i] + integrate(&decay, grid[i], grid[i + 1], &cell_spec)?.value;
    }
    let total = decay_cum[cells]; // = |V'(r)|^{p-1}

    let w_at = |t: f64| -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        let i = ((t / h) as usize).min(cells - 1);
        let cum = decay_cum[i] + integrate(&decay, grid[i], t, &cell_spec)?.value;
        let tail = total - cum; // int_t^r e^{-int eta}
        let w = (eta_int_at(t)).exp() * (total - tail);
        if w < -1e-12 {
            return Err(Error::NegativeDerivativePower { value: w, t });
        }
        Ok(w.max(0.0))
    };

    let inv = 1.0 / (p - 1.0);
    let mut derivs = vec![0.0; grid_size];
    for i in 1..grid_size {
        derivs[i] = -w_at(grid[i])?.powf(inv);
    }
    let mut values = vec![0.0; grid_size];
    for i in (0..cells).rev() {
        let f = |t: f64| w_at(t).map_or(f64::NAN, |w| w.powf(inv));
        let inc = integrate(&f, grid[i], grid[i + 1], &cell_spec)?.value;
        values[i] = values[i + 1] + inc;
    }
    RadialSolution::from_parts(p, r, grid, values, derivs, eta_fn)
}

/// Writes the solution as CSV with the fixed header `t,V,Vprime,Phi,residual`.
///
/// `Phi` is |V'| (the two agree identically on the grid) and `residual` is
/// the pointwise ODE residual, zero at the nodes excluded from the check.
pub fn export_csv<W: Write>(sol: &RadialSolution, out: &mut W) -> Result<()> {
    writeln!(out, "t,V,Vprime,Phi,residual")?;
    let n = sol.grid.len();
    let h = sol.grid[1] - sol.grid[0];
    let w: Vec<f64> = sol
        .derivs
        .iter()
        .map(|&v| v.abs().powf(sol.p - 1.0))
        .collect();
    for i in 0..n {
        let res = if i >= 3 && i + 1 < n {
            let ddt = (w[i + 1] - w[i - 1]) / (2.0 * h);
            ddt + sol.eta_at(sol.grid[i]) * w[i] - 1.0
        } else {
            0.0
        };
        writeln!(
            out,
            "{},{},{},{},{}",
            sol.grid[i],
            sol.values[i],
            sol.derivs[i],
            -sol.derivs[i],
            res
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::warp::ProfileKind;
    use approx::assert_abs_diff_eq;

    fn preset(kind: ProfileKind, n: u32) -> Arc<WarpProfile> {
        Arc::new(WarpProfile::preset(kind, n).unwrap())
    }

    /// Closed form of v^r in the Euclidean case.
    fn euclidean_exact(p: f64, n: u32, r: f64, t: f64) -> f64 {
        let q = p / (p - 1.0);
        (p - 1.0) / p * (r.powf(q) - t.powf(q)) / (n as f64).powf(1.0 / (p - 1.0))
    }

    #[test]
    fn euclidean_center_value() {
        let prof = preset(ProfileKind::Euclidean, 2);
        let sol = solve_radial(&prof, 2.0, 1.0, 1025, &QuadratureSpec::default()).unwrap();
        assert_abs_diff_eq!(sol.values[0], 0.25, epsilon = 1e-10);
        assert_eq!(*sol.values.last().unwrap(), 0.0);
    }

    #[test]
    fn euclidean_p3_center_value() {
        let prof = preset(ProfileKind::Euclidean, 2);
        let sol = solve_radial(&prof, 3.0, 1.0, 1025, &QuadratureSpec::default()).unwrap();
        assert_abs_diff_eq!(sol.values[0], euclidean_exact(3.0, 2, 1.0, 0.0), epsilon = 1e-9);
        assert_abs_diff_eq!(sol.values[0], 2.0 / 3.0 / 2f64.sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn hyperbolic_center_value() {
        let prof = preset(ProfileKind::Hyperbolic, 2);
        let sol = solve_radial(&prof, 2.0, 1.0, 1025, &QuadratureSpec::default()).unwrap();
        // antiderivative of tanh(t/2)
        assert_abs_diff_eq!(sol.values[0], 2.0 * 0.5f64.cosh().ln(), epsilon = 1e-9);
    }

    #[test]
    fn values_decrease_and_stay_positive() {
        let prof = preset(ProfileKind::Spherical, 2);
        let sol = solve_radial(&prof, 1.5, 2.0, 257, &QuadratureSpec::default()).unwrap();
        for i in 0..sol.values.len() - 1 {
            assert!(sol.values[i] > sol.values[i + 1]);
        }
        assert!(sol.derivs[0] == 0.0);
    }

    #[test]
    fn rejects_bad_arguments() {
        let prof = preset(ProfileKind::Spherical, 2);
        let quad = QuadratureSpec::default();
        assert!(solve_radial(&prof, 2.0, 3.5, 1025, &quad).is_err()); // r >= pi
        assert!(solve_radial(&prof, 1.0, 1.0, 1025, &quad).is_err()); // p too small
        assert!(solve_radial(&prof, 2.0, 1.0, 9, &quad).is_err()); // grid too coarse
        assert!(v_nested_form(&prof, 2.0, 1.0, -0.1, &quad).is_err());
        assert!(v_nested_form(&prof, 2.0, 1.0, 1.5, &quad).is_err());
    }

    #[test]
    fn boundary_normal_derivative_examples() {
        let quad = QuadratureSpec::default();
        let e2 = preset(ProfileKind::Euclidean, 2);
        let sol = solve_radial(&e2, 2.0, 1.0, 1025, &quad).unwrap();
        assert_abs_diff_eq!(boundary_normal_derivative(&sol), 0.5, epsilon = 1e-11);
        let e3 = preset(ProfileKind::Euclidean, 3);
        let sol = solve_radial(&e3, 2.0, 1.0, 1025, &quad).unwrap();
        assert_abs_diff_eq!(boundary_normal_derivative(&sol), 1.0 / 3.0, epsilon = 1e-11);
        let s2 = preset(ProfileKind::Spherical, 2);
        let sol = solve_radial(&s2, 2.0, std::f64::consts::FRAC_PI_2, 1025, &quad).unwrap();
        assert_abs_diff_eq!(boundary_normal_derivative(&sol), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn nested_form_boundary_is_zero() {
        let prof = preset(ProfileKind::Hyperbolic, 2);
        let v = v_nested_form(&prof, 2.0, 1.0, 1.0, &QuadratureSpec::default()).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn nested_form_matches_primary_route() {
        let quad = QuadratureSpec::default();
        let prof = preset(ProfileKind::Hyperbolic, 2);
        let sol = solve_radial(&prof, 2.0, 1.0, 1025, &quad).unwrap();
        let v = v_nested_form(&prof, 2.0, 1.0, 0.5, &quad).unwrap();
        assert_abs_diff_eq!(v, sol.value_at(0.5), epsilon = 1e-7);
    }

    #[test]
    fn nested_form_near_origin_euclidean() {
        let quad = QuadratureSpec::default();
        let prof = preset(ProfileKind::Euclidean, 2);
        let v = v_nested_form(&prof, 2.0, 1.0, 1e-6, &quad).unwrap();
        assert_abs_diff_eq!(v, 0.25, epsilon = 1e-7);
    }

    #[test]
    fn ode_residual_small_on_exact_solution() {
        let quad = QuadratureSpec::default();
        let prof = preset(ProfileKind::Euclidean, 2);
        let sol = solve_radial(&prof, 2.0, 1.0, 1025, &quad).unwrap();
        assert!(ode_residual(&sol) < 1e-5);
        let prof = preset(ProfileKind::Hyperbolic, 2);
        let sol = solve_radial(&prof, 3.0, 1.5, 2049, &quad).unwrap();
        assert!(ode_residual(&sol) < 1e-4);
    }

    #[test]
    fn custom_eta_matches_presets() {
        let quad = QuadratureSpec::default();
        let e2 = preset(ProfileKind::Euclidean, 2);
        let base = solve_radial(&e2, 2.0, 1.0, 513, &quad).unwrap();
        let sol =
            solve_radial_custom_eta(Arc::new(|t: f64| 1.0 / t), 2.0, 1.0, 513, &quad).unwrap();
        for i in 0..sol.grid.len() {
            assert_abs_diff_eq!(sol.values[i], base.values[i], epsilon = 1e-8);
        }
        let h2 = preset(ProfileKind::Hyperbolic, 2);
        let base = solve_radial(&h2, 2.0, 1.0, 513, &quad).unwrap();
        let sol = solve_radial_custom_eta(
            Arc::new(|t: f64| t.cosh() / t.sinh()),
            2.0,
            1.0,
            513,
            &quad,
        )
        .unwrap();
        for i in 0..sol.grid.len() {
            assert_abs_diff_eq!(sol.values[i], base.values[i], epsilon = 1e-8);
        }
    }

    #[test]
    fn custom_eta_zero_is_one_dimensional_profile() {
        let quad = QuadratureSpec::default();
        let sol = solve_radial_custom_eta(Arc::new(|_| 0.0), 2.0, 1.0, 513, &quad).unwrap();
        assert_abs_diff_eq!(sol.values[0], 0.5, epsilon = 1e-9);
        for (i, &t) in sol.grid.iter().enumerate() {
            assert_abs_diff_eq!(sol.derivs[i].abs(), t, epsilon = 1e-9);
        }
    }

    #[test]
    fn csv_export_has_fixed_header() {
        let prof = preset(ProfileKind::Euclidean, 2);
        let sol = solve_radial(&prof, 2.0, 1.0, 17, &QuadratureSpec::default()).unwrap();
        let mut buf = Vec::new();
        export_csv(&sol, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,V,Vprime,Phi,residual\n"));
        assert_eq!(text.lines().count(), 18);
    }
}
