//! Rotationally symmetric metrics g = dt^2 + rho(t)^2 g_S and the scalar
//! quantities of their geodesic balls: sphere area S, ball volume A, the
//! ratio Phi = (A/S)^(1/(p-1)) and the distance-Laplacian eta = (n-1) rho'/rho.

use crate::error::{Error, Result};
use crate::quad::{integrate, QuadratureSpec};
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    Euclidean,
    Hyperbolic,
    Spherical,
    Custom,
}

impl ProfileKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProfileKind::Euclidean => "euclidean",
            ProfileKind::Hyperbolic => "hyperbolic",
            ProfileKind::Spherical => "spherical",
            ProfileKind::Custom => "custom",
        }
    }
}

/// Warping function of a rotationally symmetric metric, with its derivative,
/// dimension and validity radius.
pub struct WarpProfile {
    pub kind: ProfileKind,
    pub dim: u32,
    rho: RealFn,
    rho_prime: RealFn,
    pub max_radius: f64,
    /// True when rho'(0) = 1 (metric smooth at the pole). Checked during
    /// validation; a false value is allowed but flagged.
    pub pole_smooth: bool,
}

impl std::fmt::Debug for WarpProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WarpProfile")
            .field("kind", &self.kind)
            .field("dim", &self.dim)
            .field("max_radius", &self.max_radius)
            .field("pole_smooth", &self.pole_smooth)
            .finish()
    }
}

impl WarpProfile {
    pub fn preset(kind: ProfileKind, n: u32) -> Result<Self> {
        match kind {
            ProfileKind::Euclidean => make_profile(kind, n, None, None, None),
            ProfileKind::Hyperbolic => make_profile(kind, n, None, None, None),
            ProfileKind::Spherical => make_profile(kind, n, None, None, None),
            ProfileKind::Custom => Err(Error::InvalidParameter {
                name: "kind",
                message: "custom profiles need explicit rho and rho'".into(),
            }),
        }
    }

    /// Named analytic forms addressable from configuration. Presets take no
    /// parameter; "sinh-scaled" and "sin-scaled" use rho(t) = sinh(a t)/a and
    /// sin(a t)/a with a > 0.
    pub fn from_name(name: &str, n: u32, param: Option<f64>) -> Result<Self> {
        match name {
            "euclidean" => Self::preset(ProfileKind::Euclidean, n),
            "hyperbolic" => Self::preset(ProfileKind::Hyperbolic, n),
            "spherical" => Self::preset(ProfileKind::Spherical, n),
            "sinh-scaled" => {
                let a = positive_param(name, param)?;
                make_profile(
                    ProfileKind::Custom,
                    n,
                    Some(Arc::new(move |t: f64| (a * t).sinh() / a)),
                    Some(Arc::new(move |t: f64| (a * t).cosh())),
                    Some(f64::INFINITY),
                )
            }
            "sin-scaled" => {
                let a = positive_param(name, param)?;
                make_profile(
                    ProfileKind::Custom,
                    n,
                    Some(Arc::new(move |t: f64| (a * t).sin() / a)),
                    Some(Arc::new(move |t: f64| (a * t).cos())),
                    Some(PI / a),
                )
            }
            other => Err(Error::InvalidParameter {
                name: "profile",
                message: format!(
                    "unknown profile `{other}` (expected euclidean, hyperbolic, spherical, \
                     sinh-scaled or sin-scaled)"
                ),
            }),
        }
    }

    pub fn rho(&self, t: f64) -> f64 {
        (self.rho)(t)
    }

    pub fn rho_prime(&self, t: f64) -> f64 {
        (self.rho_prime)(t)
    }

    /// Largest radius accepted for computations; clamps away from max_radius.
    pub fn usable_max_radius(&self) -> f64 {
        if self.max_radius.is_finite() {
            self.max_radius - 1e-6
        } else {
            f64::INFINITY
        }
    }
}

fn positive_param(name: &str, param: Option<f64>) -> Result<f64> {
    match param {
        Some(a) if a > 0.0 => Ok(a),
        _ => Err(Error::InvalidParameter {
            name: "profile_param",
            message: format!("profile `{name}` needs a positive parameter"),
        }),
    }
}

/// Builds and validates a profile. Presets ignore the custom arguments;
/// custom profiles need rho, rho' and a maximum radius.
pub fn make_profile(
    kind: ProfileKind,
    n: u32,
    custom_rho: Option<RealFn>,
    custom_rho_prime: Option<RealFn>,
    max_radius: Option<f64>,
) -> Result<WarpProfile> {
    if n < 2 {
        return Err(Error::InvalidParameter {
            name: "n",
            message: format!("dimension must be at least 2, got {n}"),
        });
    }
    let (rho, rho_prime, max_radius): (RealFn, RealFn, f64) = match kind {
        ProfileKind::Euclidean => (
            Arc::new(|t: f64| t),
            Arc::new(|_t: f64| 1.0),
            f64::INFINITY,
        ),
        ProfileKind::Hyperbolic => (
            Arc::new(|t: f64| t.sinh()),
            Arc::new(|t: f64| t.cosh()),
            f64::INFINITY,
        ),
        ProfileKind::Spherical => (Arc::new(|t: f64| t.sin()), Arc::new(|t: f64| t.cos()), PI),
        ProfileKind::Custom => {
            let rho = custom_rho.ok_or_else(|| Error::InvalidParameter {
                name: "custom_rho",
                message: "custom profile requires rho".into(),
            })?;
            let rho_prime = custom_rho_prime.ok_or_else(|| Error::InvalidParameter {
                name: "custom_rho_prime",
                message: "custom profile requires rho'".into(),
            })?;
            let r = max_radius.ok_or_else(|| Error::InvalidParameter {
                name: "max_radius",
                message: "custom profile requires a maximum radius".into(),
            })?;
            if !(r > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "max_radius",
                    message: format!("must be positive, got {r}"),
                });
            }
            (rho, rho_prime, r)
        }
    };
    let pole_smooth = validate_profile(&rho, &rho_prime, max_radius)?;
    Ok(WarpProfile {
        kind,
        dim: n,
        rho,
        rho_prime,
        max_radius,
        pole_smooth,
    })
}

fn validate_profile(rho: &RealFn, rho_prime: &RealFn, max_radius: f64) -> Result<bool> {
    let at_zero = rho(0.0);
    if at_zero.abs() > 1e-12 {
        return Err(Error::ProfileValidation(format!(
            "rho(0) must vanish, got {at_zero}"
        )));
    }
    let r_eff = if max_radius.is_finite() {
        max_radius - 1e-6
    } else {
        16.0
    };
    let mut samples: Vec<f64> = Vec::new();
    // Log-spaced points near the pole, then a uniform sweep.
    for k in 0..13 {
        samples.push(1e-8 * 10f64.powf(k as f64 * 0.5));
    }
    for k in 1..=64 {
        samples.push(r_eff * k as f64 / 64.0);
    }
    for &t in &samples {
        let v = rho(t);
        if !(v > 0.0) {
            return Err(Error::ProfileValidation(format!(
                "rho({t}) = {v} is not positive"
            )));
        }
        if t >= 1e-3 {
            let h = 1e-6 * t.max(1.0);
            let fd = (rho(t + h) - rho(t - h)) / (2.0 * h);
            let dv = rho_prime(t);
            if (fd - dv).abs() > 1e-6 * fd.abs().max(1.0) {
                return Err(Error::ProfileValidation(format!(
                    "rho' mismatch at t = {t}: finite difference {fd} vs supplied {dv}"
                )));
            }
        }
    }
    let slope = rho(1e-6) / 1e-6;
    Ok((slope - 1.0).abs() <= 1e-4)
}

/// eta(t) = (n-1) rho'(t)/rho(t), the Laplacian of the distance function.
pub fn eta(profile: &WarpProfile, t: f64) -> Result<f64> {
    if !(t > 0.0) || t >= profile.max_radius {
        return Err(Error::InvalidParameter {
            name: "t",
            message: format!(
                "t must lie in (0, {}), got {t}",
                profile.max_radius
            ),
        });
    }
    Ok((profile.dim - 1) as f64 * profile.rho_prime(t) / profile.rho(t))
}

/// Surface area of the unit (n-1)-sphere, omega_{n-1} = 2 pi^(n/2) / Gamma(n/2).
pub fn unit_sphere_area(n: u32) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / gamma_half_integer(n)
}

/// Gamma(m/2) for integer m >= 1, by the recurrence from Gamma(1/2) and Gamma(1).
fn gamma_half_integer(m: u32) -> f64 {
    if m % 2 == 0 {
        // Gamma(k) = (k-1)!
        let k = m / 2;
        (1..k).fold(1.0, |acc, j| acc * j as f64)
    } else {
        // Gamma(k + 1/2) = sqrt(pi) * prod_{j=1..k} (j - 1/2)
        let k = (m - 1) / 2;
        (1..=k).fold(PI.sqrt(), |acc, j| acc * (j as f64 - 0.5))
    }
}

const ANCHOR_STEP: f64 = 1.0 / 256.0;
const ANCHOR_QUAD_TOL: f64 = 1e-14;

/// Geodesic-ball scalars S, A, Phi and eta for one profile and exponent p.
///
/// Ball volumes are memoized on an anchor grid (extended on demand, guarded
/// by a mutex); a query integrates the short tail from the nearest anchor
/// below, and very small radii fall back to direct quadrature.
pub struct BallQuantities {
    profile: Arc<WarpProfile>,
    pub p: f64,
    omega: f64,
    quad: QuadratureSpec,
    cache: Mutex<Vec<f64>>,
}

impl BallQuantities {
    pub fn profile(&self) -> &Arc<WarpProfile> {
        &self.profile
    }

    /// S(t) = omega_{n-1} rho(t)^{n-1}.
    pub fn sphere_area(&self, t: f64) -> f64 {
        self.omega * self.profile.rho(t).powi(self.profile.dim as i32 - 1)
    }

    /// A(t) = int_0^t S.
    pub fn ball_volume(&self, t: f64) -> Result<f64> {
        if t < 0.0 || t > self.profile.usable_max_radius() {
            return Err(Error::InvalidParameter {
                name: "t",
                message: format!(
                    "radius {t} outside usable range (0, {})",
                    self.profile.usable_max_radius()
                ),
            });
        }
        if t == 0.0 {
            return Ok(0.0);
        }
        let s = |x: f64| self.sphere_area(x);
        if t < 4.0 * ANCHOR_STEP {
            return Ok(integrate(&s, 0.0, t, &self.quad)?.value);
        }
        let k = (t / ANCHOR_STEP).floor() as usize;
        let a_lo = self.anchors(k)?;
        let t_lo = k as f64 * ANCHOR_STEP;
        let cell_spec = QuadratureSpec {
            abs_tolerance: ANCHOR_QUAD_TOL,
            max_subdivisions: self.quad.max_subdivisions,
        };
        Ok(a_lo + integrate(&s, t_lo, t, &cell_spec)?.value)
    }

    fn anchors(&self, k: usize) -> Result<f64> {
        let mut cache = self.cache.lock().expect("cache poisoned");
        let cell_spec = QuadratureSpec {
            abs_tolerance: ANCHOR_QUAD_TOL,
            max_subdivisions: self.quad.max_subdivisions,
        };
        while cache.len() < k + 1 {
            let m = cache.len() - 1;
            let lo = m as f64 * ANCHOR_STEP;
            let hi = lo + ANCHOR_STEP;
            let inc = integrate(&|x: f64| self.sphere_area(x), lo, hi, &cell_spec)?.value;
            let prev = *cache.last().unwrap();
            cache.push(prev + inc);
        }
        Ok(cache[k])
    }

    /// Phi(t) = (A(t)/S(t))^(1/(p-1)); the analytic limit (t/n)^(1/(p-1))
    /// is used below t = 1e-8 to avoid 0/0.
    pub fn phi(&self, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::InvalidParameter {
                name: "t",
                message: format!("radius must be nonnegative, got {t}"),
            });
        }
        let inv = 1.0 / (self.p - 1.0);
        if t < 1e-8 {
            return Ok((t / self.profile.dim as f64).powf(inv));
        }
        let a = self.ball_volume(t)?;
        Ok((a / self.sphere_area(t)).powf(inv))
    }

    pub fn eta_at(&self, t: f64) -> Result<f64> {
        eta(&self.profile, t)
    }
}

/// Builds the derived ball quantities; rejects p <= 1.
pub fn ball_quantities(
    profile: Arc<WarpProfile>,
    p: f64,
    quad: &QuadratureSpec,
) -> Result<BallQuantities> {
    if !(p > 1.0) {
        return Err(Error::InvalidParameter {
            name: "p",
            message: format!("exponent must exceed 1, got {p}"),
        });
    }
    quad.validate()?;
    Ok(BallQuantities {
        omega: unit_sphere_area(profile.dim),
        profile,
        p,
        quad: quad.clone(),
        cache: Mutex::new(vec![0.0]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn preset(kind: ProfileKind, n: u32) -> Arc<WarpProfile> {
        Arc::new(WarpProfile::preset(kind, n).unwrap())
    }

    #[test]
    fn preset_examples() {
        let e = preset(ProfileKind::Euclidean, 2);
        assert_abs_diff_eq!(e.rho(1.0), 1.0);
        let s = preset(ProfileKind::Spherical, 2);
        assert_abs_diff_eq!(s.max_radius, PI);
        assert_abs_diff_eq!(s.rho(PI / 2.0), 1.0);
        let h = preset(ProfileKind::Hyperbolic, 2);
        assert_abs_diff_eq!(h.rho(1.0), 1f64.sinh(), epsilon = 1e-15);
    }

    #[test]
    fn rejects_low_dimension() {
        assert!(WarpProfile::preset(ProfileKind::Euclidean, 1).is_err());
    }

    #[test]
    fn rejects_bad_custom_profiles() {
        // rho(0) != 0
        let r = make_profile(
            ProfileKind::Custom,
            2,
            Some(Arc::new(|t: f64| t + 1.0)),
            Some(Arc::new(|_| 1.0)),
            Some(1.0),
        );
        assert!(r.is_err());
        // rho dips negative
        let r = make_profile(
            ProfileKind::Custom,
            2,
            Some(Arc::new(|t: f64| t * (0.5 - t))),
            Some(Arc::new(|t: f64| 0.5 - 2.0 * t)),
            Some(1.0),
        );
        assert!(r.is_err());
        // wrong derivative
        let r = make_profile(
            ProfileKind::Custom,
            2,
            Some(Arc::new(|t: f64| t)),
            Some(Arc::new(|_| 2.0)),
            Some(1.0),
        );
        assert!(r.is_err());
        // missing pieces
        assert!(make_profile(ProfileKind::Custom, 2, None, None, None).is_err());
    }

    #[test]
    fn eta_examples() {
        let e2 = preset(ProfileKind::Euclidean, 2);
        assert_abs_diff_eq!(eta(&e2, 2.0).unwrap(), 0.5, epsilon = 1e-15);
        let e3 = preset(ProfileKind::Euclidean, 3);
        assert_abs_diff_eq!(eta(&e3, 1.0).unwrap(), 2.0, epsilon = 1e-15);
        let h2 = preset(ProfileKind::Hyperbolic, 2);
        let coth5 = 5f64.cosh() / 5f64.sinh();
        assert_abs_diff_eq!(eta(&h2, 5.0).unwrap(), coth5, epsilon = 1e-15);
    }

    #[test]
    fn eta_rejects_out_of_range() {
        let s = preset(ProfileKind::Spherical, 2);
        assert!(eta(&s, 0.0).is_err());
        assert!(eta(&s, -0.5).is_err());
        assert!(eta(&s, PI).is_err());
    }

    #[test]
    fn sphere_area_constants() {
        assert_abs_diff_eq!(unit_sphere_area(2), 2.0 * PI, epsilon = 1e-14);
        assert_abs_diff_eq!(unit_sphere_area(3), 4.0 * PI, epsilon = 1e-13);
        assert_abs_diff_eq!(unit_sphere_area(4), 2.0 * PI * PI, epsilon = 1e-13);
    }

    #[test]
    fn phi_examples() {
        let quad = QuadratureSpec::default();
        let e = ball_quantities(preset(ProfileKind::Euclidean, 2), 2.0, &quad).unwrap();
        assert_abs_diff_eq!(e.phi(1.0).unwrap(), 0.5, epsilon = 1e-11);
        let h = ball_quantities(preset(ProfileKind::Hyperbolic, 2), 2.0, &quad).unwrap();
        assert_abs_diff_eq!(h.phi(1.0).unwrap(), 0.5f64.tanh(), epsilon = 1e-11);
        let s = ball_quantities(preset(ProfileKind::Spherical, 2), 2.0, &quad).unwrap();
        assert_abs_diff_eq!(s.phi(PI / 2.0).unwrap(), 1.0, epsilon = 1e-10);
        let e3 = ball_quantities(preset(ProfileKind::Euclidean, 2), 3.0, &quad).unwrap();
        assert_abs_diff_eq!(e3.phi(1.0).unwrap(), 0.5f64.sqrt(), epsilon = 1e-11);
    }

    #[test]
    fn phi_rejects_bad_p() {
        let quad = QuadratureSpec::default();
        assert!(ball_quantities(preset(ProfileKind::Euclidean, 2), 1.0, &quad).is_err());
        assert!(ball_quantities(preset(ProfileKind::Euclidean, 2), 0.5, &quad).is_err());
    }

    #[test]
    fn volume_closed_forms() {
        let quad = QuadratureSpec::default();
        for n in [2u32, 3, 4] {
            let bq = ball_quantities(preset(ProfileKind::Euclidean, n), 2.0, &quad).unwrap();
            for &t in &[0.05f64, 0.3, 1.0, 2.7] {
                let exact = unit_sphere_area(n) * t.powi(n as i32) / n as f64;
                let got = bq.ball_volume(t).unwrap();
                assert!(((got - exact) / exact).abs() < 1e-9, "n={n} t={t}: {got} vs {exact}");
            }
        }
        let bq = ball_quantities(preset(ProfileKind::Hyperbolic, 2), 2.0, &quad).unwrap();
        for &t in &[0.1f64, 0.9, 2.2, 3.0] {
            let exact = 2.0 * PI * (t.cosh() - 1.0);
            assert!(((bq.ball_volume(t).unwrap() - exact) / exact).abs() < 1e-9);
        }
        let bq = ball_quantities(preset(ProfileKind::Spherical, 2), 2.0, &quad).unwrap();
        for &t in &[0.2f64, 1.5, 2.8] {
            let exact = 2.0 * PI * (1.0 - t.cos());
            assert!(((bq.ball_volume(t).unwrap() - exact) / exact).abs() < 1e-9);
        }
    }

    #[test]
    fn scaled_custom_profiles_validate() {
        let p = WarpProfile::from_name("sinh-scaled", 3, Some(2.0)).unwrap();
        assert!(p.pole_smooth);
        let p = WarpProfile::from_name("sin-scaled", 2, Some(0.5)).unwrap();
        assert_abs_diff_eq!(p.max_radius, 2.0 * PI, epsilon = 1e-14);
        assert!(WarpProfile::from_name("banana", 2, None).is_err());
        assert!(WarpProfile::from_name("sinh-scaled", 2, None).is_err());
    }
}
