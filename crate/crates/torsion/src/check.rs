//! Rigidity classification for overdetermined boundary data dnu_u = f(d).
//!
//! Given f, the ball quantities Phi of the ambient metric, and a star-shaped
//! domain, decides whether the data forces the domain to be a geodesic ball:
//! either f/Phi is nondecreasing (case i) or f/Phi crosses 1 exactly once
//! from below at some radius R (case ii), cross-checked against the
//! tangency-radius bounds 1 <= f(r0)/Phi(r0) and f(r1)/Phi(r1) <= 1.

use crate::error::{Error, Result};
use crate::fem::StarDomain;
use crate::interp::CubicSpline;
use crate::warp::{BallQuantities, ProfileKind, RealFn};
use std::sync::Arc;

/// Whitelisted multiplier shapes for f = Phi * g.
#[derive(Debug, Clone)]
pub enum GForm {
    /// g(t) = c
    Const(f64),
    /// g(t) = a t
    Linear(f64),
    /// g(t) = exp(a t)
    Exp(f64),
    /// g(t) = scale * t^exponent
    Power { scale: f64, exponent: f64 },
}

impl GForm {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            GForm::Const(c) => *c,
            GForm::Linear(a) => a * t,
            GForm::Exp(a) => (a * t).exp(),
            GForm::Power { scale, exponent } => scale * t.powf(*exponent),
        }
    }

    pub fn parse(name: &str, a: f64, b: Option<f64>) -> Result<Self> {
        match name {
            "const" => Ok(GForm::Const(a)),
            "linear" => Ok(GForm::Linear(a)),
            "exp" => Ok(GForm::Exp(a)),
            "power" => Ok(GForm::Power {
                scale: a,
                exponent: b.unwrap_or(1.0),
            }),
            other => Err(Error::InvalidParameter {
                name: "f_form",
                message: format!("unknown multiplier form `{other}`"),
            }),
        }
    }
}

/// The prescribed Neumann profile f.
pub enum FFunction {
    /// f = Phi * g with a whitelisted g.
    PhiMultiple(GForm),
    /// Monotone-cubic interpolation of a sampled (d, f) table.
    Table(CubicSpline),
    /// Arbitrary closed form supplied in code.
    Custom(RealFn),
}

/// f together with the ambient ball quantities and the evaluation interval.
pub struct OverdeterminedData {
    pub f: FFunction,
    pub quantities: Arc<BallQuantities>,
    pub t_min: f64,
    pub t_max: f64,
}

impl OverdeterminedData {
    pub fn new(
        f: FFunction,
        quantities: Arc<BallQuantities>,
        t_min: f64,
        t_max: f64,
    ) -> Result<Self> {
        if !(t_min > 0.0 && t_min < t_max) {
            return Err(Error::InvalidParameter {
                name: "interval",
                message: format!("need 0 < t_min < t_max, got [{t_min}, {t_max}]"),
            });
        }
        if t_max > quantities.profile().usable_max_radius() {
            return Err(Error::InvalidParameter {
                name: "t_max",
                message: format!(
                    "exceeds the profile validity radius {}",
                    quantities.profile().usable_max_radius()
                ),
            });
        }
        let data = Self {
            f,
            quantities,
            t_min,
            t_max,
        };
        // f must be positive on the interval.
        for k in 0..=256 {
            let t = t_min + (t_max - t_min) * k as f64 / 256.0;
            let v = data.f_at(t)?;
            if !(v > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "f",
                    message: format!("f({t}) = {v} is not positive"),
                });
            }
        }
        Ok(data)
    }

    pub fn f_at(&self, t: f64) -> Result<f64> {
        match &self.f {
            FFunction::PhiMultiple(g) => Ok(self.quantities.phi(t)? * g.eval(t)),
            FFunction::Table(spline) => Ok(spline.eval(t)),
            FFunction::Custom(func) => Ok(func(t)),
        }
    }

    /// f(t)/Phi(t); Phi's analytic limit form covers t below 1e-8.
    pub fn ratio(&self, t: f64) -> Result<f64> {
        Ok(self.f_at(t)? / self.quantities.phi(t)?)
    }
}

/// Radii of the largest inscribed and smallest circumscribed geodesic balls.
#[derive(Debug, Clone, Copy)]
pub struct TangencyRadii {
    pub r0: f64,
    pub r1: f64,
}

pub fn tangency_radii(domain: &StarDomain) -> TangencyRadii {
    let (r0, r1) = domain.extrema();
    TangencyRadii { r0, r1 }
}

/// F(t) = n f(t)/t, the Euclidean p = 2 specialization of f/Phi.
pub fn euclidean_big_f(f: &dyn Fn(f64) -> f64, n: u32, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter {
            name: "t",
            message: format!("t must be positive, got {t}"),
        });
    }
    Ok(n as f64 * f(t) / t)
}

const RATIO_GRID: usize = 1024;

fn sample_ratio(data: &OverdeterminedData, lo: f64, hi: f64, n: usize) -> Result<Vec<(f64, f64)>> {
    (0..n)
        .map(|k| {
            let t = lo + (hi - lo) * k as f64 / (n - 1) as f64;
            Ok((t, data.ratio(t)?))
        })
        .collect()
}

/// Monotone-nondecreasing test for f/Phi on the interval (condition (i)).
/// Returns the outcome and the most negative normalized forward difference.
pub fn check_case_i(
    data: &OverdeterminedData,
    interval: (f64, f64),
    tol: f64,
) -> Result<(bool, f64)> {
    let samples = sample_ratio(data, interval.0, interval.1, RATIO_GRID)?;
    let values: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let max = values.iter().cloned().fold(f64::MIN, f64::max);
    let min = values.iter().cloned().fold(f64::MAX, f64::min);
    let scale = max - min + 1e-30;
    let mut margin = 0.0f64;
    for w in values.windows(2) {
        margin = margin.min((w[1] - w[0]) / scale);
    }
    Ok((margin >= -tol, margin))
}

/// Outcome of the single-crossing test (condition (ii)).
#[derive(Debug, Clone, Copy)]
pub struct CaseTwo {
    /// Crossing radius when the strict sign pattern holds.
    pub root: Option<f64>,
    pub crossings: usize,
}

const ROOT_TOL: f64 = 1e-10;

/// Looks for the strict pattern f/Phi < 1 below R, > 1 above R, with exactly
/// one upcrossing; R located by bisection. A tangential touch (no sign
/// change) yields no root.
pub fn check_case_ii(data: &OverdeterminedData, interval: (f64, f64)) -> Result<CaseTwo> {
    let samples = sample_ratio(data, interval.0, interval.1, RATIO_GRID)?;
    let mut crossings = 0usize;
    let mut bracket: Option<(f64, f64)> = None;
    let mut upward = false;
    for w in samples.windows(2) {
        let (a, fa) = (w[0].0, w[0].1 - 1.0);
        let (b, fb) = (w[1].0, w[1].1 - 1.0);
        if fa * fb < 0.0 {
            crossings += 1;
            bracket = Some((a, b));
            upward = fa < 0.0;
        }
    }
    if crossings != 1 || !upward {
        return Ok(CaseTwo {
            root: None,
            crossings,
        });
    }
    let (mut lo, mut hi) = bracket.unwrap();
    let mut flo = data.ratio(lo)? - 1.0;
    while hi - lo > ROOT_TOL {
        let mid = 0.5 * (lo + hi);
        let fmid = data.ratio(mid)? - 1.0;
        if flo * fmid <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fmid;
        }
    }
    Ok(CaseTwo {
        root: Some(0.5 * (lo + hi)),
        crossings: 1,
    })
}

const TIE_TOL: f64 = 1e-9;

/// Necessary bounds from the comparison principle:
/// (f(r0)/Phi(r0) >= 1, f(r1)/Phi(r1) <= 1), each up to a tie tolerance.
pub fn comparison_bounds(data: &OverdeterminedData, radii: &TangencyRadii) -> Result<(bool, bool)> {
    let at_r0 = data.ratio(radii.r0)?;
    let at_r1 = data.ratio(radii.r1)?;
    Ok((at_r0 >= 1.0 - TIE_TOL, at_r1 <= 1.0 + TIE_TOL))
}

/// Rigidity verdict.
#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    /// Condition (i) holds and the bounds force f/Phi = 1 on [r0, r1].
    BallForcedCaseI,
    /// Condition (ii) holds with the given crossing radius.
    BallOfRadius(f64),
    /// Neither condition applies; no conclusion about the domain.
    NotApplicable(String),
    /// A condition holds but the tangency bounds are violated.
    Inconsistent(String),
}

/// Verdict plus the diagnostics used to reach it.
#[derive(Debug, Clone)]
pub struct VerdictReport {
    pub verdict: Verdict,
    pub r0: f64,
    pub r1: f64,
    pub ratio_at_r0: f64,
    pub ratio_at_r1: f64,
    pub case_i_margin: f64,
    pub crossings: usize,
}

impl VerdictReport {
    /// Flat structured-text serialization with fixed keys.
    pub fn to_report_string(&self) -> String {
        let mut out = String::new();
        out.push_str("# overdetermined classification report\n");
        out.push_str("# note: the condition (ii) upper-bound threshold is read as f/Phi > 1\n");
        let (tag, radius, reason) = match &self.verdict {
            Verdict::BallForcedCaseI => ("ball_case_i", None, None),
            Verdict::BallOfRadius(r) => ("ball_of_radius", Some(*r), None),
            Verdict::NotApplicable(why) => ("not_applicable", None, Some(why.clone())),
            Verdict::Inconsistent(why) => ("inconsistent", None, Some(why.clone())),
        };
        out.push_str(&format!("verdict = {tag}\n"));
        if let Some(r) = radius {
            out.push_str(&format!("R = {r}\n"));
        }
        out.push_str(&format!("r0 = {}\n", self.r0));
        out.push_str(&format!("r1 = {}\n", self.r1));
        out.push_str(&format!("ratio_at_r0 = {}\n", self.ratio_at_r0));
        out.push_str(&format!("ratio_at_r1 = {}\n", self.ratio_at_r1));
        out.push_str(&format!("case_i_margin = {}\n", self.case_i_margin));
        out.push_str(&format!("crossings = {}\n", self.crossings));
        if let Some(why) = reason {
            out.push_str(&format!("reason = {why}\n"));
        }
        out
    }
}

const CASE_I_TOL: f64 = 1e-9;

/// Full decision logic over a star-shaped domain.
pub fn classify(data: &OverdeterminedData, domain: &StarDomain) -> Result<VerdictReport> {
    let radii = tangency_radii(domain);
    let profile = data.quantities.profile();
    if profile.kind == ProfileKind::Spherical
        && radii.r1 >= std::f64::consts::FRAC_PI_2 + 1e-6
    {
        return Err(Error::InvalidParameter {
            name: "domain",
            message: format!(
                "spherical domains with circumscribed radius {} past pi/2 are refused",
                radii.r1
            ),
        });
    }
    let lo = data.t_min.max(1e-4 * radii.r1);
    let hi_i = radii.r1.min(data.t_max);
    let hi_ii = (2.0 * radii.r1)
        .min(data.t_max)
        .min(profile.usable_max_radius());
    let ratio_at_r0 = data.ratio(radii.r0)?;
    let ratio_at_r1 = data.ratio(radii.r1)?;
    let bounds = comparison_bounds(data, &radii)?;
    let case_two = check_case_ii(data, (lo, hi_ii))?;
    let (case_one_ok, margin) = check_case_i(data, (lo, hi_i), CASE_I_TOL)?;

    let radius_tol = 1e-6 * radii.r1 + 1e-8;
    let verdict = if let Some(root) = case_two.root {
        if bounds.0 && bounds.1 && radii.r1 <= root + radius_tol && root <= radii.r0 + radius_tol {
            Verdict::BallOfRadius(root)
        } else {
            Verdict::Inconsistent(format!(
                "single crossing at R = {root} contradicts tangency radii [{}, {}]",
                radii.r0, radii.r1
            ))
        }
    } else if case_one_ok {
        if bounds.0 && bounds.1 {
            Verdict::BallForcedCaseI
        } else {
            Verdict::Inconsistent(format!(
                "f/Phi nondecreasing but tangency bounds fail: ratio(r0) = {ratio_at_r0}, \
                 ratio(r1) = {ratio_at_r1}"
            ))
        }
    } else {
        Verdict::NotApplicable(
            "f/Phi is neither nondecreasing nor a single upcrossing of 1".into(),
        )
    };
    Ok(VerdictReport {
        verdict,
        r0: radii.r0,
        r1: radii.r1,
        ratio_at_r0,
        ratio_at_r1,
        case_i_margin: margin,
        crossings: case_two.crossings,
    })
}

/// Result of testing whether boundary samples are a function of d.
#[derive(Debug, Clone)]
pub enum ExtractOutcome {
    /// Bin-mean table (d, f(d)).
    Table { ds: Vec<f64>, values: Vec<f64> },
    /// Some bin's normalized spread exceeded the tolerance.
    Spread { max_spread: f64 },
}

/// Bins (d, dnu_u) samples by d and accepts the bin means as a sampled f
/// when every bin's normalized spread stays below `spread_tol`.
pub fn extract_f_of_d(
    samples: &[(f64, f64)],
    n_bins: usize,
    spread_tol: f64,
) -> Result<ExtractOutcome> {
    if samples.len() < 16 {
        return Err(Error::InvalidParameter {
            name: "samples",
            message: format!("need at least 16 samples, got {}", samples.len()),
        });
    }
    if n_bins == 0 {
        return Err(Error::InvalidParameter {
            name: "n_bins",
            message: "need at least one bin".into(),
        });
    }
    let d_min = samples.iter().map(|s| s.0).fold(f64::MAX, f64::min);
    let d_max = samples.iter().map(|s| s.0).fold(f64::MIN, f64::max);
    let degenerate = d_max - d_min < 1e-12;
    let bins = if degenerate { 1 } else { n_bins };
    let width = if degenerate {
        1.0
    } else {
        (d_max - d_min) / bins as f64
    };
    let mut grouped: Vec<Vec<(f64, f64)>> = vec![Vec::new(); bins];
    for &(d, v) in samples {
        let k = (((d - d_min) / width) as usize).min(bins - 1);
        grouped[k].push((d, v));
    }
    let mut ds = Vec::new();
    let mut values = Vec::new();
    let mut max_spread = 0.0f64;
    for bin in grouped.iter().filter(|b| !b.is_empty()) {
        let mean_d = bin.iter().map(|s| s.0).sum::<f64>() / bin.len() as f64;
        let mean_v = bin.iter().map(|s| s.1).sum::<f64>() / bin.len() as f64;
        let hi = bin.iter().map(|s| s.1).fold(f64::MIN, f64::max);
        let lo = bin.iter().map(|s| s.1).fold(f64::MAX, f64::min);
        max_spread = max_spread.max((hi - lo) / (mean_v.abs() + 1e-30));
        ds.push(mean_d);
        values.push(mean_v);
    }
    if max_spread < spread_tol {
        Ok(ExtractOutcome::Table { ds, values })
    } else {
        Ok(ExtractOutcome::Spread { max_spread })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::QuadratureSpec;
    use crate::warp::{ball_quantities, WarpProfile};
    use approx::assert_abs_diff_eq;

    fn euclid_bq(p: f64) -> Arc<BallQuantities> {
        let prof = Arc::new(WarpProfile::preset(ProfileKind::Euclidean, 2).unwrap());
        Arc::new(ball_quantities(prof, p, &QuadratureSpec::default()).unwrap())
    }

    fn data_with_g(g: GForm) -> OverdeterminedData {
        OverdeterminedData::new(FFunction::PhiMultiple(g), euclid_bq(2.0), 1e-4, 2.0).unwrap()
    }

    #[test]
    fn ratio_examples() {
        // f(t) = t/2 equals Phi for the Euclidean p=2 plane
        let bq = euclid_bq(2.0);
        let data = OverdeterminedData::new(
            FFunction::Custom(Arc::new(|t: f64| t / 2.0)),
            bq,
            1e-4,
            2.0,
        )
        .unwrap();
        for &t in &[0.1, 0.5, 1.0, 1.9] {
            assert_abs_diff_eq!(data.ratio(t).unwrap(), 1.0, epsilon = 1e-10);
        }
        // f(t) = t^2/2 gives ratio t
        let data = OverdeterminedData::new(
            FFunction::Custom(Arc::new(|t: f64| t * t / 2.0)),
            euclid_bq(2.0),
            1e-4,
            2.0,
        )
        .unwrap();
        assert_abs_diff_eq!(data.ratio(0.5).unwrap(), 0.5, epsilon = 1e-10);
    }

    #[test]
    fn euclidean_big_f_examples() {
        let f = |t: f64| t / 2.0;
        assert_abs_diff_eq!(euclidean_big_f(&f, 2, 0.7).unwrap(), 1.0, epsilon = 1e-14);
        let g = |_t: f64| 1.0;
        assert_abs_diff_eq!(euclidean_big_f(&g, 2, 4.0).unwrap(), 0.5, epsilon = 1e-14);
        assert!(euclidean_big_f(&f, 2, 0.0).is_err());
        assert!(euclidean_big_f(&f, 2, -1.0).is_err());
    }

    #[test]
    fn euclidean_identity_with_ratio() {
        let data = data_with_g(GForm::Exp(0.3));
        let f_closure = {
            let bq = data.quantities.clone();
            move |t: f64| bq.phi(t).unwrap() * (0.3 * t).exp()
        };
        for k in 1..=16 {
            let t = 0.11 * k as f64;
            let lhs = euclidean_big_f(&f_closure, 2, t).unwrap();
            let rhs = data.ratio(t).unwrap();
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-10);
        }
    }

    #[test]
    fn case_i_examples() {
        let constant = data_with_g(GForm::Const(1.0));
        let (ok, margin) = check_case_i(&constant, (0.1, 1.5), 1e-9).unwrap();
        assert!(ok);
        assert_abs_diff_eq!(margin, 0.0, epsilon = 1e-6);
        let rising = data_with_g(GForm::Linear(1.0));
        assert!(check_case_i(&rising, (0.1, 1.5), 1e-9).unwrap().0);
        let falling = data_with_g(GForm::Exp(-1.0));
        assert!(!check_case_i(&falling, (0.1, 1.5), 1e-9).unwrap().0);
    }

    #[test]
    fn case_ii_examples() {
        let rising = data_with_g(GForm::Linear(1.0)); // ratio = t
        let out = check_case_ii(&rising, (0.1, 2.0)).unwrap();
        assert_abs_diff_eq!(out.root.unwrap(), 1.0, epsilon = 1e-9);
        let falling = data_with_g(GForm::Exp(-1.0));
        assert!(check_case_ii(&falling, (0.1, 2.0)).unwrap().root.is_none());
        // downward crossing: ratio = 2 - t
        let bq = euclid_bq(2.0);
        let downward = OverdeterminedData::new(
            FFunction::Custom({
                let bq = bq.clone();
                Arc::new(move |t: f64| bq.phi(t).unwrap() * (2.0 - t))
            }),
            bq,
            0.5,
            1.5,
        )
        .unwrap();
        assert!(check_case_ii(&downward, (0.5, 1.5)).unwrap().root.is_none());
        // constant ratio 1: no strict sign pattern
        let constant = data_with_g(GForm::Const(1.0));
        let out = check_case_ii(&constant, (0.1, 2.0)).unwrap();
        assert!(out.root.is_none());
        assert!(check_case_i(&constant, (0.1, 2.0), 1e-9).unwrap().0);
    }

    #[test]
    fn comparison_bounds_examples() {
        let constant = data_with_g(GForm::Const(1.0));
        let radii = TangencyRadii { r0: 0.6, r1: 1.4 };
        assert_eq!(comparison_bounds(&constant, &radii).unwrap(), (true, true));
        let rising = data_with_g(GForm::Linear(1.0));
        let radii = TangencyRadii { r0: 0.5, r1: 1.5 };
        assert_eq!(comparison_bounds(&rising, &radii).unwrap(), (false, false));
        let radii = TangencyRadii { r0: 1.0, r1: 1.0 };
        assert_eq!(comparison_bounds(&rising, &radii).unwrap(), (true, true));
    }

    #[test]
    fn classify_truth_table() {
        let ball = StarDomain::ball(1.0).unwrap();
        let wobble = StarDomain::new(1.0, vec![0.0, 0.3], vec![]).unwrap();

        let report = classify(&data_with_g(GForm::Const(1.0)), &ball).unwrap();
        assert_eq!(report.verdict, Verdict::BallForcedCaseI);

        let report = classify(&data_with_g(GForm::Linear(1.0)), &ball).unwrap();
        match report.verdict {
            Verdict::BallOfRadius(r) => assert_abs_diff_eq!(r, 1.0, epsilon = 1e-8),
            other => panic!("expected ball of radius 1, got {other:?}"),
        }

        let report = classify(&data_with_g(GForm::Linear(1.0)), &wobble).unwrap();
        assert!(matches!(report.verdict, Verdict::Inconsistent(_)));

        let report = classify(&data_with_g(GForm::Exp(-1.0)), &ball).unwrap();
        assert!(matches!(report.verdict, Verdict::NotApplicable(_)));
    }

    #[test]
    fn classify_report_round_trip_keys() {
        let ball = StarDomain::ball(1.0).unwrap();
        let report = classify(&data_with_g(GForm::Linear(1.0)), &ball).unwrap();
        let text = report.to_report_string();
        for key in ["verdict = ", "R = ", "r0 = ", "r1 = ", "ratio_at_r0 = ", "crossings = "] {
            assert!(text.contains(key), "missing `{key}` in {text}");
        }
    }

    #[test]
    fn spherical_refuses_large_domains() {
        let prof = Arc::new(WarpProfile::preset(ProfileKind::Spherical, 2).unwrap());
        let bq = Arc::new(ball_quantities(prof, 2.0, &QuadratureSpec::default()).unwrap());
        let data =
            OverdeterminedData::new(FFunction::PhiMultiple(GForm::Const(1.0)), bq, 1e-4, 2.5)
                .unwrap();
        let big = StarDomain::ball(2.0).unwrap();
        assert!(classify(&data, &big).is_err());
    }

    #[test]
    fn extract_f_examples() {
        // exact functional dependence dnu = d, sampled at 16 distinct
        // distances (4 repeats each) that land in 16 separate bins
        let samples: Vec<(f64, f64)> = (0..64)
            .map(|k| {
                let d = 0.5 + 0.5 * ((k / 4) as f64 / 15.0);
                (d, d)
            })
            .collect();
        match extract_f_of_d(&samples, 16, 0.01).unwrap() {
            ExtractOutcome::Table { ds, values } => {
                for (d, v) in ds.iter().zip(values.iter()) {
                    assert_abs_diff_eq!(d, v, epsilon = 1e-12);
                }
            }
            other => panic!("expected table, got {other:?}"),
        }
        // constant d (ball): single-value table
        let samples: Vec<(f64, f64)> = (0..32).map(|_| (1.0, 0.5)).collect();
        match extract_f_of_d(&samples, 8, 0.01).unwrap() {
            ExtractOutcome::Table { ds, values } => {
                assert_eq!(ds.len(), 1);
                assert_abs_diff_eq!(values[0], 0.5);
            }
            other => panic!("expected single-bin table, got {other:?}"),
        }
        // scattered values at equal d: spread rejection
        let samples: Vec<(f64, f64)> = (0..32)
            .map(|k| (1.0 + (k % 4) as f64 * 1e-15, if k % 2 == 0 { 0.4 } else { 0.6 }))
            .collect();
        assert!(matches!(
            extract_f_of_d(&samples, 8, 0.01).unwrap(),
            ExtractOutcome::Spread { .. }
        ));
        assert!(extract_f_of_d(&samples[..8], 8, 0.01).is_err());
    }
}
