//! p-Dirichlet energy minimization by Kacanov fixed-point iteration.
//!
//! On each P1 triangle the metric gradient norm is
//! |grad u|_g^2 = u_t^2 + u_theta^2 / rho(t)^2 and all integrals use the
//! three-edge-midpoint rule per quadrature cell, which is exact for
//! quadratics; each pole-fan triangle is integrated over its whole sector
//! so the region around the pole is tiled without gaps. The nonlinear
//! weight (eps^2 + |grad u|^2)^((p-2)/2) is frozen from the previous iterate
//! and the resulting SPD linear system solved by preconditioned CG.

use super::mesh::Mesh;
use super::sparse::{conjugate_gradient, CsrMatrix};
use crate::error::{Error, Result};
use crate::warp::WarpProfile;
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub p: f64,
    /// Gradient regularization; keeps the weight finite at critical points.
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Relative energy-decrease threshold for convergence.
    pub energy_tolerance: f64,
    /// Initial damping factor, halved on energy increase.
    pub damping: f64,
}

impl SolverConfig {
    pub fn new(p: f64) -> Self {
        Self {
            p,
            epsilon: 1e-8,
            max_iterations: 200,
            energy_tolerance: 1e-12,
            damping: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0) {
            return Err(Error::InvalidParameter {
                name: "p",
                message: format!("exponent must exceed 1, got {}", self.p),
            });
        }
        if self.epsilon < 0.0 {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                message: format!("regularization must be nonnegative, got {}", self.epsilon),
            });
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "damping",
                message: format!("damping must lie in (0, 1], got {}", self.damping),
            });
        }
        if !(self.energy_tolerance > 0.0) {
            return Err(Error::InvalidParameter {
                name: "energy_tolerance",
                message: "must be positive".into(),
            });
        }
        Ok(())
    }
}

/// Converged (or max-iteration) nodal solution with its iteration history.
#[derive(Debug, Clone)]
pub struct TorsionField {
    pub mesh: Arc<Mesh>,
    pub profile: Arc<WarpProfile>,
    pub p: f64,
    pub epsilon: f64,
    pub values: Vec<f64>,
    /// Energy after each accepted iterate (index 0 is the zero start).
    pub energy_log: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// One boundary-vertex sample of the overdetermined data (d, dnu_u).
#[derive(Debug, Clone, Copy)]
pub struct BoundarySample {
    pub theta: f64,
    pub distance: f64,
    pub normal_derivative: f64,
}

/// One quadrature point for a triangle: the metric weight (cell area / 3
/// times rho), 1/rho^2 at the point, and the triangle's affine shape values
/// there.
struct QuadPoint {
    weight: f64,
    inv_rho_sq: f64,
    shapes: [f64; 3],
}

/// Precomputed per-triangle quantities: P1 shape gradients and the
/// edge-midpoint quadrature over the triangle's quadrature cells. Ring
/// triangles carry three points; pole-fan triangles carry six, covering the
/// whole sector with the fan triangle's affine shape extension.
struct Geometry {
    grads: Vec<[[f64; 2]; 3]>,
    points: Vec<Vec<QuadPoint>>,
}

/// Affine (barycentric) shape values of the triangle with coordinates `c`
/// at an arbitrary point; values outside [0, 1] extrapolate the P1 shapes.
fn affine_shapes(c: &[[f64; 2]; 3], x: f64, y: f64) -> [f64; 3] {
    let det = (c[1][0] - c[0][0]) * (c[2][1] - c[0][1]) - (c[2][0] - c[0][0]) * (c[1][1] - c[0][1]);
    let l1 = ((x - c[0][0]) * (c[2][1] - c[0][1]) - (c[2][0] - c[0][0]) * (y - c[0][1])) / det;
    let l2 = ((c[1][0] - c[0][0]) * (y - c[0][1]) - (x - c[0][0]) * (c[1][1] - c[0][1])) / det;
    [1.0 - l1 - l2, l1, l2]
}

fn precompute_geometry(mesh: &Mesh, profile: &WarpProfile) -> Geometry {
    let nt = mesh.triangles.len();
    let mut grads = Vec::with_capacity(nt);
    let mut points = Vec::with_capacity(nt);
    for k in 0..nt {
        let c = &mesh.tri_coords[k];
        let area = mesh.param_area(k);
        let two_a = 2.0 * area;
        grads.push([
            [(c[1][1] - c[2][1]) / two_a, (c[2][0] - c[1][0]) / two_a],
            [(c[2][1] - c[0][1]) / two_a, (c[0][0] - c[2][0]) / two_a],
            [(c[0][1] - c[1][1]) / two_a, (c[1][0] - c[0][0]) / two_a],
        ]);
        let mut tri_points = Vec::with_capacity(6);
        for cell in mesh.quadrature_cells(k) {
            let cell_area = 0.5
                * ((cell[1][0] - cell[0][0]) * (cell[2][1] - cell[0][1])
                    - (cell[2][0] - cell[0][0]) * (cell[1][1] - cell[0][1]));
            for e in 0..3 {
                let mx = 0.5 * (cell[e][0] + cell[(e + 1) % 3][0]);
                let my = 0.5 * (cell[e][1] + cell[(e + 1) % 3][1]);
                let rho = profile.rho(mx);
                // A midpoint on the pole axis has rho = 0: zero metric
                // weight but a singular 1/rho^2, so it contributes nothing
                // and is dropped rather than evaluated.
                if !(rho > 0.0) {
                    continue;
                }
                tri_points.push(QuadPoint {
                    weight: cell_area / 3.0 * rho,
                    inv_rho_sq: 1.0 / (rho * rho),
                    shapes: affine_shapes(c, mx, my),
                });
            }
        }
        points.push(tri_points);
    }
    Geometry { grads, points }
}

fn triangle_gradient(geom: &Geometry, tri: usize, verts: &[usize; 3], u: &[f64]) -> (f64, f64) {
    let mut ut = 0.0;
    let mut uth = 0.0;
    for k in 0..3 {
        ut += u[verts[k]] * geom.grads[tri][k][0];
        uth += u[verts[k]] * geom.grads[tri][k][1];
    }
    (ut, uth)
}

fn energy(mesh: &Mesh, geom: &Geometry, p: f64, eps: f64, u: &[f64]) -> f64 {
    let mut total = 0.0;
    for (tri, verts) in mesh.triangles.iter().enumerate() {
        let (ut, uth) = triangle_gradient(geom, tri, verts, u);
        for qp in &geom.points[tri] {
            let g2 = ut * ut + uth * uth * qp.inv_rho_sq;
            let um: f64 = (0..3).map(|k| qp.shapes[k] * u[verts[k]]).sum();
            total += qp.weight * ((eps * eps + g2).powf(p / 2.0) / p - um);
        }
    }
    total
}

/// Minimizes the p-Dirichlet torsion energy over nodal values vanishing on
/// the boundary. Non-convergence within the iteration budget is reported via
/// the `converged` flag, with the energy log retained.
pub fn solve_torsion(
    mesh: &Arc<Mesh>,
    profile: &Arc<WarpProfile>,
    config: &SolverConfig,
) -> Result<TorsionField> {
    config.validate()?;
    let geom = precompute_geometry(mesh, profile);
    let n_all = mesh.vertex_count();
    let n_interior = 1 + (mesh.n_r - 1) * mesh.n_theta;
    let p = config.p;
    let eps = config.epsilon;

    let mut u = vec![0.0; n_all];
    let mut log = vec![energy(mesh, &geom, p, eps, &u)];
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..config.max_iterations {
        iterations += 1;
        // Assemble the linear system with weights frozen at the current
        // iterate. The first pass uses unit weights (a plain Poisson solve):
        // at u = 0 the regularized weight degenerates to eps^(p-2).
        let first = iterations == 1;
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        let mut rhs = vec![0.0; n_interior];
        for (tri, verts) in mesh.triangles.iter().enumerate() {
            let (ut, uth) = triangle_gradient(&geom, tri, verts, &u);
            for qp in &geom.points[tri] {
                let g2 = ut * ut + uth * uth * qp.inv_rho_sq;
                let w = if first {
                    1.0
                } else {
                    (eps * eps + g2).powf((p - 2.0) / 2.0)
                };
                let qw = qp.weight;
                for a in 0..3 {
                    let va = verts[a];
                    if va >= n_interior {
                        continue;
                    }
                    rhs[va] += qw * qp.shapes[a];
                    for b in 0..3 {
                        let vb = verts[b];
                        if vb >= n_interior {
                            continue;
                        }
                        let k = qw
                            * w
                            * (geom.grads[tri][a][0] * geom.grads[tri][b][0]
                                + geom.grads[tri][a][1]
                                    * geom.grads[tri][b][1]
                                    * qp.inv_rho_sq);
                        triplets.push((va, vb, k));
                    }
                }
            }
        }
        let matrix = CsrMatrix::from_triplets(n_interior, &mut triplets);
        let (solved, _) = conjugate_gradient(
            &matrix,
            &rhs,
            &u[..n_interior],
            1e-12,
            20 * n_interior + 200,
        )?;

        // Damped update with backtracking on energy increase.
        let prev_energy = *log.last().unwrap();
        let mut alpha = config.damping;
        let mut trial = u.clone();
        let mut accepted = false;
        let mut last_trial_energy = f64::INFINITY;
        while alpha >= 1e-4 {
            for i in 0..n_interior {
                trial[i] = u[i] + alpha * (solved[i] - u[i]);
            }
            let e = energy(mesh, &geom, p, eps, &trial);
            if e <= prev_energy {
                u = trial;
                log.push(e);
                accepted = true;
                break;
            }
            last_trial_energy = e;
            alpha *= 0.5;
            // trial is overwritten on the next pass
        }
        if !accepted {
            // No descent left at the smallest damping; if the update is
            // already below the energy tolerance this is stagnation at the
            // minimizer, otherwise a genuine failure.
            if (last_trial_energy - prev_energy).abs()
                <= config.energy_tolerance * prev_energy.abs().max(1e-300)
            {
                converged = true;
            }
            break;
        }
        let e_new = *log.last().unwrap();
        if (prev_energy - e_new).abs() <= config.energy_tolerance * prev_energy.abs().max(1e-300) {
            converged = true;
            break;
        }
    }

    Ok(TorsionField {
        mesh: mesh.clone(),
        profile: profile.clone(),
        p,
        epsilon: eps,
        values: u,
        energy_log: log,
        converged,
        iterations,
    })
}

/// Per-boundary-vertex (d, dnu_u) with the gradient recovered by
/// metric-area-weighted averaging of adjacent triangle gradients and the
/// inward unit normal obtained from the boundary tangent (b'(theta), 1) by
/// g-orthogonalization. Emits a warning on nonpositive values.
pub fn boundary_normal_samples(field: &TorsionField) -> Result<Vec<BoundarySample>> {
    if !field.converged {
        return Err(Error::SolverNotConverged {
            iterations: field.iterations,
            last_energy: *field.energy_log.last().unwrap(),
        });
    }
    let mesh = &field.mesh;
    let geom = precompute_geometry(mesh, &field.profile);
    let mut out = Vec::with_capacity(mesh.boundary.len());
    let mut nonpositive = 0usize;
    for bv in &mesh.boundary {
        let mut wsum = 0.0;
        let mut ut_acc = 0.0;
        let mut uth_acc = 0.0;
        for &tri in &mesh.vertex_tris[bv.vertex] {
            let verts = &mesh.triangles[tri];
            let (ut, uth) = triangle_gradient(&geom, tri, verts, &field.values);
            let ma: f64 = geom.points[tri].iter().map(|q| q.weight).sum();
            wsum += ma;
            ut_acc += ma * ut;
            uth_acc += ma * uth;
        }
        let ut = ut_acc / wsum;
        let uth = uth_acc / wsum;
        let rho = field.profile.rho(bv.distance);
        let slope = bv.b_prime / (rho * rho);
        let norm = (1.0 + bv.b_prime * slope).sqrt();
        let dnu = (-ut + uth * slope) / norm;
        if dnu <= 0.0 {
            nonpositive += 1;
        }
        out.push(BoundarySample {
            theta: bv.theta,
            distance: bv.distance,
            normal_derivative: dnu,
        });
    }
    if nonpositive > 0 {
        eprintln!(
            "warning: {nonpositive} boundary normal-derivative samples are nonpositive; \
             the mesh is likely under-resolved"
        );
    }
    Ok(out)
}

/// Piecewise-linear interpolation of the field at an interior point.
pub fn field_value_at(field: &TorsionField, t: f64, theta: f64) -> Result<f64> {
    let mesh = &field.mesh;
    let d_theta = 2.0 * std::f64::consts::PI / mesh.n_theta as f64;
    let rel = (theta - mesh.theta_offset).rem_euclid(2.0 * std::f64::consts::PI);
    let j0 = ((rel / d_theta) as usize).min(mesh.n_theta - 1);
    let mut candidates: Vec<usize> = Vec::new();
    for dj in [mesh.n_theta - 1, 0, 1] {
        let j = (j0 + dj) % mesh.n_theta;
        candidates.push(j); // pole fan triangle
        for i in 0..mesh.n_r - 1 {
            let base = mesh.n_theta + (i * mesh.n_theta + j) * 2;
            candidates.push(base);
            candidates.push(base + 1);
        }
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    for tri in candidates {
        let c = &mesh.tri_coords[tri];
        let centroid_theta = (c[0][1] + c[1][1] + c[2][1]) / 3.0;
        let query_theta = theta + two_pi * ((centroid_theta - theta) / two_pi).round();
        if let Some(lambda) = barycentric(c, t, query_theta) {
            let verts = &mesh.triangles[tri];
            return Ok((0..3).map(|k| lambda[k] * field.values[verts[k]]).sum());
        }
    }
    // Near the pole the collapsed fan leaves coordinate slivers uncovered;
    // interpolate angularly on ring 1 and radially toward the pole value.
    let frac = rel / d_theta - j0 as f64;
    let v_a = 1 + j0;
    let v_b = 1 + (j0 + 1) % mesh.n_theta;
    let t_ring = (1.0 - frac) * mesh.vertices[v_a][0] + frac * mesh.vertices[v_b][0];
    if t <= t_ring * (1.0 + 1e-12) {
        let u_ring = (1.0 - frac) * field.values[v_a] + frac * field.values[v_b];
        let s = if t_ring > 0.0 { (t / t_ring).min(1.0) } else { 0.0 };
        return Ok((1.0 - s) * field.values[0] + s * u_ring);
    }
    Err(Error::PointOutsideDomain { t, theta })
}

fn barycentric(c: &[[f64; 2]; 3], x: f64, y: f64) -> Option<[f64; 3]> {
    let det = (c[1][0] - c[0][0]) * (c[2][1] - c[0][1]) - (c[2][0] - c[0][0]) * (c[1][1] - c[0][1]);
    if det == 0.0 {
        return None;
    }
    let l1 = ((x - c[0][0]) * (c[2][1] - c[0][1]) - (c[2][0] - c[0][0]) * (y - c[0][1])) / det;
    let l2 = ((c[1][0] - c[0][0]) * (y - c[0][1]) - (x - c[0][0]) * (c[1][1] - c[0][1])) / det;
    let l0 = 1.0 - l1 - l2;
    let tol = -1e-10;
    if l0 >= tol && l1 >= tol && l2 >= tol {
        Some([l0, l1, l2])
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{build_mesh, build_mesh_with_offset, StarDomain};
    use crate::warp::ProfileKind;
    use approx::assert_abs_diff_eq;

    fn preset(kind: ProfileKind) -> Arc<WarpProfile> {
        Arc::new(WarpProfile::preset(kind, 2).unwrap())
    }

    fn disk_field(p: f64, n_r: usize, n_theta: usize) -> TorsionField {
        let domain = StarDomain::ball(1.0).unwrap();
        let prof = preset(ProfileKind::Euclidean);
        let mesh = Arc::new(build_mesh(&domain, &prof, n_r, n_theta).unwrap());
        solve_torsion(&mesh, &prof, &SolverConfig::new(p)).unwrap()
    }

    #[test]
    fn euclidean_disk_p2_pole_value() {
        let field = disk_field(2.0, 32, 64);
        assert!(field.converged);
        assert_abs_diff_eq!(field.values[0], 0.25, epsilon = 5e-3);
    }

    #[test]
    fn hyperbolic_disk_p2_pole_value() {
        let domain = StarDomain::ball(1.0).unwrap();
        let prof = preset(ProfileKind::Hyperbolic);
        let mesh = Arc::new(build_mesh(&domain, &prof, 32, 64).unwrap());
        let field = solve_torsion(&mesh, &prof, &SolverConfig::new(2.0)).unwrap();
        assert_abs_diff_eq!(field.values[0], 2.0 * 0.5f64.cosh().ln(), epsilon = 5e-3);
    }

    #[test]
    fn euclidean_disk_p3_pole_value() {
        let field = disk_field(3.0, 32, 64);
        assert!(field.converged);
        assert_abs_diff_eq!(field.values[0], 2.0 / 3.0 / 2f64.sqrt(), epsilon = 8e-3);
    }

    #[test]
    fn energy_log_nonincreasing_and_interior_positive() {
        let field = disk_field(1.5, 16, 32);
        assert!(field.converged);
        for w in field.energy_log.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
        let n_interior = 1 + (field.mesh.n_r - 1) * field.mesh.n_theta;
        for i in 0..n_interior {
            assert!(field.values[i] > 0.0, "u[{i}] = {}", field.values[i]);
        }
        for i in n_interior..field.mesh.vertex_count() {
            assert_eq!(field.values[i], 0.0);
        }
    }

    #[test]
    fn disk_boundary_samples_near_half() {
        let field = disk_field(2.0, 32, 64);
        let samples = boundary_normal_samples(&field).unwrap();
        for s in &samples {
            assert_abs_diff_eq!(s.normal_derivative, 0.5, epsilon = 0.01);
            assert_abs_diff_eq!(s.distance, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn perturbed_domain_boundary_samples_vary() {
        let domain = StarDomain::new(1.0, vec![0.0, 0.3], vec![]).unwrap();
        let prof = preset(ProfileKind::Euclidean);
        let mesh = Arc::new(build_mesh(&domain, &prof, 32, 64).unwrap());
        let field = solve_torsion(&mesh, &prof, &SolverConfig::new(2.0)).unwrap();
        let samples = boundary_normal_samples(&field).unwrap();
        let max = samples.iter().map(|s| s.normal_derivative).fold(f64::MIN, f64::max);
        let min = samples.iter().map(|s| s.normal_derivative).fold(f64::MAX, f64::min);
        assert!(max - min > 0.05, "spread {}", max - min);
    }

    #[test]
    fn ball_consistency_against_radial_oracle() {
        use crate::radial::solve_radial;
        use crate::QuadratureSpec;
        let quad = QuadratureSpec::default();
        let domain = StarDomain::ball(1.0).unwrap();
        for kind in [
            ProfileKind::Euclidean,
            ProfileKind::Hyperbolic,
            ProfileKind::Spherical,
        ] {
            let prof = preset(kind);
            for p in [1.5, 2.0, 3.0] {
                let oracle = solve_radial(&prof, p, 1.0, 1025, &quad).unwrap();
                let mut errs = Vec::new();
                for (nr, nth) in [(16usize, 32usize), (32, 64)] {
                    let mesh = Arc::new(build_mesh(&domain, &prof, nr, nth).unwrap());
                    let field = solve_torsion(&mesh, &prof, &SolverConfig::new(p)).unwrap();
                    assert!(field.converged, "{kind:?} p={p} {nr}x{nth} did not converge");
                    let max = mesh
                        .vertices
                        .iter()
                        .enumerate()
                        .map(|(v, &[t, _])| (field.values[v] - oracle.value_at(t)).abs())
                        .fold(0.0f64, f64::max);
                    errs.push(max);
                }
                let ratio = errs[0] / errs[1];
                let min_ratio = if p == 2.0 { 2.0 } else { 1.6 };
                assert!(
                    ratio > min_ratio,
                    "{kind:?} p={p}: errors {errs:?}, ratio {ratio:.2} <= {min_ratio}"
                );
            }
        }
    }

    #[test]
    fn rotational_equivariance_under_theta_offset() {
        let domain = StarDomain::ball(1.0).unwrap();
        let prof = preset(ProfileKind::Euclidean);
        let config = SolverConfig::new(2.0);
        let mesh_a = Arc::new(build_mesh(&domain, &prof, 8, 16).unwrap());
        let mesh_b = Arc::new(build_mesh_with_offset(&domain, &prof, 8, 16, 0.37).unwrap());
        let fa = solve_torsion(&mesh_a, &prof, &config).unwrap();
        let fb = solve_torsion(&mesh_b, &prof, &config).unwrap();
        for (a, b) in fa.values.iter().zip(fb.values.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn field_interpolation() {
        let field = disk_field(2.0, 32, 64);
        // boundary vertex: Dirichlet zero
        let bv = field.mesh.boundary[3].clone();
        let v = field_value_at(&field, bv.distance, bv.theta).unwrap();
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-14);
        // vertex reproduction
        let idx = 1 + 5 * field.mesh.n_theta + 7;
        let [t, th] = field.mesh.vertices[idx];
        assert_abs_diff_eq!(
            field_value_at(&field, t, th).unwrap(),
            field.values[idx],
            epsilon = 1e-12
        );
        // pole value
        assert_abs_diff_eq!(
            field_value_at(&field, 0.0, 1.0).unwrap(),
            field.values[0],
            epsilon = 1e-12
        );
        // outside
        assert!(field_value_at(&field, 1.5, 0.3).is_err());
    }

    #[test]
    fn nonconverged_field_refuses_boundary_samples() {
        let domain = StarDomain::ball(1.0).unwrap();
        let prof = preset(ProfileKind::Euclidean);
        let mesh = Arc::new(build_mesh(&domain, &prof, 8, 16).unwrap());
        let mut config = SolverConfig::new(3.0);
        config.max_iterations = 1;
        let field = solve_torsion(&mesh, &prof, &config).unwrap();
        assert!(!field.converged);
        assert!(boundary_normal_samples(&field).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::new(0.9).validate().is_err());
        let mut c = SolverConfig::new(2.0);
        c.damping = 1.5;
        assert!(c.validate().is_err());
        c.damping = 0.5;
        c.epsilon = -1.0;
        assert!(c.validate().is_err());
    }
}
