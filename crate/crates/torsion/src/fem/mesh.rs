//! Structured polar mesh on a star-shaped domain.
//!
//! The parameter square (s, theta) with s in [0, 1] is mapped by
//! t = s * b(theta); the innermost ring collapses to a single pole vertex
//! (fan of triangles). All per-triangle geometry is stored with unwrapped
//! theta so that the seam needs no special casing downstream.

use super::domain::StarDomain;
use crate::error::{Error, Result};
use crate::warp::WarpProfile;
use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct BoundaryVertex {
    pub vertex: usize,
    pub theta: f64,
    /// Geodesic distance from the pole, d = b(theta).
    pub distance: f64,
    pub b_prime: f64,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub n_r: usize,
    pub n_theta: usize,
    pub theta_offset: f64,
    /// (t, theta) per vertex; theta reduced mod 2 pi.
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    /// Per-triangle vertex coordinates with unwrapped theta, matching the
    /// vertex order in `triangles`.
    pub tri_coords: Vec<[[f64; 2]; 3]>,
    pub boundary: Vec<BoundaryVertex>,
    /// Triangles adjacent to each vertex.
    pub vertex_tris: Vec<Vec<usize>>,
}

impl Mesh {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        v >= 1 + (self.n_r - 1) * self.n_theta
    }

    /// Area of a triangle in the (t, theta) parameter plane.
    pub fn param_area(&self, tri: usize) -> f64 {
        let c = &self.tri_coords[tri];
        0.5 * ((c[1][0] - c[0][0]) * (c[2][1] - c[0][1])
            - (c[2][0] - c[0][0]) * (c[1][1] - c[0][1]))
    }

    /// Midpoints of the three edges, for the quadrature rule.
    pub fn edge_midpoints(&self, tri: usize) -> [[f64; 2]; 3] {
        let c = &self.tri_coords[tri];
        let mid = |a: usize, b: usize| {
            [
                0.5 * (c[a][0] + c[b][0]),
                0.5 * (c[a][1] + c[b][1]),
            ]
        };
        [mid(0, 1), mid(1, 2), mid(2, 0)]
    }

    /// Parameter-plane cells over which a triangle's affine shape functions
    /// are integrated. A ring triangle owns exactly its own coordinate
    /// triangle. A pole-fan triangle stands for its whole sector
    /// [0, t_1] x [theta_j, theta_{j+1}]: the collapsed inner edge pins the
    /// pole to a single coordinate, so the sector quad is returned as two
    /// sub-triangles. Without this the slivers between adjacent fan
    /// triangles would be skipped, under-integrating near the pole.
    pub fn quadrature_cells(&self, tri: usize) -> Vec<[[f64; 2]; 3]> {
        let c = self.tri_coords[tri];
        if tri < self.n_theta {
            let th0 = c[1][1];
            let th1 = c[2][1];
            vec![[[0.0, th0], c[1], c[2]], [[0.0, th0], c[2], [0.0, th1]]]
        } else {
            vec![c]
        }
    }

    /// Metric area sum(int rho dt dtheta) over the whole mesh, edge-midpoint
    /// quadrature per quadrature cell.
    pub fn metric_area(&self, profile: &WarpProfile) -> f64 {
        let mut total = 0.0;
        for tri in 0..self.triangles.len() {
            for cell in self.quadrature_cells(tri) {
                let area = 0.5
                    * ((cell[1][0] - cell[0][0]) * (cell[2][1] - cell[0][1])
                        - (cell[2][0] - cell[0][0]) * (cell[1][1] - cell[0][1]));
                for e in 0..3 {
                    let mid_t = 0.5 * (cell[e][0] + cell[(e + 1) % 3][0]);
                    total += area / 3.0 * profile.rho(mid_t);
                }
            }
        }
        total
    }
}

pub fn build_mesh(
    domain: &StarDomain,
    profile: &WarpProfile,
    n_r: usize,
    n_theta: usize,
) -> Result<Mesh> {
    build_mesh_with_offset(domain, profile, n_r, n_theta, 0.0)
}

/// Same as `build_mesh` with all angular nodes shifted by `offset`.
pub fn build_mesh_with_offset(
    domain: &StarDomain,
    profile: &WarpProfile,
    n_r: usize,
    n_theta: usize,
    offset: f64,
) -> Result<Mesh> {
    if n_r < 4 {
        return Err(Error::MeshConstruction(format!(
            "n_r must be at least 4, got {n_r}"
        )));
    }
    if n_theta < 8 || n_theta % 2 != 0 {
        return Err(Error::MeshConstruction(format!(
            "n_theta must be even and at least 8, got {n_theta}"
        )));
    }
    let (b_min, b_max) = domain.extrema();
    if !(b_min > 0.0) {
        return Err(Error::MeshConstruction(format!(
            "boundary radius must stay positive; min b = {b_min}"
        )));
    }
    if b_max >= profile.usable_max_radius() {
        return Err(Error::MeshConstruction(format!(
            "boundary radius {b_max} reaches the profile validity radius {}",
            profile.usable_max_radius()
        )));
    }

    let d_theta = 2.0 * PI / n_theta as f64;
    let theta_at = |j: usize| offset + j as f64 * d_theta; // unwrapped
    let idx = |i: usize, j: usize| 1 + (i - 1) * n_theta + (j % n_theta);
    let t_at = |i: usize, j: usize| i as f64 / n_r as f64 * domain.b(theta_at(j));

    let mut vertices = vec![[0.0, 0.0]; 1 + n_r * n_theta];
    for i in 1..=n_r {
        for j in 0..n_theta {
            vertices[idx(i, j)] = [t_at(i, j), theta_at(j).rem_euclid(2.0 * PI)];
        }
    }

    let mut triangles: Vec<[usize; 3]> = Vec::with_capacity(n_theta * (2 * n_r - 1));
    let mut tri_coords: Vec<[[f64; 2]; 3]> = Vec::with_capacity(triangles.capacity());
    let mut push = |verts: [usize; 3], coords: [[f64; 2]; 3]| -> Result<()> {
        let cross = (coords[1][0] - coords[0][0]) * (coords[2][1] - coords[0][1])
            - (coords[2][0] - coords[0][0]) * (coords[1][1] - coords[0][1]);
        let (verts, coords) = if cross < 0.0 {
            ([verts[0], verts[2], verts[1]], [coords[0], coords[2], coords[1]])
        } else {
            (verts, coords)
        };
        let area = 0.5
            * ((coords[1][0] - coords[0][0]) * (coords[2][1] - coords[0][1])
                - (coords[2][0] - coords[0][0]) * (coords[1][1] - coords[0][1]));
        if !(area > 0.0) {
            return Err(Error::MeshConstruction(format!(
                "degenerate triangle with area {area}"
            )));
        }
        triangles.push(verts);
        tri_coords.push(coords);
        Ok(())
    };

    // Pole fan; the pole vertex gets the sector's mid angle as its
    // (arbitrary) theta coordinate.
    for j in 0..n_theta {
        let th0 = theta_at(j);
        let th1 = th0 + d_theta;
        push(
            [0, idx(1, j), idx(1, j + 1)],
            [
                [0.0, 0.5 * (th0 + th1)],
                [t_at(1, j), th0],
                [t_at(1, j + 1), th1],
            ],
        )?;
    }
    // Ring quads split along a consistent diagonal.
    for i in 1..n_r {
        for j in 0..n_theta {
            let th0 = theta_at(j);
            let th1 = th0 + d_theta;
            let a = (idx(i, j), [t_at(i, j), th0]);
            let b = (idx(i, j + 1), [t_at(i, j + 1), th1]);
            let c = (idx(i + 1, j + 1), [t_at(i + 1, j + 1), th1]);
            let d = (idx(i + 1, j), [t_at(i + 1, j), th0]);
            push([a.0, b.0, c.0], [a.1, b.1, c.1])?;
            push([a.0, c.0, d.0], [a.1, c.1, d.1])?;
        }
    }

    let boundary: Vec<BoundaryVertex> = (0..n_theta)
        .map(|j| {
            let th = theta_at(j);
            BoundaryVertex {
                vertex: idx(n_r, j),
                theta: th.rem_euclid(2.0 * PI),
                distance: domain.b(th),
                b_prime: domain.b_prime(th),
            }
        })
        .collect();

    let mut vertex_tris = vec![Vec::new(); vertices.len()];
    for (k, tri) in triangles.iter().enumerate() {
        for &v in tri {
            vertex_tris[v].push(k);
        }
    }

    Ok(Mesh {
        n_r,
        n_theta,
        theta_offset: offset,
        vertices,
        triangles,
        tri_coords,
        boundary,
        vertex_tris,
    })
}
