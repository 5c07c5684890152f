//! Piecewise-linear finite-element assembly of the Grushin stiffness form
//! `int (du/dx dv/dx + x^(2s) du/dy dv/dy) dz` and the mass form `int u v dz`,
//! with quadrature exact for the polynomial weight.

use crate::error::{Error, Result};
use crate::geometry::Mesh;
use crate::linalg::SymmetricCsr;
use crate::quadrature::{signed_area, tri_int_x_pow};

/// Discrete quadratic forms over the interior (non-Dirichlet) degrees of
/// freedom. Dirichlet rows/columns are eliminated, not penalized.
#[derive(Debug, Clone)]
pub struct DiscreteForms {
    pub stiffness: SymmetricCsr,
    pub mass: SymmetricCsr,
    /// node index -> DoF index
    pub dof_of_node: Vec<Option<usize>>,
    /// DoF index -> node index
    pub node_of_dof: Vec<usize>,
    pub s: u32,
}

impl DiscreteForms {
    pub fn n_dofs(&self) -> usize {
        self.node_of_dof.len()
    }

    /// Restrict a nodal vector to the DoF vector.
    pub fn restrict(&self, nodal: &[f64]) -> Vec<f64> {
        self.node_of_dof.iter().map(|&n| nodal[n]).collect()
    }

    /// Extend a DoF vector to a nodal vector with zeros on the boundary.
    pub fn extend(&self, dof: &[f64], n_nodes: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_nodes];
        for (d, &n) in self.node_of_dof.iter().enumerate() {
            out[n] = dof[d];
        }
        out
    }
}

/// P1 basis gradients on a triangle: returns (area, [grad_i]) with
/// `grad_i = (b_i, c_i)` constant on the triangle.
pub fn p1_gradients(v: [[f64; 2]; 3]) -> (f64, [[f64; 2]; 3]) {
    let area = signed_area(v[0], v[1], v[2]);
    let inv = 1.0 / (2.0 * area);
    let g = [
        [(v[1][1] - v[2][1]) * inv, (v[2][0] - v[1][0]) * inv],
        [(v[2][1] - v[0][1]) * inv, (v[0][0] - v[2][0]) * inv],
        [(v[0][1] - v[1][1]) * inv, (v[1][0] - v[0][0]) * inv],
    ];
    (area, g)
}

/// Element stiffness matrix for exponent `s`: the x-gradient block uses the
/// triangle area, the y-gradient block the exact integral of `x^(2s)`.
pub fn element_stiffness(v: [[f64; 2]; 3], s: u32) -> [[f64; 3]; 3] {
    let (area, g) = p1_gradients(v);
    let wy = tri_int_x_pow(v, 2 * s);
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = area * g[i][0] * g[j][0] + wy * g[i][1] * g[j][1];
        }
    }
    k
}

/// Exact linear-element mass matrix: `(area / 12) * (1 + delta_ij)`.
pub fn element_mass(v: [[f64; 2]; 3]) -> [[f64; 3]; 3] {
    let area = signed_area(v[0], v[1], v[2]);
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = area / 12.0 * if i == j { 2.0 } else { 1.0 };
        }
    }
    m
}

pub fn assemble(mesh: &Mesh, s: u32) -> Result<DiscreteForms> {
    let n_nodes = mesh.nodes.len();
    let mut dof_of_node: Vec<Option<usize>> = vec![None; n_nodes];
    let mut node_of_dof = Vec::new();
    for i in 0..n_nodes {
        if !mesh.boundary_node[i] {
            dof_of_node[i] = Some(node_of_dof.len());
            node_of_dof.push(i);
        }
    }
    if node_of_dof.is_empty() {
        return Err(Error::Assembly("no interior degrees of freedom".into()));
    }
    let n = node_of_dof.len();
    let mut kt: Vec<(usize, usize, f64)> = Vec::with_capacity(9 * mesh.triangles.len());
    let mut mt: Vec<(usize, usize, f64)> = Vec::with_capacity(9 * mesh.triangles.len());
    for (ti, tri) in mesh.triangles.iter().enumerate() {
        let v = mesh.triangle_vertices(ti);
        let ke = element_stiffness(v, s);
        let me = element_mass(v);
        for i in 0..3 {
            let Some(di) = dof_of_node[tri[i]] else { continue };
            for j in 0..3 {
                let Some(dj) = dof_of_node[tri[j]] else { continue };
                kt.push((di, dj, ke[i][j]));
                mt.push((di, dj, me[i][j]));
            }
        }
    }
    Ok(DiscreteForms {
        stiffness: SymmetricCsr::from_triplets(n, &kt),
        mass: SymmetricCsr::from_triplets(n, &mt),
        dof_of_node,
        node_of_dof,
        s,
    })
}

/// `(u^t K u) / (u^t M u)` for a DoF vector.
pub fn rayleigh_quotient(u: &[f64], forms: &DiscreteForms) -> Result<f64> {
    let den = forms.mass.bilinear(u, u);
    if den <= 0.0 {
        return Err(Error::InvalidArgument("Rayleigh quotient of the zero vector".into()));
    }
    Ok(forms.stiffness.bilinear(u, u) / den)
}
