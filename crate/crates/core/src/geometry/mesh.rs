use std::collections::HashMap;

use super::domain::{Domain, DomainKind};
use crate::error::{Error, Result};
use crate::quadrature::signed_area;

/// A boundary edge, tagged with the parametric segment it discretizes.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryEdge {
    /// node indices, ordered along the positively oriented loop
    pub nodes: [usize; 2],
    pub segment: usize,
    pub t0: f64,
    pub t1: f64,
}

/// Conforming triangulation with boundary nodes on the parametric boundary.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    pub boundary_node: Vec<bool>,
}

impl Mesh {
    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(move |&i| !self.boundary_node[i])
    }

    pub fn triangle_vertices(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    /// Map from a boundary edge (by index) to its unique adjacent triangle.
    pub fn boundary_edge_triangles(&self) -> Result<Vec<usize>> {
        let mut edge_tri: HashMap<(usize, usize), usize> = HashMap::new();
        for (ti, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                edge_tri.entry(key).and_modify(|_| {}).or_insert(ti);
            }
        }
        self.boundary_edges
            .iter()
            .map(|e| {
                let key = (e.nodes[0].min(e.nodes[1]), e.nodes[0].max(e.nodes[1]));
                edge_tri
                    .get(&key)
                    .copied()
                    .ok_or_else(|| Error::BadMesh(format!("boundary edge {key:?} has no adjacent triangle")))
            })
            .collect()
    }

    /// Check positivity, conformity and that boundary edges form one closed loop.
    pub fn validate(&self) -> Result<()> {
        for (i, _) in self.triangles.iter().enumerate() {
            let v = self.triangle_vertices(i);
            if signed_area(v[0], v[1], v[2]) <= 0.0 {
                return Err(Error::BadMesh(format!("triangle {i} has non-positive area")));
            }
        }
        let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *edge_count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        let boundary_keys: std::collections::HashSet<(usize, usize)> = self
            .boundary_edges
            .iter()
            .map(|e| (e.nodes[0].min(e.nodes[1]), e.nodes[0].max(e.nodes[1])))
            .collect();
        for (key, count) in &edge_count {
            match count {
                1 => {
                    if !boundary_keys.contains(key) {
                        return Err(Error::BadMesh(format!("edge {key:?} is exposed but untagged")));
                    }
                }
                2 => {
                    if boundary_keys.contains(key) {
                        return Err(Error::BadMesh(format!("edge {key:?} is interior but tagged as boundary")));
                    }
                }
                c => return Err(Error::BadMesh(format!("edge {key:?} shared by {c} triangles"))),
            }
        }
        // closed loop: every boundary node has exactly two incident boundary edges
        let mut incidence: HashMap<usize, usize> = HashMap::new();
        for e in &self.boundary_edges {
            *incidence.entry(e.nodes[0]).or_insert(0) += 1;
            *incidence.entry(e.nodes[1]).or_insert(0) += 1;
        }
        for (node, c) in &incidence {
            if *c != 2 {
                return Err(Error::BadMesh(format!("boundary node {node} has {c} incident boundary edges")));
            }
            if !self.boundary_node[*node] {
                return Err(Error::BadMesh(format!("node {node} on a boundary edge is not flagged")));
            }
        }
        if self.boundary_node.iter().filter(|&&b| b).count() != incidence.len() {
            return Err(Error::BadMesh("flagged boundary nodes do not match the boundary loop".into()));
        }
        Ok(())
    }
}

/// Convert the CLI resolution parameter `n` into a target mesh size.
pub fn resolution_to_h(domain: &Domain, n: usize) -> f64 {
    match domain.kind {
        DomainKind::Rectangle { x0, x1, y0, y1 } => (x1 - x0).max(y1 - y0) / n as f64,
        DomainKind::Disk { radius, .. } => 2.0 * radius / n as f64,
        DomainKind::Generic => {
            let bb = domain.bounding_box();
            (bb.x1 - bb.x0).max(bb.y1 - bb.y0) / n as f64
        }
    }
}

/// Deterministic conforming triangulation with boundary nodes exactly on the
/// parametric boundary; maximum edge length at most `2 * h_target`.
pub fn triangulate(domain: &Domain, h_target: f64) -> Result<Mesh> {
    if h_target <= 0.0 || !h_target.is_finite() {
        return Err(Error::InvalidArgument(format!("hTarget must be positive, got {h_target}")));
    }
    let mesh = match domain.kind {
        DomainKind::Rectangle { x0, x1, y0, y1 } => rectangle_mesh(x0, x1, y0, y1, h_target)?,
        DomainKind::Disk { center, radius } => disk_mesh(center, radius, h_target)?,
        DomainKind::Generic => star_mesh(domain, h_target)?,
    };
    if mesh.boundary_edges.len() < 8 {
        return Err(Error::TooCoarse(mesh.boundary_edges.len()));
    }
    mesh.validate()?;
    Ok(mesh)
}

fn rectangle_mesh(x0: f64, x1: f64, y0: f64, y1: f64, h: f64) -> Result<Mesh> {
    let nx = ((x1 - x0) / h).ceil() as usize;
    let ny = ((y1 - y0) / h).ceil() as usize;
    let nx = nx.max(1);
    let ny = ny.max(1);
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push([
                x0 + (x1 - x0) * i as f64 / nx as f64,
                y0 + (y1 - y0) * j as f64 / ny as f64,
            ]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            triangles.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            triangles.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    let mut boundary_edges = Vec::with_capacity(2 * (nx + ny));
    for i in 0..nx {
        // bottom, segment 0 runs x0 -> x1
        boundary_edges.push(BoundaryEdge {
            nodes: [idx(i, 0), idx(i + 1, 0)],
            segment: 0,
            t0: i as f64 / nx as f64,
            t1: (i + 1) as f64 / nx as f64,
        });
    }
    for j in 0..ny {
        boundary_edges.push(BoundaryEdge {
            nodes: [idx(nx, j), idx(nx, j + 1)],
            segment: 1,
            t0: j as f64 / ny as f64,
            t1: (j + 1) as f64 / ny as f64,
        });
    }
    for i in 0..nx {
        // top, segment 2 runs x1 -> x0
        boundary_edges.push(BoundaryEdge {
            nodes: [idx(nx - i, ny), idx(nx - i - 1, ny)],
            segment: 2,
            t0: i as f64 / nx as f64,
            t1: (i + 1) as f64 / nx as f64,
        });
    }
    for j in 0..ny {
        // left, segment 3 runs (x0, y1) -> (x0, y0)
        boundary_edges.push(BoundaryEdge {
            nodes: [idx(0, ny - j), idx(0, ny - j - 1)],
            segment: 3,
            t0: j as f64 / ny as f64,
            t1: (j + 1) as f64 / ny as f64,
        });
    }
    let mut boundary_node = vec![false; nodes.len()];
    for e in &boundary_edges {
        boundary_node[e.nodes[0]] = true;
        boundary_node[e.nodes[1]] = true;
    }
    Ok(Mesh { nodes, triangles, boundary_edges, boundary_node })
}

/// Concentric-ring triangulation of a disk: ring `i` of `m` carries `6 i`
/// nodes at radius `r i / m`; quasi-uniform and exactly 6-fold symmetric.
fn disk_mesh(center: [f64; 2], radius: f64, h: f64) -> Result<Mesh> {
    let m = ((radius / h).ceil() as usize).max(2);
    let ring_offset = |i: usize| if i == 0 { 0 } else { 1 + 3 * i * (i - 1) };
    let mut nodes = vec![center];
    for i in 1..=m {
        let r = radius * i as f64 / m as f64;
        for q in 0..6 * i {
            let a = std::f64::consts::TAU * q as f64 / (6 * i) as f64;
            nodes.push([center[0] + r * a.cos(), center[1] + r * a.sin()]);
        }
    }
    let mut triangles = Vec::with_capacity(6 * m * m);
    // innermost fan
    for q in 0..6 {
        triangles.push([ring_offset(1) + q, ring_offset(1) + (q + 1) % 6, 0]);
    }
    for i in 2..=m {
        let outer = ring_offset(i);
        let inner = ring_offset(i - 1);
        let on = 6 * i;
        let inn = 6 * (i - 1);
        for s in 0..6 {
            for j in 0..i {
                let o0 = outer + (s * i + j) % on;
                let o1 = outer + (s * i + j + 1) % on;
                let nj = inner + (s * (i - 1) + j) % inn;
                triangles.push([o0, o1, nj]);
                if j < i - 1 {
                    let nj1 = inner + (s * (i - 1) + j + 1) % inn;
                    triangles.push([o1, nj1, nj]);
                }
            }
        }
    }
    let outer = ring_offset(m);
    let bn = 6 * m;
    let mut boundary_edges = Vec::with_capacity(bn);
    for q in 0..bn {
        boundary_edges.push(BoundaryEdge {
            nodes: [outer + q, outer + (q + 1) % bn],
            segment: 0,
            t0: q as f64 / bn as f64,
            t1: (q + 1) as f64 / bn as f64,
        });
    }
    let mut boundary_node = vec![false; nodes.len()];
    for e in &boundary_edges {
        boundary_node[e.nodes[0]] = true;
        boundary_node[e.nodes[1]] = true;
    }
    Ok(Mesh { nodes, triangles, boundary_edges, boundary_node })
}

/// Radial mesh for a generic positively oriented loop, star-shaped with
/// respect to the boundary centroid. Fails with an inverted triangle when the
/// domain is not star-shaped.
fn star_mesh(domain: &Domain, h: f64) -> Result<Mesh> {
    // boundary sampling with tags
    let mut btags: Vec<(usize, f64)> = Vec::new();
    for (si, seg) in domain.segments.iter().enumerate() {
        let ne = ((seg.arclength() / h).ceil() as usize).max(2);
        for j in 0..ne {
            btags.push((si, j as f64 / ne as f64));
        }
    }
    let k = btags.len();
    let bpts: Vec<[f64; 2]> = btags.iter().map(|&(si, t)| domain.segments[si].point(t)).collect();
    let c = [
        bpts.iter().map(|p| p[0]).sum::<f64>() / k as f64,
        bpts.iter().map(|p| p[1]).sum::<f64>() / k as f64,
    ];
    let mean_r = bpts
        .iter()
        .map(|p| ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt())
        .sum::<f64>()
        / k as f64;
    let m = ((mean_r / h).ceil() as usize).max(2);
    let mut nodes = vec![c];
    for i in 1..=m {
        let f = i as f64 / m as f64;
        for p in &bpts {
            nodes.push([c[0] + f * (p[0] - c[0]), c[1] + f * (p[1] - c[1])]);
        }
    }
    let ring = |i: usize, q: usize| 1 + (i - 1) * k + (q % k);
    let mut triangles = Vec::new();
    for q in 0..k {
        triangles.push([ring(1, q), ring(1, q + 1), 0]);
    }
    for i in 2..=m {
        for q in 0..k {
            triangles.push([ring(i, q), ring(i, q + 1), ring(i - 1, q)]);
            triangles.push([ring(i, q + 1), ring(i - 1, q + 1), ring(i - 1, q)]);
        }
    }
    for (ti, _) in triangles.iter().enumerate() {
        let [a, b, cc] = triangles[ti];
        if signed_area(nodes[a], nodes[b], nodes[cc]) <= 0.0 {
            return Err(Error::BadMesh(format!(
                "radial mesh inverted at triangle {ti}: domain is not star-shaped for this mesher"
            )));
        }
    }
    let mut boundary_edges = Vec::with_capacity(k);
    for q in 0..k {
        let (seg, t0) = btags[q];
        let (seg_next, t_next) = btags[(q + 1) % k];
        let t1 = if seg_next == seg { t_next } else { 1.0 };
        boundary_edges.push(BoundaryEdge { nodes: [ring(m, q), ring(m, q + 1)], segment: seg, t0, t1 });
    }
    let mut boundary_node = vec![false; nodes.len()];
    for e in &boundary_edges {
        boundary_node[e.nodes[0]] = true;
        boundary_node[e.nodes[1]] = true;
    }
    Ok(Mesh { nodes, triangles, boundary_edges, boundary_node })
}

/// Per-boundary-edge geometric data evaluated from the exact parameterization
/// at the edge-midpoint parameter.
#[derive(Debug, Clone, Copy)]
pub struct EdgeGeometry {
    pub midpoint: [f64; 2],
    pub normal: [f64; 2],
    /// polygonal arclength weight (chord length)
    pub weight: f64,
    pub curvature: f64,
}

pub fn boundary_geometry(domain: &Domain, mesh: &Mesh) -> Result<Vec<EdgeGeometry>> {
    mesh.boundary_edges
        .iter()
        .map(|e| {
            let seg = domain
                .segments
                .get(e.segment)
                .ok_or_else(|| Error::BadMesh(format!("edge tagged with unknown segment {}", e.segment)))?;
            let tm = 0.5 * (e.t0 + e.t1);
            let p0 = mesh.nodes[e.nodes[0]];
            let p1 = mesh.nodes[e.nodes[1]];
            Ok(EdgeGeometry {
                midpoint: seg.point(tm),
                normal: seg.outward_normal(tm),
                weight: (p1[0] - p0[0]).hypot(p1[1] - p0[1]),
                curvature: seg.curvature(tm),
            })
        })
        .collect()
}

/// Polygonal volume (sum of triangle areas) and perimeter (sum of boundary
/// chord lengths).
pub fn measure(mesh: &Mesh) -> (f64, f64) {
    let volume: f64 = (0..mesh.triangles.len())
        .map(|t| {
            let v = mesh.triangle_vertices(t);
            signed_area(v[0], v[1], v[2])
        })
        .sum();
    let perimeter: f64 = mesh
        .boundary_edges
        .iter()
        .map(|e| {
            let p0 = mesh.nodes[e.nodes[0]];
            let p1 = mesh.nodes[e.nodes[1]];
            (p1[0] - p0[0]).hypot(p1[1] - p0[1])
        })
        .sum();
    (volume, perimeter)
}
