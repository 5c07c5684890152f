//! Admissible shape-perturbation fields and map families: named closed-form
//! families with exact jacobians, split structure near the degenerate set
//! {x = 0}, sample-based admissibility checks, and mesh transport.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Domain, Mesh, Rect};
use crate::quadrature::signed_area;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    X,
    Y,
}

/// Serializable description of a perturbation field.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldSpec {
    /// Generator of the anisotropic dilation: (x, (1+s) y).
    DilationGenerator,
    AxisStretch {
        axis: Axis,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// psi = (P(x), Q(y)) with polynomials P, Q; P must have zero constant term.
    SplitPolynomial { coeffs_x: Vec<f64>, coeffs_y: Vec<f64> },
    /// C^2 tensor-product polynomial bump supported on a rectangle, times a
    /// constant direction.
    BoundaryBump {
        support: Rect,
        direction: [f64; 2],
        #[serde(default = "one")]
        amplitude: f64,
    },
    Zero,
}

fn one() -> f64 {
    1.0
}

/// A named perturbation field with closed-form value and jacobian.
#[derive(Debug, Clone)]
pub struct PerturbationField {
    pub spec: FieldSpec,
    /// weight exponent of the domain the field was built for
    pub s: u32,
    pub support_avoids_o: bool,
}

/// C^2 bump on [-1, 1]: value and first two derivatives vanish at the ends.
fn bump(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        let w = 1.0 - u * u;
        w * w * w
    }
}

fn bump_deriv(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        let w = 1.0 - u * u;
        -6.0 * u * w * w
    }
}

fn poly_eval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

fn poly_deriv(c: &[f64], x: f64) -> f64 {
    c.iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (k, &a)| acc * x + k as f64 * a)
}

impl PerturbationField {
    pub fn eval(&self, z: [f64; 2]) -> [f64; 2] {
        let [x, y] = z;
        match &self.spec {
            FieldSpec::DilationGenerator => [x, (1.0 + self.s as f64) * y],
            FieldSpec::AxisStretch { axis: Axis::X, amplitude } => [amplitude * x, 0.0],
            FieldSpec::AxisStretch { axis: Axis::Y, amplitude } => [0.0, amplitude * y],
            FieldSpec::SplitPolynomial { coeffs_x, coeffs_y } => {
                [poly_eval(coeffs_x, x), poly_eval(coeffs_y, y)]
            }
            FieldSpec::BoundaryBump { support, direction, amplitude } => {
                let ux = (2.0 * x - support.x0 - support.x1) / (support.x1 - support.x0);
                let uy = (2.0 * y - support.y0 - support.y1) / (support.y1 - support.y0);
                let b = amplitude * bump(ux) * bump(uy);
                [b * direction[0], b * direction[1]]
            }
            FieldSpec::Zero => [0.0, 0.0],
        }
    }

    /// Exact jacobian D psi, row-major 2x2.
    pub fn jacobian(&self, z: [f64; 2]) -> [[f64; 2]; 2] {
        let [x, y] = z;
        match &self.spec {
            FieldSpec::DilationGenerator => [[1.0, 0.0], [0.0, 1.0 + self.s as f64]],
            FieldSpec::AxisStretch { axis: Axis::X, amplitude } => [[*amplitude, 0.0], [0.0, 0.0]],
            FieldSpec::AxisStretch { axis: Axis::Y, amplitude } => [[0.0, 0.0], [0.0, *amplitude]],
            FieldSpec::SplitPolynomial { coeffs_x, coeffs_y } => {
                [[poly_deriv(coeffs_x, x), 0.0], [0.0, poly_deriv(coeffs_y, y)]]
            }
            FieldSpec::BoundaryBump { support, direction, amplitude } => {
                let sx = 2.0 / (support.x1 - support.x0);
                let sy = 2.0 / (support.y1 - support.y0);
                let ux = sx * x - (support.x0 + support.x1) / (support.x1 - support.x0);
                let uy = sy * y - (support.y0 + support.y1) / (support.y1 - support.y0);
                let dbx = amplitude * bump_deriv(ux) * sx * bump(uy);
                let dby = amplitude * bump(ux) * bump_deriv(uy) * sy;
                [[dbx * direction[0], dby * direction[0]], [dbx * direction[1], dby * direction[1]]]
            }
            FieldSpec::Zero => [[0.0, 0.0], [0.0, 0.0]],
        }
    }

    pub fn divergence(&self, z: [f64; 2]) -> f64 {
        let j = self.jacobian(z);
        j[0][0] + j[1][1]
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.spec, FieldSpec::Zero)
    }

    /// Scaled copy: `a * psi` (all families are closed under scaling).
    pub fn scaled(&self, a: f64) -> PerturbationField {
        let spec = match &self.spec {
            FieldSpec::DilationGenerator => FieldSpec::SplitPolynomial {
                coeffs_x: vec![0.0, a],
                coeffs_y: vec![0.0, a * (1.0 + self.s as f64)],
            },
            FieldSpec::AxisStretch { axis, amplitude } => {
                FieldSpec::AxisStretch { axis: *axis, amplitude: a * amplitude }
            }
            FieldSpec::SplitPolynomial { coeffs_x, coeffs_y } => FieldSpec::SplitPolynomial {
                coeffs_x: coeffs_x.iter().map(|c| a * c).collect(),
                coeffs_y: coeffs_y.iter().map(|c| a * c).collect(),
            },
            FieldSpec::BoundaryBump { support, direction, amplitude } => FieldSpec::BoundaryBump {
                support: *support,
                direction: *direction,
                amplitude: a * amplitude,
            },
            FieldSpec::Zero => FieldSpec::Zero,
        };
        PerturbationField { spec, s: self.s, support_avoids_o: self.support_avoids_o }
    }
}

/// Validate a field description against a domain and return the field.
pub fn make_field(spec: FieldSpec, domain: &Domain) -> Result<PerturbationField> {
    let support_avoids_o = match &spec {
        FieldSpec::BoundaryBump { support, .. } => {
            if let Some(o) = &domain.o_spec {
                if support.intersects(o) {
                    return Err(Error::BumpIntersectsO);
                }
            }
            true
        }
        FieldSpec::SplitPolynomial { coeffs_x, .. } => {
            if domain.touches_degenerate && coeffs_x.first().copied().unwrap_or(0.0) != 0.0 {
                return Err(Error::BadField(
                    "splitPolynomial x-component has a nonzero constant term (psi_x(0) != 0)".into(),
                ));
            }
            false
        }
        FieldSpec::Zero => true,
        _ => false,
    };
    Ok(PerturbationField { spec, s: domain.s, support_avoids_o })
}

/// One-parameter family of maps of the plane.
#[derive(Debug, Clone)]
pub enum MapFamily {
    /// Anisotropic dilation (t x, t^(1+s) y); identity at t = 1.
    Dilation { s: u32 },
    /// phi_eps = id + eps psi; identity at eps = 0.
    Offset { field: PerturbationField },
}

impl MapFamily {
    pub fn apply(&self, param: f64, z: [f64; 2]) -> [f64; 2] {
        match self {
            MapFamily::Dilation { s } => [param * z[0], param.powi(1 + *s as i32) * z[1]],
            MapFamily::Offset { field } => {
                let p = field.eval(z);
                [z[0] + param * p[0], z[1] + param * p[1]]
            }
        }
    }

    /// Parameter value at which the family is the identity.
    pub fn identity_param(&self) -> f64 {
        match self {
            MapFamily::Dilation { .. } => 1.0,
            MapFamily::Offset { .. } => 0.0,
        }
    }

    /// Derivative of the family with respect to the parameter, at the identity.
    pub fn generator(&self) -> PerturbationField {
        match self {
            MapFamily::Dilation { s } => PerturbationField {
                spec: FieldSpec::DilationGenerator,
                s: *s,
                support_avoids_o: false,
            },
            MapFamily::Offset { field } => field.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AdmissibilityReport {
    pub pass: bool,
    /// sampled lower bound for |phi(z1) - phi(z2)| / |z1 - z2|
    pub bi_lipschitz_lower: f64,
    pub first_violation: Option<String>,
}

const SPLIT_TOL: f64 = 1e-10;

/// Sample-verified admissibility of `phi` = the family at `param`:
/// a positive bi-Lipschitz lower bound over sampled point pairs in the closed
/// domain, plus the split structure of the generator inside `Omega ∩ O`
/// (`psi_x` depends only on x, `psi_y` only on y, `psi_x(0) = 0`).
pub fn check_admissible(
    family: &MapFamily,
    param: f64,
    domain: &Domain,
    samples: usize,
) -> Result<AdmissibilityReport> {
    if samples < 100 {
        return Err(Error::InvalidArgument(format!("need at least 100 samples, got {samples}")));
    }
    let mut violation: Option<String> = None;
    let bb = domain.bounding_box();
    let mut rng = ChaCha8Rng::seed_from_u64(0x9e3779b9);
    let mut pts: Vec<[f64; 2]> = Vec::with_capacity(samples);
    let mut guard = 0usize;
    while pts.len() < samples && guard < 1000 * samples {
        guard += 1;
        let p = [rng.gen_range(bb.x0..bb.x1), rng.gen_range(bb.y0..bb.y1)];
        if domain.inside(p) {
            pts.push(p);
        }
    }
    // include boundary points so the closure is exercised
    for seg in &domain.segments {
        for j in 0..16 {
            pts.push(seg.point(j as f64 / 16.0));
        }
    }
    let mut lower = f64::INFINITY;
    for w in pts.windows(2) {
        let (z1, z2) = (w[0], w[1]);
        let d = (z1[0] - z2[0]).hypot(z1[1] - z2[1]);
        if d < 1e-12 {
            continue;
        }
        let (f1, f2) = (family.apply(param, z1), family.apply(param, z2));
        let fd = (f1[0] - f2[0]).hypot(f1[1] - f2[1]);
        lower = lower.min(fd / d);
    }
    if !(lower > 1e-8) {
        violation = Some(format!("bi-Lipschitz lower bound collapsed to {lower:.3e}"));
    }

    // split structure of the generator inside Omega ∩ O
    if let Some(o) = &domain.o_spec {
        let field = family.generator();
        if !field.support_avoids_o {
            let scale = field_scale(&field, &pts);
            let mut opts: Vec<[f64; 2]> = pts
                .iter()
                .copied()
                .filter(|p| o.contains(*p) && domain.inside(*p))
                .collect();
            // a few structured points as well
            let ox0 = o.x0.max(bb.x0);
            let ox1 = o.x1.min(bb.x1);
            for i in 0..10 {
                for j in 0..10 {
                    let p = [
                        ox0 + (ox1 - ox0) * (i as f64 + 0.5) / 10.0,
                        bb.y0 + (bb.y1 - bb.y0) * (j as f64 + 0.5) / 10.0,
                    ];
                    if o.contains(p) && domain.inside(p) {
                        opts.push(p);
                    }
                }
            }
            'outer: for i in 0..opts.len() {
                for j in (i + 1)..opts.len() {
                    let (a, b) = (opts[i], opts[j]);
                    let va = field.eval(a);
                    // psi_x must not depend on y
                    let vx = field.eval([a[0], b[1]]);
                    if (va[0] - vx[0]).abs() > SPLIT_TOL * scale {
                        violation.get_or_insert(format!(
                            "split structure: psi_x varies with y at x = {}",
                            a[0]
                        ));
                        break 'outer;
                    }
                    // psi_y must not depend on x
                    let vy = field.eval([b[0], a[1]]);
                    if (va[1] - vy[1]).abs() > SPLIT_TOL * scale {
                        violation.get_or_insert(format!(
                            "split structure: psi_y varies with x at y = {}",
                            a[1]
                        ));
                        break 'outer;
                    }
                }
            }
            // psi_x(0) = 0 on the degenerate set
            if violation.is_none() && domain.touches_degenerate {
                for j in 0..32 {
                    let y = bb.y0 + (bb.y1 - bb.y0) * j as f64 / 31.0;
                    let v = field.eval([0.0, y]);
                    if v[0].abs() > SPLIT_TOL * scale {
                        violation = Some(format!("psi_x(0, {y}) = {} != 0", v[0]));
                        break;
                    }
                }
            }
        }
    }

    Ok(AdmissibilityReport { pass: violation.is_none(), bi_lipschitz_lower: lower, first_violation: violation })
}

fn field_scale(field: &PerturbationField, pts: &[[f64; 2]]) -> f64 {
    pts.iter()
        .map(|&p| {
            let v = field.eval(p);
            v[0].abs().max(v[1].abs())
        })
        .fold(1.0f64, f64::max)
}

/// Transport a mesh through a map: identical connectivity and tags, node
/// coordinates replaced by their images.
pub fn map_mesh<F: Fn([f64; 2]) -> [f64; 2]>(mesh: &Mesh, map: F) -> Result<Mesh> {
    let nodes: Vec<[f64; 2]> = mesh.nodes.iter().map(|&p| map(p)).collect();
    // injectivity on the node set
    let mut order: Vec<usize> = (0..nodes.len()).collect();
    order.sort_by(|&a, &b| nodes[a][0].total_cmp(&nodes[b][0]).then(nodes[a][1].total_cmp(&nodes[b][1])));
    for w in order.windows(2) {
        let (a, b) = (nodes[w[0]], nodes[w[1]]);
        if (a[0] - b[0]).hypot(a[1] - b[1]) < 1e-12 {
            return Err(Error::NonInjectiveMap(w[0], w[1]));
        }
    }
    for (ti, tri) in mesh.triangles.iter().enumerate() {
        if signed_area(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]) <= 0.0 {
            return Err(Error::InvertedTriangle(ti));
        }
    }
    Ok(Mesh {
        nodes,
        triangles: mesh.triangles.clone(),
        boundary_edges: mesh.boundary_edges.clone(),
        boundary_node: mesh.boundary_node.clone(),
    })
}
