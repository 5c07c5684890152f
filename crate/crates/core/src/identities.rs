//! Closed identities satisfied by the eigenpairs: the Rellich-Pohozaev
//! boundary identity, the anisotropic dilation scaling law, volume/perimeter
//! constraint differentials, and criticality residuals for the overdetermined
//! boundary conditions of volume- and perimeter-constrained critical shapes.

use serde::Serialize;

use crate::assembly::assemble;
use crate::eigensolver::{solve_lowest, Cluster, EigenSystem, Normalization, SolveOptions};
use crate::error::{Error, Result};
use crate::geometry::{boundary_geometry, Domain, Mesh};
use crate::perturbation::{map_mesh, FieldSpec, MapFamily, PerturbationField};
use crate::shape_derivative::{recovered_flux_trace, weighted_flux_integral};

/// Edges whose midpoint is closer to {x = 0} than this are excluded from
/// criticality statistics (the boundary conditions hold away from the
/// degenerate set).
const DEGENERATE_EDGE_TOL: f64 = 1e-10;

/// `lambda = 1/2 int (du/dn)^2 (n_x^2 + x^(2s) n_y^2) ((x, (1+s)y) . n) dsigma`
/// for a mass-normalized eigenfunction. Returns (lambda, boundary integral,
/// relative residual). Shares its boundary quadrature with the Hadamard
/// matrix, so the two agree to rounding for the dilation field.
pub fn pohozaev_residual(
    esys: &EigenSystem,
    index: usize,
    mesh: &Mesh,
    domain: &Domain,
) -> Result<(f64, f64, f64)> {
    if index >= esys.eigenvalues.len() {
        return Err(Error::InvalidArgument(format!(
            "eigenvalue index {index} out of range (have {})",
            esys.eigenvalues.len()
        )));
    }
    if esys.normalization != Normalization::MassOrthonormal {
        return Err(Error::InvalidArgument("identity requires mass-normalized eigenfunctions".into()));
    }
    let lam = esys.eigenvalues[index];
    let geo = boundary_geometry(domain, mesh)?;
    let traces = recovered_flux_trace(esys, mesh, domain)?;
    let dil = PerturbationField {
        spec: FieldSpec::DilationGenerator,
        s: domain.s,
        support_avoids_o: false,
    };
    let rhs = 0.5 * weighted_flux_integral(&traces[index], &traces[index], &geo, &dil, domain.s);
    Ok((lam, rhs, (lam - rhs).abs() / lam))
}

/// Worst relative deviation of `t^2 lambda_j(dilated mesh)` from `lambda_j`
/// over `j <= m`. Exact at the discrete level up to rounding: the dilated
/// stiffness and mass matrices are entrywise multiples of the originals.
pub fn scaling_check(domain: &Domain, mesh: &Mesh, t: f64, m: usize, opts: &SolveOptions) -> Result<f64> {
    if t <= 0.0 {
        return Err(Error::InvalidArgument(format!("dilation parameter must be positive, got {t}")));
    }
    let forms = assemble(mesh, domain.s)?;
    let base = solve_lowest(&forms, mesh, m, opts)?;
    let fam = MapFamily::Dilation { s: domain.s };
    let mapped = map_mesh(mesh, |z| fam.apply(t, z))?;
    let mforms = assemble(&mapped, domain.s)?;
    let msys = solve_lowest(&mforms, &mapped, m, opts)?;
    Ok(base
        .eigenvalues
        .iter()
        .zip(msys.eigenvalues.iter())
        .map(|(l0, lt)| (t * t * lt - l0).abs() / l0)
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    Volume,
    Perimeter,
}

/// Differential of the constraint functional in direction `field`:
/// `int (psi . n) dsigma` for volume, `int (psi . n) H dsigma` for perimeter.
///
/// The volume form uses chord normals and weights, which makes it exact for
/// the polygonal mesh volume (it matches finite differences of the mapped
/// mesh volume); the perimeter form uses the exact parametric normal,
/// curvature, and arclength.
pub fn constraint_differential(
    mesh: &Mesh,
    domain: &Domain,
    field: &PerturbationField,
    which: ConstraintKind,
) -> Result<f64> {
    match which {
        ConstraintKind::Volume => {
            let mut sum = 0.0;
            for e in &mesh.boundary_edges {
                let p0 = mesh.nodes[e.nodes[0]];
                let p1 = mesh.nodes[e.nodes[1]];
                let (dx, dy) = (p1[0] - p0[0], p1[1] - p0[1]);
                let mid = [0.5 * (p0[0] + p1[0]), 0.5 * (p0[1] + p1[1])];
                let psi = field.eval(mid);
                // unnormalized chord normal (dy, -dx) carries the edge length
                sum += psi[0] * dy - psi[1] * dx;
            }
            Ok(sum)
        }
        ConstraintKind::Perimeter => {
            let mut sum = 0.0;
            for e in &mesh.boundary_edges {
                let seg = domain
                    .segments
                    .get(e.segment)
                    .ok_or_else(|| Error::BadMesh(format!("edge tagged with unknown segment {}", e.segment)))?;
                let tm = 0.5 * (e.t0 + e.t1);
                let p = seg.point(tm);
                let n = seg.outward_normal(tm);
                let v = seg.velocity(tm);
                let w = v[0].hypot(v[1]) * (e.t1 - e.t0);
                let psi = field.eval(p);
                sum += (psi[0] * n[0] + psi[1] * n[1]) * seg.curvature(tm) * w;
            }
            Ok(sum)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfilePoint {
    /// midpoint arclength along the polygonal boundary
    pub arclength: f64,
    /// sum over the cluster of squared weighted normal derivatives
    pub g: f64,
    pub curvature: f64,
    /// true when the edge meets {x = 0} and is excluded from the statistics
    pub excluded: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalityReport {
    pub profile: Vec<ProfilePoint>,
    pub fit_constant: f64,
    /// scale-invariant RMS deviation of the profile from its fit
    pub deviation: f64,
    /// false when the fit is degenerate (perimeter constraint on a polygon
    /// with H = 0 everywhere)
    pub applicable: bool,
    pub constraint: ConstraintKind,
}

/// Weighted fit of a boundary profile against a constant (volume constraint)
/// or against `c H` (perimeter constraint). Entries are (g, H, weight).
pub fn fit_profile(entries: &[(f64, f64, f64)], which: ConstraintKind) -> (f64, f64, bool) {
    let wsum: f64 = entries.iter().map(|&(_, _, w)| w).sum();
    if wsum <= 0.0 {
        return (0.0, 0.0, false);
    }
    match which {
        ConstraintKind::Volume => {
            let c: f64 = entries.iter().map(|&(g, _, w)| g * w).sum::<f64>() / wsum;
            let rms = (entries.iter().map(|&(g, _, w)| (g - c).powi(2) * w).sum::<f64>() / wsum).sqrt();
            if c.abs() == 0.0 {
                return (c, 0.0, false);
            }
            (c, rms / c.abs(), true)
        }
        ConstraintKind::Perimeter => {
            let h2: f64 = entries.iter().map(|&(_, h, w)| h * h * w).sum();
            if h2 <= 1e-12 * wsum {
                return (0.0, 0.0, false);
            }
            let c: f64 = entries.iter().map(|&(g, h, w)| g * h * w).sum::<f64>() / h2;
            let rms = (entries.iter().map(|&(g, h, w)| (g - c * h).powi(2) * w).sum::<f64>() / wsum).sqrt();
            let gscale: f64 = entries.iter().map(|&(g, _, w)| g.abs() * w).sum::<f64>() / wsum;
            if gscale == 0.0 {
                return (c, 0.0, false);
            }
            (c, rms / gscale, true)
        }
    }
}

/// Residual of the overdetermined boundary condition for a critical shape:
/// the profile `g = sum_F (dv/dn)^2 (n_x^2 + x^(2s) n_y^2)` should be constant
/// (volume constraint) or proportional to the curvature (perimeter
/// constraint).
pub fn criticality_residual(
    esys: &EigenSystem,
    f: &Cluster,
    mesh: &Mesh,
    domain: &Domain,
    constraint: ConstraintKind,
) -> Result<CriticalityReport> {
    let geo = boundary_geometry(domain, mesh)?;
    let traces = recovered_flux_trace(esys, mesh, domain)?;
    let mut profile = Vec::with_capacity(geo.len());
    let mut entries = Vec::with_capacity(geo.len());
    let mut arc = 0.0;
    for (ei, g) in geo.iter().enumerate() {
        let val: f64 = f
            .indices
            .iter()
            .map(|&l| {
                let t = traces[l][ei];
                t * t
            })
            .sum::<f64>()
            * (g.normal[0] * g.normal[0]
                + g.midpoint[0].powi(2 * domain.s as i32) * g.normal[1] * g.normal[1]);
        let excluded = g.midpoint[0].abs() < DEGENERATE_EDGE_TOL;
        profile.push(ProfilePoint {
            arclength: arc + 0.5 * g.weight,
            g: val,
            curvature: g.curvature,
            excluded,
        });
        if !excluded {
            entries.push((val, g.curvature, g.weight));
        }
        arc += g.weight;
    }
    let (fit_constant, deviation, applicable) = fit_profile(&entries, constraint);
    Ok(CriticalityReport { profile, fit_constant, deviation, applicable, constraint })
}

fn bessel_j0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for k in 1..200 {
        term *= -q / ((k * k) as f64);
        sum += term;
        if term.abs() < 1e-18 {
            break;
        }
    }
    sum
}

/// First Dirichlet eigenvalue of the classical Laplacian on a disk of the
/// given radius: the square of the first zero of the Bessel function J0,
/// scaled by the radius.
pub fn classical_disk_lambda1(radius: f64) -> f64 {
    let (mut lo, mut hi) = (2.0f64, 3.0f64);
    debug_assert!(bessel_j0(lo) > 0.0 && bessel_j0(hi) < 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if bessel_j0(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let j01 = 0.5 * (lo + hi);
    (j01 / radius).powi(2)
}
