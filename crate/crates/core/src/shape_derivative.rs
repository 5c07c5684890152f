//! Shape derivatives of eigenvalues and of elementary symmetric functions of
//! an eigenvalue cluster, computed three independent ways: a volume integral
//! over the domain, a Hadamard boundary integral, and finite differences over
//! perturbed meshes sharing one connectivity. Also the branch-slope matrix
//! whose eigenvalues are the one-sided derivatives of the eigenvalue branches
//! splitting from a multiple eigenvalue.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::assembly::{assemble, element_mass, element_stiffness, p1_gradients};
use crate::eigensolver::{solve_lowest, Cluster, EigenSystem, Normalization, SolveOptions};
use crate::error::{Error, Result};
use crate::geometry::{boundary_geometry, Domain, EdgeGeometry, Mesh};
use crate::perturbation::{check_admissible, map_mesh, MapFamily, PerturbationField};
use crate::quadrature::TriangleRule;

#[derive(Debug, Clone)]
pub struct SymmetricFunctionSpec {
    pub cluster: Cluster,
    /// order of the elementary symmetric function, in [1, cluster size]
    pub tau: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeMode {
    VolumeForm,
    BoundaryForm,
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut v = 1.0f64;
    for i in 0..k {
        v = v * (n - i) as f64 / (i + 1) as f64;
    }
    v
}

/// e_tau of the given values.
pub fn elementary_symmetric(vals: &[f64], tau: usize) -> f64 {
    let mut e = vec![0.0f64; tau + 1];
    e[0] = 1.0;
    for &v in vals {
        for j in (1..=tau).rev() {
            e[j] += v * e[j - 1];
        }
    }
    e[tau]
}

fn prefactor(cluster_size: usize, tau: usize, lambda: f64, norm: Normalization) -> f64 {
    let binom = binomial(cluster_size - 1, tau - 1);
    match norm {
        Normalization::FormOrthonormal => -lambda.powi(tau as i32) * binom,
        Normalization::MassOrthonormal => -lambda.powi(tau as i32 - 1) * binom,
    }
}

/// Outward normal derivative of each eigenvector on each boundary edge, taken
/// from the constant gradient of the unique adjacent triangle and the exact
/// parametric normal at the edge midpoint. Outer index: eigenvector.
pub fn normal_derivative_trace(esys: &EigenSystem, mesh: &Mesh, domain: &Domain) -> Result<Vec<Vec<f64>>> {
    let adj = mesh.boundary_edge_triangles()?;
    let geo = boundary_geometry(domain, mesh)?;
    let mut out = Vec::with_capacity(esys.vectors.len());
    for v in &esys.vectors {
        let mut traces = Vec::with_capacity(mesh.boundary_edges.len());
        for (&ti, g) in adj.iter().zip(geo.iter()) {
            let tri = mesh.triangles[ti];
            let (_, grads) = p1_gradients(mesh.triangle_vertices(ti));
            let mut gx = 0.0;
            let mut gy = 0.0;
            for k in 0..3 {
                gx += v[tri[k]] * grads[k][0];
                gy += v[tri[k]] * grads[k][1];
            }
            traces.push(gx * g.normal[0] + gy * g.normal[1]);
        }
        out.push(traces);
    }
    Ok(out)
}

/// Normal derivative of each eigenvector on each boundary edge by variational
/// flux recovery: the conormal flux q with `int_Gamma q phi = a(u, phi) -
/// lambda (u, phi)` for boundary hat functions phi is found by solving the
/// boundary mass system, then divided by the weight `n_x^2 + x^(2s) n_y^2` at
/// the edge midpoint. Converges one order faster than the raw one-sided
/// element gradient, which pays off in every boundary-form quantity.
pub fn recovered_flux_trace(esys: &EigenSystem, mesh: &Mesh, domain: &Domain) -> Result<Vec<Vec<f64>>> {
    let geo = boundary_geometry(domain, mesh)?;
    let n_nodes = mesh.nodes.len();
    let mut bidx = vec![usize::MAX; n_nodes];
    let mut count = 0usize;
    for (i, &b) in mesh.boundary_node.iter().enumerate() {
        if b {
            bidx[i] = count;
            count += 1;
        }
    }
    // boundary mass matrix over chord-parametrized hat functions
    let mut bmass: DMatrix<f64> = DMatrix::zeros(count, count);
    for (edge, g) in mesh.boundary_edges.iter().zip(geo.iter()) {
        let (a, b) = (bidx[edge.nodes[0]], bidx[edge.nodes[1]]);
        let len = g.weight;
        bmass[(a, a)] += len / 3.0;
        bmass[(b, b)] += len / 3.0;
        bmass[(a, b)] += len / 6.0;
        bmass[(b, a)] += len / 6.0;
    }
    // residual of each eigenpair against boundary hat functions
    let mut rhs: DMatrix<f64> = DMatrix::zeros(count, esys.vectors.len());
    for ti in 0..mesh.triangles.len() {
        let tri = mesh.triangles[ti];
        if tri.iter().all(|&v| !mesh.boundary_node[v]) {
            continue;
        }
        let ke = element_stiffness(mesh.triangle_vertices(ti), domain.s);
        let me = element_mass(mesh.triangle_vertices(ti));
        for (col, (v, &lam)) in esys.vectors.iter().zip(esys.eigenvalues.iter()).enumerate() {
            for i in 0..3 {
                if !mesh.boundary_node[tri[i]] {
                    continue;
                }
                let mut r = 0.0;
                for j in 0..3 {
                    r += (ke[i][j] - lam * me[i][j]) * v[tri[j]];
                }
                rhs[(bidx[tri[i]], col)] += r;
            }
        }
    }
    let chol = bmass
        .cholesky()
        .ok_or_else(|| Error::InvalidArgument("boundary mass matrix not positive definite".into()))?;
    let q = chol.solve(&rhs);
    let mut out = Vec::with_capacity(esys.vectors.len());
    for col in 0..esys.vectors.len() {
        let mut traces = Vec::with_capacity(mesh.boundary_edges.len());
        for (edge, g) in mesh.boundary_edges.iter().zip(geo.iter()) {
            let q_mid = 0.5 * (q[(bidx[edge.nodes[0]], col)] + q[(bidx[edge.nodes[1]], col)]);
            let ng2 = g.normal[0] * g.normal[0]
                + g.midpoint[0].powi(2 * domain.s as i32) * g.normal[1] * g.normal[1];
            // edges inside the degenerate set carry no flux weight; their
            // trace value never enters a weighted integral
            traces.push(if ng2 > 1e-14 { q_mid / ng2 } else { 0.0 });
        }
        out.push(traces);
    }
    Ok(out)
}

/// `sum_edges (psi . n) t_i t_j (n_x^2 + x^(2s) n_y^2) w` over boundary edges:
/// the shared quadrature for every boundary-form quantity, so that exact
/// identities between them hold to rounding.
pub fn weighted_flux_integral(
    trace_i: &[f64],
    trace_j: &[f64],
    geo: &[EdgeGeometry],
    field: &PerturbationField,
    s: u32,
) -> f64 {
    geo.iter()
        .zip(trace_i.iter().zip(trace_j.iter()))
        .map(|(g, (&ti, &tj))| {
            let psi = field.eval(g.midpoint);
            let psi_n = psi[0] * g.normal[0] + psi[1] * g.normal[1];
            let ng2 = g.normal[0] * g.normal[0]
                + g.midpoint[0].powi(2 * s as i32) * g.normal[1] * g.normal[1];
            psi_n * ti * tj * ng2 * g.weight
        })
        .sum()
}

fn regularity_gate(domain: &Domain, field: &PerturbationField) -> Result<()> {
    if domain.s >= 1 && domain.touches_degenerate && !field.is_zero() && !field.support_avoids_o {
        return Err(Error::RegularityGate);
    }
    Ok(())
}

/// Boundary-form branch matrix for the cluster: entry (i, j) is
/// `-int (psi . n) dv_i/dn dv_j/dn (n_x^2 + x^(2s) n_y^2) dsigma`, scaled by
/// the cluster eigenvalue under form normalization. Its eigenvalues are the
/// one-sided parameter derivatives of the eigenvalue branches of the family
/// `id + eps psi`.
pub fn hadamard_matrix(
    esys: &EigenSystem,
    f: &Cluster,
    field: &PerturbationField,
    mesh: &Mesh,
    domain: &Domain,
) -> Result<DMatrix<f64>> {
    regularity_gate(domain, field)?;
    let m = f.indices.len();
    let geo = boundary_geometry(domain, mesh)?;
    let traces = recovered_flux_trace(esys, mesh, domain)?;
    let scale = match esys.normalization {
        Normalization::MassOrthonormal => 1.0,
        Normalization::FormOrthonormal => f.common_value,
    };
    let mut mat = DMatrix::zeros(m, m);
    for (a, &i) in f.indices.iter().enumerate() {
        for (b, &j) in f.indices.iter().enumerate().skip(a) {
            let v = -scale * weighted_flux_integral(&traces[i], &traces[j], &geo, field, domain.s);
            mat[(a, b)] = v;
            mat[(b, a)] = v;
        }
    }
    Ok(mat)
}

/// Directional shape derivative of `e_tau` of the cluster eigenvalues in
/// direction `field`, by either the volume-integral or the boundary-integral
/// representation.
pub fn d_lambda(
    esys: &EigenSystem,
    spec: &SymmetricFunctionSpec,
    field: &PerturbationField,
    mesh: &Mesh,
    domain: &Domain,
    mode: DerivativeMode,
) -> Result<f64> {
    let m = spec.cluster.indices.len();
    if spec.tau == 0 || spec.tau > m {
        return Err(Error::InvalidArgument(format!("tau = {} out of range for cluster of size {m}", spec.tau)));
    }
    if field.is_zero() {
        return Ok(0.0);
    }
    let lam = spec.cluster.common_value;
    let pref = prefactor(m, spec.tau, lam, esys.normalization);
    match mode {
        DerivativeMode::BoundaryForm => {
            regularity_gate(domain, field)?;
            let geo = boundary_geometry(domain, mesh)?;
            let traces = recovered_flux_trace(esys, mesh, domain)?;
            let mut sum = 0.0;
            for &l in &spec.cluster.indices {
                sum += weighted_flux_integral(&traces[l], &traces[l], &geo, field, domain.s);
            }
            Ok(pref * sum)
        }
        DerivativeMode::VolumeForm => {
            let s = domain.s;
            let rule = TriangleRule::collapsed_gauss(s as usize + 6);
            let mut sum = 0.0;
            for ti in 0..mesh.triangles.len() {
                let tri = mesh.triangles[ti];
                let verts = mesh.triangle_vertices(ti);
                let (_, grads) = p1_gradients(verts);
                for &l in &spec.cluster.indices {
                    let v = &esys.vectors[l];
                    let mut gx = 0.0;
                    let mut gy = 0.0;
                    for k in 0..3 {
                        gx += v[tri[k]] * grads[k][0];
                        gy += v[tri[k]] * grads[k][1];
                    }
                    let v0 = v[tri[0]];
                    let p0 = verts[0];
                    sum += rule.integrate(verts, |x, y| {
                        let w = x.powi(2 * s as i32);
                        let vv = v0 + gx * (x - p0[0]) + gy * (y - p0[1]);
                        let grad_g2 = gx * gx + w * gy * gy;
                        let j = field.jacobian([x, y]);
                        let div = j[0][0] + j[1][1];
                        let mut t = (lam * vv * vv - grad_g2) * div
                            + 2.0 * j[0][0] * gx * gx
                            + 2.0 * (j[0][1] * w + j[1][0]) * gx * gy
                            + 2.0 * j[1][1] * w * gy * gy;
                        if s >= 1 {
                            let psi = field.eval([x, y]);
                            t -= 2.0 * s as f64 * x.powi(2 * s as i32 - 1) * gy * gy * psi[0];
                        }
                        t
                    });
                }
            }
            Ok(pref * sum)
        }
    }
}

/// One finite-difference sweep of `e_tau` over the map family `id + eps psi`.
#[derive(Debug, Clone, Serialize)]
pub struct FdReport {
    /// (eps, central difference) per requested step, eps ascending
    pub samples: Vec<(f64, f64)>,
    /// step-extrapolated derivative from the two smallest steps
    pub richardson: f64,
    /// set when the cluster stops being separated from its neighbors
    /// somewhere in the sweep, making sorted-index tracking ambiguous
    pub crossing_flag: bool,
}

fn lambda_of_mapped(
    mesh: &Mesh,
    domain: &Domain,
    family: &MapFamily,
    param: f64,
    count: usize,
    opts: &SolveOptions,
) -> Result<Vec<f64>> {
    let mapped = map_mesh(mesh, |z| family.apply(param, z))?;
    let forms = assemble(&mapped, domain.s)?;
    Ok(solve_lowest(&forms, &mapped, count, opts)?.eigenvalues)
}

/// Central differences of `e_tau` of the cluster eigenvalues over the family
/// `id + eps psi`, one per step in `eps_list`, all on meshes sharing the base
/// connectivity so discretization error largely cancels.
pub fn fd_derivative(
    domain: &Domain,
    mesh: &Mesh,
    spec: &SymmetricFunctionSpec,
    field: &PerturbationField,
    eps_list: &[f64],
    opts: &SolveOptions,
) -> Result<FdReport> {
    if eps_list.len() < 2 {
        return Err(Error::InvalidArgument("need at least two distinct FD steps".into()));
    }
    let mut eps_sorted: Vec<f64> = eps_list.to_vec();
    eps_sorted.sort_by(f64::total_cmp);
    eps_sorted.dedup();
    if eps_sorted.len() < 2 || eps_sorted[0] <= 0.0 {
        return Err(Error::InvalidArgument("FD steps must be distinct and positive".into()));
    }
    if field.is_zero() {
        return Ok(FdReport {
            samples: eps_sorted.iter().map(|&e| (e, 0.0)).collect(),
            richardson: 0.0,
            crossing_flag: false,
        });
    }
    let family = MapFamily::Offset { field: field.clone() };
    let hi = *spec.cluster.indices.last().unwrap();
    let count = hi + 2;
    let spread_tol = |vals: &[f64]| -> bool {
        // cluster separated from neighbors by more than its internal spread
        let lo = spec.cluster.indices[0];
        let members = &vals[lo..=hi];
        let spread = members.last().unwrap() - members.first().unwrap();
        let gap_above = vals[hi + 1] - members.last().unwrap();
        let gap_below = if lo == 0 { f64::INFINITY } else { members.first().unwrap() - vals[lo - 1] };
        gap_above > spread.max(1e-12 * vals[hi]) && gap_below > spread.max(1e-12 * vals[hi])
    };
    let mut samples = Vec::with_capacity(eps_sorted.len());
    let mut crossing_flag = false;
    for &eps in &eps_sorted {
        for signed in [eps, -eps] {
            let rep = check_admissible(&family, signed, domain, 200)?;
            if !rep.pass {
                return Err(Error::BadField(
                    rep.first_violation.unwrap_or_else(|| "map family not admissible".into()),
                ));
            }
        }
        let plus = lambda_of_mapped(mesh, domain, &family, eps, count, opts)?;
        let minus = lambda_of_mapped(mesh, domain, &family, -eps, count, opts)?;
        if !spread_tol(&plus) || !spread_tol(&minus) {
            crossing_flag = true;
        }
        let lo = spec.cluster.indices[0];
        let ep = elementary_symmetric(&plus[lo..=hi], spec.tau);
        let em = elementary_symmetric(&minus[lo..=hi], spec.tau);
        samples.push((eps, (ep - em) / (2.0 * eps)));
    }
    // central differences carry an O(eps^2) error: eliminate it from the two
    // smallest steps
    let (e1, d1) = samples[0];
    let (e2, d2) = samples[1];
    let richardson = (e2 * e2 * d1 - e1 * e1 * d2) / (e2 * e2 - e1 * e1);
    Ok(FdReport { samples, richardson, crossing_flag })
}

/// Branch slopes of the eigenvalue branches splitting from the cluster under
/// `id + eps psi`: by the boundary-form matrix (mass normalization) and by
/// one-sided finite differences, both ascending.
pub fn branch_slopes(
    domain: &Domain,
    mesh: &Mesh,
    esys: &EigenSystem,
    f: &Cluster,
    field: &PerturbationField,
    eps: f64,
    opts: &SolveOptions,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if esys.normalization != Normalization::MassOrthonormal {
        return Err(Error::InvalidArgument("branch slopes expect mass-normalized eigenvectors".into()));
    }
    let mat = hadamard_matrix(esys, f, field, mesh, domain)?;
    let mut formula: Vec<f64> = mat.symmetric_eigen().eigenvalues.iter().cloned().collect();
    formula.sort_by(f64::total_cmp);
    let fd = if field.is_zero() {
        vec![0.0; f.indices.len()]
    } else {
        let family = MapFamily::Offset { field: field.clone() };
        let hi = *f.indices.last().unwrap();
        let count = hi + 1;
        let l1 = lambda_of_mapped(mesh, domain, &family, eps, count, opts)?;
        let l2 = lambda_of_mapped(mesh, domain, &family, 2.0 * eps, count, opts)?;
        let mut fd: Vec<f64> = f
            .indices
            .iter()
            .map(|&i| {
                // branches emanate from the cluster's common value; using the
                // individual discrete eigenvalue instead would fold the O(h^2)
                // splitting of the cluster into the slope as an O(h^2 / eps)
                // error
                let d1 = (l1[i] - f.common_value) / eps;
                let d2 = (l2[i] - f.common_value) / (2.0 * eps);
                2.0 * d1 - d2
            })
            .collect();
        fd.sort_by(f64::total_cmp);
        fd
    };
    Ok((formula, fd))
}

/// All derivative views of one symmetric function in one direction.
#[derive(Debug, Clone, Serialize)]
pub struct DerivativeReport {
    pub volume_form: f64,
    /// absent when the boundary representation is refused by the regularity
    /// gate near the degenerate set
    pub boundary_form: Option<f64>,
    pub fd: FdReport,
    pub branch_matrix: Vec<Vec<f64>>,
    pub branch_slopes: Vec<f64>,
}

pub fn derivative_report(
    esys: &EigenSystem,
    spec: &SymmetricFunctionSpec,
    field: &PerturbationField,
    mesh: &Mesh,
    domain: &Domain,
    eps_list: &[f64],
    opts: &SolveOptions,
) -> Result<DerivativeReport> {
    let volume_form = d_lambda(esys, spec, field, mesh, domain, DerivativeMode::VolumeForm)?;
    let boundary_form = match d_lambda(esys, spec, field, mesh, domain, DerivativeMode::BoundaryForm) {
        Ok(v) => Some(v),
        Err(Error::RegularityGate) => None,
        Err(e) => return Err(e),
    };
    let fd = fd_derivative(domain, mesh, spec, field, eps_list, opts)?;
    let (branch_slopes, branch_matrix) = match hadamard_matrix(esys, &spec.cluster, field, mesh, domain) {
        Ok(mat) => {
            let rows = (0..mat.nrows())
                .map(|i| (0..mat.ncols()).map(|j| mat[(i, j)]).collect())
                .collect::<Vec<Vec<f64>>>();
            let mut v: Vec<f64> = mat.symmetric_eigen().eigenvalues.iter().cloned().collect();
            v.sort_by(f64::total_cmp);
            (v, rows)
        }
        Err(Error::RegularityGate) => (vec![], vec![]),
        Err(e) => return Err(e),
    };
    Ok(DerivativeReport { volume_form, boundary_form, fd, branch_matrix, branch_slopes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble;
    use crate::eigensolver::{cluster as make_clusters, renormalize};
    use crate::geometry::{build_domain, measure, triangulate, DomainSpec};
    use crate::perturbation::{make_field, FieldSpec};
    use approx::assert_relative_eq;

    fn rect_setup(n: usize, s: u32, m: usize) -> (Domain, Mesh, EigenSystem) {
        let d = build_domain(&DomainSpec::Rectangle {
            x0: 0.2, x1: 1.2, y0: 0.0, y1: 1.0, s, o_margin: None,
        })
        .unwrap();
        let mesh = triangulate(&d, 1.0 / n as f64).unwrap();
        let forms = assemble(&mesh, s).unwrap();
        let esys = solve_lowest(&forms, &mesh, m, &SolveOptions::default()).unwrap();
        (d, mesh, esys)
    }

    fn interpolate(mesh: &Mesh, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        mesh.nodes.iter().map(|&[x, y]| f(x, y)).collect()
    }

    fn fake_esys(vectors: Vec<Vec<f64>>) -> EigenSystem {
        let n = vectors.len();
        EigenSystem {
            eigenvalues: vec![1.0; n],
            vectors,
            normalization: Normalization::MassOrthonormal,
            residuals: vec![0.0; n],
        }
    }

    #[test]
    fn trace_of_linear_function_is_normal_component() {
        let (d, mesh, _) = rect_setup(8, 1, 1);
        let esys = fake_esys(vec![interpolate(&mesh, |x, _| x)]);
        let geo = boundary_geometry(&d, &mesh).unwrap();
        let traces = normal_derivative_trace(&esys, &mesh, &d).unwrap();
        for (t, g) in traces[0].iter().zip(geo.iter()) {
            assert_relative_eq!(*t, g.normal[0], epsilon = 1e-13);
        }
    }

    #[test]
    fn divergence_theorem_on_quadratic() {
        // u = x^2 + y^2: boundary flux of grad u approximates 4 |Omega|
        let (d, mesh, _) = rect_setup(48, 0, 1);
        let esys = fake_esys(vec![interpolate(&mesh, |x, y| x * x + y * y)]);
        let geo = boundary_geometry(&d, &mesh).unwrap();
        let traces = normal_derivative_trace(&esys, &mesh, &d).unwrap();
        let flux: f64 = traces[0].iter().zip(geo.iter()).map(|(t, g)| t * g.weight).sum();
        let (area, _) = measure(&mesh);
        assert!((flux - 4.0 * area).abs() < 0.1, "flux {flux} vs {}", 4.0 * area);
    }

    #[test]
    fn disk_ground_state_trace_is_constant() {
        let d = build_domain(&DomainSpec::Disk { center: [2.0, 0.0], radius: 1.0, s: 0, o_margin: None }).unwrap();
        let mesh = triangulate(&d, 2.0 / 48.0).unwrap();
        let forms = assemble(&mesh, 0).unwrap();
        let esys = solve_lowest(&forms, &mesh, 1, &SolveOptions::default()).unwrap();
        let traces = normal_derivative_trace(&esys, &mesh, &d).unwrap();
        let geo = boundary_geometry(&d, &mesh).unwrap();
        let total_w: f64 = geo.iter().map(|g| g.weight).sum();
        let mean: f64 = traces[0].iter().zip(geo.iter()).map(|(t, g)| t * g.weight).sum::<f64>() / total_w;
        let var: f64 = traces[0]
            .iter()
            .zip(geo.iter())
            .map(|(t, g)| (t - mean).powi(2) * g.weight)
            .sum::<f64>()
            / total_w;
        let cov = var.sqrt() / mean.abs();
        assert!(cov < 0.02, "coefficient of variation {cov}");
    }

    #[test]
    fn zero_field_gives_zero_everything() {
        let (d, mesh, esys) = rect_setup(8, 1, 1);
        let zero = make_field(FieldSpec::Zero, &d).unwrap();
        let cl = make_clusters(&esys, 1e-6).unwrap();
        let spec = SymmetricFunctionSpec { cluster: cl.clusters[0].clone(), tau: 1 };
        let mat = hadamard_matrix(&esys, &spec.cluster, &zero, &mesh, &d).unwrap();
        assert_eq!(mat[(0, 0)], 0.0);
        assert_eq!(d_lambda(&esys, &spec, &zero, &mesh, &d, DerivativeMode::VolumeForm).unwrap(), 0.0);
        let fd = fd_derivative(&d, &mesh, &spec, &zero, &[1e-3, 2e-3], &SolveOptions::default()).unwrap();
        assert!(fd.samples.iter().all(|&(_, v)| v == 0.0));
    }

    #[test]
    fn dilation_boundary_derivative_is_minus_two_lambda() {
        let (d, mesh, esys) = rect_setup(64, 1, 1);
        let fam = MapFamily::Dilation { s: 1 };
        let psi = fam.generator();
        let cl = make_clusters(&esys, 1e-6).unwrap();
        let mat = hadamard_matrix(&esys, &cl.clusters[0], &psi, &mesh, &d).unwrap();
        let lam = esys.eigenvalues[0];
        assert!((mat[(0, 0)] + 2.0 * lam).abs() / (2.0 * lam) < 0.01, "{} vs {}", mat[(0, 0)], -2.0 * lam);
    }

    #[test]
    fn dilation_volume_derivative_is_minus_two_lambda() {
        let (d, mesh, esys) = rect_setup(48, 1, 1);
        let fam = MapFamily::Dilation { s: 1 };
        let psi = fam.generator();
        let cl = make_clusters(&esys, 1e-6).unwrap();
        let spec = SymmetricFunctionSpec { cluster: cl.clusters[0].clone(), tau: 1 };
        let v = d_lambda(&esys, &spec, &psi, &mesh, &d, DerivativeMode::VolumeForm).unwrap();
        let lam = esys.eigenvalues[0];
        assert!((v + 2.0 * lam).abs() / (2.0 * lam) < 0.01, "{v} vs {}", -2.0 * lam);
    }

    #[test]
    fn volume_and_boundary_forms_agree() {
        let (d, mesh, esys) = rect_setup(64, 1, 1);
        let psi = make_field(
            FieldSpec::SplitPolynomial { coeffs_x: vec![0.0, 1.0, 0.5], coeffs_y: vec![0.1, -0.3] },
            &d,
        )
        .unwrap();
        let cl = make_clusters(&esys, 1e-6).unwrap();
        let spec = SymmetricFunctionSpec { cluster: cl.clusters[0].clone(), tau: 1 };
        let v = d_lambda(&esys, &spec, &psi, &mesh, &d, DerivativeMode::VolumeForm).unwrap();
        let b = d_lambda(&esys, &spec, &psi, &mesh, &d, DerivativeMode::BoundaryForm).unwrap();
        let scale = v.abs().max(esys.eigenvalues[0]);
        assert!((v - b).abs() / scale < 0.02, "volume {v} vs boundary {b}");
    }

    #[test]
    fn derivative_is_linear_in_the_field() {
        let (d, mesh, esys) = rect_setup(16, 1, 1);
        let p1 = make_field(
            FieldSpec::SplitPolynomial { coeffs_x: vec![0.0, 1.0], coeffs_y: vec![0.2] },
            &d,
        )
        .unwrap();
        let p2 = make_field(
            FieldSpec::SplitPolynomial { coeffs_x: vec![0.0, 0.0, 1.0], coeffs_y: vec![0.0, -1.0] },
            &d,
        )
        .unwrap();
        let combo = make_field(
            FieldSpec::SplitPolynomial {
                coeffs_x: vec![0.0, 2.0, -3.0],
                coeffs_y: vec![0.4, 3.0],
            },
            &d,
        )
        .unwrap();
        let cl = make_clusters(&esys, 1e-6).unwrap();
        let spec = SymmetricFunctionSpec { cluster: cl.clusters[0].clone(), tau: 1 };
        for mode in [DerivativeMode::VolumeForm, DerivativeMode::BoundaryForm] {
            let d1 = d_lambda(&esys, &spec, &p1, &mesh, &d, mode).unwrap();
            let d2 = d_lambda(&esys, &spec, &p2, &mesh, &d, mode).unwrap();
            let dc = d_lambda(&esys, &spec, &combo, &mesh, &d, mode).unwrap();
            // combo = 2 p1 - 3 p2
            assert_relative_eq!(dc, 2.0 * d1 - 3.0 * d2, max_relative = 1e-8);
        }
    }

    #[test]
    fn form_and_mass_matrices_share_eigenvalues() {
        let (d, mesh, esys) = rect_setup(24, 1, 3);
        let cl = make_clusters(&esys, 1e-6).unwrap();
        let forms = assemble(&mesh, 1).unwrap();
        let fesys = renormalize(&esys, &cl, &forms, Normalization::FormOrthonormal).unwrap();
        let fam = MapFamily::Dilation { s: 1 };
        let psi = fam.generator();
        let f0 = &cl.clusters[0];
        let m_mass = hadamard_matrix(&esys, f0, &psi, &mesh, &d).unwrap();
        let m_form = hadamard_matrix(&fesys, f0, &psi, &mesh, &d).unwrap();
        assert_relative_eq!(m_mass[(0, 0)], m_form[(0, 0)], max_relative = 1e-8);
    }

    #[test]
    fn fd_dilation_matches_analytic_scaling() {
        // lambda(eps) = (1 + eps)^-2 lambda, so the central difference at
        // small eps is -2 lambda up to O(eps^2)
        let (d, mesh, esys) = rect_setup(16, 1, 1);
        let fam = MapFamily::Dilation { s: 1 };
        let psi = fam.generator();
        let cl = make_clusters(&esys, 1e-6).unwrap();
        let spec = SymmetricFunctionSpec { cluster: cl.clusters[0].clone(), tau: 1 };
        let opts = SolveOptions { tol: 1e-12, ..Default::default() };
        let fd = fd_derivative(&d, &mesh, &spec, &psi, &[1e-3, 2e-3], &opts).unwrap();
        let lam = esys.eigenvalues[0];
        assert_relative_eq!(fd.richardson, -2.0 * lam, max_relative = 1e-6);
        assert!(!fd.crossing_flag);
    }

    #[test]
    fn fd_error_decays_quadratically() {
        let (d, mesh, esys) = rect_setup(12, 1, 1);
        let fam = MapFamily::Dilation { s: 1 };
        let psi = fam.generator();
        let cl = make_clusters(&esys, 1e-6).unwrap();
        let spec = SymmetricFunctionSpec { cluster: cl.clusters[0].clone(), tau: 1 };
        let opts = SolveOptions::default();
        let eps = [5e-3, 1e-2, 2e-2, 4e-2];
        let fd = fd_derivative(&d, &mesh, &spec, &psi, &eps, &opts).unwrap();
        let exact = -2.0 * esys.eigenvalues[0];
        let errs: Vec<f64> = fd.samples.iter().map(|&(_, v)| (v - exact).abs()).collect();
        // log-log slope over the sweep
        let n = eps.len();
        let lx: Vec<f64> = fd.samples.iter().map(|&(e, _)| e.ln()).collect();
        let ly: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
        let mx = lx.iter().sum::<f64>() / n as f64;
        let my = ly.iter().sum::<f64>() / n as f64;
        let slope = lx
            .iter()
            .zip(ly.iter())
            .map(|(x, y)| (x - mx) * (y - my))
            .sum::<f64>()
            / lx.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        assert!((1.7..=2.3).contains(&slope), "slope {slope}");
    }

    #[test]
    fn square_double_eigenvalue_branch_slopes() {
        // (0, pi)^2 at s = 0, cluster {lambda_2, lambda_3} = 5, psi = (x, 0):
        // analytic branches j^2/(1+eps)^2 + k^2 have slopes -2 j^2, so the
        // pair splits with slopes {-8, -2}
        let pi = std::f64::consts::PI;
        let d = build_domain(&DomainSpec::Rectangle { x0: 0.0, x1: pi, y0: 0.0, y1: pi, s: 0, o_margin: None })
            .unwrap();
        let mesh = triangulate(&d, pi / 40.0).unwrap();
        let forms = assemble(&mesh, 0).unwrap();
        let esys = solve_lowest(&forms, &mesh, 4, &SolveOptions::default()).unwrap();
        // the structured mesh splits the double eigenvalue by O(h^2), about
        // 1.5e-3 relative at this resolution, so the clustering tolerance has
        // to sit above that
        let cl = make_clusters(&esys, 5e-3).unwrap();
        let pair = cl.clusters.iter().find(|c| c.indices == vec![1, 2]).unwrap();
        let psi = make_field(FieldSpec::AxisStretch { axis: crate::perturbation::Axis::X, amplitude: 1.0 }, &d)
            .unwrap();
        let opts = SolveOptions::default();
        let (formula, fd) = branch_slopes(&d, &mesh, &esys, pair, &psi, 2e-2, &opts).unwrap();
        for (got, want) in formula.iter().zip([-8.0, -2.0]) {
            assert!((got - want).abs() / want.abs() < 0.05, "formula {got} vs {want}");
        }
        for (got, want) in fd.iter().zip([-8.0, -2.0]) {
            assert!((got - want).abs() / want.abs() < 0.05, "fd {got} vs {want}");
        }
    }

    #[test]
    fn regularity_gate_refuses_degenerate_boundary_form() {
        let d = build_domain(&DomainSpec::Rectangle {
            x0: -1.0, x1: 1.0, y0: 0.0, y1: 1.0, s: 1, o_margin: None,
        })
        .unwrap();
        let mesh = triangulate(&d, 0.125).unwrap();
        let forms = assemble(&mesh, 1).unwrap();
        let esys = solve_lowest(&forms, &mesh, 1, &SolveOptions::default()).unwrap();
        let fam = MapFamily::Dilation { s: 1 };
        let psi = fam.generator();
        let cl = make_clusters(&esys, 1e-6).unwrap();
        let spec = SymmetricFunctionSpec { cluster: cl.clusters[0].clone(), tau: 1 };
        let err = d_lambda(&esys, &spec, &psi, &mesh, &d, DerivativeMode::BoundaryForm).unwrap_err();
        assert!(matches!(err, Error::RegularityGate));
        // the volume representation is still available
        let v = d_lambda(&esys, &spec, &psi, &mesh, &d, DerivativeMode::VolumeForm).unwrap();
        assert!((v + 2.0 * esys.eigenvalues[0]).abs() / (2.0 * esys.eigenvalues[0]) < 0.05);
    }

    #[test]
    fn bump_field_passes_the_gate_on_degenerate_domains() {
        let d = build_domain(&DomainSpec::Rectangle {
            x0: -1.0, x1: 1.0, y0: 0.0, y1: 1.0, s: 1, o_margin: Some(0.05),
        })
        .unwrap();
        let mesh = triangulate(&d, 0.125).unwrap();
        let forms = assemble(&mesh, 1).unwrap();
        let esys = solve_lowest(&forms, &mesh, 1, &SolveOptions::default()).unwrap();
        let psi = make_field(
            FieldSpec::BoundaryBump {
                support: crate::geometry::Rect { x0: 0.3, x1: 0.9, y0: 0.6, y1: 1.4 },
                direction: [0.0, 1.0],
                amplitude: 1.0,
            },
            &d,
        )
        .unwrap();
        let cl = make_clusters(&esys, 1e-6).unwrap();
        let spec = SymmetricFunctionSpec { cluster: cl.clusters[0].clone(), tau: 1 };
        let b = d_lambda(&esys, &spec, &psi, &mesh, &d, DerivativeMode::BoundaryForm).unwrap();
        let v = d_lambda(&esys, &spec, &psi, &mesh, &d, DerivativeMode::VolumeForm).unwrap();
        let scale = v.abs().max(esys.eigenvalues[0]);
        assert!((v - b).abs() / scale < 0.02, "volume {v} vs boundary {b}");
    }

    #[test]
    fn elementary_symmetric_basics() {
        assert_eq!(elementary_symmetric(&[2.0, 3.0, 4.0], 1), 9.0);
        assert_eq!(elementary_symmetric(&[2.0, 3.0, 4.0], 2), 26.0);
        assert_eq!(elementary_symmetric(&[2.0, 3.0, 4.0], 3), 24.0);
        assert_eq!(binomial(4, 2), 6.0);
        assert_eq!(binomial(5, 0), 1.0);
    }
}
