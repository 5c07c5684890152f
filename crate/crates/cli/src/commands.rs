//! One function per subcommand. Each writes its report files into the output
//! directory and returns the core error, if any, for the driver to surface.

use std::path::{Path, PathBuf};

use grushin_core::assembly::assemble;
use grushin_core::eigensolver::{cluster, solve_lowest, Cluster, EigenSystem, SolveOptions};
use grushin_core::geometry::{
    boundary_geometry, build_domain, measure, resolution_to_h, triangulate, Domain, Mesh,
};
use grushin_core::identities::{
    criticality_residual, pohozaev_residual, scaling_check, ConstraintKind,
};
use grushin_core::oracle1d::rectangle_spectrum;
use grushin_core::perturbation::{make_field, PerturbationField};
use grushin_core::report::{report, write_csv, write_json};
use grushin_core::shape_derivative::{branch_slopes, derivative_report, hadamard_matrix, SymmetricFunctionSpec};
use grushin_core::suite::run_suite;
use grushin_core::{Error, Result};
use serde::Serialize;

use crate::config::RunConfig;

pub struct Context {
    pub config: RunConfig,
    /// config text with CLI overrides appended; hashed into every report
    pub config_text: String,
    pub out: PathBuf,
}

impl Context {
    fn solver_options(&self) -> SolveOptions {
        SolveOptions {
            tol: self.config.solver.tol,
            seed: self.config.solver.seed,
            max_iter: self.config.solver.max_iter,
            ..Default::default()
        }
    }

    fn setup(&self) -> Result<(Domain, Mesh)> {
        let domain = build_domain(&self.config.domain)?;
        let h = resolution_to_h(&domain, self.config.discretization.n);
        let mesh = triangulate(&domain, h)?;
        Ok((domain, mesh))
    }

    fn solved(&self) -> Result<(Domain, Mesh, EigenSystem)> {
        let (domain, mesh) = self.setup()?;
        let forms = assemble(&mesh, domain.s)?;
        let esys = solve_lowest(&forms, &mesh, self.config.discretization.m, &self.solver_options())?;
        Ok((domain, mesh, esys))
    }

    fn cluster_of(&self, esys: &EigenSystem, index: usize) -> Result<Cluster> {
        let clustering = cluster(esys, self.config.solver.cluster_rel_tol)?;
        clustering
            .clusters
            .iter()
            .find(|c| c.indices.contains(&index))
            .cloned()
            .ok_or_else(|| Error::InvalidArgument(format!("eigenvalue index {index} outside the computed range")))
    }

    fn named_field(&self, name: &Option<String>, domain: &Domain) -> Result<PerturbationField> {
        let name = name
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument("no perturbation field selected; set one in the config or pass --field".into()))?;
        let spec = self.config.field_spec(name).map_err(Error::InvalidArgument)?;
        make_field(spec, domain)
    }

    fn emit<T: Serialize>(&self, file: &str, identity: &str, data: T) -> Result<()> {
        write_json(&self.out.join(file), &report(identity, &self.config_text, data))
    }
}

fn write_index_csv(path: &Path, header: &str, rows: &[Vec<usize>]) -> Result<()> {
    use std::io::Write as _;
    let mut f = std::fs::File::create(path)
        .map_err(|e| Error::InvalidArgument(format!("io error: {e}")))?;
    let mut text = String::from(header);
    text.push('\n');
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        text.push_str(&line.join(","));
        text.push('\n');
    }
    f.write_all(text.as_bytes())
        .map_err(|e| Error::InvalidArgument(format!("io error: {e}")))
}

#[derive(Serialize)]
struct MeshSummary {
    h: f64,
    node_count: usize,
    triangle_count: usize,
    boundary_edge_count: usize,
    volume: f64,
    perimeter: f64,
}

pub fn mesh(ctx: &Context) -> Result<()> {
    let (domain, mesh) = ctx.setup()?;
    let (volume, perimeter) = measure(&mesh);
    let summary = MeshSummary {
        h: resolution_to_h(&domain, ctx.config.discretization.n),
        node_count: mesh.nodes.len(),
        triangle_count: mesh.triangles.len(),
        boundary_edge_count: mesh.boundary_edges.len(),
        volume,
        perimeter,
    };
    ctx.emit("mesh.json", "mesh-summary", summary)?;
    let rows: Vec<Vec<f64>> = mesh.nodes.iter().map(|&[x, y]| vec![x, y]).collect();
    write_csv(&ctx.out.join("nodes.csv"), &["x", "y"], &rows)?;
    let tris: Vec<Vec<usize>> = mesh.triangles.iter().map(|t| t.to_vec()).collect();
    write_index_csv(&ctx.out.join("triangles.csv"), "v0,v1,v2", &tris)?;
    let geo = boundary_geometry(&domain, &mesh)?;
    let edges: Vec<Vec<f64>> = geo
        .iter()
        .map(|g| vec![g.midpoint[0], g.midpoint[1], g.normal[0], g.normal[1], g.weight])
        .collect();
    write_csv(&ctx.out.join("boundary.csv"), &["mid_x", "mid_y", "n_x", "n_y", "weight"], &edges)?;
    Ok(())
}

#[derive(Serialize)]
struct SpectrumReport {
    eigenvalues: Vec<f64>,
    residuals: Vec<f64>,
    n: usize,
    m: usize,
}

pub fn solve(ctx: &Context) -> Result<()> {
    let (_, mesh, esys) = ctx.solved()?;
    ctx.emit(
        "eigenvalues.json",
        "dirichlet-spectrum",
        SpectrumReport {
            eigenvalues: esys.eigenvalues.clone(),
            residuals: esys.residuals.clone(),
            n: ctx.config.discretization.n,
            m: ctx.config.discretization.m,
        },
    )?;
    if ctx.config.solve.write_eigenvectors {
        let mut header: Vec<String> = vec!["x".into(), "y".into()];
        for k in 0..esys.vectors.len() {
            header.push(format!("v{}", k + 1));
        }
        let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
        let rows: Vec<Vec<f64>> = mesh
            .nodes
            .iter()
            .enumerate()
            .map(|(i, &[x, y])| {
                let mut row = vec![x, y];
                row.extend(esys.vectors.iter().map(|v| v[i]));
                row
            })
            .collect();
        write_csv(&ctx.out.join("eigenvectors.csv"), &header_refs, &rows)?;
    }
    Ok(())
}

pub fn oracle(ctx: &Context) -> Result<()> {
    use grushin_core::geometry::DomainSpec;
    let (a, b, l, s) = match ctx.config.domain {
        DomainSpec::Rectangle { x0, x1, y0, y1, s, .. } => (x0, x1, y1 - y0, s),
        _ => {
            return Err(Error::InvalidArgument(
                "the separation-of-variables oracle only covers rectangles".into(),
            ))
        }
    };
    let spectrum = rectangle_spectrum(a, b, l, s, ctx.config.discretization.m, ctx.config.oracle.tol)?;
    let rows: Vec<Vec<f64>> = spectrum
        .entries
        .iter()
        .map(|e| vec![e.value, e.n as f64, e.k as f64, e.richardson_error])
        .collect();
    write_csv(&ctx.out.join("oracle.csv"), &["lambda", "n", "k", "error"], &rows)?;
    ctx.emit("oracle.json", "oracle-spectrum", spectrum)
}

pub fn deriv(ctx: &Context) -> Result<()> {
    let (domain, mesh, esys) = ctx.solved()?;
    let sec = &ctx.config.derivative;
    let field = ctx.named_field(&sec.field, &domain)?;
    let cl = ctx.cluster_of(&esys, sec.index)?;
    let spec = SymmetricFunctionSpec { cluster: cl, tau: sec.tau };
    let rep = derivative_report(&esys, &spec, &field, &mesh, &domain, &sec.eps, &ctx.solver_options())?;
    ctx.emit("deriv.json", "shape-derivative", rep)
}

#[derive(Serialize)]
struct BranchReport {
    cluster: Cluster,
    matrix: Vec<Vec<f64>>,
    formula_slopes: Vec<f64>,
    fd_slopes: Vec<f64>,
    eps: f64,
}

pub fn branches(ctx: &Context) -> Result<()> {
    let (domain, mesh, esys) = ctx.solved()?;
    let sec = &ctx.config.branches;
    let field = ctx.named_field(&sec.field, &domain)?;
    let cl = ctx.cluster_of(&esys, sec.index)?;
    let mat = hadamard_matrix(&esys, &cl, &field, &mesh, &domain)?;
    let matrix: Vec<Vec<f64>> = (0..mat.nrows())
        .map(|i| (0..mat.ncols()).map(|j| mat[(i, j)]).collect())
        .collect();
    let (formula, fd) = branch_slopes(&domain, &mesh, &esys, &cl, &field, sec.eps, &ctx.solver_options())?;
    let rows: Vec<Vec<f64>> = formula.iter().zip(fd.iter()).map(|(&a, &b)| vec![a, b]).collect();
    write_csv(&ctx.out.join("branches.csv"), &["formula_slope", "fd_slope"], &rows)?;
    ctx.emit(
        "branches.json",
        "branch-slopes",
        BranchReport { cluster: cl, matrix, formula_slopes: formula, fd_slopes: fd, eps: sec.eps },
    )
}

#[derive(Serialize)]
struct PohozaevReport {
    index: usize,
    lambda: f64,
    boundary_integral: f64,
    residual: f64,
}

pub fn pohozaev(ctx: &Context) -> Result<()> {
    let (domain, mesh, esys) = ctx.solved()?;
    let index = ctx.config.pohozaev.index;
    let (lambda, boundary_integral, residual) = pohozaev_residual(&esys, index, &mesh, &domain)?;
    ctx.emit(
        "pohozaev.json",
        "rellich-pohozaev",
        PohozaevReport { index, lambda, boundary_integral, residual },
    )
}

#[derive(Serialize)]
struct ScalingReport {
    t: f64,
    m: usize,
    max_deviation: f64,
}

pub fn scaling(ctx: &Context) -> Result<()> {
    let (domain, mesh) = ctx.setup()?;
    let t = ctx.config.scaling.t;
    let m = ctx.config.discretization.m;
    let max_deviation = scaling_check(&domain, &mesh, t, m, &ctx.solver_options())?;
    ctx.emit("scaling.json", "scaling-law", ScalingReport { t, m, max_deviation })
}

pub fn critical(ctx: &Context) -> Result<()> {
    let (domain, mesh, esys) = ctx.solved()?;
    let constraint = match ctx.config.criticality.constraint.as_str() {
        "volume" => ConstraintKind::Volume,
        "perimeter" => ConstraintKind::Perimeter,
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown constraint '{other}' (expected 'volume' or 'perimeter')"
            )))
        }
    };
    let cl = ctx.cluster_of(&esys, 0)?;
    let rep = criticality_residual(&esys, &cl, &mesh, &domain, constraint)?;
    let rows: Vec<Vec<f64>> = rep
        .profile
        .iter()
        .map(|p| vec![p.arclength, p.g, p.curvature, if p.excluded { 1.0 } else { 0.0 }])
        .collect();
    write_csv(&ctx.out.join("profile.csv"), &["arclength", "g", "curvature", "excluded"], &rows)?;
    ctx.emit("critical.json", "shape-criticality", rep)
}

pub fn suite(ctx: &Context) -> Result<()> {
    let rep = run_suite();
    for c in &rep.criteria {
        println!(
            "criterion {:>2} [{}] {} ({:.1} s): {}",
            c.id,
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.runtime_seconds,
            c.details
        );
    }
    let all_pass = rep.all_pass;
    ctx.emit("suite.json", "acceptance-suite", rep)?;
    if !all_pass {
        return Err(Error::InvalidArgument("acceptance criteria failed; see suite.json".into()));
    }
    Ok(())
}
