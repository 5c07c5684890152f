//! The acceptance battery: one function per criterion, each returning a
//! pass/fail verdict with measured values, plus a driver that runs them all.
//! The same battery backs both the integration test gate and the `suite`
//! command of the CLI.

use std::time::Instant;

use serde::Serialize;

use crate::assembly::assemble;
use crate::eigensolver::{cluster, solve_lowest, EigenSystem, SolveOptions};
use crate::error::Result;
use crate::geometry::{build_domain, resolution_to_h, triangulate, Domain, DomainSpec, Mesh, Rect};
use crate::identities::{
    classical_disk_lambda1, constraint_differential, criticality_residual, pohozaev_residual,
    scaling_check, ConstraintKind,
};
use crate::oracle1d::rectangle_spectrum;
use crate::perturbation::{make_field, Axis, FieldSpec, MapFamily, PerturbationField};
use crate::shape_derivative::{
    branch_slopes, d_lambda, fd_derivative, hadamard_matrix, DerivativeMode, SymmetricFunctionSpec,
};

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: usize,
    pub name: String,
    pub pass: bool,
    pub runtime_seconds: f64,
    /// measured values and thresholds, human-readable
    pub details: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub criteria: Vec<CriterionResult>,
    pub all_pass: bool,
    pub total_seconds: f64,
}

fn weighted_rect(s: u32) -> DomainSpec {
    DomainSpec::Rectangle { x0: 0.2, x1: 1.2, y0: 0.0, y1: 1.0, s, o_margin: None }
}

fn pi_square() -> DomainSpec {
    let pi = std::f64::consts::PI;
    DomainSpec::Rectangle { x0: 0.0, x1: pi, y0: 0.0, y1: pi, s: 0, o_margin: None }
}

fn unit_disk() -> DomainSpec {
    DomainSpec::Disk { center: [2.0, 0.0], radius: 1.0, s: 0, o_margin: None }
}

fn solved(spec: &DomainSpec, n: usize, m: usize, opts: &SolveOptions) -> Result<(Domain, Mesh, EigenSystem)> {
    let d = build_domain(spec)?;
    let h = resolution_to_h(&d, n);
    let mesh = triangulate(&d, h)?;
    let forms = assemble(&mesh, d.s)?;
    let esys = solve_lowest(&forms, &mesh, m, opts)?;
    Ok((d, mesh, esys))
}

fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(ly.iter()).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

fn criterion_1() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    let opts = SolveOptions::default();
    for s in [1u32, 2] {
        let d = build_domain(&weighted_rect(s))?;
        let mesh = triangulate(&d, resolution_to_h(&d, 16))?;
        for t in [0.5, 2.0] {
            let dev = scaling_check(&d, &mesh, t, 5, &opts)?;
            worst = worst.max(dev);
        }
    }
    Ok((worst <= 1e-10, format!("worst relative deviation {worst:.3e} (threshold 1e-10)")))
}

fn criterion_2() -> Result<(bool, String)> {
    let oracle = rectangle_spectrum(0.2, 1.2, 1.0, 1, 5, 1e-8)?;
    let opts = SolveOptions::default();
    let mut errs = Vec::new();
    let mut hs = Vec::new();
    for n in [32usize, 64, 128] {
        let (_, _, esys) = solved(&weighted_rect(1), n, 5, &opts)?;
        let err = esys
            .eigenvalues
            .iter()
            .zip(oracle.entries.iter())
            .map(|(l, e)| (l - e.value).abs() / e.value)
            .fold(0.0f64, f64::max);
        errs.push(err);
        hs.push(1.0 / n as f64);
    }
    let slope = loglog_slope(&hs, &errs);
    let fine = *errs.last().unwrap();
    let pass = fine <= 0.01 && (1.8..=2.2).contains(&slope);
    Ok((pass, format!("max relative gap at n=128: {fine:.3e} (threshold 1e-2); convergence slope {slope:.2} (window [1.8, 2.2])")))
}

fn criterion_3() -> Result<(bool, String)> {
    let (_, _, esys) = solved(&pi_square(), 64, 5, &SolveOptions::default())?;
    let exact = [2.0, 5.0, 5.0, 8.0, 10.0];
    let worst = esys
        .eigenvalues
        .iter()
        .zip(exact.iter())
        .map(|(l, e)| (l - e).abs() / e)
        .fold(0.0f64, f64::max);
    Ok((worst <= 0.005, format!("worst relative error {worst:.3e} vs classical square spectrum (threshold 5e-3)")))
}

fn bump_field(d: &Domain) -> Result<PerturbationField> {
    make_field(
        FieldSpec::BoundaryBump {
            support: Rect { x0: 0.5, x1: 1.0, y0: 0.6, y1: 1.4 },
            direction: [0.0, 1.0],
            amplitude: 1.0,
        },
        d,
    )
}

fn criterion_4() -> Result<(bool, String)> {
    let opts = SolveOptions::default();
    let (d, mesh, esys) = solved(&weighted_rect(1), 96, 1, &opts)?;
    let psi = bump_field(&d)?;
    let cl = cluster(&esys, 1e-6)?;
    let f = cl.clusters[0].clone();
    let had = hadamard_matrix(&esys, &f, &psi, &mesh, &d)?[(0, 0)];
    let spec = SymmetricFunctionSpec { cluster: f, tau: 1 };
    let fd = fd_derivative(&d, &mesh, &spec, &psi, &[1e-3, 2e-3, 4e-3, 8e-3], &opts)?;
    let disagreement = (had - fd.richardson).abs() / fd.richardson.abs();
    let eps: Vec<f64> = fd.samples.iter().map(|&(e, _)| e).collect();
    let errs: Vec<f64> = fd.samples.iter().map(|&(_, v)| (v - fd.richardson).abs().max(1e-14)).collect();
    let slope = loglog_slope(&eps, &errs);
    let pass = disagreement <= 0.02 && (1.7..=2.3).contains(&slope);
    Ok((pass, format!(
        "boundary formula {had:.6e} vs FD {:.6e}: disagreement {disagreement:.3e} (threshold 2e-2); FD error order {slope:.2} (window [1.7, 2.3])",
        fd.richardson
    )))
}

fn criterion_5() -> Result<(bool, String)> {
    let opts = SolveOptions::default();
    let mut parts = Vec::new();
    let mut pass = true;

    let (d, mesh, esys) = solved(&weighted_rect(1), 96, 1, &opts)?;
    let psi = bump_field(&d)?;
    let cl = cluster(&esys, 1e-6)?;
    let spec = SymmetricFunctionSpec { cluster: cl.clusters[0].clone(), tau: 1 };
    let v = d_lambda(&esys, &spec, &psi, &mesh, &d, DerivativeMode::VolumeForm)?;
    let b = d_lambda(&esys, &spec, &psi, &mesh, &d, DerivativeMode::BoundaryForm)?;
    let dis = (v - b).abs() / v.abs().max(esys.eigenvalues[0]);
    pass &= dis <= 0.02;
    parts.push(format!("rectangle away from x=0: volume {v:.6e} vs boundary {b:.6e}, disagreement {dis:.3e}"));

    let spec2 = DomainSpec::Rectangle { x0: -1.0, x1: 1.0, y0: 0.0, y1: 1.0, s: 1, o_margin: None };
    let (d2, mesh2, esys2) = solved(&spec2, 96, 1, &opts)?;
    let psi2 = make_field(
        FieldSpec::BoundaryBump {
            support: Rect { x0: 0.3, x1: 0.9, y0: 0.6, y1: 1.4 },
            direction: [0.0, 1.0],
            amplitude: 1.0,
        },
        &d2,
    )?;
    let cl2 = cluster(&esys2, 1e-6)?;
    let s2 = SymmetricFunctionSpec { cluster: cl2.clusters[0].clone(), tau: 1 };
    let v2 = d_lambda(&esys2, &s2, &psi2, &mesh2, &d2, DerivativeMode::VolumeForm)?;
    let b2 = d_lambda(&esys2, &s2, &psi2, &mesh2, &d2, DerivativeMode::BoundaryForm)?;
    let dis2 = (v2 - b2).abs() / v2.abs().max(esys2.eigenvalues[0]);
    pass &= dis2 <= 0.02;
    parts.push(format!("degenerate strip, field clear of O: volume {v2:.6e} vs boundary {b2:.6e}, disagreement {dis2:.3e}"));
    Ok((pass, format!("{} (threshold 2e-2 each)", parts.join("; "))))
}

fn criterion_6() -> Result<(bool, String)> {
    let opts = SolveOptions::default();
    let (d, mesh, esys) = solved(&weighted_rect(1), 64, 1, &opts)?;
    let fam = MapFamily::Dilation { s: 1 };
    let psi = fam.generator();
    let cl = cluster(&esys, 1e-6)?;
    let f = cl.clusters[0].clone();
    let spec = SymmetricFunctionSpec { cluster: f.clone(), tau: 1 };
    let lam = esys.eigenvalues[0];
    let v = d_lambda(&esys, &spec, &psi, &mesh, &d, DerivativeMode::VolumeForm)?;
    let dev = (v + 2.0 * lam).abs() / (2.0 * lam);
    let (_, rhs, _) = pohozaev_residual(&esys, 0, &mesh, &d)?;
    let had = hadamard_matrix(&esys, &f, &psi, &mesh, &d)?[(0, 0)];
    let exact = (rhs + 0.5 * had).abs() / lam;
    let pass = dev <= 0.01 && exact <= 1e-10;
    Ok((pass, format!(
        "dilation derivative {v:.6e} vs -2*lambda = {:.6e}: deviation {dev:.3e} (threshold 1e-2); same-quadrature identity residual {exact:.3e} (threshold 1e-10)",
        -2.0 * lam
    )))
}

fn criterion_7() -> Result<(bool, String)> {
    let opts = SolveOptions::default();
    let mut parts = Vec::new();
    let mut pass = true;
    for (label, spec) in [("weighted rectangle", weighted_rect(1)), ("classical disk", unit_disk())] {
        let mut res = Vec::new();
        for n in [128usize, 256] {
            let (d, mesh, esys) = solved(&spec, n, 1, &opts)?;
            let (_, _, r) = pohozaev_residual(&esys, 0, &mesh, &d)?;
            if matches!(spec, DomainSpec::Disk { .. }) && n == 128 {
                // independent cross-check of the disk eigenvalue itself
                let exact = classical_disk_lambda1(1.0);
                pass &= (esys.eigenvalues[0] - exact).abs() / exact < 0.01;
            }
            res.push(r);
        }
        pass &= res[0] < 0.02 && res[1] <= 0.6 * res[0];
        parts.push(format!("{label}: residual {:.3e} at n=128, {:.3e} at n=256", res[0], res[1]));
    }
    Ok((pass, format!("{} (thresholds: 2e-2 at n=128, ratio 0.6 under refinement)", parts.join("; "))))
}

fn criterion_8() -> Result<(bool, String)> {
    let opts = SolveOptions::default();
    let (d, mesh, esys) = solved(&pi_square(), 64, 4, &opts)?;
    // the discrete double eigenvalue splits by O(h^2), about 6e-4 relative at
    // n=64; cluster with comfortable headroom above that
    let cl = cluster(&esys, 5e-3)?;
    let pair = cl
        .clusters
        .iter()
        .find(|c| c.indices == vec![1, 2])
        .cloned()
        .ok_or_else(|| crate::Error::InvalidArgument("double eigenvalue 5 not clustered".into()))?;
    let psi = make_field(FieldSpec::AxisStretch { axis: Axis::X, amplitude: 1.0 }, &d)?;
    // the FD step must dominate the discrete splitting of the pair, otherwise
    // sorted-branch tracking mixes the two slopes
    let (formula, fd) = branch_slopes(&d, &mesh, &esys, &pair, &psi, 2e-2, &opts)?;
    let analytic = [-8.0, -2.0];
    let mut pass = true;
    for (got, want) in formula.iter().zip(analytic.iter()) {
        pass &= (got - want).abs() / want.abs() <= 0.05;
    }
    for (got, want) in fd.iter().zip(formula.iter()) {
        pass &= (got - want).abs() / want.abs() <= 0.05;
    }
    let spec2 = SymmetricFunctionSpec { cluster: pair, tau: 2 };
    let fd2 = fd_derivative(&d, &mesh, &spec2, &psi, &[1e-3, 2e-3], &opts)?;
    let dev2 = (fd2.richardson + 50.0).abs() / 50.0;
    pass &= dev2 <= 0.05;
    Ok((pass, format!(
        "branch-matrix slopes [{:.4}, {:.4}] vs analytic [-8, -2]; one-sided FD slopes [{:.4}, {:.4}]; second symmetric function FD {:.4} vs -50 (all within 5%)",
        formula[0], formula[1], fd[0], fd[1], fd2.richardson
    )))
}

fn criterion_9() -> Result<(bool, String)> {
    let opts = SolveOptions::default();
    let (dd, dmesh, desys) = solved(&unit_disk(), 128, 1, &opts)?;
    let dcl = cluster(&desys, 1e-6)?;
    let disk_rep = criticality_residual(&desys, &dcl.clusters[0], &dmesh, &dd, ConstraintKind::Volume)?;
    let (sd, smesh, sesys) = solved(&pi_square(), 64, 1, &opts)?;
    let scl = cluster(&sesys, 1e-6)?;
    let square_rep = criticality_residual(&sesys, &scl.clusters[0], &smesh, &sd, ConstraintKind::Volume)?;

    // Lagrange multiplier: -dLambda / dVolume across independent fields
    let (d2, m2, e2) = solved(&unit_disk(), 64, 1, &opts)?;
    let c2 = cluster(&e2, 1e-6)?;
    let spec = SymmetricFunctionSpec { cluster: c2.clusters[0].clone(), tau: 1 };
    let fields = vec![
        MapFamily::Dilation { s: 0 }.generator(),
        make_field(
            FieldSpec::SplitPolynomial { coeffs_x: vec![-2.0, 1.0], coeffs_y: vec![0.0, 1.0] },
            &d2,
        )?,
        make_field(
            FieldSpec::BoundaryBump {
                support: Rect { x0: 2.4, x1: 3.2, y0: -0.5, y1: 0.5 },
                direction: [1.0, 0.0],
                amplitude: 1.0,
            },
            &d2,
        )?,
    ];
    let mut ratios = Vec::new();
    for psi in &fields {
        let dl = d_lambda(&e2, &spec, psi, &m2, &d2, DerivativeMode::VolumeForm)?;
        let dv = constraint_differential(&m2, &d2, psi, ConstraintKind::Volume)?;
        ratios.push(-dl / dv);
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let spread = ratios
        .iter()
        .map(|r| (r - mean).abs() / mean.abs())
        .fold(0.0f64, f64::max);

    let pass = disk_rep.deviation < 0.02 && square_rep.deviation > 0.2 && spread <= 0.05;
    Ok((pass, format!(
        "disk deviation {:.3e} (threshold 2e-2), square deviation {:.3e} (threshold > 2e-1), multiplier spread {:.3e} over {} fields (threshold 5e-2)",
        disk_rep.deviation, square_rep.deviation, spread, ratios.len()
    )))
}

type Criterion = fn() -> Result<(bool, String)>;

const CRITERIA: [(usize, &str, Criterion); 9] = [
    (1, "discrete dilation scaling law", criterion_1),
    (2, "agreement with the 1D separation-of-variables oracle", criterion_2),
    (3, "classical spectrum recovered at s=0", criterion_3),
    (4, "boundary-form derivative vs finite differences", criterion_4),
    (5, "volume-form vs boundary-form derivative", criterion_5),
    (6, "dilation derivative and same-quadrature identity", criterion_6),
    (7, "eigenvalue as weighted boundary integral", criterion_7),
    (8, "branch slopes of a double eigenvalue", criterion_8),
    (9, "criticality deviation and Lagrange multiplier", criterion_9),
];

/// Run the full battery. Criterion 10 (the suite itself finishes in budget
/// and reports every check) is appended from the measured total.
pub fn run_suite() -> SuiteReport {
    let start = Instant::now();
    let mut criteria = Vec::new();
    for (id, name, f) in CRITERIA {
        let t0 = Instant::now();
        let (pass, details) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        criteria.push(CriterionResult {
            id,
            name: name.to_string(),
            pass,
            runtime_seconds: t0.elapsed().as_secs_f64(),
            details,
        });
    }
    let total = start.elapsed().as_secs_f64();
    let reported = criteria.len();
    criteria.push(CriterionResult {
        id: 10,
        name: "full battery within time budget".to_string(),
        pass: total < 300.0 && reported == 9,
        runtime_seconds: 0.0,
        details: format!("{reported} criteria reported in {total:.1} s (budget 300 s)"),
    });
    let all_pass = criteria.iter().all(|c| c.pass);
    SuiteReport { criteria, all_pass, total_seconds: start.elapsed().as_secs_f64() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_exact_power_law() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x * x).collect();
        let s = loglog_slope(&xs, &ys);
        assert!((s - 2.0).abs() < 1e-12);
    }
}
