//! Independent reference spectra for separable rectangle domains.
//!
//! On `(a,b) x (0,L)` the eigenfunctions factor as `X(x) sin(k pi y / L)`,
//! which reduces the 2D weighted problem to the 1D Sturm-Liouville family
//! `-X'' + c |x|^(2s) X = lambda X`, `X(a) = X(b) = 0` with `c = (k pi / L)^2`.
//! The 1D problems are solved by second-order finite differences on nested
//! grids with Richardson extrapolation, giving a certifiable error estimate
//! that never touches the finite-element code paths.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{tridiagonal_eigenvector, tridiagonal_lowest};

const GRID_START: usize = 64;
const GRID_CAP: usize = 1 << 17;
const K_CAP: usize = 128;

/// Converged 1D eigenvalues with their extrapolation error estimates.
#[derive(Debug, Clone)]
pub struct SturmEigs {
    pub values: Vec<f64>,
    /// per-entry leading-order error estimate of the extrapolated value,
    /// from the difference of the last two Richardson stages
    pub errors: Vec<f64>,
    /// coarsest grid size at convergence (grids n, 2n, 4n are combined)
    pub grid: usize,
}

fn fd_eigs(a: f64, b: f64, c: f64, s: u32, count: usize, n: usize) -> Vec<f64> {
    let h = (b - a) / (n + 1) as f64;
    let inv_h2 = 1.0 / (h * h);
    let pot: Vec<f64> = (0..n)
        .map(|i| {
            let x = a + (i + 1) as f64 * h;
            c * x.powi(2 * s as i32)
        })
        .collect();
    let d: Vec<f64> = pot.iter().map(|&v| 2.0 * inv_h2 + v).collect();
    let e = vec![-inv_h2; n - 1];
    let mut vals = tridiagonal_lowest(&d, &e, count);
    // bisection alone is only accurate to eps * ||A|| ~ eps / h^2; refine by
    // inverse iteration plus a Rayleigh quotient evaluated as a sum of
    // nonnegative terms, which has no cancellation at scale 1/h^2
    for lam in vals.iter_mut() {
        let v = tridiagonal_eigenvector(&d, &e, *lam);
        let mut quad = v[0] * v[0] + v[n - 1] * v[n - 1];
        for i in 0..n - 1 {
            let dv = v[i + 1] - v[i];
            quad += dv * dv;
        }
        let mut pot_q = 0.0;
        let mut nrm = 0.0;
        for i in 0..n {
            pot_q += pot[i] * v[i] * v[i];
            nrm += v[i] * v[i];
        }
        *lam = (quad * inv_h2 + pot_q) / nrm;
    }
    vals
}

/// Lowest `count` eigenvalues of `-X'' + c |x|^(2s) X = lambda X` on `(a,b)`
/// with Dirichlet ends, certified to relative tolerance `tol`.
pub fn sturm_liouville_eigs(a: f64, b: f64, c: f64, s: u32, count: usize, tol: f64) -> Result<SturmEigs> {
    if a >= b {
        return Err(Error::InvalidArgument(format!("interval ({a}, {b}) is empty")));
    }
    if c < 0.0 {
        return Err(Error::InvalidArgument(format!("coefficient c must be nonnegative, got {c}")));
    }
    if !(tol > 0.0 && tol <= 1e-8) {
        return Err(Error::InvalidArgument(format!("oracle tol must be in (0, 1e-8], got {tol}")));
    }
    if count == 0 {
        return Err(Error::InvalidArgument("count must be positive".into()));
    }
    let mut n = GRID_START.max(4 * count);
    let mut g1 = fd_eigs(a, b, c, s, count, n);
    let mut g2 = fd_eigs(a, b, c, s, count, 2 * n);
    loop {
        let g4 = fd_eigs(a, b, c, s, count, 4 * n);
        let mut values = Vec::with_capacity(count);
        let mut errors = Vec::with_capacity(count);
        let mut worst = 0.0f64;
        for i in 0..count {
            // second-order differences carry an h^2 + h^4 error expansion;
            // two Richardson stages leave O(h^6)
            let r1 = (4.0 * g2[i] - g1[i]) / 3.0;
            let r2 = (4.0 * g4[i] - g2[i]) / 3.0;
            let extrapolated = (16.0 * r2 - r1) / 15.0;
            let err = (r2 - r1).abs() / 15.0;
            worst = worst.max(err / extrapolated.abs().max(1.0));
            values.push(extrapolated);
            errors.push(err);
        }
        if worst <= tol {
            return Ok(SturmEigs { values, errors, grid: n });
        }
        if 4 * n >= GRID_CAP {
            return Err(Error::OracleTolerance { requested: tol, achieved: worst });
        }
        g1 = g2;
        g2 = g4;
        n *= 2;
    }
}

/// Finite-difference eigenfunction samples for the `index`-th (1-based) mode,
/// on the interior nodes of a grid with `n` points, normalized to unit
/// Euclidean norm with a positive first lobe.
pub fn sturm_liouville_eigenfunction(
    a: f64,
    b: f64,
    c: f64,
    s: u32,
    index: usize,
    n: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if index == 0 || index > n {
        return Err(Error::InvalidArgument(format!("mode index {index} out of range")));
    }
    let h = (b - a) / (n + 1) as f64;
    let inv_h2 = 1.0 / (h * h);
    let xs: Vec<f64> = (0..n).map(|i| a + (i + 1) as f64 * h).collect();
    let d: Vec<f64> = xs.iter().map(|x| 2.0 * inv_h2 + c * x.powi(2 * s as i32)).collect();
    let e = vec![-inv_h2; n - 1];
    let lam = tridiagonal_lowest(&d, &e, index)[index - 1];
    let mut v = tridiagonal_eigenvector(&d, &e, lam);
    if v[0] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
    Ok((xs, v))
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumEntry {
    pub value: f64,
    /// 1-based 1D mode index within its k-branch
    pub n: usize,
    /// y-mode index
    pub k: usize,
    pub richardson_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleSpectrum {
    /// ascending in value, ties broken by (k, n)
    pub entries: Vec<SpectrumEntry>,
    /// coarse 1D grid size used per k-branch
    pub grid_sizes: Vec<usize>,
}

/// Lowest `count` eigenvalues of the rectangle `(a,b) x (0,L)` by merging
/// k-branches. Certification uses monotonicity of the 1D eigenvalues in the
/// coefficient `c = (k pi / L)^2`: once the ground state of a branch exceeds
/// the current `count`-th value, every later branch lies higher.
pub fn rectangle_spectrum(a: f64, b: f64, l: f64, s: u32, count: usize, tol: f64) -> Result<OracleSpectrum> {
    if l <= 0.0 {
        return Err(Error::InvalidArgument(format!("rectangle height must be positive, got {l}")));
    }
    let mut entries: Vec<SpectrumEntry> = Vec::new();
    let mut grid_sizes = Vec::new();
    let mut certified = false;
    for k in 1..=K_CAP {
        let c = (k as f64 * std::f64::consts::PI / l).powi(2);
        let eigs = sturm_liouville_eigs(a, b, c, s, count, tol)?;
        grid_sizes.push(eigs.grid);
        if entries.len() >= count {
            entries.sort_by(|p, q| p.value.total_cmp(&q.value).then((p.k, p.n).cmp(&(q.k, q.n))));
            if eigs.values[0] > entries[count - 1].value {
                certified = true;
                break;
            }
        }
        for (i, (&v, &e)) in eigs.values.iter().zip(eigs.errors.iter()).enumerate() {
            entries.push(SpectrumEntry { value: v, n: i + 1, k, richardson_error: e });
        }
    }
    if !certified {
        return Err(Error::OracleCertification(count));
    }
    entries.truncate(count);
    Ok(OracleSpectrum { entries, grid_sizes })
}

fn branch_value(a: f64, b: f64, l: f64, s: u32, n: usize, k: usize, tol: f64) -> Result<f64> {
    let c = (k as f64 * std::f64::consts::PI / l).powi(2);
    Ok(sturm_liouville_eigs(a, b, c, s, n, tol)?.values[n - 1])
}

/// Tune the rectangle height `L` inside `l_bracket` so that the two labelled
/// modes `(n1, k1)` and `(n2, k2)` cross: returns `(L*, common value)` with
/// relative eigenvalue gap below 1e-10.
pub fn tune_crossing(
    a: f64,
    b: f64,
    s: u32,
    mode_pair: ((usize, usize), (usize, usize)),
    l_bracket: (f64, f64),
) -> Result<(f64, f64)> {
    let ((n1, k1), (n2, k2)) = mode_pair;
    let (mut lo, mut hi) = l_bracket;
    if !(lo > 0.0 && lo < hi) {
        return Err(Error::InvalidArgument(format!("bad bracket ({lo}, {hi})")));
    }
    let tol = 1e-12;
    let gap = |l: f64| -> Result<f64> {
        Ok(branch_value(a, b, l, s, n1, k1, tol)? - branch_value(a, b, l, s, n2, k2, tol)?)
    };
    let mut f_lo = gap(lo)?;
    let f_hi = gap(hi)?;
    if f_lo == 0.0 {
        return Ok((lo, branch_value(a, b, lo, s, n1, k1, tol)?));
    }
    if f_hi == 0.0 {
        return Ok((hi, branch_value(a, b, hi, s, n1, k1, tol)?));
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NoSignChange);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v1 = branch_value(a, b, mid, s, n1, k1, tol)?;
        let v2 = branch_value(a, b, mid, s, n2, k2, tol)?;
        let f_mid = v1 - v2;
        if f_mid.abs() / v1.abs().max(1e-300) < 1e-10 || (hi - lo) < 1e-15 * hi {
            return Ok((mid, 0.5 * (v1 + v2)));
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NonConvergence(200, (hi - lo) / hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn constant_potential_shifts_sine_spectrum() {
        // s = 0, c = 1 on (0, pi): lambda_n = n^2 + 1
        let e = sturm_liouville_eigs(0.0, PI, 1.0, 0, 4, 1e-8).unwrap();
        for (i, v) in e.values.iter().enumerate() {
            let want = ((i + 1) * (i + 1)) as f64 + 1.0;
            assert!((v - want).abs() < 1e-7, "mode {i}: {v} vs {want}");
        }
    }

    #[test]
    fn harmonic_oscillator_ground_state() {
        // -X'' + x^2 X on (-8, 8) approximates the whole-line oscillator
        let e = sturm_liouville_eigs(-8.0, 8.0, 1.0, 1, 1, 1e-8).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-6, "{}", e.values[0]);
    }

    #[test]
    fn oscillator_frequency_scaling() {
        // c = 4 gives omega = 2, lowest eigenvalue omega (2n - 1) = 2
        let e = sturm_liouville_eigs(-8.0, 8.0, 4.0, 1, 2, 1e-8).unwrap();
        assert!((e.values[0] - 2.0).abs() < 1e-6);
        assert!((e.values[1] - 6.0).abs() < 1e-5);
    }

    #[test]
    fn error_estimates_bound_true_error() {
        let e = sturm_liouville_eigs(0.0, PI, 0.0, 0, 3, 1e-9).unwrap();
        for (i, (v, err)) in e.values.iter().zip(e.errors.iter()).enumerate() {
            let exact = ((i + 1) * (i + 1)) as f64;
            assert!((v - exact).abs() < 10.0 * err + 1e-12, "mode {i}");
        }
    }

    #[test]
    fn eigenvalues_increase_with_coefficient() {
        let mut prev = f64::NEG_INFINITY;
        for c in [0.0, 1.0, 4.0, 10.0] {
            let e = sturm_liouville_eigs(0.3, 1.7, c, 1, 1, 1e-8).unwrap();
            assert!(e.values[0] > prev);
            prev = e.values[0];
        }
    }

    #[test]
    fn domain_monotonicity_under_inclusion() {
        let small = sturm_liouville_eigs(0.3, 1.3, 5.0, 1, 3, 1e-8).unwrap();
        let big = sturm_liouville_eigs(0.2, 1.5, 5.0, 1, 3, 1e-8).unwrap();
        for (s, b) in small.values.iter().zip(big.values.iter()) {
            assert!(b < s);
        }
    }

    #[test]
    fn square_spectrum_is_classical() {
        let sp = rectangle_spectrum(0.0, PI, PI, 0, 5, 1e-8).unwrap();
        let want = [2.0, 5.0, 5.0, 8.0, 10.0];
        for (entry, w) in sp.entries.iter().zip(want.iter()) {
            assert!((entry.value - w).abs() < 1e-6, "{} vs {w}", entry.value);
        }
        // the double eigenvalue 5 comes from the (1,2)/(2,1) mode pair
        let mut pair = [(sp.entries[1].n, sp.entries[1].k), (sp.entries[2].n, sp.entries[2].k)];
        pair.sort();
        assert_eq!(pair, [(1, 2), (2, 1)]);
    }

    #[test]
    fn weighted_rectangle_spectrum_is_certified() {
        let sp = rectangle_spectrum(0.2, 1.2, 1.0, 1, 5, 1e-8).unwrap();
        assert_eq!(sp.entries.len(), 5);
        for w in sp.entries.windows(2) {
            assert!(w[0].value <= w[1].value);
        }
        for entry in &sp.entries {
            assert!(entry.richardson_error < 1e-6 * entry.value);
        }
    }

    #[test]
    fn symmetric_interval_eigenfunctions_alternate_parity() {
        // crossing {x = 0}: potential x^2 is even, so modes alternate
        // even/odd about the midpoint
        let sp = rectangle_spectrum(-1.0, 1.0, 1.0, 1, 3, 1e-8).unwrap();
        assert_eq!(sp.entries.len(), 3);
        let n = 401;
        for mode in 1..=3usize {
            let (_, v) = sturm_liouville_eigenfunction(-1.0, 1.0, (PI).powi(2), 1, mode, n).unwrap();
            let sym: f64 = (0..n).map(|i| (v[i] - v[n - 1 - i]).abs()).fold(0.0, f64::max);
            let anti: f64 = (0..n).map(|i| (v[i] + v[n - 1 - i]).abs()).fold(0.0, f64::max);
            if mode % 2 == 1 {
                assert!(sym < 1e-8 && anti > 0.1, "mode {mode} should be even: sym={sym:.2e}");
            } else {
                assert!(anti < 1e-8 && sym > 0.1, "mode {mode} should be odd: anti={anti:.2e}");
            }
        }
    }

    #[test]
    fn square_modes_cross_at_equal_sides() {
        let (l, common) = tune_crossing(0.0, PI, 0, ((1, 2), (2, 1)), (2.0, 4.0)).unwrap();
        assert_relative_eq!(l, PI, max_relative = 1e-9);
        assert_relative_eq!(common, 5.0, max_relative = 1e-7);
    }

    #[test]
    fn classical_crossing_satisfies_defining_equation() {
        // modes (1,2) and (3,1) on (0, pi): 1 + 4 pi^2/L^2 = 9 + pi^2/L^2
        let (l, _) = tune_crossing(0.0, PI, 0, ((1, 2), (3, 1)), (1.0, 4.0)).unwrap();
        let lhs = 1.0 + 4.0 * PI.powi(2) / (l * l);
        let rhs = 9.0 + PI.powi(2) / (l * l);
        assert_relative_eq!(lhs, rhs, max_relative = 1e-9);
    }

    #[test]
    fn weighted_crossing_plugs_back() {
        let (l, _) = tune_crossing(0.2, 1.2, 1, ((1, 2), (2, 1)), (0.3, 3.0)).unwrap();
        let v1 = branch_value(0.2, 1.2, l, 1, 1, 2, 1e-12).unwrap();
        let v2 = branch_value(0.2, 1.2, l, 1, 2, 1, 1e-12).unwrap();
        assert!((v1 - v2).abs() / v1 < 1e-10);
    }

    #[test]
    fn sign_preserving_bracket_is_rejected() {
        let err = tune_crossing(0.0, PI, 0, ((1, 2), (2, 1)), (5.0, 9.0)).unwrap_err();
        assert!(matches!(err, Error::NoSignChange));
    }
}
