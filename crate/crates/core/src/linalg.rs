//! Sparse symmetric matrices, a profile (skyline) Cholesky factorization with
//! reverse Cuthill-McKee ordering, tridiagonal eigenvalues by Sturm bisection,
//! and a small dense generalized symmetric eigensolver.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Symmetric sparse matrix in CSR form, full pattern stored.
#[derive(Debug, Clone)]
pub struct SymmetricCsr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub vals: Vec<f64>,
}

impl SymmetricCsr {
    /// Build from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut entries: Vec<(usize, usize, f64)> = triplets.to_vec();
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx: Vec<usize> = Vec::with_capacity(entries.len());
        let mut vals: Vec<f64> = Vec::with_capacity(entries.len());
        let mut cur_row = 0usize;
        for &(r, c, v) in &entries {
            while cur_row < r {
                cur_row += 1;
                row_ptr[cur_row] = col_idx.len();
            }
            if col_idx.len() > row_ptr[cur_row] && *col_idx.last().unwrap() == c {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            col_idx.push(c);
            vals.push(v);
        }
        while cur_row < n {
            cur_row += 1;
            row_ptr[cur_row] = col_idx.len();
        }
        SymmetricCsr { n, row_ptr, col_idx, vals }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.col_idx[k]];
            }
            y[i] = s;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    /// x^t A y
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            let mut r = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                r += self.vals[k] * y[self.col_idx[k]];
            }
            s += x[i] * r;
        }
        s
    }

    /// Maximum relative asymmetry |a_ij - a_ji| / max|a|.
    pub fn asymmetry(&self) -> f64 {
        let amax = self.vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                let aji = self.get(j, i);
                worst = worst.max((self.vals[k] - aji).abs());
            }
        }
        if amax > 0.0 {
            worst / amax
        } else {
            0.0
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        for k in self.row_ptr[i]..self.row_ptr[i + 1] {
            if self.col_idx[k] == j {
                return self.vals[k];
            }
        }
        0.0
    }

    /// Coordinate-format triplets (row, col, value).
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.vals.len());
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                out.push((i, self.col_idx[k], self.vals[k]));
            }
        }
        out
    }
}

/// Reverse Cuthill-McKee ordering. Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &SymmetricCsr) -> Vec<usize> {
    let n = a.n;
    let degree: Vec<usize> = (0..n).map(|i| a.row_ptr[i + 1] - a.row_ptr[i]).collect();
    let mut visited = vec![false; n];
    let mut order: Vec<usize> = Vec::with_capacity(n);
    loop {
        // pick the unvisited node of minimum degree as the next component seed
        let seed = match (0..n).filter(|&i| !visited[i]).min_by_key(|&i| degree[i]) {
            Some(s) => s,
            None => break,
        };
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(seed);
        visited[seed] = true;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut nbrs: Vec<usize> = (a.row_ptr[u]..a.row_ptr[u + 1])
                .map(|k| a.col_idx[k])
                .filter(|&v| !visited[v])
                .collect();
            nbrs.sort_by_key(|&v| degree[v]);
            for v in nbrs {
                if !visited[v] {
                    visited[v] = true;
                    queue.push_back(v);
                }
            }
        }
    }
    order.reverse();
    order
}

/// Profile (skyline) Cholesky factorization `A = L L^t` of a sparse SPD matrix,
/// with an internal RCM permutation.
pub struct ProfileCholesky {
    n: usize,
    perm: Vec<usize>,     // perm[new] = old
    inv_perm: Vec<usize>, // inv_perm[old] = new
    first: Vec<usize>,    // first nonzero column of row i (in permuted order)
    start: Vec<usize>,    // start of row i in vals
    vals: Vec<f64>,       // packed lower rows incl. diagonal
}

impl ProfileCholesky {
    pub fn factor(a: &SymmetricCsr) -> Result<Self> {
        let n = a.n;
        let perm = reverse_cuthill_mckee(a);
        let mut inv_perm = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv_perm[old] = new;
        }
        // profile: first[i] = min over nonzeros (permuted)
        let mut first = vec![0usize; n];
        for new in 0..n {
            let old = perm[new];
            let mut fc = new;
            for k in a.row_ptr[old]..a.row_ptr[old + 1] {
                let j = inv_perm[a.col_idx[k]];
                if j < fc {
                    fc = j;
                }
            }
            first[new] = fc;
        }
        let mut start = vec![0usize; n + 1];
        for i in 0..n {
            start[i + 1] = start[i] + (i - first[i] + 1);
        }
        let mut vals = vec![0.0f64; start[n]];
        for new in 0..n {
            let old = perm[new];
            for k in a.row_ptr[old]..a.row_ptr[old + 1] {
                let j = inv_perm[a.col_idx[k]];
                if j <= new {
                    vals[start[new] + (j - first[new])] = a.vals[k];
                }
            }
        }
        // in-place factorization
        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                let fj = first[j];
                let lo = fi.max(fj);
                let mut s = vals[start[i] + (j - fi)];
                // dot of row i [lo..j) and row j [lo..j)
                let bi = start[i] + (lo - fi);
                let bj = start[j] + (lo - fj);
                for t in 0..(j - lo) {
                    s -= vals[bi + t] * vals[bj + t];
                }
                let d = vals[start[j] + (j - fj)];
                vals[start[i] + (j - fi)] = s / d;
            }
            let mut d = vals[start[i] + (i - fi)];
            let bi = start[i];
            for t in 0..(i - fi) {
                d -= vals[bi + t] * vals[bi + t];
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::Factorization(format!(
                    "non-positive pivot {d:.3e} at row {i}"
                )));
            }
            vals[start[i] + (i - fi)] = d.sqrt();
        }
        Ok(ProfileCholesky { n, perm, inv_perm, first, start, vals })
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = vec![0.0f64; n];
        for i in 0..n {
            y[i] = b[self.perm[i]];
        }
        // forward: L y = Pb
        for i in 0..n {
            let fi = self.first[i];
            let bi = self.start[i];
            let mut s = y[i];
            for (t, j) in (fi..i).enumerate() {
                s -= self.vals[bi + t] * y[j];
            }
            y[i] = s / self.vals[bi + (i - fi)];
        }
        // backward: L^t x = y
        for i in (0..n).rev() {
            let fi = self.first[i];
            let bi = self.start[i];
            let xi = y[i] / self.vals[bi + (i - fi)];
            y[i] = xi;
            for (t, j) in (fi..i).enumerate() {
                y[j] -= self.vals[bi + t] * xi;
            }
        }
        let mut x = vec![0.0f64; n];
        for i in 0..n {
            x[self.perm[i]] = y[i];
        }
        x
    }

    pub fn profile_len(&self) -> usize {
        self.vals.len()
    }

    pub fn n(&self) -> usize {
        let _ = &self.inv_perm;
        self.n
    }
}

/// Lowest `count` eigenvalues of the symmetric tridiagonal matrix with
/// diagonal `d` and off-diagonal `e` (len n-1), by Sturm-sequence bisection.
pub fn tridiagonal_lowest(d: &[f64], e: &[f64], count: usize) -> Vec<f64> {
    let n = d.len();
    assert!(count <= n && n >= 1);
    // Gershgorin bounds
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = (if i > 0 { e[i - 1].abs() } else { 0.0 })
            + (if i + 1 < n { e[i].abs() } else { 0.0 });
        lo = lo.min(d[i] - r);
        hi = hi.max(d[i] + r);
    }
    let count_below = |x: f64| -> usize {
        // number of eigenvalues < x via the LDL^t inertia recurrence
        let mut cnt = 0usize;
        let mut q = d[0] - x;
        if q < 0.0 {
            cnt += 1;
        }
        for i in 1..n {
            let prev = if q != 0.0 { q } else { 1e-300 };
            q = d[i] - x - e[i - 1] * e[i - 1] / prev;
            if q < 0.0 {
                cnt += 1;
            }
        }
        cnt
    };
    let mut out = Vec::with_capacity(count);
    for k in 1..=count {
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if count_below(mid) >= k {
                b = mid;
            } else {
                a = mid;
            }
            if b - a <= 1e-15 * b.abs().max(1.0) {
                break;
            }
        }
        out.push(0.5 * (a + b));
    }
    out
}

/// Eigenvector of a symmetric tridiagonal matrix for an approximate eigenvalue,
/// by two sweeps of shifted inverse iteration (Thomas solves).
pub fn tridiagonal_eigenvector(d: &[f64], e: &[f64], lambda: f64) -> Vec<f64> {
    let n = d.len();
    let shift = lambda * (1.0 + 1e-12) + 1e-300;
    let mut v: Vec<f64> = (0..n).map(|i| ((i * 2654435761) % 1000) as f64 / 1000.0 + 0.1).collect();
    for _ in 0..3 {
        // solve (T - shift) w = v by LU without pivoting (adequate for this use)
        let mut c = vec![0.0f64; n];
        let mut x = vec![0.0f64; n];
        let mut b0 = d[0] - shift;
        if b0.abs() < 1e-300 {
            b0 = 1e-300;
        }
        c[0] = if n > 1 { e[0] / b0 } else { 0.0 };
        x[0] = v[0] / b0;
        for i in 1..n {
            let mut m = d[i] - shift - e[i - 1] * c[i - 1];
            if m.abs() < 1e-300 {
                m = 1e-300;
            }
            if i + 1 < n {
                c[i] = e[i] / m;
            }
            x[i] = (v[i] - e[i - 1] * x[i - 1]) / m;
        }
        for i in (0..n - 1).rev() {
            x[i] -= c[i] * x[i + 1];
        }
        let norm = x.iter().map(|t| t * t).sum::<f64>().sqrt();
        for t in x.iter_mut() {
            *t /= norm;
        }
        v = x;
    }
    v
}

/// Eigenpairs of a small dense symmetric matrix by cyclic Jacobi rotations;
/// ascending eigenvalues, orthonormal columns. Jacobi reaches the rounding
/// floor, which matters because these rotations feed back into the subspace
/// iteration every sweep.
pub fn jacobi_symmetric_eigen(mat: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = mat.nrows();
    let mut a = mat.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        let scale: f64 = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max).max(1.0);
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-18 * scale {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let vals: Vec<f64> = idx.iter().map(|&i| a[(i, i)]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (col, &i) in idx.iter().enumerate() {
        vecs.set_column(col, &v.column(i));
    }
    (vals, vecs)
}

/// Eigenpairs of the small dense generalized symmetric problem `A w = theta B w`
/// with `B` positive definite; ascending eigenvalues, `B`-orthonormal vectors.
pub fn dense_generalized_eig(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let chol = b
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Factorization("small mass block not positive definite".into()))?;
    let l_inv = chol
        .l()
        .try_inverse()
        .ok_or_else(|| Error::Factorization("singular Cholesky factor".into()))?;
    let c = &l_inv * a * l_inv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let (vals, z) = jacobi_symmetric_eigen(&c);
    let k = vals.len();
    let mut vecs = DMatrix::zeros(k, k);
    for col in 0..k {
        let w = l_inv.transpose() * z.column(col);
        vecs.set_column(col, &DVector::from_column_slice(w.as_slice()));
    }
    Ok((vals, vecs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn laplacian_1d(n: usize) -> SymmetricCsr {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        SymmetricCsr::from_triplets(n, &t)
    }

    #[test]
    fn csr_duplicates_are_summed() {
        let m = SymmetricCsr::from_triplets(2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 1, 5.0)]);
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.get(1, 1), 5.0);
        assert_eq!(m.get(0, 1), 0.0);
    }

    #[test]
    fn profile_cholesky_solves_spd_system() {
        let n = 50;
        let a = laplacian_1d(n);
        let f = ProfileCholesky::factor(&a).unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let x = f.solve(&b);
        let r = a.apply(&x);
        for i in 0..n {
            assert_relative_eq!(r[i], b[i], max_relative = 1e-10, epsilon = 1e-12);
        }
    }

    #[test]
    fn tridiagonal_bisection_matches_closed_form() {
        // eigenvalues of tridiag(-1, 2, -1) of size n: 2 - 2 cos(k pi / (n+1))
        let n = 40;
        let d = vec![2.0; n];
        let e = vec![-1.0; n - 1];
        let got = tridiagonal_lowest(&d, &e, 5);
        for (k, g) in got.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((k as f64 + 1.0) * std::f64::consts::PI / (n as f64 + 1.0)).cos();
            assert_relative_eq!(*g, exact, max_relative = 1e-12);
        }
    }

    #[test]
    fn tridiagonal_eigenvector_residual() {
        let n = 60;
        let d = vec![2.0; n];
        let e = vec![-1.0; n - 1];
        let lam = tridiagonal_lowest(&d, &e, 1)[0];
        let v = tridiagonal_eigenvector(&d, &e, lam);
        for i in 0..n {
            let tv = d[i] * v[i]
                + if i > 0 { e[i - 1] * v[i - 1] } else { 0.0 }
                + if i + 1 < n { e[i] * v[i + 1] } else { 0.0 };
            assert_relative_eq!(tv, lam * v[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn dense_generalized_eig_diagonal_pencil() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![9.0, 2.0, 3.0]));
        let b = DMatrix::identity(3, 3);
        let (vals, _) = dense_generalized_eig(&a, &b).unwrap();
        assert_relative_eq!(vals[0], 2.0, max_relative = 1e-12);
        assert_relative_eq!(vals[1], 3.0, max_relative = 1e-12);
        assert_relative_eq!(vals[2], 9.0, max_relative = 1e-12);
    }
}
