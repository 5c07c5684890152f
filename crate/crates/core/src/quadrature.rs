//! Triangle quadrature: exact monomial integrals for the polynomial weight
//! `x^(2s)` and a collapsed tensor Gauss rule for smooth integrands.

/// Signed area of the triangle `(a, b, c)`.
pub fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// Exact value of the integral of `x^m` over the triangle with the given vertices.
///
/// Expanding `x = x1 L1 + x2 L2 + x3 L3` in barycentric coordinates and using
/// `int L1^a L2^b L3^c = 2A a! b! c! / (a+b+c+2)!` collapses to
/// `2A / ((m+1)(m+2)) * h_m(x1, x2, x3)` with `h_m` the complete homogeneous
/// symmetric polynomial.
pub fn tri_int_x_pow(v: [[f64; 2]; 3], m: u32) -> f64 {
    let area = signed_area(v[0], v[1], v[2]);
    let h = complete_homogeneous(m, v[0][0], v[1][0], v[2][0]);
    2.0 * area / ((m as f64 + 1.0) * (m as f64 + 2.0)) * h
}

fn complete_homogeneous(m: u32, x1: f64, x2: f64, x3: f64) -> f64 {
    let mut sum = 0.0;
    for a in 0..=m {
        for b in 0..=(m - a) {
            let c = m - a - b;
            sum += x1.powi(a as i32) * x2.powi(b as i32) * x3.powi(c as i32);
        }
    }
    sum
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> Vec<(f64, f64)> {
    // Newton iteration on P_n with the Chebyshev-based initial guess.
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // map [-1,1] -> [0,1]
        out.push(((1.0 - x) / 2.0, w / 2.0));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Quadrature rule on a reference triangle, stored in barycentric coordinates.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    /// (L1, L2, L3, weight); weights sum to 1 so that physical weights are `w * 2A... `
    /// actually weights sum to 1/2 (reference triangle area).
    pub points: Vec<([f64; 3], f64)>,
}

impl TriangleRule {
    /// Collapsed (Duffy) tensor Gauss rule with `k x k` points; integrates
    /// bivariate polynomials of total degree up to `2k - 2` exactly.
    pub fn collapsed_gauss(k: usize) -> Self {
        let g = gauss_legendre_unit(k);
        let mut points = Vec::with_capacity(k * k);
        for &(xi, wx) in &g {
            for &(eta, we) in &g {
                let l1 = xi;
                let l2 = eta * (1.0 - xi);
                let l3 = (1.0 - xi) * (1.0 - eta);
                points.push(([l1, l2, l3], wx * we * (1.0 - xi)));
            }
        }
        TriangleRule { points }
    }

    /// Integrate `f(x, y)` over the physical triangle `v`.
    pub fn integrate<F: FnMut(f64, f64) -> f64>(&self, v: [[f64; 2]; 3], mut f: F) -> f64 {
        let area2 = 2.0 * signed_area(v[0], v[1], v[2]);
        let mut sum = 0.0;
        for &(l, w) in &self.points {
            let x = l[0] * v[0][0] + l[1] * v[1][0] + l[2] * v[2][0];
            let y = l[0] * v[0][1] + l[1] * v[1][1] + l[2] * v[2][1];
            sum += w * f(x, y);
        }
        sum * area2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const REF: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

    #[test]
    fn monomial_integral_reference_triangle() {
        // int x^m over the unit reference triangle = 1 / ((m+1)(m+2))
        for m in 0..7u32 {
            let exact = 1.0 / ((m as f64 + 1.0) * (m as f64 + 2.0));
            assert_relative_eq!(tri_int_x_pow(REF, m), exact, max_relative = 1e-14);
        }
    }

    #[test]
    fn monomial_integral_translated_triangle() {
        // Translate the reference triangle so x in [1, 2]:
        // int (x)^2 = int_{ref} (x+1)^2 = int x^2 + 2 int x + area = 1/12 + 2/6 + 1/2
        let v = [[1.0, 0.0], [2.0, 0.0], [1.0, 1.0]];
        assert_relative_eq!(
            tri_int_x_pow(v, 2),
            1.0 / 12.0 + 2.0 / 6.0 + 0.5,
            max_relative = 1e-14
        );
    }

    #[test]
    fn gauss_rule_is_exact_for_polynomials() {
        let rule = TriangleRule::collapsed_gauss(5);
        for m in 0..=8u32 {
            let got = rule.integrate(REF, |x, _| x.powi(m as i32));
            assert_relative_eq!(got, tri_int_x_pow(REF, m), max_relative = 1e-13);
        }
        // a genuinely bivariate one: x^2 y^3 over reference = 2!3!/(7)! * 2 * ... use known value
        // int L2^2 L3^3 = 2A * 2! 3! / 7! = 12/5040 * 1 = 1/420 with x=L2, y=L3
        let got = rule.integrate(REF, |x, y| x * x * y * y * y);
        assert_relative_eq!(got, 1.0 / 420.0, max_relative = 1e-12);
    }

    #[test]
    fn gauss_legendre_weights_sum_to_one() {
        for n in 1..9 {
            let s: f64 = gauss_legendre_unit(n).iter().map(|p| p.1).sum();
            assert_relative_eq!(s, 1.0, max_relative = 1e-14);
        }
    }
}
