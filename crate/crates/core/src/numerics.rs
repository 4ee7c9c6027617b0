//! Small numerical kernels shared by the solvers.

/// Cubic Hermite interpolant on `[a, b]` with end values `ya, yb` and end
/// slopes `da, db`. Returns value and derivative at `t`.
#[allow(clippy::too_many_arguments)]
pub fn hermite_cubic(a: f64, b: f64, ya: f64, yb: f64, da: f64, db: f64, t: f64) -> (f64, f64) {
    let h = b - a;
    let s = (t - a) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let value = h00 * ya + h10 * h * da + h01 * yb + h11 * h * db;
    let d00 = (6.0 * s2 - 6.0 * s) / h;
    let d10 = 3.0 * s2 - 4.0 * s + 1.0;
    let d01 = (-6.0 * s2 + 6.0 * s) / h;
    let d11 = 3.0 * s2 - 2.0 * s;
    let deriv = d00 * ya + d10 * da + d01 * yb + d11 * db;
    (value, deriv)
}

/// Fornberg's finite-difference weights. `out[k][j]` is the weight of node
/// `j` in the approximation of the `k`-th derivative at `x0`.
pub fn fd_weights(x0: f64, nodes: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Brent's method on a bracketing interval `f(a) f(b) <= 0`.
pub fn brent<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, xtol: f64, max_iter: usize) -> Option<f64> {
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa * fb > 0.0 {
        return None;
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb * fc > 0.0 {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Some(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    Some(b)
}

/// Composite Simpson rule on a uniform grid with an odd number of nodes.
pub fn simpson_uniform(h: f64, y: &[f64]) -> f64 {
    let n = y.len();
    assert!(n >= 3 && n % 2 == 1, "Simpson needs an odd node count");
    let mut s = y[0] + y[n - 1];
    for (i, v) in y.iter().enumerate().take(n - 1).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * h / 3.0
}

/// Integral of the cubic Hermite interpolant of `y` (with slopes `dy`) over
/// a nonuniform grid: the corrected trapezoid rule, exact for cubics.
pub fn hermite_quadrature(t: &[f64], y: &[f64], dy: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..t.len() - 1 {
        let h = t[i + 1] - t[i];
        s += 0.5 * h * (y[i] + y[i + 1]) + h * h / 12.0 * (dy[i] - dy[i + 1]);
    }
    s
}

/// Running version of [`hermite_quadrature`]; `out[0] = 0`.
pub fn hermite_cumulative(t: &[f64], y: &[f64], dy: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(t.len());
    let mut s = 0.0;
    out.push(0.0);
    for i in 0..t.len() - 1 {
        let h = t[i + 1] - t[i];
        s += 0.5 * h * (y[i] + y[i + 1]) + h * h / 12.0 * (dy[i] - dy[i + 1]);
        out.push(s);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fornberg_reproduces_polynomial_derivatives() {
        let nodes = [0.0, 0.1, 0.25, 0.3, 0.55, 0.6, 0.9];
        let w = fd_weights(0.3, &nodes, 2);
        let f = |x: f64| x.powi(5) - 2.0 * x * x;
        let d1: f64 = nodes.iter().zip(&w[1]).map(|(x, c)| c * f(*x)).sum();
        let d2: f64 = nodes.iter().zip(&w[2]).map(|(x, c)| c * f(*x)).sum();
        assert!((d1 - (5.0 * 0.3f64.powi(4) - 4.0 * 0.3)).abs() < 1e-11);
        assert!((d2 - (20.0 * 0.3f64.powi(3) - 4.0)).abs() < 1e-9);
    }

    #[test]
    fn brent_finds_root() {
        let r = brent(|x| x * x - 2.0, 0.0, 2.0, 1e-14, 100).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn hermite_rules_are_exact_for_cubics() {
        let t = [0.0, 0.3, 0.35, 1.0];
        let y: Vec<f64> = t.iter().map(|x| x * x * x).collect();
        let dy: Vec<f64> = t.iter().map(|x| 3.0 * x * x).collect();
        assert!((hermite_quadrature(&t, &y, &dy) - 0.25).abs() < 1e-15);
        let (v, d) = hermite_cubic(0.3, 0.35, y[1], y[2], dy[1], dy[2], 0.32);
        assert!((v - 0.32f64.powi(3)).abs() < 1e-15);
        assert!((d - 3.0 * 0.32 * 0.32).abs() < 1e-14);
        let h = 0.5;
        let s = simpson_uniform(h, &[0.0, 0.125, 1.0]);
        assert!((s - 0.25).abs() < 1e-15);
    }
}
