//! Zeros of Bessel functions of real order from the power series.
//!
//! Used as an independent reference for the zero-potential spectrum: with
//! `V ≡ 0` the classical eigenvalues are `j_{(M-2)/2,k}²`.

/// `J_ν(x) / ((x/2)^ν / Γ(ν+1)) = Σ_k (-x²/4)^k / (k! (ν+1)_k)`, which has
/// the same positive zeros as `J_ν`.
pub fn bessel_j_reduced(nu: f64, x: f64) -> f64 {
    let z = -0.25 * x * x;
    let mut term = 1.0f64;
    // Neumaier summation
    let mut sum = 1.0f64;
    let mut comp = 0.0f64;
    let mut k = 0.0f64;
    loop {
        k += 1.0;
        term *= z / (k * (nu + k));
        let s = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - s) + term;
        } else {
            comp += (term - s) + sum;
        }
        sum = s;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) && k > 0.5 * x {
            break;
        }
        if k > 500.0 {
            break;
        }
    }
    sum + comp
}

/// `J_ν(x)` for `ν > -1`, `x >= 0`.
pub fn bessel_j(nu: f64, x: f64) -> f64 {
    let pre = (nu * (0.5 * x).ln() - ln_gamma(nu + 1.0)).exp();
    pre * bessel_j_reduced(nu, x)
}

/// Lanczos approximation (g = 7, n = 9).
fn ln_gamma(x: f64) -> f64 {
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + 7.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// First `count` positive zeros of `J_ν`, by scanning for sign changes of
/// the reduced series and bisecting.
pub fn bessel_zeros(nu: f64, count: usize) -> Vec<f64> {
    let step = 0.05;
    let mut out = Vec::with_capacity(count);
    let mut a = 1e-3;
    let mut fa = bessel_j_reduced(nu, a);
    while out.len() < count {
        let b = a + step;
        let fb = bessel_j_reduced(nu, b);
        if fa * fb < 0.0 {
            let (mut lo, mut hi, mut flo) = (a, b, fa);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let fm = bessel_j_reduced(nu, mid);
                if (fm < 0.0) == (flo < 0.0) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            out.push(0.5 * (lo + hi));
        }
        a = b;
        fa = fb;
    }
    out
}

/// Zero-potential classical eigenvalues `ν_k = j_{(M-2)/2,k}²`.
pub fn zero_potential_eigenvalues(m_eff: f64, count: usize) -> Vec<f64> {
    bessel_zeros(0.5 * (m_eff - 2.0), count)
        .into_iter()
        .map(|j| j * j)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tabulated_zeros() {
        let j0 = bessel_zeros(0.0, 3);
        assert!((j0[0] - 2.404_825_557_695_773).abs() < 1e-12);
        assert!((j0[1] - 5.520_078_110_286_311).abs() < 1e-12);
        assert!((j0[2] - 8.653_727_912_911_012).abs() < 1e-11);
        let j1 = bessel_zeros(1.0, 2);
        assert!((j1[0] - 3.831_705_970_207_512).abs() < 1e-12);
        assert!((j1[1] - 7.015_586_669_815_619).abs() < 1e-12);
        // J_{1/2} ∝ sin x / √x
        let jh = bessel_zeros(0.5, 5);
        for (k, z) in jh.iter().enumerate() {
            assert!((z - (k + 1) as f64 * std::f64::consts::PI).abs() < 1e-11);
        }
    }

    #[test]
    fn values_against_closed_forms() {
        // J_{1/2}(x) = √(2/(πx)) sin x
        for &x in &[0.3, 1.7, 6.0, 11.5] {
            let exact = (2.0 / (std::f64::consts::PI * x)).sqrt() * x.sin();
            assert!((bessel_j(0.5, x) - exact).abs() < 1e-12);
        }
        assert!((bessel_j(0.0, 1.0) - 0.765_197_686_557_966_6).abs() < 1e-14);
    }
}
