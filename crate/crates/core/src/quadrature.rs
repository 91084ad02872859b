//! Gauss–Legendre rules on the reference interval [0, 1].

/// 2-point rule, exact for cubics.
pub const GAUSS2: [(f64, f64); 2] = [
    (0.211_324_865_405_187_13, 0.5),
    (0.788_675_134_594_812_9, 0.5),
];

/// 3-point rule, exact for polynomials of degree 5.
pub const GAUSS3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_31, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

/// 5-point rule, exact for polynomials of degree 9.
pub const GAUSS5: [(f64, f64); 5] = [
    (0.046_910_077_030_668_0, 0.118_463_442_528_094_54),
    (0.230_765_344_947_158_46, 0.239_314_335_249_683_23),
    (0.5, 0.284_444_444_444_444_44),
    (0.769_234_655_052_841_5, 0.239_314_335_249_683_23),
    (0.953_089_922_969_332, 0.118_463_442_528_094_54),
];

/// Integrates `f` over `[a, b]` with the given reference rule.
pub fn integrate(rule: &[(f64, f64)], a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let h = b - a;
    rule.iter().map(|&(x, w)| w * f(a + h * x)).sum::<f64>() * h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_one() {
        for rule in [&GAUSS2[..], &GAUSS3[..], &GAUSS5[..]] {
            let s: f64 = rule.iter().map(|p| p.1).sum();
            assert!((s - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn polynomial_exactness() {
        // int_0^2 x^k = 2^{k+1}/(k+1)
        for (rule, deg) in [(&GAUSS2[..], 3), (&GAUSS3[..], 5), (&GAUSS5[..], 9)] {
            for k in 0..=deg {
                let exact = 2f64.powi(k + 1) / (k + 1) as f64;
                let q = integrate(rule, 0.0, 2.0, |x| x.powi(k));
                assert!((q - exact).abs() < 1e-12 * exact, "k={k}");
            }
        }
    }
}
