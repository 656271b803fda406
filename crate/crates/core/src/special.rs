//! Special functions for Rician amplitude statistics.

/// Exponentially scaled modified Bessel function `e^{-x} I0(x)` for `x >= 0`.
pub fn bessel_i0e(x: f64) -> f64 {
    scaled_bessel(0, x.abs())
}

/// Exponentially scaled modified Bessel function `e^{-x} I1(x)` for `x >= 0`.
pub fn bessel_i1e(x: f64) -> f64 {
    let v = scaled_bessel(1, x.abs());
    if x < 0.0 {
        -v
    } else {
        v
    }
}

fn scaled_bessel(order: u32, x: f64) -> f64 {
    if x <= 30.0 {
        // power series, all terms positive
        let q = x * x / 4.0;
        let mut term = if order == 0 { 1.0 } else { x / 2.0 };
        let mut sum = term;
        let mut k = 0.0;
        loop {
            k += 1.0;
            term *= q / (k * (k + order as f64));
            sum += term;
            if term <= sum * 1e-17 {
                break;
            }
        }
        sum * (-x).exp()
    } else {
        // Hankel asymptotic expansion
        let mu = 4.0 * (order * order) as f64;
        let mut term = 1.0f64;
        let mut sum = 1.0f64;
        let mut k = 1.0;
        loop {
            let odd = 2.0 * k - 1.0;
            let next = -term * (mu - odd * odd) / (k * 8.0 * x);
            if next.abs() >= term.abs() {
                break;
            }
            if next.abs() < 1e-17 * sum.abs() {
                sum += next;
                break;
            }
            sum += next;
            term = next;
            k += 1.0;
        }
        sum / (2.0 * std::f64::consts::PI * x).sqrt()
    }
}

/// Laguerre function `L_{1/2}(x)` for `x <= 0`, as it appears in Rician moments.
pub fn laguerre_half(x: f64) -> f64 {
    debug_assert!(x <= 0.0);
    let z = -x / 2.0;
    (1.0 - x) * bessel_i0e(z) - x * bessel_i1e(z)
}

/// Marcum Q-function of order one, `Q1(a, b) = P(R > b)` for `R ~ Rice(a, 1)`.
///
/// Uses the Poisson mixture form: with `Na ~ Poisson(a²/2)` and
/// `Nb ~ Poisson(b²/2)` independent, `Q1(a, b) = P(Nb <= Na)`.
pub fn marcum_q1(a: f64, b: f64) -> f64 {
    let a = a.abs();
    let b = b.abs();
    if b == 0.0 {
        return 1.0;
    }
    let lambda_a = a * a / 2.0;
    let lambda_b = b * b / 2.0;
    if lambda_a == 0.0 {
        return (-lambda_b).exp();
    }
    let na = PoissonWindow::new(lambda_a);
    let nb = PoissonWindow::new(lambda_b);
    // cumulative distribution of Nb over its window
    let mut cdf_b = Vec::with_capacity(nb.pmf.len());
    let mut acc = 0.0;
    for p in &nb.pmf {
        acc += p;
        cdf_b.push(acc);
    }
    let total: f64 = na
        .pmf
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let k = na.first + i as u64;
            let f = if k < nb.first {
                0.0
            } else {
                let j = (k - nb.first) as usize;
                cdf_b.get(j).copied().unwrap_or(1.0)
            };
            p * f
        })
        .sum();
    total.clamp(0.0, 1.0)
}

/// Poisson PMF on `mode ± (12·sqrt(λ) + 50)`, renormalized over that window.
///
/// Built by ratio recursion from the mode so no factorials are evaluated.
struct PoissonWindow {
    first: u64,
    pmf: Vec<f64>,
}

impl PoissonWindow {
    fn new(lambda: f64) -> Self {
        let spread = 12.0 * lambda.sqrt() + 50.0;
        let first = (lambda - spread).floor().max(0.0) as u64;
        let last = (lambda + spread).ceil() as u64;
        let mode = (lambda.floor() as u64).clamp(first, last);
        let mut pmf = vec![0.0; (last - first + 1) as usize];
        let at = |k: u64| (k - first) as usize;
        pmf[at(mode)] = 1.0;
        let mut w = 1.0;
        for k in (first + 1..=mode).rev() {
            // w(k-1) = w(k)·k/λ
            w *= k as f64 / lambda;
            pmf[at(k - 1)] = w;
        }
        let mut w = 1.0;
        for k in mode..last {
            w *= lambda / (k + 1) as f64;
            pmf[at(k + 1)] = w;
        }
        let norm: f64 = pmf.iter().sum();
        pmf.iter_mut().for_each(|p| *p /= norm);
        Self { first, pmf }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn i0_series(x: f64) -> f64 {
        (0..200).fold((0.0, 1.0), |(s, t), k| {
            let next = if k == 0 { 1.0 } else { t * (x * x / 4.0) / (k as f64 * k as f64) };
            (s + next, next)
        }).0
    }

    #[test]
    fn bessel_values() {
        // I0(1) = 1.2660658777520082, I1(1) = 0.5651591039924851
        assert!((bessel_i0e(1.0) * 1f64.exp() - 1.2660658777520082).abs() < 1e-14);
        assert!((bessel_i1e(1.0) * 1f64.exp() - 0.5651591039924851).abs() < 1e-14);
        for x in [0.0, 0.5, 7.0, 25.0, 29.9] {
            let direct = i0_series(x) * (-x).exp();
            assert!((bessel_i0e(x) - direct).abs() < 1e-13 * direct.max(1e-300), "x={x}");
        }
        // continuity across the series/asymptotic switch
        let below = bessel_i0e(30.0);
        let above = bessel_i0e(30.0 + 1e-12);
        assert!((below - above).abs() < 1e-13);
        let below = bessel_i1e(30.0);
        let above = bessel_i1e(30.0 + 1e-12);
        assert!((below - above).abs() < 1e-13);
    }

    #[test]
    fn laguerre_limits() {
        assert!((laguerre_half(0.0) - 1.0).abs() < 1e-15);
        // large |x|: L_{1/2}(x) ~ sqrt(-4x/pi)
        let x = -5000.0;
        let approx = (-4.0 * x / std::f64::consts::PI).sqrt();
        assert!((laguerre_half(x) / approx - 1.0).abs() < 1e-3);
    }

    #[test]
    fn marcum_closed_forms() {
        for a in [0.0, 0.3, 2.0, 40.0] {
            assert_eq!(marcum_q1(a, 0.0), 1.0);
        }
        for b in [0.1, 1.0, 2.5, 5.0] {
            assert!((marcum_q1(0.0, b) - (-b * b / 2.0).exp()).abs() < 1e-15);
        }
        assert!((marcum_q1(0.0, 1.0) - 0.6065306597126334).abs() < 1e-15);
    }

    #[test]
    fn marcum_monotone() {
        let mut prev = 1.0;
        for i in 1..60 {
            let q = marcum_q1(3.0, i as f64 * 0.1);
            assert!(q <= prev + 1e-15);
            prev = q;
        }
        let mut prev = 0.0;
        for i in 0..60 {
            let q = marcum_q1(i as f64 * 0.1, 3.0);
            assert!(q >= prev - 1e-15);
            prev = q;
        }
    }

    #[test]
    fn marcum_large_arguments() {
        // far into the Gaussian regime: R ~ N(a, 1) approximately
        let a = 80.0;
        assert!((marcum_q1(a, a) - 0.5).abs() < 0.01);
        assert!(marcum_q1(a, a + 10.0) < 1e-15);
        assert!(1.0 - marcum_q1(a, a - 10.0) < 1e-14);
    }
}
