//! sinc, the sine and cosine integrals, and exact cell moments of sinc².

use num_complex::Complex64;
use std::f64::consts::FRAC_PI_2;

/// sin(x)/x with the removable singularity handled by its series.
#[inline]
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Sine integral Si(x) = ∫₀ˣ sin(t)/t dt.
///
/// Power series for |x| ≤ 2, otherwise the continued fraction for E₁(ix)
/// evaluated with the modified Lentz method. Relative accuracy ~1e-15.
pub fn sine_integral(x: f64) -> f64 {
    let t = x.abs();
    let value = if t <= 2.0 {
        series(t)
    } else {
        continued_fraction(t)
    };
    value.copysign(x)
}

fn series(t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let mut sum = 0.0;
    let mut term = t; // t^(2k+1) / (2k+1)!
    let mut k = 0u32;
    loop {
        let contrib = term / f64::from(2 * k + 1);
        sum += contrib;
        if contrib.abs() < 1e-17 * sum.abs() {
            return sum;
        }
        k += 1;
        term *= -t * t / f64::from((2 * k) * (2 * k + 1));
    }
}

/// Entire cosine integral Cin(z) = ∫₀ᶻ (1 − cos t)/t dt = γ + ln z − Ci(z).
pub fn cosine_integral_entire(z: f64) -> f64 {
    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
    let t = z.abs();
    if t == 0.0 {
        return 0.0;
    }
    if t <= 2.0 {
        let mut sum = 0.0;
        let mut term = 1.0; // t^(2k) / (2k)!
        let mut k = 1u32;
        loop {
            term *= -t * t / f64::from((2 * k - 1) * (2 * k));
            let contrib = -term / f64::from(2 * k);
            sum += contrib;
            if contrib.abs() < 1e-17 * sum.abs() {
                return sum;
            }
            k += 1;
        }
    }
    let ci = -exponential_integral_imaginary(t).re;
    EULER_GAMMA + t.ln() - ci
}

fn continued_fraction(t: f64) -> f64 {
    // Si(t) = π/2 + Im E1(it).
    FRAC_PI_2 + exponential_integral_imaginary(t).im
}

/// E₁(it) for t > 0 by the modified Lentz continued fraction.
fn exponential_integral_imaginary(t: f64) -> Complex64 {
    const TINY: f64 = 1e-300;
    let mut b = Complex64::new(1.0, t);
    let mut c = Complex64::new(1.0 / TINY, 0.0);
    let mut d = b.inv();
    let mut h = d;
    for i in 1..200 {
        let a = -f64::from(i * i);
        b += 2.0;
        d = (d * a + b).inv();
        c = b + c.inv() * a;
        let del = c * d;
        h *= del;
        if (del.re - 1.0).abs() + del.im.abs() < 1e-16 {
            break;
        }
    }
    h * Complex64::new(t.cos(), -t.sin())
}

/// Antiderivative of sinc²: F(x) = Si(2x) − sin²(x)/x.
fn sinc2_antiderivative(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        return x;
    }
    let s = x.sin();
    sine_integral(2.0 * x) - s * s / x
}

/// Mean of sinc²(x) over [a, b].
pub fn sinc2_mean(a: f64, b: f64) -> f64 {
    let width = b - a;
    if width.abs() < 1e-4 * (1.0 + a.abs().max(b.abs())) || width.abs() < 1e-3 {
        // Simpson; the closed form cancels badly for narrow intervals.
        let f = |x: f64| sinc(x).powi(2);
        return (f(a) + 4.0 * f(0.5 * (a + b)) + f(b)) / 6.0;
    }
    (sinc2_antiderivative(b) - sinc2_antiderivative(a)) / width
}

/// ∫ₐᵇ x·sinc²(x) dx = ∫ₐᵇ sin²(x)/x dx.
pub fn sinc2_first_moment(a: f64, b: f64) -> f64 {
    let width = b - a;
    if width.abs() < 1e-3 {
        let f = |x: f64| x * sinc(x).powi(2);
        return width * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b)) / 6.0;
    }
    // The integrand is odd, so ∫₀ʸ is even in y and equals Cin(2|y|)/2.
    0.5 * (cosine_integral_entire(2.0 * b) - cosine_integral_entire(2.0 * a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    /// Composite Simpson quadrature of sin(t)/t, independent of the series and
    /// continued-fraction paths above.
    fn si_by_quadrature(x: f64) -> f64 {
        let n = 20_000;
        let h = x / n as f64;
        let f = |t: f64| if t == 0.0 { 1.0 } else { t.sin() / t };
        let mut s = f(0.0) + f(x);
        for i in 1..n {
            s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn sine_integral_reference_values() {
        assert_relative_eq!(sine_integral(1.0), 0.946_083_070_367_183, epsilon = 1e-14);
        assert_relative_eq!(sine_integral(PI), 1.851_937_051_982_466, epsilon = 1e-14);
        assert_relative_eq!(sine_integral(10.0), 1.658_347_594_218_874, epsilon = 1e-14);
        assert_relative_eq!(sine_integral(-10.0), -1.658_347_594_218_874, epsilon = 1e-14);
        assert_relative_eq!(sine_integral(1e6), FRAC_PI_2, epsilon = 1e-5);
        assert_eq!(sine_integral(0.0), 0.0);
    }

    #[test]
    fn sine_integral_matches_quadrature_across_branch_point() {
        for &x in &[0.3, 1.5, 1.999, 2.0, 2.001, 3.7, 7.0, 25.0] {
            assert_relative_eq!(sine_integral(x), si_by_quadrature(x), epsilon = 1e-11);
        }
    }

    #[test]
    fn cosine_integral_reference_values() {
        // Cin(z) = γ + ln z − Ci(z); Ci(1) = 0.337403922900968, Ci(5) = −0.190029749656644.
        let gamma = 0.577_215_664_901_532_9;
        assert_relative_eq!(cosine_integral_entire(1.0), gamma - 0.337_403_922_900_968, epsilon = 1e-14);
        assert_relative_eq!(cosine_integral_entire(5.0), gamma + 5f64.ln() + 0.190_029_749_656_644, epsilon = 1e-14);
        assert_eq!(cosine_integral_entire(0.0), 0.0);
    }

    #[test]
    fn sinc2_first_moment_matches_midpoint_quadrature() {
        for &(a, b) in &[(-3.0, 4.0), (1.9, 2.1), (0.5, 0.5001), (10.0, 130.0), (-500.0, -20.0), (-7.0, 7.0)] {
            let n = 200_000;
            let h = (b - a) / n as f64;
            let integral: f64 = (0..n)
                .map(|i| {
                    let x = a + (i as f64 + 0.5) * h;
                    x * sinc(x).powi(2)
                })
                .sum::<f64>()
                * h;
            assert_relative_eq!(sinc2_first_moment(a, b), integral, epsilon = 1e-9, max_relative = 1e-7);
        }
    }

    #[test]
    fn sinc_handles_origin() {
        assert_eq!(sinc(0.0), 1.0);
        assert_relative_eq!(sinc(1e-9), 1.0, epsilon = 1e-15);
        assert!(sinc(PI).abs() < 1e-15);
    }

    #[test]
    fn sinc2_mean_matches_midpoint_quadrature() {
        for &(a, b) in &[(-3.0, 4.0), (0.5, 0.5001), (10.0, 130.0), (-500.0, -20.0), (-1e-5, 1e-5)] {
            let n = 200_000;
            let h = (b - a) / n as f64;
            let mean: f64 = (0..n).map(|i| sinc(a + (i as f64 + 0.5) * h).powi(2)).sum::<f64>() / n as f64;
            assert_relative_eq!(sinc2_mean(a, b), mean, max_relative = 1e-7);
        }
    }

    #[test]
    fn full_line_integral_of_sinc2_is_pi() {
        let half = 1e7;
        assert_relative_eq!(sinc2_mean(-half, half) * 2.0 * half, PI, max_relative = 1e-6);
    }
}
