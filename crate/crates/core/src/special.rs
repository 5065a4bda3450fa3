//! Special functions used by the flat reference and the heat-trace route.

use std::f64::consts::PI;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// log |eta(tau)| for the Dedekind eta function, from the q-product
/// eta = q^{1/24} prod (1 - q^k), q = e^{2 pi i tau}. The product stops once
/// |q|^k < 1e-17.
pub fn log_abs_eta(re: f64, im: f64) -> f64 {
    let modulus = (-2.0 * PI * im).exp();
    let arg = 2.0 * PI * re;
    let mut acc = -PI * im / 12.0;
    let mut k = 1.0_f64;
    loop {
        let r = modulus.powf(k);
        if r < 1e-17 {
            break;
        }
        let c = (arg * k).cos();
        // |1 - r e^{i theta}|^2 = 1 - 2 r cos theta + r^2
        acc += 0.5 * (1.0 - 2.0 * r * c + r * r).ln();
        k += 1.0;
    }
    acc
}

/// Exponential integral E1(x) = int_x^inf e^{-t}/t dt for x > 0.
pub fn exp_integral_e1(x: f64) -> f64 {
    assert!(x > 0.0, "E1 needs a positive argument");
    if x > 700.0 {
        return 0.0;
    }
    if x <= 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        let mut k = 1.0;
        loop {
            term *= -x / k;
            let add = term / k;
            sum += add;
            if add.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
            k += 1.0;
        }
        -EULER_GAMMA - x.ln() - sum
    } else {
        // Modified Lentz on the continued fraction for e^x E1(x).
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let a = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (a * d + b);
            c = b + a / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-x).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from an arbitrary-precision evaluation.
    #[test]
    fn e1_matches_reference_values() {
        let cases = [
            (1e-3, 6.331_539_364_136_149),
            (0.5, 0.559_773_594_776_160_8),
            (1.0, 0.219_383_934_395_520_3),
            (2.5, 0.024_914_917_870_269_735),
            (10.0, 4.156_968_929_685_324e-6),
            (40.0, 1.036_773_261_451_657e-19),
        ];
        for (x, want) in cases {
            let got = exp_integral_e1(x);
            assert!((got - want).abs() <= 2e-14 * want, "E1({x}) = {got}, want {want}");
        }
    }

    #[test]
    fn eta_at_i_matches_gamma_quarter() {
        // eta(i) = Gamma(1/4) / (2 pi^{3/4})
        let want = (3.625_609_908_221_908_f64 / (2.0 * PI.powf(0.75))).ln();
        assert!((log_abs_eta(0.0, 1.0) - want).abs() < 1e-15);
    }

    #[test]
    fn eta_modulus_is_periodic_up_to_phase() {
        // |eta(tau + 1)| = |eta(tau)|
        let a = log_abs_eta(0.3, 1.7);
        let b = log_abs_eta(1.3, 1.7);
        assert!((a - b).abs() < 1e-14);
    }
}
