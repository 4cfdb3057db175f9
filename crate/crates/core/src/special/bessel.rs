//! Log of the modified Bessel function of the second kind.
//!
//! For `|ν| <= 50` the fractional order `μ ∈ [-½, ½]` is evaluated by
//! Temme's series (`x < 2`) or Steed's continued fraction (`x >= 2`), and the
//! ratio `K_{ν+1}/K_ν` is carried up by the three-term recurrence while the
//! logarithm accumulates. Above that the uniform asymptotic (Debye)
//! expansion is used; its polynomials are generated once at first use.

use std::sync::OnceLock;

use crate::error::{Error, Result};

const DEBYE_ORDER: f64 = 50.0;
const DEBYE_TERMS: usize = 14;

const G1_DAT: [f64; 14] = [
    -1.145_164_083_662_683_1,
    0.006_360_853_113_470_842,
    0.001_862_451_930_072_068_5,
    0.000_152_833_085_873_453_5,
    0.000_017_017_464_011_802_04,
    -6.459_750_292_334_725e-7,
    -5.181_984_843_251_938e-8,
    4.518_909_289_485_818e-10,
    3.243_322_737_102_087_3e-11,
    6.830_943_402_494_752e-13,
    2.835_350_275_517_21e-14,
    -7.988_390_576_932_359e-16,
    -3.372_667_730_077_195e-17,
    -3.658_633_480_921_052e-20,
];

const G2_DAT: [f64; 15] = [
    1.882_645_524_949_671_8,
    -0.077_490_658_396_167_52,
    -0.018_256_714_847_324_93,
    0.000_633_803_020_907_489_6,
    0.000_076_229_054_350_872_9,
    -9.550_164_756_172_044e-7,
    -8.892_726_810_788_635e-8,
    -1.952_133_477_231_961_4e-9,
    -9.400_305_273_588_516e-11,
    4.687_513_384_953_239e-12,
    2.265_853_574_692_576e-13,
    -1.172_550_969_848_801_5e-15,
    -7.044_133_820_024_522e-17,
    -2.437_787_831_010_769_4e-18,
    -7.522_524_321_825_39e-20,
];

fn cheb_eval(coef: &[f64], x: f64) -> f64 {
    let y2 = 2.0 * x;
    let (mut d, mut dd) = (0.0, 0.0);
    for &c in coef[1..].iter().rev() {
        let tmp = d;
        d = y2 * d - dd + c;
        dd = tmp;
    }
    x * d - dd + 0.5 * coef[0]
}

/// `(1/Γ(1+μ), 1/Γ(1-μ), g1, g2)` without cancellation near `μ = 0`.
fn temme_gamma(mu: f64) -> (f64, f64, f64, f64) {
    let x = 4.0 * mu.abs() - 1.0;
    let g1 = cheb_eval(&G1_DAT, x);
    let g2 = cheb_eval(&G2_DAT, x);
    (1.0 / (g2 - mu * g1), 1.0 / (g2 + mu * g1), g1, g2)
}

/// `(ln K_μ(x), K_{μ+1}(x)/K_μ(x))` for `|μ| <= ½`, `x < 2`.
fn temme_series(mu: f64, x: f64) -> (f64, f64) {
    let half_x = 0.5 * x;
    let ln_half_x = half_x.ln();
    let half_x_mu = (mu * ln_half_x).exp();
    let pi_mu = std::f64::consts::PI * mu;
    let sigma = -mu * ln_half_x;
    let sinrat = if pi_mu.abs() < f64::EPSILON { 1.0 } else { pi_mu / pi_mu.sin() };
    let sinhrat = if sigma.abs() < f64::EPSILON { 1.0 } else { sigma.sinh() / sigma };
    let (g_1pmu, g_1mmu, g1, g2) = temme_gamma(mu);

    let mut fk = sinrat * (sigma.cosh() * g1 - sinhrat * ln_half_x * g2);
    let mut pk = 0.5 / half_x_mu * g_1pmu;
    let mut qk = 0.5 * half_x_mu * g_1mmu;
    let mut ck = 1.0;
    let mut sum0 = fk;
    let mut sum1 = pk;
    for k in 1..15_000 {
        let k = k as f64;
        fk = (k * fk + pk + qk) / (k * k - mu * mu);
        ck *= half_x * half_x / k;
        pk /= k - mu;
        qk /= k + mu;
        let hk = -k * fk + pk;
        let del0 = ck * fk;
        sum0 += del0;
        sum1 += ck * hk;
        if del0.abs() < 0.5 * sum0.abs() * f64::EPSILON {
            break;
        }
    }
    (sum0.ln(), sum1 * 2.0 / (x * sum0))
}

/// `(ln K_μ(x), K_{μ+1}(x)/K_μ(x))` for `|μ| <= ½`, `x >= 2`.
fn steed_cf2(mu: f64, x: f64) -> (f64, f64) {
    let mut bi = 2.0 * (1.0 + x);
    let mut di = 1.0 / bi;
    let mut delhi = di;
    let mut hi = di;
    let mut qi = 0.0;
    let mut qip1 = 1.0;
    let mut ai = -(0.25 - mu * mu);
    let a1 = ai;
    let mut ci = -ai;
    let mut bqi = -ai;
    let mut s = 1.0 + bqi * delhi;
    for i in 2..10_000 {
        ai -= 2.0 * (i - 1) as f64;
        ci = -ai * ci / i as f64;
        let tmp = (qi - bi * qip1) / ai;
        qi = qip1;
        qip1 = tmp;
        bqi += ci * qip1;
        bi += 2.0;
        di = 1.0 / (bi + ai * di);
        delhi *= bi * di - 1.0;
        hi += delhi;
        let dels = bqi * delhi;
        s += dels;
        if (dels / s).abs() < f64::EPSILON {
            break;
        }
    }
    hi *= -a1;
    let ln_k = 0.5 * (std::f64::consts::PI / (2.0 * x)).ln() - s.ln() - x;
    (ln_k, (mu + x + 0.5 - hi) / x)
}

fn log_k_recurrence(nu: f64, x: f64) -> f64 {
    let steps = (nu + 0.5).floor();
    let mu = nu - steps;
    let (mut ln_k, mut ratio) = if x < 2.0 { temme_series(mu, x) } else { steed_cf2(mu, x) };
    for k in 1..=(steps as usize) {
        ln_k += ratio.ln();
        ratio = 1.0 / ratio + 2.0 * (mu + k as f64) / x;
    }
    ln_k
}

/// Debye polynomials `u_k(t)` as dense coefficient vectors in powers of `t`.
fn debye_polys() -> &'static [Vec<f64>] {
    static POLYS: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    POLYS.get_or_init(|| {
        // u_{k+1} = ½ t²(1 - t²) u_k' + ⅛ ∫_0^t (1 - 5s²) u_k(s) ds
        let mut polys = vec![vec![1.0]];
        for k in 0..DEBYE_TERMS - 1 {
            let u = &polys[k];
            let mut next = vec![0.0; u.len() + 3];
            for (p, &a) in u.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let p_f = p as f64;
                if p > 0 {
                    next[p + 1] += 0.5 * p_f * a;
                    next[p + 3] -= 0.5 * p_f * a;
                }
                next[p + 1] += a / (8.0 * (p_f + 1.0));
                next[p + 3] -= 5.0 * a / (8.0 * (p_f + 3.0));
            }
            polys.push(next);
        }
        polys
    })
}

fn log_k_debye(nu: f64, x: f64) -> f64 {
    let z = x / nu;
    let root = 1.0_f64.hypot(z);
    let t = 1.0 / root;
    let eta = root + (z / (1.0 + root)).ln();
    let mut sum = 0.0;
    let mut nu_pow = 1.0;
    for (k, poly) in debye_polys().iter().enumerate() {
        let val = poly.iter().rev().fold(0.0, |acc, &a| acc * t + a);
        let term = if k % 2 == 0 { val } else { -val } / nu_pow;
        sum += term;
        if k > 0 && term.abs() < 1e-17 * sum.abs() {
            break;
        }
        nu_pow *= nu;
    }
    0.5 * (std::f64::consts::PI * t / (2.0 * nu)).ln() - nu * eta + sum.ln()
}

/// `ln K_ν(x)` for any real order and `x > 0`.
pub fn log_bessel_k(order: f64, arg: f64) -> Result<f64> {
    if !(arg > 0.0) || arg.is_infinite() {
        return Err(Error::Domain { what: "log_bessel_k", value: arg });
    }
    if !order.is_finite() {
        return Err(Error::Domain { what: "log_bessel_k order", value: order });
    }
    let nu = order.abs();
    Ok(if nu > DEBYE_ORDER { log_k_debye(nu, arg) } else { log_k_recurrence(nu, arg) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_integer_closed_form() {
        for &x in &[1e-6, 0.3, 2.0, 7.5, 300.0] {
            let exact = 0.5 * (std::f64::consts::PI / (2.0 * x)).ln() - x;
            let got = log_bessel_k(0.5, x).unwrap();
            assert!((got - exact).abs() < 1e-13 * (1.0 + exact.abs()), "x={x}");
            // K_{3/2}(x) = K_{1/2}(x) (1 + 1/x)
            let got = log_bessel_k(1.5, x).unwrap();
            let exact = exact + (1.0 + 1.0 / x).ln();
            assert!((got - exact).abs() < 1e-12 * (1.0 + exact.abs()), "x={x}");
        }
    }

    #[test]
    fn symmetric_in_order() {
        for &(nu, x) in &[(0.3, 0.5), (7.2, 3.0), (120.0, 40.0)] {
            assert_eq!(log_bessel_k(nu, x).unwrap(), log_bessel_k(-nu, x).unwrap());
        }
    }

    #[test]
    fn debye_polynomials_match_known_terms() {
        let p = debye_polys();
        let u1 = [0.0, 3.0 / 24.0, 0.0, -5.0 / 24.0];
        for (a, b) in p[1].iter().zip(u1.iter()) {
            assert!((a - b).abs() < 1e-16);
        }
        let u2 = [0.0, 0.0, 81.0 / 1152.0, 0.0, -462.0 / 1152.0, 0.0, 385.0 / 1152.0];
        for (a, b) in p[2].iter().zip(u2.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn continuous_across_debye_threshold() {
        for &x in &[1e-4, 0.5, 10.0, 49.0, 500.0] {
            let below = log_k_recurrence(50.0, x);
            let above = log_k_debye(50.0, x);
            assert!((below - above).abs() < 1e-12 * below.abs().max(1.0), "x={x}: {below} vs {above}");
        }
    }

    #[test]
    fn extreme_arguments_stay_finite() {
        for &nu in &[0.0, 0.25, 3.0, 49.9, 50.1, 1e3, 1e6] {
            for &x in &[1e-8, 1e-3, 1.0, 1e3, 1e8] {
                let v = log_bessel_k(nu, x).unwrap();
                assert!(v.is_finite(), "nu={nu} x={x}");
            }
        }
        assert!(log_bessel_k(1.0, 0.0).is_err());
    }
}
