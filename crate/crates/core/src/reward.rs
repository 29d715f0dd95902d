//! Single-user expected reward under threshold transmission.
//!
//! The potential reward of a packet is `V = ln(1 + snr * H)` with `H`
//! exponentially distributed with unit mean. A node that transmits with
//! probability `a` does so exactly when `V` exceeds the threshold whose
//! exceedance probability is `a`, so its expected reward per slot is
//! `g(a) = E[V; V >= threshold(a)]`. Integration by parts gives
//!
//! ```text
//! g(a) = a * ln(1 - snr * ln a) + exp(1/snr) * E1(-ln a + 1/snr)
//! ```
//!
//! where `E1` is the exponential integral.

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const EPS: f64 = 1e-15;
const MAX_TERMS: usize = 500;

/// `exp(x) * E1(x)` for `x > 0`.
///
/// Power series below 1, Lentz continued fraction above.
pub fn scaled_exp_integral(x: f64) -> f64 {
    assert!(x > 0.0, "E1 is only defined for positive arguments");
    if x < 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..MAX_TERMS {
            term *= -x / k as f64;
            let add = term / k as f64;
            sum += add;
            if add.abs() < EPS * sum.abs().max(1e-300) {
                break;
            }
        }
        (-EULER_GAMMA - x.ln() - sum) * x.exp()
    } else {
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..MAX_TERMS {
            let an = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < EPS {
                break;
            }
        }
        h
    }
}

/// Exponential integral `E1(x) = int_x^inf e^-t / t dt`.
pub fn exp_integral(x: f64) -> f64 {
    scaled_exp_integral(x) * (-x).exp()
}

/// Expected reward `g(a)` of a lone transmitter with transmission
/// probability `a` and mean SNR `snr`. `g(0) = 0`.
pub fn single_user_reward(a: f64, snr: f64) -> f64 {
    debug_assert!((0.0..=1.0 + 1e-12).contains(&a));
    if a <= 0.0 {
        return 0.0;
    }
    let a = a.min(1.0);
    let h = -a.ln();
    let x = h + 1.0 / snr;
    // exp(1/snr) * E1(x) = exp(-h) * exp(x) * E1(x) and exp(-h) = a.
    a * ((1.0 + snr * h).ln() + scaled_exp_integral(x))
}

/// Reward threshold whose exceedance probability is `a`.
pub fn threshold_for_probability(a: f64, snr: f64) -> f64 {
    if a <= 0.0 {
        f64::INFINITY
    } else {
        (1.0 - snr * a.ln()).ln()
    }
}

/// `P(V >= threshold)`.
pub fn exceedance_probability(threshold: f64, snr: f64) -> f64 {
    if threshold <= 0.0 {
        1.0
    } else {
        (-(threshold.exp() - 1.0) / snr).exp()
    }
}
