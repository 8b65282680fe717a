//! Bernoulli success-run statistics and average single-pass fidelity predictors.
//!
//! The run-count PMF is an alternating binomial sum whose terms cancel
//! catastrophically in floating point beyond `n ~ 50`, so it is evaluated in
//! exact rational arithmetic (every `f64` is an exact dyadic rational). Run-count
//! first moments collapse to `p^k (1 + q (n - k))`, which is what the average
//! run length uses.

use crate::error::{check_probability, Error, Result};
use crate::model::{carry_fidelity_pow, TruncationConfig};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

fn ratio(p: f64) -> BigRational {
    BigRational::from_float(p).expect("finite probability")
}

fn binom(n: i64, k: i64) -> BigInt {
    if k < 0 || n < 0 || k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

fn pow(base: &BigRational, e: u64) -> BigRational {
    num_traits::pow::pow(base.clone(), e as usize)
}

/// `P(M_n^{(k)} = x)`: probability of exactly `x` maximal runs of length `>= k`
/// in `n` Bernoulli(`p`) trials.
pub fn run_survival_pmf(p: f64, n: u64, k: u64, x: u64) -> Result<f64> {
    check_probability(p)?;
    if k == 0 {
        return Err(Error::InvalidArgument("run length k must be >= 1".into()));
    }
    let pr = ratio(p);
    let qr = BigRational::one() - &pr;
    let upper = (n + 1) / (k + 1);
    let mut sum = BigRational::zero();
    for m in x..=upper {
        let term = if m == 0 {
            // q^{-1} (binom(n, -1) + q binom(n, 0)) = 1
            BigRational::one()
        } else {
            let rest = n as i64 - (m * k) as i64;
            let bracket = BigRational::from_integer(binom(rest, m as i64 - 1))
                + &qr * BigRational::from_integer(binom(rest, m as i64));
            BigRational::from_integer(binom(m as i64, x as i64))
                * pow(&pr, m * k)
                * pow(&qr, m - 1)
                * bracket
        };
        if (m - x) % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    Ok(sum.to_f64().unwrap_or(0.0))
}

/// `P_2(p, n, k, x) = P(p, n, k, x) - P(p, n, k + 1, x)`, clamped at 0.
///
/// Its first moment is the expected number of runs of length exactly `k`;
/// pointwise it differs from the distribution of that count once `n >= 6`.
pub fn exact_run_pmf(p: f64, n: u64, k: u64, x: u64) -> Result<f64> {
    let v = run_survival_pmf(p, n, k, x)? - run_survival_pmf(p, n, k + 1, x)?;
    Ok(v.max(0.0))
}

/// Expected number of runs of length `>= k`: `sum_x x P(p, n, k, x) = p^k (1 + q (n - k))`.
pub fn runs_at_least(p: f64, n: u64, k: u64) -> f64 {
    if k == 0 || k > n {
        return 0.0;
    }
    p.powi(k as i32) * (1.0 + (1.0 - p) * (n - k) as f64)
}

/// `R(p, n)`: average number of runs.
pub fn avg_runs(p: f64, n: u64) -> Result<f64> {
    check_probability(p)?;
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    Ok(runs_at_least(p, n, 1))
}

/// `S(p, n, k)`: average number of runs of length exactly `k`.
pub fn runs_exactly(p: f64, n: u64, k: u64) -> f64 {
    runs_at_least(p, n, k) - runs_at_least(p, n, k + 1)
}

/// `A(p, n)`: average run length, `sum_k k S(p, n, k) / R(p, n)`.
pub fn avg_run_length(p: f64, n: u64) -> Result<f64> {
    let r = avg_runs(p, n)?;
    if r <= 0.0 {
        return Err(Error::UndefinedStatistic(format!(
            "no runs expected for p={p}, n={n}"
        )));
    }
    // sum_k k (T_k - T_{k+1}) telescopes to sum_k T_k.
    let total: f64 = (1..=n).map(|k| runs_at_least(p, n, k)).sum();
    Ok(total / r)
}

/// `C(L)`: average number of distinct carry chains in a random addition.
pub fn distinct_carries(l_eff: u64) -> Result<f64> {
    let a = avg_run_length(0.75, l_eff)?;
    Ok(l_eff as f64 / (4.0 * (1.0 + (a - 1.0) / 3.0)))
}

/// `B(L)`: average number of distinct chains for an addition followed by a subtraction.
pub fn distinct_chains_addsub(l_eff: u64) -> Result<f64> {
    let a = avg_run_length(0.5, l_eff)?;
    Ok(l_eff as f64 / (4.0 * (1.0 + (a - 1.0) / 2.0)))
}

/// Exponent `C(w) A(3/4, w)` of `p_N` in the average adder fidelity.
pub fn adder_error_exponent(l_eff: u64) -> Result<f64> {
    if l_eff == 0 {
        return Ok(0.0);
    }
    Ok(distinct_carries(l_eff)? * avg_run_length(0.75, l_eff)?)
}

/// Exponent `B(w) A(1/2, w)` of `p_N` in the average add/subtract fidelity.
pub fn addsub_error_exponent(l_eff: u64) -> Result<f64> {
    if l_eff == 0 {
        return Ok(0.0);
    }
    Ok(distinct_chains_addsub(l_eff)? * avg_run_length(0.5, l_eff)?)
}

/// `T_A`: average fidelity of one truncated addition of uniformly random operands.
pub fn adder_fidelity_avg(cfg: &TruncationConfig) -> Result<f64> {
    let e = adder_error_exponent(cfg.window() as u64)?;
    Ok(carry_fidelity_pow(cfg.n, 1, e))
}

/// `T_AS`: average fidelity of one truncated addition followed by a subtraction.
pub fn addsub_fidelity_avg(cfg: &TruncationConfig) -> Result<f64> {
    let e = addsub_error_exponent(cfg.window() as u64)?;
    Ok(carry_fidelity_pow(cfg.n, 1, e))
}

/// Large-`L` adder fidelity `p_N^{(L-N-1)/2}`.
pub fn adder_fidelity_asymptotic(cfg: &TruncationConfig) -> f64 {
    carry_fidelity_pow(cfg.n, 1, cfg.window() as f64 / 2.0)
}

/// Large-`L` add/subtract fidelity `p_N^{(L-N-1)/3}`.
pub fn addsub_fidelity_asymptotic(cfg: &TruncationConfig) -> f64 {
    carry_fidelity_pow(cfg.n, 1, cfg.window() as f64 / 3.0)
}
