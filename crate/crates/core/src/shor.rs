//! CNOT-induced decoherence, modular-adder fidelity and Shor's-algorithm
//! composition for truncated Fourier arithmetic.
//!
//! The modular adder copies the register MSB onto an MS qubit. A coherent MSB
//! error of probability `1 - p` then leaves the register effectively mixed,
//! costing `C_S = p^2 + (1 - p)^2`; a later subtraction partially undoes it,
//! averaging to `C_D = (2 C_S + 1) / 3`. `C_S` uses the squared form, which is
//! the variant consistent with the decoherence argument and the table values.

use crate::error::{check_probability, Error, Result};
use crate::model::{carry_fidelity, carry_fidelity_pow, TruncationConfig};
use crate::runstats::{adder_fidelity_avg, addsub_fidelity_avg};
use serde::{Deserialize, Serialize};

/// Parameters of a Shor-model evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShorParams {
    /// Register length and truncation.
    pub cfg: TruncationConfig,
    /// Replaces `p_N` in the CNOT factors when set.
    pub p_override: Option<f64>,
}

impl ShorParams {
    /// Parameters with the carry fidelity derived from `cfg.n`.
    pub fn new(cfg: TruncationConfig) -> Self {
        Self {
            cfg,
            p_override: None,
        }
    }

    /// Carry fidelity used by the CNOT factors.
    pub fn p(&self) -> Result<f64> {
        match self.p_override {
            Some(p) => {
                check_probability(p)?;
                Ok(p)
            }
            None => Ok(carry_fidelity(self.cfg.n, 1)),
        }
    }

    /// `(C_S, C_D)`.
    pub fn cnot_factors(&self) -> Result<(f64, f64)> {
        let cs = cnot_mix(self.p()?)?;
        Ok((cs, (2.0 * cs + 1.0) / 3.0))
    }
}

/// `p^2 + (1 - p)^2`: register fidelity after an MSB of correctness `p` is copied out.
pub fn cnot_mix(pr_ms_correct: f64) -> Result<f64> {
    check_probability(pr_ms_correct)?;
    let q = 1.0 - pr_ms_correct;
    Ok(pr_ms_correct * pr_ms_correct + q * q)
}

/// `(C_S, C_D)` at truncation level `N`.
pub fn cnot_factors(n: usize) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::InvalidArgument("N must be >= 1".into()));
    }
    let cs = cnot_mix(carry_fidelity(n, 1))?;
    Ok((cs, (2.0 * cs + 1.0) / 3.0))
}

/// Single modular adder: `(C_S / 2)(T_A + T_AS C_D)`.
pub fn modular_adder_fidelity(cfg: &TruncationConfig) -> Result<f64> {
    let (cs, cd) = cnot_factors(cfg.n)?;
    Ok(cs / 2.0 * (adder_fidelity_avg(cfg)? + addsub_fidelity_avg(cfg)? * cd))
}

/// Sequential mixing laws `1/2 + 1/2 C^{n/2}` for `C = C_S`, `C_D` and `C_S C_D`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequentialFidelities {
    /// Repeated single CNOT factors.
    pub f_s: f64,
    /// Repeated double CNOT factors.
    pub f_d: f64,
    /// Alternating single and double factors.
    pub f_ds: f64,
}

/// Sequential mixing laws after `n` modular adders at level `N`.
pub fn sequential_fidelities(n: f64, big_n: usize) -> Result<SequentialFidelities> {
    if !(n.is_finite() && n >= 0.0) {
        return Err(Error::InvalidArgument(format!("n must be >= 0, got {n}")));
    }
    let (cs, cd) = cnot_factors(big_n)?;
    let law = |c: f64| 0.5 + 0.5 * (n / 2.0 * c.ln()).exp();
    Ok(SequentialFidelities {
        f_s: law(cs),
        f_d: law(cd),
        f_ds: law(cs * cd),
    })
}

/// Shor exponent `L(L^2 + 2) / 24` of the carry fidelity.
pub fn shor_truncation_exponent(l: usize) -> f64 {
    let lf = l as f64;
    lf * (lf * lf + 2.0) / 24.0
}

/// `[1/2 + 1/2 (C_S C_D)^{L^2/4}] p_N^{L(L^2+2)/24}`.
pub fn shor_fidelity(l: usize, big_n: usize) -> Result<f64> {
    let cfg = TruncationConfig::new(l, big_n, 0)?;
    let mix = sequential_fidelities((l * l) as f64 / 2.0, cfg.n)?.f_ds;
    Ok(mix * carry_fidelity_pow(cfg.n, 1, shor_truncation_exponent(l)))
}

/// Shor success with `ell` corrective levels: the mixing factor at level `N`,
/// the one-off correction cost `p_N^{(L/3)(ell/6)}` and the decay at level `N + ell`.
///
/// Not monotone in `ell`: the one-off cost grows linearly while the decay
/// saturates once `N + ell` is fine enough.
pub fn corrected_shor_success(l: usize, big_n: usize, ell: usize) -> Result<f64> {
    let cfg = TruncationConfig::new(l, big_n, ell)?;
    let mix = sequential_fidelities((l * l) as f64 / 2.0, cfg.n)?.f_ds;
    let overhead = carry_fidelity_pow(cfg.n, 1, l as f64 / 3.0 * ell as f64 / 6.0);
    Ok(mix * overhead * carry_fidelity_pow(cfg.n + ell, 1, shor_truncation_exponent(l)))
}

/// Number of QFTs in the LNN modular exponentiation: `16 L^2 + 4 L + 1`.
pub fn qft_count(l: u64) -> u64 {
    16 * l * l + 4 * l + 1
}

/// Rotations removed by truncating one QFT to level `N`: `(L - N - 1)(L - N) / 2`.
pub fn rotations_saved_per_qft(l: u64, big_n: u64) -> u64 {
    if big_n + 1 >= l {
        return 0;
    }
    (l - big_n - 1) * (l - big_n) / 2
}

/// Total rotations removed across the modular exponentiation.
pub fn truncation_saving(l: u64, big_n: u64) -> u128 {
    u128::from(qft_count(l)) * u128::from(rotations_saved_per_qft(l, big_n))
}

/// Gate count of the truncated modular exponentiation:
/// `L^3(46 + 16N) + L^2(-8N^2 - 4N + 2325/2) + L(5 - N - 2N^2) - N/2 - N^2/2 - 2`.
pub fn gate_count(l: u64, big_n: u64) -> Result<f64> {
    if l < big_n + 1 {
        return Err(Error::InvalidArgument(format!(
            "need L >= N + 1, got L={l}, N={big_n}"
        )));
    }
    let (l, n) = (i128::from(l), i128::from(big_n));
    let twice = 2 * l * l * l * (46 + 16 * n)
        + l * l * (-16 * n * n - 8 * n + 2325)
        + 2 * l * (5 - n - 2 * n * n)
        - n
        - n * n
        - 4;
    Ok(twice as f64 / 2.0)
}
