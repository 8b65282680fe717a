//! Exact per-instance truncation fidelity.
//!
//! Qubit `j` of a Draper adder truncated to level `N` misses the phase
//! information carried in from column `j - N - 1`. For a single addition that
//! information is the carry bit, so every carry event at a position `p <= L - N - 2`
//! multiplies the correct-outcome probability by the carry fidelity
//! `p_N = (1 + cos(pi / 2^N)) / 2`. For sequences of additions and subtractions the
//! missing information is `floor(d_p / 2)` where `d_p` is the effective sum.
//!
//! [`product_form_fidelity`] evaluates the full per-qubit phase mismatch and is
//! equal to the statevector probability for any sequence and correction depth.

use crate::error::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

/// Register length, truncation level and correction depth.
///
/// Configurations with `N >= L - 1` are valid; their truncation window is empty
/// and every fidelity is exactly 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TruncationConfig {
    /// Register length in bits.
    pub l: usize,
    /// Truncation level: the finest kept rotation is `pi / 2^N`.
    pub n: usize,
    /// Correction depth, 0 for an uncorrected adder.
    pub ell: usize,
}

impl TruncationConfig {
    /// Validated constructor. Requires `L >= 1` and `N >= 1`.
    pub fn new(l: usize, n: usize, ell: usize) -> Result<Self> {
        if l == 0 {
            return Err(Error::InvalidArgument(
                "register length L must be >= 1".into(),
            ));
        }
        if n == 0 {
            return Err(Error::InvalidArgument(
                "truncation level N must be >= 1".into(),
            ));
        }
        Ok(Self { l, n, ell })
    }

    /// Number of unprotected positions, `max(L - N - 1, 0)`.
    pub fn window(&self) -> usize {
        self.l.saturating_sub(self.n + 1)
    }

    /// True when truncation removes nothing that can affect the outcome.
    pub fn is_vacuous(&self) -> bool {
        self.window() == 0
    }
}

/// Little-endian bit string of fixed length (index 0 is the least significant bit).
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BitString {
    bits: Vec<u8>,
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self
            .bits
            .iter()
            .rev()
            .map(|&b| if b == 1 { '1' } else { '0' })
            .collect();
        write!(f, "BitString({s})")
    }
}

impl BitString {
    /// All-zero string of length `l`.
    pub fn zeros(l: usize) -> Self {
        Self { bits: vec![0; l] }
    }

    /// Encodes `value` in `l` bits. Fails if the value does not fit.
    pub fn from_u64(value: u64, l: usize) -> Result<Self> {
        if l < 64 && value >> l != 0 {
            return Err(Error::InvalidArgument(format!(
                "{value} does not fit in {l} bits"
            )));
        }
        let bits = (0..l)
            .map(|i| if i < 64 { ((value >> i) & 1) as u8 } else { 0 })
            .collect();
        Ok(Self { bits })
    }

    /// Builds from explicit little-endian bits. Every entry must be 0 or 1.
    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidArgument("bits must be 0 or 1".into()));
        }
        Ok(Self { bits })
    }

    /// Uniformly random string of length `l`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, l: usize) -> Self {
        let mut bits = Vec::with_capacity(l);
        while bits.len() < l {
            let w: u64 = rng.random();
            for i in 0..64.min(l - bits.len()) {
                bits.push(((w >> i) & 1) as u8);
            }
        }
        Self { bits }
    }

    /// Number of bits.
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    /// True for the zero-length string.
    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Bit at position `i` (0 or 1).
    pub fn bit(&self, i: usize) -> u8 {
        self.bits[i]
    }

    /// Little-endian bits.
    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// Numeric value when it fits in a `u64`.
    pub fn to_u64(&self) -> Option<u64> {
        if self.bits.iter().skip(64).any(|&b| b == 1) {
            return None;
        }
        Some(
            self.bits
                .iter()
                .take(64)
                .enumerate()
                .fold(0u64, |acc, (i, &b)| acc | (u64::from(b) << i)),
        )
    }

    /// `(self + other) mod 2^L`.
    pub fn wrapping_add(&self, other: &Self) -> Result<Self> {
        check_len(self.len(), other.len())?;
        let mut carry = 0u8;
        let bits = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(&x, &a)| {
                let s = x + a + carry;
                carry = s >> 1;
                s & 1
            })
            .collect();
        Ok(Self { bits })
    }

    /// `(self - other) mod 2^L`.
    pub fn wrapping_sub(&self, other: &Self) -> Result<Self> {
        self.wrapping_add(&twos_complement(other))
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, got })
    }
}

/// `(2^L - a) mod 2^L`.
pub fn twos_complement(a: &BitString) -> BitString {
    let l = a.len();
    let inverted = BitString {
        bits: a.bits.iter().map(|&b| 1 - b).collect(),
    };
    let mut one = BitString::zeros(l);
    if l > 0 {
        one.bits[0] = 1;
    }
    inverted.wrapping_add(&one).expect("equal lengths")
}

/// A maximal run of consecutive carry (or borrow) events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chain {
    /// 0-indexed position of the initiating event.
    pub start: usize,
    /// Number of consecutive events.
    pub length: usize,
}

/// Carry chains of a concrete instance and the number of events that cost fidelity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CarryProfile {
    /// Disjoint chains ordered by start position.
    pub chains: Vec<Chain>,
    /// Events at positions `p <= L - N - 2`.
    pub total_effective_errors: usize,
}

/// Carry fidelity `p_{N,a} = (1 + cos(a pi / 2^N)) / 2`. Exactly 1 for `a = 0`.
pub fn carry_fidelity(n: usize, a: i64) -> f64 {
    if a == 0 {
        return 1.0;
    }
    1.0 - carry_infidelity(n, a)
}

/// `1 - p_{N,a} = sin^2(a pi / 2^{N+1})`, accurate when the angle is tiny.
pub fn carry_infidelity(n: usize, a: i64) -> f64 {
    let s = (a as f64 * PI / pow2(n + 1)).sin();
    s * s
}

/// `p_{N,a}^e` evaluated through `ln(1 - sin^2)` so large exponents keep precision.
pub fn carry_fidelity_pow(n: usize, a: i64, e: f64) -> f64 {
    if a == 0 || e == 0.0 {
        return 1.0;
    }
    (e * (-carry_infidelity(n, a)).ln_1p()).exp()
}

pub(crate) fn pow2(k: usize) -> f64 {
    2f64.powi(k as i32)
}

fn profile(events: impl Iterator<Item = bool>, cfg: &TruncationConfig) -> CarryProfile {
    let mut chains: Vec<Chain> = Vec::new();
    let mut total = 0;
    let mut prev = false;
    for (p, ev) in events.enumerate() {
        if ev {
            if prev {
                chains.last_mut().expect("open chain").length += 1;
            } else {
                chains.push(Chain {
                    start: p,
                    length: 1,
                });
            }
            if p + cfg.n + 2 <= cfg.l {
                total += 1;
            }
        }
        prev = ev;
    }
    CarryProfile {
        chains,
        total_effective_errors: total,
    }
}

fn check_operands(x: &BitString, a: &BitString, cfg: &TruncationConfig) -> Result<()> {
    check_len(cfg.l, x.len())?;
    check_len(cfg.l, a.len())
}

/// Carry chains of `x + a`. A carry event is a column with `x_i + a_i + c_in >= 2`.
pub fn extract_carry_profile(
    x: &BitString,
    a: &BitString,
    cfg: &TruncationConfig,
) -> Result<CarryProfile> {
    check_operands(x, a, cfg)?;
    let mut carry = 0u8;
    let events = x.bits.iter().zip(&a.bits).map(move |(&xi, &ai)| {
        let s = xi + ai + carry;
        carry = s >> 1;
        s >= 2
    });
    Ok(profile(events, cfg))
}

/// Borrow chains of `x - a`. A borrow event is a column with `x_i - a_i - b_in < 0`.
pub fn extract_borrow_profile(
    x: &BitString,
    a: &BitString,
    cfg: &TruncationConfig,
) -> Result<CarryProfile> {
    check_operands(x, a, cfg)?;
    let mut borrow = 0i8;
    let events = x.bits.iter().zip(&a.bits).map(move |(&xi, &ai)| {
        let s = xi as i8 - ai as i8 - borrow;
        borrow = i8::from(s < 0);
        s < 0
    });
    Ok(profile(events, cfg))
}

/// Probability of the correct outcome of a truncated `x + a`: `p_N^{effective errors}`.
pub fn exact_truncation_fidelity(
    x: &BitString,
    a: &BitString,
    cfg: &TruncationConfig,
) -> Result<f64> {
    let prof = extract_carry_profile(x, a, cfg)?;
    Ok(carry_fidelity(cfg.n, 1).powi(prof.total_effective_errors as i32))
}

/// Probability of the correct outcome of a truncated `x - a` (negated rotations).
pub fn exact_subtraction_fidelity(
    x: &BitString,
    a: &BitString,
    cfg: &TruncationConfig,
) -> Result<f64> {
    let prof = extract_borrow_profile(x, a, cfg)?;
    Ok(carry_fidelity(cfg.n, 1).powi(prof.total_effective_errors as i32))
}

/// Initial register value followed by additions and subtractions, all modulo `2^L`.
///
/// Order does not affect the outcome: consecutive truncated transforms cancel,
/// so only the column sums matter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceSpec {
    /// Initial register value.
    pub x: BitString,
    /// Added operands.
    pub adds: Vec<BitString>,
    /// Subtracted operands.
    pub subs: Vec<BitString>,
}

impl SequenceSpec {
    /// Validates that every operand has the length of `x`.
    pub fn new(x: BitString, adds: Vec<BitString>, subs: Vec<BitString>) -> Result<Self> {
        for op in adds.iter().chain(&subs) {
            check_len(x.len(), op.len())?;
        }
        Ok(Self { x, adds, subs })
    }

    /// Register length.
    pub fn len(&self) -> usize {
        self.x.len()
    }

    /// True for a zero-length register.
    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Column sums of the operands alone: `sum_i a_{i,k} - sum_i b_{i,k}`.
    pub fn operand_columns(&self) -> Vec<i64> {
        let mut c = vec![0i64; self.len()];
        for a in &self.adds {
            for (ck, &b) in c.iter_mut().zip(a.bits()) {
                *ck += i64::from(b);
            }
        }
        for b in &self.subs {
            for (ck, &bit) in c.iter_mut().zip(b.bits()) {
                *ck -= i64::from(bit);
            }
        }
        c
    }

    /// Column sums `c_k = x_k + sum_i a_{i,k} - sum_i b_{i,k}`.
    pub fn columns(&self) -> Vec<i64> {
        let mut c = self.operand_columns();
        for (ck, &b) in c.iter_mut().zip(self.x.bits()) {
            *ck += i64::from(b);
        }
        c
    }

    /// Final register value modulo `2^L`.
    pub fn result(&self) -> BitString {
        let mut y = self.x.clone();
        for a in &self.adds {
            y = y.wrapping_add(a).expect("validated lengths");
        }
        for b in &self.subs {
            y = y.wrapping_sub(b).expect("validated lengths");
        }
        y
    }

    fn check(&self, cfg: &TruncationConfig) -> Result<()> {
        check_len(cfg.l, self.len())?;
        for op in self.adds.iter().chain(&self.subs) {
            check_len(cfg.l, op.len())?;
        }
        Ok(())
    }
}

/// Effective sums `d_j = sum_{k=j-w+1}^{j} c_k / 2^{j-k}` for `j = 0..L`.
pub fn effective_sums(seq: &SequenceSpec, window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::InvalidArgument(
            "effective-sum window must be >= 1".into(),
        ));
    }
    let c = seq.columns();
    Ok((0..c.len())
        .map(|j| {
            let lo = (j + 1).saturating_sub(window);
            (lo..=j).map(|k| c[k] as f64 / pow2(j - k)).sum()
        })
        .collect())
}

/// `prod_{j=0}^{L-N-2} p_{N, floor(d_j / 2)}` from windowed effective sums.
///
/// Exact for any sequence once `window >= L`; shorter windows ignore carry
/// information from columns further than `window - 1` below.
pub fn sequence_instance_fidelity(
    seq: &SequenceSpec,
    cfg: &TruncationConfig,
    window: usize,
) -> Result<f64> {
    seq.check(cfg)?;
    let d = effective_sums(seq, window)?;
    Ok(d.iter()
        .take(cfg.window())
        .map(|&dj| carry_fidelity(cfg.n, (dj / 2.0).floor() as i64))
        .product())
}

/// Largest rotation level that can change an `f64` probability.
const MAX_LEVEL: usize = 100;

/// Exact correct-outcome probability of a truncated (and optionally corrected)
/// Draper sequence, equal to the statevector probability.
///
/// Qubit `j` ends with phase mismatch
/// `2 pi [ sum_{d=0}^{N} (x - y + A - B)_{j-d} / 2^{d+1} + sum_{d=N+1}^{N+ell} (A - B)_{j-d} / 2^{d+1} ]`
/// where `y` is the correct result and `A - B` the operand column sums; the
/// probability is the product of `cos^2` of half of each mismatch.
pub fn product_form_fidelity(seq: &SequenceSpec, cfg: &TruncationConfig) -> Result<f64> {
    seq.check(cfg)?;
    let l = cfg.l;
    let y = seq.result();
    let ops = seq.operand_columns();
    let qft_level = cfg.n.min(l.saturating_sub(1)).min(MAX_LEVEL);
    let add_level = (cfg.n + cfg.ell).min(l.saturating_sub(1)).min(MAX_LEVEL);
    // Mismatch in units of 2^{-(add_level + 1)} turns.
    let k = add_level + 1;
    let modulus: i128 = 1i128 << k;
    let mut prob = 1.0;
    for j in 0..l {
        let mut phi: i128 = 0;
        for d in 0..=add_level.min(j) {
            let col = j - d;
            let mut v = ops[col] as i128;
            if d <= qft_level {
                v += i128::from(seq.x.bit(col)) - i128::from(y.bit(col));
            }
            phi += v << (add_level - d);
        }
        let r = phi.rem_euclid(modulus);
        if r != 0 {
            let half_angle = PI * r as f64 / modulus as f64;
            let c = half_angle.cos();
            prob *= c * c;
        }
    }
    Ok(prob)
}
