//! Effective-sum distribution for repeated add/subtract sequences.
//!
//! After `n` additions and `n` subtractions of uniformly random operands each
//! column sum is `C = A - B` with `A ~ Bi(n + 1, 1/2)` (the register bit plus the
//! addends) and `B ~ Bi(n, 1/2)`. The effective sum `D = sum_k C_k / 2^k` is
//! built on a dyadic grid by direct convolution, which keeps every mass
//! non-negative.

use crate::error::{check_probability, Error, Result};
use crate::model::{carry_fidelity_pow, carry_infidelity, pow2};
use serde::{Deserialize, Serialize};

/// Default number of columns retained in the effective sum.
pub const DEFAULT_CHAIN_WINDOW: usize = 8;

/// Probability mass function on the grid `{(offset + i) 2^{-s}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pmf {
    /// Grid exponent: the step is `2^{-s}`.
    pub s: u32,
    /// Grid index of `mass[0]`.
    pub offset: i64,
    /// Masses aligned to the grid.
    pub mass: Vec<f64>,
}

impl Pmf {
    /// Point mass at 0.
    pub fn delta(s: u32) -> Self {
        Self {
            s,
            offset: 0,
            mass: vec![1.0],
        }
    }

    /// Grid step `2^{-s}`.
    pub fn step(&self) -> f64 {
        1.0 / pow2(self.s as usize)
    }

    /// Value of grid point `i` of `mass`.
    pub fn value(&self, i: usize) -> f64 {
        (self.offset + i as i64) as f64 * self.step()
    }

    /// Smallest support point.
    pub fn support_min(&self) -> f64 {
        self.value(0)
    }

    /// Largest support point.
    pub fn support_max(&self) -> f64 {
        self.value(self.mass.len().saturating_sub(1))
    }

    /// `(value, mass)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.mass
            .iter()
            .enumerate()
            .map(move |(i, &m)| (self.value(i), m))
    }

    /// Total mass.
    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Expectation of `f(D)`.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.iter().map(|(v, m)| m * f(v)).sum()
    }

    /// Mean.
    pub fn mean(&self) -> f64 {
        self.expect(|v| v)
    }

    /// Variance.
    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.expect(|v| (v - mu) * (v - mu))
    }

    /// Mass at an exact grid value, 0 when off-grid or outside the support.
    pub fn mass_at(&self, v: f64) -> f64 {
        let idx = v / self.step();
        if idx.fract() != 0.0 {
            return 0.0;
        }
        let i = idx as i64 - self.offset;
        if i < 0 {
            return 0.0;
        }
        self.mass.get(i as usize).copied().unwrap_or(0.0)
    }

    /// Clamps round-off negatives in `[-1e-12, 0)` to zero and renormalizes.
    pub fn normalize(&mut self) {
        for m in &mut self.mass {
            if *m < 0.0 && *m >= -1e-12 {
                *m = 0.0;
            }
        }
        let t = self.total();
        if t > 0.0 {
            for m in &mut self.mass {
                *m /= t;
            }
        }
    }

    /// Distribution of `self + scale * other`, where `other` lives on the integer
    /// grid and `scale = 2^{-shift}` with `shift <= s`.
    fn convolve_scaled(&self, other: &Pmf, shift: u32) -> Pmf {
        debug_assert_eq!(other.s, 0);
        let stride = 1i64 << (self.s - shift);
        let len = self.mass.len() + (other.mass.len() - 1) * stride as usize;
        let mut out = vec![0.0; len];
        for (j, &w) in other.mass.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let base = j * stride as usize;
            for (i, &m) in self.mass.iter().enumerate() {
                out[base + i] += m * w;
            }
        }
        Pmf {
            s: self.s,
            offset: self.offset + other.offset * stride,
            mass: out,
        }
    }
}

fn binomial_pmf(n: u64, p: f64) -> Vec<f64> {
    let mut f = vec![1.0];
    for _ in 0..n {
        let mut g = vec![0.0; f.len() + 1];
        for (i, &v) in f.iter().enumerate() {
            g[i] += v * (1.0 - p);
            g[i + 1] += v * p;
        }
        f = g;
    }
    f
}

/// PMF of `A - B` with `A ~ Bi(n1, p1)` and `B ~ Bi(n2, p2)`; support `[-n2, n1]`.
pub fn binom_diff_pmf(n1: u64, p1: f64, n2: u64, p2: f64) -> Result<Pmf> {
    check_probability(p1)?;
    check_probability(p2)?;
    let fa = binomial_pmf(n1, p1);
    let fb = binomial_pmf(n2, p2);
    let mut mass = vec![0.0; (n1 + n2 + 1) as usize];
    for (a, &wa) in fa.iter().enumerate() {
        for (b, &wb) in fb.iter().enumerate() {
            mass[a + n2 as usize - b] += wa * wb;
        }
    }
    let mut pmf = Pmf {
        s: 0,
        offset: -(n2 as i64),
        mass,
    };
    pmf.normalize();
    Ok(pmf)
}

/// How the columns beyond the retained window are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TailModel {
    /// Drop them: `E[D] = 1 - 2^{-window}`.
    Truncate,
    /// Add their exact mean `2^{-window}` as a half-step shift. The shift never
    /// moves mass across an even integer, so `floor(d / 2)` is unchanged.
    MeanShift,
}

/// Parameters of the repeated add/subtract model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceModelParams {
    /// Number of paired additions and subtractions.
    pub n: u64,
    /// Register length.
    pub l: usize,
    /// Truncation level.
    pub big_n: usize,
    /// Correction depth.
    pub ell: usize,
    /// Columns retained in the effective sum.
    pub chain_window: usize,
    /// Treatment of the columns beyond the window.
    pub tail: TailModel,
}

impl SequenceModelParams {
    /// Parameters with the default window and tail model.
    pub fn new(n: u64, l: usize, big_n: usize, ell: usize) -> Self {
        Self {
            n,
            l,
            big_n,
            ell,
            chain_window: DEFAULT_CHAIN_WINDOW,
            tail: TailModel::MeanShift,
        }
    }

    /// Unprotected positions `L - N - 1`.
    pub fn window(&self) -> usize {
        self.l.saturating_sub(self.big_n + 1)
    }
}

/// PMF of the effective sum `D(n)`.
pub fn effective_sum_pmf(params: &SequenceModelParams) -> Result<Pmf> {
    let w = params.chain_window;
    if w == 0 {
        return Err(Error::InvalidArgument("chain window must be >= 1".into()));
    }
    if w > 30 {
        return Err(Error::InvalidArgument("chain window must be <= 30".into()));
    }
    let column = binom_diff_pmf(params.n + 1, 0.5, params.n, 0.5)?;
    let s = match params.tail {
        TailModel::Truncate => w as u32 - 1,
        TailModel::MeanShift => w as u32,
    };
    let mut d = Pmf::delta(s);
    for k in 0..w as u32 {
        d = d.convolve_scaled(&column, k);
    }
    if params.tail == TailModel::MeanShift {
        d.offset += 1;
    }
    d.normalize();
    Ok(d)
}

/// `E[floor(D / 2)^2]`, which tends to `(n + 1) / 6`.
pub fn floor_square_moment(pmf: &Pmf) -> f64 {
    pmf.expect(|d| {
        let f = (d / 2.0).floor();
        f * f
    })
}

/// `prod_d p_{N, floor(d/2)}^{Pr(D = d) (L - N - 1)}` over the whole grid.
pub fn sequence_fidelity_numeric(params: &SequenceModelParams) -> Result<f64> {
    if params.big_n == 0 {
        return Err(Error::InvalidArgument(
            "truncation level N must be >= 1".into(),
        ));
    }
    let pmf = effective_sum_pmf(params)?;
    let w = params.window() as f64;
    let log: f64 = pmf
        .iter()
        .filter(|&(_, m)| m > 0.0)
        .map(|(d, m)| {
            let a = (d / 2.0).floor() as i64;
            m * w * (-carry_infidelity(params.big_n, a)).ln_1p()
        })
        .sum();
    Ok(log.exp())
}

/// Closed-form repeated-adder law `p_N^{(L - N - 1)(n + 1) / 6}`.
pub fn sequence_fidelity_closed(params: &SequenceModelParams) -> f64 {
    let e = params.window() as f64 * (params.n as f64 + 1.0) / 6.0;
    carry_fidelity_pow(params.big_n, 1, e)
}

/// Rebased law `T_AS(1)^{(n + 1) / 2}` from a measured single add/subtract fidelity.
pub fn sequence_fidelity_rebased(single_pass: f64, n: u64) -> f64 {
    single_pass.powf((n as f64 + 1.0) / 2.0)
}

/// Corrected-adder law `p_N^{(L/3)(ell/6)} p_{N+ell}^{(L - N - 1)(n + 1) / 6}`.
///
/// The first factor is the one-off cost of the corrections; the second is the
/// depth decay of an uncorrected adder at level `N + ell`. `ell = 0` reduces to
/// [`sequence_fidelity_closed`].
pub fn corrected_fidelity(params: &SequenceModelParams) -> f64 {
    let overhead = carry_fidelity_pow(
        params.big_n,
        1,
        params.l as f64 / 3.0 * params.ell as f64 / 6.0,
    );
    let e = params.window() as f64 * (params.n as f64 + 1.0) / 6.0;
    overhead * carry_fidelity_pow(params.big_n + params.ell, 1, e)
}

/// Forward law used by the inversion: `p_N^{(n + 2) L / 12}`.
pub fn inversion_forward(big_n: usize, n: u64, l: usize) -> f64 {
    carry_fidelity_pow(big_n, 1, (n as f64 + 2.0) * l as f64 / 12.0)
}

/// Smallest `N >= 1` with `p_N^{(n + 2) L / 12} >= 1 - epsilon`.
pub fn truncation_level_for_error(epsilon: f64, n: u64, l: usize) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    if l < 2 {
        return Err(Error::InvalidArgument("L must be >= 2".into()));
    }
    (1..=1000)
        .find(|&big_n| inversion_forward(big_n, n, l) >= 1.0 - epsilon)
        .ok_or_else(|| Error::Unattainable(format!("no N <= 1000 reaches error {epsilon}")))
}
