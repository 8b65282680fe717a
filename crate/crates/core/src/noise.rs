//! Gaussian Z-rotation control error: closed-form average fidelities and the
//! equivalent stochastic Z-flip rate.
//!
//! Every phase rotation receives an independent error `eps ~ N(0, sigma^2)`.
//! Averaging `R_z(eps)` over the error is a dephasing channel that flips Z with
//! probability `q = (1 - e^{-sigma^2/2}) / 2`.

use crate::error::{Error, Result};
use crate::sim::trial_rng;
use num_complex::Complex64;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Gaussian phase-error strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    sigma: f64,
}

impl NoiseSpec {
    /// Validates `sigma >= 0` and finite.
    pub fn new(sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        Ok(Self { sigma })
    }

    /// Standard deviation in radians.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Equivalent Z-flip probability.
    pub fn z_flip_probability(&self) -> f64 {
        -0.5 * (-self.sigma * self.sigma / 2.0).exp_m1()
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma.is_finite() && sigma >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "sigma must be finite and >= 0, got {sigma}"
        )))
    }
}

/// `ln((1 + e^{-x}) / 2)` without cancellation for small `x`.
fn ln_half_one_plus_exp_neg(x: f64) -> f64 {
    (0.5 * (-x).exp_m1()).ln_1p()
}

/// Average fidelity of an `L`-qubit Draper adder: `prod_{k=1}^{L} (1 + e^{-k sigma^2/2}) / 2`.
pub fn adder_mean_fidelity(l: usize, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    if l == 0 {
        return Err(Error::InvalidArgument("L must be >= 1".into()));
    }
    let s2 = sigma * sigma / 2.0;
    Ok((1..=l)
        .map(|k| ln_half_one_plus_exp_neg(k as f64 * s2))
        .sum::<f64>()
        .exp())
}

fn check_component(j: f64, c: f64, l: usize, sigma: f64) -> Result<()> {
    check_sigma(sigma)?;
    if !(j.is_finite() && j >= 0.0 && c.is_finite() && c >= 0.0) || l == 0 {
        return Err(Error::InvalidArgument(format!(
            "need j, c >= 0 and L >= 1, got j={j}, c={c}, L={l}"
        )));
    }
    Ok(())
}

/// General component with `j` transforms and `c` adders, exactly as printed:
/// `1/2 * prod_{k=1}^{L} (1 + e^{-(j(k-2)+c) sigma^2/2})`.
///
/// The single `1/2` prefactor leaves each factor near 2 for small `sigma`, so
/// the value is not a probability; use [`component_fidelity_normalized`].
pub fn component_fidelity(j: f64, c: f64, l: usize, sigma: f64) -> Result<f64> {
    check_component(j, c, l, sigma)?;
    let s2 = sigma * sigma / 2.0;
    let ln: f64 = (1..=l)
        .map(|k| (-(j * (k as f64 - 2.0) + c) * s2).exp().ln_1p())
        .sum();
    Ok(0.5 * ln.exp())
}

/// General component with a `1/2` per factor, matching the adder normalisation:
/// `prod_{k=1}^{L} (1 + e^{-(j(k-2)+c) sigma^2/2}) / 2`.
pub fn component_fidelity_normalized(j: f64, c: f64, l: usize, sigma: f64) -> Result<f64> {
    check_component(j, c, l, sigma)?;
    let s2 = sigma * sigma / 2.0;
    Ok((1..=l)
        .map(|k| ln_half_one_plus_exp_neg((j * (k as f64 - 2.0) + c) * s2))
        .sum::<f64>()
        .exp())
}

/// Circuit whose noisy fidelity is modelled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NoiseComponent {
    /// Single `L`-qubit Draper adder.
    Adder { l: usize },
    /// `j` transforms and `c` adders over `factors` qubits.
    General { j: f64, c: f64, factors: usize },
    /// `L`-bit modular adder: `j = 3`, `c = 3.5` over `L + 1` qubits.
    ModularAdder { l: usize },
    /// Full modular exponentiation: `j = 2L^2 + L/2`, `c = 3.5 L^2` over `L` qubits.
    ModExp { l: usize },
}

impl NoiseComponent {
    /// Average fidelity at `sigma` (per-factor normalisation for general components).
    pub fn fidelity(&self, sigma: f64) -> Result<f64> {
        match *self {
            NoiseComponent::Adder { l } => adder_mean_fidelity(l, sigma),
            NoiseComponent::General { j, c, factors } => {
                component_fidelity_normalized(j, c, factors, sigma)
            }
            NoiseComponent::ModularAdder { l } => {
                component_fidelity_normalized(3.0, 3.5, l + 1, sigma)
            }
            NoiseComponent::ModExp { l } => {
                let lf = l as f64;
                component_fidelity_normalized(2.0 * lf * lf + lf / 2.0, 3.5 * lf * lf, l, sigma)
            }
        }
    }
}

/// Largest `sigma` whose average fidelity is at least `target`, by bisection.
pub fn required_sigma(target: f64, component: &NoiseComponent) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "target must lie in (0, 1), got {target}"
        )));
    }
    let f = |s: f64| component.fidelity(s);
    let mut hi = 1.0;
    while f(hi)? >= target {
        hi *= 2.0;
        if hi > 1e3 {
            return Err(Error::Unattainable(format!(
                "fidelity stays above {target} for sigma up to 1e3"
            )));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid)? >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// `q = (1 - e^{-sigma^2/2}) / 2`.
pub fn z_flip_probability(sigma: f64) -> Result<f64> {
    Ok(NoiseSpec::new(sigma)?.z_flip_probability())
}

/// Inverse of [`z_flip_probability`] on `[0, 1/2)`.
pub fn flip_to_sigma(q: f64) -> Result<f64> {
    if !(q.is_finite() && (0.0..0.5).contains(&q)) {
        return Err(Error::InvalidArgument(format!(
            "flip probability must lie in [0, 1/2), got {q}"
        )));
    }
    Ok((-2.0 * (-2.0 * q).ln_1p()).sqrt())
}

/// Single-qubit density matrix.
pub type DensityMatrix = [[Complex64; 2]; 2];

/// `|+><+|`.
pub fn plus_state() -> DensityMatrix {
    let h = Complex64::new(0.5, 0.0);
    [[h, h], [h, h]]
}

/// `|+i><+i|`.
pub fn plus_i_state() -> DensityMatrix {
    let h = Complex64::new(0.5, 0.0);
    [
        [h, Complex64::new(0.0, -0.5)],
        [Complex64::new(0.0, 0.5), h],
    ]
}

/// `(1 - q) rho + q Z rho Z`.
pub fn dephasing_channel(rho: &DensityMatrix, q: f64) -> DensityMatrix {
    let s = 1.0 - 2.0 * q;
    [[rho[0][0], rho[0][1] * s], [rho[1][0] * s, rho[1][1]]]
}

/// Monte Carlo average of `R_z(eps) rho R_z(eps)^dagger` over `samples` draws.
pub fn averaged_rotation_channel(
    rho: &DensityMatrix,
    sigma: f64,
    samples: u64,
    seed: u64,
) -> Result<DensityMatrix> {
    check_sigma(sigma)?;
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be >= 1".into()));
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = trial_rng(seed, 0);
    let mut off = Complex64::new(0.0, 0.0);
    for _ in 0..samples {
        off += Complex64::from_polar(1.0, -normal.sample(&mut rng));
    }
    let off = off / samples as f64;
    Ok([
        [rho[0][0], rho[0][1] * off],
        [rho[1][0] * off.conj(), rho[1][1]],
    ])
}

/// Trace distance between two single-qubit density matrices.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    let d00 = (a[0][0] - b[0][0]).re;
    let d01 = a[0][1] - b[0][1];
    (d00 * d00 + d01.norm_sqr()).sqrt()
}
