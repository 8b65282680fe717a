//! Fault-tolerant magic-state resource estimates for full and truncated Draper
//! adders and the LNN Shor circuit.
//!
//! A rotation by `pi / 2^{M-1}` sits at level `M` of the Clifford hierarchy.
//! Levels below 3 (H and S) are free. Distilled counts are the number of
//! non-Clifford rotations; raw counts weight each rotation by the table cost
//! `C(R_M, eta)`. Rotations finer than the noise level `eta` cost no raw states.

use crate::error::{Error, Result};
use crate::shor::corrected_shor_success;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// Bundled illustrative table: `raw = ceil(2 d^2 (1 + (M - 3) / 10))` with `d = -log10(eta)`.
/// Not distillation data; order-of-magnitude use only.
pub const PLACEHOLDER_TABLE_JSON: &str = include_str!("../data/placeholder_cost_table.json");

/// Default `eta` for a truncated adder.
pub const ETA_TRUNCATED_ADDER: f64 = 1e-5;
/// Default `eta` for a full Draper adder.
pub const ETA_FULL_ADDER: f64 = 1e-7;
/// Default `eta` for a truncated Shor circuit.
pub const ETA_TRUNCATED_SHOR: f64 = 1e-12;
/// Default `eta` for a full Draper Shor circuit.
pub const ETA_FULL_SHOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct TableEntry {
    #[serde(rename = "M")]
    m: u32,
    eta: f64,
    raw_states: u64,
}

/// Raw magic-state cost per rotation level and target error rate.
#[derive(Debug, Clone, PartialEq)]
pub struct CostTable {
    /// Where the table came from.
    pub source: String,
    /// `eta` bit pattern -> (M -> raw states).
    entries: BTreeMap<u64, BTreeMap<u32, u64>>,
}

impl CostTable {
    /// Parses and validates a JSON array of `{"M", "eta", "raw_states"}` objects.
    pub fn from_json(text: &str, source: impl Into<String>) -> Result<Self> {
        let rows: Vec<TableEntry> =
            serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        if rows.is_empty() {
            return Err(Error::Schema("table has no entries".into()));
        }
        let mut entries: BTreeMap<u64, BTreeMap<u32, u64>> = BTreeMap::new();
        for r in &rows {
            if !(r.eta.is_finite() && r.eta > 0.0 && r.eta < 1.0) {
                return Err(Error::Schema(format!(
                    "eta must lie in (0, 1), got {} at M={}",
                    r.eta, r.m
                )));
            }
            if r.m < 3 {
                return Err(Error::Schema(format!(
                    "M must be >= 3, got {} at eta={:e}",
                    r.m, r.eta
                )));
            }
            if entries
                .entry(r.eta.to_bits())
                .or_default()
                .insert(r.m, r.raw_states)
                .is_some()
            {
                return Err(Error::Schema(format!(
                    "duplicate entry M={}, eta={:e}",
                    r.m, r.eta
                )));
            }
        }
        let table = Self {
            source: source.into(),
            entries,
        };
        table.check_monotone()?;
        Ok(table)
    }

    /// Reads a table file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text, path.display().to_string())
    }

    /// The bundled placeholder table.
    pub fn placeholder() -> Self {
        Self::from_json(PLACEHOLDER_TABLE_JSON, "bundled placeholder")
            .expect("bundled table is valid")
    }

    fn check_monotone(&self) -> Result<()> {
        for (&eta, row) in &self.entries {
            let eta = f64::from_bits(eta);
            for ((m0, r0), (m1, r1)) in row.iter().zip(row.iter().skip(1)) {
                if r1 < r0 {
                    return Err(Error::Monotonicity(format!(
                        "raw_states decreases in M at eta={eta:e}: M={m0} has {r0}, M={m1} has {r1}"
                    )));
                }
            }
        }
        // Ascending eta: costs must not increase.
        let etas: Vec<(f64, &BTreeMap<u32, u64>)> = {
            let mut v: Vec<_> = self
                .entries
                .iter()
                .map(|(&k, r)| (f64::from_bits(k), r))
                .collect();
            v.sort_by(|a, b| a.0.total_cmp(&b.0));
            v
        };
        for w in etas.windows(2) {
            let ((e0, r0), (e1, r1)) = (w[0], w[1]);
            for (m, c1) in r1 {
                if let Some(c0) = r0.get(m) {
                    if c1 > c0 {
                        return Err(Error::Monotonicity(format!(
                            "raw_states increases with eta at M={m}: eta={e0:e} has {c0}, eta={e1:e} has {c1}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// `C(R_M, eta)`; zero below level 3 and for rotations finer than `eta`.
    pub fn lookup(&self, m: u32, eta: f64) -> Result<u64> {
        if m < 3 || rotation_angle(m) < eta {
            return Ok(0);
        }
        self.entries
            .iter()
            .find(|(&k, _)| relative_eq(f64::from_bits(k), eta))
            .and_then(|(_, row)| row.get(&m).copied())
            .ok_or(Error::MissingCostEntry { m, eta })
    }
}

fn relative_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

/// Rotation angle `pi / 2^{M-1}` of level `M`.
pub fn rotation_angle(m: u32) -> f64 {
    std::f64::consts::PI / 2f64.powi(m as i32 - 1)
}

/// Finest level whose rotation is not below the noise level `eta`.
pub fn finest_costed_level(eta: f64) -> u32 {
    (3..200)
        .take_while(|&m| rotation_angle(m) >= eta)
        .last()
        .unwrap_or(2)
}

/// Resource summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    /// Logical qubits.
    pub logical_qubits: u64,
    /// Non-Clifford rotations consumed.
    pub distilled_states: u128,
    /// Raw magic states under the table.
    pub raw_states: u128,
    /// Success probability of the circuit, where modelled.
    pub success_probability: Option<f64>,
}

/// Arithmetic regime of a Shor circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// Untruncated Draper arithmetic.
    Full,
    /// Truncated to level `n` with `ell` corrective levels.
    Truncated { n: u32, ell: u32 },
}

/// Rotation census of one QFT/IQFT pair with the adder in between:
/// `sum_{M=3}^{upper} 2 (L - M + 2)` rotations, plus the weighted raw cost.
fn transform_pair(l: u64, upper: u32, eta: f64, table: &CostTable) -> Result<(u128, u128)> {
    let (mut distilled, mut raw) = (0u128, 0u128);
    for m in 3..=upper {
        let count = 2 * u128::from((l + 2).saturating_sub(u64::from(m)));
        distilled += count;
        raw += count * u128::from(table.lookup(m, eta)?);
    }
    Ok((distilled, raw))
}

fn check_l(l: u64) -> Result<()> {
    if (2..=1 << 20).contains(&l) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "L must lie in 2..=2^20, got {l}"
        )))
    }
}

fn full_additive_level(l: u64, eta: f64) -> u32 {
    finest_costed_level(eta).min((l + 1) as u32).max(3)
}

fn check_truncation(l: u64, n: u32) -> Result<()> {
    if n == 0 || u64::from(n) >= l {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= N < L, got N={n}, L={l}"
        )));
    }
    Ok(())
}

/// Untruncated Draper adder. The additive rotations are costed at the finest
/// level that is not below the noise level.
pub fn draper_adder_cost(l: u64, eta: f64, table: &CostTable) -> Result<CostReport> {
    check_l(l)?;
    let (d, r) = transform_pair(l, (l + 1) as u32, eta, table)?;
    let add = u128::from(table.lookup(full_additive_level(l, eta), eta)?);
    Ok(CostReport {
        logical_qubits: l,
        distilled_states: d + u128::from(l),
        raw_states: r + u128::from(l) * add,
        success_probability: Some(1.0),
    })
}

/// Draper adder truncated to level `N`, the additive rotations at level `N`.
pub fn truncated_adder_cost(l: u64, n: u32, eta: f64, table: &CostTable) -> Result<CostReport> {
    check_l(l)?;
    check_truncation(l, n)?;
    let (d, r) = transform_pair(l, n + 2, eta, table)?;
    let add = u128::from(table.lookup(n, eta)?);
    Ok(CostReport {
        logical_qubits: l,
        distilled_states: d + u128::from(l),
        raw_states: r + u128::from(l) * add,
        success_probability: None,
    })
}

/// LNN Shor circuit: `4 L^2` modular adders of two transform pairs and four
/// additions each, on `2L + 4` logical qubits. Corrections fold into the
/// additive rotations, costed at level `N + ell`.
pub fn shor_cost(l: u64, regime: Regime, eta: f64, table: &CostTable) -> Result<CostReport> {
    check_l(l)?;
    let (upper, add_level, success) = match regime {
        Regime::Full => ((l + 1) as u32, full_additive_level(l, eta), 1.0),
        Regime::Truncated { n, ell } => {
            check_truncation(l, n)?;
            (
                n + 2,
                n + ell,
                corrected_shor_success(l as usize, n as usize, ell as usize)?,
            )
        }
    };
    let (d, r) = transform_pair(l, upper, eta, table)?;
    let add = u128::from(table.lookup(add_level, eta)?);
    let adders = 4 * u128::from(l) * u128::from(l);
    let additions = 4 * u128::from(l);
    Ok(CostReport {
        logical_qubits: 2 * l + 4,
        distilled_states: adders * (2 * d + additions),
        raw_states: adders * (2 * r + additions * add),
        success_probability: Some(success),
    })
}

/// Distilled T count of the Gidney Toffoli adder: `4L`.
pub fn gidney_adder_distilled(l: u64) -> f64 {
    4.0 * l as f64
}

/// Distilled T count of the Haner et al. Toffoli adder: `56 L (log2 L - 2)`.
pub fn haner_adder_distilled(l: u64) -> f64 {
    let lf = l as f64;
    56.0 * lf * (lf.log2() - 2.0)
}
