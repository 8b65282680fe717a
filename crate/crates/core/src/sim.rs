//! Dense statevector oracle and deterministic Monte Carlo engine.
//!
//! Qubit `q` is bit `q` of the basis index, so register values map directly to
//! basis states. The transforms use no swaps: after [`qft`] qubit `j` carries the
//! phase `2 pi sum_{k<=j} x_k / 2^{j-k+1}`.
//!
//! Randomness for trial `t` comes from a ChaCha stream keyed by `(seed, t)`;
//! draws inside a trial happen in gate order. Trial results are reduced in index
//! order, so estimates are bit-identical for any thread count.

use crate::error::{Error, Result};
use crate::model::{
    exact_truncation_fidelity, pow2, product_form_fidelity, BitString, SequenceSpec,
    TruncationConfig,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Default maximum number of simulated qubits.
pub const DEFAULT_QUBIT_CAP: usize = 16;

/// Environment variable capping Monte Carlo parallelism.
pub const THREADS_ENV: &str = "TRUNCQ_THREADS";

/// Elementary gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Gate {
    /// Hadamard.
    H(usize),
    /// `|1> -> e^{i theta} |1>`.
    Phase(usize, f64),
    /// Phase `e^{i theta}` on `|11>` of (control, target).
    CPhase(usize, usize, f64),
    /// Controlled NOT (control, target).
    CNot(usize, usize),
    /// Pauli X.
    X(usize),
}

impl Gate {
    fn qubits(&self) -> [usize; 2] {
        match *self {
            Gate::H(q) | Gate::Phase(q, _) | Gate::X(q) => [q, q],
            Gate::CPhase(c, t, _) | Gate::CNot(c, t) => [c, t],
        }
    }

    /// True for gates carrying a rotation angle.
    pub fn is_rotation(&self) -> bool {
        matches!(self, Gate::Phase(..) | Gate::CPhase(..))
    }

    fn inverse(&self) -> Gate {
        match *self {
            Gate::Phase(q, t) => Gate::Phase(q, -t),
            Gate::CPhase(c, q, t) => Gate::CPhase(c, q, -t),
            g => g,
        }
    }
}

/// Ordered gate list on a fixed number of qubits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    /// Number of qubits acted on.
    pub num_qubits: usize,
    /// Gates in application order.
    pub gates: Vec<Gate>,
}

impl Circuit {
    /// Empty circuit.
    pub fn new(num_qubits: usize) -> Self {
        Self {
            num_qubits,
            gates: Vec::new(),
        }
    }

    /// Appends a gate after validating its qubits and angle.
    pub fn push(&mut self, g: Gate) -> Result<()> {
        let [a, b] = g.qubits();
        if a >= self.num_qubits || b >= self.num_qubits {
            return Err(Error::InvalidArgument(format!(
                "gate {g:?} outside {} qubits",
                self.num_qubits
            )));
        }
        if matches!(g, Gate::CPhase(c, t, _) | Gate::CNot(c, t) if c == t) {
            return Err(Error::InvalidArgument(format!(
                "gate {g:?} has identical control and target"
            )));
        }
        if let Gate::Phase(_, t) | Gate::CPhase(_, _, t) = g {
            if !t.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "gate {g:?} has a non-finite angle"
                )));
            }
        }
        self.gates.push(g);
        Ok(())
    }

    /// Appends every gate of `other`.
    pub fn extend(&mut self, other: &Circuit) -> Result<()> {
        for &g in &other.gates {
            self.push(g)?;
        }
        Ok(())
    }

    /// Inverse circuit.
    pub fn inverse(&self) -> Circuit {
        Circuit {
            num_qubits: self.num_qubits,
            gates: self.gates.iter().rev().map(Gate::inverse).collect(),
        }
    }

    /// Number of rotation gates (the noise sites).
    pub fn rotation_count(&self) -> usize {
        self.gates.iter().filter(|g| g.is_rotation()).count()
    }
}

/// Dense statevector.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    num_qubits: usize,
    amps: Vec<Complex64>,
}

impl QuantumState {
    /// Computational basis state `|index>` under the default cap.
    pub fn basis(num_qubits: usize, index: usize) -> Result<Self> {
        Self::basis_with_cap(num_qubits, index, DEFAULT_QUBIT_CAP)
    }

    /// Computational basis state `|index>` with an explicit qubit cap.
    pub fn basis_with_cap(num_qubits: usize, index: usize, cap: usize) -> Result<Self> {
        if num_qubits > cap {
            return Err(Error::CapExceeded {
                requested: num_qubits,
                cap,
            });
        }
        let dim = 1usize << num_qubits;
        if index >= dim {
            return Err(Error::InvalidArgument(format!(
                "basis index {index} outside {num_qubits} qubits"
            )));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(Self { num_qubits, amps })
    }

    /// Number of qubits.
    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    /// Amplitudes indexed by basis state.
    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    /// `sum |amp|^2`.
    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Probability of basis state `index`.
    pub fn probability(&self, index: usize) -> f64 {
        self.amps[index].norm_sqr()
    }

    /// `|<self|other>|^2`.
    pub fn overlap(&self, other: &QuantumState) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            .norm_sqr()
    }

    /// Applies one gate with its rotation angle shifted by `eps`.
    pub fn apply(&mut self, g: &Gate, eps: f64) {
        match *g {
            Gate::H(q) => {
                let m = 1usize << q;
                let s = std::f64::consts::FRAC_1_SQRT_2;
                for i in 0..self.amps.len() {
                    if i & m == 0 {
                        let (a, b) = (self.amps[i], self.amps[i | m]);
                        self.amps[i] = (a + b) * s;
                        self.amps[i | m] = (a - b) * s;
                    }
                }
            }
            Gate::Phase(q, t) => self.phase_on_mask(1 << q, t + eps),
            Gate::CPhase(c, q, t) => self.phase_on_mask((1 << c) | (1 << q), t + eps),
            Gate::CNot(c, q) => {
                let (mc, mt) = (1usize << c, 1usize << q);
                for i in 0..self.amps.len() {
                    if i & mc != 0 && i & mt == 0 {
                        self.amps.swap(i, i | mt);
                    }
                }
            }
            Gate::X(q) => {
                let m = 1usize << q;
                for i in 0..self.amps.len() {
                    if i & m == 0 {
                        self.amps.swap(i, i | m);
                    }
                }
            }
        }
    }

    fn phase_on_mask(&mut self, mask: usize, theta: f64) {
        let f = Complex64::from_polar(1.0, theta);
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & mask == mask {
                *a *= f;
            }
        }
    }

    /// Runs a noiseless circuit.
    pub fn run(&mut self, c: &Circuit) -> Result<()> {
        self.check(c)?;
        for g in &c.gates {
            self.apply(g, 0.0);
        }
        Ok(())
    }

    /// Runs a circuit adding `eps[i]` to the angle of the `i`-th rotation gate.
    pub fn run_with_errors(&mut self, c: &Circuit, eps: &[f64]) -> Result<()> {
        self.check(c)?;
        if eps.len() != c.rotation_count() {
            return Err(Error::InvalidArgument(format!(
                "{} rotation errors supplied for {} rotations",
                eps.len(),
                c.rotation_count()
            )));
        }
        let mut it = eps.iter();
        for g in &c.gates {
            let e = if g.is_rotation() {
                *it.next().expect("counted")
            } else {
                0.0
            };
            self.apply(g, e);
        }
        Ok(())
    }

    fn check(&self, c: &Circuit) -> Result<()> {
        if c.num_qubits != self.num_qubits {
            return Err(Error::InvalidArgument(format!(
                "circuit on {} qubits applied to a {}-qubit state",
                c.num_qubits, self.num_qubits
            )));
        }
        Ok(())
    }
}

/// Addition or subtraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArithOp {
    /// Positive rotations.
    Add,
    /// Negated rotations.
    Sub,
}

impl ArithOp {
    fn sign(self) -> f64 {
        match self {
            ArithOp::Add => 1.0,
            ArithOp::Sub => -1.0,
        }
    }
}

/// Appends a QFT on `qubits` (little-endian) keeping rotations up to `pi / 2^level`.
pub fn qft(c: &mut Circuit, qubits: &[usize], level: usize) -> Result<()> {
    for j in (0..qubits.len()).rev() {
        c.push(Gate::H(qubits[j]))?;
        for k in (0..j).rev() {
            if j - k <= level {
                c.push(Gate::CPhase(qubits[k], qubits[j], PI / pow2(j - k)))?;
            }
        }
    }
    Ok(())
}

/// Appends the exact inverse of [`qft`] at the same level.
pub fn iqft(c: &mut Circuit, qubits: &[usize], level: usize) -> Result<()> {
    for j in 0..qubits.len() {
        for k in 0..j {
            if j - k <= level {
                c.push(Gate::CPhase(qubits[k], qubits[j], -PI / pow2(j - k)))?;
            }
        }
        c.push(Gate::H(qubits[j]))?;
    }
    Ok(())
}

/// Appends one additive phase gate per qubit encoding `operand`, keeping bits at
/// distance up to `level`, optionally controlled by `control`.
pub fn additive_rotations(
    c: &mut Circuit,
    qubits: &[usize],
    operand: &BitString,
    level: usize,
    op: ArithOp,
    control: Option<usize>,
) -> Result<()> {
    if operand.len() != qubits.len() {
        return Err(Error::LengthMismatch {
            expected: qubits.len(),
            got: operand.len(),
        });
    }
    for (j, &q) in qubits.iter().enumerate() {
        let lo = j.saturating_sub(level);
        let turns: f64 = (lo..=j)
            .map(|k| f64::from(operand.bit(k)) / pow2(j - k + 1))
            .sum();
        let theta = op.sign() * 2.0 * PI * turns;
        match control {
            None => c.push(Gate::Phase(q, theta))?,
            Some(ctl) => c.push(Gate::CPhase(ctl, q, theta))?,
        }
    }
    Ok(())
}

/// Truncated Draper adder (or subtractor) of the constant `a` on qubits `0..L`.
///
/// Transforms keep rotations up to level `N`; the additive rotations keep
/// `N + ell` levels, the extra terms being the folded corrective rotations.
pub fn build_truncated_adder(
    a: &BitString,
    cfg: &TruncationConfig,
    op: ArithOp,
) -> Result<Circuit> {
    if a.len() != cfg.l {
        return Err(Error::LengthMismatch {
            expected: cfg.l,
            got: a.len(),
        });
    }
    let qubits: Vec<usize> = (0..cfg.l).collect();
    let mut c = Circuit::new(cfg.l);
    qft(&mut c, &qubits, cfg.n)?;
    additive_rotations(&mut c, &qubits, a, cfg.n + cfg.ell, op, None)?;
    iqft(&mut c, &qubits, cfg.n)?;
    Ok(c)
}

/// Layout of the modular adder: register qubits `0..=L` (MSB is qubit `L`) and the MS qubit `L + 1`.
pub fn modular_adder_qubits(l: usize) -> usize {
    l + 2
}

/// Basis index of register value `value` with MS qubit `ms`.
pub fn modular_adder_index(l: usize, value: u64, ms: bool) -> usize {
    value as usize | (usize::from(ms) << (l + 1))
}

/// Truncated modular adder `|x>|0> -> |(x + b) mod M>|0>` for `x, b < M < 2^L`.
///
/// Flow: subtract `M - b`; CNOT(MSB -> MS); MS-controlled add `M` and subtract `b`;
/// CNOT on `MSB = 0`; add `b`. Each arithmetic block sits between a truncated
/// QFT and IQFT on the `L + 1` register qubits.
pub fn build_modular_adder(b: u64, modulus: u64, cfg: &TruncationConfig) -> Result<Circuit> {
    let l = cfg.l;
    if l >= 63 || modulus >= 1 << l || modulus < 2 || b >= modulus {
        return Err(Error::InvalidArgument(format!(
            "need b < M < 2^L, got b={b}, M={modulus}, L={l}"
        )));
    }
    let reg: Vec<usize> = (0..=l).collect();
    let (msb, ms) = (l, l + 1);
    let level = cfg.n;
    let add_level = cfg.n + cfg.ell;
    let w = l + 1;
    let bits = |v: u64| BitString::from_u64(v, w);
    let mut c = Circuit::new(modular_adder_qubits(l));

    qft(&mut c, &reg, level)?;
    additive_rotations(
        &mut c,
        &reg,
        &bits(modulus - b)?,
        add_level,
        ArithOp::Sub,
        None,
    )?;
    iqft(&mut c, &reg, level)?;
    c.push(Gate::CNot(msb, ms))?;

    qft(&mut c, &reg, level)?;
    additive_rotations(
        &mut c,
        &reg,
        &bits(modulus)?,
        add_level,
        ArithOp::Add,
        Some(ms),
    )?;
    additive_rotations(&mut c, &reg, &bits(b)?, add_level, ArithOp::Sub, None)?;
    iqft(&mut c, &reg, level)?;
    c.push(Gate::X(msb))?;
    c.push(Gate::CNot(msb, ms))?;
    c.push(Gate::X(msb))?;

    qft(&mut c, &reg, level)?;
    additive_rotations(&mut c, &reg, &bits(b)?, add_level, ArithOp::Add, None)?;
    iqft(&mut c, &reg, level)?;
    Ok(c)
}

/// Monte Carlo sampling plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonteCarloPlan {
    /// Number of trials, at least 1.
    pub trials: u64,
    /// Master seed.
    pub seed: u64,
    /// Worker threads; `None` reads [`THREADS_ENV`] or uses all cores.
    pub threads: Option<usize>,
}

impl MonteCarloPlan {
    /// Plan with the default thread policy.
    pub fn new(trials: u64, seed: u64) -> Self {
        Self {
            trials,
            seed,
            threads: None,
        }
    }
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    /// Sample mean.
    pub mean: f64,
    /// Standard error of the mean (0 for a single trial).
    pub std_err: f64,
    /// Number of trials.
    pub trials: u64,
}

impl Estimate {
    /// Builds from per-trial values, reduced in order.
    pub fn from_samples(v: &[f64]) -> Self {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = if v.len() > 1 {
            v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            std_err: (var / n).sqrt(),
            trials: v.len() as u64,
        }
    }

    /// `|mean - target| / std_err`, infinite when the error is zero and the values differ.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.mean - target).abs();
        if self.std_err > 0.0 {
            d / self.std_err
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Random generator for trial `trial` of a run with master `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn thread_count(plan: &MonteCarloPlan) -> Option<usize> {
    plan.threads
        .or_else(|| std::env::var(THREADS_ENV).ok().and_then(|s| s.parse().ok()))
        .filter(|&t| t > 0)
}

/// Evaluates `f(trial, rng)` for every trial in parallel and reduces in order.
pub fn run_trials<F>(plan: &MonteCarloPlan, f: F) -> Result<Estimate>
where
    F: Fn(u64, &mut ChaCha8Rng) -> Result<f64> + Sync,
{
    if plan.trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    let work = || -> Result<Vec<f64>> {
        (0..plan.trials)
            .into_par_iter()
            .map(|t| f(t, &mut trial_rng(plan.seed, t)))
            .collect()
    };
    let values = match thread_count(plan) {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };
    Ok(Estimate::from_samples(&values))
}

/// Per-instance quantity averaged by [`monte_carlo_average`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Estimator {
    /// `x + a` with uniform `x, a`, via the carry count.
    Adder,
    /// `x + a - b` with uniform `x, a, b`.
    AddSub,
    /// `n` additions and `n` subtractions of uniform operands on a uniform register.
    Sequence { n: u64 },
}

/// Monte Carlo average of the exact instance fidelity at any `L`.
///
/// Sequences use [`product_form_fidelity`], which honours the correction depth `cfg.ell`.
pub fn monte_carlo_average(
    cfg: &TruncationConfig,
    est: Estimator,
    plan: &MonteCarloPlan,
) -> Result<Estimate> {
    let l = cfg.l;
    run_trials(plan, |_, rng| match est {
        Estimator::Adder => {
            let x = BitString::random(rng, l);
            let a = BitString::random(rng, l);
            exact_truncation_fidelity(&x, &a, cfg)
        }
        Estimator::AddSub => {
            let x = BitString::random(rng, l);
            let a = BitString::random(rng, l);
            let b = BitString::random(rng, l);
            product_form_fidelity(&SequenceSpec::new(x, vec![a], vec![b])?, cfg)
        }
        Estimator::Sequence { n } => {
            let x = BitString::random(rng, l);
            let adds = (0..n).map(|_| BitString::random(rng, l)).collect();
            let subs = (0..n).map(|_| BitString::random(rng, l)).collect();
            product_form_fidelity(&SequenceSpec::new(x, adds, subs)?, cfg)
        }
    })
}

/// Noisy execution: every rotation angle gets an independent `N(0, sigma^2)` error.
/// Returns the mean probability of basis state `expected` starting from `input`.
pub fn run_noisy(
    circuit: &Circuit,
    input: usize,
    expected: usize,
    sigma: f64,
    plan: &MonteCarloPlan,
) -> Result<Estimate> {
    QuantumState::basis(circuit.num_qubits, input)?;
    let normal = normal(sigma)?;
    let sites = circuit.rotation_count();
    run_trials(plan, |_, rng| {
        let eps: Vec<f64> = (0..sites).map(|_| normal.sample(rng)).collect();
        let mut s = QuantumState::basis(circuit.num_qubits, input)?;
        s.run_with_errors(circuit, &eps)?;
        Ok(s.probability(expected))
    })
}

fn normal(sigma: f64) -> Result<Normal<f64>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "sigma must be finite and >= 0, got {sigma}"
        )));
    }
    Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))
}

fn uniform_value<R: Rng>(rng: &mut R, l: usize) -> u64 {
    rng.random_range(0..1u64 << l)
}

/// Noisy untruncated-or-truncated adder averaged over uniform operands and noise draws.
pub fn noisy_adder_average(
    cfg: &TruncationConfig,
    sigma: f64,
    plan: &MonteCarloPlan,
) -> Result<Estimate> {
    QuantumState::basis(cfg.l, 0)?;
    let normal = normal(sigma)?;
    let l = cfg.l;
    run_trials(plan, |_, rng| {
        let x = uniform_value(rng, l);
        let a = uniform_value(rng, l);
        let c = build_truncated_adder(&BitString::from_u64(a, l)?, cfg, ArithOp::Add)?;
        let eps: Vec<f64> = (0..c.rotation_count())
            .map(|_| normal.sample(rng))
            .collect();
        let mut s = QuantumState::basis(l, x as usize)?;
        s.run_with_errors(&c, &eps)?;
        Ok(s.probability(((x + a) % (1 << l)) as usize))
    })
}

/// Statevector average over `n` additions interleaved with `n` subtractions of
/// uniform operands on a uniform register.
pub fn statevector_sequence_average(
    cfg: &TruncationConfig,
    n: usize,
    plan: &MonteCarloPlan,
) -> Result<Estimate> {
    let l = cfg.l;
    QuantumState::basis(l, 0)?;
    let m = 1u64 << l;
    run_trials(plan, |_, rng| {
        let x = uniform_value(rng, l);
        let mut s = QuantumState::basis(l, x as usize)?;
        let mut y = x;
        for i in 0..2 * n {
            let a = uniform_value(rng, l);
            let op = if i % 2 == 0 {
                ArithOp::Add
            } else {
                ArithOp::Sub
            };
            s.run(&build_truncated_adder(
                &BitString::from_u64(a, l)?,
                cfg,
                op,
            )?)?;
            y = match op {
                ArithOp::Add => (y + a) % m,
                ArithOp::Sub => (y + m - a) % m,
            };
        }
        Ok(s.probability(y as usize))
    })
}

/// Random modulus in `(2^{L-1}, 2^L)`, odd when `odd` is set.
pub fn random_modulus<R: Rng>(rng: &mut R, l: usize, odd: bool) -> u64 {
    loop {
        let m = rng.random_range((1u64 << (l - 1)) + 1..1u64 << l);
        if !odd || m % 2 == 1 {
            return m;
        }
    }
}

/// Probability that a single truncated modular adder returns `(x + b) mod M` with
/// MS reset, averaged over uniform `M` in `(2^{L-1}, 2^L)` and uniform `x, b < M`.
pub fn modular_adder_average(
    cfg: &TruncationConfig,
    sigma: f64,
    plan: &MonteCarloPlan,
) -> Result<Estimate> {
    modular_adder_sequence_average(cfg, 1, false, sigma, plan)
}

/// Probability that `count` sequential truncated modular adders with one modulus
/// and fresh uniform addends return the correct register with MS reset.
pub fn modular_adder_sequence_average(
    cfg: &TruncationConfig,
    count: usize,
    odd_modulus: bool,
    sigma: f64,
    plan: &MonteCarloPlan,
) -> Result<Estimate> {
    let l = cfg.l;
    if l < 2 {
        return Err(Error::InvalidArgument("modular adder needs L >= 2".into()));
    }
    let nq = modular_adder_qubits(l);
    QuantumState::basis(nq, 0)?;
    let normal = normal(sigma)?;
    run_trials(plan, |_, rng| {
        let m = random_modulus(rng, l, odd_modulus);
        let mut value = rng.random_range(0..m);
        let mut s = QuantumState::basis(nq, modular_adder_index(l, value, false))?;
        for _ in 0..count {
            let b = rng.random_range(0..m);
            let c = build_modular_adder(b, m, cfg)?;
            if sigma > 0.0 {
                let eps: Vec<f64> = (0..c.rotation_count())
                    .map(|_| normal.sample(rng))
                    .collect();
                s.run_with_errors(&c, &eps)?;
            } else {
                s.run(&c)?;
            }
            value = (value + b) % m;
        }
        Ok(s.probability(modular_adder_index(l, value, false)))
    })
}

/// Register probability (summed over MS) of `x` after adding `a`, copying the
/// register MSB onto an MS qubit and subtracting `a`.
pub fn add_cnot_subtract(x: u64, a: u64, cfg: &TruncationConfig) -> Result<f64> {
    let l = cfg.l;
    let ms = l;
    let reg: Vec<usize> = (0..l).collect();
    let mut c = Circuit::new(l + 1);
    let a_bits = BitString::from_u64(a, l)?;
    qft(&mut c, &reg, cfg.n)?;
    additive_rotations(&mut c, &reg, &a_bits, cfg.n + cfg.ell, ArithOp::Add, None)?;
    iqft(&mut c, &reg, cfg.n)?;
    c.push(Gate::CNot(l - 1, ms))?;
    qft(&mut c, &reg, cfg.n)?;
    additive_rotations(&mut c, &reg, &a_bits, cfg.n + cfg.ell, ArithOp::Sub, None)?;
    iqft(&mut c, &reg, cfg.n)?;
    let mut s = QuantumState::basis(l + 1, x as usize)?;
    s.run(&c)?;
    Ok(s.probability(x as usize) + s.probability(x as usize | 1 << ms))
}

/// Probability that an MS qubit copied from the register MSB after one truncated
/// addition holds the correct MSB.
pub fn ms_correct_probability(x: u64, a: u64, cfg: &TruncationConfig) -> Result<f64> {
    let l = cfg.l;
    let adder = build_truncated_adder(&BitString::from_u64(a, l)?, cfg, ArithOp::Add)?;
    let mut c = Circuit::new(l + 1);
    c.extend(&adder)?;
    c.push(Gate::CNot(l - 1, l))?;
    let mut s = QuantumState::basis(l + 1, x as usize)?;
    s.run(&c)?;
    let want = ((x + a) >> (l - 1)) & 1;
    Ok(s.amplitudes()
        .iter()
        .enumerate()
        .filter(|(i, _)| ((i >> l) & 1) as u64 == want)
        .map(|(_, a)| a.norm_sqr())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{carry_fidelity, exact_subtraction_fidelity};

    fn cfg(l: usize, n: usize, ell: usize) -> TruncationConfig {
        TruncationConfig::new(l, n, ell).unwrap()
    }

    fn adder_prob(x: u64, a: u64, c: &TruncationConfig, op: ArithOp) -> f64 {
        let circ = build_truncated_adder(&BitString::from_u64(a, c.l).unwrap(), c, op).unwrap();
        let mut s = QuantumState::basis(c.l, x as usize).unwrap();
        s.run(&circ).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
        let m = 1u64 << c.l;
        let y = match op {
            ArithOp::Add => (x + a) % m,
            ArithOp::Sub => (x + m - a) % m,
        };
        s.probability(y as usize)
    }

    #[test]
    fn worked_example() {
        let p = adder_prob(3, 3, &cfg(4, 2, 0), ArithOp::Add);
        assert!((p - (2.0 + 2f64.sqrt()) / 4.0).abs() < 1e-10);
        let corrected = adder_prob(3, 3, &cfg(4, 2, 2), ArithOp::Add);
        assert!(corrected > p);
    }

    #[test]
    fn full_precision_is_exact() {
        for l in 1..=5usize {
            let c = cfg(l, l.max(2), 0);
            for x in 0..1u64 << l {
                for a in 0..1u64 << l {
                    assert!((adder_prob(x, a, &c, ArithOp::Add) - 1.0).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn oracle_matches_carry_model() {
        for l in 3..=6usize {
            for n in 1..=l - 2 {
                let c = cfg(l, n, 0);
                for x in 0..1u64 << l {
                    for a in 0..1u64 << l {
                        let xb = BitString::from_u64(x, l).unwrap();
                        let ab = BitString::from_u64(a, l).unwrap();
                        let f = exact_truncation_fidelity(&xb, &ab, &c).unwrap();
                        assert!((adder_prob(x, a, &c, ArithOp::Add) - f).abs() < 1e-10);
                        let f = exact_subtraction_fidelity(&xb, &ab, &c).unwrap();
                        assert!((adder_prob(x, a, &c, ArithOp::Sub) - f).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn product_form_matches_oracle_with_corrections() {
        let mut rng = trial_rng(5, 0);
        for _ in 0..300 {
            let l = rng.random_range(3..=8usize);
            let n = rng.random_range(1..l);
            let ell = rng.random_range(0..4usize);
            let c = cfg(l, n, ell);
            let x = uniform_value(&mut rng, l);
            let ops: Vec<(u64, ArithOp)> = (0..rng.random_range(1..5))
                .map(|_| {
                    (
                        uniform_value(&mut rng, l),
                        if rng.random::<bool>() {
                            ArithOp::Add
                        } else {
                            ArithOp::Sub
                        },
                    )
                })
                .collect();
            let mut s = QuantumState::basis(l, x as usize).unwrap();
            let (mut adds, mut subs) = (vec![], vec![]);
            let m = 1u64 << l;
            let mut y = x;
            for &(v, op) in &ops {
                let bv = BitString::from_u64(v, l).unwrap();
                s.run(&build_truncated_adder(&bv, &c, op).unwrap()).unwrap();
                match op {
                    ArithOp::Add => {
                        adds.push(bv);
                        y = (y + v) % m;
                    }
                    ArithOp::Sub => {
                        subs.push(bv);
                        y = (y + m - v) % m;
                    }
                }
            }
            let seq = SequenceSpec::new(BitString::from_u64(x, l).unwrap(), adds, subs).unwrap();
            let pf = product_form_fidelity(&seq, &c).unwrap();
            assert!((s.probability(y as usize) - pf).abs() < 1e-10);
        }
    }

    #[test]
    fn qft_iqft_identity() {
        for l in 1..=8usize {
            for level in [1, 3, l] {
                let q: Vec<usize> = (0..l).collect();
                let mut c = Circuit::new(l);
                qft(&mut c, &q, level).unwrap();
                iqft(&mut c, &q, level).unwrap();
                let mut s = QuantumState::basis(l, (37 % (1 << l)) as usize).unwrap();
                let start = s.clone();
                s.run(&c).unwrap();
                assert!((s.overlap(&start) - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn add_then_subtract_cancels() {
        for &(l, n) in &[(5usize, 1usize), (6, 2), (7, 7)] {
            let c = cfg(l, n, 0);
            for (x, a) in [(3u64, 5u64), (17, 30), (31, 31)] {
                let a_bits = BitString::from_u64(a % (1 << l), l).unwrap();
                let mut s = QuantumState::basis(l, x as usize).unwrap();
                s.run(&build_truncated_adder(&a_bits, &c, ArithOp::Add).unwrap())
                    .unwrap();
                s.run(&build_truncated_adder(&a_bits, &c, ArithOp::Sub).unwrap())
                    .unwrap();
                assert!((s.probability(x as usize) - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn modular_adder_full_precision() {
        let c = cfg(3, 3, 0);
        let circ = build_modular_adder(3, 7, &c).unwrap();
        let mut s = QuantumState::basis(5, modular_adder_index(3, 5, false)).unwrap();
        s.run(&circ).unwrap();
        assert!((s.probability(modular_adder_index(3, 1, false)) - 1.0).abs() < 1e-10);
        let c = cfg(4, 4, 0);
        for m in 9..16u64 {
            for x in 0..m {
                for b in 0..m {
                    let circ = build_modular_adder(b, m, &c).unwrap();
                    let mut s = QuantumState::basis(6, modular_adder_index(4, x, false)).unwrap();
                    s.run(&circ).unwrap();
                    assert!(
                        (s.probability(modular_adder_index(4, (x + b) % m, false)) - 1.0).abs()
                            < 1e-10
                    );
                }
            }
        }
    }

    #[test]
    fn cnot_example() {
        let p4 = carry_fidelity(4, 1);
        let target = p4 * p4 + (1.0 - p4) * (1.0 - p4);
        let got = add_cnot_subtract(15, 13, &cfg(6, 4, 0)).unwrap();
        assert!((got - target).abs() < 1e-10);
        assert!((ms_correct_probability(15, 13, &cfg(6, 4, 0)).unwrap() - p4).abs() < 1e-10);
    }

    #[test]
    fn cap_is_enforced() {
        assert!(matches!(
            QuantumState::basis(17, 0),
            Err(Error::CapExceeded { .. })
        ));
        assert!(build_modular_adder(1, 3, &cfg(15, 4, 0)).is_ok());
        let plan = MonteCarloPlan::new(1, 0);
        assert!(matches!(
            modular_adder_average(&cfg(15, 4, 0), 0.0, &plan),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn determinism_across_threads() {
        let c = cfg(64, 3, 0);
        let mut plan = MonteCarloPlan::new(200, 42);
        plan.threads = Some(1);
        let a = monte_carlo_average(&c, Estimator::Sequence { n: 2 }, &plan).unwrap();
        plan.threads = Some(4);
        let b = monte_carlo_average(&c, Estimator::Sequence { n: 2 }, &plan).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.std_err.to_bits(), b.std_err.to_bits());
    }

    #[test]
    fn zero_noise_is_deterministic() {
        let c = cfg(4, 4, 0);
        let circ =
            build_truncated_adder(&BitString::from_u64(5, 4).unwrap(), &c, ArithOp::Add).unwrap();
        let e = run_noisy(&circ, 3, 8, 0.0, &MonteCarloPlan::new(10, 1)).unwrap();
        assert!((e.mean - 1.0).abs() < 1e-12);
        assert!(e.std_err < 1e-12);
    }
}
