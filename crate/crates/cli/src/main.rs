//! `truncq` command-line driver: analytic predictions, statevector simulation,
//! large-register Monte Carlo and resource estimates as CSV or JSON.
//!
//! Exit codes: 0 ok, 2 usage, 3 data or table error, 4 simulator cap.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use truncq::cost::{self, CostTable, Regime};
use truncq::model::{BitString, TruncationConfig};
use truncq::runstats;
use truncq::sequence::{self, SequenceModelParams};
use truncq::shor;
use truncq::sim::{self, ArithOp, Estimate, Estimator, MonteCarloPlan};

#[derive(Parser)]
#[command(
    name = "truncq",
    version,
    about = "Truncated quantum Fourier arithmetic models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic fidelity predictions.
    Predict {
        #[arg(value_enum)]
        model: PredictModel,
        #[command(flatten)]
        axes: Axes,
        /// Use the large-L forms for adder and addsub.
        #[arg(long)]
        asymptotic: bool,
        /// Evaluate the sequence law from the effective-sum PMF.
        #[arg(long)]
        numeric: bool,
        /// For `corrected`: full Shor success instead of an adder sequence.
        #[arg(long)]
        shor: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Dense statevector simulation (small registers).
    Simulate {
        #[arg(value_enum)]
        circuit: SimCircuit,
        #[command(flatten)]
        axes: Axes,
        /// Gaussian rotation error per gate, radians.
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fixed register value (adder only, with --a).
        #[arg(long)]
        x: Option<u64>,
        /// Fixed addend (adder only, with --x).
        #[arg(long)]
        a: Option<u64>,
        /// Sequential modular adders per trial.
        #[arg(long, default_value_t = 1)]
        count: usize,
        /// Draw even moduli too (default: odd moduli only).
        #[arg(long)]
        any_modulus: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Instance-fidelity Monte Carlo at any register length.
    Montecarlo {
        #[command(flatten)]
        axes: Axes,
        /// Defaults to `sequence` when --n is given, else `adder`.
        #[arg(long, value_enum)]
        estimator: Option<McEstimator>,
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Magic-state resource estimate (JSON).
    Cost {
        #[arg(long = "L")]
        l: u64,
        #[arg(long = "N")]
        big_n: Option<u32>,
        #[arg(long, default_value_t = 0)]
        ell: u32,
        /// Target logical error rate; defaults depend on the regime.
        #[arg(long)]
        eta: Option<f64>,
        /// Cost table JSON; defaults to the bundled placeholder.
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long, value_enum)]
        regime: CostRegime,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PredictModel {
    Adder,
    Addsub,
    Sequence,
    Corrected,
    Modadder,
    Shor,
}

#[derive(Clone, Copy, ValueEnum)]
enum SimCircuit {
    Adder,
    Modadder,
    Sequence,
}

#[derive(Clone, Copy, ValueEnum)]
enum McEstimator {
    Adder,
    Addsub,
    Sequence,
}

#[derive(Clone, Copy, ValueEnum)]
enum CostRegime {
    /// Truncated adder (needs --N).
    Adder,
    /// Untruncated Draper adder.
    Draper,
    /// Shor with untruncated arithmetic.
    ShorFull,
    /// Shor with truncated arithmetic (needs --N, optional --ell).
    ShorTruncated,
}

/// Parameter axes. Each flag may repeat; at most one axis may take several values.
#[derive(Args)]
struct Axes {
    /// Register length.
    #[arg(long = "L")]
    l: Vec<usize>,
    /// Truncation level.
    #[arg(long = "N")]
    big_n: Vec<usize>,
    /// Corrective levels.
    #[arg(long)]
    ell: Vec<usize>,
    /// Sequence length (paired additions and subtractions).
    #[arg(long)]
    n: Vec<u64>,
    /// Sweep one axis: `AXIS=start:stop:step` with AXIS in L, N, ell, n (stop inclusive).
    #[arg(long)]
    sweep: Option<String>,
}

#[derive(Args)]
struct Output {
    /// Emit JSON instead of CSV.
    #[arg(long)]
    json: bool,
    /// Write to a file plus a sibling `.manifest.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy)]
struct Point {
    l: usize,
    big_n: usize,
    ell: usize,
    n: u64,
    n_given: bool,
}

impl Point {
    fn cfg(&self) -> Result<TruncationConfig, CliError> {
        Ok(TruncationConfig::new(self.l, self.big_n, self.ell)?)
    }
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<truncq::Error> for CliError {
    fn from(e: truncq::Error) -> Self {
        use truncq::Error as E;
        let code = match e {
            E::CapExceeded { .. } => 4,
            E::Schema(_) | E::Monotonicity(_) | E::MissingCostEntry { .. } | E::Io(_) => 3,
            _ => 2,
        };
        let mut message = e.to_string();
        if code == 4 {
            message.push_str("; use `predict` or `montecarlo` for large registers");
        }
        Self { code, message }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self {
            code: 3,
            message: e.to_string(),
        }
    }
}

fn parse_sweep(spec: &str) -> Result<(String, Vec<u64>), CliError> {
    let bad = || {
        CliError::usage(format!(
            "invalid --sweep `{spec}`, expected AXIS=start:stop:step"
        ))
    };
    let (axis, range) = spec.split_once('=').ok_or_else(bad)?;
    let parts: Vec<u64> = range
        .split(':')
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let [start, stop, step] = parts[..] else {
        return Err(bad());
    };
    if step == 0 || stop < start {
        return Err(bad());
    }
    Ok((
        axis.to_string(),
        (start..=stop).step_by(step as usize).collect(),
    ))
}

fn expand(axes: &Axes) -> Result<Vec<Point>, CliError> {
    let to_u64 = |v: &[usize]| v.iter().map(|&x| x as u64).collect::<Vec<_>>();
    let n_given = !axes.n.is_empty() || axes.sweep.as_deref().is_some_and(|s| s.starts_with("n="));
    let mut lists: Vec<(&str, Vec<u64>)> = vec![
        ("L", to_u64(&axes.l)),
        ("N", to_u64(&axes.big_n)),
        (
            "ell",
            if axes.ell.is_empty() {
                vec![0]
            } else {
                to_u64(&axes.ell)
            },
        ),
        (
            "n",
            if axes.n.is_empty() {
                vec![1]
            } else {
                axes.n.clone()
            },
        ),
    ];
    if let Some(spec) = &axes.sweep {
        let (axis, values) = parse_sweep(spec)?;
        let slot = lists
            .iter_mut()
            .find(|(name, _)| *name == axis)
            .ok_or_else(|| CliError::usage(format!("unknown sweep axis `{axis}`")))?;
        slot.1 = values;
    }
    if let Some((name, _)) = lists.iter().find(|(_, v)| v.is_empty()) {
        return Err(CliError::usage(format!(
            "--{name} is required (directly or via --sweep)"
        )));
    }
    if lists.iter().filter(|(_, v)| v.len() > 1).count() > 1 {
        return Err(CliError::usage(
            "only one axis may take several values per invocation",
        ));
    }
    let mut points = vec![];
    for &l in &lists[0].1 {
        for &big_n in &lists[1].1 {
            for &ell in &lists[2].1 {
                for &n in &lists[3].1 {
                    points.push(Point {
                        l: l as usize,
                        big_n: big_n as usize,
                        ell: ell as usize,
                        n,
                        n_given,
                    });
                }
            }
        }
    }
    Ok(points)
}

#[derive(Serialize)]
struct RunManifest {
    command: String,
    arguments: Vec<String>,
    seed: Option<u64>,
    tool_version: &'static str,
    timestamp: String,
}

fn manifest(command: &str, seed: Option<u64>) -> RunManifest {
    RunManifest {
        command: command.to_string(),
        arguments: std::env::args().skip(1).collect(),
        seed,
        tool_version: env!("CARGO_PKG_VERSION"),
        timestamp: chrono::Utc::now().to_rfc3339(),
    }
}

fn render<T: Serialize>(rows: &[T], json: bool) -> Result<Vec<u8>, CliError> {
    if json {
        let mut v = serde_json::to_vec_pretty(rows).map_err(|e| CliError {
            code: 3,
            message: e.to_string(),
        })?;
        v.push(b'\n');
        return Ok(v);
    }
    let mut w = csv::Writer::from_writer(vec![]);
    for r in rows {
        w.serialize(r).map_err(|e| CliError {
            code: 3,
            message: e.to_string(),
        })?;
    }
    w.into_inner().map_err(|e| CliError {
        code: 3,
        message: e.to_string(),
    })
}

fn emit(bytes: &[u8], out: Option<&PathBuf>, m: &RunManifest) -> Result<(), CliError> {
    let manifest_json = serde_json::to_string_pretty(m).expect("manifest serializes");
    match out {
        Some(path) => {
            std::fs::write(path, bytes)?;
            let mut name = path
                .file_name()
                .map(|s| s.to_os_string())
                .unwrap_or_default();
            name.push(".manifest.json");
            std::fs::write(path.with_file_name(name), manifest_json + "\n")?;
        }
        None => {
            std::io::stdout().write_all(bytes)?;
            eprintln!(
                "manifest: {}",
                serde_json::to_string(m).expect("manifest serializes")
            );
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct PredictRow {
    model: &'static str,
    #[serde(rename = "L")]
    l: usize,
    #[serde(rename = "N")]
    big_n: usize,
    ell: usize,
    n: u64,
    fidelity: f64,
}

fn predict(
    model: PredictModel,
    p: &Point,
    asymptotic: bool,
    numeric: bool,
    shor_mode: bool,
) -> Result<PredictRow, CliError> {
    let cfg = p.cfg()?;
    let params = SequenceModelParams::new(p.n, p.l, p.big_n, p.ell);
    let (name, fidelity) = match model {
        PredictModel::Adder if asymptotic => ("adder", runstats::adder_fidelity_asymptotic(&cfg)),
        PredictModel::Adder => ("adder", runstats::adder_fidelity_avg(&cfg)?),
        PredictModel::Addsub if asymptotic => {
            ("addsub", runstats::addsub_fidelity_asymptotic(&cfg))
        }
        PredictModel::Addsub => ("addsub", runstats::addsub_fidelity_avg(&cfg)?),
        PredictModel::Sequence if numeric => {
            ("sequence", sequence::sequence_fidelity_numeric(&params)?)
        }
        PredictModel::Sequence => ("sequence", sequence::sequence_fidelity_closed(&params)),
        PredictModel::Corrected if shor_mode => (
            "corrected-shor",
            shor::corrected_shor_success(p.l, p.big_n, p.ell)?,
        ),
        PredictModel::Corrected => ("corrected", sequence::corrected_fidelity(&params)),
        PredictModel::Modadder => ("modadder", shor::modular_adder_fidelity(&cfg)?),
        PredictModel::Shor => ("shor", shor::shor_fidelity(p.l, p.big_n)?),
    };
    Ok(PredictRow {
        model: name,
        l: p.l,
        big_n: p.big_n,
        ell: p.ell,
        n: p.n,
        fidelity,
    })
}

#[derive(Serialize)]
struct SimRow {
    circuit: &'static str,
    #[serde(rename = "L")]
    l: usize,
    #[serde(rename = "N")]
    big_n: usize,
    ell: usize,
    n: u64,
    sigma: f64,
    trials: u64,
    seed: u64,
    mean: f64,
    std_err: f64,
}

struct SimOptions {
    sigma: f64,
    plan: MonteCarloPlan,
    x: Option<u64>,
    a: Option<u64>,
    count: usize,
    odd: bool,
}

fn simulate(circuit: SimCircuit, p: &Point, o: &SimOptions) -> Result<SimRow, CliError> {
    let cfg = p.cfg()?;
    let (name, est) = match circuit {
        SimCircuit::Adder => match (o.x, o.a) {
            (Some(x), Some(a)) => {
                let c =
                    sim::build_truncated_adder(&BitString::from_u64(a, p.l)?, &cfg, ArithOp::Add)?;
                let input = BitString::from_u64(x, p.l)?.to_u64().expect("fits") as usize;
                let expected = ((x + a) % (1u64 << p.l)) as usize;
                let est = if o.sigma == 0.0 {
                    let mut s = sim::QuantumState::basis(p.l, input)?;
                    s.run(&c)?;
                    Estimate {
                        mean: s.probability(expected),
                        std_err: 0.0,
                        trials: 1,
                    }
                } else {
                    sim::run_noisy(&c, input, expected, o.sigma, &o.plan)?
                };
                ("adder", est)
            }
            (None, None) => ("adder", sim::noisy_adder_average(&cfg, o.sigma, &o.plan)?),
            _ => return Err(CliError::usage("--x and --a must be given together")),
        },
        SimCircuit::Modadder => (
            "modadder",
            sim::modular_adder_sequence_average(&cfg, o.count, o.odd, o.sigma, &o.plan)?,
        ),
        SimCircuit::Sequence => {
            if o.sigma != 0.0 {
                return Err(CliError::usage(
                    "sequence simulation is noiseless; drop --sigma",
                ));
            }
            (
                "sequence",
                sim::statevector_sequence_average(&cfg, p.n as usize, &o.plan)?,
            )
        }
    };
    Ok(SimRow {
        circuit: name,
        l: p.l,
        big_n: p.big_n,
        ell: p.ell,
        n: p.n,
        sigma: o.sigma,
        trials: est.trials,
        seed: o.plan.seed,
        mean: est.mean,
        std_err: est.std_err,
    })
}

#[derive(Serialize)]
struct McRow {
    estimator: &'static str,
    #[serde(rename = "L")]
    l: usize,
    #[serde(rename = "N")]
    big_n: usize,
    ell: usize,
    n: u64,
    samples: u64,
    seed: u64,
    mean: f64,
    std_err: f64,
    reference: f64,
    z: f64,
}

fn montecarlo(
    kind: Option<McEstimator>,
    p: &Point,
    plan: &MonteCarloPlan,
) -> Result<McRow, CliError> {
    let cfg = p.cfg()?;
    let kind = kind.unwrap_or(if p.n_given {
        McEstimator::Sequence
    } else {
        McEstimator::Adder
    });
    let (name, est, reference) = match kind {
        McEstimator::Adder => (
            "adder",
            Estimator::Adder,
            runstats::adder_fidelity_asymptotic(&cfg),
        ),
        McEstimator::Addsub => (
            "addsub",
            Estimator::AddSub,
            runstats::addsub_fidelity_asymptotic(&cfg),
        ),
        McEstimator::Sequence => (
            "sequence",
            Estimator::Sequence { n: p.n },
            sequence::corrected_fidelity(&SequenceModelParams::new(p.n, p.l, p.big_n, p.ell)),
        ),
    };
    let e = sim::monte_carlo_average(&cfg, est, plan)?;
    Ok(McRow {
        estimator: name,
        l: p.l,
        big_n: p.big_n,
        ell: p.ell,
        n: p.n,
        samples: e.trials,
        seed: plan.seed,
        mean: e.mean,
        std_err: e.std_err,
        reference,
        z: e.z_score(reference),
    })
}

#[derive(Serialize)]
struct CostOutput {
    regime: &'static str,
    #[serde(rename = "L")]
    l: u64,
    #[serde(rename = "N")]
    big_n: Option<u32>,
    ell: u32,
    eta: f64,
    table: String,
    report: cost::CostReport,
}

fn run_cost(
    l: u64,
    big_n: Option<u32>,
    ell: u32,
    eta: Option<f64>,
    table: Option<&PathBuf>,
    regime: CostRegime,
) -> Result<CostOutput, CliError> {
    let table = match table {
        Some(p) => CostTable::load(p)?,
        None => CostTable::placeholder(),
    };
    let need_n = || big_n.ok_or_else(|| CliError::usage("this regime needs --N"));
    let (name, eta, report) = match regime {
        CostRegime::Adder => {
            let eta = eta.unwrap_or(cost::ETA_TRUNCATED_ADDER);
            (
                "adder",
                eta,
                cost::truncated_adder_cost(l, need_n()?, eta, &table)?,
            )
        }
        CostRegime::Draper => {
            let eta = eta.unwrap_or(cost::ETA_FULL_ADDER);
            ("draper", eta, cost::draper_adder_cost(l, eta, &table)?)
        }
        CostRegime::ShorFull => {
            let eta = eta.unwrap_or(cost::ETA_FULL_SHOR);
            (
                "shor-full",
                eta,
                cost::shor_cost(l, Regime::Full, eta, &table)?,
            )
        }
        CostRegime::ShorTruncated => {
            let eta = eta.unwrap_or(cost::ETA_TRUNCATED_SHOR);
            let regime = Regime::Truncated { n: need_n()?, ell };
            (
                "shor-truncated",
                eta,
                cost::shor_cost(l, regime, eta, &table)?,
            )
        }
    };
    Ok(CostOutput {
        regime: name,
        l,
        big_n,
        ell,
        eta,
        table: table.source.clone(),
        report,
    })
}

fn collect<T>(
    points: &[Point],
    f: impl Fn(&Point) -> Result<T, CliError>,
) -> Result<Vec<T>, CliError> {
    points.iter().map(f).collect()
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Predict {
            model,
            axes,
            asymptotic,
            numeric,
            shor,
            output,
        } => {
            let rows = collect(&expand(&axes)?, |p| {
                predict(model, p, asymptotic, numeric, shor)
            })?;
            emit(
                &render(&rows, output.json)?,
                output.out.as_ref(),
                &manifest("predict", None),
            )
        }
        Command::Simulate {
            circuit,
            axes,
            sigma,
            trials,
            seed,
            x,
            a,
            count,
            any_modulus,
            output,
        } => {
            let opts = SimOptions {
                sigma,
                plan: MonteCarloPlan::new(trials, seed),
                x,
                a,
                count,
                odd: !any_modulus,
            };
            let rows = collect(&expand(&axes)?, |p| simulate(circuit, p, &opts))?;
            emit(
                &render(&rows, output.json)?,
                output.out.as_ref(),
                &manifest("simulate", Some(seed)),
            )
        }
        Command::Montecarlo {
            axes,
            estimator,
            samples,
            seed,
            output,
        } => {
            let plan = MonteCarloPlan::new(samples, seed);
            let rows = collect(&expand(&axes)?, |p| montecarlo(estimator, p, &plan))?;
            emit(
                &render(&rows, output.json)?,
                output.out.as_ref(),
                &manifest("montecarlo", Some(seed)),
            )
        }
        Command::Cost {
            l,
            big_n,
            ell,
            eta,
            table,
            regime,
            out,
        } => {
            let report = run_cost(l, big_n, ell, eta, table.as_ref(), regime)?;
            let mut bytes = serde_json::to_vec_pretty(&report).map_err(|e| CliError {
                code: 3,
                message: e.to_string(),
            })?;
            bytes.push(b'\n');
            emit(&bytes, out.as_ref(), &manifest("cost", None))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
