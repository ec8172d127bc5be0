//! Batch front-end: load instances, run any solver, and reproduce the
//! profit-ratio simulation studies as CSV.
//!
//! Every run that writes an output file also writes a manifest
//! (`<out>.manifest.json`) recording the command, its semantic parameters,
//! the seed, and the tolerances in effect; reruns with identical manifests
//! produce byte-identical output bodies. Exit codes: 0 success, 1 usage or
//! I/O error, 2 inadmissible instance, 3 solver failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::equilibrium;
use crate::error::Error;
use crate::generators::{self, BlendSpec};
use crate::model::{MarketInstance, PriceVector};
use crate::two_price::{self, TwoPriceInstance};
use crate::value_of_info;
use crate::{discriminatory, uniform};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INVALID_INSTANCE: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Parser)]
#[command(name = "netprice", version, about = "Pricing solvers for goods with local network effects")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Check an instance against the model invariants.
    Validate {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the consumption game at a fixed price vector.
    Equilibrium {
        #[arg(long)]
        instance: PathBuf,
        /// JSON array with one price per agent.
        #[arg(long)]
        prices: PathBuf,
        #[arg(long, default_value_t = equilibrium::DEFAULT_TOL)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve one of the seller's pricing problems.
    Price {
        #[command(subcommand)]
        mode: PriceMode,
    },
    /// Blind-vs-informed profit comparison with spectral bounds.
    ValueOfInfo {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit an instance from one of the network families.
    Generate {
        family: Family,
        #[arg(long)]
        n: usize,
        /// Blend weight on the first orientation.
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Curvature rule: a literal like "2" or a fraction of n like "n/10".
        #[arg(long = "b-rule")]
        b_rule: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Profit-ratio study over a blend grid, written as CSV.
    Figure {
        family: Family,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long = "b-rule")]
        b_rule: String,
        #[arg(long = "alpha-points", default_value_t = 101)]
        alpha_points: usize,
        /// Random instances averaged per grid point (deterministic families
        /// always use one).
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
pub enum PriceMode {
    /// Closed-form individualized prices.
    Discriminate {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimal single uniform price.
    Uniform {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full/discounted assignment for two exogenous price levels.
    Two {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long = "p-low")]
        p_low: f64,
        #[arg(long = "p-high")]
        p_high: f64,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Skip the exact fast path even when enumeration would be feasible.
        #[arg(long = "force-sdp", default_value_t = false)]
        force_sdp: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Family {
    Star,
    Triangular,
    Pa,
}

impl Family {
    fn as_str(self) -> &'static str {
        match self {
            Family::Star => "star",
            Family::Triangular => "triangular",
            Family::Pa => "pa",
        }
    }
}

/// Why a command failed, already sorted into an exit class.
enum Failure {
    Usage(String),
    InvalidInstance(String),
    Solver(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidData(_) | Error::InvalidParameter(_) => Failure::Usage(e.to_string()),
            Error::NotPositiveDefinite => Failure::InvalidInstance(e.to_string()),
            _ => Failure::Solver(e.to_string()),
        }
    }
}

type CmdResult = std::result::Result<(), Failure>;

/// Execute a parsed command line, returning the process exit code.
pub fn run(cli: Cli) -> i32 {
    let outcome = match cli.command {
        Command::Validate { instance, out } => cmd_validate(&instance, out.as_deref()),
        Command::Equilibrium {
            instance,
            prices,
            tol,
            out,
        } => cmd_equilibrium(&instance, &prices, tol, out.as_deref()),
        Command::Price { mode } => match mode {
            PriceMode::Discriminate { instance, out } => cmd_discriminate(&instance, out.as_deref()),
            PriceMode::Uniform { instance, out } => cmd_uniform(&instance, out.as_deref()),
            PriceMode::Two {
                instance,
                p_low,
                p_high,
                trials,
                seed,
                force_sdp,
                out,
            } => cmd_two(&instance, p_low, p_high, trials, seed, force_sdp, out.as_deref()),
        },
        Command::ValueOfInfo { instance, out } => cmd_value_of_info(&instance, out.as_deref()),
        Command::Generate {
            family,
            n,
            alpha,
            seed,
            b_rule,
            out,
        } => cmd_generate(family, n, alpha, seed, &b_rule, out.as_deref()),
        Command::Figure {
            family,
            n,
            b_rule,
            alpha_points,
            instances,
            seed,
            out,
        } => cmd_figure(family, n, &b_rule, alpha_points, instances, seed, &out),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::InvalidInstance(msg)) => {
            eprintln!("invalid instance: {msg}");
            EXIT_INVALID_INSTANCE
        }
        Err(Failure::Solver(msg)) => {
            eprintln!("solver failure: {msg}");
            EXIT_SOLVER
        }
    }
}

fn load_instance(path: &Path) -> std::result::Result<MarketInstance, Failure> {
    MarketInstance::load(path).map_err(|e| Failure::Usage(e.to_string()))
}

/// Load an instance and insist on admissibility.
fn load_admissible(path: &Path) -> std::result::Result<MarketInstance, Failure> {
    let inst = load_instance(path)?;
    let report = inst.validate();
    if !report.is_admissible() {
        return Err(Failure::InvalidInstance(report.to_string()));
    }
    Ok(inst)
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>, manifest: Option<&Manifest>) -> CmdResult {
    let body = serde_json::to_string_pretty(value).expect("serializable output");
    match out {
        Some(path) => {
            std::fs::write(path, body.as_bytes())
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            if let Some(m) = manifest {
                m.write_alongside(path)?;
            }
        }
        None => println!("{body}"),
    }
    Ok(())
}

/// Run parameters recorded next to each written output.
#[derive(Serialize)]
struct Manifest {
    command: String,
    parameters: BTreeMap<String, String>,
    tolerances: BTreeMap<String, String>,
}

impl Manifest {
    fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            parameters: BTreeMap::new(),
            tolerances: BTreeMap::new(),
        }
    }

    fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.parameters.insert(key.into(), value.to_string());
        self
    }

    fn tolerance(mut self, key: &str, value: impl ToString) -> Self {
        self.tolerances.insert(key.into(), value.to_string());
        self
    }

    fn write_alongside(&self, out: &Path) -> CmdResult {
        let mut path = out.as_os_str().to_owned();
        path.push(".manifest.json");
        let body = serde_json::to_string_pretty(self).expect("serializable manifest");
        std::fs::write(&path, body.as_bytes())
            .map_err(|e| Failure::Usage(format!("manifest: {e}")))?;
        Ok(())
    }
}

#[derive(Serialize)]
struct ValidateOutput {
    admissible: bool,
    violations: Vec<String>,
}

fn cmd_validate(instance: &Path, out: Option<&Path>) -> CmdResult {
    let inst = load_instance(instance)?;
    let report = inst.validate();
    let output = ValidateOutput {
        admissible: report.is_admissible(),
        violations: report.violations.iter().map(|v| v.to_string()).collect(),
    };
    emit(&output, out, Some(&Manifest::new("validate")))?;
    if !output.admissible {
        return Err(Failure::InvalidInstance(report.to_string()));
    }
    Ok(())
}

#[derive(Serialize)]
struct EquilibriumOutput {
    x: Vec<f64>,
    support: Vec<usize>,
    residual: f64,
    iterations: usize,
}

fn cmd_equilibrium(instance: &Path, prices: &Path, tol: f64, out: Option<&Path>) -> CmdResult {
    let inst = load_admissible(instance)?;
    let text = std::fs::read_to_string(prices)
        .map_err(|e| Failure::Usage(format!("{}: {e}", prices.display())))?;
    let raw: Vec<f64> =
        serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("prices: {e}")))?;
    let p = PriceVector::new(raw).map_err(|e| Failure::Usage(e.to_string()))?;
    let eq = equilibrium::solve_equilibrium(&inst, &p, tol, equilibrium::DEFAULT_MAX_ITER)
        .map_err(Failure::from)?;
    let output = EquilibriumOutput {
        x: eq.x.values().iter().copied().collect(),
        support: eq.support,
        residual: eq.residual,
        iterations: eq.iterations,
    };
    let manifest = Manifest::new("equilibrium")
        .param("max_iter", equilibrium::DEFAULT_MAX_ITER)
        .tolerance("tol", tol);
    emit(&output, out, Some(&manifest))
}

#[derive(Serialize)]
struct DiscriminateOutput {
    prices: Vec<f64>,
    consumption: Vec<f64>,
    profit: f64,
    nominal: Vec<f64>,
    markup: Vec<f64>,
    discount: Vec<f64>,
}

fn cmd_discriminate(instance: &Path, out: Option<&Path>) -> CmdResult {
    let inst = load_admissible(instance)?;
    let res = discriminatory::optimal_prices(&inst).map_err(Failure::from)?;
    let output = DiscriminateOutput {
        prices: res.prices.values().iter().copied().collect(),
        consumption: res.consumption.values().iter().copied().collect(),
        profit: res.profit,
        nominal: res.nominal.iter().copied().collect(),
        markup: res.markup.iter().copied().collect(),
        discount: res.discount.iter().copied().collect(),
    };
    emit(&output, out, Some(&Manifest::new("price discriminate")))
}

#[derive(Serialize)]
struct UniformOutput {
    p_opt: f64,
    profit: f64,
    breakpoints: Vec<f64>,
    dropout_sets: Vec<Vec<usize>>,
    active_profile: Vec<usize>,
}

fn cmd_uniform(instance: &Path, out: Option<&Path>) -> CmdResult {
    let inst = load_admissible(instance)?;
    let res = uniform::optimal_uniform_price(&inst).map_err(Failure::from)?;
    let output = UniformOutput {
        p_opt: res.p_opt,
        profit: res.profit,
        breakpoints: res.breakpoints,
        dropout_sets: res.dropout_sets,
        active_profile: res.active_profile,
    };
    let manifest =
        Manifest::new("price uniform").tolerance("gain_tie_tol", uniform::GAIN_TIE_TOL);
    emit(&output, out, Some(&manifest))
}

#[derive(Serialize)]
struct TrialsOutput {
    count: usize,
    mean: f64,
    best: f64,
}

#[derive(Serialize)]
struct TwoPriceOutput {
    method: String,
    assignment: Vec<i8>,
    prices: Vec<f64>,
    profit: f64,
    m_offset: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    sdp_upper_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    guarantee_holds: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trials: Option<TrialsOutput>,
}

fn cmd_two(
    instance: &Path,
    p_low: f64,
    p_high: f64,
    trials: usize,
    seed: u64,
    force_sdp: bool,
    out: Option<&Path>,
) -> CmdResult {
    let inst = load_admissible(instance)?;
    let tp = TwoPriceInstance::new(inst, p_low, p_high)
        .map_err(|e| Failure::InvalidInstance(e.to_string()))?;
    let res = if force_sdp {
        two_price::approximate_sdp(&tp, trials, seed)
    } else {
        two_price::approximate(&tp, trials, seed)
    }
    .map_err(Failure::from)?;
    let output = TwoPriceOutput {
        method: res.method.as_str().to_string(),
        assignment: res.assignment,
        prices: res.prices.values().iter().copied().collect(),
        profit: res.profit,
        m_offset: res.m_offset,
        sdp_upper_bound: res.sdp_upper_bound,
        guarantee_holds: res.guarantee_holds,
        trials: res.rounding.map(|s| TrialsOutput {
            count: s.trials,
            mean: s.mean,
            best: s.best,
        }),
    };
    let manifest = Manifest::new("price two")
        .param("p_low", p_low)
        .param("p_high", p_high)
        .param("trials", trials)
        .param("seed", seed)
        .param("force_sdp", force_sdp)
        .tolerance("sdp_tol", two_price::DEFAULT_SDP_TOL)
        .tolerance("sdp_max_iter", two_price::DEFAULT_SDP_MAX_ITER);
    emit(&output, out, Some(&manifest))
}

#[derive(Serialize)]
struct ValueOfInfoOutput {
    pi0: f64,
    pi_n: f64,
    ratio: f64,
    lower_bound: f64,
    upper_bound: f64,
}

fn cmd_value_of_info(instance: &Path, out: Option<&Path>) -> CmdResult {
    let inst = load_instance(instance)?;
    let cmp = value_of_info::compare(&inst).map_err(Failure::from)?;
    let output = ValueOfInfoOutput {
        pi0: cmp.pi0,
        pi_n: cmp.pi_n,
        ratio: cmp.ratio,
        lower_bound: cmp.lower_bound,
        upper_bound: cmp.upper_bound,
    };
    emit(&output, out, Some(&Manifest::new("value-of-info")))
}

/// "n/10" style fractions of n, or a literal float.
fn parse_b_rule(rule: &str, n: usize) -> std::result::Result<f64, Failure> {
    let value = if let Some(div) = rule.strip_prefix("n/") {
        let d: f64 = div
            .parse()
            .map_err(|_| Failure::Usage(format!("bad b rule '{rule}'")))?;
        n as f64 / d
    } else {
        rule.parse()
            .map_err(|_| Failure::Usage(format!("bad b rule '{rule}'")))?
    };
    if !(value.is_finite() && value > 0.0) {
        return Err(Failure::Usage(format!("b rule '{rule}' must be positive")));
    }
    Ok(value)
}

fn family_pair(
    family: Family,
    n: usize,
    seed: u64,
) -> std::result::Result<(DMatrix<f64>, DMatrix<f64>), Failure> {
    match family {
        Family::Star => generators::star_pair(n).map_err(Failure::from),
        Family::Triangular => Ok(generators::triangular_pair(n, seed)),
        Family::Pa => generators::preferential_attachment_pair(n, seed).map_err(Failure::from),
    }
}

fn cmd_generate(
    family: Family,
    n: usize,
    alpha: f64,
    seed: u64,
    b_rule: &str,
    out: Option<&Path>,
) -> CmdResult {
    let b = parse_b_rule(b_rule, n)?;
    let (g1, g2) = family_pair(family, n, seed)?;
    let g = generators::blend(&BlendSpec { g1, g2, alpha }).map_err(Failure::from)?;
    let inst = generators::unit_margin_instance(g, b).map_err(Failure::from)?;
    let manifest = Manifest::new("generate")
        .param("family", family.as_str())
        .param("n", n)
        .param("alpha", alpha)
        .param("seed", seed)
        .param("b_rule", b_rule);
    let value: serde_json::Value =
        serde_json::from_str(&inst.to_json_string()).expect("instance json");
    emit(&value, out, Some(&manifest))
}

/// Mixes a base seed with an instance index; plain addition would correlate
/// consecutive sweeps.
fn derive_seed(seed: u64, index: usize) -> u64 {
    (seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)).wrapping_add(0x2545_F491_4F6C_DD1D)
}

/// Twelve significant digits, exponent notation, '.' decimal point.
fn fmt_sig(x: f64) -> String {
    format!("{x:.11e}")
}

fn cmd_figure(
    family: Family,
    n: usize,
    b_rule: &str,
    alpha_points: usize,
    instances: usize,
    seed: u64,
    out: &Path,
) -> CmdResult {
    if alpha_points < 2 {
        return Err(Failure::Usage("alpha-points must be at least 2".into()));
    }
    if instances == 0 {
        return Err(Failure::Usage("instances must be positive".into()));
    }
    let b = parse_b_rule(b_rule, n)?;
    let instances = match family {
        Family::Star => 1, // deterministic family
        _ => instances,
    };
    let pairs: Vec<(DMatrix<f64>, DMatrix<f64>)> = (0..instances)
        .map(|k| family_pair(family, n, derive_seed(seed, k)))
        .collect::<std::result::Result<_, _>>()?;
    let alphas: Vec<f64> = (0..alpha_points)
        .map(|i| i as f64 / (alpha_points - 1) as f64)
        .collect();

    // One comparison per (alpha, instance), parallel with deterministic order.
    let grid: Vec<(usize, usize)> = (0..alphas.len())
        .flat_map(|ai| (0..instances).map(move |k| (ai, k)))
        .collect();
    let cells: Vec<crate::Result<value_of_info::ProfitComparison>> = grid
        .par_iter()
        .map(|&(ai, k)| {
            let g = generators::blend(&BlendSpec {
                g1: pairs[k].0.clone(),
                g2: pairs[k].1.clone(),
                alpha: alphas[ai],
            })?;
            let inst = generators::unit_margin_instance(g, b)?;
            value_of_info::compare(&inst)
        })
        .collect();

    let mut body = String::from("alpha,ratio_mean,lower_mean,upper_mean\n");
    for (ai, &alpha) in alphas.iter().enumerate() {
        let mut ratio = 0.0;
        let mut lower = 0.0;
        let mut upper = 0.0;
        for k in 0..instances {
            let cell = cells[ai * instances + k]
                .as_ref()
                .map_err(|e| Failure::from(e.clone()))?;
            ratio += cell.ratio;
            lower += cell.lower_bound;
            upper += cell.upper_bound;
        }
        let m = instances as f64;
        body.push_str(&format!(
            "{},{},{},{}\n",
            fmt_sig(alpha),
            fmt_sig(ratio / m),
            fmt_sig(lower / m),
            fmt_sig(upper / m)
        ));
    }
    std::fs::write(out, body.as_bytes())
        .map_err(|e| Failure::Usage(format!("{}: {e}", out.display())))?;
    Manifest::new("figure")
        .param("family", family.as_str())
        .param("n", n)
        .param("b_rule", b_rule)
        .param("alpha_points", alpha_points)
        .param("instances", instances)
        .param("seed", seed)
        .write_alongside(out)
}
