//! Command-line reports: coupling curves, single-point cluster reports,
//! criterion sweeps and the verification run.
//!
//! Every output embeds its resolved configuration (`# config: key=value`
//! lines in CSV, a `"config"` object in JSON). Passing such a file back via
//! `--config` reproduces it byte for byte. The output path itself is not
//! part of the embedded configuration.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::cluster::{
    default_cluster, mu_grid, regime_report, threshold_limits, vacuum_nullifier_variances,
};
use crate::covariance::{basis_change, matrix_rows, BasisTransform};
use crate::error::{Error, Result};
use crate::langevin::{
    build_system, zero_freq_covariance_closed, zero_freq_covariance_numeric, Regime, SystemParams,
};
use crate::lg_overlap::{coupling_argmax, coupling_table};
use crate::sde::{self, simulate, verify_against_closed_form, SimulationConfig};
use crate::supermode::{db, supermode_report};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_THRESHOLD: i32 = 2;
pub const EXIT_VERIFICATION: i32 = 3;

/// Coupling columns written by `couplings`: `|l| ≤ 3`, both pump signs.
pub const COUPLING_COLUMNS: [(i32, i32, i32); 6] = [
    (1, 0, 1),
    (1, -1, 2),
    (1, -2, 3),
    (-1, 0, -1),
    (-1, 1, -2),
    (-1, 2, -3),
];

#[derive(Debug, Parser)]
#[command(
    name = "oamcluster",
    version,
    about = "OAM supermodes and four-node cluster states"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Coupling constants versus waist ratio (CSV).
    Couplings(CouplingsArgs),
    /// Full single-point report: supermodes, cluster unitary, nullifiers (JSON).
    Cluster(ClusterArgs),
    /// Nullifier variances and criterion verdicts on a pump grid (CSV).
    VlfSweep(SweepArgs),
    /// Closed-form/numeric oracle pair plus Monte Carlo validation (JSON).
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// key=value file, or a previous output whose embedded config is reused.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CouplingsArgs {
    #[arg(long)]
    pub r_min: Option<f64>,
    #[arg(long)]
    pub r_max: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long)]
    pub regime: Option<String>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub regime: Option<String>,
    #[arg(long)]
    pub mu_steps: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Monte Carlo trajectories; 0 runs only the analytic oracle pair.
    #[arg(long)]
    pub trajectories: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub regime: Option<String>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

/// Resolved parameters of one run, in canonical string form.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunConfig {
    pub command: String,
    pub values: BTreeMap<String, String>,
}

impl RunConfig {
    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self
            .values
            .get(key)
            .ok_or_else(|| Error::invalid(format!("missing '{key}'")))?;
        raw.parse()
            .map_err(|_| Error::invalid(format!("cannot parse {key}={raw}")))
    }

    fn set(&mut self, key: &str, value: impl ToString) {
        self.values.insert(key.to_string(), value.to_string());
    }

    fn set_f64(&mut self, key: &str, value: f64) {
        self.set(key, format!("{value:?}"));
    }

    fn header_lines(&self) -> String {
        let mut out = format!("# config: command={}\n", self.command);
        for (k, v) in &self.values {
            out.push_str(&format!("# config: {k}={v}\n"));
        }
        out
    }

    fn json(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        map.insert("command".into(), json!(self.command));
        for (k, v) in &self.values {
            map.insert(k.clone(), json!(v));
        }
        serde_json::Value::Object(map)
    }
}

/// Reads `key=value` pairs from a config file or from the embedded
/// configuration of a previous CSV/JSON output.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    if text.trim_start().starts_with('{') {
        let v: serde_json::Value = serde_json::from_str(text)?;
        let cfg = v
            .get("config")
            .and_then(|c| c.as_object())
            .ok_or_else(|| Error::invalid("JSON file has no \"config\" object"))?;
        for (k, val) in cfg {
            let s = val
                .as_str()
                .map(str::to_string)
                .unwrap_or_else(|| val.to_string());
            map.insert(k.clone(), s);
        }
        return Ok(map);
    }
    let embedded = text.lines().any(|l| l.starts_with("# config:"));
    for (no, line) in text.lines().enumerate() {
        let line = if embedded {
            match line.strip_prefix("# config:") {
                Some(rest) => rest.trim(),
                None => continue,
            }
        } else {
            let l = line.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            l
        };
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::invalid(format!("config line {} is not key=value: '{line}'", no + 1))
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn load_file_config(path: &Option<PathBuf>, command: &str) -> Result<BTreeMap<String, String>> {
    let Some(path) = path else {
        return Ok(BTreeMap::new());
    };
    let mut map = parse_config(&std::fs::read_to_string(path)?)?;
    if let Some(c) = map.remove("command") {
        if c != command {
            return Err(Error::invalid(format!(
                "config file is for '{c}', not '{command}'"
            )));
        }
    }
    Ok(map)
}

/// Layers defaults, config file and flags (later wins), then re-renders
/// every value canonically through its typed parse.
fn resolve(
    command: &str,
    defaults: &[(&str, String)],
    file: BTreeMap<String, String>,
    flags: &[(&str, Option<String>)],
) -> Result<RunConfig> {
    let mut cfg = RunConfig {
        command: command.into(),
        values: BTreeMap::new(),
    };
    for (k, v) in defaults {
        cfg.set(k, v);
    }
    for (k, v) in file {
        if !cfg.values.contains_key(&k) {
            return Err(Error::invalid(format!(
                "unknown config key '{k}' for '{command}'"
            )));
        }
        cfg.values.insert(k, v);
    }
    for (k, v) in flags {
        if let Some(v) = v {
            cfg.set(k, v);
        }
    }
    Ok(cfg)
}

fn opt<T: ToString>(v: &Option<T>) -> Option<String> {
    v.as_ref().map(|x| x.to_string())
}

fn canonical_float(cfg: &mut RunConfig, key: &str) -> Result<f64> {
    let v: f64 = cfg.get(key)?;
    if !v.is_finite() {
        return Err(Error::invalid(format!("{key} must be finite")));
    }
    cfg.set_f64(key, v);
    Ok(v)
}

fn canonical_int<T: std::str::FromStr + ToString>(cfg: &mut RunConfig, key: &str) -> Result<T> {
    let v: T = cfg.get(key)?;
    cfg.set(key, v.to_string());
    Ok(v)
}

fn regime_of(cfg: &mut RunConfig) -> Result<Regime> {
    let regime: Regime = cfg
        .values
        .get("regime")
        .map(String::as_str)
        .unwrap_or("")
        .parse()?;
    cfg.set("regime", regime.name());
    Ok(regime)
}

pub fn couplings_config(args: &CouplingsArgs) -> Result<RunConfig> {
    let defaults = [
        ("r_min", "0.5".to_string()),
        ("r_max", "3.0".into()),
        ("steps", "251".into()),
    ];
    let flags = [
        ("r_min", opt(&args.r_min)),
        ("r_max", opt(&args.r_max)),
        ("steps", opt(&args.steps)),
    ];
    let mut cfg = resolve(
        "couplings",
        &defaults,
        load_file_config(&args.common.config, "couplings")?,
        &flags,
    )?;
    canonical_float(&mut cfg, "r_min")?;
    canonical_float(&mut cfg, "r_max")?;
    canonical_int::<usize>(&mut cfg, "steps")?;
    Ok(cfg)
}

pub fn cluster_config(args: &ClusterArgs) -> Result<RunConfig> {
    let defaults = [
        ("regime", "sqrt2".to_string()),
        ("mu", "0.632".into()),
        ("epsilon", "1e-6".into()),
        ("gamma", "1.0".into()),
    ];
    let flags = [
        ("regime", args.regime.clone()),
        ("mu", opt(&args.mu)),
        ("epsilon", opt(&args.epsilon)),
    ];
    let mut cfg = resolve(
        "cluster",
        &defaults,
        load_file_config(&args.common.config, "cluster")?,
        &flags,
    )?;
    regime_of(&mut cfg)?;
    for k in ["mu", "epsilon", "gamma"] {
        canonical_float(&mut cfg, k)?;
    }
    Ok(cfg)
}

pub fn sweep_config(args: &SweepArgs) -> Result<RunConfig> {
    let defaults = [
        ("regime", "sqrt2".to_string()),
        ("mu_steps", "200".into()),
        ("epsilon", "1e-6".into()),
        ("gamma", "1.0".into()),
    ];
    let flags = [
        ("regime", args.regime.clone()),
        ("mu_steps", opt(&args.mu_steps)),
        ("epsilon", opt(&args.epsilon)),
    ];
    let mut cfg = resolve(
        "vlf-sweep",
        &defaults,
        load_file_config(&args.common.config, "vlf-sweep")?,
        &flags,
    )?;
    regime_of(&mut cfg)?;
    canonical_int::<usize>(&mut cfg, "mu_steps")?;
    for k in ["epsilon", "gamma"] {
        canonical_float(&mut cfg, k)?;
    }
    Ok(cfg)
}

pub fn verify_config(args: &VerifyArgs) -> Result<RunConfig> {
    let defaults = [
        ("trajectories", sde::DEFAULT_TRAJECTORIES.to_string()),
        ("seed", sde::DEFAULT_SEED.to_string()),
        ("regime", "sqrt2".into()),
        ("mu", "0.3".into()),
        ("gamma", "1.0".into()),
        ("oracle_points", "100".into()),
        ("z_limit", "4.0".into()),
    ];
    let flags = [
        ("trajectories", opt(&args.trajectories)),
        ("seed", opt(&args.seed)),
        ("regime", args.regime.clone()),
        ("mu", opt(&args.mu)),
    ];
    let mut cfg = resolve(
        "verify",
        &defaults,
        load_file_config(&args.common.config, "verify")?,
        &flags,
    )?;
    regime_of(&mut cfg)?;
    canonical_int::<usize>(&mut cfg, "trajectories")?;
    canonical_int::<u64>(&mut cfg, "seed")?;
    canonical_int::<usize>(&mut cfg, "oracle_points")?;
    for k in ["mu", "gamma", "z_limit"] {
        canonical_float(&mut cfg, k)?;
    }
    Ok(cfg)
}

/// Coupling curves on an even `r` grid.
pub fn cmd_couplings(cfg: &RunConfig) -> Result<String> {
    let (r_min, r_max, steps): (f64, f64, usize) =
        (cfg.get("r_min")?, cfg.get("r_max")?, cfg.get("steps")?);
    if !(r_min > 0.0 && r_min < r_max) {
        return Err(Error::invalid(format!(
            "need 0 < r_min < r_max, got [{r_min}, {r_max}]"
        )));
    }
    if steps < 2 {
        return Err(Error::invalid(format!(
            "steps must be at least 2, got {steps}"
        )));
    }
    let grid: Vec<f64> = (0..steps)
        .map(|i| r_min + (r_max - r_min) * i as f64 / (steps - 1) as f64)
        .collect();
    let table = coupling_table(&COUPLING_COLUMNS, &grid)?;
    let mut out = cfg.header_lines();
    for &(lp, ls, li) in &COUPLING_COLUMNS[..] {
        if let Ok(r) = coupling_argmax(lp, ls, li, r_min, r_max) {
            out.push_str(&format!("# argmax chi_{lp}_{ls}_{li}: r={r:.6}\n"));
        }
    }
    out.push_str(&table.to_csv());
    Ok(out)
}

#[derive(Serialize)]
struct NullifierEntry {
    node: usize,
    variance: f64,
    vacuum_reference: f64,
    db: f64,
    coef_x: Vec<f64>,
    coef_y: Vec<f64>,
}

/// Single-point pipeline report.
pub fn cmd_cluster(cfg: &RunConfig) -> Result<String> {
    let regime: Regime = cfg.get("regime")?;
    let (mu, epsilon, gamma): (f64, f64, f64) =
        (cfg.get("mu")?, cfg.get("epsilon")?, cfg.get("gamma")?);
    let params = SystemParams::new(gamma, mu, regime.xi_for(mu))?;
    params.require_below_threshold()?;
    let state = default_cluster(&params)?;
    let supermodes = supermode_report(&params)?;
    let vac = vacuum_nullifier_variances();
    let ns = &state.nullifiers;
    let nullifiers: Vec<NullifierEntry> = (0..ns.variances.len())
        .map(|i| NullifierEntry {
            node: i + 1,
            variance: ns.variances[i],
            vacuum_reference: vac[i],
            db: db(ns.variances[i], vac[i]),
            coef_x: ns.coef_x.row(i).iter().copied().collect(),
            coef_y: ns.coef_y.row(i).iter().copied().collect(),
        })
        .collect();
    let inside = zero_freq_covariance_closed(&params)?;
    let limits = threshold_limits(regime, epsilon, gamma)?;
    let report = json!({
        "config": cfg.json(),
        "regime": regime.name(),
        "mu": mu,
        "xi": params.xi,
        "threshold_mu": regime.threshold_mu(),
        "threshold_margin": params.threshold_margin(),
        "intracavity_sum_diff": inside,
        "supermodes": supermodes,
        "arrangement": state.unitary.input_order,
        "inputs": state.inputs,
        "unitary": {
            "re": matrix_rows(&state.unitary.u.map(|z| z.re)),
            "im": matrix_rows(&state.unitary.u.map(|z| z.im)),
            "unitarity_error": state.unitary.unitarity_error(),
        },
        "nullifiers": nullifiers,
        "anti_squeezed_weight": ns.anti_squeezed_weight(&state.inputs),
        "vlf": {
            "pairs": state.vlf.pairs.iter().map(|(i, j)| [i + 1, j + 1]).collect::<Vec<_>>(),
            "pair_sums": state.vlf.pair_sums,
            "verdict": if state.vlf.certified { "cluster" } else { "not a cluster" },
        },
        "threshold_limits": limits,
    });
    Ok(serde_json::to_string_pretty(&report)? + "\n")
}

/// Criterion sweep up to `threshold·(1 − epsilon)`.
pub fn cmd_vlf_sweep(cfg: &RunConfig) -> Result<String> {
    let regime: Regime = cfg.get("regime")?;
    let (steps, epsilon, gamma): (usize, f64, f64) =
        (cfg.get("mu_steps")?, cfg.get("epsilon")?, cfg.get("gamma")?);
    if steps < 10 {
        return Err(Error::invalid(format!(
            "mu_steps must be at least 10, got {steps}"
        )));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    let report = regime_report(regime, &mu_grid(regime, steps, epsilon), epsilon, gamma)?;
    Ok(cfg.header_lines() + &report.to_csv())
}

/// Oracle pair on random points plus the Monte Carlo comparison.
/// Returns the JSON report and whether every check passed.
pub fn cmd_verify(cfg: &RunConfig) -> Result<(String, bool)> {
    let regime: Regime = cfg.get("regime")?;
    let (trajectories, seed, mu, gamma, points, z_limit): (usize, u64, f64, f64, usize, f64) = (
        cfg.get("trajectories")?,
        cfg.get("seed")?,
        cfg.get("mu")?,
        cfg.get("gamma")?,
        cfg.get("oracle_points")?,
        cfg.get("z_limit")?,
    );
    let oracle = oracle_equivalence(points, seed, 1e-10)?;
    let mut passed = oracle.passed;
    let monte_carlo = if trajectories > 0 {
        let params = SystemParams::new(gamma, mu, regime.xi_for(mu))?;
        let sim = SimulationConfig::default_for(&params, trajectories, seed);
        let rep = verify_against_closed_form(&simulate(&sim)?, z_limit)?;
        passed &= rep.passed;
        Some(rep)
    } else {
        None
    };
    let failing: Vec<_> = monte_carlo
        .iter()
        .flat_map(|r| {
            r.entries
                .iter()
                .filter(|e| e.z_score.abs() > z_limit || e.imag_z_score.abs() > z_limit)
        })
        .map(|e| format!("{}[{},{}]", e.block, e.row, e.col))
        .collect();
    let report = json!({
        "config": cfg.json(),
        "passed": passed,
        "oracle_equivalence": oracle,
        "monte_carlo": monte_carlo,
        "failing_entries": failing,
    });
    Ok((serde_json::to_string_pretty(&report)? + "\n", passed))
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleEquivalence {
    pub points: usize,
    /// Largest relative deviation over entries with a nonzero closed form.
    pub max_relative_deviation: f64,
    /// Largest deviation on structurally zero entries, relative to the matrix scale.
    pub max_zero_entry_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Closed forms against the generic linear solve at `points` random
/// below-threshold parameter sets.
pub fn oracle_equivalence(points: usize, seed: u64, tolerance: f64) -> Result<OracleEquivalence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = BasisTransform::sum_diff();
    let (mut rel, mut zero) = (0.0f64, 0.0f64);
    for _ in 0..points {
        let gamma = rng.random_range(0.2..5.0);
        let radius = rng.random_range(0.0f64..0.98).sqrt();
        let angle = rng.random_range(0.0..std::f64::consts::FRAC_PI_2);
        let params = SystemParams::new(
            gamma,
            radius * angle.cos() / 2f64.sqrt(),
            radius * angle.sin(),
        )?;
        let closed = zero_freq_covariance_closed(&params)?;
        let numeric = basis_change(&zero_freq_covariance_numeric(&build_system(&params))?, &sd)?;
        let scale = closed.max_abs();
        for (c, n) in closed.stacked().iter().zip(numeric.stacked().iter()) {
            if *c == 0.0 {
                zero = zero.max(n.abs() / scale.max(f64::MIN_POSITIVE));
            } else {
                rel = rel.max(((n - c) / c).abs());
            }
        }
    }
    Ok(OracleEquivalence {
        points,
        max_relative_deviation: rel,
        max_zero_entry_deviation: zero,
        tolerance,
        passed: rel <= tolerance && zero <= tolerance,
    })
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Threshold { .. } => EXIT_THRESHOLD,
        _ => EXIT_USAGE,
    }
}

fn emit(out: &Option<PathBuf>, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run(cli: Cli, stdout: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::Couplings(a) => {
            let text = cmd_couplings(&couplings_config(&a)?)?;
            emit(&a.common.out, &text, stdout)?;
        }
        Command::Cluster(a) => {
            let text = cmd_cluster(&cluster_config(&a)?)?;
            emit(&a.common.out, &text, stdout)?;
        }
        Command::VlfSweep(a) => {
            let text = cmd_vlf_sweep(&sweep_config(&a)?)?;
            emit(&a.common.out, &text, stdout)?;
        }
        Command::Verify(a) => {
            let (text, passed) = cmd_verify(&verify_config(&a)?)?;
            emit(&a.common.out, &text, stdout)?;
            if !passed {
                return Ok(EXIT_VERIFICATION);
            }
        }
    }
    Ok(EXIT_OK)
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}
