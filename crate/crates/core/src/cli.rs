//! Command-line front end: scenario runs, the reference cases, one-shot pose
//! estimation from a pairs file and a synthetic pairs generator.
//!
//! Exit codes: 0 success/converged, 1 configuration or input error,
//! 2 not converged, 3 estimator starvation.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error as ThisError;

use crate::controller::TwistLimits;
use crate::error::Error;
use crate::estimator::{estimate_pose, MatchedPair};
use crate::geometry::{transform_point, FeaturePoint3, NormalizedFeature, PlanarTransform};
use crate::sim::{self, case_scenario, case_scenarios, PerceptionMode, RunLog, RunSummary, Scenario};

pub const SEED_ENV: &str = "SERVOPARK_SEED";

pub const TRAJECTORY_HEADER: [&str; 17] = [
    "t", "x", "y", "theta", "z0", "z1", "z2", "v", "omega", "u0", "u1", "u0_branch", "u1_branch",
    "in_gamma", "est_angle_err", "est_trans_err", "visible_count",
];

pub const PAIRS_HEADER: [&str; 5] = ["x_cur", "y_cur", "x_ref", "y_ref", "X_star"];

pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 1;
    pub const NOT_CONVERGED: i32 = 2;
    pub const STARVATION: i32 = 3;
}

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Sim(#[from] Error),
}

impl CliError {
    fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Sim(Error::EstimatorStarvation { .. }) => exit::STARVATION,
            _ => exit::CONFIG,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "servopark", version, about = "Object servoing simulator and planar pose estimator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one scenario and write its trajectory and summary.
    Run(RunArgs),
    /// Simulate the four reference cases under both perception modes.
    Cases(CasesArgs),
    /// Estimate the planar transform from a pairs CSV file.
    Estimate(EstimateArgs),
    /// Write a synthetic, noise-free pairs CSV for a known transform.
    GenPairs(GenPairsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PerceptionArg {
    GroundTruth,
    Estimated,
}

impl From<PerceptionArg> for PerceptionMode {
    fn from(p: PerceptionArg) -> Self {
        match p {
            PerceptionArg::GroundTruth => PerceptionMode::GroundTruth,
            PerceptionArg::Estimated => PerceptionMode::Estimated,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long, value_enum)]
    pub perception: Option<PerceptionArg>,
    /// Pixel noise standard deviation.
    #[arg(long)]
    pub noise_px: Option<f64>,
    /// Noise seed; falls back to SERVOPARK_SEED, then to the scenario.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub v_max: Option<f64>,
    #[arg(long)]
    pub omega_max: Option<f64>,
    /// Drop any twist limits from the scenario.
    #[arg(long, conflicts_with_all = ["v_max", "omega_max"])]
    pub no_limits: bool,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Built-in case name (case1 .. case4).
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    pub case: Option<String>,
    /// Scenario JSON file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Also write `<name>_z0z1.csv`.
    #[arg(long)]
    pub plot: bool,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Args)]
pub struct CasesArgs {
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub plot: bool,
    #[arg(long)]
    pub noise_px: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    pub pairs: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct GenPairsArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub theta: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub tx: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub ty: f64,
    #[arg(long, default_value_t = 8)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Where a run's scenario comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioSource {
    Case(String),
    File(PathBuf),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: ScenarioSource,
    pub out_dir: PathBuf,
    pub overrides: Overrides,
    pub plot: bool,
}

/// Parses `args` (program name first) and executes the command.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::CONFIG } else { exit::OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let env_seed = match std::env::var(SEED_ENV) {
        Ok(s) => match s.trim().parse::<u64>() {
            Ok(v) => Some(v),
            Err(_) => {
                let _ = writeln!(err, "error: {SEED_ENV}={s:?} is not an unsigned integer");
                return exit::CONFIG;
            }
        },
        Err(_) => None,
    };
    let result = match cli.command {
        Command::Run(a) => {
            let cfg = RunConfig {
                source: match (a.case, a.config) {
                    (Some(c), _) => ScenarioSource::Case(c),
                    (None, Some(p)) => ScenarioSource::File(p),
                    (None, None) => unreachable!("clap requires one source"),
                },
                out_dir: a.out,
                overrides: a.overrides,
                plot: a.plot,
            };
            cmd_run(&cfg, env_seed, out)
        }
        Command::Cases(a) => cmd_cases(&a, env_seed, out),
        Command::Estimate(a) => cmd_estimate(&a.pairs, out),
        Command::GenPairs(a) => cmd_gen_pairs(&a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn load_scenario(source: &ScenarioSource) -> Result<Scenario, CliError> {
    match source {
        ScenarioSource::Case(name) => case_scenario(name).ok_or_else(|| {
            CliError::Config(format!("unknown case {name:?}; expected case1, case2, case3 or case4"))
        }),
        ScenarioSource::File(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let mut s: Scenario = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            if s.name.is_empty() {
                s.name = "scenario".into();
            }
            Ok(s)
        }
    }
}

pub fn apply_overrides(s: &mut Scenario, o: &Overrides, env_seed: Option<u64>) {
    if let Some(dt) = o.dt {
        s.dt = dt;
    }
    if let Some(t) = o.t_max {
        s.t_max = t;
    }
    if let Some(p) = o.perception {
        s.perception_mode = p.into();
    }
    if let Some(n) = o.noise_px {
        s.pixel_noise_sigma = n;
    }
    if let Some(seed) = o.seed.or(env_seed) {
        s.rng_seed = seed;
    }
    if o.no_limits {
        s.limits = None;
    } else if o.v_max.is_some() || o.omega_max.is_some() {
        let base = s.limits.unwrap_or(TwistLimits {
            v_max: f64::INFINITY,
            omega_max: f64::INFINITY,
        });
        s.limits = Some(TwistLimits {
            v_max: o.v_max.unwrap_or(base.v_max),
            omega_max: o.omega_max.unwrap_or(base.omega_max),
        });
    }
}

fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_trajectory_csv<W: Write>(w: W, log: &RunLog) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(TRAJECTORY_HEADER)?;
    for s in &log.samples {
        let nums = [
            s.t, s.pose.x, s.pose.y, s.pose.theta, s.z.z0, s.z.z1, s.z.z2, s.twist.v,
            s.twist.omega, s.u.u0, s.u.u1,
        ];
        let mut rec: Vec<String> = nums.iter().map(|x| fmt_num(*x)).collect();
        rec.push(s.u0_branch.map_or("held", |b| b.as_str()).to_string());
        rec.push(s.u1_branch.map_or("held", |b| b.as_str()).to_string());
        rec.push(s.in_gamma.to_string());
        rec.push(fmt_num(s.est_angle_err));
        rec.push(fmt_num(s.est_trans_err));
        rec.push(s.visible_count.to_string());
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_z0z1_csv<W: Write>(w: W, log: &RunLog) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["t", "z0z1"])?;
    for s in &log.samples {
        wr.write_record([fmt_num(s.t), fmt_num(s.z.heading_lateral_sum())])?;
    }
    wr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryFile {
    pub name: String,
    pub perception_mode: PerceptionMode,
    #[serde(flatten)]
    pub summary: RunSummary,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| CliError::Config(format!("csv: {e}")))?;
    Ok(buf)
}

/// Writes `<name>_traj.csv`, `<name>_summary.json` and, with `plot`,
/// `<name>_z0z1.csv`.
pub fn write_run_outputs(dir: &Path, scenario: &Scenario, log: &RunLog, plot: bool) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let name = &scenario.name;
    let traj = csv_bytes(|b| write_trajectory_csv(b, log))?;
    write_file(&dir.join(format!("{name}_traj.csv")), &traj)?;
    let summary = SummaryFile {
        name: name.clone(),
        perception_mode: scenario.perception_mode,
        summary: log.summary,
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Config(e.to_string()))?;
    write_file(&dir.join(format!("{name}_summary.json")), json.as_bytes())?;
    if plot {
        let z = csv_bytes(|b| write_z0z1_csv(b, log))?;
        write_file(&dir.join(format!("{name}_z0z1.csv")), &z)?;
    }
    Ok(())
}

pub fn cmd_run(cfg: &RunConfig, env_seed: Option<u64>, out: &mut dyn Write) -> Result<i32, CliError> {
    let mut scenario = load_scenario(&cfg.source)?;
    apply_overrides(&mut scenario, &cfg.overrides, env_seed);
    scenario.validate()?;
    let log = sim::run(&scenario)?;
    write_run_outputs(&cfg.out_dir, &scenario, &log, cfg.plot)?;
    let s = &log.summary;
    let _ = writeln!(
        out,
        "{}: {} after {} samples, final position error {:.3e} m, heading error {:.3e} rad",
        scenario.name,
        if s.converged { "converged" } else { "not converged" },
        s.samples,
        s.final_pos_err,
        s.final_ang_err
    );
    Ok(if s.converged { exit::OK } else { exit::NOT_CONVERGED })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseOutcome {
    pub name: String,
    pub perception_mode: PerceptionMode,
    /// `converged`, `not_converged`, `starved` or `error`.
    pub status: String,
    pub summary: Option<RunSummary>,
    pub error: Option<String>,
}

/// Runs every reference case under both perception modes in parallel, then
/// writes `cases_summary.json`. Succeeds only if all runs converge.
pub fn cmd_cases(a: &CasesArgs, env_seed: Option<u64>, out: &mut dyn Write) -> Result<i32, CliError> {
    let mut scenarios = Vec::new();
    for base in case_scenarios() {
        for mode in [PerceptionMode::GroundTruth, PerceptionMode::Estimated] {
            let mut s = base.clone();
            s.name = format!("{}_{}", base.name, mode.as_str());
            s.perception_mode = mode;
            if let Some(n) = a.noise_px {
                s.pixel_noise_sigma = n;
            }
            if let Some(seed) = a.seed.or(env_seed) {
                s.rng_seed = seed;
            }
            s.validate()?;
            scenarios.push(s);
        }
    }
    fs::create_dir_all(&a.out).map_err(|e| CliError::io(&a.out, e))?;

    let outcomes: Vec<CaseOutcome> = std::thread::scope(|scope| {
        let handles: Vec<_> = scenarios
            .iter()
            .map(|s| scope.spawn(move || run_case(s, &a.out, a.plot)))
            .collect();
        handles
            .into_iter()
            .zip(&scenarios)
            .map(|(h, s)| {
                h.join().unwrap_or_else(|_| CaseOutcome {
                    name: s.name.clone(),
                    perception_mode: s.perception_mode,
                    status: "error".into(),
                    summary: None,
                    error: Some("worker panicked".into()),
                })
            })
            .collect()
    });

    let json = serde_json::to_string_pretty(&outcomes).map_err(|e| CliError::Config(e.to_string()))?;
    write_file(&a.out.join("cases_summary.json"), json.as_bytes())?;
    for o in &outcomes {
        let _ = writeln!(out, "{}: {}", o.name, o.status);
    }
    Ok(if outcomes.iter().all(|o| o.status == "converged") {
        exit::OK
    } else {
        exit::NOT_CONVERGED
    })
}

fn run_case(s: &Scenario, dir: &Path, plot: bool) -> CaseOutcome {
    let outcome = |status: &str, summary, error| CaseOutcome {
        name: s.name.clone(),
        perception_mode: s.perception_mode,
        status: status.into(),
        summary,
        error,
    };
    match sim::run(s) {
        Ok(log) => {
            if let Err(e) = write_run_outputs(dir, s, &log, plot) {
                return outcome("error", Some(log.summary), Some(e.to_string()));
            }
            let status = if log.summary.converged { "converged" } else { "not_converged" };
            outcome(status, Some(log.summary), None)
        }
        Err(e @ Error::EstimatorStarvation { .. }) => outcome("starved", None, Some(e.to_string())),
        Err(e) => outcome("error", None, Some(e.to_string())),
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct PairRow {
    x_cur: f64,
    y_cur: f64,
    x_ref: f64,
    y_ref: f64,
    #[serde(rename = "X_star")]
    x_star: f64,
}

/// Reads a pairs CSV; diagnostics carry the 1-based line number.
pub fn read_pairs<R: io::Read>(r: R) -> Result<Vec<MatchedPair>, CliError> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let headers = rd
        .headers()
        .map_err(|e| CliError::Config(format!("line 1: {e}")))?
        .clone();
    if headers.iter().ne(PAIRS_HEADER.iter().copied()) {
        return Err(CliError::Config(format!(
            "line 1: expected header {}, found {}",
            PAIRS_HEADER.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut pairs = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        let line = rd.position().line();
        match rd.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                let line = e.position().map_or(line, |p| p.line());
                return Err(CliError::Config(format!("line {line}: {e}")));
            }
        }
        let line = record.position().map_or(line, |p| p.line());
        let row: PairRow = record
            .deserialize(Some(&headers))
            .map_err(|e| CliError::Config(format!("line {line}: {e}")))?;
        let pair = MatchedPair::new(
            NormalizedFeature::new(row.x_cur, row.y_cur),
            NormalizedFeature::new(row.x_ref, row.y_ref),
            row.x_star,
        )
        .map_err(|e| CliError::Config(format!("line {line}: {e}")))?;
        pairs.push(pair);
    }
    Ok(pairs)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EstimateReport {
    pub theta: f64,
    pub t_x: f64,
    pub t_y: f64,
    pub lambda: f64,
    pub rotation_residual: f64,
    pub translation_residual: f64,
    pub pairs: usize,
}

pub fn cmd_estimate(path: &Path, out: &mut dyn Write) -> Result<i32, CliError> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let pairs = read_pairs(io::BufReader::new(file))?;
    let est = estimate_pose(&pairs)?;
    let report = EstimateReport {
        theta: est.transform.phi,
        t_x: est.transform.t_x,
        t_y: est.transform.t_y,
        lambda: est.rotation.lambda,
        rotation_residual: est.rotation.residual,
        translation_residual: est.translation_residual,
        pairs: pairs.len(),
    };
    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Config(e.to_string()))?;
    writeln!(out, "{json}").map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
    Ok(exit::OK)
}

/// Random object points in front of both cameras, projected through
/// `g` (goal to current).
pub fn synthetic_pairs(g: &PlanarTransform, count: usize, seed: u64) -> Vec<MatchedPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let h: f64 = rng.random_range(0.2..1.5);
        let z = if rng.random_bool(0.5) { h } else { -h };
        let p = FeaturePoint3::new(rng.random_range(3.0..8.0), rng.random_range(-2.0..2.0), z);
        let q = transform_point(g, &p);
        if q.x < 0.1 {
            continue;
        }
        if let Ok(m) = MatchedPair::new(NormalizedFeature::new(q.y / q.x, q.z / q.x), p.reference_normalized(), p.x) {
            out.push(m);
        }
    }
    out
}

pub fn write_pairs_csv<W: Write>(w: W, pairs: &[MatchedPair]) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(PAIRS_HEADER)?;
    for p in pairs {
        wr.write_record([p.cur.x, p.cur.y, p.reference.x, p.reference.y, p.x_star].map(fmt_num))?;
    }
    wr.flush()?;
    Ok(())
}

pub fn cmd_gen_pairs(a: &GenPairsArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    if a.count < 2 {
        return Err(CliError::Config(format!("--count must be at least 2, got {}", a.count)));
    }
    if a.count > crate::estimator::MAX_FEATURES {
        return Err(CliError::Config(format!(
            "--count must be at most {}, got {}",
            crate::estimator::MAX_FEATURES,
            a.count
        )));
    }
    let pairs = synthetic_pairs(&PlanarTransform::new(a.theta, a.tx, a.ty), a.count, a.seed);
    let bytes = csv_bytes(|b| write_pairs_csv(b, &pairs))?;
    match &a.out {
        Some(p) => write_file(p, &bytes)?,
        None => out
            .write_all(&bytes)
            .map_err(|e| CliError::io(Path::new("<stdout>"), e))?,
    }
    Ok(exit::OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cli(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_cli(std::iter::once("servopark").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn parse_errors_exit_one() {
        assert_eq!(cli(&["run"]).0, exit::CONFIG);
        assert_eq!(cli(&["bogus"]).0, exit::CONFIG);
        assert_eq!(cli(&["run", "--case", "case1", "--config", "x.json"]).0, exit::CONFIG);
        let (code, out, _) = cli(&["--help"]);
        assert_eq!(code, exit::OK);
        assert!(out.contains("gen-pairs"));
    }

    #[test]
    fn unknown_case_is_config_error() {
        let (code, _, err) = cli(&["run", "--case", "case7", "--out", "/nonexistent-dir-never"]);
        assert_eq!(code, exit::CONFIG);
        assert!(err.contains("unknown case"));
    }

    #[test]
    fn overrides_apply() {
        let mut s = Scenario::default();
        let o = Overrides {
            dt: Some(0.02),
            t_max: Some(50.0),
            perception: Some(PerceptionArg::Estimated),
            noise_px: Some(0.5),
            seed: None,
            v_max: Some(0.7),
            omega_max: None,
            no_limits: false,
        };
        apply_overrides(&mut s, &o, Some(11));
        assert_eq!((s.dt, s.t_max, s.pixel_noise_sigma, s.rng_seed), (0.02, 50.0, 0.5, 11));
        assert_eq!(s.perception_mode, PerceptionMode::Estimated);
        assert_eq!(s.limits.unwrap().v_max, 0.7);
        assert!(s.limits.unwrap().omega_max.is_infinite());
        let o = Overrides { seed: Some(4), no_limits: true, ..Overrides::default() };
        apply_overrides(&mut s, &o, Some(11));
        assert_eq!(s.rng_seed, 4);
        assert!(s.limits.is_none());
    }

    #[test]
    fn pairs_round_trip_exactly() {
        let pairs = synthetic_pairs(&PlanarTransform::new(0.2, -0.4, 1.1), 7, 3);
        let mut buf = Vec::new();
        write_pairs_csv(&mut buf, &pairs).unwrap();
        assert_eq!(read_pairs(buf.as_slice()).unwrap(), pairs);
    }

    #[test]
    fn malformed_pairs_report_line() {
        let bad_num = "x_cur,y_cur,x_ref,y_ref,X_star\n0.1,0.2,0.1,0.2,3\n0.1,abc,0.1,0.2,3\n";
        let e = read_pairs(bad_num.as_bytes()).unwrap_err().to_string();
        assert!(e.starts_with("line 3:"), "{e}");
        let bad_header = "x,y_cur,x_ref,y_ref,X_star\n";
        assert!(read_pairs(bad_header.as_bytes()).unwrap_err().to_string().starts_with("line 1:"));
        let short = "x_cur,y_cur,x_ref,y_ref,X_star\n0.1,0.2,0.1\n";
        assert!(read_pairs(short.as_bytes()).unwrap_err().to_string().starts_with("line 2:"));
        let degenerate = "x_cur,y_cur,x_ref,y_ref,X_star\n0.1,0.2,0.1,0.2,3\n0.1,0.0,0.1,0.2,3\n";
        assert!(read_pairs(degenerate.as_bytes()).unwrap_err().to_string().starts_with("line 3:"));
    }

    #[test]
    fn trajectory_csv_layout() {
        let s = Scenario { t_max: 0.05, ..case_scenario("case1").unwrap() };
        let log = sim::run(&s).unwrap();
        let buf = csv_bytes(|b| write_trajectory_csv(b, &log)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), TRAJECTORY_HEADER.join(","));
        let first: Vec<_> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), 17);
        assert_eq!(first[0], "0.0000000000000000e0");
        assert_eq!(first[11], "RatioLaw");
        assert_eq!(text.lines().count(), 1 + log.samples.len());
    }
}
