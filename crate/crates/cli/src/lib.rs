//! Experiment harness: presets, config parsing, parallel runs and CSV output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt::{self, Write as _};
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;
use vi_core::control::{example41_with, example42_with, ControlProblem};
use vi_core::{
    build_vi_problem, example1_problem, example3_problem, generate_example2, solve,
    write_trajectory_csv, AlgorithmKind, Contraction, Example3Start, IterationTrace, Point,
    Problem, Schedule, SeededRng, SolverConfig, TraceRecord,
};

pub const TRACE_HEADER: [&str; 8] = [
    "n",
    "D_n",
    "E_n",
    "gamma_n",
    "delta_n",
    "error",
    "op_evals",
    "elapsed_ns",
];

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Solver(#[from] vi_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
}

impl HarnessError {
    /// Errors caused by bad input rather than a failed run.
    pub fn is_usage(&self) -> bool {
        matches!(self, Self::Parse { .. } | Self::Usage(_))
    }

    fn io(path: &Path, source: io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn csv(path: &Path, source: csv::Error) -> Self {
        Self::Csv {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Example1,
    Example2,
    Example3,
    Control41,
    Control42,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Self::Example1,
        Self::Example2,
        Self::Example3,
        Self::Control41,
        Self::Control42,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Example1 => "example1",
            Self::Example2 => "example2",
            Self::Example3 => "example3",
            Self::Control41 => "control41",
            Self::Control42 => "control42",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Self::Example1 => "A(x) = argmin-based pseudomonotone map on R^m, box [-5,5]^m",
            Self::Example2 => "random affine operator on R^m, box [-2,5]^m",
            Self::Example3 => "A(x) = (1.5 - ||x||) x on L2[0,1], unit ball",
            Self::Control41 => "harmonic oscillator, minimize x2(3 pi), |u| <= 1",
            Self::Control42 => "double integrator, minimize -x1(2) + x2(2)^2, |u| <= 1",
        }
    }

    pub fn is_control(self) -> bool {
        matches!(self, Self::Control41 | Self::Control42)
    }

    pub fn default_config(self) -> SolverConfig {
        let base = SolverConfig {
            timing: false,
            ..SolverConfig::benchmark_defaults()
        };
        match self {
            Self::Example1 | Self::Example3 => SolverConfig {
                max_iters: 50,
                ..base
            },
            Self::Example2 => SolverConfig {
                max_iters: 1000,
                ..base
            },
            Self::Control41 | Self::Control42 => SolverConfig {
                timing: false,
                ..SolverConfig::optimal_control()
            },
        }
    }

    pub fn default_algorithms(self) -> Vec<AlgorithmKind> {
        if self.is_control() {
            vec![AlgorithmKind::TsengInertial]
        } else {
            vec![
                AlgorithmKind::TsengInertial,
                AlgorithmKind::ViscosityInertialSegm,
                AlgorithmKind::MannTseng,
            ]
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|p| p.name()).collect();
                HarnessError::Usage(format!(
                    "unknown preset '{s}' (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub preset: Preset,
    /// Dimension for Examples 1 and 2.
    pub m: usize,
    pub seed: u64,
    pub algorithms: Vec<AlgorithmKind>,
    pub config: SolverConfig,
    pub out_dir: PathBuf,
    /// Grid intervals (Example 3) or control intervals (control presets).
    pub intervals: usize,
    /// Starting function for Example 3.
    pub start: Example3Start,
}

impl ExperimentSpec {
    pub fn new(preset: Preset) -> Self {
        Self {
            preset,
            m: if preset == Preset::Example2 { 10 } else { 5 },
            seed: 1,
            algorithms: preset.default_algorithms(),
            config: preset.default_config(),
            out_dir: PathBuf::from("out"),
            intervals: if preset.is_control() { 100 } else { 200 },
            start: Example3Start::Square,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(HarnessError::Usage(
                "at least one algorithm is required".into(),
            ));
        }
        if self.m == 0 || self.intervals == 0 {
            return Err(HarnessError::Usage(
                "m and intervals must be positive".into(),
            ));
        }
        self.config
            .validate()
            .map_err(|e| HarnessError::Usage(e.to_string()))
    }

    /// Apply command-line overrides on top of config-file values.
    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(m) = o.m {
            self.m = m;
        }
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(algos) = &o.algos {
            self.algorithms = parse_algorithms(algos).map_err(HarnessError::Usage)?;
        }
        if let Some(n) = o.max_iters {
            self.config.max_iters = n;
        }
        if let Some(t) = o.stop_tol {
            self.config.stop_tol = t;
        }
        if let Some(dir) = &o.out_dir {
            self.out_dir = dir.clone();
        }
        if o.timing {
            self.config.timing = true;
        }
        self.validate()
    }
}

/// Values given on the command line, which win over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub m: Option<usize>,
    pub seed: Option<u64>,
    pub algos: Option<String>,
    pub max_iters: Option<usize>,
    pub stop_tol: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub timing: bool,
}

pub fn parse_algorithms(list: &str) -> std::result::Result<Vec<AlgorithmKind>, String> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<AlgorithmKind>().map_err(|e| e.to_string()))
        .collect()
}

fn parse_num<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| HarnessError::Parse {
        line,
        message: format!("invalid value '{value}' for {key}"),
    })
}

/// Parse `key = value` lines into a spec.
///
/// Blank lines and `#` comments are ignored. The preset comes from
/// `preset_flag` if given, otherwise from a `preset` line; its defaults are
/// filled in first and the remaining keys override them.
pub fn parse_config(text: &str, preset_flag: Option<Preset>) -> Result<ExperimentSpec> {
    let mut entries = Vec::new();
    let mut file_preset = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| HarnessError::Parse {
            line,
            message: format!("expected key=value, found '{content}'"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key == "preset" {
            let p = value.parse::<Preset>().map_err(|e| HarnessError::Parse {
                line,
                message: e.to_string(),
            })?;
            file_preset = Some(p);
        } else {
            entries.push((line, key.to_string(), value.to_string()));
        }
    }
    let preset = preset_flag
        .or(file_preset)
        .ok_or_else(|| HarnessError::Usage("no preset given".into()))?;

    let mut spec = ExperimentSpec::new(preset);
    for (line, key, value) in entries {
        let range = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(HarnessError::Parse {
                    line,
                    message: format!("{key} = {value} out of range: {what}"),
                })
            }
        };
        let c = &mut spec.config;
        match key.as_str() {
            "m" => {
                spec.m = parse_num(line, &key, &value)?;
                range(spec.m > 0, "must be positive")?;
            }
            "seed" => spec.seed = parse_num(line, &key, &value)?,
            "algos" | "algorithms" => {
                spec.algorithms = parse_algorithms(&value)
                    .map_err(|message| HarnessError::Parse { line, message })?;
                range(!spec.algorithms.is_empty(), "need at least one algorithm")?;
            }
            "out_dir" => spec.out_dir = PathBuf::from(&value),
            "intervals" => {
                spec.intervals = parse_num(line, &key, &value)?;
                range(spec.intervals > 0, "must be positive")?;
            }
            "start" => {
                spec.start = Example3Start::parse(&value).ok_or_else(|| HarnessError::Parse {
                    line,
                    message: format!("unknown start '{value}' (expected t2, cos, sin2t or exp2)"),
                })?;
            }
            "max_iters" => c.max_iters = parse_num(line, &key, &value)?,
            "stop_tol" => {
                c.stop_tol = parse_num(line, &key, &value)?;
                range(c.stop_tol >= 0.0, "must be nonnegative")?;
            }
            "phi" => {
                c.phi = parse_num(line, &key, &value)?;
                range(c.phi > 0.0 && c.phi < 1.0, "phi must lie in (0, 1)")?;
            }
            "gamma1" => {
                c.gamma1 = parse_num(line, &key, &value)?;
                range(c.gamma1 > 0.0 && c.gamma1.is_finite(), "must be positive")?;
            }
            "delta" => {
                c.delta = parse_num(line, &key, &value)?;
                range(c.delta >= 0.0 && c.delta.is_finite(), "must be nonnegative")?;
            }
            "eps_scale" | "eps_power" | "visc_scale" | "visc_power" => {
                let v: f64 = parse_num(line, &key, &value)?;
                range(v.is_finite() && v >= 0.0, "must be nonnegative")?;
                let (sched, is_scale) = match key.as_str() {
                    "eps_scale" => (&mut c.eps_schedule, true),
                    "eps_power" => (&mut c.eps_schedule, false),
                    "visc_scale" => (&mut c.viscosity, true),
                    _ => (&mut c.viscosity, false),
                };
                *sched = if is_scale {
                    Schedule::new(v, sched.power)
                } else {
                    Schedule::new(sched.scale, v)
                };
            }
            "contraction" => {
                let v: f64 = parse_num(line, &key, &value)?;
                c.contraction = Contraction::scaling(v).map_err(|e| HarnessError::Parse {
                    line,
                    message: e.to_string(),
                })?;
            }
            "fixed_step" => {
                let v: f64 = parse_num(line, &key, &value)?;
                range(v > 0.0 && v.is_finite(), "must be positive")?;
                c.fixed_step = Some(v);
            }
            "armijo_alpha" => c.armijo.alpha = parse_num(line, &key, &value)?,
            "armijo_ell" => c.armijo.ell = parse_num(line, &key, &value)?,
            "armijo_phi" => c.armijo.phi = parse_num(line, &key, &value)?,
            "timing" => c.timing = parse_num(line, &key, &value)?,
            _ => {
                return Err(HarnessError::Parse {
                    line,
                    message: format!("unknown key '{key}'"),
                });
            }
        }
    }
    spec.validate()?;
    Ok(spec)
}

/// Per-algorithm result line.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub algorithm: AlgorithmKind,
    /// Stop reason, or the error message if the run failed.
    pub status: String,
    pub iterations: usize,
    pub op_evals: u64,
    pub final_error: Option<f64>,
    pub final_residual: Option<f64>,
    pub elapsed: Duration,
    pub solution: Option<Point>,
}

#[derive(Debug, Clone)]
pub struct ExperimentSummary {
    pub preset: Preset,
    /// Shared starting point `x0 = x1` handed to every algorithm.
    pub initial: Point,
    pub runs: Vec<RunSummary>,
}

impl ExperimentSummary {
    pub fn run(&self, kind: AlgorithmKind) -> Option<&RunSummary> {
        self.runs.iter().find(|r| r.algorithm == kind)
    }
}

enum Built {
    Plain(Problem),
    Control(Box<ControlProblem>, Problem),
}

impl Built {
    fn problem(&self) -> &Problem {
        match self {
            Self::Plain(p) | Self::Control(_, p) => p,
        }
    }
}

fn build(spec: &ExperimentSpec) -> Result<Built> {
    Ok(match spec.preset {
        Preset::Example1 => Built::Plain(example1_problem(spec.m)?),
        Preset::Example2 => Built::Plain(generate_example2(spec.m, spec.seed)?),
        Preset::Example3 => Built::Plain(example3_problem(spec.intervals)?),
        Preset::Control41 | Preset::Control42 => {
            let cp = if spec.preset == Preset::Control41 {
                example41_with(spec.intervals)?
            } else {
                example42_with(spec.intervals)?
            };
            let p = build_vi_problem(&cp)?;
            Built::Control(Box::new(cp), p)
        }
    })
}

fn initial_point(spec: &ExperimentSpec, problem: &Problem) -> Point {
    let dim = problem.space().dim();
    let mut rng = SeededRng::with_stream(spec.seed, 1);
    match spec.preset {
        Preset::Example1 | Preset::Example2 => Point::new(rng.uniform_vec(dim, 0.0, 1.0)),
        Preset::Example3 => {
            let start = spec.start;
            problem.space().point_from_fn(|t| start.eval(t))
        }
        Preset::Control41 | Preset::Control42 => Point::new(rng.uniform_vec(dim, -1.0, 1.0)),
    }
}

/// Run every algorithm of `spec` from one shared starting point.
///
/// Each algorithm gets its own copy of the problem (fresh counters) and
/// its own thread. Writes `trace_<algo>.csv` per algorithm,
/// `trajectory_<algo>.csv` for control presets (from the projected final
/// control), `initial_point.csv` and
/// `summary.csv`. A failed or diverged run is recorded and does not stop
/// the others.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentSummary> {
    spec.validate()?;
    let built = build(spec)?;
    let problem = built.problem();
    let x0 = initial_point(spec, problem);
    std::fs::create_dir_all(&spec.out_dir).map_err(|e| HarnessError::io(&spec.out_dir, e))?;

    let outcomes: Vec<_> = thread::scope(|scope| {
        let handles: Vec<_> = spec
            .algorithms
            .iter()
            .map(|&kind| {
                let local = problem.fork();
                let x0 = &x0;
                scope.spawn(move || {
                    let started = Instant::now();
                    let out = solve(&local, &spec.config, kind, x0, x0);
                    (kind, out, started.elapsed(), local)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("solver thread panicked"))
            .collect()
    });

    write_point_csv(&spec.out_dir.join("initial_point.csv"), &x0)?;
    let mut runs = Vec::new();
    for (kind, out, elapsed, local) in outcomes {
        match out {
            Ok(o) => {
                write_trace_csv(
                    &o.trace,
                    spec.out_dir.join(format!("trace_{}.csv", kind.name())),
                )?;
                if let Built::Control(cp, _) = &built {
                    // The last iterate can sit just outside the box; export its projection.
                    let u = local.set().project(&o.solution)?;
                    let traj = cp.trajectory(u.as_slice())?;
                    let path = spec.out_dir.join(format!("trajectory_{}.csv", kind.name()));
                    write_trajectory_csv(&path, cp, &traj)
                        .map_err(|e| HarnessError::io(&path, e))?;
                }
                runs.push(RunSummary {
                    algorithm: kind,
                    status: o.stop.to_string(),
                    iterations: o.iterations,
                    op_evals: o.op_evals,
                    final_error: local.error(&o.solution),
                    final_residual: o.last_residual,
                    elapsed,
                    solution: Some(o.solution),
                });
            }
            Err(e) => runs.push(RunSummary {
                algorithm: kind,
                status: format!("failed: {e}"),
                iterations: 0,
                op_evals: local.eval_count(),
                final_error: None,
                final_residual: None,
                elapsed,
                solution: None,
            }),
        }
    }
    let summary = ExperimentSummary {
        preset: spec.preset,
        initial: x0,
        runs,
    };
    write_summary_csv(&summary, spec.out_dir.join("summary.csv"))?;
    Ok(summary)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6e}")).unwrap_or_else(|| "-".into())
}

/// Fixed-width summary table.
pub fn format_summary(summary: &ExperimentSummary) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<16} {:>14} {:>14} {:>8} {:>9} {:>12}  status",
        "algorithm", "final_error", "final_E_n", "iters", "op_evals", "elapsed_ms"
    );
    for r in &summary.runs {
        let _ = writeln!(
            s,
            "{:<16} {:>14} {:>14} {:>8} {:>9} {:>12.3}  {}",
            r.algorithm.name(),
            opt(r.final_error),
            opt(r.final_residual),
            r.iterations,
            r.op_evals,
            r.elapsed.as_secs_f64() * 1e3,
            r.status
        );
    }
    s
}

fn f17(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_summary_csv(summary: &ExperimentSummary, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::csv(path, e))?;
    let mut rows = vec![vec![
        "algorithm".to_string(),
        "status".into(),
        "iterations".into(),
        "op_evals".into(),
        "final_error".into(),
        "final_E_n".into(),
        "elapsed_ns".into(),
    ]];
    for r in &summary.runs {
        rows.push(vec![
            r.algorithm.name().to_string(),
            r.status.clone(),
            r.iterations.to_string(),
            r.op_evals.to_string(),
            r.final_error.map(f17).unwrap_or_default(),
            r.final_residual.map(f17).unwrap_or_default(),
            r.elapsed.as_nanos().to_string(),
        ]);
    }
    for row in rows {
        w.write_record(&row)
            .map_err(|e| HarnessError::csv(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

fn write_point_csv(path: &Path, x: &Point) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::csv(path, e))?;
    w.write_record(["index", "value"])
        .map_err(|e| HarnessError::csv(path, e))?;
    for (i, v) in x.iter().enumerate() {
        w.write_record([i.to_string(), f17(*v)])
            .map_err(|e| HarnessError::csv(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Write a trace with 17 significant digits per float, so that
/// [`read_trace_csv`] recovers every value exactly. A missing error is an
/// empty field.
pub fn write_trace_csv(trace: &IterationTrace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::csv(path, e))?;
    w.write_record(TRACE_HEADER)
        .map_err(|e| HarnessError::csv(path, e))?;
    for r in &trace.records {
        w.write_record([
            r.n.to_string(),
            f17(r.d_n),
            f17(r.e_n),
            f17(r.gamma),
            f17(r.delta),
            r.error.map(f17).unwrap_or_default(),
            r.op_evals.to_string(),
            r.elapsed_ns.to_string(),
        ])
        .map_err(|e| HarnessError::csv(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn read_trace_csv(path: impl AsRef<Path>) -> Result<IterationTrace> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| HarnessError::csv(path, e))?;
    let header = r.headers().map_err(|e| HarnessError::csv(path, e))?;
    if header.iter().ne(TRACE_HEADER) {
        return Err(HarnessError::Parse {
            line: 1,
            message: format!("unexpected trace header in {}", path.display()),
        });
    }
    let mut records = Vec::new();
    for (i, row) in r.records().enumerate() {
        let row = row.map_err(|e| HarnessError::csv(path, e))?;
        let line = i + 2;
        let f = |k: usize| parse_num::<f64>(line, TRACE_HEADER[k], &row[k]);
        records.push(TraceRecord {
            n: parse_num(line, "n", &row[0])?,
            d_n: f(1)?,
            e_n: f(2)?,
            gamma: f(3)?,
            delta: f(4)?,
            error: if row[5].is_empty() { None } else { Some(f(5)?) },
            op_evals: parse_num(line, "op_evals", &row[6])?,
            elapsed_ns: parse_num(line, "elapsed_ns", &row[7])?,
        });
    }
    Ok(IterationTrace { records })
}
