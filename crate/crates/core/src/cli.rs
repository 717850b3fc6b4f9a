//! `magloop` command line: argument parsing, config resolution, command
//! dispatch and report files.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::dynamics::{shoot_periodic_with, FlowParams, FlowState, ShootOptions};
use crate::error::{Error, Result};
use crate::functionals::{length_bound, length_bound_literal, FunctionalParams, CRITICAL_TOLERANCE, MAX_SWEEPS};
use crate::geometry::{curvature_margin, MagneticSystem, MarginGrid, PointGeometry, SystemDefinition};
use crate::loopspace::DiscreteLoop;
use crate::report::{self, canonical_json, critical_point_json, num, nums};
use crate::solvers::{
    continuation_with, descend_with, negativity_witness, sweepout_minimax_with, ContinuationOptions, DescentMode,
    DescentOptions, DescentStatus, Schedule, SweepoutFamily, SweepoutOptions, Witness, WitnessSearch,
};
use crate::suites::{run_all, SuiteSizes};
use crate::systems::{builtin_system, flat_larmor, flat_torus, hyperbolic_patch, sphere_cap};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NONCONVERGENCE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "magloop", version, about = "Closed magnetic geodesics by loop-space variational methods")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// Built-in system name, optionally with a parameter (`flat_torus:0.5`).
    #[arg(long)]
    system: Option<String>,
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    eps0: Option<f64>,
    #[arg(long)]
    tau0: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    floor: Option<f64>,
    /// Samples per loop.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Iteration or round budget of the command.
    #[arg(long)]
    budget: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Curvature margin and tensor spot checks.
    Audit(Common),
    /// Descend from a starting loop.
    Descend {
        #[command(flatten)]
        common: Common,
        /// Converge to the nearest critical point instead of minimizing.
        #[arg(long)]
        critical: bool,
        /// Loop CSV to start from; defaults to a coordinate circle.
        #[arg(long)]
        start: Option<PathBuf>,
    },
    /// Shoot for a period-one orbit of the Euler–Lagrange flow.
    Shoot {
        #[command(flatten)]
        common: Common,
        /// Comma-separated initial point.
        #[arg(long)]
        x0: Option<String>,
        /// Comma-separated initial velocity.
        #[arg(long)]
        v0: Option<String>,
        /// RK4 steps per period.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// One-parameter min-max over a family of loops.
    Sweepout(Common),
    /// Witness, sweepout, continuation to the limit, limit-equation check.
    Continue(Common),
    /// Randomized invariant suites.
    Check(Common),
    /// SVG of a loop or trajectory CSV.
    Plot {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
enum SystemSpec {
    Name(String),
    Inline(SystemDefinition),
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    system: Option<SystemSpec>,
    epsilon: Option<f64>,
    tau: Option<f64>,
    epsilon0: Option<f64>,
    tau0: Option<f64>,
    ratio: Option<f64>,
    floor: Option<f64>,
    samples: Option<usize>,
    rng_seed: Option<u64>,
    budget: Option<usize>,
    tolerance: Option<f64>,
    steps: Option<usize>,
    x0: Option<Vec<f64>>,
    v0: Option<Vec<f64>>,
    out: Option<PathBuf>,
}

/// Fully resolved parameters of one invocation.
#[derive(Clone, Debug)]
struct RunConfig {
    command: String,
    system: SystemSpec,
    epsilon: f64,
    tau: f64,
    epsilon0: f64,
    tau0: f64,
    ratio: f64,
    floor: f64,
    samples: usize,
    rng_seed: u64,
    budget: Option<usize>,
    tolerance: f64,
    steps: usize,
    x0: Option<Vec<f64>>,
    v0: Option<Vec<f64>>,
    critical: bool,
    out: PathBuf,
}

impl RunConfig {
    fn resolve(command: &str, c: &Common) -> Result<Self> {
        let file: FileConfig = match &c.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            }
            None => FileConfig::default(),
        };
        let system = match (&c.system, file.system) {
            (Some(name), _) => SystemSpec::Name(name.clone()),
            (None, Some(s)) => s,
            (None, None) => return Err(Error::Config("no system given (use --system or a config file)".into())),
        };
        let cfg = Self {
            command: command.to_string(),
            system,
            epsilon: c.eps.or(file.epsilon).unwrap_or(0.4),
            tau: c.tau.or(file.tau).unwrap_or(0.4),
            epsilon0: c.eps0.or(file.epsilon0).unwrap_or(0.4),
            tau0: c.tau0.or(file.tau0).unwrap_or(0.4),
            ratio: c.rho.or(file.ratio).unwrap_or(0.5),
            floor: c.floor.or(file.floor).unwrap_or(1e-3),
            samples: c.samples.or(file.samples).unwrap_or(128),
            rng_seed: c.seed.or(file.rng_seed).unwrap_or(0),
            budget: c.budget.or(file.budget),
            tolerance: file.tolerance.unwrap_or(1e-6),
            steps: file.steps.unwrap_or(4096),
            x0: file.x0,
            v0: file.v0,
            critical: false,
            out: c.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from(".")),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.samples < crate::loopspace::MIN_SAMPLES {
            return Err(Error::Config(format!("samples must be at least {}", crate::loopspace::MIN_SAMPLES)));
        }
        for (name, v) in [("tolerance", self.tolerance), ("ratio", self.ratio), ("floor", self.floor)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.budget == Some(0) {
            return Err(Error::Config("budget must be positive".into()));
        }
        Ok(())
    }

    fn to_json(&self) -> Value {
        let system = match &self.system {
            SystemSpec::Name(n) => json!(n),
            SystemSpec::Inline(def) => serde_json::to_value(def).unwrap_or(Value::Null),
        };
        json!({
            "command": self.command,
            "system": system,
            "epsilon": num(self.epsilon),
            "tau": num(self.tau),
            "epsilon0": num(self.epsilon0),
            "tau0": num(self.tau0),
            "ratio": num(self.ratio),
            "floor": num(self.floor),
            "samples": self.samples,
            "rng_seed": self.rng_seed,
            "budget": self.budget,
            "tolerance": num(self.tolerance),
            "steps": self.steps,
            "x0": self.x0.as_deref().map(nums),
            "v0": self.v0.as_deref().map(nums),
            "critical": self.critical,
        })
    }

    fn params(&self) -> Result<FunctionalParams<f64>> {
        FunctionalParams::new(self.epsilon, self.tau)
    }

    fn system(&self) -> Result<Arc<MagneticSystem<f64>>> {
        let sys = match &self.system {
            SystemSpec::Name(spec) => named_system(spec)?,
            SystemSpec::Inline(def) => MagneticSystem::from_definition(def)?,
        };
        Ok(Arc::new(sys))
    }
}

fn named_system(spec: &str) -> Result<MagneticSystem<f64>> {
    let Some((name, arg)) = spec.split_once(':') else {
        return builtin_system(spec);
    };
    let v: f64 = arg
        .parse()
        .map_err(|_| Error::Config(format!("bad system parameter '{arg}' in '{spec}'")))?;
    match name {
        "flat_torus" => flat_torus(v),
        "flat_larmor" => flat_larmor(v),
        "sphere_cap" => sphere_cap(v),
        "hyperbolic_patch" => hyperbolic_patch(v),
        other => Err(Error::UnknownSystem(other.to_string())),
    }
}

fn tolerances(cfg: &RunConfig) -> Value {
    json!({
        "descent_grad_norm": num(cfg.tolerance),
        "critical_check": num(CRITICAL_TOLERANCE),
        "shooting_residual": num(ShootOptions::default().tolerance),
        "collapse_length": num(DescentOptions::default().collapse_length),
        "spectrum_relative": num(1e-7),
        "spectrum_max_sweeps": MAX_SWEEPS,
        "limit_residual": num(10.0 * cfg.tolerance),
        "armijo": num(DescentOptions::default().armijo),
    })
}

/// Maps an error to the process exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::Io(_)
        | Error::UnknownSystem(_)
        | Error::InvalidSystem(_)
        | Error::InvalidParameter(_)
        | Error::Expr(_)
        | Error::TooFewSamples(_)
        | Error::GridTooCoarse(_)
        | Error::FactorMismatch
        | Error::WrapAmbiguity { .. }
        | Error::InvalidFamily(_) => EXIT_CONFIG,
        Error::EnergyBound { .. } => EXIT_INVARIANT,
        _ => EXIT_NONCONVERGENCE,
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("MAGLOOP_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// exit code.
pub fn run_command<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    configure_threads();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

struct Output {
    body: Value,
    files: Vec<(String, String)>,
    code: i32,
}

fn execute(cmd: Command) -> Result<i32> {
    let (name, cfg, out) = match cmd {
        Command::Audit(c) => {
            let cfg = RunConfig::resolve("audit", &c)?;
            let o = audit(&cfg)?;
            ("audit", cfg, o)
        }
        Command::Descend { common, critical, start } => {
            let mut cfg = RunConfig::resolve("descend", &common)?;
            cfg.critical = critical;
            let o = descend_cmd(&cfg, start.as_deref())?;
            ("descend", cfg, o)
        }
        Command::Shoot { common, x0, v0, steps } => {
            let mut cfg = RunConfig::resolve("shoot", &common)?;
            if let Some(s) = x0 {
                cfg.x0 = Some(parse_list(&s)?);
            }
            if let Some(s) = v0 {
                cfg.v0 = Some(parse_list(&s)?);
            }
            if let Some(s) = steps {
                cfg.steps = s;
            }
            let o = shoot_cmd(&cfg)?;
            ("shoot", cfg, o)
        }
        Command::Sweepout(c) => {
            let cfg = RunConfig::resolve("sweepout", &c)?;
            let o = sweepout_cmd(&cfg)?;
            ("sweepout", cfg, o)
        }
        Command::Continue(c) => {
            let cfg = RunConfig::resolve("continue", &c)?;
            let o = continue_cmd(&cfg)?;
            ("continue", cfg, o)
        }
        Command::Check(c) => {
            let cfg = RunConfig::resolve("check", &c)?;
            let o = check_cmd(&cfg)?;
            ("check", cfg, o)
        }
        Command::Plot { common, input } => {
            let out = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
            let text = std::fs::read_to_string(&input).map_err(|e| Error::Io(format!("{}: {e}", input.display())))?;
            let pts = report::read_plane_points(&text)?;
            let closed = !text.lines().next().unwrap_or("").split(',').any(|h| h.trim() == "v1");
            let title = input.file_name().and_then(|n| n.to_str()).unwrap_or("plot");
            let svg = report::svg_polyline(&pts, closed, title);
            let path = out.join("plot.svg");
            report::write_atomic(&path, svg.as_bytes())?;
            println!("{}", path.display());
            return Ok(EXIT_OK);
        }
    };
    let config = cfg.to_json();
    let doc = report::envelope(name, &config, &tolerances(&cfg), out.body);
    let text = canonical_json(&doc);
    report::write_atomic(&cfg.out.join(format!("{name}.json")), text.as_bytes())?;
    for (file, contents) in &out.files {
        report::write_atomic(&cfg.out.join(file), contents.as_bytes())?;
    }
    print!("{text}");
    Ok(out.code)
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad number '{t}' in '{s}'"))))
        .collect()
}

fn audit(cfg: &RunConfig) -> Result<Output> {
    let sys = cfg.system()?;
    let n = sys.dim();
    let grid = MarginGrid::default_for(n);
    let rep = curvature_margin(&sys, &grid)?;
    let mut worst_symmetry: f64 = 0.0;
    let mut worst_bianchi: f64 = 0.0;
    let mut worst_closed: f64 = 0.0;
    let mut points = 0;
    for x in sys.probe_points(4) {
        let Ok(p) = PointGeometry::new(&sys, &x) else { continue };
        points += 1;
        let scale = p.riemann.iter().fold(1.0f64, |a, &b| a.max(b.abs()));
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    worst_symmetry = worst_symmetry.max((p.gamma(i, j, k) - p.gamma(i, k, j)).abs());
                    for l in 0..n {
                        let b = p.riemann_component(i, j, k, l) + p.riemann_component(i, k, l, j) + p.riemann_component(i, l, j, k);
                        worst_bianchi = worst_bianchi.max(b.abs() / scale);
                    }
                    let nf = |a: usize, b: usize, c: usize| p.nabla_field[(a * n + b) * n + c];
                    worst_closed = worst_closed.max((nf(k, i, j) + nf(i, j, k) + nf(j, k, i)).abs());
                }
            }
        }
    }
    let spot_ok = points > 0 && worst_symmetry < 1e-9 && worst_bianchi < 1e-8 && worst_closed < 1e-8;
    let body = json!({
        "system": sys.name(),
        "dim": n,
        "margin": num(rep.margin),
        "argmin_point": nums(&rep.argmin_point),
        "argmin_direction": nums(&rep.argmin_direction),
        "samples_evaluated": rep.samples_evaluated,
        "refined": rep.refined,
        "grid": {"points_per_axis": grid.points_per_axis, "directions": grid.directions},
        "spot_checks": {
            "points": points,
            "christoffel_symmetry": num(worst_symmetry),
            "first_bianchi": num(worst_bianchi),
            "field_closed": num(worst_closed),
            "passed": spot_ok,
        },
    });
    Ok(Output {
        body,
        files: vec![],
        code: if spot_ok { EXIT_OK } else { EXIT_INVARIANT },
    })
}

/// The winding coordinate loop through the box centre when there is a
/// periodic and a non-periodic axis, otherwise a coordinate circle in the
/// `(x1, x2)` plane.
fn default_start(sys: &Arc<MagneticSystem<f64>>, samples: usize) -> Result<DiscreteLoop<f64>> {
    let periodic = sys.periods().iter().position(|q| q.is_some());
    let open = sys.periods().iter().position(|q| q.is_none());
    if let (Some(j), Some(_)) = (periodic, open) {
        let period = sys.periods()[j].expect("periodic axis");
        let center: Vec<f64> = sys.domain_box().iter().map(|&(a, b)| 0.5 * (a + b)).collect();
        return DiscreteLoop::from_fn(sys.clone(), samples, |t| {
            let mut x = center.clone();
            x[j] = period * t;
            x
        });
    }
    if sys.dim() < 2 {
        return Err(Error::Config("default start needs at least two coordinates".into()));
    }
    let center: Vec<f64> = sys.domain_box().iter().map(|&(a, b)| 0.5 * (a + b)).collect();
    let half = sys.domain_box()[..2].iter().map(|&(a, b)| 0.5 * (b - a)).fold(f64::INFINITY, f64::min);
    crate::solvers::coordinate_circle(sys, &center, (0, 1), 0.25 * half, true, samples)
}

fn read_loop_csv(sys: &Arc<MagneticSystem<f64>>, path: &Path) -> Result<DiscreteLoop<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines.next().ok_or_else(|| Error::Config("empty loop CSV".into()))?.split(',').collect();
    let cols = (1..=sys.dim())
        .map(|i| {
            header
                .iter()
                .position(|h| h.trim() == format!("x{i}"))
                .ok_or_else(|| Error::Config(format!("loop CSV has no x{i} column")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut samples = Vec::new();
    for l in lines {
        let f: Vec<&str> = l.split(',').collect();
        for &c in &cols {
            let v = f
                .get(c)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::Config(format!("bad loop CSV row '{l}'")))?;
            samples.push(v);
        }
    }
    DiscreteLoop::new(sys.clone(), samples)
}

fn descend_cmd(cfg: &RunConfig, start: Option<&Path>) -> Result<Output> {
    let sys = cfg.system()?;
    let p = cfg.params()?;
    let lp = match start {
        Some(path) => read_loop_csv(&sys, path)?,
        None => default_start(&sys, cfg.samples)?,
    };
    let mode = if cfg.critical { DescentMode::Critical } else { DescentMode::Minimize };
    let opts = DescentOptions {
        budget: cfg.budget.unwrap_or(if cfg.critical { 60 } else { 2000 }),
        tolerance: cfg.tolerance,
        mode,
        ..DescentOptions::default()
    };
    let (cp, trace) = descend_with(&lp, &p, &opts)?;
    let monotone = mode == DescentMode::Critical || trace.values.windows(2).all(|w| w[1] <= w[0]);
    let body = json!({
        "critical_point": critical_point_json(&cp),
        "mode": if cfg.critical { "critical" } else { "minimize" },
        "values": nums(&trace.values),
        "energy_checks": trace.energy_checks,
        "resamples": trace.resamples,
        "monotone": monotone,
    });
    let code = match cp.status {
        DescentStatus::BudgetExhausted => EXIT_NONCONVERGENCE,
        _ if !monotone => EXIT_INVARIANT,
        _ => EXIT_OK,
    };
    Ok(Output {
        body,
        files: vec![("loop.csv".into(), report::loop_csv(&cp.curve))],
        code,
    })
}

/// Node 0 and tangent of the critical loop reached from the default start.
fn critical_seed(sys: &Arc<MagneticSystem<f64>>, cfg: &RunConfig, p: &FunctionalParams<f64>) -> Result<FlowState<f64>> {
    let start = default_start(sys, cfg.samples)?;
    let opts = DescentOptions {
        budget: 60,
        tolerance: cfg.tolerance,
        mode: DescentMode::Critical,
        spectrum: false,
        ..DescentOptions::default()
    };
    let curve = match descend_with(&start, p, &opts) {
        Ok((cp, _)) if cp.converged() => cp.curve,
        _ => start,
    };
    let tangent = crate::loopspace::tangent_of(&curve)?;
    Ok(FlowState::new(curve.sample(0).to_vec(), tangent.vector(0).to_vec()))
}

fn shoot_cmd(cfg: &RunConfig) -> Result<Output> {
    let sys = cfg.system()?;
    let n = sys.dim();
    let p = cfg.params()?;
    let (x0, v0) = match (&cfg.x0, &cfg.v0) {
        (Some(x), Some(v)) => (x.clone(), v.clone()),
        _ => {
            let seed = critical_seed(&sys, cfg, &p)?;
            (cfg.x0.clone().unwrap_or(seed.x), cfg.v0.clone().unwrap_or(seed.v))
        }
    };
    if x0.len() != n || v0.len() != n {
        return Err(Error::Config(format!("x0 and v0 need {n} components")));
    }
    let samples = cfg.samples.min(cfg.steps);
    let steps = cfg.steps.div_ceil(samples) * samples;
    let opts = ShootOptions {
        samples,
        ..ShootOptions::default()
    };
    let res = shoot_periodic_with(&sys, &FlowState::new(x0, v0), &FlowParams::Regularized(p), steps, opts)?;
    let body = json!({
        "residual": num(res.residual),
        "newton_iters": res.newton_iters,
        "speed": num(res.speed),
        "x0": nums(&res.initial.x),
        "v0": nums(&res.initial.v),
        "length": num(res.curve.length()?),
        "steps": steps,
    });
    Ok(Output {
        body,
        files: vec![
            ("loop.csv".into(), report::loop_csv(&res.curve)),
            ("trajectory.csv".into(), report::trajectory_csv(&res.trajectory, 1.0)),
        ],
        code: EXIT_OK,
    })
}

/// Loops winding once along a periodic axis `j` and swept across another
/// axis `i`; the first admissible `(j, i)`, non-periodic `i` tried first.
fn winding_family(
    sys: &Arc<MagneticSystem<f64>>,
    samples: usize,
    p: &FunctionalParams<f64>,
) -> Option<Result<SweepoutFamily<f64>>> {
    let periods = sys.periods();
    let n = periods.len();
    let center: Vec<f64> = sys.domain_box().iter().map(|&(a, b)| 0.5 * (a + b)).collect();
    let mut pairs: Vec<(usize, usize)> = (0..n)
        .filter(|&j| periods[j].is_some())
        .flat_map(|j| (0..n).filter(move |&i| i != j).map(move |i| (j, i)))
        .collect();
    pairs.sort_by_key(|&(_, i)| periods[i].is_some());
    let mut last = None;
    for (j, i) in pairs {
        let period = periods[j]?;
        let (lo, hi) = sys.domain_box()[i];
        let fam = SweepoutFamily::from_fn(sys, 33, samples, p, |s, t| {
            let mut x = center.clone();
            x[i] = lo + (hi - lo) * (0.02 + 0.96 * s);
            x[j] = period * t;
            x
        });
        match fam {
            Err(Error::InvalidFamily(_)) => last = Some(fam),
            other => return Some(other),
        }
    }
    last
}

/// Members `c + λ(w − c)` for `λ ∈ [0.02, 1]`, `c` the sample mean of `w`.
fn concentric_family(w: &DiscreteLoop<f64>, p: &FunctionalParams<f64>) -> Result<SweepoutFamily<f64>> {
    let d = w.dim();
    let count = w.len();
    let mut c = vec![0.0; d];
    for m in 0..count {
        for (ci, &x) in c.iter_mut().zip(w.sample(m)) {
            *ci += x / count as f64;
        }
    }
    let loops = (0..33)
        .map(|k| {
            let lambda = 0.02 + 0.98 * k as f64 / 32.0;
            let s = w.samples().iter().enumerate().map(|(q, &x)| c[q % d] + lambda * (x - c[q % d])).collect();
            w.with_samples(s)
        })
        .collect::<Result<Vec<_>>>()?;
    SweepoutFamily::new(loops, p)
}

fn witness_json(w: &Witness<f64>) -> Value {
    match w {
        Witness::Direct { value, length, phi, .. } => json!({
            "kind": "direct", "k": 1, "value": num(*value), "length": num(*length), "phi": num(*phi),
        }),
        Witness::Lifted {
            k,
            base_value,
            value,
            length,
            phi,
            base,
            ..
        } => json!({
            "kind": "lifted", "k": k, "base_value": num(*base_value), "value": num(*value),
            "length": num(*length), "phi": num(*phi), "base_length": num(base.length().unwrap_or(f64::NAN)),
        }),
    }
}

/// The family used by `sweepout` and `continue`, with a description.
fn pipeline_family(sys: &Arc<MagneticSystem<f64>>, cfg: &RunConfig, p: &FunctionalParams<f64>) -> Result<(SweepoutFamily<f64>, Value)> {
    let search = WitnessSearch {
        samples: cfg.samples,
        ..WitnessSearch::default()
    };
    let witness = match negativity_witness(sys, &search) {
        Ok(w) => Some(w),
        Err(Error::NoWitness) => None,
        Err(e) => return Err(e),
    };
    let witness_info = witness.as_ref().map_or(Value::Null, witness_json);
    let mut concentric_error = None;
    if let Some(w) = &witness {
        match concentric_family(w.curve(), p) {
            Ok(fam) => return Ok((fam, json!({"family": "concentric", "witness": witness_info}))),
            Err(e @ Error::InvalidFamily(_)) => concentric_error = Some(e),
            Err(e) => return Err(e),
        }
    }
    match winding_family(sys, cfg.samples, p) {
        Some(fam) => Ok((fam?, json!({"family": "winding", "witness": witness_info}))),
        None => Err(concentric_error.unwrap_or(Error::NoWitness)),
    }
}

fn sweepout_cmd(cfg: &RunConfig) -> Result<Output> {
    let sys = cfg.system()?;
    let p = cfg.params()?;
    let (fam, origin) = pipeline_family(&sys, cfg, &p)?;
    let opts = SweepoutOptions {
        rounds: cfg.budget.unwrap_or(20),
        tolerance: cfg.tolerance,
        ..SweepoutOptions::default()
    };
    let res = sweepout_minimax_with(&fam, &p, &opts)?;
    let monotone = res.round_values.windows(2).all(|w| w[1] <= w[0]);
    let body = json!({
        "origin": origin,
        "value": num(res.value),
        "round_values": nums(&res.round_values),
        "max_member": res.max_member,
        "endpoint_values": nums(&[res.family.endpoint_values().0, res.family.endpoint_values().1]),
        "saddle": critical_point_json(&res.saddle),
        "monotone": monotone,
    });
    let code = if !monotone {
        EXIT_INVARIANT
    } else if res.saddle.converged() {
        EXIT_OK
    } else {
        EXIT_NONCONVERGENCE
    };
    Ok(Output {
        body,
        files: vec![("loop.csv".into(), report::loop_csv(&res.saddle.curve))],
        code,
    })
}

fn continue_cmd(cfg: &RunConfig) -> Result<Output> {
    let sys = cfg.system()?;
    let schedule = Schedule::new(cfg.epsilon0, cfg.tau0, cfg.ratio, cfg.floor)?;
    let p0 = FunctionalParams::new(cfg.epsilon0, cfg.tau0)?;
    let (fam, origin) = pipeline_family(&sys, cfg, &p0)?;
    let sw = sweepout_minimax_with(
        &fam,
        &p0,
        &SweepoutOptions {
            rounds: cfg.budget.unwrap_or(20),
            tolerance: cfg.tolerance,
            ..SweepoutOptions::default()
        },
    )?;
    if !sw.saddle.converged() {
        return Err(Error::StageDivergence {
            stage: 0,
            reason: "sweepout saddle did not converge".into(),
        });
    }
    let opts = ContinuationOptions {
        tolerance: cfg.tolerance,
        limit_steps: cfg.steps,
        ..ContinuationOptions::default()
    };
    let run = continuation_with(&sw.saddle.curve, &schedule, &opts)?;
    let margin = curvature_margin(&sys, &MarginGrid::default_for(sys.dim())).map(|r| r.margin).ok();
    let bounds: Vec<Value> = run
        .stages
        .iter()
        .map(|s| margin.and_then(|m| s.within_length_bound(m)).map_or(Value::Null, Value::Bool))
        .collect();
    let bounded = bounds.iter().all(|b| *b != Value::Bool(false));
    let bound_values = |f: fn(usize, f64, usize) -> Result<f64>| -> Vec<Value> {
        run.stages
            .iter()
            .map(|s| match (margin, s.index) {
                (Some(m), Some(mu)) if m > 0.0 => f(mu, m, sys.dim()).map_or(Value::Null, num),
                _ => Value::Null,
            })
            .collect()
    };
    let final_curve = run.limit.as_ref().map_or(&run.stages.last().expect("non-empty").curve, |l| &l.curve);
    let body = json!({
        "origin": origin,
        "sweepout_value": num(sw.value),
        "saddle": critical_point_json(&sw.saddle),
        "continuation": report::continuation_json(&run),
        "margin": margin.map(num),
        "length_bound_holds": bounds,
        "length_bound": bound_values(length_bound),
        "length_bound_literal": bound_values(length_bound_literal),
        "final_length": num(final_curve.length()?),
    });
    let code = if !bounded {
        EXIT_INVARIANT
    } else if run.converged {
        EXIT_OK
    } else {
        EXIT_NONCONVERGENCE
    };
    Ok(Output {
        body,
        files: vec![("loop.csv".into(), report::loop_csv(final_curve))],
        code,
    })
}

fn check_cmd(cfg: &RunConfig) -> Result<Output> {
    let sys = cfg.system()?;
    let p = cfg.params()?;
    let outcomes = run_all(&sys, cfg.rng_seed, &p, &SuiteSizes::default())?;
    let passed = outcomes.iter().all(|o| o.passed());
    let body = json!({
        "suites": outcomes.iter().map(|o| json!({
            "name": o.name, "cases": o.cases, "violations": o.violations, "worst": num(o.worst), "passed": o.passed(),
        })).collect::<Vec<_>>(),
        "passed": passed,
    });
    Ok(Output {
        body,
        files: vec![],
        code: if passed { EXIT_OK } else { EXIT_INVARIANT },
    })
}
