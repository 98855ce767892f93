//! Command-line front end for the gait-lab simulators.
//!
//! [`run`] parses the arguments, merges an optional configuration file with
//! the flags, runs one simulator and writes its CSV trace and optional SVG
//! plot. It returns the process exit code: 0 on success, 1 for invalid
//! input, 2 when the simulation falls or fails or output cannot be written.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod csv;
pub mod plot;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::thread;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use gait_lab::analysis::{apex_map, extract_curves, find_periodic_gait, ApexState};
use gait_lab::crawl::{simulate_crawler, CrawlTrace, QuadParams};
use gait_lab::slip::{simulate_slip, FlightState, HopTrace, SlipParams, SlipStop};
use gait_lab::walk::{simulate_walker, WalkTrace, WalkerParams};
use thiserror::Error;

use config::{read_config, Model, Settings};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Syntax(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("cannot read config {}: {source}", path.display())]
    Config { path: PathBuf, source: io::Error },
    #[error("cannot write {}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Simulation(String),
}

impl CliError {
    pub(crate) fn invalid(key: &str, reason: impl Into<String>) -> Self {
        Self::invalid_owned(key.to_string(), reason.into())
    }

    pub(crate) fn invalid_owned(key: String, reason: String) -> Self {
        CliError::Invalid { key, reason }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Syntax(_)
            | CliError::UnknownKey(_)
            | CliError::Invalid { .. }
            | CliError::Config { .. } => 1,
            CliError::Io { .. } | CliError::Simulation(_) => 2,
        }
    }
}

/// Renames core argument names to the settings keys a user typed.
fn cli_key(name: &str) -> &str {
    match name {
        "h" | "dt" => "step",
        "initial" => "seed_state",
        "max_time" => "duration",
        other => other,
    }
}

impl From<gait_lab::Error> for CliError {
    fn from(e: gait_lab::Error) -> Self {
        match e {
            gait_lab::Error::InvalidArgument { name, reason } => CliError::invalid(cli_key(name), reason),
            other => CliError::Simulation(other.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "gait-lab",
    version,
    about = "Simulate a spring-mass runner, an inverted-pendulum walker and a quadruped crawler"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the spring-mass hopper for a number of hops.
    #[command(allow_negative_numbers = true)]
    Slip(SlipArgs),
    /// Run the inverted-pendulum walker.
    #[command(allow_negative_numbers = true)]
    Walker(WalkerArgs),
    /// Run the quadruped crawler.
    #[command(allow_negative_numbers = true)]
    Crawler(CrawlerArgs),
    /// Search for a periodic hopping gait from an apex seed.
    #[command(allow_negative_numbers = true)]
    Periodic(PeriodicArgs),
    /// Run several configuration files concurrently.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Configuration file of `key = value` lines; flags override it.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// CSV destination (stdout when absent).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// SVG plot destination.
    #[arg(long, value_name = "PATH")]
    plot: Option<PathBuf>,
    /// Integration step in seconds.
    #[arg(long, value_name = "H")]
    step: Option<f64>,
    /// Initial state components, e.g. `z=1.1,xdot=0.5`.
    #[arg(long, value_name = "K=V,...")]
    seed_state: Option<String>,
}

#[derive(Args, Debug)]
struct SlipParamArgs {
    /// Body mass (kg).
    #[arg(long)]
    mass: Option<f64>,
    /// Leg spring stiffness (N/m).
    #[arg(long)]
    stiffness: Option<f64>,
    /// Leg rest length (m).
    #[arg(long)]
    rest_length: Option<f64>,
    #[arg(long)]
    gravity: Option<f64>,
    /// Leg swing rate during flight (rad/s).
    #[arg(long)]
    retraction_rate: Option<f64>,
    /// Hip torque during stance (N m).
    #[arg(long)]
    hip_torque: Option<f64>,
    /// Axial actuator offset added to the rest length (m).
    #[arg(long)]
    axial_offset: Option<f64>,
}

impl SlipParamArgs {
    fn apply(&self, s: &mut Settings) -> Result<(), CliError> {
        set_all(
            s,
            &[
                ("mass", self.mass),
                ("stiffness", self.stiffness),
                ("rest_length", self.rest_length),
                ("gravity", self.gravity),
                ("retraction_rate", self.retraction_rate),
                ("hip_torque", self.hip_torque),
                ("axial_offset", self.axial_offset),
            ],
        )
    }
}

#[derive(Args, Debug)]
struct SlipArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    params: SlipParamArgs,
    /// Stop after this many stance phases.
    #[arg(long)]
    hops: Option<u64>,
    /// Simulated time limit (s).
    #[arg(long)]
    duration: Option<f64>,
}

#[derive(Args, Debug)]
struct PeriodicArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    params: SlipParamArgs,
}

#[derive(Args, Debug)]
struct WalkerArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    mass: Option<f64>,
    #[arg(long)]
    gravity: Option<f64>,
    /// Centre-of-mass height (m).
    #[arg(long)]
    com_height: Option<f64>,
    /// Forward trunk lean (rad).
    #[arg(long)]
    lean: Option<f64>,
    /// Cap on the swing-leg hip rate (rad/s).
    #[arg(long)]
    swing_rate_max: Option<f64>,
    /// Leg angle at touchdown (rad).
    #[arg(long)]
    step_angle: Option<f64>,
    /// Time for two steps (s).
    #[arg(long)]
    stride_period: Option<f64>,
    /// Simulated time (s).
    #[arg(long)]
    duration: Option<f64>,
}

#[derive(Args, Debug)]
struct CrawlerArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Mass carried by the front legs (kg).
    #[arg(long)]
    fore_mass: Option<f64>,
    /// Mass carried by the hind legs (kg).
    #[arg(long)]
    hind_mass: Option<f64>,
    /// Shoulder-to-hip distance (m).
    #[arg(long)]
    trunk_length: Option<f64>,
    #[arg(long)]
    leg_length: Option<f64>,
    #[arg(long)]
    gravity: Option<f64>,
    /// Time for one full crawl cycle (s).
    #[arg(long)]
    crawl_period: Option<f64>,
    /// Amplitude of the front-leg drive angle (rad).
    #[arg(long)]
    drive_angle_amp: Option<f64>,
    /// Hind-leg angle from the ground while supporting (rad).
    #[arg(long)]
    hind_support_angle: Option<f64>,
    /// Simulated time (s).
    #[arg(long)]
    duration: Option<f64>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Directory for traces of configs without an `out` key (default: next
    /// to each config).
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Configuration files; each must contain a `model` key.
    #[arg(required = true, value_name = "CONFIG")]
    configs: Vec<PathBuf>,
}

fn set_all(s: &mut Settings, values: &[(&str, Option<f64>)]) -> Result<(), CliError> {
    for (key, v) in values {
        if let Some(v) = v {
            s.set_number(key, *v)?;
        }
    }
    Ok(())
}

fn resolve(
    model: Model,
    common: &CommonArgs,
    flags: impl FnOnce(&mut Settings) -> Result<(), CliError>,
) -> Result<Settings, CliError> {
    let mut s = Settings::defaults(model);
    if let Some(path) = &common.config {
        s.apply_file(&read_config(path)?)?;
    }
    flags(&mut s)?;
    if let Some(step) = common.step {
        s.set_number("step", step)?;
    }
    if let Some(seed) = &common.seed_state {
        s.set_seed(seed)?;
    }
    if let Some(out) = &common.out {
        s.out = Some(out.clone());
    }
    if let Some(plot) = &common.plot {
        s.plot = Some(plot.clone());
    }
    Ok(s)
}

/// Runs the command line `args` (program name first) with the standard
/// streams and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = io::stdout();
    let stderr = io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

/// Like [`run`], writing to the given streams.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = write!(err, "{text}");
                    1
                }
                _ => {
                    let line = text.lines().next().unwrap_or("invalid arguments");
                    let _ = writeln!(err, "gait-lab: {}", line.trim_start_matches("error: "));
                    1
                }
            };
        }
    };

    let settings = match &cli.command {
        Command::Sweep(args) => return sweep(args, out, err),
        Command::Slip(a) => resolve(Model::Slip, &a.common, |s| {
            a.params.apply(s)?;
            set_all(s, &[("hops", a.hops.map(|h| h as f64)), ("duration", a.duration)])
        }),
        Command::Periodic(a) => resolve(Model::Periodic, &a.common, |s| a.params.apply(s)),
        Command::Walker(a) => resolve(Model::Walker, &a.common, |s| {
            set_all(
                s,
                &[
                    ("mass", a.mass),
                    ("gravity", a.gravity),
                    ("com_height", a.com_height),
                    ("lean", a.lean),
                    ("swing_rate_max", a.swing_rate_max),
                    ("step_angle", a.step_angle),
                    ("stride_period", a.stride_period),
                    ("duration", a.duration),
                ],
            )
        }),
        Command::Crawler(a) => resolve(Model::Crawler, &a.common, |s| {
            set_all(
                s,
                &[
                    ("fore_mass", a.fore_mass),
                    ("hind_mass", a.hind_mass),
                    ("trunk_length", a.trunk_length),
                    ("leg_length", a.leg_length),
                    ("gravity", a.gravity),
                    ("crawl_period", a.crawl_period),
                    ("drive_angle_amp", a.drive_angle_amp),
                    ("hind_support_angle", a.hind_support_angle),
                    ("duration", a.duration),
                ],
            )
        }),
    };

    match settings.and_then(|s| execute(&s, out)) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "gait-lab: {e}");
            e.exit_code()
        }
    }
}

/// Runs one fully resolved configuration.
pub fn execute(s: &Settings, out: &mut dyn Write) -> Result<(), CliError> {
    match s.model {
        Model::Slip => run_slip(s, out),
        Model::Walker => run_walker(s, out),
        Model::Crawler => run_crawler(s, out),
        Model::Periodic => run_periodic(s, out),
    }
}

fn positive(s: &Settings, key: &str) -> Result<f64, CliError> {
    let v = s.get(key);
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::invalid(key, format!("must be positive, got {v}")))
    }
}

fn seed_values(s: &Settings, keys: &[&str]) -> Result<Vec<f64>, CliError> {
    keys.iter()
        .map(|k| {
            let v = s.seed(k);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(CliError::invalid("seed_state", format!("`{k}` must be finite")))
            }
        })
        .collect()
}

fn slip_params(s: &Settings) -> Result<SlipParams, CliError> {
    let p = SlipParams {
        mass: s.get("mass"),
        stiffness: s.get("stiffness"),
        rest_length: s.get("rest_length"),
        gravity: s.get("gravity"),
        retraction_rate: s.get("retraction_rate"),
        hip_torque: s.get("hip_torque"),
        axial_offset: s.get("axial_offset"),
    };
    p.validate()?;
    Ok(p)
}

fn walker_params(s: &Settings) -> Result<WalkerParams, CliError> {
    let p = WalkerParams {
        mass: s.get("mass"),
        gravity: s.get("gravity"),
        com_height: s.get("com_height"),
        lean: s.get("lean"),
        swing_rate_max: s.get("swing_rate_max"),
        step_angle: s.get("step_angle"),
        stride_period: s.get("stride_period"),
    };
    p.validate()?;
    Ok(p)
}

fn quad_params(s: &Settings) -> Result<QuadParams, CliError> {
    let p = QuadParams {
        fore_mass: s.get("fore_mass"),
        hind_mass: s.get("hind_mass"),
        trunk_length: s.get("trunk_length"),
        leg_length: s.get("leg_length"),
        gravity: s.get("gravity"),
        crawl_period: s.get("crawl_period"),
        drive_angle_amp: s.get("drive_angle_amp"),
        hind_support_angle: s.get("hind_support_angle"),
    };
    p.validate()?;
    Ok(p)
}

/// Writes to the configured `out` file, or to `stdout` when none is set.
fn write_output(
    s: &Settings,
    stdout: &mut dyn Write,
    body: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> Result<(), CliError> {
    match &s.out {
        Some(path) => {
            let wrap = |source| CliError::Io {
                path: path.clone(),
                source,
            };
            let mut w = BufWriter::new(File::create(path).map_err(wrap)?);
            body(&mut w).map_err(wrap)?;
            w.flush().map_err(wrap)
        }
        None => body(stdout)
            .and_then(|_| stdout.flush())
            .map_err(|source| CliError::Io {
                path: PathBuf::from("<stdout>"),
                source,
            }),
    }
}

fn write_plot(s: &Settings, panels: impl FnOnce() -> Result<Vec<plot::Panel>, CliError>) -> Result<(), CliError> {
    let Some(path) = &s.plot else {
        return Ok(());
    };
    let svg = plot::render_svg(&panels()?);
    std::fs::write(path, svg).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })
}

/// Reports a failed simulation: invalid input passes through untouched,
/// anything else leaves a header-only trace behind.
fn failed(
    s: &Settings,
    out: &mut dyn Write,
    e: gait_lab::Error,
    header_only: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> CliError {
    let e = CliError::from(e);
    if e.exit_code() == 2 {
        if let Err(io) = write_output(s, out, header_only) {
            return io;
        }
    }
    e
}

fn run_slip(s: &Settings, out: &mut dyn Write) -> Result<(), CliError> {
    let p = slip_params(s)?;
    let h = positive(s, "step")?;
    let duration = positive(s, "duration")?;
    let hops = s.get("hops");
    if !(hops >= 1.0 && hops.fract() == 0.0 && hops.is_finite()) {
        return Err(CliError::invalid("hops", format!("must be a positive whole number, got {hops}")));
    }
    let v = seed_values(s, &["x", "xdot", "z", "zdot", "theta"])?;
    let initial = FlightState {
        x: v[0],
        xdot: v[1],
        z: v[2],
        zdot: v[3],
        theta: v[4],
    };
    let stop = SlipStop {
        max_time: duration,
        max_hops: hops as usize,
    };
    let trace = simulate_slip(initial, &p, stop, h)
        .map_err(|e| failed(s, out, e, |w| csv::write_slip(&HopTrace::default(), w)))?;
    write_output(s, out, |w| csv::write_slip(&trace, w))?;
    write_plot(s, || Ok(plot::slip_panels(&extract_curves(&trace)?)))?;
    match trace.events.iter().find(|e| e.kind.as_str() == "fall") {
        Some(e) => Err(CliError::Simulation(format!("the runner fell at t = {}", e.t))),
        None => Ok(()),
    }
}

fn run_walker(s: &Settings, out: &mut dyn Write) -> Result<(), CliError> {
    let p = walker_params(s)?;
    let h = positive(s, "step")?;
    let duration = positive(s, "duration")?;
    let trace = simulate_walker(&p, duration, h)
        .map_err(|e| failed(s, out, e, |w| csv::write_walker(&WalkTrace::default(), w)))?;
    write_output(s, out, |w| csv::write_walker(&trace, w))?;
    write_plot(s, || Ok(plot::walker_panels(&trace)))?;
    match trace.events.iter().find(|e| e.kind.is_fall()) {
        Some(e) => Err(CliError::Simulation(format!(
            "the walker fell ({}) at t = {}",
            e.kind.as_str(),
            e.t
        ))),
        None => Ok(()),
    }
}

fn run_crawler(s: &Settings, out: &mut dyn Write) -> Result<(), CliError> {
    let p = quad_params(s)?;
    let dt = positive(s, "step")?;
    let duration = positive(s, "duration")?;
    let trace = simulate_crawler(&p, duration, dt)
        .map_err(|e| failed(s, out, e, |w| csv::write_crawler(&CrawlTrace::default(), w)))?;
    write_output(s, out, |w| csv::write_crawler(&trace, w))?;
    write_plot(s, || Ok(plot::crawler_panels(&trace)))?;
    match trace.events.iter().find(|e| e.kind.is_fall()) {
        Some(e) => Err(CliError::Simulation(format!(
            "the crawler fell ({}) at t = {}",
            e.kind.as_str(),
            e.t
        ))),
        None => Ok(()),
    }
}

fn run_periodic(s: &Settings, out: &mut dyn Write) -> Result<(), CliError> {
    let p = slip_params(s)?;
    let h = positive(s, "step")?;
    let v = seed_values(s, &["z_apex", "xdot_apex", "theta_td"])?;
    let seed = ApexState {
        z_apex: v[0],
        xdot_apex: v[1],
        theta_td: v[2],
    };
    let surface = p.rest_length * seed.theta_td.sin();
    if !(seed.z_apex > surface) {
        return Err(CliError::invalid(
            "seed_state",
            format!("z_apex {} must lie above the touchdown height {surface}", seed.z_apex),
        ));
    }
    let solved = find_periodic_gait(&seed, &p, h).and_then(|fp| Ok((fp, apex_map(&fp, &p, h)?)));
    let (fp, next) = solved.map_err(|e| {
        let e = failed(s, out, e, |w| csv::write_fixed_point(None, w));
        match e {
            CliError::Simulation(msg) if p.hip_torque != 0.0 => CliError::Simulation(format!(
                "{msg} (a nonzero hip_torque adds energy every stance; try --hip-torque 0)"
            )),
            other => other,
        }
    })?;
    write_output(s, out, |w| csv::write_fixed_point(Some((&fp, &next)), w))?;
    write_plot(s, || {
        let stop = SlipStop {
            max_time: 10.0,
            max_hops: 1,
        };
        let trace = simulate_slip(fp.flight_state(), &p, stop, h)?;
        Ok(plot::slip_panels(&extract_curves(&trace)?))
    })
}

fn sweep_one(config: &Path, out_dir: Option<&Path>) -> Result<PathBuf, CliError> {
    let entries = read_config(config)?;
    let name = entries
        .iter()
        .find(|e| e.key == "model")
        .map(|e| e.value.as_str())
        .ok_or_else(|| CliError::invalid("model", "sweep configs must name their model"))?;
    let model = Model::parse(name)
        .ok_or_else(|| CliError::invalid("model", format!("unknown model `{name}`")))?;
    let mut s = Settings::defaults(model);
    s.apply_file(&entries)?;
    if s.out.is_none() {
        let stem = config.file_stem().unwrap_or_default().to_string_lossy();
        let dir = out_dir
            .map(Path::to_path_buf)
            .unwrap_or_else(|| config.parent().map(Path::to_path_buf).unwrap_or_default());
        s.out = Some(dir.join(format!("{stem}.csv")));
    }
    execute(&s, &mut io::sink())?;
    Ok(s.out.unwrap_or_default())
}

/// Runs each configuration on its own thread. Prints one status line per
/// config in argument order and returns the worst exit code.
fn sweep(args: &SweepArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let out_dir = args.out_dir.as_deref();
    let results: Vec<Result<PathBuf, CliError>> = thread::scope(|scope| {
        let handles: Vec<_> = args
            .configs
            .iter()
            .map(|c| scope.spawn(move || sweep_one(c, out_dir)))
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(CliError::Simulation("worker panicked".into())))
            })
            .collect()
    });
    let mut code = 0;
    for (config, result) in args.configs.iter().zip(results) {
        match result {
            Ok(dest) => {
                let _ = writeln!(out, "{}: ok -> {}", config.display(), dest.display());
            }
            Err(e) => {
                let _ = writeln!(err, "gait-lab: {}: {e}", config.display());
                code = code.max(e.exit_code());
            }
        }
    }
    code
}
