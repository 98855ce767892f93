//! Spring-loaded inverted pendulum (SLIP) running model.
//!
//! A point mass rides on a massless spring leg. In flight the mass is
//! ballistic and the leg angle turns at a constant retraction rate; in stance
//! the foot is pinned to the ground and the mass moves in polar coordinates
//! about it. The leg angle `theta` is measured from the ground plane at the
//! foot, so the mass sits at `(foot_x - l cos(theta), l sin(theta))` and a
//! leg with `theta < pi/2` touches down ahead of the mass.

use std::f64::consts::FRAC_PI_2;

use crate::error::{require_finite, require_positive, Error, Result};
use crate::integrator::{
    integrate_until_any, Direction, EventOptions, FnGuard, Guard, OdeSystem, OutcomeKind,
};

/// Touchdown and liftoff conversions accept guards this close to zero.
pub const TRANSITION_TOLERANCE: f64 = 1e-8;

/// A flight state below this fraction of the rest length counts as a fall.
pub const FALL_HEIGHT_FRACTION: f64 = 0.05;

/// A stance leg compressed below this fraction of the rest length counts as a fall.
pub const FALL_LENGTH_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlipParams {
    /// Point mass, kg.
    pub mass: f64,
    /// Leg spring stiffness, N/m.
    pub stiffness: f64,
    /// Leg rest length, m.
    pub rest_length: f64,
    /// Gravitational acceleration, m/s².
    pub gravity: f64,
    /// Leg retraction rate during flight, rad/s.
    pub retraction_rate: f64,
    /// Constant hip torque applied in stance, N·m.
    pub hip_torque: f64,
    /// Constant axial actuation added to the spring deflection, m.
    pub axial_offset: f64,
}

impl Default for SlipParams {
    fn default() -> Self {
        Self {
            mass: 80.0,
            stiffness: 20_000.0,
            rest_length: 1.0,
            gravity: 9.81,
            retraction_rate: 0.0,
            hip_torque: 1.5,
            axial_offset: 0.0,
        }
    }
}

impl SlipParams {
    /// Same parameters with both stance inputs switched off.
    pub fn passive(self) -> Self {
        Self {
            hip_torque: 0.0,
            axial_offset: 0.0,
            ..self
        }
    }

    /// Natural frequency `sqrt(k/m)` of the leg spring-mass system, rad/s.
    pub fn natural_frequency(&self) -> f64 {
        (self.stiffness / self.mass).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("mass", self.mass)?;
        require_positive("stiffness", self.stiffness)?;
        require_positive("rest_length", self.rest_length)?;
        require_positive("gravity", self.gravity)?;
        require_finite("retraction_rate", self.retraction_rate)?;
        require_finite("hip_torque", self.hip_torque)?;
        require_finite("axial_offset", self.axial_offset)?;
        Ok(())
    }
}

/// Airborne state `[x, xdot, z, zdot, theta]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlightState {
    pub x: f64,
    pub xdot: f64,
    pub z: f64,
    pub zdot: f64,
    pub theta: f64,
}

impl FlightState {
    pub fn to_array(self) -> [f64; 5] {
        [self.x, self.xdot, self.z, self.zdot, self.theta]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self {
            x: v[0],
            xdot: v[1],
            z: v[2],
            zdot: v[3],
            theta: v[4],
        }
    }
}

/// Ground-contact state `[theta, thetadot, l, ldot]` about a pinned foot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StanceState {
    pub theta: f64,
    pub thetadot: f64,
    pub l: f64,
    pub ldot: f64,
}

impl StanceState {
    pub fn to_array(self) -> [f64; 4] {
        [self.theta, self.thetadot, self.l, self.ldot]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self {
            theta: v[0],
            thetadot: v[1],
            l: v[2],
            ldot: v[3],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Flight,
    Stance,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Flight => "flight",
            Phase::Stance => "stance",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HopEventKind {
    Touchdown,
    Liftoff,
    Apex,
    Fall,
}

impl HopEventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            HopEventKind::Touchdown => "touchdown",
            HopEventKind::Liftoff => "liftoff",
            HopEventKind::Apex => "apex",
            HopEventKind::Fall => "fall",
        }
    }
}

/// One recorded instant, always in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopSample {
    pub t: f64,
    pub phase: Phase,
    pub x: f64,
    pub z: f64,
    pub xdot: f64,
    pub zdot: f64,
    /// Leg length; the rest length while airborne.
    pub l: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopEvent {
    pub t: f64,
    pub kind: HopEventKind,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct HopTrace {
    pub samples: Vec<HopSample>,
    pub events: Vec<HopEvent>,
}

impl HopTrace {
    pub fn count(&self, kind: HopEventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    pub fn fell(&self) -> bool {
        self.count(HopEventKind::Fall) > 0
    }

    fn push_sample(&mut self, sample: HopSample) {
        if self.samples.last().is_none_or(|s| sample.t > s.t) {
            self.samples.push(sample);
        }
    }
}

/// Stop conditions for [`simulate_slip`]. A hop is one completed stance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlipStop {
    pub max_time: f64,
    pub max_hops: usize,
}

impl Default for SlipStop {
    fn default() -> Self {
        Self {
            max_time: 10.0,
            max_hops: usize::MAX,
        }
    }
}

/// Flight dynamics `[xdot, 0, zdot, -g, omega]`.
pub fn flight_derivative(s: &FlightState, p: &SlipParams) -> [f64; 5] {
    [s.xdot, 0.0, s.zdot, -p.gravity, p.retraction_rate]
}

/// Polar stance dynamics about the foot, including the hip torque and axial inputs.
pub fn stance_derivative(s: &StanceState, p: &SlipParams) -> Result<[f64; 4]> {
    if !(s.l > 0.0) {
        return Err(Error::SingularConfiguration("stance leg length must be positive"));
    }
    let g = p.gravity;
    let (sin, cos) = s.theta.sin_cos();
    let thetaddot =
        -(2.0 * s.thetadot * s.ldot + g * cos) / s.l + p.hip_torque / (p.mass * s.l * s.l);
    let lddot = -g * sin
        + s.thetadot * s.thetadot * s.l
        + p.stiffness / p.mass * (p.rest_length - s.l + p.axial_offset);
    Ok([s.thetadot, thetaddot, s.ldot, lddot])
}

/// Cartesian stance accelerations of the mass relative to a foot at the origin.
/// Stance inputs are ignored; the spring is at its plain rest length.
pub fn cartesian_stance_derivative(
    x: f64,
    z: f64,
    _xdot: f64,
    _zdot: f64,
    p: &SlipParams,
) -> Result<(f64, f64)> {
    let r = x.hypot(z);
    if !(r > 0.0) {
        return Err(Error::SingularConfiguration("zero leg length"));
    }
    let w2 = p.stiffness / p.mass;
    let spring = w2 * (p.rest_length / r - 1.0);
    Ok((x * spring, z * spring - p.gravity))
}

/// Height of the mass above the surface where the leg first touches the ground.
pub fn touchdown_guard(s: &FlightState, p: &SlipParams) -> f64 {
    s.z - p.rest_length * s.theta.sin()
}

pub fn liftoff_guard(s: &StanceState, p: &SlipParams) -> f64 {
    s.l - p.rest_length
}

/// Pins the foot and converts the Cartesian velocity into polar rates.
/// Returns the stance state and the foot's ground coordinate.
pub fn flight_to_stance(s: &FlightState, p: &SlipParams) -> Result<(StanceState, f64)> {
    let guard = touchdown_guard(s, p);
    if !(guard.abs() <= TRANSITION_TOLERANCE) {
        return Err(Error::InvalidTransition { guard });
    }
    let (sin, cos) = s.theta.sin_cos();
    let l = p.rest_length;
    let foot_x = s.x + l * cos;
    let ldot = -s.xdot * cos + s.zdot * sin;
    let thetadot = (s.xdot * sin + s.zdot * cos) / l;
    Ok((
        StanceState {
            theta: s.theta,
            thetadot,
            l,
            ldot,
        },
        foot_x,
    ))
}

/// Recovers the Cartesian state from a stance state and its foot position.
/// The stance leg angle becomes the flight leg angle.
pub fn stance_to_flight(s: &StanceState, foot_x: f64, _p: &SlipParams) -> FlightState {
    let (sin, cos) = s.theta.sin_cos();
    FlightState {
        x: foot_x - s.l * cos,
        xdot: -s.ldot * cos + s.l * s.thetadot * sin,
        z: s.l * sin,
        zdot: s.ldot * sin + s.l * s.thetadot * cos,
        theta: s.theta,
    }
}

struct FlightSystem<'a>(&'a SlipParams);

impl OdeSystem for FlightSystem<'_> {
    fn dimension(&self) -> usize {
        5
    }

    fn derivative(&self, _t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        out.copy_from_slice(&flight_derivative(&FlightState::from_slice(y), self.0));
        Ok(())
    }
}

struct StanceSystem<'a>(&'a SlipParams);

impl OdeSystem for StanceSystem<'_> {
    fn dimension(&self) -> usize {
        4
    }

    fn derivative(&self, _t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        out.copy_from_slice(&stance_derivative(&StanceState::from_slice(y), self.0)?);
        Ok(())
    }
}

/// Integrates the Cartesian stance equations directly, as a cross-check on
/// the polar chart. State is `[x, z, xdot, zdot]` relative to the foot.
pub struct CartesianStanceSystem<'a>(pub &'a SlipParams);

impl OdeSystem for CartesianStanceSystem<'_> {
    fn dimension(&self) -> usize {
        4
    }

    fn derivative(&self, _t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        let (xddot, zddot) = cartesian_stance_derivative(y[0], y[1], y[2], y[3], self.0)?;
        out.copy_from_slice(&[y[2], y[3], xddot, zddot]);
        Ok(())
    }
}

fn flight_sample(t: f64, s: &FlightState, p: &SlipParams) -> HopSample {
    HopSample {
        t,
        phase: Phase::Flight,
        x: s.x,
        z: s.z,
        xdot: s.xdot,
        zdot: s.zdot,
        l: p.rest_length,
        theta: s.theta,
    }
}

fn stance_sample(t: f64, s: &StanceState, foot_x: f64, p: &SlipParams) -> HopSample {
    let c = stance_to_flight(s, foot_x, p);
    HopSample {
        t,
        phase: Phase::Stance,
        x: c.x,
        z: c.z,
        xdot: c.xdot,
        zdot: c.zdot,
        l: s.l,
        theta: s.theta,
    }
}

/// How a flight segment ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum FlightEnd {
    Touchdown(f64, FlightState),
    Apex(f64, FlightState),
    Fall(f64, FlightState),
    TimeLimit(f64, FlightState),
}

/// How a stance segment ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum StanceEnd {
    Liftoff(f64, StanceState),
    Fall(f64, StanceState),
    TimeLimit(f64, StanceState),
}

/// Integrates one flight segment, recording every step into `trace`.
/// Touchdown only counts while the mass is descending.
pub(crate) fn run_flight(
    t0: f64,
    s0: FlightState,
    p: &SlipParams,
    h: f64,
    t_max: f64,
    detect_apex: bool,
    trace: &mut HopTrace,
) -> Result<FlightEnd> {
    let sys = FlightSystem(p);
    let l0 = p.rest_length;
    let touchdown = FnGuard::new(Direction::Descending, |_, y: &[f64]| {
        touchdown_guard(&FlightState::from_slice(y), p)
    });
    let fall = FnGuard::new(Direction::Descending, |_, y: &[f64]| {
        y[2] - FALL_HEIGHT_FRACTION * l0
    });
    let apex = FnGuard::new(Direction::Descending, |_, y: &[f64]| y[3]);

    let mut t = t0;
    let mut s = s0;
    loop {
        if t >= t_max {
            return Ok(FlightEnd::TimeLimit(t, s));
        }
        let mut guards: Vec<&dyn Guard> = vec![&touchdown, &fall];
        if detect_apex {
            guards.push(&apex);
        }
        let opts = EventOptions::new(h, t_max);
        let out = integrate_until_any(&sys, &guards, t, &s.to_array(), &opts, &mut |tt, y| {
            trace.push_sample(flight_sample(tt, &FlightState::from_slice(y), p))
        })?;
        let te = out.time;
        let se = FlightState::from_slice(&out.state);
        match out.kind {
            OutcomeKind::EventFired { guard: 0 } => {
                if se.zdot < 0.0 {
                    trace.push_sample(flight_sample(te, &se, p));
                    return Ok(FlightEnd::Touchdown(te, se));
                }
                // Leg swept through the surface while the mass was still rising:
                // not a contact. Resume from just past the crossing.
                trace.push_sample(flight_sample(te, &se, p));
                if te == t {
                    let step = crate::integrator::integrate_step(&sys, t, &s.to_array(), h)?;
                    t += h;
                    s = FlightState::from_slice(&step);
                    trace.push_sample(flight_sample(t, &s, p));
                } else {
                    t = te;
                    s = se;
                }
            }
            OutcomeKind::EventFired { guard: 1 } => {
                trace.push_sample(flight_sample(te, &se, p));
                return Ok(FlightEnd::Fall(te, se));
            }
            OutcomeKind::EventFired { .. } => {
                trace.push_sample(flight_sample(te, &se, p));
                trace.events.push(HopEvent {
                    t: te,
                    kind: HopEventKind::Apex,
                });
                return Ok(FlightEnd::Apex(te, se));
            }
            OutcomeKind::TimeLimit | OutcomeKind::StepLimit => {
                return Ok(FlightEnd::TimeLimit(te, se));
            }
        }
    }
}

/// Integrates one stance segment about `foot_x`, recording every step.
pub(crate) fn run_stance(
    t0: f64,
    s0: StanceState,
    foot_x: f64,
    p: &SlipParams,
    h: f64,
    t_max: f64,
    trace: &mut HopTrace,
) -> Result<StanceEnd> {
    if t0 >= t_max {
        return Ok(StanceEnd::TimeLimit(t0, s0));
    }
    let sys = StanceSystem(p);
    let l0 = p.rest_length;
    let liftoff = FnGuard::new(Direction::Ascending, |_, y: &[f64]| y[2] - l0);
    let compressed = FnGuard::new(Direction::Descending, |_, y: &[f64]| {
        y[2] - FALL_LENGTH_FRACTION * l0
    });
    let fall_height = FALL_HEIGHT_FRACTION * l0;
    let low = FnGuard::new(Direction::Descending, move |_, y: &[f64]| {
        y[2] * y[0].sin() - fall_height
    });
    let opts = EventOptions::new(h, t_max);
    let out = integrate_until_any(
        &sys,
        &[&liftoff, &compressed, &low],
        t0,
        &s0.to_array(),
        &opts,
        &mut |tt, y| trace.push_sample(stance_sample(tt, &StanceState::from_slice(y), foot_x, p)),
    )?;
    let se = StanceState::from_slice(&out.state);
    trace.push_sample(stance_sample(out.time, &se, foot_x, p));
    Ok(match out.kind {
        OutcomeKind::EventFired { guard: 0 } => StanceEnd::Liftoff(out.time, se),
        OutcomeKind::EventFired { .. } => StanceEnd::Fall(out.time, se),
        _ => StanceEnd::TimeLimit(out.time, se),
    })
}

/// Simulates alternating flight and stance phases from an airborne state.
///
/// Every integration step is sampled. Touchdown, liftoff and apex events
/// are recorded as they occur; the run ends at the stop condition or with a
/// `Fall` event when the mass drops below `0.05 l0` or the leg compresses
/// below `0.1 l0`.
pub fn simulate_slip(initial: FlightState, p: &SlipParams, stop: SlipStop, h: f64) -> Result<HopTrace> {
    p.validate()?;
    require_positive("h", h)?;
    require_positive("max_time", stop.max_time)?;
    if !(touchdown_guard(&initial, p) > 0.0) {
        return Err(Error::invalid(
            "initial",
            "mass must start above the touchdown surface",
        ));
    }

    let mut trace = HopTrace::default();
    trace.samples.push(flight_sample(0.0, &initial, p));
    let mut t = 0.0;
    let mut flight = initial;
    let mut hops = 0usize;
    let mut detect_apex = initial.zdot > 0.0;
    let mut last_liftoff = None;

    loop {
        let end = run_flight(t, flight, p, h, stop.max_time, detect_apex, &mut trace)?;
        let (te, se) = match end {
            FlightEnd::Apex(te, se) => {
                // keep flying with apex detection switched off
                t = te;
                flight = se;
                detect_apex = false;
                continue;
            }
            FlightEnd::TimeLimit(..) => return Ok(trace),
            FlightEnd::Fall(te, _) => {
                trace.events.push(HopEvent {
                    t: te,
                    kind: HopEventKind::Fall,
                });
                return Ok(trace);
            }
            FlightEnd::Touchdown(te, se) => (te, se),
        };
        if last_liftoff == Some(te) {
            // Zero-length flight: the leg cannot clear the ground.
            trace.events.push(HopEvent {
                t: te,
                kind: HopEventKind::Fall,
            });
            return Ok(trace);
        }
        trace.events.push(HopEvent {
            t: te,
            kind: HopEventKind::Touchdown,
        });
        if hops >= stop.max_hops {
            return Ok(trace);
        }

        let (stance, foot_x) = flight_to_stance(&se, p)?;
        match run_stance(te, stance, foot_x, p, h, stop.max_time, &mut trace)? {
            StanceEnd::Liftoff(tl, sl) => {
                trace.events.push(HopEvent {
                    t: tl,
                    kind: HopEventKind::Liftoff,
                });
                hops += 1;
                if hops >= stop.max_hops {
                    return Ok(trace);
                }
                t = tl;
                flight = stance_to_flight(&sl, foot_x, p);
                detect_apex = flight.zdot > 0.0;
                last_liftoff = Some(tl);
            }
            StanceEnd::Fall(tf, _) => {
                trace.events.push(HopEvent {
                    t: tf,
                    kind: HopEventKind::Fall,
                });
                return Ok(trace);
            }
            StanceEnd::TimeLimit(..) => return Ok(trace),
        }
    }
}

/// A vertical leg touching the ground with its spring at rest.
pub fn vertical_drop(height: f64) -> FlightState {
    FlightState {
        x: 0.0,
        xdot: 0.0,
        z: height,
        zdot: 0.0,
        theta: FRAC_PI_2,
    }
}
