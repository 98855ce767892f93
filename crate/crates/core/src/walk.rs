//! Inverted-pendulum biped walker.
//!
//! The stance leg is a massless strut from the foot to a point mass. The full
//! polar pendulum dynamics are available through [`pendulum_derivative`], but
//! the walker itself holds the centre of mass at a constant height and follows
//! the linear inverted pendulum `xddot = (g / z_c) x` about the current foot.
//!
//! Each leg carries three phase-locked state machines (hip, knee, foot) that
//! cycle through stance-plant, push-off, swing and landing. The swinging leg
//! plants once its hip has swept forward to the step angle; at that moment
//! support swaps, the new foot lands one step reach ahead of the centre of
//! mass, the collision removes part of the forward speed and the trailing
//! leg's push-off restores it. How much the push-off can restore is bounded
//! by the horizontal share of the kick force at the trunk lean angle, so an
//! upright trunk cannot keep the walker going.

use crate::error::{require_finite, require_positive, Error, Result};
use crate::integrator::{integrate_step, FnSystem};

/// Slack used when comparing machine clocks and hip angles against their targets.
const CLOCK_SLACK: f64 = 1e-9;

/// Fractions of the stride period spent in push-off, swing (minimum) and landing.
pub const PUSH_OFF_FRACTION: f64 = 0.1;
pub const SWING_FRACTION: f64 = 0.3;
pub const LANDING_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkerParams {
    /// Trunk mass, kg.
    pub mass: f64,
    /// Gravitational acceleration, m/s².
    pub gravity: f64,
    /// Constant centre-of-mass height of the linear model, m.
    pub com_height: f64,
    /// Forward trunk lean setpoint, rad.
    pub lean: f64,
    /// Cap on the swing hip rate, rad/s.
    pub swing_rate_max: f64,
    /// Leg splay from vertical at plant, rad.
    pub step_angle: f64,
    /// Duration of one stride (two steps), s.
    pub stride_period: f64,
}

impl Default for WalkerParams {
    fn default() -> Self {
        Self {
            mass: 80.0,
            gravity: 9.81,
            com_height: 1.0,
            lean: 0.1,
            swing_rate_max: 6.0,
            step_angle: 0.3,
            stride_period: 1.0,
        }
    }
}

impl WalkerParams {
    /// Lean and swing cap may be zero: both describe walkers that fall.
    pub fn validate(&self) -> Result<()> {
        require_positive("mass", self.mass)?;
        require_positive("gravity", self.gravity)?;
        require_positive("com_height", self.com_height)?;
        require_positive("stride_period", self.stride_period)?;
        require_positive("step_angle", self.step_angle)?;
        if self.step_angle >= std::f64::consts::FRAC_PI_4 {
            return Err(Error::invalid("step_angle", "must be below pi/4"));
        }
        require_finite("lean", self.lean)?;
        if !(0.0..0.5).contains(&self.lean) {
            return Err(Error::invalid(
                "lean",
                format!("must lie in [0, 0.5), got {}", self.lean),
            ));
        }
        require_finite("swing_rate_max", self.swing_rate_max)?;
        if self.swing_rate_max < 0.0 {
            return Err(Error::invalid(
                "swing_rate_max",
                format!("must not be negative, got {}", self.swing_rate_max),
            ));
        }
        Ok(())
    }

    /// Time constant `sqrt(z_c / g)` of the linear pendulum.
    pub fn time_constant(&self) -> f64 {
        (self.com_height / self.gravity).sqrt()
    }

    /// Horizontal distance from the centre of mass to a freshly planted foot.
    pub fn step_reach(&self) -> f64 {
        self.com_height * self.step_angle.tan()
    }

    /// Forward speed at plant for which one step carries the centre of mass
    /// from `-reach` to `+reach` in half a stride.
    pub fn reference_speed(&self) -> f64 {
        let tc = self.time_constant();
        let tau = 0.5 * self.stride_period / tc;
        self.step_reach() * (1.0 + tau.cosh()) / (tc * tau.sinh())
    }

    /// Offset from the stance foot beyond which the walker topples forward.
    pub fn forward_fall_offset(&self) -> f64 {
        self.com_height * (2.0 * self.step_angle).tan()
    }

    /// Largest speed change a push-off can deliver: the horizontal part of the
    /// kick force at the lean angle, acting for the push-off duration.
    pub fn push_off_authority(&self) -> f64 {
        let kick = self.mass * self.gravity / self.lean.cos();
        kick * self.lean.sin() / self.mass * PUSH_OFF_FRACTION * self.stride_period
    }

    /// Speed retained through the plant collision.
    pub fn collision_factor(&self) -> f64 {
        self.step_angle.cos()
    }
}

/// Pendulum state in polar form about the pivot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumState {
    pub r: f64,
    /// Inclination from vertical, rad.
    pub theta: f64,
    pub rdot: f64,
    pub thetadot: f64,
}

/// Derivative `[thetadot, thetaddot, rdot, rddot]` of the polar pendulum under
/// a pivot torque `tau` and an axial leg force `f`.
pub fn pendulum_derivative(
    s: &PendulumState,
    tau: f64,
    f: f64,
    p: &WalkerParams,
) -> Result<[f64; 4]> {
    if !(s.r > 0.0) {
        return Err(Error::SingularConfiguration("pendulum length must be positive"));
    }
    let m = p.mass;
    let g = p.gravity;
    let thetaddot =
        (tau / m - 2.0 * s.r * s.rdot * s.thetadot + g * s.r * s.theta.sin()) / (s.r * s.r);
    let rddot = f / m + s.r * s.thetadot * s.thetadot - g * s.theta.cos();
    Ok([s.thetadot, thetaddot, s.rdot, rddot])
}

/// Leg thrust `Mg / cos(theta)` that keeps the centre of mass at constant height.
pub fn kick_force(theta: f64, p: &WalkerParams) -> Result<f64> {
    if !(theta.abs() < std::f64::consts::FRAC_PI_2) {
        return Err(Error::SingularKick { theta });
    }
    Ok(p.mass * p.gravity / theta.cos())
}

pub fn lip_accel(x: f64, p: &WalkerParams) -> f64 {
    p.gravity / p.com_height * x
}

/// Exact solution of the linear pendulum after time `t`.
pub fn lip_closed_form(x0: f64, xdot0: f64, t: f64, p: &WalkerParams) -> (f64, f64) {
    let tc = p.time_constant();
    let (sh, ch) = ((t / tc).sinh(), (t / tc).cosh());
    (x0 * ch + tc * xdot0 * sh, x0 / tc * sh + xdot0 * ch)
}

/// Orbital energy `xdot^2 - (g / z_c) x^2`, conserved by the linear pendulum.
pub fn orbital_energy(x: f64, xdot: f64, p: &WalkerParams) -> f64 {
    xdot * xdot - p.gravity / p.com_height * x * x
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Joint {
    Hip,
    Knee,
    Foot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LegState {
    StancePlant,
    PushOff,
    Swing,
    Landing,
}

impl LegState {
    pub fn next(self) -> LegState {
        match self {
            LegState::StancePlant => LegState::PushOff,
            LegState::PushOff => LegState::Swing,
            LegState::Swing => LegState::Landing,
            LegState::Landing => LegState::StancePlant,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LegState::StancePlant => "stance-plant",
            LegState::PushOff => "push-off",
            LegState::Swing => "swing",
            LegState::Landing => "landing",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegMachine {
    pub joint: Joint,
    pub state: LegState,
    pub time_in_state: f64,
}

/// One leg: its hip, knee and foot machines plus the hip angle from vertical,
/// positive when the foot is ahead of the hip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leg {
    pub machines: [LegMachine; 3],
    pub hip_angle: f64,
    /// Hip rate commanded for the current swing.
    pub swing_rate: f64,
}

impl Leg {
    fn new(state: LegState, hip_angle: f64) -> Self {
        let m = |joint| LegMachine {
            joint,
            state,
            time_in_state: 0.0,
        };
        Self {
            machines: [m(Joint::Hip), m(Joint::Knee), m(Joint::Foot)],
            hip_angle,
            swing_rate: 0.0,
        }
    }

    pub fn state(&self) -> LegState {
        self.machines[0].state
    }

    pub fn time_in_state(&self) -> f64 {
        self.machines[0].time_in_state
    }

    pub fn phase_locked(&self) -> bool {
        self.machines.iter().all(|m| m.state == self.machines[0].state)
    }

    fn tick(&mut self, dt: f64) {
        for m in &mut self.machines {
            m.time_in_state += dt;
        }
    }

    fn enter(&mut self, state: LegState) {
        for m in &mut self.machines {
            m.state = state;
            m.time_in_state = 0.0;
        }
    }
}

/// Joint angle targets of one leg, rad.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegTargets {
    pub hip: f64,
    pub knee: f64,
    pub foot: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointTargets {
    pub trunk_lean: f64,
    pub left: LegTargets,
    pub right: LegTargets,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkerState {
    pub time: f64,
    pub com_x: f64,
    pub com_xdot: f64,
    /// Ground position of the support foot.
    pub foot_x: f64,
    pub left: Leg,
    pub right: Leg,
    pub support: Side,
}

impl WalkerState {
    /// Left foot just planted one step reach ahead, right leg starting its push-off.
    pub fn initial(p: &WalkerParams) -> Self {
        let reach = p.step_reach();
        Self {
            time: 0.0,
            com_x: 0.0,
            com_xdot: p.reference_speed(),
            foot_x: reach,
            left: Leg::new(LegState::StancePlant, p.step_angle),
            right: Leg::new(LegState::PushOff, -p.step_angle),
            support: Side::Left,
        }
    }

    pub fn leg(&self, side: Side) -> &Leg {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    fn leg_mut(&mut self, side: Side) -> &mut Leg {
        match side {
            Side::Left => &mut self.left,
            Side::Right => &mut self.right,
        }
    }

    /// Centre of mass relative to the support foot.
    pub fn offset(&self) -> f64 {
        self.com_x - self.foot_x
    }

    /// Exactly one leg is planted in stance and every leg's machines agree.
    pub fn single_support(&self) -> bool {
        let planted = [&self.left, &self.right]
            .iter()
            .filter(|l| l.state() == LegState::StancePlant)
            .count();
        planted == 1
            && self.leg(self.support).state() == LegState::StancePlant
            && self.left.phase_locked()
            && self.right.phase_locked()
    }
}

fn leg_targets(leg: &Leg, p: &WalkerParams) -> LegTargets {
    let swing_time = SWING_FRACTION * p.stride_period;
    let (knee, foot) = match leg.state() {
        LegState::StancePlant => (0.0, 0.0),
        LegState::PushOff => (0.2, 0.3),
        LegState::Swing => {
            let progress = (leg.time_in_state() / swing_time).min(1.0);
            (0.6 * (std::f64::consts::PI * progress).sin(), 0.0)
        }
        LegState::Landing => (0.05, -0.1),
    };
    LegTargets {
        hip: leg.hip_angle,
        knee,
        foot,
    }
}

/// Advances the walker by `dt`: integrates the linear pendulum about the
/// support foot, then steps the leg machines. The swinging leg's hip rate is
/// capped at `swing_rate_max`, and support swaps when it completes landing.
pub fn advance_gait(
    w: &WalkerState,
    dt: f64,
    p: &WalkerParams,
) -> Result<(WalkerState, JointTargets)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
    }
    let g_over_z = p.gravity / p.com_height;
    let lip = FnSystem::new(2, move |_, y: &[f64], out: &mut [f64]| {
        out[0] = y[1];
        out[1] = g_over_z * y[0];
    });
    let y = integrate_step(&lip, w.time, &[w.offset(), w.com_xdot], dt)?;

    let mut next = *w;
    next.time = w.time + dt;
    next.com_x = w.foot_x + y[0];
    next.com_xdot = y[1];

    let stance_side = w.support;
    let swing_side = stance_side.other();
    let offset = next.offset();
    let stance = next.leg_mut(stance_side);
    stance.tick(dt);
    stance.hip_angle = (-offset / p.com_height).atan();

    let period = p.stride_period;
    let mut planted = false;
    let leg = next.leg_mut(swing_side);
    leg.tick(dt);
    match leg.state() {
        LegState::PushOff => {
            if leg.time_in_state() >= PUSH_OFF_FRACTION * period - CLOCK_SLACK {
                leg.enter(LegState::Swing);
                let travel = (p.step_angle - leg.hip_angle).max(0.0);
                let desired = travel / (SWING_FRACTION * period);
                leg.swing_rate = desired.min(p.swing_rate_max);
            }
        }
        LegState::Swing => {
            leg.hip_angle = (leg.hip_angle + leg.swing_rate * dt).min(p.step_angle);
            if leg.time_in_state() >= SWING_FRACTION * period - CLOCK_SLACK
                && leg.hip_angle >= p.step_angle - CLOCK_SLACK
            {
                leg.enter(LegState::Landing);
            }
        }
        LegState::Landing => {
            if leg.time_in_state() >= LANDING_FRACTION * period - CLOCK_SLACK {
                leg.enter(LegState::StancePlant);
                planted = true;
            }
        }
        LegState::StancePlant => {}
    }

    if planted {
        let reach = p.step_reach();
        next.foot_x = next.com_x + reach;
        next.leg_mut(swing_side).hip_angle = p.step_angle;
        next.leg_mut(stance_side).enter(LegState::PushOff);
        next.support = swing_side;

        let retained = p.collision_factor() * next.com_xdot;
        let limit = p.push_off_authority();
        let boost = (p.reference_speed() - retained).clamp(-limit, limit);
        next.com_xdot = retained + boost;
    }

    let targets = JointTargets {
        trunk_lean: p.lean,
        left: leg_targets(&next.left, p),
        right: leg_targets(&next.right, p),
    };
    Ok((next, targets))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WalkEventKind {
    /// A foot planted and took over support.
    Plant(Side),
    /// The centre of mass stopped or reversed over the support foot.
    FallBackward,
    /// The centre of mass ran past the support foot's reach.
    FallForward,
}

impl WalkEventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            WalkEventKind::Plant(Side::Left) => "plant_left",
            WalkEventKind::Plant(Side::Right) => "plant_right",
            WalkEventKind::FallBackward => "fall_backward",
            WalkEventKind::FallForward => "fall_forward",
        }
    }

    pub fn is_fall(self) -> bool {
        !matches!(self, WalkEventKind::Plant(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkEvent {
    pub t: f64,
    pub kind: WalkEventKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkSample {
    pub t: f64,
    pub support: Side,
    pub com_x: f64,
    pub com_xdot: f64,
    pub left_state: LegState,
    pub right_state: LegState,
    pub single_support: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WalkTrace {
    pub samples: Vec<WalkSample>,
    pub events: Vec<WalkEvent>,
}

impl WalkTrace {
    pub fn fell(&self) -> bool {
        self.events.iter().any(|e| e.kind.is_fall())
    }

    pub fn swaps(&self) -> usize {
        self.events.iter().filter(|e| !e.kind.is_fall()).count()
    }

    /// Completed strides: every second support swap.
    pub fn strides(&self) -> usize {
        self.swaps() / 2
    }
}

fn walk_sample(w: &WalkerState) -> WalkSample {
    WalkSample {
        t: w.time,
        support: w.support,
        com_x: w.com_x,
        com_xdot: w.com_xdot,
        left_state: w.left.state(),
        right_state: w.right.state(),
        single_support: w.single_support(),
    }
}

/// Walks from [`WalkerState::initial`] for `duration` seconds at step `h`,
/// stopping early with a fall event.
pub fn simulate_walker(p: &WalkerParams, duration: f64, h: f64) -> Result<WalkTrace> {
    p.validate()?;
    require_positive("duration", duration)?;
    require_positive("h", h)?;
    let steps = (duration / h - CLOCK_SLACK).ceil() as usize;
    let mut w = WalkerState::initial(p);
    let mut trace = WalkTrace::default();
    trace.samples.push(walk_sample(&w));
    for i in 1..=steps {
        let (mut next, _) = advance_gait(&w, h, p)?;
        // Index-based clock keeps long runs free of summation drift.
        next.time = i as f64 * h;
        trace.samples.push(walk_sample(&next));
        if next.support != w.support {
            trace.events.push(WalkEvent {
                t: next.time,
                kind: WalkEventKind::Plant(next.support),
            });
        }
        let fall = if next.com_xdot <= 0.0 {
            Some(WalkEventKind::FallBackward)
        } else if next.offset() > p.forward_fall_offset() {
            Some(WalkEventKind::FallForward)
        } else {
            None
        };
        if let Some(kind) = fall {
            trace.events.push(WalkEvent { t: next.time, kind });
            return Ok(trace);
        }
        w = next;
    }
    Ok(trace)
}
