//! Quadruped crawler: two inverted pendulums joined by a rigid trunk.
//!
//! The fore pendulum carries mass `fore_mass` at the shoulder and the hind
//! pendulum `hind_mass` at the hip; the trunk holds them `trunk_length` apart.
//! Only the front legs drive. At any time one front hand is planted and the
//! other swings forward; the hind legs are passive struts held at a fixed
//! angle from the ground.
//!
//! Vertical load is shared between the planted hand and the hind contact by
//! static lever arms about the centre of mass. Leg forces act along the legs,
//! so the planted arm pushes forward once the shoulder has passed the hand
//! and the inclined hind struts drag backward.
//!
//! Each time a hand plants, the hand that will plant next is assigned its
//! landing angle by predicting the following half-cycle and choosing the
//! angle that ends it at the nominal crawl speed.

use std::f64::consts::FRAC_PI_2;

use crate::error::{require_positive, Error, Result};
use crate::integrator::{integrate_step, FnSystem};
use crate::walk::Side;

/// Bisection steps used when choosing a landing angle.
const PLANT_SEARCH_ITERATIONS: usize = 40;

/// Projections smaller than this make a contact force unbounded.
const MIN_PROJECTION: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadParams {
    /// Mass lumped at the shoulders, kg.
    pub fore_mass: f64,
    /// Mass lumped at the hips, kg.
    pub hind_mass: f64,
    /// Shoulder to hip distance, m.
    pub trunk_length: f64,
    /// Height of shoulders and hips above the ground, m.
    pub leg_length: f64,
    /// Gravitational acceleration, m/s².
    pub gravity: f64,
    /// Time for both front hands to complete one swing each, s.
    pub crawl_period: f64,
    /// Nominal front-arm sweep either side of vertical, rad.
    pub drive_angle_amp: f64,
    /// Angle of the hind struts above the ground, rad.
    pub hind_support_angle: f64,
}

impl Default for QuadParams {
    fn default() -> Self {
        Self {
            fore_mass: 4.0,
            hind_mass: 2.5,
            trunk_length: 0.4,
            leg_length: 0.25,
            gravity: 9.81,
            crawl_period: 1.5,
            drive_angle_amp: 0.35,
            hind_support_angle: 1.4,
        }
    }
}

impl QuadParams {
    /// Checks signs and angle ranges. Mass balance is not enforced, so a
    /// back-heavy crawler can be simulated and seen to fail.
    pub fn validate(&self) -> Result<()> {
        require_positive("fore_mass", self.fore_mass)?;
        require_positive("hind_mass", self.hind_mass)?;
        require_positive("trunk_length", self.trunk_length)?;
        require_positive("leg_length", self.leg_length)?;
        require_positive("gravity", self.gravity)?;
        require_positive("crawl_period", self.crawl_period)?;
        require_positive("drive_angle_amp", self.drive_angle_amp)?;
        if self.drive_angle_amp >= FRAC_PI_2 {
            return Err(Error::invalid("drive_angle_amp", "must be below pi/2"));
        }
        require_positive("hind_support_angle", self.hind_support_angle)?;
        if self.hind_support_angle > FRAC_PI_2 {
            return Err(Error::invalid("hind_support_angle", "must not exceed pi/2"));
        }
        Ok(())
    }

    pub fn total_mass(&self) -> f64 {
        self.fore_mass + self.hind_mass
    }

    pub fn is_front_heavy(&self) -> bool {
        self.fore_mass > self.hind_mass
    }

    /// Shoulder position relative to the centre of mass.
    pub fn shoulder_offset(&self) -> f64 {
        self.trunk_length * self.hind_mass / self.total_mass()
    }

    /// Hip position relative to the centre of mass (negative: behind it).
    pub fn hip_offset(&self) -> f64 {
        -self.trunk_length * self.fore_mass / self.total_mass()
    }

    /// Hind contact relative to the centre of mass.
    pub fn hind_contact_offset(&self) -> f64 {
        self.hip_offset() + self.leg_length / self.hind_support_angle.tan()
    }

    /// Crawl speed at which each half-cycle sweeps the planted arm through
    /// twice the nominal amplitude.
    pub fn reference_speed(&self) -> f64 {
        4.0 * self.leg_length * self.drive_angle_amp.tan() / self.crawl_period
    }
}

/// Per-leg swing angles. Legs 1 and 2 are the front right and left, 3 and 4
/// the hind right and left.
///
/// `q11` is the front-right arm's angle from vertical, positive with the hand
/// behind the shoulder; `q12` is the front-left arm's angle measured the
/// other way, so `q1` is the spread between the arms. `q24` is the hind strut
/// angle above the ground and `q23` its mirror.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SwingAngles {
    pub q11: f64,
    pub q12: f64,
    pub q23: f64,
    pub q24: f64,
}

impl SwingAngles {
    pub fn q1(&self) -> f64 {
        self.q11 + self.q12
    }

    pub fn q2(&self) -> f64 {
        self.q23 + self.q24
    }
}

pub fn group_angles(a: &SwingAngles) -> (f64, f64) {
    (a.q1(), a.q2())
}

/// Leg force magnitudes: `f_fr` along the planted front arm, `f_hl` along the
/// hind strut.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ContactForces {
    pub f_fr: f64,
    pub f_hl: f64,
}

/// Horizontal acceleration and vertical force residual of the trunk.
///
/// `a.q11` is read as the angle of the planted front arm. The residual is
/// zero when the vertical components carry the full weight.
pub fn force_balance(f: &ContactForces, a: &SwingAngles, p: &QuadParams) -> (f64, f64) {
    let m = p.total_mass();
    let xddot = (f.f_fr * a.q11.sin() - f.f_hl * a.q24.cos()) / m;
    let residual = f.f_fr * a.q11.cos() + f.f_hl * a.q24.sin() - m * p.gravity;
    (xddot, residual)
}

/// Shares the weight between the planted hand and the hind contact by lever
/// arms about the centre of mass, then scales each share up to a force along
/// its leg.
pub fn load_split(
    a: &SwingAngles,
    stance_fore_x: f64,
    stance_hind_x: f64,
    com_x: f64,
    p: &QuadParams,
) -> Result<ContactForces> {
    if !(stance_hind_x < com_x && com_x < stance_fore_x) {
        return Err(Error::TippingInfeasible {
            com_x,
            hind_x: stance_hind_x,
            fore_x: stance_fore_x,
        });
    }
    let weight = p.total_mass() * p.gravity;
    let fore_share = (com_x - stance_hind_x) / (stance_fore_x - stance_hind_x);
    let fore_projection = a.q11.cos();
    let hind_projection = a.q24.sin();
    if !(fore_projection > MIN_PROJECTION) {
        return Err(Error::InfeasibleGeometry("front arm cannot carry vertical load"));
    }
    if !(hind_projection > MIN_PROJECTION) {
        return Err(Error::InfeasibleGeometry("hind strut cannot carry vertical load"));
    }
    Ok(ContactForces {
        f_fr: fore_share * weight / fore_projection,
        f_hl: (1.0 - fore_share) * weight / hind_projection,
    })
}

/// Which front arm is swinging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Drive {
    FrontLeftSwing,
    FrontRightSwing,
}

impl Drive {
    pub fn as_str(self) -> &'static str {
        match self {
            Drive::FrontLeftSwing => "front-left-swing",
            Drive::FrontRightSwing => "front-right-swing",
        }
    }

    pub fn swing_side(self) -> Side {
        match self {
            Drive::FrontLeftSwing => Side::Left,
            Drive::FrontRightSwing => Side::Right,
        }
    }

    pub fn other(self) -> Drive {
        match self {
            Drive::FrontLeftSwing => Drive::FrontRightSwing,
            Drive::FrontRightSwing => Drive::FrontLeftSwing,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrawlState {
    pub time: f64,
    pub com_x: f64,
    pub com_xdot: f64,
    pub drive: Drive,
    /// Time since the current swing began.
    pub t_phase: f64,
    /// Whole integration steps taken in the current swing.
    pub steps_in_phase: usize,
    /// Ground position of the planted hand.
    pub stance_hand_x: f64,
    /// Swinging arm's angle at liftoff, hand-behind-shoulder positive.
    pub swing_from: f64,
    /// Swinging arm's landing angle, same sense.
    pub swing_to: f64,
}

impl CrawlState {
    /// Starts at the nominal speed with the front-right hand just planted.
    pub fn initial(p: &QuadParams, dt: f64) -> Result<Self> {
        p.validate()?;
        let n = half_cycle_steps(p, dt)?;
        let v = p.reference_speed();
        let plant = choose_landing_angle(0.0, v, p, dt, n);
        let mut s = Self {
            time: 0.0,
            com_x: 0.0,
            com_xdot: v,
            drive: Drive::FrontLeftSwing,
            t_phase: 0.0,
            steps_in_phase: 0,
            stance_hand_x: p.shoulder_offset() - p.leg_length * plant.tan(),
            swing_from: p.drive_angle_amp,
            swing_to: 0.0,
        };
        s.swing_to = next_landing_angle(&s, p, dt, n);
        Ok(s)
    }

    pub fn shoulder_x(&self, p: &QuadParams) -> f64 {
        self.com_x + p.shoulder_offset()
    }

    pub fn hind_contact_x(&self, p: &QuadParams) -> f64 {
        self.com_x + p.hind_contact_offset()
    }

    /// Planted arm's angle from vertical, hand-behind-shoulder positive.
    pub fn stance_angle(&self, p: &QuadParams) -> f64 {
        ((self.shoulder_x(p) - self.stance_hand_x) / p.leg_length).atan()
    }

    /// Swinging arm's angle, blended from liftoff to landing over the half-cycle.
    pub fn swing_angle(&self, p: &QuadParams) -> f64 {
        let progress = (self.t_phase / (0.5 * p.crawl_period)).clamp(0.0, 1.0);
        let blend = 0.5 * (1.0 - (std::f64::consts::PI * progress).cos());
        self.swing_from + (self.swing_to - self.swing_from) * blend
    }

    /// Actual per-leg angles.
    pub fn angles(&self, p: &QuadParams) -> SwingAngles {
        let stance = self.stance_angle(p);
        let swing = self.swing_angle(p);
        let (right, left) = match self.drive {
            Drive::FrontLeftSwing => (stance, swing),
            Drive::FrontRightSwing => (swing, stance),
        };
        SwingAngles {
            q11: right,
            q12: -left,
            q23: -p.hind_support_angle,
            q24: p.hind_support_angle,
        }
    }

    /// Angles as seen by the force balance: `q11` is the planted arm.
    pub fn support_angles(&self, p: &QuadParams) -> SwingAngles {
        SwingAngles {
            q11: self.stance_angle(p),
            q12: 0.0,
            q23: -p.hind_support_angle,
            q24: p.hind_support_angle,
        }
    }

    /// Contact forces and the resulting horizontal acceleration.
    pub fn forces(&self, p: &QuadParams) -> Result<(ContactForces, f64)> {
        let a = self.support_angles(p);
        let f = load_split(&a, self.stance_hand_x, self.hind_contact_x(p), self.com_x, p)?;
        Ok((f, force_balance(&f, &a, p).0))
    }
}

fn half_cycle_steps(p: &QuadParams, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
    }
    let n = (0.5 * p.crawl_period / dt).round();
    if n < 1.0 {
        return Err(Error::invalid("dt", "must not exceed half the crawl period"));
    }
    Ok(n as usize)
}

/// Horizontal acceleration with the hand planted at `hand_x`.
fn trunk_accel(com_x: f64, hand_x: f64, p: &QuadParams) -> Result<f64> {
    let q11 = ((com_x + p.shoulder_offset() - hand_x) / p.leg_length).atan();
    let a = SwingAngles {
        q11,
        q12: 0.0,
        q23: -p.hind_support_angle,
        q24: p.hind_support_angle,
    };
    let f = load_split(&a, hand_x, com_x + p.hind_contact_offset(), com_x, p)?;
    Ok(force_balance(&f, &a, p).0)
}

fn trunk_step(t: f64, com_x: f64, com_xdot: f64, hand_x: f64, p: &QuadParams, dt: f64) -> Result<(f64, f64)> {
    let sys = FnSystem::new(2, |_, y: &[f64], out: &mut [f64]| {
        out[0] = y[1];
        // Infeasible contacts are caught by the caller before and after the step.
        out[1] = trunk_accel(y[0], hand_x, p).unwrap_or(f64::NAN);
    });
    let y = integrate_step(&sys, t, &[com_x, com_xdot], dt)?;
    Ok((y[0], y[1]))
}

enum HalfCycle {
    Completed(f64, f64),
    /// The trunk stopped or reversed.
    Stalled,
    /// The centre of mass ran past the planted hand.
    Overran,
}

/// Runs `n` steps with a fixed planted hand.
fn predict(com_x: f64, com_xdot: f64, hand_x: f64, p: &QuadParams, dt: f64, n: usize) -> HalfCycle {
    let (mut x, mut v) = (com_x, com_xdot);
    for i in 0..n {
        let Ok((nx, nv)) = trunk_step(i as f64 * dt, x, v, hand_x, p, dt) else {
            return HalfCycle::Overran;
        };
        if !(nv > 0.0) {
            return HalfCycle::Stalled;
        }
        if trunk_accel(nx, hand_x, p).is_err() {
            return HalfCycle::Overran;
        }
        x = nx;
        v = nv;
    }
    HalfCycle::Completed(x, v)
}

/// Landing angle in `[-amp, 0]` for a hand planted with the trunk at
/// `(com_x, com_xdot)` so that the next half-cycle ends at the reference speed.
fn choose_landing_angle(com_x: f64, com_xdot: f64, p: &QuadParams, dt: f64, n: usize) -> f64 {
    let target = p.reference_speed();
    let shoulder = com_x + p.shoulder_offset();
    let miss = |angle: f64| -> f64 {
        let hand = shoulder - p.leg_length * angle.tan();
        match predict(com_x, com_xdot, hand, p, dt, n) {
            HalfCycle::Completed(_, v) => v - target,
            HalfCycle::Stalled => f64::NEG_INFINITY,
            HalfCycle::Overran => f64::INFINITY,
        }
    };
    // Planting further ahead holds the trunk back longer.
    let (mut lo, mut hi) = (-p.drive_angle_amp, 0.0);
    if miss(hi) <= 0.0 {
        return hi;
    }
    if miss(lo) >= 0.0 {
        return lo;
    }
    for _ in 0..PLANT_SEARCH_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if miss(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Landing angle for the swinging arm, chosen from the predicted trunk state
/// at the end of the current half-cycle.
fn next_landing_angle(s: &CrawlState, p: &QuadParams, dt: f64, n: usize) -> f64 {
    let remaining = n.saturating_sub(s.steps_in_phase);
    match predict(s.com_x, s.com_xdot, s.stance_hand_x, p, dt, remaining) {
        HalfCycle::Completed(x, v) => choose_landing_angle(x, v, p, dt, n),
        HalfCycle::Stalled | HalfCycle::Overran => 0.0,
    }
}

/// Advances the crawler by one step of `dt`.
///
/// The trunk moves under the current contact forces; the swinging arm
/// follows its blend. When the swing completes, its hand plants at the
/// landing angle, the other arm lifts off and becomes the swinging arm, and
/// its own landing angle is chosen.
pub fn advance_crawl(s: &CrawlState, dt: f64, p: &QuadParams) -> Result<CrawlState> {
    let n = half_cycle_steps(p, dt)?;
    let (x, v) = trunk_step(s.time, s.com_x, s.com_xdot, s.stance_hand_x, p, dt)?;
    let mut next = CrawlState {
        time: s.time + dt,
        com_x: x,
        com_xdot: v,
        steps_in_phase: s.steps_in_phase + 1,
        t_phase: (s.steps_in_phase + 1) as f64 * dt,
        ..*s
    };
    if next.steps_in_phase >= n {
        let lifting = next.stance_angle(p);
        next.stance_hand_x = next.shoulder_x(p) - p.leg_length * next.swing_to.tan();
        next.drive = next.drive.other();
        next.steps_in_phase = 0;
        next.t_phase = 0.0;
        next.swing_from = lifting;
        next.swing_to = next_landing_angle(&next, p, dt, n);
    }
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrawlEventKind {
    /// The swinging hand planted on this side.
    Plant(Side),
    /// The centre of mass left the support span.
    Tipped,
    /// The trunk stopped or was pushed backward.
    Stalled,
}

impl CrawlEventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CrawlEventKind::Plant(Side::Left) => "plant_left",
            CrawlEventKind::Plant(Side::Right) => "plant_right",
            CrawlEventKind::Tipped => "fall_tipped",
            CrawlEventKind::Stalled => "fall_stalled",
        }
    }

    pub fn is_fall(self) -> bool {
        !matches!(self, CrawlEventKind::Plant(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrawlEvent {
    pub t: f64,
    pub kind: CrawlEventKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrawlSample {
    pub t: f64,
    pub drive: Drive,
    pub com_x: f64,
    pub com_xdot: f64,
    pub com_xddot: f64,
    /// Per-leg angles.
    pub angles: SwingAngles,
    /// Planted-arm angle, as used by the force balance.
    pub support_angle: f64,
    pub forces: ContactForces,
}

impl CrawlSample {
    pub fn support_angles(&self) -> SwingAngles {
        SwingAngles {
            q11: self.support_angle,
            q12: 0.0,
            q23: self.angles.q23,
            q24: self.angles.q24,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CrawlTrace {
    pub samples: Vec<CrawlSample>,
    pub events: Vec<CrawlEvent>,
}

impl CrawlTrace {
    pub fn fell(&self) -> bool {
        self.events.iter().any(|e| e.kind.is_fall())
    }

    pub fn fall_time(&self) -> Option<f64> {
        self.events.iter().find(|e| e.kind.is_fall()).map(|e| e.t)
    }
}

fn crawl_sample(s: &CrawlState, p: &QuadParams) -> Result<CrawlSample> {
    let (forces, xddot) = s.forces(p)?;
    Ok(CrawlSample {
        t: s.time,
        drive: s.drive,
        com_x: s.com_x,
        com_xdot: s.com_xdot,
        com_xddot: xddot,
        angles: s.angles(p),
        support_angle: s.stance_angle(p),
        forces,
    })
}

/// Crawls for `duration` seconds at step `dt`. A state whose contacts cannot
/// carry the trunk ends the run with a tipping event; a trunk that stops or
/// moves backward ends it with a stall event.
pub fn simulate_crawler(p: &QuadParams, duration: f64, dt: f64) -> Result<CrawlTrace> {
    p.validate()?;
    require_positive("duration", duration)?;
    let steps = (duration / dt - 1e-9).ceil() as usize;
    let mut s = CrawlState::initial(p, dt)?;
    let mut trace = CrawlTrace::default();
    trace.samples.push(crawl_sample(&s, p)?);
    for i in 1..=steps {
        let stepped = advance_crawl(&s, dt, p).and_then(|mut next| {
            next.time = i as f64 * dt;
            let sample = crawl_sample(&next, p)?;
            Ok((next, sample))
        });
        let (next, sample) = match stepped {
            Ok(v) => v,
            Err(Error::TippingInfeasible { .. })
            | Err(Error::InfeasibleGeometry(_))
            | Err(Error::IntegrationDiverged { .. }) => {
                trace.events.push(CrawlEvent {
                    t: i as f64 * dt,
                    kind: CrawlEventKind::Tipped,
                });
                return Ok(trace);
            }
            Err(e) => return Err(e),
        };
        trace.samples.push(sample);
        if next.drive != s.drive {
            trace.events.push(CrawlEvent {
                t: next.time,
                kind: CrawlEventKind::Plant(s.drive.swing_side()),
            });
        }
        if next.com_xdot <= 0.0 {
            trace.events.push(CrawlEvent {
                t: next.time,
                kind: CrawlEventKind::Stalled,
            });
            return Ok(trace);
        }
        s = next;
    }
    Ok(trace)
}
