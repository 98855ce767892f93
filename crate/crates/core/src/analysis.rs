//! Post-processing of SLIP traces: kinematic curves, energy audits, the
//! apex-to-apex return map and a search for its fixed points.

use crate::error::{require_positive, Error, Result};
use crate::slip::{
    flight_to_stance, run_flight, run_stance, stance_to_flight, FlightEnd, FlightState, HopSample,
    HopTrace, Phase, SlipParams, StanceEnd,
};

/// Time-aligned series extracted from a [`HopTrace`].
///
/// The first six fields are the classic running curves: horizontal and
/// vertical position, their rates, the centre-of-mass path and the leg
/// length. `phase` and `theta` ride along so samples can be rebuilt exactly.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KinematicCurves {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub xdot: Vec<f64>,
    pub zdot: Vec<f64>,
    pub path: Vec<(f64, f64)>,
    pub l: Vec<f64>,
    pub phase: Vec<Phase>,
    pub theta: Vec<f64>,
}

impl KinematicCurves {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Rebuilds the samples the curves were extracted from.
    pub fn to_samples(&self) -> Vec<HopSample> {
        (0..self.len())
            .map(|i| HopSample {
                t: self.t[i],
                phase: self.phase[i],
                x: self.x[i],
                z: self.z[i],
                xdot: self.xdot[i],
                zdot: self.zdot[i],
                l: self.l[i],
                theta: self.theta[i],
            })
            .collect()
    }
}

pub fn extract_curves(trace: &HopTrace) -> Result<KinematicCurves> {
    if trace.samples.is_empty() {
        return Err(Error::invalid("trace", "no samples to extract"));
    }
    let n = trace.samples.len();
    let mut c = KinematicCurves {
        t: Vec::with_capacity(n),
        x: Vec::with_capacity(n),
        z: Vec::with_capacity(n),
        xdot: Vec::with_capacity(n),
        zdot: Vec::with_capacity(n),
        path: Vec::with_capacity(n),
        l: Vec::with_capacity(n),
        phase: Vec::with_capacity(n),
        theta: Vec::with_capacity(n),
    };
    for s in &trace.samples {
        c.t.push(s.t);
        c.x.push(s.x);
        c.z.push(s.z);
        c.xdot.push(s.xdot);
        c.zdot.push(s.zdot);
        c.path.push((s.x, s.z));
        c.l.push(s.l);
        c.phase.push(s.phase);
        c.theta.push(s.theta);
    }
    Ok(c)
}

/// Mechanical energy of a sample: kinetic plus gravitational, plus spring
/// energy while in stance. The spring is measured from its actuated rest
/// length `rest_length + axial_offset`.
pub fn total_energy(s: &HopSample, p: &SlipParams) -> f64 {
    let kinetic = 0.5 * p.mass * (s.xdot * s.xdot + s.zdot * s.zdot);
    let potential = p.mass * p.gravity * s.z;
    match s.phase {
        Phase::Flight => kinetic + potential,
        Phase::Stance => {
            let deflection = p.rest_length + p.axial_offset - s.l;
            kinetic + potential + 0.5 * p.stiffness * deflection * deflection
        }
    }
}

/// Largest relative deviation of the energy from its first sample.
pub fn max_relative_energy_drift(samples: &[HopSample], p: &SlipParams) -> f64 {
    let Some(first) = samples.first() else {
        return 0.0;
    };
    let e0 = total_energy(first, p);
    samples
        .iter()
        .map(|s| ((total_energy(s, p) - e0) / e0).abs())
        .fold(0.0, f64::max)
}

/// A flight apex, together with the leg angle held for the next touchdown.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApexState {
    pub z_apex: f64,
    pub xdot_apex: f64,
    /// Leg angle at the apex; with no retraction it is also the touchdown angle.
    pub theta_td: f64,
}

impl ApexState {
    pub fn flight_state(&self) -> FlightState {
        FlightState {
            x: 0.0,
            xdot: self.xdot_apex,
            z: self.z_apex,
            zdot: 0.0,
            theta: self.theta_td,
        }
    }

    /// Flight energy at the apex.
    pub fn energy(&self, p: &SlipParams) -> f64 {
        0.5 * p.mass * self.xdot_apex * self.xdot_apex + p.mass * p.gravity * self.z_apex
    }
}

/// Longest simulated time allowed for one apex-to-apex cycle.
const CYCLE_TIME_LIMIT: f64 = 60.0;

/// Simulates one flight, stance, flight cycle and returns the next apex.
pub fn apex_map(a: &ApexState, p: &SlipParams, h: f64) -> Result<ApexState> {
    p.validate()?;
    require_positive("h", h)?;
    let surface = p.rest_length * a.theta_td.sin();
    if !(a.z_apex > surface) {
        return Err(Error::UnreachableTouchdown {
            z_apex: a.z_apex,
            surface,
        });
    }
    let mut scratch = HopTrace::default();
    let limit = CYCLE_TIME_LIMIT;

    let (t_td, touchdown) = match run_flight(0.0, a.flight_state(), p, h, limit, false, &mut scratch)? {
        FlightEnd::Touchdown(t, s) => (t, s),
        FlightEnd::Fall(t, _) => return Err(Error::FallDuringCycle { time: t }),
        FlightEnd::TimeLimit(t, _) => return Err(Error::FallDuringCycle { time: t }),
        FlightEnd::Apex(..) => unreachable!("apex detection is off"),
    };
    scratch.samples.clear();

    let (stance, foot_x) = flight_to_stance(&touchdown, p)?;
    let (t_lo, liftoff) = match run_stance(t_td, stance, foot_x, p, h, limit, &mut scratch)? {
        StanceEnd::Liftoff(t, s) => (t, s),
        StanceEnd::Fall(t, _) | StanceEnd::TimeLimit(t, _) => {
            return Err(Error::FallDuringCycle { time: t })
        }
    };
    scratch.samples.clear();

    let flight = stance_to_flight(&liftoff, foot_x, p);
    if !(flight.zdot > 0.0) {
        return Err(Error::MissedApex);
    }
    match run_flight(t_lo, flight, p, h, limit, true, &mut scratch)? {
        FlightEnd::Apex(_, s) => Ok(ApexState {
            z_apex: s.z,
            xdot_apex: s.xdot,
            theta_td: a.theta_td,
        }),
        FlightEnd::Touchdown(..) => Err(Error::MissedApex),
        FlightEnd::Fall(t, _) | FlightEnd::TimeLimit(t, _) => Err(Error::FallDuringCycle { time: t }),
    }
}

/// Convergence threshold on `|apex_map(p) - p|`, per component.
pub const FIXED_POINT_TOLERANCE: f64 = 1e-8;

/// Iteration cap for [`find_periodic_gait`].
pub const FIXED_POINT_MAX_ITERATIONS: usize = 200;

/// Searches for an apex state that the return map sends to itself, holding
/// the touchdown angle fixed and adjusting apex height and speed.
///
/// Uses damped Gauss-Newton steps on `apex_map(p) - p` with a finite-difference
/// Jacobian, falling back to a relaxed fixed-point update when a step fails
/// to reduce the residual.
pub fn find_periodic_gait(seed: &ApexState, p: &SlipParams, h: f64) -> Result<ApexState> {
    let residual = |v: [f64; 2]| -> Result<[f64; 2]> {
        let a = ApexState {
            z_apex: v[0],
            xdot_apex: v[1],
            theta_td: seed.theta_td,
        };
        let next = apex_map(&a, p, h)?;
        Ok([next.z_apex - v[0], next.xdot_apex - v[1]])
    };
    let norm = |r: [f64; 2]| r[0].hypot(r[1]);
    let converged = |r: [f64; 2]| r[0].abs() < FIXED_POINT_TOLERANCE && r[1].abs() < FIXED_POINT_TOLERANCE;

    let mut v = [seed.z_apex, seed.xdot_apex];
    let mut r = residual(v)?;
    let mut damping = 1e-3;
    for _ in 0..FIXED_POINT_MAX_ITERATIONS {
        if converged(r) {
            return Ok(ApexState {
                z_apex: v[0],
                xdot_apex: v[1],
                theta_td: seed.theta_td,
            });
        }
        let jac = jacobian(&residual, v, r)?;
        let mut accepted = false;
        for _ in 0..8 {
            let Some(step) = damped_step(&jac, r, damping) else {
                damping *= 10.0;
                continue;
            };
            let trial = [v[0] + step[0], v[1] + step[1]];
            match residual(trial) {
                Ok(rt) if norm(rt) < norm(r) => {
                    v = trial;
                    r = rt;
                    damping = (damping / 3.0).max(1e-12);
                    accepted = true;
                    break;
                }
                _ => damping *= 10.0,
            }
        }
        if !accepted {
            // Relaxed fixed-point update, shortened until the map is defined.
            let mut scale = 0.5;
            loop {
                let trial = [v[0] + scale * r[0], v[1] + scale * r[1]];
                match residual(trial) {
                    Ok(rt) => {
                        v = trial;
                        r = rt;
                        break;
                    }
                    Err(e) if scale < 1e-6 => return Err(e),
                    Err(_) => scale *= 0.25,
                }
            }
        }
    }
    if converged(r) {
        return Ok(ApexState {
            z_apex: v[0],
            xdot_apex: v[1],
            theta_td: seed.theta_td,
        });
    }
    Err(Error::NoConvergence {
        iterations: FIXED_POINT_MAX_ITERATIONS,
        residual: norm(r),
    })
}

fn jacobian(
    f: &dyn Fn([f64; 2]) -> Result<[f64; 2]>,
    v: [f64; 2],
    r: [f64; 2],
) -> Result<[[f64; 2]; 2]> {
    let mut jac = [[0.0; 2]; 2];
    for j in 0..2 {
        let delta = 1e-6 * v[j].abs().max(1.0);
        let mut probe = v;
        probe[j] += delta;
        let rp = f(probe)?;
        for i in 0..2 {
            jac[i][j] = (rp[i] - r[i]) / delta;
        }
    }
    Ok(jac)
}

/// Solves `(J^T J + damping I) step = -J^T r`.
fn damped_step(jac: &[[f64; 2]; 2], r: [f64; 2], damping: f64) -> Option<[f64; 2]> {
    let mut a = [[0.0; 2]; 2];
    let mut b = [0.0; 2];
    for i in 0..2 {
        for j in 0..2 {
            a[i][j] = jac[0][i] * jac[0][j] + jac[1][i] * jac[1][j];
        }
        a[i][i] += damping;
        b[i] = -(jac[0][i] * r[0] + jac[1][i] * r[1]);
    }
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let step = [
        (b[0] * a[1][1] - b[1] * a[0][1]) / det,
        (a[0][0] * b[1] - a[1][0] * b[0]) / det,
    ];
    step.iter().all(|s| s.is_finite()).then_some(step)
}

/// Peak compression of a vertical passive bounce dropped from rest at `z0`,
/// from the balance of drop energy against spring energy.
pub fn vertical_bounce_min_length(z0: f64, p: &SlipParams) -> f64 {
    let w = p.mass * p.gravity;
    let k = p.stiffness;
    let d = (w + (w * w + 2.0 * k * w * (z0 - p.rest_length)).sqrt()) / k;
    p.rest_length - d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::slip::{simulate_slip, vertical_drop, SlipStop};
    use std::f64::consts::FRAC_PI_2;

    fn bounce_trace(hops: usize) -> (HopTrace, SlipParams) {
        let p = SlipParams::default().passive();
        let t = simulate_slip(
            vertical_drop(1.2),
            &p,
            SlipStop {
                max_time: 10.0,
                max_hops: hops,
            },
            1e-4,
        )
        .unwrap();
        (t, p)
    }

    #[test]
    fn empty_trace_is_rejected() {
        assert!(matches!(
            extract_curves(&HopTrace::default()),
            Err(Error::InvalidArgument { .. })
        ));
    }

    #[test]
    fn single_sample_curves() {
        let mut t = HopTrace::default();
        t.samples.push(HopSample {
            t: 0.0,
            phase: Phase::Flight,
            x: 0.0,
            z: 1.0,
            xdot: 0.0,
            zdot: 0.0,
            l: 1.0,
            theta: 1.0,
        });
        let c = extract_curves(&t).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.path.len(), 1);
        assert_eq!(c.to_samples(), t.samples);
    }

    #[test]
    fn vertical_bounce_curves() {
        let (trace, p) = bounce_trace(1);
        let c = extract_curves(&trace).unwrap();
        // The vertical leg angle is pi/2 only to rounding, so x sits at the 1e-16 level.
        assert!(c.x.iter().all(|&x| x.abs() < 1e-12));
        assert!(c.path.iter().all(|&(x, _)| x.abs() < 1e-12));
        assert_eq!(c.to_samples(), trace.samples);
        let l_min = c.l.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((l_min - vertical_bounce_min_length(1.2, &p)).abs() < 1e-6);
    }

    #[test]
    fn energy_examples() {
        let p = SlipParams::default();
        let rest = HopSample {
            t: 0.0,
            phase: Phase::Stance,
            x: 0.0,
            z: 1.0,
            xdot: 0.0,
            zdot: 0.0,
            l: 1.0,
            theta: FRAC_PI_2,
        };
        assert!((total_energy(&rest, &p) - 80.0 * 9.81).abs() < 1e-12);
        let moving = HopSample {
            phase: Phase::Flight,
            xdot: 2.0,
            ..rest
        };
        assert!((total_energy(&moving, &p) - 944.8).abs() < 1e-9);
    }

    #[test]
    fn passive_bounce_conserves_energy() {
        let (trace, p) = bounce_trace(2);
        assert!(max_relative_energy_drift(&trace.samples, &p) < 1e-6);
    }

    #[test]
    fn low_apex_cannot_reach_touchdown() {
        let a = ApexState {
            z_apex: 0.5,
            xdot_apex: 0.0,
            theta_td: FRAC_PI_2,
        };
        assert!(matches!(
            apex_map(&a, &SlipParams::default().passive(), 1e-4),
            Err(Error::UnreachableTouchdown { .. })
        ));
    }

    #[test]
    fn horizontal_leg_falls() {
        let a = ApexState {
            z_apex: 1.0,
            xdot_apex: 1.0,
            theta_td: 0.0,
        };
        assert!(matches!(
            find_periodic_gait(&a, &SlipParams::default().passive(), 1e-4),
            Err(Error::FallDuringCycle { .. })
        ));
    }

    #[test]
    fn vertical_apex_is_fixed() {
        let p = SlipParams::default().passive();
        let a = ApexState {
            z_apex: 1.2,
            xdot_apex: 0.0,
            theta_td: FRAC_PI_2,
        };
        let next = apex_map(&a, &p, 1e-4).unwrap();
        assert!((next.z_apex - a.z_apex).abs() < 1e-5);
        assert!(next.xdot_apex.abs() < 1e-12);
        assert!(((next.energy(&p) - a.energy(&p)) / a.energy(&p)).abs() < 1e-6);
    }

    #[test]
    fn min_length_formula_static_limit() {
        let p = SlipParams::default();
        // Dropped from the touchdown height, the spring compresses to twice the static sag.
        let sag = p.mass * p.gravity / p.stiffness;
        assert!((vertical_bounce_min_length(1.0, &p) - (1.0 - 2.0 * sag)).abs() < 1e-12);
    }
}
