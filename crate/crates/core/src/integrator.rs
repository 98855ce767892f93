//! Fixed-step classical Runge-Kutta integration with guard-function events.
//!
//! Every model in the crate advances through this module. Steps are of
//! constant size so traces are reproducible bit for bit; a phase change is
//! located by bisecting the step in which a guard changes sign, re-integrating
//! from the start of that step with a shortened sub-step each time.

use crate::error::{Error, Result};

/// Refinement stops once the guard magnitude drops below this value.
pub const EVENT_TOLERANCE: f64 = 1e-10;

/// Upper bound on bisections of a bracketing step.
pub const MAX_BISECTIONS: usize = 100;

/// Step size used when a caller has no better choice.
pub const DEFAULT_STEP: f64 = 1e-4;

/// A first-order system `dy/dt = f(t, y)` of fixed dimension.
pub trait OdeSystem {
    fn dimension(&self) -> usize;

    /// Writes `f(t, state)` into `out`. `out.len() == state.len() == dimension()`.
    fn derivative(&self, t: f64, state: &[f64], out: &mut [f64]) -> Result<()>;
}

/// Adapts a closure into an [`OdeSystem`].
pub struct FnSystem<F> {
    dimension: usize,
    f: F,
}

impl<F> FnSystem<F>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    pub fn new(dimension: usize, f: F) -> Self {
        Self { dimension, f }
    }
}

impl<F> OdeSystem for FnSystem<F>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn derivative(&self, t: f64, state: &[f64], out: &mut [f64]) -> Result<()> {
        (self.f)(t, state, out);
        Ok(())
    }
}

/// Which zero crossings of a guard count as events.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Positive to non-positive.
    Descending,
    /// Negative to non-negative.
    Ascending,
    Any,
}

impl Direction {
    /// True when going from `before` to `after` is a crossing in this direction.
    /// Landing exactly on zero counts.
    pub fn crosses(self, before: f64, after: f64) -> bool {
        let down = before > 0.0 && after <= 0.0;
        let up = before < 0.0 && after >= 0.0;
        match self {
            Direction::Descending => down,
            Direction::Ascending => up,
            Direction::Any => down || up,
        }
    }

    fn moving(self, before: f64, after: f64) -> bool {
        match self {
            Direction::Descending => after < before,
            Direction::Ascending => after > before,
            Direction::Any => after != before,
        }
    }
}

/// A signed scalar whose directed zero crossing marks an event.
pub trait Guard {
    fn evaluate(&self, t: f64, state: &[f64]) -> f64;
    fn direction(&self) -> Direction;
}

/// Adapts a closure into a [`Guard`].
pub struct FnGuard<F> {
    direction: Direction,
    f: F,
}

impl<F> FnGuard<F>
where
    F: Fn(f64, &[f64]) -> f64,
{
    pub fn new(direction: Direction, f: F) -> Self {
        Self { direction, f }
    }
}

impl<F> Guard for FnGuard<F>
where
    F: Fn(f64, &[f64]) -> f64,
{
    fn evaluate(&self, t: f64, state: &[f64]) -> f64 {
        (self.f)(t, state)
    }

    fn direction(&self) -> Direction {
        self.direction
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutcomeKind {
    /// The guard at this index (into the slice passed in) fired.
    EventFired { guard: usize },
    TimeLimit,
    StepLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventOutcome {
    pub kind: OutcomeKind,
    pub time: f64,
    pub state: Vec<f64>,
    /// Value of the fired guard at the returned state; 0 for limits.
    pub guard_value: f64,
}

impl EventOutcome {
    pub fn fired(&self) -> Option<usize> {
        match self.kind {
            OutcomeKind::EventFired { guard } => Some(guard),
            _ => None,
        }
    }
}

/// Step size, horizon and refinement settings for [`integrate_until_any`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventOptions {
    pub step: f64,
    pub t_max: f64,
    pub max_steps: Option<usize>,
    pub tolerance: f64,
    pub max_bisections: usize,
}

impl EventOptions {
    pub fn new(step: f64, t_max: f64) -> Self {
        Self {
            step,
            t_max,
            max_steps: None,
            tolerance: EVENT_TOLERANCE,
            max_bisections: MAX_BISECTIONS,
        }
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = Some(max_steps);
        self
    }
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn check_dimension(system: &dyn OdeSystem, state: &[f64]) -> Result<()> {
    if state.len() != system.dimension() {
        return Err(Error::invalid(
            "state",
            format!(
                "length {} does not match system dimension {}",
                state.len(),
                system.dimension()
            ),
        ));
    }
    Ok(())
}

/// One classical RK4 step written into `out`. `scratch` needs `5 * n` slots.
fn rk4_into(
    system: &dyn OdeSystem,
    t: f64,
    y: &[f64],
    h: f64,
    out: &mut [f64],
    scratch: &mut [f64],
) -> Result<()> {
    let n = y.len();
    let (k1, rest) = scratch.split_at_mut(n);
    let (k2, rest) = rest.split_at_mut(n);
    let (k3, rest) = rest.split_at_mut(n);
    let (k4, tmp) = rest.split_at_mut(n);
    let tmp = &mut tmp[..n];

    system.derivative(t, y, k1)?;
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    system.derivative(t + 0.5 * h, tmp, k2)?;
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    system.derivative(t + 0.5 * h, tmp, k3)?;
    for i in 0..n {
        tmp[i] = y[i] + h * k3[i];
    }
    system.derivative(t + h, tmp, k4)?;
    for i in 0..n {
        out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    if !all_finite(k1) || !all_finite(k2) || !all_finite(k3) || !all_finite(k4) || !all_finite(out)
    {
        return Err(Error::IntegrationDiverged { time: t + h });
    }
    Ok(())
}

/// Advances `state` by one classical fourth-order step of size `h`.
pub fn integrate_step(system: &dyn OdeSystem, t: f64, state: &[f64], h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid("h", format!("step must be positive, got {h}")));
    }
    check_dimension(system, state)?;
    let n = state.len();
    let mut out = vec![0.0; n];
    let mut scratch = vec![0.0; 5 * n];
    rk4_into(system, t, state, h, &mut out, &mut scratch)?;
    Ok(out)
}

/// Integrates from `t0` to `t_end` with steps of `h`, shortening the last one.
pub fn integrate_span(
    system: &dyn OdeSystem,
    t0: f64,
    state0: &[f64],
    h: f64,
    t_end: f64,
) -> Result<Vec<f64>> {
    let opts = EventOptions::new(h, t_end);
    integrate_until_any(system, &[], t0, state0, &opts, &mut |_, _| {}).map(|o| o.state)
}

/// Integrates until `guard` crosses zero in its direction or `t_max` is reached.
pub fn integrate_until_event(
    system: &dyn OdeSystem,
    guard: &dyn Guard,
    t0: f64,
    state0: &[f64],
    h: f64,
    t_max: f64,
) -> Result<EventOutcome> {
    let opts = EventOptions::new(h, t_max);
    integrate_until_any(system, &[guard], t0, state0, &opts, &mut |_, _| {})
}

/// Integrates until the earliest of several guards fires.
///
/// `observer` sees the end point of every full step taken, but neither the
/// initial state nor a refined event state. A guard already within tolerance
/// of zero at `t0` and moving in its firing direction fires immediately at `t0`.
pub fn integrate_until_any(
    system: &dyn OdeSystem,
    guards: &[&dyn Guard],
    t0: f64,
    state0: &[f64],
    opts: &EventOptions,
    observer: &mut dyn FnMut(f64, &[f64]),
) -> Result<EventOutcome> {
    let h = opts.step;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid("h", format!("step must be positive, got {h}")));
    }
    if !(opts.t_max > t0) {
        return Err(Error::invalid(
            "t_max",
            format!("must exceed start time {t0}, got {}", opts.t_max),
        ));
    }
    check_dimension(system, state0)?;
    if !all_finite(state0) {
        return Err(Error::IntegrationDiverged { time: t0 });
    }

    let n = state0.len();
    let mut scratch = vec![0.0; 5 * n];
    let mut y = state0.to_vec();
    let mut y_next = vec![0.0; n];
    let mut g_prev: Vec<f64> = guards.iter().map(|g| g.evaluate(t0, &y)).collect();
    let mut t = t0;
    let mut steps = 0usize;

    loop {
        if let Some(limit) = opts.max_steps {
            if steps >= limit {
                return Ok(EventOutcome {
                    kind: OutcomeKind::StepLimit,
                    time: t,
                    state: y,
                    guard_value: 0.0,
                });
            }
        }
        let t_next = (t0 + (steps + 1) as f64 * h).min(opts.t_max);
        let dt = t_next - t;
        rk4_into(system, t, &y, dt, &mut y_next, &mut scratch)?;

        let mut best: Option<(usize, f64, Vec<f64>, f64)> = None;
        for (i, guard) in guards.iter().enumerate() {
            let g1 = guard.evaluate(t_next, &y_next);
            let dir = guard.direction();
            let hit = if steps == 0 && g_prev[i].abs() < opts.tolerance && dir.moving(g_prev[i], g1) {
                Some((t, y.clone(), g_prev[i]))
            } else if dir.crosses(g_prev[i], g1) {
                Some(refine(
                    system,
                    *guard,
                    t,
                    &y,
                    g_prev[i],
                    t_next,
                    &y_next,
                    g1,
                    opts,
                    &mut scratch,
                )?)
            } else {
                None
            };
            if let Some((te, ye, ge)) = hit {
                if best.as_ref().is_none_or(|b| te < b.1) {
                    best = Some((i, te, ye, ge));
                }
            }
            g_prev[i] = g1;
        }

        if let Some((guard, time, state, guard_value)) = best {
            return Ok(EventOutcome {
                kind: OutcomeKind::EventFired { guard },
                time,
                state,
                guard_value,
            });
        }

        std::mem::swap(&mut y, &mut y_next);
        t = t_next;
        steps += 1;
        observer(t, &y);

        if t >= opts.t_max {
            return Ok(EventOutcome {
                kind: OutcomeKind::TimeLimit,
                time: t,
                state: y,
                guard_value: 0.0,
            });
        }
    }
}

/// Bisects the bracketing step `[ta, tb]`. Every trial state is produced by a
/// single sub-step from the start of the bracket, `(ta, ya)`.
#[allow(clippy::too_many_arguments)]
fn refine(
    system: &dyn OdeSystem,
    guard: &dyn Guard,
    t_start: f64,
    y_start: &[f64],
    g_start: f64,
    t_end: f64,
    y_end: &[f64],
    g_end: f64,
    opts: &EventOptions,
    scratch: &mut [f64],
) -> Result<(f64, Vec<f64>, f64)> {
    let dir = guard.direction();
    if g_end.abs() < opts.tolerance {
        return Ok((t_end, y_end.to_vec(), g_end));
    }
    let mut lo = t_start;
    let mut g_lo = g_start;
    let mut hi = t_end;
    let mut y_hi = y_end.to_vec();
    let mut g_hi = g_end;
    let mut y_mid = vec![0.0; y_start.len()];

    for _ in 0..opts.max_bisections {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        rk4_into(system, t_start, y_start, mid - t_start, &mut y_mid, scratch)?;
        let g_mid = guard.evaluate(mid, &y_mid);
        if g_mid.abs() < opts.tolerance {
            return Ok((mid, y_mid, g_mid));
        }
        if dir.crosses(g_lo, g_mid) {
            hi = mid;
            y_hi.copy_from_slice(&y_mid);
            g_hi = g_mid;
        } else {
            lo = mid;
            g_lo = g_mid;
        }
    }
    Ok((hi, y_hi, g_hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exponential() -> FnSystem<impl Fn(f64, &[f64], &mut [f64])> {
        FnSystem::new(1, |_, y: &[f64], dy: &mut [f64]| dy[0] = y[0])
    }

    fn free_fall(g: f64) -> FnSystem<impl Fn(f64, &[f64], &mut [f64])> {
        FnSystem::new(2, move |_, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -g;
        })
    }

    #[test]
    fn zero_field_is_identity() {
        let sys = FnSystem::new(2, |_, _: &[f64], dy: &mut [f64]| dy.fill(0.0));
        assert_eq!(integrate_step(&sys, 0.0, &[1.0, 2.0], 0.1).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn constant_field_is_exact() {
        let sys = FnSystem::new(1, |_, _: &[f64], dy: &mut [f64]| dy[0] = 1.0);
        assert_eq!(integrate_step(&sys, 0.0, &[0.0], 0.5).unwrap(), vec![0.5]);
    }

    #[test]
    fn exponential_single_step() {
        let y = integrate_step(&exponential(), 0.0, &[1.0], 0.1).unwrap();
        assert!((y[0] - 0.1f64.exp()).abs() < 1e-7);
    }

    #[test]
    fn input_is_not_mutated() {
        let y0 = [1.0];
        let _ = integrate_step(&exponential(), 0.0, &y0, 0.1).unwrap();
        assert_eq!(y0, [1.0]);
    }

    #[test]
    fn rejects_bad_step_and_dimension() {
        assert!(matches!(
            integrate_step(&exponential(), 0.0, &[1.0], 0.0),
            Err(Error::InvalidArgument { name: "h", .. })
        ));
        assert!(integrate_step(&exponential(), 0.0, &[1.0, 2.0], 0.1).is_err());
    }

    #[test]
    fn non_finite_derivative_diverges() {
        let sys = FnSystem::new(1, |_, _: &[f64], dy: &mut [f64]| dy[0] = f64::NAN);
        assert!(matches!(
            integrate_step(&sys, 0.0, &[1.0], 0.1),
            Err(Error::IntegrationDiverged { .. })
        ));
    }

    #[test]
    fn free_fall_touchdown_time() {
        let g = 9.81;
        let guard = FnGuard::new(Direction::Descending, |_, y: &[f64]| y[0]);
        let out = integrate_until_event(&free_fall(g), &guard, 0.0, &[1.0, 0.0], 1e-3, 2.0).unwrap();
        assert_eq!(out.fired(), Some(0));
        assert!((out.time - (2.0 / g).sqrt()).abs() < 1e-6);
        assert!(out.guard_value.abs() < EVENT_TOLERANCE);
    }

    #[test]
    fn positive_guard_hits_time_limit() {
        let guard = FnGuard::new(Direction::Any, |_, _: &[f64]| 1.0);
        let out = integrate_until_event(&exponential(), &guard, 0.0, &[1.0], 0.03, 1.0).unwrap();
        assert_eq!(out.kind, OutcomeKind::TimeLimit);
        assert_eq!(out.time, 1.0);
    }

    #[test]
    fn direction_filter_suppresses_wrong_crossing() {
        let guard = FnGuard::new(Direction::Ascending, |_, y: &[f64]| y[0]);
        let out = integrate_until_event(&free_fall(9.81), &guard, 0.0, &[1.0, 0.0], 1e-3, 1.0).unwrap();
        assert_eq!(out.kind, OutcomeKind::TimeLimit);
    }

    #[test]
    fn guard_at_zero_moving_in_direction_fires_immediately() {
        let guard = FnGuard::new(Direction::Descending, |_, y: &[f64]| y[0]);
        let out = integrate_until_event(&free_fall(9.81), &guard, 0.5, &[0.0, -1.0], 1e-3, 1.0).unwrap();
        assert_eq!(out.fired(), Some(0));
        assert_eq!(out.time, 0.5);
        assert_eq!(out.state, vec![0.0, -1.0]);
    }

    #[test]
    fn guard_at_zero_moving_away_does_not_fire() {
        let guard = FnGuard::new(Direction::Descending, |_, y: &[f64]| y[0]);
        let out = integrate_until_event(&free_fall(9.81), &guard, 0.0, &[0.0, 1.0], 1e-3, 0.1).unwrap();
        assert_eq!(out.kind, OutcomeKind::TimeLimit);
    }

    #[test]
    fn earliest_of_several_guards_wins() {
        let apex = FnGuard::new(Direction::Descending, |_, y: &[f64]| y[1]);
        let ground = FnGuard::new(Direction::Descending, |_, y: &[f64]| y[0]);
        let opts = EventOptions::new(1e-3, 5.0);
        let out = integrate_until_any(
            &free_fall(9.81),
            &[&ground, &apex],
            0.0,
            &[0.0, 2.0],
            &opts,
            &mut |_, _| {},
        )
        .unwrap();
        assert_eq!(out.fired(), Some(1));
        assert!((out.time - 2.0 / 9.81).abs() < 1e-9);
    }

    #[test]
    fn step_limit_is_reported() {
        let opts = EventOptions::new(0.1, 10.0).with_max_steps(3);
        let out = integrate_until_any(&exponential(), &[], 0.0, &[1.0], &opts, &mut |_, _| {}).unwrap();
        assert_eq!(out.kind, OutcomeKind::StepLimit);
        assert!((out.time - 0.3).abs() < 1e-15);
    }

    #[test]
    fn observer_sees_each_step_with_increasing_time() {
        let mut times = Vec::new();
        let opts = EventOptions::new(0.25, 1.0);
        integrate_until_any(&exponential(), &[], 0.0, &[1.0], &opts, &mut |t, _| times.push(t)).unwrap();
        assert_eq!(times, vec![0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn span_shortens_last_step() {
        // RK4 on y' = y multiplies by the degree-4 Taylor polynomial of e^h.
        let growth = |h: f64| 1.0 + h + h * h / 2.0 + h.powi(3) / 6.0 + h.powi(4) / 24.0;
        let y = integrate_span(&exponential(), 0.0, &[1.0], 0.3, 1.0).unwrap();
        let expected = growth(0.3).powi(3) * growth(0.1);
        assert!((y[0] - expected).abs() < 1e-12);
    }
}
