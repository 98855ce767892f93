use gait_lab::integrator::{integrate_span, FnSystem};
use gait_lab::walk::*;

const H: f64 = 1e-4;

#[test]
fn default_walker_completes_ten_strides() {
    let p = WalkerParams::default();
    let trace = simulate_walker(&p, 10.0, H).unwrap();
    assert!(!trace.fell(), "events: {:?}", trace.events.last());
    assert!(trace.strides() >= 10, "strides = {}", trace.strides());
    assert!(trace.samples.iter().all(|s| s.single_support));
}

#[test]
fn swap_count_tracks_stride_period() {
    let p = WalkerParams::default();
    for duration in [2.0, 3.3, 7.0] {
        let trace = simulate_walker(&p, duration, H).unwrap();
        let expected = (2.0 * duration / p.stride_period).floor() as i64;
        assert!((trace.swaps() as i64 - expected).abs() <= 1, "{duration}: {}", trace.swaps());
    }
}

#[test]
fn upright_trunk_falls_backward() {
    let p = WalkerParams {
        lean: 0.0,
        ..WalkerParams::default()
    };
    let trace = simulate_walker(&p, 10.0, H).unwrap();
    assert_eq!(
        trace.events.last().map(|e| e.kind),
        Some(WalkEventKind::FallBackward)
    );
}

#[test]
fn frozen_swing_never_swaps_and_falls() {
    let p = WalkerParams {
        swing_rate_max: 0.0,
        ..WalkerParams::default()
    };
    let trace = simulate_walker(&p, 5.0, H).unwrap();
    assert_eq!(trace.swaps(), 0);
    assert!(trace.fell());
    assert!(trace.events[0].t < 5.0);
}

#[test]
fn one_stride_returns_support_after_two_swaps() {
    let p = WalkerParams::default();
    let trace = simulate_walker(&p, p.stride_period, H).unwrap();
    assert_eq!(trace.swaps(), 2);
    assert_eq!(trace.samples.last().unwrap().support, trace.samples[0].support);
}

#[test]
fn leg_states_cycle_in_order_over_a_stride() {
    let p = WalkerParams::default();
    let trace = simulate_walker(&p, 3.0, H).unwrap();
    let window: Vec<_> = trace
        .samples
        .iter()
        .filter(|s| s.t > 0.5 * p.stride_period && s.t < 1.5 * p.stride_period - 1e-9)
        .collect();
    for pick in [|s: &&WalkSample| s.left_state, |s: &&WalkSample| s.right_state] {
        let mut seq: Vec<LegState> = Vec::new();
        for s in &window {
            let st = pick(s);
            if seq.last() != Some(&st) {
                seq.push(st);
            }
        }
        assert_eq!(seq.len(), 4, "{seq:?}");
        for pair in seq.windows(2) {
            assert_eq!(pair[0].next(), pair[1]);
        }
    }
}

#[test]
fn forward_progress_across_strides() {
    let p = WalkerParams::default();
    let trace = simulate_walker(&p, 10.0, H).unwrap();
    let mut last = f64::NEG_INFINITY;
    for e in &trace.events {
        let s = trace.samples.iter().find(|s| s.t >= e.t).unwrap();
        assert!(s.com_x >= last);
        last = s.com_x;
    }
    assert!(trace.samples.windows(2).all(|w| w[1].com_x >= w[0].com_x));
}

#[test]
fn lip_numeric_matches_closed_form() {
    let p = WalkerParams::default();
    let g_over_z = p.gravity / p.com_height;
    let sys = FnSystem::new(2, move |_, y: &[f64], out: &mut [f64]| {
        out[0] = y[1];
        out[1] = g_over_z * y[0];
    });
    for (x0, v0) in [(0.1, 0.0), (-0.3, 1.2), (0.05, -0.4)] {
        let y = integrate_span(&sys, 0.0, &[x0, v0], H, 1.0).unwrap();
        let (x, v) = lip_closed_form(x0, v0, 1.0, &p);
        assert!((y[0] - x).abs() < 1e-7);
        assert!((y[1] - v).abs() < 1e-7);
        let e0 = orbital_energy(x0, v0, &p);
        assert!((orbital_energy(y[0], y[1], &p) - e0).abs() < 1e-6);
        assert!((orbital_energy(x, v, &p) - e0).abs() < 1e-9);
    }
}

#[test]
fn pendulum_work_energy_balance() {
    // Hold the leg length fixed with the exact axial force and drive the
    // pivot with a constant torque; the energy gain must equal the work done.
    let p = WalkerParams {
        mass: 1.0,
        ..WalkerParams::default()
    };
    let tau = 0.4;
    let sys = FnSystem::new(5, move |_, y: &[f64], out: &mut [f64]| {
        let s = PendulumState {
            r: 1.0,
            theta: y[0],
            rdot: 0.0,
            thetadot: y[1],
        };
        let f = p.mass * (p.gravity * y[0].cos() - y[1] * y[1]);
        let d = pendulum_derivative(&s, tau, f, &p).unwrap();
        out[0] = d[0];
        out[1] = d[1];
        out[2] = 0.0;
        out[3] = 0.0;
        out[4] = tau * y[1];
    });
    let energy = |theta: f64, thetadot: f64| {
        0.5 * p.mass * thetadot * thetadot + p.mass * p.gravity * theta.cos()
    };
    let y = integrate_span(&sys, 0.0, &[-0.2, 0.5, 0.0, 0.0, 0.0], H, 1.0).unwrap();
    let gained = energy(y[0], y[1]) - energy(-0.2, 0.5);
    assert!((gained - y[4]).abs() < 1e-6, "{gained} vs {}", y[4]);
}
