//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::path::Path;
use std::process::Command;

use gait_lab::analysis::*;
use gait_lab::crawl::*;
use gait_lab::integrator::*;
use gait_lab::slip::*;
use gait_lab::walk::*;
use gait_lab_cli::plot::{render_svg, slip_panels};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !($cond) {
            return Err(format!($($msg)+));
        }
    };
}

fn fail(e: impl std::fmt::Display) -> String {
    e.to_string()
}

struct PolarStance(SlipParams);

impl OdeSystem for PolarStance {
    fn dimension(&self) -> usize {
        4
    }
    fn derivative(&self, _t: f64, y: &[f64], out: &mut [f64]) -> gait_lab::Result<()> {
        out.copy_from_slice(&stance_derivative(&StanceState::from_slice(y), &self.0)?);
        Ok(())
    }
}

fn ballistic_oracle() -> Outcome {
    let p = SlipParams::default();
    let sys = FnSystem::new(5, move |_, y: &[f64], out: &mut [f64]| {
        out.copy_from_slice(&flight_derivative(&FlightState::from_slice(y), &p));
    });
    let h = 1e-3;
    let mut y = vec![0.0, 0.5, 1.0, 0.0, 1.2];
    let mut worst: f64 = 0.0;
    for i in 1..=450 {
        y = integrate_step(&sys, (i - 1) as f64 * h, &y, h).map_err(fail)?;
        let t = i as f64 * h;
        worst = worst.max((y[2] - (1.0 - 0.5 * p.gravity * t * t)).abs());
    }
    ensure!(worst < 1e-8, "max |dz| = {worst:e}");
    ensure!((y[0] - 0.5 * 0.45).abs() < 1e-8, "x = {}", y[0]);
    Ok(format!("max |dz| = {worst:.2e} over 0.45 s"))
}

fn integrator_order() -> Outcome {
    let sys = FnSystem::new(1, |_, y: &[f64], out: &mut [f64]| out[0] = y[0]);
    let exact = 1f64.exp();
    let mut errors = Vec::new();
    for h in [0.1, 0.05, 0.025, 0.0125] {
        let y = integrate_span(&sys, 0.0, &[1.0], h, 1.0).map_err(fail)?;
        errors.push((y[0] - exact).abs());
    }
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    ensure!(
        ratios.iter().all(|r| (12.0..=20.0).contains(r)),
        "ratios {ratios:?}"
    );
    Ok(format!("error ratios {:.2} {:.2} {:.2}", ratios[0], ratios[1], ratios[2]))
}

fn one_passive_hop() -> Result<(SlipParams, HopTrace), String> {
    let p = SlipParams::default().passive();
    let start = FlightState {
        x: 0.0,
        xdot: 1.0,
        z: 1.05,
        zdot: 0.0,
        theta: 1.35,
    };
    let stop = SlipStop {
        max_time: 5.0,
        max_hops: 1,
    };
    let trace = simulate_slip(start, &p, stop, 1e-4).map_err(fail)?;
    Ok((p, trace))
}

fn passive_stance_energy() -> Outcome {
    let (p, trace) = one_passive_hop()?;
    ensure!(
        trace.count(HopEventKind::Touchdown) == 1 && trace.count(HopEventKind::Liftoff) == 1,
        "expected one full stance, events {:?}",
        trace.events
    );
    let stance: Vec<HopSample> = trace
        .samples
        .iter()
        .filter(|s| s.phase == Phase::Stance)
        .copied()
        .collect();
    ensure!(stance.len() > 100, "only {} stance samples", stance.len());
    let drift = max_relative_energy_drift(&stance, &p);
    ensure!(drift < 1e-6, "relative drift {drift:e}");
    Ok(format!("relative drift {drift:.2e} over {} stance samples", stance.len()))
}

fn polar_cartesian_agreement() -> Outcome {
    let p = SlipParams::default().passive();
    let theta: f64 = 1.2;
    let touchdown = FlightState {
        x: 0.0,
        xdot: 2.0,
        z: p.rest_length * theta.sin(),
        zdot: -1.0,
        theta,
    };
    let (s0, foot) = flight_to_stance(&touchdown, &p).map_err(fail)?;
    let h = 1e-4;
    let polar_sys = PolarStance(p);
    let cart_sys = CartesianStanceSystem(&p);
    let mut polar = s0.to_array().to_vec();
    // Cartesian chart: foot at the origin, x pointing the other way.
    let c0 = stance_to_flight(&s0, foot, &p);
    let mut cart = vec![foot - c0.x, c0.z, -c0.xdot, c0.zdot];
    let mut worst: f64 = 0.0;
    let mut t = 0.0;
    for _ in 0..100_000 {
        polar = integrate_step(&polar_sys, t, &polar, h).map_err(fail)?;
        cart = integrate_step(&cart_sys, t, &cart, h).map_err(fail)?;
        t += h;
        let s = StanceState::from_slice(&polar);
        let world = stance_to_flight(&s, foot, &p);
        worst = worst
            .max((foot - cart[0] - world.x).abs())
            .max((cart[1] - world.z).abs());
        if s.l >= p.rest_length && s.ldot > 0.0 {
            ensure!(worst < 1e-6, "max position gap {worst:e}");
            return Ok(format!("max position gap {worst:.2e} over {t:.4} s of stance"));
        }
    }
    Err("stance never ended".into())
}

fn forward_lean_reproduction() -> Outcome {
    let p = SlipParams::default();
    let start = FlightState {
        x: 0.0,
        xdot: 1.0,
        z: 1.05,
        zdot: 0.0,
        theta: 1.35,
    };
    let stop = SlipStop {
        max_time: 10.0,
        max_hops: 5,
    };
    let trace = simulate_slip(start, &p, stop, 1e-4).map_err(fail)?;
    let end = trace.samples.last().ok_or("empty trace")?;
    ensure!(end.x > start.x, "x(end) = {} not ahead of x(0)", end.x);
    let curves = extract_curves(&trace).map_err(fail)?;
    ensure!(curves.len() == trace.samples.len(), "curve length mismatch");
    let svg = render_svg(&slip_panels(&curves));
    let doc = roxmltree::Document::parse(&svg).map_err(fail)?;
    let panels = doc
        .descendants()
        .filter(|n| n.attribute("class") == Some("panel"))
        .count();
    ensure!(panels == 6, "{panels} panels");
    Ok(format!("x(end) = {:.4} m after 5 hops; 6-panel SVG", end.x))
}

fn lip_oracle() -> Outcome {
    let p = WalkerParams::default();
    let g_over_z = p.gravity / p.com_height;
    let sys = FnSystem::new(2, move |_, y: &[f64], out: &mut [f64]| {
        out[0] = y[1];
        out[1] = g_over_z * y[0];
    });
    let mut worst_x: f64 = 0.0;
    let mut worst_e: f64 = 0.0;
    for (x0, v0) in [(0.1, 0.0), (-0.3, 1.2), (0.05, -0.4)] {
        let y = integrate_span(&sys, 0.0, &[x0, v0], 1e-4, 1.0).map_err(fail)?;
        let (x, v) = lip_closed_form(x0, v0, 1.0, &p);
        worst_x = worst_x.max((y[0] - x).abs()).max((y[1] - v).abs());
        worst_e = worst_e.max((orbital_energy(y[0], y[1], &p) - orbital_energy(x0, v0, &p)).abs());
    }
    ensure!(worst_x < 1e-7, "closed-form gap {worst_x:e}");
    ensure!(worst_e < 1e-6, "orbital energy drift {worst_e:e}");
    Ok(format!("closed-form gap {worst_x:.2e}, energy drift {worst_e:.2e}"))
}

fn walker_gait() -> Outcome {
    let p = WalkerParams::default();
    let trace = simulate_walker(&p, 10.0, 1e-4).map_err(fail)?;
    ensure!(!trace.fell(), "default walker fell: {:?}", trace.events.last());
    ensure!(trace.strides() >= 10, "{} strides", trace.strides());
    ensure!(
        trace.samples.iter().all(|s| s.single_support),
        "a sample without exactly one support leg"
    );
    let upright = WalkerParams {
        lean: 0.0,
        ..WalkerParams::default()
    };
    let fallen = simulate_walker(&upright, 10.0, 1e-4).map_err(fail)?;
    let fall = fallen.events.iter().find(|e| e.kind.is_fall());
    ensure!(fall.is_some(), "no fall without lean");
    ensure!(
        fallen.samples.iter().all(|s| s.single_support),
        "upright walker lost single support"
    );
    Ok(format!(
        "{} strides in 10 s; lean 0 gives {} at t = {:.3} s",
        trace.strides(),
        fall.unwrap().kind.as_str(),
        fall.unwrap().t
    ))
}

fn quadruped_crawl() -> Outcome {
    let equal = QuadParams {
        fore_mass: 3.0,
        hind_mass: 3.0,
        ..QuadParams::default()
    };
    let a = SwingAngles {
        q11: FRAC_PI_4,
        q12: 0.0,
        q23: -FRAC_PI_4,
        q24: FRAC_PI_4,
    };
    let f = load_split(&a, 0.2, -0.2, 0.0, &equal).map_err(fail)?;
    let (xddot, residual) = force_balance(&f, &a, &equal);
    ensure!(xddot.abs() < 1e-12, "symmetric xddot {xddot:e}");
    ensure!(residual.abs() < 1e-9, "symmetric residual {residual:e}");

    let p = QuadParams::default();
    let cycles = 10;
    let trace = simulate_crawler(&p, cycles as f64 * p.crawl_period, 1e-3).map_err(fail)?;
    ensure!(!trace.fell(), "default crawl fell at {:?}", trace.fall_time());
    let worst = trace
        .samples
        .iter()
        .map(|s| {
            let (_, r) = force_balance(&s.forces, &s.support_angles(), &p);
            r.abs()
        })
        .fold(0.0, f64::max);
    ensure!(worst < 1e-9, "max vertical residual {worst:e}");
    let x_at = |t: f64| {
        trace
            .samples
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            .map(|s| s.com_x)
            .unwrap_or(f64::NAN)
    };
    let mut min_gain = f64::INFINITY;
    for k in 0..cycles {
        let gain = x_at((k + 1) as f64 * p.crawl_period) - x_at(k as f64 * p.crawl_period);
        ensure!(gain > 0.0, "cycle {k} moved {gain}");
        min_gain = min_gain.min(gain);
    }

    let back_heavy = QuadParams {
        fore_mass: 2.5,
        hind_mass: 4.0,
        ..QuadParams::default()
    };
    let fallen = simulate_crawler(&back_heavy, 2.0 * p.crawl_period, 1e-3).map_err(fail)?;
    let t_fall = fallen.fall_time().ok_or("back-heavy crawler did not fall")?;
    ensure!(t_fall <= 2.0 * back_heavy.crawl_period, "fell late at {t_fall}");
    Ok(format!(
        "residual {worst:.1e}, min gain per cycle {min_gain:.4} m, back-heavy falls at {t_fall:.3} s"
    ))
}

fn periodic_gait() -> Outcome {
    let p = SlipParams::default().passive();
    let seed = ApexState {
        z_apex: 1.2,
        xdot_apex: 0.0,
        theta_td: FRAC_PI_2,
    };
    let h = 1e-4;
    let fixed = find_periodic_gait(&seed, &p, h).map_err(fail)?;
    let next = apex_map(&fixed, &p, h).map_err(fail)?;
    let gap = (next.z_apex - fixed.z_apex)
        .abs()
        .max((next.xdot_apex - fixed.xdot_apex).abs());
    ensure!(gap < 1e-8, "fixed-point residual {gap:e}");
    let mut a = fixed;
    for _ in 0..20 {
        a = apex_map(&a, &p, h).map_err(fail)?;
    }
    let drift = (a.z_apex - fixed.z_apex).abs();
    ensure!(drift < 1e-4, "20-cycle drift {drift:e}");
    Ok(format!("residual {gap:.1e}, 20-cycle drift {drift:.1e} m"))
}

fn gait_lab(args: &[&str]) -> Result<std::process::Output, String> {
    Command::new(env!("CARGO_BIN_EXE_gait-lab"))
        .args(args)
        .output()
        .map_err(fail)
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn cli_behaviour() -> Outcome {
    let dir = tempfile::tempdir().map_err(fail)?;
    let config = dir.path().join("run.conf");
    std::fs::write(&config, "# five hops\nhops = 5\nstiffness = 20000\n").map_err(fail)?;
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = gait_lab(&["slip", "--config", path_str(&config), "--out", path_str(out)])?;
        ensure!(o.status.code() == Some(0), "slip exit {:?}", o.status.code());
    }
    let (a, b) = (std::fs::read(&a).map_err(fail)?, std::fs::read(&b).map_err(fail)?);
    ensure!(!a.is_empty() && a == b, "runs differ");

    let o = gait_lab(&["slip", "--mass", "-1"])?;
    let stderr = String::from_utf8_lossy(&o.stderr);
    ensure!(o.status.code() == Some(1), "--mass -1 exit {:?}", o.status.code());
    ensure!(stderr.lines().count() == 1 && stderr.contains("mass"), "diagnostic {stderr:?}");

    let w = dir.path().join("w.csv");
    let o = gait_lab(&["walker", "--lean", "0", "--duration", "10", "--out", path_str(&w)])?;
    ensure!(o.status.code() == Some(2), "fall exit {:?}", o.status.code());
    let text = std::fs::read_to_string(&w).map_err(fail)?;
    ensure!(text.lines().count() > 2, "no partial trace");
    ensure!(text.contains("#event,") && text.contains("fall_"), "fall not recorded");
    Ok(format!("byte-identical {} B traces; exit codes 1 and 2 as specified", a.len()))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("ballistic flight matches the parabola", ballistic_oracle),
        ("integrator error is fourth order", integrator_order),
        ("passive stance conserves energy", passive_stance_energy),
        ("polar and Cartesian stance agree", polar_cartesian_agreement),
        ("running model drifts forward; curves and SVG", forward_lean_reproduction),
        ("linear pendulum matches closed form", lip_oracle),
        ("walker strides, falls without lean, single support", walker_gait),
        ("quadruped balance, progress and back-heavy fall", quadruped_crawl),
        ("periodic hopping fixed point", periodic_gait),
        ("command line determinism and exit codes", cli_behaviour),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failures += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
