use gait_lab::crawl::*;

const DT: f64 = 1e-3;

#[test]
fn default_crawl_moves_forward_every_cycle() {
    let p = QuadParams::default();
    let trace = simulate_crawler(&p, 10.0 * p.crawl_period, DT).unwrap();
    assert!(!trace.fell(), "{:?}", trace.events.iter().find(|e| e.kind.is_fall()));
    let per_cycle = (p.crawl_period / DT).round() as usize;
    let xs: Vec<f64> = trace.samples.iter().step_by(per_cycle).map(|s| s.com_x).collect();
    assert_eq!(xs.len(), 11);
    for w in xs.windows(2) {
        assert!(w[1] - w[0] > 0.0, "{w:?}");
    }
}

#[test]
fn vertical_closure_holds_at_every_sample() {
    let p = QuadParams::default();
    let trace = simulate_crawler(&p, 10.0 * p.crawl_period, DT).unwrap();
    for s in &trace.samples {
        let (xddot, residual) = force_balance(&s.forces, &s.support_angles(), &p);
        assert!(residual.abs() < 1e-9, "t = {}: {residual}", s.t);
        assert!((xddot - s.com_xddot).abs() < 1e-12);
        assert!(s.forces.f_fr >= 0.0 && s.forces.f_hl >= 0.0);
    }
}

#[test]
fn drive_alternates_twice_per_period() {
    let p = QuadParams::default();
    let trace = simulate_crawler(&p, p.crawl_period, DT).unwrap();
    let kinds: Vec<_> = trace.events.iter().map(|e| e.kind).collect();
    assert_eq!(
        kinds,
        vec![
            CrawlEventKind::Plant(gait_lab::walk::Side::Left),
            CrawlEventKind::Plant(gait_lab::walk::Side::Right)
        ]
    );
}

#[test]
fn group_angles_stay_within_twice_the_amplitude() {
    let p = QuadParams::default();
    let trace = simulate_crawler(&p, 10.0 * p.crawl_period, DT).unwrap();
    let bound = 2.0 * p.drive_angle_amp;
    for s in &trace.samples {
        let (q1, q2) = group_angles(&s.angles);
        assert!(q1.abs() <= bound && q2.abs() <= bound, "t = {}: {q1} {q2}", s.t);
    }
}

#[test]
fn back_heavy_crawler_falls_within_two_cycles() {
    let p = QuadParams {
        fore_mass: 2.5,
        hind_mass: 4.0,
        ..QuadParams::default()
    };
    let trace = simulate_crawler(&p, 10.0 * p.crawl_period, DT).unwrap();
    let t = trace.fall_time().expect("back-heavy crawler should fall");
    assert!(t <= 2.0 * p.crawl_period);
}

#[test]
fn advance_is_deterministic() {
    let p = QuadParams::default();
    let a = simulate_crawler(&p, 3.0, DT).unwrap();
    let b = simulate_crawler(&p, 3.0, DT).unwrap();
    assert_eq!(a, b);
}
