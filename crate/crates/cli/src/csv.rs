//! CSV export of simulation traces.
//!
//! Every trace is written as a header row, one row per sample and then one
//! `#event,<t>,<kind>` line per recorded event. Floats carry 15 significant
//! digits.

use std::io::{self, Write};

use gait_lab::analysis::ApexState;
use gait_lab::crawl::CrawlTrace;
use gait_lab::slip::HopTrace;
use gait_lab::walk::WalkTrace;

pub const SLIP_HEADER: &str = "t,phase,x,z,xdot,zdot,l,theta";
pub const WALKER_HEADER: &str = "t,support,com_x,com_xdot,left_state,right_state";
pub const CRAWLER_HEADER: &str = "t,drive,com_x,com_xdot,q11,q12,q23,q24,f_FR,f_HL";
pub const FIXED_POINT_HEADER: &str = "z_apex,xdot_apex,theta_td,residual_z,residual_xdot";

const SIGNIFICANT_DIGITS: usize = 15;

/// Formats `v` with 15 significant digits, in the style of C's `%.15g`.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if (-4..SIGNIFICANT_DIGITS as i32).contains(&exp) {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_fraction(format!("{v:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_fraction(mantissa.to_string()))
    }
}

fn trim_fraction(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn row(out: &mut dyn Write, t: f64, label: &str, values: &[f64]) -> io::Result<()> {
    write!(out, "{},{label}", format_float(t))?;
    for v in values {
        write!(out, ",{}", format_float(*v))?;
    }
    writeln!(out)
}

fn event(out: &mut dyn Write, t: f64, kind: &str) -> io::Result<()> {
    writeln!(out, "#event,{},{kind}", format_float(t))
}

pub fn write_slip(trace: &HopTrace, out: &mut dyn Write) -> io::Result<()> {
    writeln!(out, "{SLIP_HEADER}")?;
    for s in &trace.samples {
        row(
            out,
            s.t,
            s.phase.as_str(),
            &[s.x, s.z, s.xdot, s.zdot, s.l, s.theta],
        )?;
    }
    for e in &trace.events {
        event(out, e.t, e.kind.as_str())?;
    }
    Ok(())
}

pub fn write_walker(trace: &WalkTrace, out: &mut dyn Write) -> io::Result<()> {
    writeln!(out, "{WALKER_HEADER}")?;
    for s in &trace.samples {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            format_float(s.t),
            s.support.as_str(),
            format_float(s.com_x),
            format_float(s.com_xdot),
            s.left_state.as_str(),
            s.right_state.as_str()
        )?;
    }
    for e in &trace.events {
        event(out, e.t, e.kind.as_str())?;
    }
    Ok(())
}

pub fn write_crawler(trace: &CrawlTrace, out: &mut dyn Write) -> io::Result<()> {
    writeln!(out, "{CRAWLER_HEADER}")?;
    for s in &trace.samples {
        let a = &s.angles;
        row(
            out,
            s.t,
            s.drive.as_str(),
            &[
                s.com_x,
                s.com_xdot,
                a.q11,
                a.q12,
                a.q23,
                a.q24,
                s.forces.f_fr,
                s.forces.f_hl,
            ],
        )?;
    }
    for e in &trace.events {
        event(out, e.t, e.kind.as_str())?;
    }
    Ok(())
}

/// Writes a fixed point and the residual of one more map application.
pub fn write_fixed_point(found: Option<(&ApexState, &ApexState)>, out: &mut dyn Write) -> io::Result<()> {
    writeln!(out, "{FIXED_POINT_HEADER}")?;
    if let Some((fp, next)) = found {
        let values = [
            fp.z_apex,
            fp.xdot_apex,
            fp.theta_td,
            next.z_apex - fp.z_apex,
            next.xdot_apex - fp.xdot_apex,
        ];
        let cells: Vec<String> = values.iter().map(|v| format_float(*v)).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_examples() {
        assert_eq!(format_float(0.0), "0");
        assert_eq!(format_float(-0.0), "0");
        assert_eq!(format_float(1.0), "1");
        assert_eq!(format_float(0.1), "0.1");
        assert_eq!(format_float(-2.5), "-2.5");
        assert_eq!(format_float(1e-4), "0.0001");
        assert_eq!(format_float(1e-5), "1e-5");
        assert_eq!(format_float(123456789012345.0), "123456789012345");
        assert_eq!(format_float(1e15), "1e15");
        assert_eq!(format_float(std::f64::consts::PI), "3.14159265358979");
        assert_eq!(format_float(0.999999999999999999), "1");
    }

    #[test]
    fn formatted_values_round_trip_to_fifteen_digits() {
        for &v in &[0.4515236405432, -1234.567890123456, 6.02e23, 1.6e-19, 9.81] {
            let back: f64 = format_float(v).parse().unwrap();
            assert!(((back - v) / v).abs() < 1e-14, "{v} -> {back}");
        }
    }

    #[test]
    fn empty_trace_is_header_only() {
        let mut buf = Vec::new();
        write_slip(&HopTrace::default(), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{SLIP_HEADER}\n"));
    }
}
