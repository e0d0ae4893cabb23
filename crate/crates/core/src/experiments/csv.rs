//! CSV and text emitters for run logs, static maps and metrics.

use std::io::Write;

use super::{Metrics, RunLog, StaticMap};
use crate::error::Result;

pub const RUN_LOG_HEADER: &str = "t,x_true,y_true,x_meas,y_meas,y_out,r,theta,epsilon";
pub const STATIC_MAP_HEADER: &str = "theta,r";
pub const METRICS_HEADER: &str = "method,iae,ise,t_hit,e_ss";

/// Formats like C's `%.*g`: `sig` significant digits, trailing zeros removed,
/// scientific notation outside `1e-5 <= |v| < 10^sig`.
pub fn fmt_sig(v: f64, sig: usize) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{:.*e}", sig - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= sig as i32 {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn g12(v: f64) -> String {
    fmt_sig(v, 12)
}

pub fn write_run_log<W: Write>(log: &RunLog, mut w: W) -> Result<()> {
    let mut out = String::with_capacity(log.len() * 120);
    out.push_str(RUN_LOG_HEADER);
    out.push('\n');
    for i in 0..log.len() {
        let row = [
            log.t[i],
            log.x_true[i],
            log.y_true[i],
            log.x_meas[i],
            log.y_meas[i],
            log.y_out[i],
            log.r[i],
            log.theta[i],
            log.epsilon[i],
        ];
        let cells: Vec<String> = row.iter().map(|&v| g12(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    w.write_all(out.as_bytes())?;
    Ok(())
}

pub fn write_static_map<W: Write>(map: &StaticMap, mut w: W) -> Result<()> {
    let mut out = String::with_capacity(map.points.len() * 40);
    out.push_str(STATIC_MAP_HEADER);
    out.push('\n');
    for &(theta, r) in &map.points {
        out.push_str(&g12(theta));
        out.push(',');
        out.push_str(&g12(r));
        out.push('\n');
    }
    w.write_all(out.as_bytes())?;
    Ok(())
}

fn t_hit_cell(m: &Metrics) -> String {
    m.t_hit
        .map(g12)
        .unwrap_or_else(|| "not_reached".to_string())
}

/// Flat `key=value` block.
pub fn metrics_block(m: &Metrics) -> String {
    format!(
        "iae={}\nise={}\nt_hit={}\ne_ss={}\nlog_start={}\n",
        g12(m.iae),
        g12(m.ise),
        t_hit_cell(m),
        g12(m.e_ss),
        g12(m.log_start)
    )
}

/// One CSV row matching [`METRICS_HEADER`].
pub fn metrics_row(method: &str, m: &Metrics) -> String {
    format!(
        "{method},{},{},{},{}",
        g12(m.iae),
        g12(m.ise),
        t_hit_cell(m),
        g12(m.e_ss)
    )
}
