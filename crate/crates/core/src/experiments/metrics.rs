use crate::error::{Error, Result};

use super::RunLog;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub iae: f64,
    pub ise: f64,
    /// First logged time with `|theta - theta_star| < tol`, on the simulation
    /// clock (so never earlier than the log start).
    pub t_hit: Option<f64>,
    pub e_ss: f64,
    pub log_start: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsConfig {
    pub theta_star: f64,
    pub tol: f64,
    pub r_star: f64,
    pub tail_frac: f64,
}

/// Trapezoidal integral of `f(theta - theta_star)` on the log's time grid.
fn trapezoid(t: &[f64], theta: &[f64], theta_star: f64, f: impl Fn(f64) -> f64) -> f64 {
    t.windows(2)
        .zip(theta.windows(2))
        .map(|(tw, th)| 0.5 * (tw[1] - tw[0]) * (f(th[0] - theta_star) + f(th[1] - theta_star)))
        .sum()
}

/// IAE, ISE, first hitting time and range-normalised steady-state cost error.
pub fn compute_metrics(log: &RunLog, cfg: &MetricsConfig) -> Result<Metrics> {
    if log.is_empty() {
        return Err(Error::invalid("empty run log"));
    }
    if !(cfg.tail_frac > 0.0 && cfg.tail_frac <= 1.0) {
        return Err(Error::invalid(format!(
            "tail_frac must be in (0, 1], got {}",
            cfg.tail_frac
        )));
    }
    let iae = trapezoid(&log.t, &log.theta, cfg.theta_star, f64::abs);
    let ise = trapezoid(&log.t, &log.theta, cfg.theta_star, |e| e * e);
    let t_hit = log
        .t
        .iter()
        .zip(&log.theta)
        .find(|(_, th)| (*th - cfg.theta_star).abs() < cfg.tol)
        .map(|(t, _)| *t);

    let n = log.len();
    let tail = ((cfg.tail_frac * n as f64).ceil() as usize).clamp(1, n);
    let r_bar = log.r[n - tail..].iter().sum::<f64>() / tail as f64;
    let (lo, hi) = log
        .r
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
            (lo.min(r), hi.max(r))
        });
    let range = hi - lo;
    if !(range > 0.0) {
        return Err(Error::UndefinedMetric(
            "cost range is zero, e_ss is undefined".into(),
        ));
    }
    let e_ss = (r_bar - cfg.r_star).abs() / range;
    Ok(Metrics {
        iae,
        ise,
        t_hit,
        e_ss,
        log_start: log.t[0],
    })
}

/// Moving average with a centred window; returns the `n - window + 1` fully
/// covered points paired with the centre abscissa.
pub fn moving_average(points: &[(f64, f64)], window: usize) -> Vec<(f64, f64)> {
    if window == 0 || points.len() < window {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(points.len() - window + 1);
    let mut acc: f64 = points[..window].iter().map(|p| p.1).sum();
    let half = window / 2;
    out.push((points[half].0, acc / window as f64));
    for i in window..points.len() {
        acc += points[i].1 - points[i - window].1;
        out.push((points[i - window + 1 + half].0, acc / window as f64));
    }
    out
}

/// Fraction of slope sign changes in excess of the single change a unimodal
/// map is allowed. 0 means the smoothed map is monotone or has one basin.
pub fn convexity_score(map: &[(f64, f64)], smoothing_window: usize) -> Result<f64> {
    if smoothing_window == 0 || map.len() < smoothing_window.max(3) {
        return Err(Error::invalid(format!(
            "convexity score needs at least {} points, got {}",
            smoothing_window.max(3),
            map.len()
        )));
    }
    let mut sorted = map.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let smooth = moving_average(&sorted, smoothing_window);
    let signs: Vec<f64> = smooth
        .windows(2)
        .map(|w| w[1].1 - w[0].1)
        .filter(|d| *d != 0.0)
        .map(f64::signum)
        .collect();
    if signs.len() < 2 {
        return Ok(0.0);
    }
    let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
    Ok(changes.saturating_sub(1) as f64 / (signs.len() - 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_from(t: Vec<f64>, theta: Vec<f64>, r: Vec<f64>) -> RunLog {
        let n = t.len();
        RunLog {
            t,
            x_true: vec![0.0; n],
            y_true: vec![0.0; n],
            x_meas: vec![0.0; n],
            y_meas: vec![0.0; n],
            y_out: vec![0.0; n],
            r,
            theta,
            epsilon: vec![1.0; n],
        }
    }

    fn grid(t0: f64, t1: f64, n: usize) -> Vec<f64> {
        (0..=n)
            .map(|i| t0 + (t1 - t0) * i as f64 / n as f64)
            .collect()
    }

    fn cfg(r_star: f64) -> MetricsConfig {
        MetricsConfig {
            theta_star: -3.0,
            tol: 0.25,
            r_star,
            tail_frac: 0.3,
        }
    }

    #[test]
    fn on_target_is_zero_error() {
        let t = grid(100.0, 110.0, 100);
        let r: Vec<f64> = t.iter().map(|v| v.sin()).collect();
        let m = compute_metrics(&log_from(t.clone(), vec![-3.0; t.len()], r), &cfg(0.0)).unwrap();
        assert_eq!((m.iae, m.ise), (0.0, 0.0));
        assert_eq!(m.t_hit, Some(100.0));
        assert_eq!(m.log_start, 100.0);
    }

    #[test]
    fn constant_offset() {
        let t = grid(0.0, 10.0, 2000);
        let r = t.clone();
        let m = compute_metrics(&log_from(t.clone(), vec![-2.0; t.len()], r), &cfg(0.0)).unwrap();
        assert!((m.iae - 10.0).abs() < 1e-12);
        assert!((m.ise - 10.0).abs() < 1e-12);
        assert_eq!(m.t_hit, None);
    }

    #[test]
    fn constant_cost_is_undefined() {
        let t = grid(0.0, 1.0, 10);
        let n = t.len();
        let err = compute_metrics(&log_from(t, vec![0.0; n], vec![2.0; n]), &cfg(0.0)).unwrap_err();
        assert!(matches!(err, Error::UndefinedMetric(_)));
    }

    #[test]
    fn e_ss_uses_tail_mean() {
        // r = 0 for the first 70%, 1 for the last 30%; range 1.
        let t = grid(0.0, 9.0, 9);
        let r = vec![0., 0., 0., 0., 0., 0., 0., 1., 1., 1.];
        let m = compute_metrics(&log_from(t, vec![0.0; 10], r), &cfg(0.25)).unwrap();
        assert!((m.e_ss - 0.75).abs() < 1e-15);
    }

    #[test]
    fn empty_log_is_error() {
        assert!(compute_metrics(&log_from(vec![], vec![], vec![]), &cfg(0.0)).is_err());
    }

    #[test]
    fn convexity_examples() {
        let parabola: Vec<(f64, f64)> = (0..400)
            .map(|i| {
                let x = -5.0 + i as f64 * 0.025;
                (x, (x + 3.0).powi(2))
            })
            .collect();
        assert_eq!(convexity_score(&parabola, 51).unwrap(), 0.0);
        let line: Vec<(f64, f64)> = (0..400).map(|i| (i as f64, 2.0 * i as f64)).collect();
        assert_eq!(convexity_score(&line, 51).unwrap(), 0.0);
        // Noise alternating every 60 samples with amplitude far above the local slope.
        let noisy: Vec<(f64, f64)> = parabola
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| (x, y + if (i / 60) % 2 == 0 { 3.0 } else { -3.0 }))
            .collect();
        assert!(convexity_score(&noisy, 51).unwrap() > 0.0);
        assert!(convexity_score(&parabola[..10], 51).is_err());
    }

    #[test]
    fn moving_average_centres() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, i as f64)).collect();
        assert_eq!(
            moving_average(&pts, 3),
            vec![(1.0, 1.0), (2.0, 2.0), (3.0, 3.0)]
        );
    }
}
