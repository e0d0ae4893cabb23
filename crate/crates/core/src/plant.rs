//! Forced Van der Pol oscillator with drifting damping, tuned by `theta`.
//!
//! ```text
//! x' = y
//! y' = -eps(t) [ (x - x0)^2 - 1 - (theta - theta_star)^2 ] y - mu^2 (x - x0) + f(t)
//! eps(t) = eps0 + a_d sin(w_d t),   f(t) = a_f sin(w_f t)
//! ```

use crate::error::{Error, Result};

/// States with a component beyond this magnitude are treated as divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantParams {
    pub eps0_base: f64,
    pub drift_amp: f64,
    pub drift_freq: f64,
    pub force_amp: f64,
    pub force_freq: f64,
    pub mu: f64,
    pub x_offset: f64,
    pub theta_star: f64,
    pub dt: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            eps0_base: 1.0,
            drift_amp: 1.0,
            drift_freq: 0.005,
            force_amp: 2.2,
            force_freq: 4.5,
            mu: 1.0,
            x_offset: 6.0,
            theta_star: -3.0,
            dt: 0.005,
        }
    }
}

impl PlantParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!(
                "plant dt must be > 0, got {}",
                self.dt
            )));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::invalid(format!(
                "plant mu must be > 0, got {}",
                self.mu
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn damping(&self, t: f64) -> f64 {
        self.eps0_base + self.drift_amp * (self.drift_freq * t).sin()
    }

    #[inline]
    pub fn forcing(&self, t: f64) -> f64 {
        self.force_amp * (self.force_freq * t).sin()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

impl PlantState {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y, t: 0.0 }
    }

    fn is_bounded(&self) -> bool {
        self.x.is_finite()
            && self.y.is_finite()
            && self.x.abs() <= DIVERGENCE_LIMIT
            && self.y.abs() <= DIVERGENCE_LIMIT
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferenceParams {
    pub a1: f64,
    pub a2: f64,
    pub w1: f64,
    pub w2: f64,
    pub enabled: bool,
    /// Per-component switches for where the interference is added.
    pub on_position: bool,
    pub on_velocity: bool,
}

impl Default for InterferenceParams {
    fn default() -> Self {
        Self {
            a1: 10.5,
            a2: 11.1,
            w1: 3.2,
            w2: 7.8,
            enabled: true,
            on_position: true,
            on_velocity: true,
        }
    }
}

impl InterferenceParams {
    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w1 > 0.0 && self.w2 > 0.0) {
            return Err(Error::invalid("interference frequencies must be > 0"));
        }
        Ok(())
    }
}

/// Right-hand side of the first-order system at `state.t`.
#[inline]
pub fn derivative(state: &PlantState, theta: f64, p: &PlantParams) -> (f64, f64) {
    derivative_at(state.t, state.x, state.y, theta, p)
}

#[inline]
fn derivative_at(t: f64, x: f64, y: f64, theta: f64, p: &PlantParams) -> (f64, f64) {
    let dx = x - p.x_offset;
    let dth = theta - p.theta_star;
    let bracket = dx * dx - 1.0 - dth * dth;
    let dy = -p.damping(t) * bracket * y - p.mu * p.mu * dx + p.forcing(t);
    (y, dy)
}

/// One classical RK4 step of size `p.dt` with `theta` held over the step.
pub fn step(state: &PlantState, theta: f64, p: &PlantParams) -> Result<PlantState> {
    let h = p.dt;
    let (t, x, y) = (state.t, state.x, state.y);
    let (k1x, k1y) = derivative_at(t, x, y, theta, p);
    let (k2x, k2y) = derivative_at(t + 0.5 * h, x + 0.5 * h * k1x, y + 0.5 * h * k1y, theta, p);
    let (k3x, k3y) = derivative_at(t + 0.5 * h, x + 0.5 * h * k2x, y + 0.5 * h * k2y, theta, p);
    let (k4x, k4y) = derivative_at(t + h, x + h * k3x, y + h * k3y, theta, p);
    let next = PlantState {
        x: x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
        y: y + h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y),
        t: t + h,
    };
    if next.is_bounded() {
        Ok(next)
    } else {
        Err(Error::Diverged { last: *state })
    }
}

/// `i(t) = a1 sin(w1 t) + a2 sin(w2 t)`, or 0 when disabled.
#[inline]
pub fn interference(t: f64, ip: &InterferenceParams) -> f64 {
    if !ip.enabled {
        return 0.0;
    }
    ip.a1 * (ip.w1 * t).sin() + ip.a2 * (ip.w2 * t).sin()
}

/// Corrupted measurement of the state. The same scalar interference value is
/// added to each enabled component.
#[inline]
pub fn measure(state: &PlantState, ip: &InterferenceParams) -> (f64, f64) {
    let i = interference(state.t, ip);
    let xm = if ip.on_position { state.x + i } else { state.x };
    let ym = if ip.on_velocity { state.y + i } else { state.y };
    (xm, ym)
}
