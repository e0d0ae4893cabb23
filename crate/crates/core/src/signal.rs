//! Cost transducers, the amplitude detector and the relay extremum-seeking
//! update.

use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::lifting::KoopmanModel;

/// `||(x_m, y_m)||_2 / sqrt(2)`.
#[inline]
pub fn raw_cost(x_m: f64, y_m: f64) -> f64 {
    x_m.hypot(y_m) / SQRT_2
}

/// Energy of the measured state in the model's dominant Koopman subspace.
#[inline]
pub fn lifted_cost(x_m: f64, y_m: f64, model: &KoopmanModel) -> f64 {
    model.project_energy(x_m, y_m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    /// High-pass corner, rad/s.
    pub w_hp: f64,
    /// Low-pass corner, rad/s.
    pub w_lp: f64,
    pub dt: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            w_hp: 1.0,
            w_lp: 0.2,
            dt: 0.005,
        }
    }
}

/// Discrete first-order filter coefficients of the detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorCoeffs {
    pub alpha_hp: f64,
    pub alpha_lp: f64,
}

impl DetectorConfig {
    pub fn coeffs(&self) -> Result<DetectorCoeffs> {
        if !(self.w_hp > 0.0 && self.w_lp > 0.0 && self.dt > 0.0) {
            return Err(Error::invalid(format!(
                "detector corners and dt must be > 0 (w_hp={}, w_lp={}, dt={})",
                self.w_hp, self.w_lp, self.dt
            )));
        }
        Ok(DetectorCoeffs {
            alpha_hp: (-self.w_hp * self.dt).exp(),
            alpha_lp: (-self.w_lp * self.dt).exp(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DetectorState {
    pub y_hp_prev: f64,
    pub y_lp_prev: f64,
    pub y_out_prev: f64,
    pub initialized: bool,
}

/// High-pass, square, low-pass. The first sample seeds the difference memory
/// so the first high-pass input is zero.
#[inline]
pub fn detector_step(y_out: f64, st: &DetectorState, c: &DetectorCoeffs) -> (f64, DetectorState) {
    let prev = if st.initialized { st.y_out_prev } else { y_out };
    let y_hp = c.alpha_hp * st.y_hp_prev + (1.0 - c.alpha_hp) * (y_out - prev);
    let y_lp = c.alpha_lp * st.y_lp_prev + (1.0 - c.alpha_lp) * y_hp * y_hp;
    let next = DetectorState {
        y_hp_prev: y_hp,
        y_lp_prev: y_lp,
        y_out_prev: y_out,
        initialized: true,
    };
    (y_lp.max(0.0), next)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelayConfig {
    /// Parameter change per update.
    pub step_k: f64,
    /// Minimum time between direction flips, s.
    pub dwell_limit: f64,
    /// Time constant of the cost-change high-pass, s.
    pub tau_f: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub theta_init: f64,
    /// Initial direction sign, +1 or -1.
    pub epsilon_init: f64,
}

impl RelayConfig {
    /// Defaults with `step_k = dt / 15`.
    pub fn for_dt(dt: f64) -> Self {
        Self {
            step_k: dt / 15.0,
            dwell_limit: 15.0,
            tau_f: 10.0,
            theta_min: -5.0,
            theta_max: 5.0,
            theta_init: 2.0,
            epsilon_init: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_k >= 0.0) {
            return Err(Error::invalid("relay step_k must be >= 0"));
        }
        if !(self.dwell_limit >= 0.0) {
            return Err(Error::invalid("relay dwell_limit must be >= 0"));
        }
        if !(self.tau_f > 0.0) {
            return Err(Error::invalid("relay tau_f must be > 0"));
        }
        if !(self.theta_min < self.theta_max) {
            return Err(Error::invalid("relay theta_min must be < theta_max"));
        }
        if self.epsilon_init != 1.0 && self.epsilon_init != -1.0 {
            return Err(Error::invalid("relay epsilon_init must be +1 or -1"));
        }
        Ok(())
    }
}

impl Default for RelayConfig {
    fn default() -> Self {
        Self::for_dt(0.005)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelayState {
    pub theta: f64,
    pub epsilon: f64,
    pub hp_prev: f64,
    pub r_prev: f64,
    pub dwell_elapsed: f64,
    pub initialized: bool,
}

impl RelayState {
    /// Starts with a full dwell budget so the first rising cost can flip.
    pub fn new(cfg: &RelayConfig) -> Self {
        Self {
            theta: cfg.theta_init.clamp(cfg.theta_min, cfg.theta_max),
            epsilon: cfg.epsilon_init,
            hp_prev: 0.0,
            r_prev: 0.0,
            dwell_elapsed: cfg.dwell_limit,
            initialized: false,
        }
    }
}

/// One relay update: high-pass the cost change, flip direction on a rise once
/// the dwell time has elapsed, then step `theta` against the direction.
#[inline]
pub fn relay_step(r: f64, st: &RelayState, cfg: &RelayConfig, dt: f64) -> RelayState {
    let alpha = (-dt / cfg.tau_f).exp();
    let r_prev = if st.initialized { st.r_prev } else { r };
    let hp = alpha * st.hp_prev + (1.0 - alpha) * (r - r_prev);
    let (epsilon, dwell_elapsed) = if hp > 0.0 && st.dwell_elapsed >= cfg.dwell_limit {
        (-st.epsilon, 0.0)
    } else {
        (st.epsilon, st.dwell_elapsed + dt)
    };
    let theta = (st.theta - cfg.step_k * epsilon).clamp(cfg.theta_min, cfg.theta_max);
    RelayState {
        theta,
        epsilon,
        hp_prev: hp,
        r_prev: r,
        dwell_elapsed,
        initialized: true,
    }
}
