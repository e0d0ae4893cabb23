//! Flat `key = value` configuration with dotted keys (`plant.mu = 1.0`).
//!
//! Every key has a default; a file only lists overrides. Unknown keys,
//! duplicate keys and unparsable values are errors. `#` starts a comment.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::experiments::{MetricsConfig, RunConfig, SweepConfig, TrainingConfig};
use crate::lifting::{DEFAULT_N_MODES, DEFAULT_SVD_CUTOFF};
use crate::plant::{InterferenceParams, PlantParams};
use crate::signal::{DetectorConfig, RelayConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub plant: PlantParams,
    pub interference: InterferenceParams,
    pub training: TrainingConfig,
    pub w_hp: f64,
    pub w_lp: f64,
    pub relay: RelayConfig,
    /// `None` means `plant.dt / 15`.
    pub relay_step_k: Option<f64>,
    pub n_modes: usize,
    pub svd_cutoff: f64,
    pub sweep: SweepConfig,
    pub run: RunConfig,
    pub hit_tol: f64,
    pub tail_frac: f64,
    pub smoothing_window: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for Config {
    fn default() -> Self {
        let plant = PlantParams::default();
        let detector = DetectorConfig::default();
        Self {
            plant,
            interference: InterferenceParams::default(),
            training: TrainingConfig::default(),
            w_hp: detector.w_hp,
            w_lp: detector.w_lp,
            relay: RelayConfig::for_dt(plant.dt),
            relay_step_k: None,
            n_modes: DEFAULT_N_MODES,
            svd_cutoff: DEFAULT_SVD_CUTOFF,
            sweep: SweepConfig::default(),
            run: RunConfig::default(),
            hit_tol: 0.25,
            tail_frac: 0.30,
            smoothing_window: 51,
            seed: 0,
            output_dir: PathBuf::from("."),
        }
    }
}

enum Field<'a> {
    F64(&'a mut f64),
    OptF64(&'a mut Option<f64>),
    Usize(&'a mut usize),
    U64(&'a mut u64),
    Bool(&'a mut bool),
    Path(&'a mut PathBuf),
}

impl Config {
    fn fields(&mut self) -> Vec<(&'static str, Field<'_>)> {
        use Field::*;
        let p = &mut self.plant;
        let i = &mut self.interference;
        let t = &mut self.training;
        let r = &mut self.relay;
        vec![
            ("seed", U64(&mut self.seed)),
            ("output.dir", Path(&mut self.output_dir)),
            ("plant.eps0_base", F64(&mut p.eps0_base)),
            ("plant.drift_amp", F64(&mut p.drift_amp)),
            ("plant.drift_freq", F64(&mut p.drift_freq)),
            ("plant.force_amp", F64(&mut p.force_amp)),
            ("plant.force_freq", F64(&mut p.force_freq)),
            ("plant.mu", F64(&mut p.mu)),
            ("plant.x_offset", F64(&mut p.x_offset)),
            ("plant.theta_star", F64(&mut p.theta_star)),
            ("plant.dt", F64(&mut p.dt)),
            ("interference.a1", F64(&mut i.a1)),
            ("interference.a2", F64(&mut i.a2)),
            ("interference.w1", F64(&mut i.w1)),
            ("interference.w2", F64(&mut i.w2)),
            ("interference.enabled", Bool(&mut i.enabled)),
            ("interference.on_position", Bool(&mut i.on_position)),
            ("interference.on_velocity", Bool(&mut i.on_velocity)),
            ("training.n_trajectories", Usize(&mut t.n_trajectories)),
            ("training.traj_duration", F64(&mut t.traj_duration)),
            ("training.theta_min", F64(&mut t.theta_range.0)),
            ("training.theta_max", F64(&mut t.theta_range.1)),
            ("training.x_init_min", F64(&mut t.x_init_range.0)),
            ("training.x_init_max", F64(&mut t.x_init_range.1)),
            ("training.y_init_min", F64(&mut t.y_init_range.0)),
            ("training.y_init_max", F64(&mut t.y_init_range.1)),
            ("koopman.n_modes", Usize(&mut self.n_modes)),
            ("koopman.svd_cutoff", F64(&mut self.svd_cutoff)),
            ("detector.w_hp", F64(&mut self.w_hp)),
            ("detector.w_lp", F64(&mut self.w_lp)),
            ("relay.step_k", OptF64(&mut self.relay_step_k)),
            ("relay.dwell_limit", F64(&mut r.dwell_limit)),
            ("relay.tau_f", F64(&mut r.tau_f)),
            ("relay.theta_min", F64(&mut r.theta_min)),
            ("relay.theta_max", F64(&mut r.theta_max)),
            ("relay.theta_init", F64(&mut r.theta_init)),
            ("relay.epsilon_init", F64(&mut r.epsilon_init)),
            ("sweep.theta_from", F64(&mut self.sweep.theta_from)),
            ("sweep.theta_to", F64(&mut self.sweep.theta_to)),
            ("sweep.duration", F64(&mut self.sweep.duration)),
            ("run.duration", F64(&mut self.run.duration)),
            ("run.log_start", F64(&mut self.run.log_start)),
            ("run.x_init", F64(&mut self.run.x_init)),
            ("run.y_init", F64(&mut self.run.y_init)),
            ("metrics.hit_tol", F64(&mut self.hit_tol)),
            ("metrics.tail_frac", F64(&mut self.tail_frac)),
            (
                "metrics.smoothing_window",
                Usize(&mut self.smoothing_window),
            ),
        ]
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        let mut seen = std::collections::HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Config(format!("line {}: {msg}", lineno + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, found `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(err(format!("duplicate key `{key}`")));
            }
            let mut fields = cfg.fields();
            let (_, field) = fields
                .iter_mut()
                .find(|(k, _)| *k == key)
                .ok_or_else(|| err(format!("unknown key `{key}`")))?;
            let bad = |what: &str| err(format!("`{key}` expects {what}, found `{value}`"));
            match field {
                Field::F64(v) => **v = value.parse().map_err(|_| bad("a number"))?,
                Field::OptF64(v) => **v = Some(value.parse().map_err(|_| bad("a number"))?),
                Field::Usize(v) => {
                    **v = value.parse().map_err(|_| bad("a non-negative integer"))?
                }
                Field::U64(v) => **v = value.parse().map_err(|_| bad("a non-negative integer"))?,
                Field::Bool(v) => **v = value.parse().map_err(|_| bad("true or false"))?,
                Field::Path(v) => **v = PathBuf::from(value),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Every key with its current value; `parse(to_text())` reproduces `self`.
    pub fn to_text(&self) -> String {
        let mut copy = self.clone();
        let mut out = String::new();
        for (key, field) in copy.fields() {
            let _ = match field {
                Field::F64(v) => writeln!(out, "{key} = {v:?}"),
                Field::OptF64(v) => match v {
                    Some(v) => writeln!(out, "{key} = {v:?}"),
                    None => writeln!(out, "# {key} = plant.dt / 15"),
                },
                Field::Usize(v) => writeln!(out, "{key} = {v}"),
                Field::U64(v) => writeln!(out, "{key} = {v}"),
                Field::Bool(v) => writeln!(out, "{key} = {v}"),
                Field::Path(v) => writeln!(out, "{key} = {}", v.display()),
            };
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| match e {
            Error::InvalidInput(m) => Error::Config(m),
            other => other,
        };
        self.plant.validate().map_err(wrap)?;
        self.interference.validate().map_err(wrap)?;
        self.training().validate().map_err(wrap)?;
        self.relay().validate().map_err(wrap)?;
        self.detector().coeffs().map_err(wrap)?;
        if self.n_modes == 0 || self.n_modes > crate::lifting::P {
            return Err(Error::Config(format!(
                "koopman.n_modes must be in 1..=10, got {}",
                self.n_modes
            )));
        }
        if !(self.svd_cutoff > 0.0 && self.svd_cutoff < 1.0) {
            return Err(Error::Config("koopman.svd_cutoff must be in (0, 1)".into()));
        }
        for (key, v) in [
            ("sweep.duration", self.sweep.duration),
            ("run.duration", self.run.duration),
        ] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{key} must be > 0, got {v}")));
            }
            if !(self.run.log_start >= 0.0 && self.run.log_start < v) {
                return Err(Error::Config(format!(
                    "run.log_start must lie in [0, {key}), got {}",
                    self.run.log_start
                )));
            }
        }
        if !(self.hit_tol > 0.0) {
            return Err(Error::Config("metrics.hit_tol must be > 0".into()));
        }
        if !(self.tail_frac > 0.0 && self.tail_frac <= 1.0) {
            return Err(Error::Config("metrics.tail_frac must be in (0, 1]".into()));
        }
        if self.smoothing_window == 0 {
            return Err(Error::Config(
                "metrics.smoothing_window must be >= 1".into(),
            ));
        }
        Ok(())
    }

    pub fn training(&self) -> TrainingConfig {
        TrainingConfig {
            seed: self.seed,
            ..self.training
        }
    }

    pub fn detector(&self) -> DetectorConfig {
        DetectorConfig {
            w_hp: self.w_hp,
            w_lp: self.w_lp,
            dt: self.plant.dt,
        }
    }

    pub fn relay(&self) -> RelayConfig {
        RelayConfig {
            step_k: self.relay_step_k.unwrap_or(self.plant.dt / 15.0),
            ..self.relay
        }
    }

    /// The sweep shares the run's log start and initial state.
    pub fn sweep(&self) -> SweepConfig {
        SweepConfig {
            log_start: self.run.log_start,
            x_init: self.run.x_init,
            y_init: self.run.y_init,
            ..self.sweep
        }
    }

    pub fn metrics(&self, r_star: f64) -> MetricsConfig {
        MetricsConfig {
            theta_star: self.plant.theta_star,
            tol: self.hit_tol,
            r_star,
            tail_frac: self.tail_frac,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_parameter_table() {
        let c = Config::default();
        assert_eq!(c.plant.eps0_base, 1.0);
        assert_eq!(c.plant.x_offset, 6.0);
        assert_eq!(c.plant.theta_star, -3.0);
        assert_eq!(c.plant.dt, 0.005);
        assert_eq!((c.interference.a1, c.interference.a2), (10.5, 11.1));
        assert_eq!((c.interference.w1, c.interference.w2), (3.2, 7.8));
        assert_eq!(c.relay().step_k, 0.005 / 15.0);
        assert_eq!(c.relay().dwell_limit, 15.0);
        assert_eq!((c.relay().theta_min, c.relay().theta_max), (-5.0, 5.0));
        assert_eq!(c.relay().theta_init, 2.0);
        assert_eq!(c.training().n_trajectories, 100);
        assert_eq!(c.n_modes, 8);
    }

    #[test]
    fn overrides_and_comments() {
        let c = Config::parse(
            "# header\nplant.mu = 2.0  # faster\n\nseed=7\ninterference.enabled = false\n",
        )
        .unwrap();
        assert_eq!(c.plant.mu, 2.0);
        assert_eq!(c.training().seed, 7);
        assert!(!c.interference.enabled);
    }

    #[test]
    fn step_k_follows_dt_unless_set() {
        let c = Config::parse("plant.dt = 0.01").unwrap();
        assert_eq!(c.relay().step_k, 0.01 / 15.0);
        let c = Config::parse("plant.dt = 0.01\nrelay.step_k = 0").unwrap();
        assert_eq!(c.relay().step_k, 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            Config::parse("plant.nope = 1"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            Config::parse("plant.mu = abc"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            Config::parse("plant.mu = 1\nplant.mu = 2"),
            Err(Error::Config(_))
        ));
        assert!(matches!(Config::parse("just text"), Err(Error::Config(_))));
        assert!(matches!(
            Config::parse("plant.dt = 0"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            Config::parse("koopman.n_modes = 11"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn text_round_trip() {
        let c = Config::default();
        assert_eq!(Config::parse(&c.to_text()).unwrap(), c);
        let mut d = Config::parse("relay.step_k = 0.001\nplant.mu = 0.3\nseed = 99").unwrap();
        d.output_dir = PathBuf::from("out/dir");
        assert_eq!(Config::parse(&d.to_text()).unwrap(), d);
    }
}
