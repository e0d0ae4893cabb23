//! Training, static-map sweeps, closed-loop runs and their metrics.

pub mod csv;
mod metrics;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::lifting::{self, KoopmanModel};
use crate::plant::{self, InterferenceParams, PlantParams, PlantState};
use crate::signal::{self, DetectorConfig, DetectorState, RelayConfig, RelayState};

pub use metrics::{compute_metrics, convexity_score, moving_average, Metrics, MetricsConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingConfig {
    pub n_trajectories: usize,
    /// Seconds simulated per trajectory.
    pub traj_duration: f64,
    pub theta_range: (f64, f64),
    pub x_init_range: (f64, f64),
    pub y_init_range: (f64, f64),
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            n_trajectories: 100,
            traj_duration: 50.0,
            theta_range: (-5.0, 5.0),
            x_init_range: (3.0, 9.0),
            y_init_range: (-3.0, 3.0),
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trajectories == 0 {
            return Err(Error::invalid("n_trajectories must be >= 1"));
        }
        if !(self.traj_duration > 0.0) {
            return Err(Error::invalid("traj_duration must be > 0"));
        }
        for (name, (lo, hi)) in [
            ("theta_range", self.theta_range),
            ("x_init_range", self.x_init_range),
            ("y_init_range", self.y_init_range),
        ] {
            if !(lo < hi) {
                return Err(Error::invalid(format!(
                    "{name} is degenerate: [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

/// Random draw for one training trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySpec {
    pub theta: f64,
    pub x0: f64,
    pub y0: f64,
}

/// Trajectory `index` draws from its own ChaCha stream of the master seed, so
/// earlier trajectories do not change when the count grows.
pub fn trajectory_spec(cfg: &TrainingConfig, index: usize) -> TrajectorySpec {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let theta = rng.random_range(cfg.theta_range.0..cfg.theta_range.1);
    let x0 = rng.random_range(cfg.x_init_range.0..cfg.x_init_range.1);
    let y0 = rng.random_range(cfg.y_init_range.0..cfg.y_init_range.1);
    TrajectorySpec { theta, x0, y0 }
}

fn steps_for(duration: f64, dt: f64) -> usize {
    (duration / dt).round() as usize
}

// Clock value after `k` steps, free of accumulated rounding.
#[inline]
fn grid_time(k: usize, dt: f64) -> f64 {
    k as f64 * dt
}

/// Measured states of one constant-theta trajectory, initial sample included.
pub fn simulate_measured(
    spec: &TrajectorySpec,
    duration: f64,
    plant: &PlantParams,
    interf: &InterferenceParams,
) -> Result<Vec<(f64, f64)>> {
    let n = steps_for(duration, plant.dt);
    let mut s = PlantState::new(spec.x0, spec.y0);
    let mut out = Vec::with_capacity(n + 1);
    out.push(plant::measure(&s, interf));
    for k in 0..n {
        s = plant::step(&s, spec.theta, plant)?;
        s.t = grid_time(k + 1, plant.dt);
        out.push(plant::measure(&s, interf));
    }
    Ok(out)
}

/// Simulates the training set from corrupted measurements and fits the model.
pub fn train(
    cfg: &TrainingConfig,
    plant: &PlantParams,
    interf: &InterferenceParams,
    n_modes: usize,
    svd_cutoff: f64,
    exec: Execution,
) -> Result<KoopmanModel> {
    cfg.validate()?;
    plant.validate()?;
    interf.validate()?;
    let trajectories = exec::map_indexed(exec, cfg.n_trajectories, |i| {
        simulate_measured(&trajectory_spec(cfg, i), cfg.traj_duration, plant, interf)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let snapshots = lifting::build_snapshots(&trajectories)?;
    drop(trajectories);
    log::info!("training on {} snapshot pairs", snapshots.len());
    KoopmanModel::fit(&snapshots, n_modes, svd_cutoff, exec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostMode {
    Raw,
    Lifted,
}

impl CostMode {
    pub fn name(self) -> &'static str {
        match self {
            CostMode::Raw => "raw",
            CostMode::Lifted => "lifted",
        }
    }
}

impl std::str::FromStr for CostMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(CostMode::Raw),
            "lifted" => Ok(CostMode::Lifted),
            _ => Err(Error::invalid(format!(
                "unknown mode `{s}` (expected raw|lifted)"
            ))),
        }
    }
}

/// Instantaneous cost `y_out` for either pipeline.
#[derive(Debug, Clone, Copy)]
pub enum Cost<'a> {
    Raw,
    Lifted(&'a KoopmanModel),
}

impl<'a> Cost<'a> {
    pub fn new(mode: CostMode, model: Option<&'a KoopmanModel>) -> Result<Self> {
        match (mode, model) {
            (CostMode::Raw, _) => Ok(Cost::Raw),
            (CostMode::Lifted, Some(m)) => Ok(Cost::Lifted(m)),
            (CostMode::Lifted, None) => Err(Error::invalid("lifted mode requires a Koopman model")),
        }
    }

    #[inline]
    pub fn eval(&self, x_m: f64, y_m: f64) -> f64 {
        match self {
            Cost::Raw => signal::raw_cost(x_m, y_m),
            Cost::Lifted(m) => signal::lifted_cost(x_m, y_m, m),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    pub theta_from: f64,
    pub theta_to: f64,
    pub duration: f64,
    pub log_start: f64,
    pub x_init: f64,
    pub y_init: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            theta_from: 2.0,
            theta_to: -5.0,
            duration: 2000.0,
            log_start: 100.0,
            x_init: 7.0,
            y_init: 0.0,
        }
    }
}

/// `(theta, r)` samples of a slow parameter ramp.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StaticMap {
    pub points: Vec<(f64, f64)>,
}

impl StaticMap {
    /// `(theta, r)` at the minimum of the moving-average-smoothed map.
    pub fn smoothed_min(&self, window: usize) -> Option<(f64, f64)> {
        let mut sorted = self.points.clone();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        moving_average(&sorted, window)
            .into_iter()
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// Ramps theta linearly while the cost pipeline and detector run; records
/// `(theta, r)` from `log_start` on.
pub fn static_map(
    plant: &PlantParams,
    interf: &InterferenceParams,
    cost: Cost<'_>,
    detector: &DetectorConfig,
    sweep: &SweepConfig,
) -> Result<StaticMap> {
    plant.validate()?;
    if !(sweep.duration > 0.0) {
        return Err(Error::invalid("sweep duration must be > 0"));
    }
    let coeffs = detector.coeffs()?;
    let n = steps_for(sweep.duration, plant.dt);
    let rate = (sweep.theta_to - sweep.theta_from) / sweep.duration;
    let mut s = PlantState::new(sweep.x_init, sweep.y_init);
    let mut det = DetectorState::default();
    let first_logged = steps_for(sweep.log_start, plant.dt);
    let mut points = Vec::with_capacity(n.saturating_sub(first_logged));
    for k in 0..n {
        let theta = sweep.theta_from + rate * (k as f64 * plant.dt);
        s = match plant::step(&s, theta, plant) {
            Ok(next) => next,
            Err(Error::Diverged { last }) => {
                log::error!("static map diverged after {} samples", points.len());
                return Err(Error::Diverged { last });
            }
            Err(e) => return Err(e),
        };
        s.t = grid_time(k + 1, plant.dt);
        let (xm, ym) = plant::measure(&s, interf);
        let (r, next) = signal::detector_step(cost.eval(xm, ym), &det, &coeffs);
        det = next;
        if k + 1 >= first_logged {
            points.push((theta, r));
        }
    }
    Ok(StaticMap { points })
}

/// Column-oriented closed-loop log on a uniform time grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunLog {
    pub t: Vec<f64>,
    pub x_true: Vec<f64>,
    pub y_true: Vec<f64>,
    pub x_meas: Vec<f64>,
    pub y_meas: Vec<f64>,
    pub y_out: Vec<f64>,
    pub r: Vec<f64>,
    pub theta: Vec<f64>,
    pub epsilon: Vec<f64>,
}

impl RunLog {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    fn with_capacity(n: usize) -> Self {
        let v = || Vec::with_capacity(n);
        Self {
            t: v(),
            x_true: v(),
            y_true: v(),
            x_meas: v(),
            y_meas: v(),
            y_out: v(),
            r: v(),
            theta: v(),
            epsilon: v(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub duration: f64,
    pub log_start: f64,
    pub x_init: f64,
    pub y_init: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            duration: 2500.0,
            log_start: 100.0,
            x_init: 7.0,
            y_init: 0.0,
        }
    }
}

/// Closed loop: plant step, measure, cost, detector, relay. Each logged row
/// holds the state at `t` and the parameter chosen for the next step.
pub fn run_closed_loop(
    plant: &PlantParams,
    interf: &InterferenceParams,
    cost: Cost<'_>,
    relay: &RelayConfig,
    detector: &DetectorConfig,
    run: &RunConfig,
) -> Result<RunLog> {
    plant.validate()?;
    relay.validate()?;
    if !(run.duration > 0.0) {
        return Err(Error::invalid("run duration must be > 0"));
    }
    let coeffs = detector.coeffs()?;
    let n = steps_for(run.duration, plant.dt);
    let mut log =
        RunLog::with_capacity(steps_for((run.duration - run.log_start).max(0.0), plant.dt) + 1);
    let mut s = PlantState::new(run.x_init, run.y_init);
    let mut det = DetectorState::default();
    let mut rs = RelayState::new(relay);
    let first_logged = steps_for(run.log_start, plant.dt);
    for k in 0..n {
        s = match plant::step(&s, rs.theta, plant) {
            Ok(next) => next,
            Err(Error::Diverged { last }) => {
                return Err(Error::RunDiverged {
                    last,
                    partial: Box::new(log),
                })
            }
            Err(e) => return Err(e),
        };
        s.t = grid_time(k + 1, plant.dt);
        let (xm, ym) = plant::measure(&s, interf);
        let y_out = cost.eval(xm, ym);
        let (r, next_det) = signal::detector_step(y_out, &det, &coeffs);
        det = next_det;
        rs = signal::relay_step(r, &rs, relay, plant.dt);
        if k + 1 >= first_logged {
            log.t.push(s.t);
            log.x_true.push(s.x);
            log.y_true.push(s.y);
            log.x_meas.push(xm);
            log.y_meas.push(ym);
            log.y_out.push(y_out);
            log.r.push(r);
            log.theta.push(rs.theta);
            log.epsilon.push(rs.epsilon);
        }
    }
    Ok(log)
}
