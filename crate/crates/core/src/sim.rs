//! Closed-loop simulation: unicycle plant, synthetic camera, perception,
//! controller and logging.

use std::f64::consts::{FRAC_PI_4, FRAC_PI_6};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::controller::{ControllerParams, ParkingController, TwistLimits, U0Branch, U1Branch};
use crate::error::{Error, Result};
use crate::error_state::{
    error_from_transform, AnchorDepth, BodyTwist, ChainedInput, ChainedState,
};
use crate::estimator::{estimate_pose, MatchedPair};
use crate::geometry::{
    relative_transform, transform_point, wrap_angle, CameraIntrinsics, FeaturePoint3, Pixel,
    PlanarTransform, Pose2,
};

/// Consecutive time without a usable estimate before a run is aborted.
pub const STARVATION_LIMIT: f64 = 5.0;
/// Twist magnitude below which the robot counts as stopped.
pub const STOP_TWIST: f64 = 1e-3;
/// How long the robot must stay settled before convergence is declared.
pub const SETTLE_TIME: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerceptionMode {
    #[default]
    GroundTruth,
    Estimated,
}

impl PerceptionMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            PerceptionMode::GroundTruth => "ground_truth",
            PerceptionMode::Estimated => "estimated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceCriteria {
    pub pos_tol: f64,
    pub ang_tol: f64,
}

impl Default for ConvergenceCriteria {
    fn default() -> Self {
        Self {
            pos_tol: 0.05,
            ang_tol: 0.02,
        }
    }
}

/// The object (and with it the goal) is moved to `pose` at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalUpdate {
    pub t: f64,
    pub pose: Pose2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub initial_pose: Pose2,
    pub goal_pose: Pose2,
    /// Object features in goal-camera coordinates.
    pub object_features: Vec<FeaturePoint3>,
    pub intrinsics: CameraIntrinsics,
    pub controller: ControllerParams,
    pub limits: Option<TwistLimits>,
    pub dt: f64,
    pub t_max: f64,
    pub perception_mode: PerceptionMode,
    pub pixel_noise_sigma: f64,
    pub rng_seed: u64,
    pub convergence: ConvergenceCriteria,
    /// Feature whose height sets the error scale. Defaults to the largest
    /// `|z|`, first on ties.
    pub anchor_index: Option<usize>,
    pub goal_updates: Vec<GoalUpdate>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "scenario".into(),
            initial_pose: Pose2::identity(),
            goal_pose: Pose2::identity(),
            object_features: default_object(),
            intrinsics: CameraIntrinsics::default(),
            controller: ControllerParams::default(),
            limits: None,
            dt: 0.01,
            t_max: 200.0,
            perception_mode: PerceptionMode::GroundTruth,
            pixel_noise_sigma: 0.0,
            rng_seed: 0,
            convergence: ConvergenceCriteria::default(),
            anchor_index: None,
            goal_updates: Vec::new(),
        }
    }
}

/// Six features spanning 1 m by 0.6 m about 3 m ahead of the goal camera.
/// Depths are staggered so that no four of them share a plane: coplanar
/// features leave the rotation ambiguous, and any four may be all that stays
/// in view.
pub fn default_object() -> Vec<FeaturePoint3> {
    [
        (3.0, -0.5, 0.3),
        (2.7, 0.0, 0.3),
        (3.2, 0.5, 0.3),
        (2.8, -0.5, -0.3),
        (3.1, 0.0, -0.3),
        (2.9, 0.5, -0.3),
    ]
    .into_iter()
    .map(|(x, y, z)| FeaturePoint3::new(x, y, z))
    .collect()
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_max > self.dt && self.t_max.is_finite()) {
            return bad(format!("t_max must exceed dt, got {}", self.t_max));
        }
        if !(self.convergence.pos_tol > 0.0 && self.convergence.ang_tol > 0.0) {
            return bad("convergence tolerances must be positive".into());
        }
        if !(self.pixel_noise_sigma >= 0.0 && self.pixel_noise_sigma.is_finite()) {
            return bad(format!("pixel_noise_sigma must be >= 0, got {}", self.pixel_noise_sigma));
        }
        if let Some(l) = &self.limits {
            if !(l.v_max > 0.0 && l.omega_max > 0.0) {
                return bad("limits must be positive".into());
            }
        }
        if self.object_features.is_empty() {
            return bad("at least one object feature is required".into());
        }
        if self.perception_mode == PerceptionMode::Estimated && self.object_features.len() < 2 {
            return Err(Error::InsufficientFeatures {
                needed: 2,
                got: self.object_features.len(),
            });
        }
        for f in &self.object_features {
            f.validate()?;
        }
        for p in std::iter::once(&self.initial_pose)
            .chain(std::iter::once(&self.goal_pose))
            .chain(self.goal_updates.iter().map(|u| &u.pose))
        {
            if !(p.x.is_finite() && p.y.is_finite() && p.theta.is_finite()) {
                return bad("poses must be finite".into());
            }
        }
        if self.goal_updates.iter().any(|u| !u.t.is_finite()) {
            return bad("goal update times must be finite".into());
        }
        if let Some(i) = self.anchor_index {
            if i >= self.object_features.len() {
                return bad(format!(
                    "anchor_index {i} out of range for {} features",
                    self.object_features.len()
                ));
            }
        }
        self.intrinsics.validate()?;
        self.controller.validate()?;
        self.anchor().map(|_| ())
    }

    pub fn anchor_feature(&self) -> usize {
        self.anchor_index.unwrap_or_else(|| {
            let mut best = 0;
            for (i, f) in self.object_features.iter().enumerate() {
                if f.z.abs() > self.object_features[best].z.abs() {
                    best = i;
                }
            }
            best
        })
    }

    pub fn anchor(&self) -> Result<AnchorDepth> {
        let f = self
            .object_features
            .get(self.anchor_feature())
            .ok_or_else(|| Error::InvalidScenario("no anchor feature".into()))?;
        AnchorDepth::new(f.z)
    }

    /// Goal in force at time `t`.
    pub fn goal_at(&self, t: f64) -> Pose2 {
        let mut goal = self.goal_pose;
        let mut latest = f64::NEG_INFINITY;
        for u in &self.goal_updates {
            if u.t <= t && u.t >= latest {
                goal = u.pose;
                latest = u.t;
            }
        }
        goal
    }
}

/// The four reference cases, all with the default controller parameters and
/// a wide-angle camera so the object stays in view from every start.
pub fn case_scenarios() -> Vec<Scenario> {
    let limits = Some(TwistLimits {
        v_max: 1.0,
        omega_max: 1.0,
    });
    let case = |n: u32, start: Pose2, goal: Pose2, limits: Option<TwistLimits>| Scenario {
        name: format!("case{n}"),
        initial_pose: start,
        goal_pose: goal,
        intrinsics: CameraIntrinsics::wide_angle(),
        limits,
        ..Scenario::default()
    };
    vec![
        case(1, Pose2::new(0.0, 0.0, FRAC_PI_6), Pose2::new(5.0, 5.0, 0.0), None),
        case(2, Pose2::new(0.0, 0.0, FRAC_PI_4), Pose2::new(5.0, 5.0, 0.0), None),
        case(3, Pose2::new(5.0, 5.0, FRAC_PI_6), Pose2::new(16.0, 6.0, FRAC_PI_6), limits),
        case(4, Pose2::new(5.0, 5.0, 0.0), Pose2::new(16.0, 6.0, FRAC_PI_6), limits),
    ]
}

pub fn case_scenario(name: &str) -> Option<Scenario> {
    case_scenarios().into_iter().find(|s| s.name == name)
}

/// One RK4 step of the unicycle with the twist held over `dt`.
pub fn integrate_unicycle(pose: &Pose2, twist: BodyTwist, dt: f64) -> Pose2 {
    let f = |theta: f64| (twist.v * theta.cos(), twist.v * theta.sin(), twist.omega);
    let (x, y, th) = (pose.x, pose.y, pose.theta);
    let k1 = f(th);
    let k2 = f(th + 0.5 * dt * k1.2);
    let k3 = f(th + 0.5 * dt * k2.2);
    let k4 = f(th + dt * k3.2);
    Pose2::new(
        x + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        y + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
        wrap_angle(th + dt / 6.0 * (k1.2 + 2.0 * k2.2 + 2.0 * k3.2 + k4.2)),
    )
}

/// Projects every object feature from the robot's camera, perturbs the pixel
/// with Gaussian noise and keeps the visible ones.
///
/// The noise draw for feature `i` at step `k` depends only on
/// `(rng_seed, k, i)`.
pub fn generate_observations(
    robot: &Pose2,
    goal: &Pose2,
    scenario: &Scenario,
    step: u64,
) -> Vec<MatchedPair> {
    let g = relative_transform(robot, goal);
    let k = &scenario.intrinsics;
    let sigma = scenario.pixel_noise_sigma;
    let mut out = Vec::with_capacity(scenario.object_features.len());
    for (i, f) in scenario.object_features.iter().enumerate() {
        let Some(mut px) = k.project(&transform_point(&g, f)) else {
            continue;
        };
        if sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(scenario.rng_seed);
            rng.set_stream(step);
            rng.set_word_pos((i as u128) << 20);
            let du: f64 = StandardNormal.sample(&mut rng);
            let dv: f64 = StandardNormal.sample(&mut rng);
            px = Pixel {
                u: px.u + sigma * du,
                v: px.v + sigma * dv,
            };
        }
        if let Ok(m) = MatchedPair::new(k.normalize(px), f.reference_normalized(), f.x) {
            out.push(m);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub pose: Pose2,
    pub goal: Pose2,
    /// State the controller acted on (the true state on held samples).
    pub z: ChainedState,
    pub twist: BodyTwist,
    pub u: ChainedInput,
    /// `None` when no estimate was available and the previous twist was held.
    pub u0_branch: Option<U0Branch>,
    pub u1_branch: Option<U1Branch>,
    pub in_gamma: bool,
    /// Estimate minus truth; zero under ground-truth perception and NaN on
    /// held samples.
    pub est_angle_err: f64,
    pub est_trans_err: f64,
    pub visible_count: usize,
    pub pos_err: f64,
    pub ang_err: f64,
}

impl TrajectorySample {
    pub fn held(&self) -> bool {
        self.u0_branch.is_none()
    }

    fn settled(&self, c: &ConvergenceCriteria) -> bool {
        self.pos_err < c.pos_tol
            && self.ang_err < c.ang_tol
            && self.twist.v.abs() < STOP_TWIST
            && self.twist.omega.abs() < STOP_TWIST
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub converged: bool,
    /// Start of the settled stretch that declared convergence.
    pub t_converge: Option<f64>,
    pub final_pos_err: f64,
    pub final_ang_err: f64,
    pub path_length: f64,
    pub max_abs_v: f64,
    pub max_abs_omega: f64,
    pub peak_z0z1: f64,
    pub final_z0z1: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub samples: Vec<TrajectorySample>,
    pub summary: RunSummary,
}

fn settle_samples(dt: f64) -> usize {
    ((SETTLE_TIME / dt) - 1e-9).ceil().max(1.0) as usize
}

/// Aggregates a log. The sample period is taken from the first two samples.
pub fn summarize(samples: &[TrajectorySample], criteria: &ConvergenceCriteria) -> Result<RunSummary> {
    let last = samples.last().ok_or(Error::EmptyLog)?;
    let dt = match samples {
        [a, b, ..] => b.t - a.t,
        _ => 0.0,
    };
    let mut t_converge = None;
    if dt > 0.0 {
        let need = settle_samples(dt);
        let mut run = 0usize;
        for (i, s) in samples.iter().enumerate() {
            run = if s.settled(criteria) { run + 1 } else { 0 };
            if run >= need {
                t_converge = Some(samples[i + 1 - need].t);
                break;
            }
        }
    }
    let fold = |f: fn(&TrajectorySample) -> f64| samples.iter().map(f).fold(0.0, f64::max);
    Ok(RunSummary {
        converged: t_converge.is_some(),
        t_converge,
        final_pos_err: last.pos_err,
        final_ang_err: last.ang_err,
        path_length: samples.iter().map(|s| s.twist.v.abs() * dt).sum(),
        max_abs_v: fold(|s| s.twist.v.abs()),
        max_abs_omega: fold(|s| s.twist.omega.abs()),
        peak_z0z1: fold(|s| s.z.heading_lateral_sum()),
        final_z0z1: last.z.heading_lateral_sum(),
        samples: samples.len(),
    })
}

struct Perception {
    z: ChainedState,
    est_angle_err: f64,
    est_trans_err: f64,
}

fn perceive(
    mode: PerceptionMode,
    truth: &PlanarTransform,
    obs: &[MatchedPair],
    anchor: AnchorDepth,
) -> Option<Perception> {
    match mode {
        PerceptionMode::GroundTruth => Some(Perception {
            z: error_from_transform(truth, anchor).to_chained(),
            est_angle_err: 0.0,
            est_trans_err: 0.0,
        }),
        PerceptionMode::Estimated => {
            if obs.len() < 2 {
                return None;
            }
            let est = estimate_pose(obs).ok()?.transform;
            Some(Perception {
                z: error_from_transform(&est, anchor).to_chained(),
                est_angle_err: wrap_angle(est.phi - truth.phi),
                est_trans_err: (est.t_x - truth.t_x).hypot(est.t_y - truth.t_y),
            })
        }
    }
}

/// Runs the loop observe → perceive → control → integrate until the robot
/// has settled at the goal or `t_max` is reached.
pub fn run(scenario: &Scenario) -> Result<RunLog> {
    scenario.validate()?;
    let anchor = scenario.anchor()?;
    let ctl = ParkingController::new(scenario.controller)?
        .with_limits(scenario.limits)
        .with_hold_interval(Some(scenario.dt));
    let dt = scenario.dt;
    let need = settle_samples(dt);
    let max_steps = (scenario.t_max / dt).ceil() as u64;

    let mut pose = scenario.initial_pose;
    let mut samples = Vec::with_capacity(max_steps.min(1 << 20) as usize);
    let mut prev_twist = BodyTwist::default();
    let mut prev_u = ChainedInput::default();
    let mut starved_since: Option<f64> = None;
    let mut settled_run = 0usize;

    for step in 0..max_steps {
        let t = step as f64 * dt;
        let goal = scenario.goal_at(t);
        let truth = relative_transform(&pose, &goal);
        let obs = generate_observations(&pose, &goal, scenario, step);
        let pos_err = pose.distance_to(&goal);
        let ang_err = pose.heading_error_to(&goal).abs();

        let sample = match perceive(scenario.perception_mode, &truth, &obs, anchor) {
            Some(p) => {
                starved_since = None;
                let (twist, d) = ctl.step(&p.z, anchor);
                prev_twist = twist;
                prev_u = d.u;
                TrajectorySample {
                    t,
                    pose,
                    goal,
                    z: p.z,
                    twist,
                    u: d.u,
                    u0_branch: Some(d.u0_branch),
                    u1_branch: Some(d.u1_branch),
                    in_gamma: d.in_gamma,
                    est_angle_err: p.est_angle_err,
                    est_trans_err: p.est_trans_err,
                    visible_count: obs.len(),
                    pos_err,
                    ang_err,
                }
            }
            None => {
                let since = *starved_since.get_or_insert(t);
                if t - since > STARVATION_LIMIT {
                    return Err(Error::EstimatorStarvation {
                        since,
                        duration: t - since,
                    });
                }
                TrajectorySample {
                    t,
                    pose,
                    goal,
                    z: error_from_transform(&truth, anchor).to_chained(),
                    twist: prev_twist,
                    u: prev_u,
                    u0_branch: None,
                    u1_branch: None,
                    in_gamma: false,
                    est_angle_err: f64::NAN,
                    est_trans_err: f64::NAN,
                    visible_count: obs.len(),
                    pos_err,
                    ang_err,
                }
            }
        };
        samples.push(sample);

        settled_run = if sample.settled(&scenario.convergence) {
            settled_run + 1
        } else {
            0
        };
        if settled_run >= need {
            break;
        }
        pose = integrate_unicycle(&pose, sample.twist, dt);
    }

    let summary = summarize(&samples, &scenario.convergence)?;
    Ok(RunLog { samples, summary })
}
