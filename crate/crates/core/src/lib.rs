//! Object servoing for differential-drive robots.
//!
//! The pipeline has three stages:
//!
//! 1. [`estimator`] recovers the planar goal-to-current transform from matched
//!    normalized features with known reference depths, in closed form.
//! 2. [`error_state`] turns that transform into chained-form coordinates
//!    `(z0, z1, z2)`.
//! 3. [`controller`] runs the switched parking law on the chained state and
//!    maps the result back to a body twist `(v, omega)`.
//!
//! [`sim`] closes the loop around a unicycle model and synthetic camera, and
//! [`cli`] wraps everything in a batch runner that writes CSV/JSON artifacts.

pub mod cli;
pub mod controller;
pub mod error;
pub mod error_state;
pub mod estimator;
pub mod geometry;
pub mod sim;

pub use controller::{
    compute_gains, phi_z1, ControlDecision, ControllerGains, ControllerParams, ParkingController,
    TwistLimits, U0Branch, U1Branch,
};
pub use error::{Error, Result};
pub use error_state::{AnchorDepth, BodyTwist, ChainedInput, ChainedState, ErrorState};
pub use estimator::{estimate_pose, MatchedPair, PlanarTransformEstimate, RotationEstimate};
pub use sim::{
    case_scenario, case_scenarios, run, PerceptionMode, RunLog, RunSummary, Scenario,
    TrajectorySample,
};

pub use geometry::{
    relative_transform, wrap_angle, CameraIntrinsics, FeaturePoint3, NormalizedFeature, Pixel,
    PlanarTransform, Pose2,
};

