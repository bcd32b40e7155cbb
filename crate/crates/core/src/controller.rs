//! Switched parking controller for the chained system
//! `z0' = u0, z1' = u0 z2, z2' = u1`.
//!
//! `u0` has three branches: a signed cube root of `z0` once `z1` and `z2`
//! vanish, the linear law `-kappa0 z0` inside the invariant set, and the
//! ratio law `-kappa1 z1 / psi(z2)` elsewhere. `u1` mirrors it with a cube
//! root of `z2` on the singularity line `z0 = z1 = 0`, `-kappa2 z2` when
//! `u0` is zero, and the Riccati feedback `-(P2 / u0) z1 - P3 z2` otherwise.
//!
//! Exact-zero tests are replaced by small tolerances
//! ([`SwitchingTolerances`]).

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::error_state::{inputs_to_twist, AnchorDepth, BodyTwist, ChainedInput, ChainedState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerParams {
    pub kappa0: f64,
    pub kappa2: f64,
    pub epsilon: f64,
    pub xi: f64,
    pub delta: f64,
}

impl Default for ControllerParams {
    /// `kappa0 = 0.1, kappa2 = 1/4, epsilon = 2.25, xi = 1/1024, delta = 25`.
    fn default() -> Self {
        Self {
            kappa0: 0.1,
            kappa2: 0.25,
            epsilon: 2.25,
            xi: 1.0 / 1024.0,
            delta: 25.0,
        }
    }
}

impl ControllerParams {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.kappa0 > 0.0, "kappa0 must be > 0"),
            (self.kappa2 > 0.0, "kappa2 must be > 0"),
            (self.epsilon > 1.0, "epsilon must be > 1"),
            (self.xi > 0.0, "xi must be > 0"),
            (self.delta > 0.0, "delta must be > 0"),
        ];
        for (ok, msg) in checks {
            // NaN fails every comparison and lands here too
            if !ok {
                return Err(Error::InvalidParams(format!("{msg} (got {self:?})")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerGains {
    pub gamma: f64,
    pub zeta: f64,
    pub kappa1: f64,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
}

impl ControllerGains {
    pub fn p_matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.p1, self.p2, self.p2, self.p3)
    }

    pub fn is_positive_definite(&self) -> bool {
        self.p1 > 0.0 && self.p1 * self.p3 - self.p2 * self.p2 > 0.0
    }
}

pub fn compute_gains(p: &ControllerParams) -> Result<ControllerGains> {
    p.validate()?;
    let k0 = p.kappa0;
    let gamma = k0 * p.epsilon + p.xi;
    let zeta = 2.0 * gamma + k0;
    let root = (k0 * k0 + 6.0 * k0 * zeta + zeta * zeta).sqrt();
    let kappa1 = (2.0 * gamma + root + 1.0) / 4.0;
    let p3 = (k0 + 3.0 * zeta + root) / 4.0;
    let p2 = p3 * p3 - 0.5 * (k0 + zeta) * p3;
    let p1 = 2.0 * p2 * p2 / zeta;
    Ok(ControllerGains {
        gamma,
        zeta,
        kappa1,
        p1,
        p2,
        p3,
    })
}

/// `A'P + PA - 2 P B B' P + (2 gamma + kappa0) P + kappa0 L P L` with
/// `A = [[0, 1], [0, 0]]`, `B = [0, 1]'`, `L = diag(0, 1)`.
pub fn riccati_residual(g: &ControllerGains, p: &ControllerParams) -> Matrix2<f64> {
    let a = Matrix2::new(0.0, 1.0, 0.0, 0.0);
    let bbt = Matrix2::new(0.0, 0.0, 0.0, 1.0);
    let l = Matrix2::new(0.0, 0.0, 0.0, 1.0);
    let pm = g.p_matrix();
    a.transpose() * pm + pm * a - 2.0 * pm * bbt * pm
        + (2.0 * g.gamma + p.kappa0) * pm
        + p.kappa0 * l * pm * l
}

/// `z1^2 / 2`; decreases along the ratio-law branch.
pub fn phi_z1(z: &ChainedState) -> f64 {
    0.5 * z.z1 * z.z1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchingTolerances {
    /// Magnitude below which a chained state is treated as zero.
    pub state: f64,
    /// Magnitude below which `u0` is treated as zero.
    pub input: f64,
}

impl Default for SwitchingTolerances {
    fn default() -> Self {
        Self {
            state: 1e-6,
            input: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwistLimits {
    pub v_max: f64,
    pub omega_max: f64,
}

impl TwistLimits {
    pub fn clamp(&self, t: BodyTwist) -> BodyTwist {
        BodyTwist {
            v: t.v.clamp(-self.v_max, self.v_max),
            omega: t.omega.clamp(-self.omega_max, self.omega_max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum U0Branch {
    CubeRoot,
    InGamma,
    RatioLaw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum U1Branch {
    CubeRoot,
    Kappa2,
    RiccatiLaw,
}

impl U0Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            U0Branch::CubeRoot => "CubeRoot",
            U0Branch::InGamma => "InGamma",
            U0Branch::RatioLaw => "RatioLaw",
        }
    }
}

impl U1Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            U1Branch::CubeRoot => "CubeRoot",
            U1Branch::Kappa2 => "Kappa2",
            U1Branch::RiccatiLaw => "RiccatiLaw",
        }
    }
}

/// Diagnostics for one control evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlDecision {
    pub u: ChainedInput,
    pub u0_branch: U0Branch,
    pub u1_branch: U1Branch,
    pub in_gamma: bool,
    pub v_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParkingController {
    params: ControllerParams,
    gains: ControllerGains,
    tol: SwitchingTolerances,
    limits: Option<TwistLimits>,
    hold_interval: Option<f64>,
}

impl ParkingController {
    pub fn new(params: ControllerParams) -> Result<Self> {
        let gains = compute_gains(&params)?;
        Ok(Self {
            params,
            gains,
            tol: SwitchingTolerances::default(),
            limits: None,
            hold_interval: None,
        })
    }

    pub fn with_limits(mut self, limits: Option<TwistLimits>) -> Self {
        self.limits = limits;
        self
    }

    pub fn with_tolerances(mut self, tol: SwitchingTolerances) -> Self {
        self.tol = tol;
        self
    }

    /// Sample period of the zero-order hold driving the plant.
    ///
    /// When set, the cube-root branches are capped at `|x| / h` so that one
    /// held sample cannot carry the state across zero. Without the cap a
    /// sampled `-x^(1/3)` law ends in a two-cycle of amplitude `(h/2)^1.5`.
    pub fn with_hold_interval(mut self, h: Option<f64>) -> Self {
        self.hold_interval = h.filter(|h| *h > 0.0);
        self
    }

    pub fn params(&self) -> &ControllerParams {
        &self.params
    }

    pub fn gains(&self) -> &ControllerGains {
        &self.gains
    }

    pub fn tolerances(&self) -> &SwitchingTolerances {
        &self.tol
    }

    pub fn lyapunov(&self, z: &ChainedState) -> f64 {
        let g = &self.gains;
        let k0 = self.params.kappa0;
        g.p1 * z.z1 * z.z1 - 2.0 * g.p2 * k0 * z.z0 * z.z1 * z.z2
            + g.p3 * k0 * k0 * z.z0 * z.z0 * z.z2 * z.z2
    }

    pub fn in_invariant_set(&self, z: &ChainedState) -> bool {
        let p = &self.params;
        let threshold = p.delta * (p.kappa0 * z.z0).abs().powf(2.0 * p.epsilon);
        self.lyapunov(z) < threshold || (self.is_zero(z.z0) && self.is_zero(z.z1))
    }

    fn is_zero(&self, x: f64) -> bool {
        x.abs() <= self.tol.state
    }

    fn cube_root_feedback(&self, x: f64) -> f64 {
        let u = -x.cbrt();
        match self.hold_interval {
            Some(h) if u.abs() * h > x.abs() => -x / h,
            _ => u,
        }
    }

    fn psi(&self, z: &ChainedState) -> f64 {
        if !self.is_zero(z.z2) {
            z.z2
        } else if z.z0 * z.z1 < 0.0 {
            -1.0
        } else {
            1.0
        }
    }

    pub fn control_u0(&self, z: &ChainedState) -> (f64, U0Branch) {
        if self.is_zero(z.z1) && self.is_zero(z.z2) {
            (self.cube_root_feedback(z.z0), U0Branch::CubeRoot)
        } else if self.in_invariant_set(z) {
            (-self.params.kappa0 * z.z0, U0Branch::InGamma)
        } else {
            (-self.gains.kappa1 * z.z1 / self.psi(z), U0Branch::RatioLaw)
        }
    }

    pub fn control_u1(&self, z: &ChainedState, u0: f64) -> (f64, U1Branch) {
        if self.is_zero(z.z1) && self.is_zero(z.z0) {
            (self.cube_root_feedback(z.z2), U1Branch::CubeRoot)
        } else if u0.abs() <= self.tol.input {
            (-self.params.kappa2 * z.z2, U1Branch::Kappa2)
        } else {
            (
                -(self.gains.p2 / u0) * z.z1 - self.gains.p3 * z.z2,
                U1Branch::RiccatiLaw,
            )
        }
    }

    pub fn decide(&self, z: &ChainedState) -> ControlDecision {
        let (u0, u0_branch) = self.control_u0(z);
        let (u1, u1_branch) = self.control_u1(z, u0);
        ControlDecision {
            u: ChainedInput::new(u0, u1),
            u0_branch,
            u1_branch,
            in_gamma: self.in_invariant_set(z),
            v_value: self.lyapunov(z),
        }
    }

    /// Control law followed by the chained-input to twist map and the
    /// optional component-wise clamp.
    pub fn step(&self, z: &ChainedState, anchor: AnchorDepth) -> (BodyTwist, ControlDecision) {
        let decision = self.decide(z);
        let twist = inputs_to_twist(decision.u, z, anchor);
        let twist = match &self.limits {
            Some(l) => l.clamp(twist),
            None => twist,
        };
        (twist, decision)
    }
}
