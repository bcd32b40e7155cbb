//! Error coordinates, chained-form state and the input/twist conversion.
//!
//! With `g = (phi, t_x, t_y)` the goal-to-current transform and `Z*` the
//! anchor feature height:
//!
//! ```text
//! x_e = t_x / Z*,  y_e = t_y / Z*,  theta_e = phi
//! z0 = -theta_e,   z1 = y_e,        z2 = -x_e
//! u0 = omega,      u1 = v / Z* - z1 * u0
//! ```
//!
//! so that `z0' = u0`, `z1' = u0 z2`, `z2' = u1` under unicycle motion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{NormalizedFeature, PlanarTransform};

const FEATURE_EPS: f64 = 1e-12;

/// Height `Z*` of the feature that scales the error coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorDepth(f64);

impl AnchorDepth {
    pub fn new(z_star: f64) -> Result<Self> {
        if z_star == 0.0 || !z_star.is_finite() {
            return Err(Error::ZeroAnchorDepth);
        }
        Ok(Self(z_star))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorState {
    pub x_e: f64,
    pub y_e: f64,
    pub theta_e: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ChainedState {
    pub z0: f64,
    pub z1: f64,
    pub z2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ChainedInput {
    pub u0: f64,
    pub u1: f64,
}

/// Forward speed along the optical axis and yaw rate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BodyTwist {
    pub v: f64,
    pub omega: f64,
}

impl ChainedState {
    pub fn new(z0: f64, z1: f64, z2: f64) -> Self {
        Self { z0, z1, z2 }
    }

    pub fn to_error(self) -> ErrorState {
        ErrorState {
            x_e: -self.z2,
            y_e: self.z1,
            theta_e: -self.z0,
        }
    }

    /// `|z0| + |z1|`, small when the goal camera's view overlaps the current one.
    pub fn heading_lateral_sum(&self) -> f64 {
        self.z0.abs() + self.z1.abs()
    }
}

impl ChainedInput {
    pub fn new(u0: f64, u1: f64) -> Self {
        Self { u0, u1 }
    }
}

impl ErrorState {
    pub fn to_chained(self) -> ChainedState {
        ChainedState {
            z0: -self.theta_e,
            z1: self.y_e,
            z2: -self.x_e,
        }
    }

    pub fn to_transform(self, anchor: AnchorDepth) -> PlanarTransform {
        let z = anchor.get();
        PlanarTransform::new(self.theta_e, self.x_e * z, self.y_e * z)
    }
}

pub fn error_from_transform(g: &PlanarTransform, anchor: AnchorDepth) -> ErrorState {
    let z = anchor.get();
    ErrorState {
        x_e: g.t_x / z,
        y_e: g.t_y / z,
        theta_e: g.phi,
    }
}

/// Error coordinates evaluated directly from one matched feature.
///
/// `theta` is the angle in the rotation `[[sin, cos], [cos, -sin]]`; pass
/// `-phi` of the goal-to-current transform.
pub fn error_from_features(
    current: NormalizedFeature,
    reference: NormalizedFeature,
    theta: f64,
) -> Result<(f64, f64)> {
    for y in [current.y, reference.y] {
        if y.abs() < FEATURE_EPS {
            return Err(Error::DegenerateFeature(y));
        }
    }
    let (s, c) = theta.sin_cos();
    let r0 = reference.x / reference.y;
    let r1 = 1.0 / reference.y;
    let x_e = 1.0 / current.y - (s * r0 + c * r1);
    let y_e = current.x / current.y - (c * r0 - s * r1);
    Ok((x_e, y_e))
}

pub fn inputs_to_twist(u: ChainedInput, z: &ChainedState, anchor: AnchorDepth) -> BodyTwist {
    BodyTwist {
        v: anchor.get() * (u.u1 + z.z1 * u.u0),
        omega: u.u0,
    }
}

pub fn twist_to_inputs(t: BodyTwist, z: &ChainedState, anchor: AnchorDepth) -> ChainedInput {
    ChainedInput {
        u0: t.omega,
        u1: t.v / anchor.get() - z.z1 * t.omega,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{relative_transform, transform_point, FeaturePoint3, Pose2};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_6;

    fn anchor(z: f64) -> AnchorDepth {
        AnchorDepth::new(z).unwrap()
    }

    #[test]
    fn zero_anchor_rejected() {
        assert_eq!(AnchorDepth::new(0.0), Err(Error::ZeroAnchorDepth));
        assert!(AnchorDepth::new(-0.3).is_ok());
    }

    #[test]
    fn error_from_transform_examples() {
        let e = error_from_transform(&PlanarTransform::identity(), anchor(1.0));
        assert_eq!(e, ErrorState::default());

        let e = error_from_transform(&PlanarTransform::new(-FRAC_PI_6, 6.8301, 1.8301), anchor(1.0));
        assert_eq!((e.x_e, e.y_e), (6.8301, 1.8301));
        assert_abs_diff_eq!(e.theta_e, -FRAC_PI_6, epsilon = 1e-15);

        let e = error_from_transform(&PlanarTransform::new(0.0, 0.0, 2.0), anchor(2.0));
        assert_eq!((e.x_e, e.y_e, e.theta_e), (0.0, 1.0, 0.0));
    }

    #[test]
    fn to_chained_examples() {
        assert_eq!(ErrorState::default().to_chained(), ChainedState::default());
        let z = ErrorState { x_e: 6.8301, y_e: 1.8301, theta_e: -FRAC_PI_6 }.to_chained();
        assert_eq!((z.z0, z.z1, z.z2), (FRAC_PI_6, 1.8301, -6.8301));
        let z = ErrorState { x_e: 1.0, y_e: 0.0, theta_e: 0.0 }.to_chained();
        assert_eq!((z.z0, z.z1, z.z2), (0.0, 0.0, -1.0));
    }

    #[test]
    fn twist_examples() {
        let z = ChainedState::new(0.3, 1.0, -0.2);
        let t = inputs_to_twist(ChainedInput::new(0.0, 0.0), &z, anchor(1.0));
        assert_eq!((t.v, t.omega), (0.0, 0.0));
        let t = inputs_to_twist(ChainedInput::new(0.5, 0.2), &z, anchor(2.0));
        assert_abs_diff_eq!(t.v, 1.4, epsilon = 1e-15);
        assert_eq!(t.omega, 0.5);
        let t = inputs_to_twist(ChainedInput::new(1.0, -1.0), &z, anchor(1.0));
        assert_eq!((t.v, t.omega), (0.0, 1.0));

        let u = twist_to_inputs(BodyTwist { v: 0.0, omega: 0.0 }, &z, anchor(1.0));
        assert_eq!((u.u0, u.u1), (0.0, 0.0));
        let u = twist_to_inputs(BodyTwist { v: 1.4, omega: 0.5 }, &z, anchor(2.0));
        assert_abs_diff_eq!(u.u0, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(u.u1, 0.2, epsilon = 1e-15);
        let u = twist_to_inputs(BodyTwist { v: 0.0, omega: 1.0 }, &z, anchor(1.0));
        assert_eq!((u.u0, u.u1), (1.0, -1.0));
    }

    #[test]
    fn feature_errors() {
        let f = NormalizedFeature::new(0.1, 0.2);
        let (x, y) = error_from_features(f, f, 0.0).unwrap();
        assert_abs_diff_eq!(x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(y, 0.0, epsilon = 1e-15);

        let bad = NormalizedFeature::new(0.1, 0.0);
        assert!(matches!(
            error_from_features(bad, f, 0.0),
            Err(Error::DegenerateFeature(_))
        ));
        assert!(matches!(
            error_from_features(f, bad, 0.0),
            Err(Error::DegenerateFeature(_))
        ));
    }

    fn unicycle_step(p: &Pose2, v: f64, w: f64, dt: f64) -> Pose2 {
        // exact arc for constant twist
        if w.abs() < 1e-12 {
            return Pose2::new(p.x + v * dt * p.theta.cos(), p.y + v * dt * p.theta.sin(), p.theta);
        }
        let th1 = p.theta + w * dt;
        Pose2::new(
            p.x + v / w * (th1.sin() - p.theta.sin()),
            p.y - v / w * (th1.cos() - p.theta.cos()),
            th1,
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        /// Finite differences of the error coordinates match the analytic
        /// error and chained dynamics.
        #[test]
        fn dynamics_consistency(
            rx in -6.0..6.0f64, ry in -6.0..6.0f64, rt in -3.0..3.0f64,
            gx in -6.0..6.0f64, gy in -6.0..6.0f64, gt in -3.0..3.0f64,
            v in -1.5..1.5f64, w in -1.5..1.5f64, zs in prop_oneof![0.2..2.0f64, -2.0..-0.2f64],
        ) {
            let dt = 1e-5;
            let robot = Pose2::new(rx, ry, rt);
            let goal = Pose2::new(gx, gy, gt);
            let a = anchor(zs);
            let e0 = error_from_transform(&relative_transform(&robot, &goal), a);
            let next = unicycle_step(&robot, v, w, dt);
            let prev = unicycle_step(&robot, v, w, -dt);
            let e1 = error_from_transform(&relative_transform(&next, &goal), a);
            let em = error_from_transform(&relative_transform(&prev, &goal), a);
            prop_assume!((e1.theta_e - em.theta_e).abs() < 1.0);

            // central differences
            let tol = 1e-6;
            let dx = (e1.x_e - em.x_e) / (2.0 * dt);
            let dy = (e1.y_e - em.y_e) / (2.0 * dt);
            let dth = (e1.theta_e - em.theta_e) / (2.0 * dt);
            prop_assert!((dx - (w * e0.y_e - v / zs)).abs() < tol * (1.0 + dx.abs()));
            prop_assert!((dy - (-w * e0.x_e)).abs() < tol * (1.0 + dy.abs()));
            prop_assert!((dth - (-w)).abs() < tol);

            let z0 = e0.to_chained();
            let z1 = e1.to_chained();
            let zm = em.to_chained();
            let u = twist_to_inputs(BodyTwist { v, omega: w }, &z0, a);
            let d0 = (z1.z0 - zm.z0) / (2.0 * dt);
            let d1 = (z1.z1 - zm.z1) / (2.0 * dt);
            let d2 = (z1.z2 - zm.z2) / (2.0 * dt);
            prop_assert!((d0 - u.u0).abs() < tol);
            prop_assert!((d1 - u.u0 * z0.z2).abs() < tol * (1.0 + d1.abs()));
            prop_assert!((d2 - u.u1).abs() < tol * (1.0 + d2.abs()));
        }

        /// Every feature of a scene yields the same error when evaluated with
        /// the angle `-phi`.
        #[test]
        fn feature_independence(
            phi in -1.0..1.0f64, tx in -2.0..2.0f64, ty in -2.0..2.0f64,
            pts in proptest::collection::vec((4.0..9.0f64, -2.0..2.0f64, prop_oneof![0.2..1.5f64, -1.5..-0.2f64]), 1..12),
        ) {
            let g = PlanarTransform::new(phi, tx, ty);
            for (x, y, z) in pts {
                let p = FeaturePoint3::new(x, y, z);
                let q = transform_point(&g, &p);
                prop_assume!(q.x > 0.5);
                let cur = NormalizedFeature::new(q.y / q.x, q.z / q.x);
                let (xe, ye) = error_from_features(cur, p.reference_normalized(), -phi).unwrap();
                let e = error_from_transform(&g, anchor(z));
                prop_assert!((xe - e.x_e).abs() < 1e-9, "{} vs {}", xe, e.x_e);
                prop_assert!((ye - e.y_e).abs() < 1e-9, "{} vs {}", ye, e.y_e);
            }
        }

        #[test]
        fn twist_roundtrip(u0 in -5.0..5.0f64, u1 in -5.0..5.0f64, z1 in -5.0..5.0f64,
                           zs in prop_oneof![0.2..2.0f64, -2.0..-0.2f64]) {
            let z = ChainedState::new(0.1, z1, 0.4);
            let a = anchor(zs);
            let u = twist_to_inputs(inputs_to_twist(ChainedInput::new(u0, u1), &z, a), &z, a);
            prop_assert!((u.u0 - u0).abs() < 1e-12);
            prop_assert!((u.u1 - u1).abs() < 1e-12);
        }

        #[test]
        fn chained_is_signed_permutation(x in -9.0..9.0f64, y in -9.0..9.0f64, t in -3.0..3.0f64) {
            let e = ErrorState { x_e: x, y_e: y, theta_e: t };
            let z = e.to_chained();
            prop_assert_eq!((z.z0, z.z1, z.z2), (-t, y, -x));
            prop_assert_eq!(z.to_error(), e);
        }
    }
}
