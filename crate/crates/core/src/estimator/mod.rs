//! Closed-form planar pose from matched features with known reference depth.
//!
//! Every unordered pair of matches gives one linear constraint
//! `a sin(theta) + b cos(theta) + c = 0`. The rotation minimizes the summed
//! squares on the unit circle through a Lagrange multiplier that solves a
//! quartic; translation then follows from an unweighted 2x2 least squares.

pub mod quartic;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{NormalizedFeature, PlanarTransform};
pub use quartic::{solve_quartic, QuarticCoeffs};

/// Largest accepted feature count; pairs grow quadratically.
pub const MAX_FEATURES: usize = 64;

const FEATURE_EPS: f64 = 1e-12;
const CIRCLE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    /// Normalized coordinates in the query image.
    pub cur: NormalizedFeature,
    /// Normalized coordinates in the reference image.
    pub reference: NormalizedFeature,
    /// Reference depth along the optical axis.
    pub x_star: f64,
}

impl MatchedPair {
    pub fn new(cur: NormalizedFeature, reference: NormalizedFeature, x_star: f64) -> Result<Self> {
        let p = Self {
            cur,
            reference,
            x_star,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for y in [self.cur.y, self.reference.y] {
            if !(y.abs() > FEATURE_EPS) {
                return Err(Error::DegenerateFeature(y));
            }
        }
        if !(self.x_star > 0.0) {
            return Err(Error::DegenerateGeometry("reference depth must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

pub fn pair_coeffs(pi: &MatchedPair, pj: &MatchedPair) -> Result<PairCoeffs> {
    pi.validate()?;
    pj.validate()?;
    let (xi, yi) = (pi.cur.x, pi.cur.y);
    let (xj, yj) = (pj.cur.x, pj.cur.y);
    let (xsi, ysi) = (pi.reference.x, pi.reference.y);
    let (xsj, ysj) = (pj.reference.x, pj.reference.y);
    let ri = ysi / yi;
    let rj = ysj / yj;
    Ok(PairCoeffs {
        a: ri * (xi * xsj + 1.0) - rj * (xsi * xj + 1.0),
        b: ri * (xsj - xi) - rj * (xsi - xj),
        c: (ysi * ysj) / (yi * yj) * (xi - xj) + (xsi - xsj),
    })
}

/// Sums over all pairs: `a1 = Σa²`, `a2 = Σab`, `a3 = Σb²`, `b1 = -Σac`,
/// `b2 = -Σbc`, plus `Σc²` for evaluating the cost.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NormalAccumulators {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub b1: f64,
    pub b2: f64,
    pub c_sq: f64,
    pub pairs: usize,
}

impl NormalAccumulators {
    pub fn add(&mut self, k: &PairCoeffs) {
        self.a1 += k.a * k.a;
        self.a2 += k.a * k.b;
        self.a3 += k.b * k.b;
        self.b1 -= k.a * k.c;
        self.b2 -= k.b * k.c;
        self.c_sq += k.c * k.c;
        self.pairs += 1;
    }

    /// `Σ(a s + b c + c)²` expanded through the sums.
    pub fn cost(&self, sin: f64, cos: f64) -> f64 {
        self.a1 * sin * sin + 2.0 * self.a2 * sin * cos + self.a3 * cos * cos
            - 2.0 * (self.b1 * sin + self.b2 * cos)
            + self.c_sq
    }

    /// Half the derivative of the cost along the unit circle at `theta`.
    fn half_gradient(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        (self.a1 - self.a3) * s * c + self.a2 * (c * c - s * s) - self.b1 * c + self.b2 * s
    }

    /// Half the second derivative of the cost along the unit circle.
    fn half_curvature(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        let tangent = self.a1 * c * c - 2.0 * self.a2 * s * c + self.a3 * s * s;
        let radial = self.a1 * s * s + 2.0 * self.a2 * s * c + self.a3 * c * c
            - self.b1 * s
            - self.b2 * c;
        tangent - radial
    }

    fn det(&self) -> f64 {
        self.a1 * self.a3 - self.a2 * self.a2
    }
}

/// Coefficients of every unordered pair in ascending `(i, j)` order.
pub fn pair_coefficients(pairs: &[MatchedPair]) -> Result<Vec<PairCoeffs>> {
    if pairs.len() < 2 {
        return Err(Error::InsufficientFeatures {
            needed: 2,
            got: pairs.len(),
        });
    }
    if pairs.len() > MAX_FEATURES {
        return Err(Error::TooManyFeatures {
            got: pairs.len(),
            cap: MAX_FEATURES,
        });
    }
    let mut out = Vec::with_capacity(pairs.len() * (pairs.len() - 1) / 2);
    for i in 0..pairs.len() {
        for j in i + 1..pairs.len() {
            out.push(pair_coeffs(&pairs[i], &pairs[j])?);
        }
    }
    Ok(out)
}

/// Accumulates pairs in ascending `(i, j)` order.
pub fn accumulate(pairs: &[MatchedPair]) -> Result<NormalAccumulators> {
    Ok(accumulate_coeffs(&pair_coefficients(pairs)?))
}

pub fn accumulate_coeffs(coeffs: &[PairCoeffs]) -> NormalAccumulators {
    let mut acc = NormalAccumulators::default();
    for k in coeffs {
        acc.add(k);
    }
    acc
}

/// `Σ(a sin + b cos + c)²` summed pair by pair.
pub fn pair_cost(coeffs: &[PairCoeffs], theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    coeffs.iter().map(|k| (k.a * s + k.b * c + k.c).powi(2)).sum()
}

/// Gauss-Newton on the per-pair residuals starting from `r`. The summed
/// normal equations lose digits to cancellation when the cost is flat; the
/// per-pair residuals do not.
pub fn refine_rotation(coeffs: &[PairCoeffs], r: &RotationEstimate) -> RotationEstimate {
    let mut theta = r.angle();
    let mut cost = pair_cost(coeffs, theta);
    for _ in 0..8 {
        let (s, c) = theta.sin_cos();
        let (mut rj, mut jj) = (0.0, 0.0);
        for k in coeffs {
            let res = k.a * s + k.b * c + k.c;
            let jac = k.a * c - k.b * s;
            rj += res * jac;
            jj += jac * jac;
        }
        if !(jj > 0.0) {
            break;
        }
        let step = rj / jj;
        let next = theta - step;
        let next_cost = pair_cost(coeffs, next);
        if !(next_cost <= cost) {
            break;
        }
        theta = next;
        cost = next_cost;
        if step.abs() < 1e-16 {
            break;
        }
    }
    let (sin_theta, cos_theta) = theta.sin_cos();
    RotationEstimate {
        sin_theta,
        cos_theta,
        lambda: r.lambda,
        residual: cost,
    }
}

pub fn quartic_coeffs(acc: &NormalAccumulators) -> QuarticCoeffs {
    let NormalAccumulators {
        a1, a2, a3, b1, b2, ..
    } = *acc;
    let tr = a1 + a3;
    let det = acc.det();
    QuarticCoeffs {
        c1: tr,
        c2: tr * tr - b1 * b1 - b2 * b2 + 2.0 * det,
        c3: tr * det + 2.0 * a2 * b1 * b2 - a3 * b1 * b1 - a1 * b2 * b2,
        c4: det * det - (a3 * b1 - a2 * b2).powi(2) - (a1 * b2 - a2 * b1).powi(2),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationEstimate {
    pub sin_theta: f64,
    pub cos_theta: f64,
    /// Multiplier of the selected stationary point.
    pub lambda: f64,
    /// `Σ(a sin + b cos + c)²` at the returned angle.
    pub residual: f64,
}

impl RotationEstimate {
    pub fn angle(&self) -> f64 {
        self.sin_theta.atan2(self.cos_theta)
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    sin: f64,
    cos: f64,
    cost: f64,
}

/// Symmetric 2x2 eigen-decomposition, ascending eigenvalues.
fn sym_eigen(a: f64, b: f64, d: f64) -> [(f64, [f64; 2]); 2] {
    let mean = 0.5 * (a + d);
    let half_diff = 0.5 * (a - d);
    let r = half_diff.hypot(b);
    let (lo, hi) = (mean - r, mean + r);
    // eigenvector of the larger eigenvalue, rotated for the smaller one
    let angle = 0.5 * (2.0 * b).atan2(a - d);
    let (s, c) = angle.sin_cos();
    [(lo, [-s, c]), (hi, [c, s])]
}

/// Rotation minimizing the pair residuals subject to `sin² + cos² = 1`.
///
/// Candidates come from the real roots of the multiplier quartic. Roots at
/// which `(M + λI)` is singular (`M` the 2x2 normal matrix) are handled
/// through its null space instead of the closed-form ratio; this is the
/// common case near the identity pose, where every `a` vanishes. The best
/// candidate is finished with Newton steps along the circle.
pub fn estimate_rotation(acc: &NormalAccumulators) -> Result<RotationEstimate> {
    let best = rotation_candidates(acc)?
        .into_iter()
        .min_by(|a, b| a.residual.total_cmp(&b.residual))
        .ok_or(Error::DegenerateGeometry("no admissible multiplier"))?;
    Ok(best)
}

/// Every admissible stationary point, each polished to the nearest minimum
/// along the circle.
fn rotation_candidates(acc: &NormalAccumulators) -> Result<Vec<RotationEstimate>> {
    let scale = acc.a1 + acc.a3;
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::DegenerateGeometry("pair constraints vanish"));
    }
    let mut cands: Vec<Candidate> = Vec::with_capacity(8);

    let q = quartic_coeffs(acc);
    for lambda in solve_quartic(&q)? {
        let d = (acc.a1 + lambda) * (acc.a3 + lambda) - acc.a2 * acc.a2;
        if d.abs() <= 1e-12 * (scale + lambda.abs()).powi(2) {
            continue;
        }
        let sin = ((acc.a3 + lambda) * acc.b1 - acc.a2 * acc.b2) / d;
        let cos = ((acc.a1 + lambda) * acc.b2 - acc.a2 * acc.b1) / d;
        if (sin * sin + cos * cos - 1.0).abs() < CIRCLE_TOL {
            cands.push(Candidate {
                sin,
                cos,
                cost: acc.cost(sin, cos),
            });
        }
    }

    let eig = sym_eigen(acc.a1, acc.a2, acc.a3);
    let bvec = [acc.b1, acc.b2];
    let dot = |u: [f64; 2], v: [f64; 2]| u[0] * v[0] + u[1] * v[1];
    let mut mirrored_gap = 0.0f64;
    for k in 0..2 {
        let (mu_k, vk) = eig[k];
        let (mu_j, vj) = eig[1 - k];
        let gap = mu_j - mu_k;
        let along = if gap.abs() > 1e-14 * scale {
            dot(vj, bvec) / gap
        } else {
            0.0
        };
        let rest = 1.0 - along * along;
        if rest < -CIRCLE_TOL {
            continue;
        }
        let t = rest.max(0.0).sqrt();
        if k == 0 && eig[0].0.abs() <= 1e-12 * eig[1].0.abs() {
            mirrored_gap = t;
        }
        for sign in [1.0, -1.0] {
            let sin = along * vj[0] + sign * t * vk[0];
            let cos = along * vj[1] + sign * t * vk[1];
            cands.push(Candidate {
                sin,
                cos,
                cost: acc.cost(sin, cos),
            });
        }
    }

    // Rank-one normal matrix: the cost depends on one direction only and
    // the two mirrored minima are indistinguishable.
    if mirrored_gap > 1e-3 {
        return Err(Error::DegenerateGeometry(
            "rotation is ambiguous (coplanar or collinear features)",
        ));
    }

    let out: Vec<RotationEstimate> = cands
        .iter()
        .filter(|c| c.cost.is_finite())
        .map(|c| {
            let theta = polish_angle(acc, c.sin.atan2(c.cos));
            let (sin_theta, cos_theta) = theta.sin_cos();
            let lambda = acc.b1 * sin_theta + acc.b2 * cos_theta
                - (acc.a1 * sin_theta * sin_theta
                    + 2.0 * acc.a2 * sin_theta * cos_theta
                    + acc.a3 * cos_theta * cos_theta);
            RotationEstimate {
                sin_theta,
                cos_theta,
                lambda,
                residual: acc.cost(sin_theta, cos_theta).max(0.0),
            }
        })
        .collect();
    if out.is_empty() {
        return Err(Error::DegenerateGeometry("no admissible multiplier"));
    }
    Ok(out)
}

/// Refines a minimizer along the circle: brackets the sign change of the
/// gradient next to `theta0`, then runs Newton steps that fall back to
/// bisection whenever they leave the bracket.
fn polish_angle(acc: &NormalAccumulators, theta0: f64) -> f64 {
    let g0 = acc.half_gradient(theta0);
    if g0 == 0.0 || !g0.is_finite() {
        return theta0;
    }
    let dir = if g0 > 0.0 { -1.0 } else { 1.0 };
    let mut step = 1e-9;
    let far = loop {
        let t = theta0 + dir * step;
        if acc.half_gradient(t) * g0 <= 0.0 {
            break t;
        }
        step *= 2.0;
        if step > 0.5 {
            return theta0;
        }
    };
    let (mut lo, mut hi) = if dir < 0.0 { (far, theta0) } else { (theta0, far) };
    let mut theta = theta0;
    for _ in 0..200 {
        let g = acc.half_gradient(theta);
        if g == 0.0 {
            return theta;
        }
        if g < 0.0 {
            lo = theta;
        } else {
            hi = theta;
        }
        let h = acc.half_curvature(theta);
        let newton = theta - g / h;
        let next = if h > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if next == theta || hi - lo <= f64::EPSILON * theta.abs().max(1e-300) {
            return next;
        }
        theta = next;
    }
    theta
}

/// `(d, e)` such that `d = t_x` and `e + x t_x = t_y` for exact data.
pub fn translation_terms(p: &MatchedPair, r: &RotationEstimate) -> Result<(f64, f64)> {
    p.validate()?;
    let (s, c) = (r.sin_theta, r.cos_theta);
    let (x, y) = (p.cur.x, p.cur.y);
    let (xs, ys) = (p.reference.x, p.reference.y);
    let d = p.x_star * (ys / y - (c - xs * s));
    let e = p.x_star * ((x - xs) * c - (x * xs + 1.0) * s);
    Ok((d, e))
}

/// Least-squares translation for a fixed rotation; returns
/// `(t_x, t_y, residual)`.
pub fn estimate_translation(pairs: &[MatchedPair], r: &RotationEstimate) -> Result<(f64, f64, f64)> {
    if pairs.is_empty() {
        return Err(Error::InsufficientFeatures { needed: 1, got: 0 });
    }
    let terms = pairs
        .iter()
        .map(|p| translation_terms(p, r).map(|(d, e)| (p.cur.x, d, e)))
        .collect::<Result<Vec<_>>>()?;
    let n = terms.len() as f64;
    let (mut sx, mut se, mut sdxe, mut s1xx) = (0.0, 0.0, 0.0, 0.0);
    for &(x, d, e) in &terms {
        sx += x;
        se += e;
        sdxe += d - x * e;
        s1xx += 1.0 + x * x;
    }
    let den = n * s1xx - sx * sx;
    if !(den >= 1e-12) {
        return Err(Error::DegenerateGeometry("translation normal equations are singular"));
    }
    let t_x = (n * sdxe + sx * se) / den;
    let t_y = (sx * t_x + se) / n;
    let residual = terms
        .iter()
        .map(|&(x, d, e)| (d - t_x).powi(2) + (e + x * t_x - t_y).powi(2))
        .sum();
    Ok((t_x, t_y, residual))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarTransformEstimate {
    pub transform: PlanarTransform,
    pub rotation: RotationEstimate,
    pub translation_residual: f64,
}

/// Rotation first (closed form, then refined on the per-pair residuals),
/// then translation for that rotation.
///
/// Matches are put in a canonical order first, so any permutation of the
/// input yields bit-identical output.
pub fn estimate_pose(pairs: &[MatchedPair]) -> Result<PlanarTransformEstimate> {
    let mut sorted = pairs.to_vec();
    sorted.sort_by(|p, q| {
        let key = |m: &MatchedPair| [m.reference.x, m.reference.y, m.cur.x, m.cur.y, m.x_star];
        key(p)
            .iter()
            .zip(key(q).iter())
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let coeffs = pair_coefficients(&sorted)?;
    // The summed cost cannot separate near-tied minima, so every candidate
    // is refined and ranked on the per-pair residuals.
    let rotation = rotation_candidates(&accumulate_coeffs(&coeffs))?
        .iter()
        .map(|r| refine_rotation(&coeffs, r))
        .min_by(|a, b| a.residual.total_cmp(&b.residual))
        .ok_or(Error::DegenerateGeometry("no admissible multiplier"))?;
    let (t_x, t_y, translation_residual) = estimate_translation(&sorted, &rotation)?;
    Ok(PlanarTransformEstimate {
        transform: PlanarTransform::new(rotation.angle(), t_x, t_y),
        rotation,
        translation_residual,
    })
}
