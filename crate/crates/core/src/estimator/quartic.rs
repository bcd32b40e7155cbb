//! Real roots of `l^4 + 2 c1 l^3 + c2 l^2 + 2 c3 l + c4` via Ferrari's
//! resolvent cubic, each root polished with Newton's method.

use crate::error::{Error, Result};

/// Coefficients of the monic quartic in the `2 c1`, `2 c3` layout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuarticCoeffs {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

impl QuarticCoeffs {
    pub fn new(c1: f64, c2: f64, c3: f64, c4: f64) -> Self {
        Self { c1, c2, c3, c4 }
    }

    /// `[1, a3, a2, a1, a0]` in descending powers.
    fn monic(&self) -> [f64; 5] {
        [1.0, 2.0 * self.c1, self.c2, 2.0 * self.c3, self.c4]
    }

    pub fn eval(&self, l: f64) -> f64 {
        horner(&self.monic(), l)
    }

    /// Running-error bound of the Horner evaluation at `l`.
    fn eval_error_bound(&self, l: f64) -> f64 {
        let m = self.monic();
        let mut acc = 0.0;
        let mut pw = 1.0;
        for c in m.iter().rev() {
            acc += c.abs() * pw;
            pw *= l.abs();
        }
        8.0 * f64::EPSILON * acc
    }

    /// Acceptance threshold for a polished root.
    pub fn tolerance(&self) -> f64 {
        1e-9 * self.c4.abs().max(1.0)
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().fold(0.0, |acc, c| acc * x + c)
}

fn derivative(coeffs: &[f64]) -> Vec<f64> {
    let n = coeffs.len() - 1;
    coeffs[..n]
        .iter()
        .enumerate()
        .map(|(i, c)| c * (n - i) as f64)
        .collect()
}

/// Newton iterations that keep the best iterate seen.
fn polish(coeffs: &[f64], x0: f64, iters: usize) -> f64 {
    let d = derivative(coeffs);
    let mut best = x0;
    let mut best_val = horner(coeffs, x0).abs();
    let mut x = x0;
    for _ in 0..iters {
        let fx = horner(coeffs, x);
        let dfx = horner(&d, x);
        if fx == 0.0 || dfx == 0.0 || !dfx.is_finite() {
            break;
        }
        x -= fx / dfx;
        let v = horner(coeffs, x).abs();
        if v < best_val {
            best_val = v;
            best = x;
        } else {
            break;
        }
    }
    best
}

/// Real roots of `x^2 + b x + c`. A slightly negative discriminant (relative
/// to `b^2` and `|c|`) is read as a double root.
fn quadratic_roots(b: f64, c: f64, out: &mut Vec<f64>) {
    let disc = b * b - 4.0 * c;
    let scale = (b * b).max(4.0 * c.abs()).max(f64::MIN_POSITIVE);
    if disc < 0.0 {
        if disc > -1e-12 * scale {
            out.push(-0.5 * b);
        }
        return;
    }
    let sq = disc.sqrt();
    // avoid cancellation
    let sign = if b < 0.0 { -1.0 } else { 1.0 };
    let q = -0.5 * (b + sign * sq);
    if q == 0.0 {
        out.push(0.0);
        out.push(0.0);
    } else {
        out.push(q);
        out.push(c / q);
    }
}

/// Largest real root of the monic cubic `x^3 + a x^2 + b x + c`.
fn largest_cubic_root(a: f64, b: f64, c: f64) -> f64 {
    // depressed: x = t - a/3, t^3 + p t + q
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let shift = -a / 3.0;
    let t = if p == 0.0 && q == 0.0 {
        0.0
    } else {
        let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
        if disc > 0.0 {
            let sq = disc.sqrt();
            let u = (-q / 2.0 + sq).cbrt();
            let v = (-q / 2.0 - sq).cbrt();
            u + v
        } else {
            // three real roots; p < 0 here
            let r = (-p / 3.0).sqrt();
            let arg = if r == 0.0 {
                0.0
            } else {
                (-q / (2.0 * r * r * r)).clamp(-1.0, 1.0)
            };
            2.0 * r * (arg.acos() / 3.0).cos()
        }
    };
    polish(&[1.0, a, b, c], t + shift, 8)
}

/// All real roots of the quartic, ascending, with coincident roots merged.
pub fn solve_quartic(q: &QuarticCoeffs) -> Result<Vec<f64>> {
    let m = q.monic();
    if m.iter().any(|c| !c.is_finite()) {
        return Err(Error::NumericalFailure(format!(
            "non-finite quartic coefficients {q:?}"
        )));
    }
    let [_, a3, a2, a1, a0] = m;

    let mut raw = Vec::with_capacity(4);
    let mut exact_zero = 0usize;
    // strip exact zero roots
    let mut deg_coeffs: Vec<f64> = m.to_vec();
    while deg_coeffs.len() > 1 && *deg_coeffs.last().unwrap() == 0.0 {
        deg_coeffs.pop();
        exact_zero += 1;
    }
    if exact_zero > 0 {
        raw.push(0.0);
    }
    match deg_coeffs.len() - 1 {
        0 => {}
        1 => raw.push(-deg_coeffs[1]),
        2 => quadratic_roots(deg_coeffs[1], deg_coeffs[2], &mut raw),
        3 => cubic_real_roots(deg_coeffs[1], deg_coeffs[2], deg_coeffs[3], &mut raw),
        _ => ferrari(a3, a2, a1, a0, &mut raw),
    }

    let mut roots: Vec<f64> = Vec::with_capacity(raw.len());
    for r in raw {
        let x = polish(&m, r, 6);
        let val = q.eval(x).abs();
        let tol = q.tolerance().max(q.eval_error_bound(x));
        if !(val <= tol) {
            // candidates from the near-zero discriminant path may be a
            // complex pair in disguise; anything else is a failure
            if val.is_finite() && near_double(q, x) {
                continue;
            }
            return Err(Error::NumericalFailure(format!(
                "quartic root {x} did not refine: |p| = {val:e} > {tol:e}"
            )));
        }
        roots.push(x);
    }
    roots.sort_by(|a, b| a.total_cmp(b));
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-7 * a.abs().max(b.abs()).max(1.0));
    Ok(roots)
}

fn near_double(q: &QuarticCoeffs, x: f64) -> bool {
    let d = derivative(&q.monic());
    horner(&d, x).abs() <= 1e-6 * (1.0 + q.eval_error_bound(x) / f64::EPSILON)
}

fn cubic_real_roots(a: f64, b: f64, c: f64, out: &mut Vec<f64>) {
    let x = largest_cubic_root(a, b, c);
    // deflate: x^3 + a x^2 + b x + c = (x - r)(x^2 + (a + r) x + (b + (a + r) r))
    let qb = a + x;
    let qc = b + qb * x;
    out.push(x);
    quadratic_roots(qb, qc, out);
}

fn ferrari(a3: f64, a2: f64, a1: f64, a0: f64, out: &mut Vec<f64>) {
    // depressed quartic y^4 + p y^2 + q y + r with l = y - a3/4
    let shift = -a3 / 4.0;
    let a3s = a3 * a3;
    let p = a2 - 3.0 * a3s / 8.0;
    let q = a1 - a3 * a2 / 2.0 + a3s * a3 / 8.0;
    let r = a0 - a3 * a1 / 4.0 + a3s * a2 / 16.0 - 3.0 * a3s * a3s / 256.0;

    let scale = p.abs().max(r.abs().sqrt()).max(q.abs().powf(2.0 / 3.0));
    let mut ys = Vec::with_capacity(4);
    if q.abs() <= 1e-14 * scale.powf(1.5).max(f64::MIN_POSITIVE) {
        // biquadratic in y^2
        let mut sq = Vec::with_capacity(2);
        quadratic_roots(p, r, &mut sq);
        for w in sq {
            if w > 0.0 {
                let s = w.sqrt();
                ys.push(s);
                ys.push(-s);
            } else if w >= -1e-12 * scale.max(1e-300) {
                ys.push(0.0);
            }
        }
    } else {
        // resolvent m^3 + p m^2 + (p^2/4 - r) m - q^2/8 = 0 has a root m > 0
        let mres = largest_cubic_root(p, p * p / 4.0 - r, -q * q / 8.0);
        let mres = mres.max(f64::MIN_POSITIVE);
        let s = (2.0 * mres).sqrt();
        let half = p / 2.0 + mres;
        let corr = q / (2.0 * s);
        quadratic_roots(-s, half + corr, &mut ys);
        quadratic_roots(s, half - corr, &mut ys);
    }
    out.extend(ys.into_iter().map(|y| y + shift));
}
