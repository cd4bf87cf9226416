//! Closed-form gradient-flow limits for networks trained on one unit-norm
//! example from equal-row rank-1 initializations, and their predicted
//! Jacobian spectra.

mod ode;
mod quad;

pub use ode::{dopri5, OdeOptions, OdeRun};
pub use quad::{adaptive_simpson, Quad};

use thiserror::Error;

use crate::linalg::{norm2, Mat};
use crate::net::{Net, Nonlin};

/// Absolute tolerance of the energy integral.
pub const QUAD_TOL: f64 = 1e-12;
/// The bracket search for `v` never leaves `|v| ≤ SEARCH_LIMIT`.
pub const SEARCH_LIMIT: f64 = 50.0;
/// Relations of the deep flow must close to this, or the solve fails.
pub const RELATION_FAIL_TOL: f64 = 1e-4;
/// The deep flow stops once `½r² ≤` this. With relative ODE tolerance 1e-10
/// the residual `r` cannot be driven much below 1e-10.
pub const DEEP_LOSS_TOL: f64 = 1e-20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TheoryError {
    #[error("no root of u(v)φ(v) = 1/k between {from} and {to}")]
    NoRoot { from: f64, to: f64 },
    #[error("φ′ vanishes or φ/φ′ is not finite at z = {z}")]
    Singular { z: f64 },
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("ODE exceeded {steps} steps at t = {t}")]
    MaxSteps { steps: usize, t: f64 },
    #[error("flow did not reach the interpolating limit by t = {t} (loss {loss:e})")]
    NotConverged { t: f64, loss: f64 },
    #[error("integral relation {index} off by {residual:e}")]
    Relation { index: usize, residual: f64 },
    #[error("no z in [-10, 10] with |φ′(z)z/φ(z)| > 1 for {0}")]
    NoExpandingInterval(String),
    #[error("{0}")]
    BadInput(String),
}

/// Limit of the reduced flow.
///
/// For one hidden layer `u` and `v` are the common output and input row
/// scalars (`W_2 = x uᵀ`, `W_1 = v xᵀ`). For deeper nets `u` is the output
/// scalar `a`, `v` the input scalar `b`, and `interior` holds `w_2 … w_{d−1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TheorySol {
    pub nonlin: Nonlin,
    /// Hidden widths `k_1 … k_{d−1}`.
    pub widths: Vec<usize>,
    pub u0: f64,
    pub v0: f64,
    pub u: f64,
    pub v: f64,
    pub interior: Vec<f64>,
    /// Predicted top Jacobian eigenvalue at the training example.
    pub lambda: f64,
    /// Quadrature error estimate (one hidden layer) or largest integral
    /// relation residual (deep).
    pub quad_error: f64,
    /// `|output scale − 1|` at the limit.
    pub root_residual: f64,
}

impl TheorySol {
    pub fn depth(&self) -> usize {
        self.widths.len() + 1
    }
}

/// `(u² − u₀²)/2 − ∫_{v₀}^{v} φ/φ′`.
pub fn energy_residual(nonlin: Nonlin, u0: f64, v0: f64, u: f64, v: f64) -> Result<f64, TheoryError> {
    let q = adaptive_simpson(|z| nonlin.flow_ratio(z), v0, v, QUAD_TOL)?;
    Ok(0.5 * (u * u - u0 * u0) - q.value)
}

fn check_ratio(nonlin: Nonlin, z: f64) -> Result<f64, TheoryError> {
    let d = nonlin.deriv(z);
    let r = nonlin.flow_ratio(z);
    if d == 0.0 || !r.is_finite() {
        Err(TheoryError::Singular { z })
    } else {
        Ok(r)
    }
}

/// Gradient-flow limit of a one-hidden-layer, width-`k` network from the
/// equal-row init `(u₀, v₀)`.
pub fn solve_one_hidden(nonlin: Nonlin, k: usize, u0: f64, v0: f64) -> Result<TheorySol, TheoryError> {
    if k == 0 || !u0.is_finite() || !v0.is_finite() {
        return Err(TheoryError::BadInput(format!("k = {k}, u0 = {u0}, v0 = {v0}")));
    }
    let kf = k as f64;
    let target = 1.0 / kf;
    let r0 = 1.0 - kf * u0 * nonlin.eval(v0);
    let sol = |u: f64, v: f64, quad_error: f64| TheorySol {
        nonlin,
        widths: vec![k],
        u0,
        v0,
        u,
        v,
        interior: vec![],
        lambda: nonlin.gain(v),
        quad_error,
        root_residual: (u * kf * nonlin.eval(v) - 1.0).abs(),
    };
    if r0 == 0.0 {
        return Ok(sol(u0, v0, 0.0));
    }
    check_ratio(nonlin, v0)?;

    // u keeps the sign it starts with; from u₀ = 0 it moves along r₀φ(v₀).
    let u_sign = if u0 != 0.0 {
        u0.signum()
    } else {
        (r0 * nonlin.eval(v0)).signum()
    };
    let v_dir = (nonlin.deriv(v0) * u_sign * r0).signum();
    if v_dir == 0.0 {
        return Err(TheoryError::NoRoot { from: v0, to: v0 });
    }

    // g(v) along the path, with F(v) = ∫_{v₀}^{v} φ/φ′ accumulated piecewise.
    let u_of = |f: f64| -> Option<f64> {
        let sq = u0 * u0 + 2.0 * f;
        (sq >= 0.0).then(|| u_sign * sq.sqrt())
    };
    let g_of = |u: f64, v: f64| u * nonlin.eval(v) - target;

    let mut prev_v = v0;
    let mut prev_f = 0.0;
    let mut prev_g = g_of(u0, v0);
    let mut quad_err = 0.0;
    let mut h = 1e-3;
    let (lo, hi, f_lo) = loop {
        let next_v = prev_v + v_dir * h;
        if next_v.abs() > SEARCH_LIMIT {
            return Err(TheoryError::NoRoot {
                from: v0,
                to: prev_v,
            });
        }
        // v moves along φ′(v), so it can never cross a zero of φ′.
        if nonlin.deriv(next_v).signum() != nonlin.deriv(v0).signum() {
            return Err(TheoryError::NoRoot {
                from: v0,
                to: prev_v,
            });
        }
        let q = adaptive_simpson(|z| nonlin.flow_ratio(z), prev_v, next_v, QUAD_TOL)
            .map_err(|_| TheoryError::Singular { z: next_v })?;
        check_ratio(nonlin, next_v)?;
        let f = prev_f + q.value;
        let Some(u) = u_of(f) else {
            // u reaches zero before interpolating: the flow stalls.
            return Err(TheoryError::NoRoot {
                from: v0,
                to: next_v,
            });
        };
        let g = g_of(u, next_v);
        quad_err += q.error;
        if g == 0.0 || g.signum() != prev_g.signum() {
            break (prev_v, next_v, prev_f);
        }
        prev_v = next_v;
        prev_f = f;
        prev_g = g;
        h *= 1.25;
    };

    let integral_to = |v: f64| -> Result<f64, TheoryError> {
        Ok(f_lo + adaptive_simpson(|z| nonlin.flow_ratio(z), lo, v, QUAD_TOL)?.value)
    };
    let eval_g = |v: f64| -> Result<(f64, f64), TheoryError> {
        let f = integral_to(v)?;
        let u = u_of(f).ok_or(TheoryError::NoRoot { from: lo, to: hi })?;
        Ok((g_of(u, v), u))
    };

    // Bisection on [lo, hi] (ordered along the flow), then Newton polish.
    let g_lo = eval_g(lo)?.0;
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        let gm = eval_g(m)?.0;
        if gm == 0.0 {
            a = m;
            b = m;
            break;
        }
        if gm.signum() == g_lo.signum() {
            a = m;
        } else {
            b = m;
        }
        if (b - a).abs() < 1e-9 {
            break;
        }
    }
    let (bmin, bmax) = (a.min(b), a.max(b));
    let mut v = 0.5 * (a + b);
    for _ in 0..50 {
        let (g, u) = eval_g(v)?;
        if g.abs() < 1e-15 {
            break;
        }
        // dg/dv = u′φ + uφ′ with u u′ = φ/φ′.
        let dg = nonlin.flow_ratio(v) / u * nonlin.eval(v) + u * nonlin.deriv(v);
        let next = v - g / dg;
        if !next.is_finite() || next < bmin || next > bmax {
            break;
        }
        if next == v {
            break;
        }
        v = next;
    }
    let (g, u) = eval_g(v)?;
    let mut s = sol(u, v, quad_err);
    s.root_residual = (g / target).abs();
    Ok(s)
}

/// Sample of the reduced one-hidden flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowPoint {
    pub t: f64,
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedFlow {
    pub points: Vec<FlowPoint>,
    /// Largest `|(a² − a₀²)/2 − ∫_{b₀}^{b} φ/φ′|` over the samples.
    pub energy_drift: f64,
    pub final_loss: f64,
}

impl ReducedFlow {
    pub fn last(&self) -> FlowPoint {
        *self.points.last().expect("trajectory holds its start")
    }
}

/// Integrates `ȧ = (1 − kaφ(b))φ(b)`, `ḃ = φ′(b)a(1 − kaφ(b))` until the
/// loss `½(1 − kaφ(b))²` drops below `loss_tol`.
pub fn integrate_reduced_ode(
    nonlin: Nonlin,
    k: usize,
    u0: f64,
    v0: f64,
    loss_tol: f64,
) -> Result<ReducedFlow, TheoryError> {
    if k == 0 || !(loss_tol > 0.0) {
        return Err(TheoryError::BadInput(format!("k = {k}, loss_tol = {loss_tol}")));
    }
    let kf = k as f64;
    let loss = move |y: &[f64]| 0.5 * (1.0 - kf * y[0] * nonlin.eval(y[1])).powi(2);
    let mut points = vec![FlowPoint { t: 0.0, a: u0, b: v0 }];
    let opts = OdeOptions::default();
    let run = dopri5(
        |_, y, dy| {
            let (a, b) = (y[0], y[1]);
            let phi = nonlin.eval(b);
            let r = 1.0 - kf * a * phi;
            dy[0] = r * phi;
            dy[1] = nonlin.deriv(b) * a * r;
            if dy.iter().all(|v| v.is_finite()) {
                Ok(())
            } else {
                Err(TheoryError::Singular { z: b })
            }
        },
        0.0,
        &[u0, v0],
        &opts,
        |_, y| loss(y) < loss_tol,
        |t, y| points.push(FlowPoint { t, a: y[0], b: y[1] }),
    )?;
    let final_loss = loss(&run.y);
    if !run.stopped {
        return Err(TheoryError::NotConverged { t: run.t, loss: final_loss });
    }
    let mut drift = 0.0f64;
    for p in &points {
        drift = drift.max(energy_residual(nonlin, u0, v0, p.a, p.b)?.abs());
    }
    Ok(ReducedFlow {
        points,
        energy_drift: drift,
        final_loss,
    })
}

/// Forward quantities of the equal-row deep chain at the training example.
struct Chain {
    /// `p_1 … p_{d−1}`
    pre: Vec<f64>,
    /// `h_1 … h_{d−1}`
    h: Vec<f64>,
    r: f64,
}

/// Scalar layer weights: `s[0] = b`, `s[1..d−1] = w_2 … w_{d−1}`, `s[d−1] = a`.
fn chain(nonlin: Nonlin, widths: &[usize], s: &[f64]) -> Chain {
    let m = widths.len();
    let mut pre = Vec::with_capacity(m);
    let mut h = Vec::with_capacity(m);
    pre.push(s[0]);
    h.push(nonlin.eval(s[0]));
    for i in 1..m {
        let p = s[i] * widths[i - 1] as f64 * h[i - 1];
        pre.push(p);
        h.push(nonlin.eval(p));
    }
    let r = 1.0 - s[m] * widths[m - 1] as f64 * h[m - 1];
    Chain { pre, h, r }
}

/// `λ = φ′(b) b ∏_{i=2}^{d−1} φ′(p_i) w_i k_{i−1} / φ(p_{d−1})`.
pub fn deep_lambda(nonlin: Nonlin, widths: &[usize], b: f64, interior: &[f64]) -> f64 {
    let mut s = vec![b];
    s.extend_from_slice(interior);
    s.push(0.0);
    let c = chain(nonlin, widths, &s);
    let mut num = nonlin.deriv(b) * b;
    for (i, w) in interior.iter().enumerate() {
        num *= nonlin.deriv(c.pre[i + 1]) * w * widths[i] as f64;
    }
    num / c.h[widths.len() - 1]
}

/// Gradient-flow limit of a deep equal-row rank-1 network with hidden widths
/// `k_1 … k_{d−1}`. The chained energy relations between consecutive layers
/// are integrated alongside the flow and checked at the end.
pub fn solve_deep(
    nonlin: Nonlin,
    widths: &[usize],
    b0: f64,
    w0: &[f64],
    a0: f64,
) -> Result<TheorySol, TheoryError> {
    let m = widths.len();
    if m == 0 || widths.contains(&0) || w0.len() + 1 != m {
        return Err(TheoryError::BadInput(format!(
            "{} hidden widths need {} interior scalars, got {}",
            m,
            m.saturating_sub(1),
            w0.len()
        )));
    }
    // State: m + 1 layer scalars, then m relation accumulators.
    let mut y0 = vec![b0];
    y0.extend_from_slice(w0);
    y0.push(a0);
    y0.extend(std::iter::repeat(0.0).take(m));

    let rhs = |_: f64, y: &[f64], dy: &mut [f64]| -> Result<(), TheoryError> {
        let s = &y[..=m];
        let c = chain(nonlin, widths, s);
        // e_i: negative gradient of the loss with respect to p_i.
        let mut e = vec![0.0; m];
        e[m - 1] = nonlin.deriv(c.pre[m - 1]) * s[m] * c.r;
        for i in (0..m - 1).rev() {
            e[i] = nonlin.deriv(c.pre[i]) * s[i + 1] * widths[i + 1] as f64 * e[i + 1];
        }
        dy[0] = e[0];
        for i in 1..m {
            dy[i] = e[i] * c.h[i - 1];
        }
        dy[m] = c.r * c.h[m - 1];
        // Relation j links source s[j] to target s[j+1]:
        // s[j+1] ds[j+1] = h_j / (φ′(p_j) k_{j+1} h_{j−1}) ds[j].
        for j in 0..m {
            let d = nonlin.deriv(c.pre[j]);
            if d == 0.0 {
                return Err(TheoryError::Singular { z: c.pre[j] });
            }
            let h_prev = if j == 0 { 1.0 } else { c.h[j - 1] };
            let k_next = if j + 1 < m { widths[j + 1] as f64 } else { 1.0 };
            let g = c.h[j] / (d * k_next * h_prev);
            dy[m + 1 + j] = g * dy[j];
        }
        if dy.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(TheoryError::Singular { z: c.pre[0] })
        }
    };
    let run = dopri5(
        rhs,
        0.0,
        &y0,
        &OdeOptions::default(),
        |_, y| 0.5 * chain(nonlin, widths, &y[..=m]).r.powi(2) < DEEP_LOSS_TOL,
        |_, _| {},
    )?;
    let y = run.y;
    let c = chain(nonlin, widths, &y[..=m]);
    if !run.stopped {
        return Err(TheoryError::NotConverged {
            t: run.t,
            loss: 0.5 * c.r * c.r,
        });
    }
    let mut worst = 0.0f64;
    for j in 0..m {
        let target = y[j + 1];
        let target0 = y0[j + 1];
        let residual = (0.5 * (target * target - target0 * target0) - y[m + 1 + j]).abs();
        if residual > RELATION_FAIL_TOL {
            return Err(TheoryError::Relation { index: j, residual });
        }
        worst = worst.max(residual);
    }
    let interior = y[1..m].to_vec();
    Ok(TheorySol {
        nonlin,
        widths: widths.to_vec(),
        u0: a0,
        v0: b0,
        u: y[m],
        v: y[0],
        lambda: deep_lambda(nonlin, widths, y[0], &interior),
        interior,
        quad_error: worst,
        root_residual: c.r.abs(),
    })
}

/// Predicted spectral radius of a composed cycle: the product of the
/// per-step eigenvalues.
pub fn sequence_spectrum(steps: &[TheorySol]) -> f64 {
    steps.iter().map(|s| s.lambda).product()
}

/// Grid on which expanding pre-activations are looked for.
const SCAN_LO: i32 = -1000;
const SCAN_HI: i32 = 1000;
const SCAN_STEP: f64 = 0.01;
/// Chosen points must clear 1 by this much so the resulting radius is
/// unambiguous.
pub const EXPANDING_GAIN: f64 = 1.5;

/// Finds a pre-activation `b` in `[−10, 10]` with `|φ′(b)b/φ(b)| > 1.5`,
/// preferring the one nearest 1.
pub fn find_expanding_preactivation(nonlin: Nonlin) -> Result<f64, TheoryError> {
    let z = |i: i32| i as f64 * SCAN_STEP;
    let ok = |i: i32| {
        let v = z(i);
        let g = nonlin.gain(v);
        nonlin.eval(v) != 0.0 && g.is_finite() && g.abs() > EXPANDING_GAIN
    };
    (SCAN_LO + 1..SCAN_HI)
        .filter(|&i| ok(i - 1) && ok(i) && ok(i + 1))
        .min_by(|&i, &j| (z(i) - 1.0).abs().total_cmp(&(z(j) - 1.0).abs()))
        .map(z)
        .ok_or_else(|| TheoryError::NoExpandingInterval(nonlin.to_string()))
}

/// A one-hidden-layer net `f(z) = x aᵀφ(b xᵀz)` with equal rows that maps
/// `x` to itself but whose Jacobian there has spectral radius above 1.
pub fn construct_non_attractor(nonlin: Nonlin, x: &[f64], k: usize) -> Result<(Net, f64), TheoryError> {
    let n = norm2(x);
    if (n - 1.0).abs() > 1e-12 || k == 0 {
        return Err(TheoryError::BadInput(format!("need unit x and k > 0 (‖x‖ = {n}, k = {k})")));
    }
    let b = find_expanding_preactivation(nonlin)?;
    let a = 1.0 / (k as f64 * nonlin.eval(b));
    let w_in = Mat::outer(&vec![b; k], x);
    let w_out = Mat::outer(x, &vec![a; k]);
    let net = Net::new(vec![w_in, w_out], nonlin).map_err(|e| TheoryError::BadInput(e.to_string()))?;
    Ok((net, b))
}

/// One row of a theory report.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryRow {
    pub nonlin: String,
    pub k: usize,
    pub u0: f64,
    pub v0: f64,
    pub u: f64,
    pub v: f64,
    pub lambda_theory: f64,
    pub lambda_trained: Option<f64>,
}

impl TheoryRow {
    pub const HEADER: [&'static str; 8] = ["nonlin", "k", "u0", "v0", "u", "v", "lambda_theory", "lambda_trained"];

    pub fn from_sol(sol: &TheorySol, lambda_trained: Option<f64>) -> Self {
        Self {
            nonlin: sol.nonlin.to_string(),
            k: sol.widths.first().copied().unwrap_or(0),
            u0: sol.u0,
            v0: sol.v0,
            u: sol.u,
            v: sol.v,
            lambda_theory: sol.lambda,
            lambda_trained,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::spectral_radius;

    #[test]
    fn sigmoid_example() {
        let s = solve_one_hidden(Nonlin::Sigmoid, 2, 1.0, 1.0).unwrap();
        assert!((s.u - 0.697).abs() < 1e-3, "{s:?}");
        assert!((s.v - 0.929).abs() < 1e-3, "{s:?}");
        assert!((s.lambda - 0.263).abs() < 1e-3, "{s:?}");
        assert!(s.root_residual < 1e-10);
        // φ/φ′ = 1 + e^z integrates in closed form.
        let closed = (s.v - 1.0) + s.v.exp() - 1f64.exp();
        assert!((0.5 * (s.u * s.u - 1.0) - closed).abs() < 1e-10);
        assert!(energy_residual(Nonlin::Sigmoid, 1.0, 1.0, s.u, s.v).unwrap().abs() < 1e-8);
    }

    #[test]
    fn exp2_example_matches_closed_system() {
        for (k, want) in [(1, 0.6), (2, 0.28), (3, 0.16)] {
            let s = solve_one_hidden(Nonlin::Exp2, k, 0.0, 0.0).unwrap();
            assert!((s.lambda - want).abs() < 5e-3, "k={k}: {s:?}");
            // u² = v and √v e^{2v} = 1/k.
            assert!((s.u * s.u - s.v).abs() < 1e-10);
            assert!((s.v.sqrt() * (2.0 * s.v).exp() - 1.0 / k as f64).abs() < 1e-10);
        }
    }

    #[test]
    fn identity_is_marginal() {
        for k in 1..4 {
            let s = solve_one_hidden(Nonlin::Identity, k, 0.5, 0.5).unwrap();
            assert_eq!(s.lambda, 1.0);
        }
    }

    #[test]
    fn starting_on_the_constraint_does_not_move() {
        let b = 0.4;
        let a = 1.0 / (3.0 * Nonlin::Sigmoid.eval(b));
        let s = solve_one_hidden(Nonlin::Sigmoid, 3, a, b).unwrap();
        assert_eq!((s.u, s.v), (a, b));
        let f = integrate_reduced_ode(Nonlin::Sigmoid, 3, a, b, 1e-20).unwrap();
        assert_eq!(f.points.len(), 1);
    }

    #[test]
    fn ode_and_closed_form_agree() {
        for (nl, u0, v0) in [
            (Nonlin::Sigmoid, 1.0, 1.0),
            (Nonlin::Sigmoid, 0.1, -0.5),
            (Nonlin::Exp2, 0.0, 0.0),
            (Nonlin::Swish, 0.5, 1.0),
        ] {
            for k in [1, 2, 4] {
                let s = solve_one_hidden(nl, k, u0, v0).unwrap();
                let f = integrate_reduced_ode(nl, k, u0, v0, 1e-20).unwrap();
                let p = f.last();
                assert!((p.a - s.u).abs() < 1e-6 && (p.b - s.v).abs() < 1e-6, "{nl} k={k}: {s:?} vs {p:?}");
                assert!(f.energy_drift < 1e-8, "{nl} k={k}: drift {}", f.energy_drift);
            }
        }
    }

    #[test]
    fn deep_depth_two_reduces_to_one_hidden() {
        let a = solve_deep(Nonlin::Sigmoid, &[2], 1.0, &[], 1.0).unwrap();
        let b = solve_one_hidden(Nonlin::Sigmoid, 2, 1.0, 1.0).unwrap();
        assert!((a.u - b.u).abs() < 1e-8 && (a.v - b.v).abs() < 1e-8);
        assert!((a.lambda - b.lambda).abs() < 1e-8);
    }

    #[test]
    fn power_law_depth() {
        for m in [0.5, 2.0] {
            for d in 2..=4usize {
                let widths = vec![1; d - 1];
                let w0 = vec![1.0; d - 2];
                let s = solve_deep(Nonlin::Power(m), &widths, 1.0, &w0, 0.5).unwrap();
                assert!((s.lambda - m.powi(d as i32 - 1)).abs() < 1e-6, "m={m} d={d}: {s:?}");
                // Consecutive layers satisfy w_{i+1}² − w_{i+1}⁰² = (w_i² − w_i⁰²)/m.
                let mut layers = vec![(s.v, 1.0)];
                layers.extend(s.interior.iter().map(|w| (*w, 1.0)));
                for pair in layers.windows(2) {
                    let lhs = pair[1].0 * pair[1].0 - pair[1].1 * pair[1].1;
                    let rhs = (pair[0].0 * pair[0].0 - pair[0].1 * pair[0].1) / m;
                    assert!((lhs - rhs).abs() < 1e-6, "m={m} d={d}");
                }
            }
        }
    }

    #[test]
    fn deep_relations_close_for_sigmoid() {
        let s = solve_deep(Nonlin::Sigmoid, &[2, 3, 2], 0.5, &[0.4, 0.3], 0.2).unwrap();
        assert!(s.quad_error < 1e-6, "{s:?}");
        assert!(s.root_residual <= (2.0 * DEEP_LOSS_TOL).sqrt());
    }

    #[test]
    fn sequence_product() {
        let s = solve_one_hidden(Nonlin::Sigmoid, 2, 1.0, 1.0).unwrap();
        assert_eq!(sequence_spectrum(std::slice::from_ref(&s)), s.lambda);
        let three = vec![s.clone(), s.clone(), s.clone()];
        assert!((sequence_spectrum(&three) - s.lambda.powi(3)).abs() < 1e-15);
        // One expanding factor can be outweighed by contracting ones.
        let mut big = s.clone();
        big.lambda = 1.8;
        let mixed = vec![big, s.clone(), s.clone()];
        assert!(sequence_spectrum(&mixed) < 1.0);
    }

    #[test]
    fn non_attractor_exp2() {
        let x = [0.6, 0.8];
        let (net, b) = construct_non_attractor(Nonlin::Exp2, &x, 3).unwrap();
        assert_eq!(b, 1.0);
        let y = net.apply(&x).unwrap();
        assert!(y.iter().zip(&x).all(|(a, b)| (a - b).abs() < 1e-12));
        let rho = spectral_radius(&net.jacobian(&x).unwrap(), 1e-10, 5000).unwrap().radius;
        assert!((rho - 2.0).abs() < 1e-8);
    }

    #[test]
    fn non_attractor_sigmoid_and_failure() {
        let x = [1.0, 0.0, 0.0];
        let (net, b) = construct_non_attractor(Nonlin::Sigmoid, &x, 2).unwrap();
        assert!(b < 0.0);
        let rho = spectral_radius(&net.jacobian(&x).unwrap(), 1e-10, 5000).unwrap().radius;
        assert!(rho > 1.0);
        assert!(matches!(
            construct_non_attractor(Nonlin::Identity, &x, 2),
            Err(TheoryError::NoExpandingInterval(_))
        ));
    }
}
