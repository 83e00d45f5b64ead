//! Log-barrier interior-point core for smooth convex programs.
//!
//! Problems arrive as one objective [`Term`] plus inequality constraint
//! terms (`g_i(x) <= 0`). Every term knows its value, gradient, and Hessian,
//! so the solver is a textbook barrier method: minimise
//! `t*f0(x) - sum ln(-g_i(x))` by damped Newton, multiply `t` by `mu`,
//! repeat until the duality gap `m/t` is small relative to the objective.
//!
//! [`minimize`] needs a strictly feasible start; [`phase_one`] manufactures
//! one by minimising the max constraint violation (the standard auxiliary
//! problem with one slack variable) when the caller has none.

use nalgebra::{Cholesky, DMatrix, DVector};
use std::error::Error;
use std::fmt;

/// One smooth scalar term over the decision vector.
///
/// Quadratic-form entry lists follow a write-once convention: the value is
/// literally `sum v * x_i * x_j` over the listed entries, so cross terms
/// carry their full coefficient once (e.g. `(a+b)^2` is
/// `[(a,a,1), (a,b,2), (b,b,1)]`).
#[derive(Debug, Clone)]
pub(crate) enum Term {
    /// `a . x + b`
    Affine { a: Vec<(usize, f64)>, b: f64 },
    /// `sum v x_i x_j + a . x + b`
    Quadratic {
        q: Vec<(usize, usize, f64)>,
        a: Vec<(usize, f64)>,
        b: f64,
    },
    /// `sum_t c_t (q_t(x))^2 + a . x + b` with each `q_t` a quadratic form.
    /// Convex whenever every `q_t(x) >= 0` on the feasible set and each
    /// form is positive semidefinite (true for the squared-magnitude forms
    /// this crate builds).
    SumQuartic {
        quads: Vec<(f64, Vec<(usize, usize, f64)>)>,
        a: Vec<(usize, f64)>,
        b: f64,
    },
    /// `top_coef * x_top - log2(1 + arg_coef * x_arg)`
    LogGap {
        top: usize,
        top_coef: f64,
        arg: usize,
        arg_coef: f64,
    },
    /// `sum c * x_p^2 / x_z` (quadratic-over-linear; convex for `x_z > 0`).
    Qol { terms: Vec<(usize, usize, f64)> },
    /// `inner(x) - x_s`: phase-one wrapper.
    Shifted { inner: Box<Term>, s: usize },
}

const LN2: f64 = std::f64::consts::LN_2;

fn quad_value(q: &[(usize, usize, f64)], x: &DVector<f64>) -> f64 {
    q.iter().map(|&(i, j, v)| v * x[i] * x[j]).sum()
}

fn quad_grad(q: &[(usize, usize, f64)], x: &DVector<f64>, w: f64, g: &mut DVector<f64>) {
    for &(i, j, v) in q {
        g[i] += w * v * x[j];
        g[j] += w * v * x[i];
    }
}

fn quad_hess(q: &[(usize, usize, f64)], w: f64, h: &mut DMatrix<f64>) {
    for &(i, j, v) in q {
        h[(i, j)] += w * v;
        h[(j, i)] += w * v;
    }
}

impl Term {
    pub(crate) fn eval(&self, x: &DVector<f64>) -> f64 {
        match self {
            Term::Affine { a, b } => a.iter().map(|&(i, v)| v * x[i]).sum::<f64>() + b,
            Term::Quadratic { q, a, b } => {
                quad_value(q, x) + a.iter().map(|&(i, v)| v * x[i]).sum::<f64>() + b
            }
            Term::SumQuartic { quads, a, b } => {
                let mut acc = *b;
                for (c, q) in quads {
                    let qv = quad_value(q, x);
                    acc += c * qv * qv;
                }
                acc + a.iter().map(|&(i, v)| v * x[i]).sum::<f64>()
            }
            Term::LogGap {
                top,
                top_coef,
                arg,
                arg_coef,
            } => top_coef * x[*top] - (1.0 + arg_coef * x[*arg]).ln() / LN2,
            Term::Qol { terms } => terms
                .iter()
                .map(|&(p, z, c)| {
                    if x[z] <= 0.0 {
                        f64::INFINITY
                    } else {
                        c * x[p] * x[p] / x[z]
                    }
                })
                .sum(),
            Term::Shifted { inner, s } => inner.eval(x) - x[*s],
        }
    }

    pub(crate) fn add_grad(&self, x: &DVector<f64>, w: f64, g: &mut DVector<f64>) {
        match self {
            Term::Affine { a, .. } => {
                for &(i, v) in a {
                    g[i] += w * v;
                }
            }
            Term::Quadratic { q, a, .. } => {
                quad_grad(q, x, w, g);
                for &(i, v) in a {
                    g[i] += w * v;
                }
            }
            Term::SumQuartic { quads, a, .. } => {
                for (c, q) in quads {
                    let qv = quad_value(q, x);
                    quad_grad(q, x, w * 2.0 * c * qv, g);
                }
                for &(i, v) in a {
                    g[i] += w * v;
                }
            }
            Term::LogGap {
                top,
                top_coef,
                arg,
                arg_coef,
            } => {
                g[*top] += w * top_coef;
                g[*arg] -= w * arg_coef / ((1.0 + arg_coef * x[*arg]) * LN2);
            }
            Term::Qol { terms } => {
                for &(p, z, c) in terms {
                    g[p] += w * 2.0 * c * x[p] / x[z];
                    g[z] -= w * c * x[p] * x[p] / (x[z] * x[z]);
                }
            }
            Term::Shifted { inner, s } => {
                inner.add_grad(x, w, g);
                g[*s] -= w;
            }
        }
    }

    pub(crate) fn add_hess(&self, x: &DVector<f64>, w: f64, h: &mut DMatrix<f64>) {
        match self {
            Term::Affine { .. } => {}
            Term::Quadratic { q, .. } => quad_hess(q, w, h),
            Term::SumQuartic { quads, .. } => {
                for (c, q) in quads {
                    let qv = quad_value(q, x);
                    // 2c (grad q)(grad q)^T + 2c q hess(q)
                    let mut r = DVector::zeros(x.len());
                    quad_grad(q, x, 1.0, &mut r);
                    for (i, ri) in r.iter().enumerate() {
                        if *ri == 0.0 {
                            continue;
                        }
                        for (j, rj) in r.iter().enumerate() {
                            if *rj != 0.0 {
                                h[(i, j)] += w * 2.0 * c * ri * rj;
                            }
                        }
                    }
                    quad_hess(q, w * 2.0 * c * qv, h);
                }
            }
            Term::LogGap { arg, arg_coef, .. } => {
                let d = 1.0 + arg_coef * x[*arg];
                h[(*arg, *arg)] += w * arg_coef * arg_coef / (d * d * LN2);
            }
            Term::Qol { terms } => {
                for &(p, z, c) in terms {
                    let (xp, xz) = (x[p], x[z]);
                    h[(p, p)] += w * 2.0 * c / xz;
                    h[(p, z)] -= w * 2.0 * c * xp / (xz * xz);
                    h[(z, p)] -= w * 2.0 * c * xp / (xz * xz);
                    h[(z, z)] += w * 2.0 * c * xp * xp / (xz * xz * xz);
                }
            }
            Term::Shifted { inner, .. } => inner.add_hess(x, w, h),
        }
    }

    /// Rescale to new coordinates `x = d .* y` (diagonal change of
    /// variables), returning the term as a function of `y`.
    pub(crate) fn scaled(&self, d: &[f64]) -> Term {
        match self {
            Term::Affine { a, b } => Term::Affine {
                a: a.iter().map(|&(i, v)| (i, v * d[i])).collect(),
                b: *b,
            },
            Term::Quadratic { q, a, b } => Term::Quadratic {
                q: q.iter().map(|&(i, j, v)| (i, j, v * d[i] * d[j])).collect(),
                a: a.iter().map(|&(i, v)| (i, v * d[i])).collect(),
                b: *b,
            },
            Term::SumQuartic { quads, a, b } => Term::SumQuartic {
                quads: quads
                    .iter()
                    .map(|(c, q)| {
                        (
                            *c,
                            q.iter().map(|&(i, j, v)| (i, j, v * d[i] * d[j])).collect(),
                        )
                    })
                    .collect(),
                a: a.iter().map(|&(i, v)| (i, v * d[i])).collect(),
                b: *b,
            },
            Term::LogGap {
                top,
                top_coef,
                arg,
                arg_coef,
            } => Term::LogGap {
                top: *top,
                top_coef: top_coef * d[*top],
                arg: *arg,
                arg_coef: arg_coef * d[*arg],
            },
            Term::Qol { terms } => Term::Qol {
                terms: terms
                    .iter()
                    .map(|&(p, z, c)| (p, z, c * d[p] * d[p] / d[z]))
                    .collect(),
            },
            Term::Shifted { inner, s } => Term::Shifted {
                inner: Box::new(inner.scaled(d)),
                s: *s,
            },
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BarrierSpec {
    pub mu: f64,
    /// Stop when the gap `m/t` falls below this fraction of the objective.
    pub gap_rel: f64,
    /// Newton decrement threshold per centering stage.
    pub newton_tol: f64,
    pub max_newton_per_stage: usize,
    pub max_stages: usize,
}

impl Default for BarrierSpec {
    fn default() -> Self {
        BarrierSpec {
            mu: 20.0,
            gap_rel: 1e-6,
            newton_tol: 1e-9,
            max_newton_per_stage: 60,
            max_stages: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum BarrierStatus {
    Converged,
    IterationCap,
    LineSearchStall,
}

#[derive(Debug, Clone)]
pub(crate) struct BarrierOutcome {
    pub x: DVector<f64>,
    // Diagnostics; the production path judges candidates by exact
    // re-evaluation rather than by solver-reported optimality.
    #[allow(dead_code)]
    pub objective: f64,
    #[allow(dead_code)]
    pub gap: f64,
    #[allow(dead_code)]
    pub status: BarrierStatus,
    #[allow(dead_code)]
    pub newton_iters: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum BarrierError {
    /// The start point violates (or touches) a constraint.
    NotInterior { index: usize, value: f64 },
    Numerical(String),
}

impl fmt::Display for BarrierError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BarrierError::NotInterior { index, value } => {
                write!(f, "start point is not strictly feasible: g[{index}] = {value}")
            }
            BarrierError::Numerical(msg) => write!(f, "numerical failure: {msg}"),
        }
    }
}

impl Error for BarrierError {}

fn is_interior(cons: &[Term], x: &DVector<f64>) -> bool {
    cons.iter().all(|c| {
        let v = c.eval(x);
        v.is_finite() && v < 0.0
    })
}

fn barrier_value(obj: &Term, cons: &[Term], x: &DVector<f64>, t: f64) -> f64 {
    let f0 = obj.eval(x);
    if !f0.is_finite() {
        return f64::INFINITY;
    }
    let mut phi = t * f0;
    for c in cons {
        let v = c.eval(x);
        if !(v < 0.0) {
            return f64::INFINITY;
        }
        phi -= (-v).ln();
    }
    phi
}

/// Solve `H dx = -g`, adding an escalating ridge when the factorisation
/// fails; falls back to steepest descent as a last resort.
fn newton_direction(h: &DMatrix<f64>, g: &DVector<f64>) -> DVector<f64> {
    let n = g.len();
    let scale = h.diagonal().amax().max(1e-300);
    let mut ridge = 0.0f64;
    for _ in 0..14 {
        let mut hh = h.clone();
        if ridge > 0.0 {
            for i in 0..n {
                hh[(i, i)] += ridge;
            }
        }
        if let Some(ch) = Cholesky::new(hh) {
            return ch.solve(&(-g));
        }
        ridge = if ridge == 0.0 { 1e-12 * scale } else { ridge * 100.0 };
    }
    -g / scale
}

/// Minimise `obj` subject to `cons[i](x) <= 0` from a strictly feasible
/// start. Returns the final iterate with its certified duality gap.
pub(crate) fn minimize(
    obj: &Term,
    cons: &[Term],
    x0: &DVector<f64>,
    spec: &BarrierSpec,
) -> Result<BarrierOutcome, BarrierError> {
    for (i, c) in cons.iter().enumerate() {
        let v = c.eval(x0);
        if !(v.is_finite() && v < 0.0) {
            return Err(BarrierError::NotInterior { index: i, value: v });
        }
    }
    let n = x0.len();
    let m = cons.len().max(1) as f64;
    let mut x = x0.clone();
    let f0_start = obj.eval(&x);
    if !f0_start.is_finite() {
        return Err(BarrierError::Numerical("objective undefined at start".into()));
    }
    let mut t = (m / (0.1 * f0_start.abs().max(1e-3))).clamp(1e-2, 1e6);
    let mut newton_iters = 0usize;
    let mut status = BarrierStatus::IterationCap;

    for _stage in 0..spec.max_stages {
        // Center at the current t with damped Newton.
        for _ in 0..spec.max_newton_per_stage {
            let mut g = DVector::zeros(n);
            let mut h = DMatrix::zeros(n, n);
            obj.add_grad(&x, t, &mut g);
            obj.add_hess(&x, t, &mut h);
            let mut degenerate = false;
            for c in cons {
                let v = c.eval(&x);
                if !(v < 0.0) {
                    degenerate = true;
                    break;
                }
                let w = -1.0 / v;
                let mut gc = DVector::zeros(n);
                c.add_grad(&x, 1.0, &mut gc);
                g.axpy(w, &gc, 1.0);
                c.add_hess(&x, w, &mut h);
                // w^2 * gc gc^T
                for (i, gi) in gc.iter().enumerate() {
                    if *gi == 0.0 {
                        continue;
                    }
                    for (j, gj) in gc.iter().enumerate() {
                        if *gj != 0.0 {
                            h[(i, j)] += w * w * gi * gj;
                        }
                    }
                }
            }
            if degenerate {
                return Err(BarrierError::Numerical(
                    "iterate left the feasible interior".into(),
                ));
            }
            let dx = newton_direction(&h, &g);
            let decrement = -g.dot(&dx);
            newton_iters += 1;
            if decrement <= 2.0 * spec.newton_tol {
                break;
            }
            // Backtrack into the interior, then Armijo on the barrier.
            let phi0 = barrier_value(obj, cons, &x, t);
            let slope = g.dot(&dx); // negative
            let mut s = 1.0f64;
            let mut stalled = true;
            for _ in 0..70 {
                let trial = &x + s * &dx;
                let phi = barrier_value(obj, cons, &trial, t);
                if phi.is_finite() && phi <= phi0 + 0.01 * s * slope {
                    x = trial;
                    stalled = false;
                    break;
                }
                s *= 0.5;
            }
            if stalled {
                return Ok(BarrierOutcome {
                    objective: obj.eval(&x),
                    gap: m / t,
                    status: BarrierStatus::LineSearchStall,
                    newton_iters,
                    x,
                });
            }
        }
        let f_now = obj.eval(&x);
        let gap = m / t;
        if gap <= spec.gap_rel * f_now.abs().max(1e-9) || gap <= 1e-14 {
            status = BarrierStatus::Converged;
            break;
        }
        t *= spec.mu;
    }
    Ok(BarrierOutcome {
        objective: obj.eval(&x),
        gap: m / t,
        status,
        newton_iters,
        x,
    })
}

/// Find a strictly feasible point for `cons` by minimising the max
/// violation: variables `(x, s)`, objective `s`, constraints
/// `g_i(x) - s <= 0`. Returns `None` when the system appears infeasible.
pub(crate) fn phase_one(
    cons: &[Term],
    x0: &DVector<f64>,
    spec: &BarrierSpec,
) -> Option<DVector<f64>> {
    let n = x0.len();
    let worst = cons
        .iter()
        .map(|c| c.eval(x0))
        .fold(f64::NEG_INFINITY, f64::max);
    if !worst.is_finite() {
        return None;
    }
    let s0 = worst + worst.abs().max(1.0) * 1e-2;
    let shifted: Vec<Term> = cons
        .iter()
        .map(|c| Term::Shifted {
            inner: Box::new(c.clone()),
            s: n,
        })
        .collect();
    let obj = Term::Affine {
        a: vec![(n, 1.0)],
        b: 0.0,
    };
    let mut start = DVector::zeros(n + 1);
    start.rows_mut(0, n).copy_from(x0);
    start[n] = s0;
    let relaxed = BarrierSpec {
        gap_rel: 1e-4,
        max_stages: 30,
        ..spec.clone()
    };
    let outcome = minimize(&obj, &shifted, &start, &relaxed).ok()?;
    let x = outcome.x.rows(0, n).into_owned();
    if is_interior(cons, &x) {
        Some(x)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Finite-difference check of gradient and Hessian at a point.
    fn fd_check(term: &Term, x: &DVector<f64>, tol: f64) {
        let n = x.len();
        let mut g = DVector::zeros(n);
        term.add_grad(x, 1.0, &mut g);
        let mut h = DMatrix::zeros(n, n);
        term.add_hess(x, 1.0, &mut h);
        let eps = 1e-6;
        for i in 0..n {
            let mut xp = x.clone();
            xp[i] += eps;
            let mut xm = x.clone();
            xm[i] -= eps;
            let fd = (term.eval(&xp) - term.eval(&xm)) / (2.0 * eps);
            let scale = g[i].abs().max(1.0);
            assert!(
                (fd - g[i]).abs() <= tol * scale,
                "grad[{i}]: fd {fd} vs analytic {}",
                g[i]
            );
            let mut gp = DVector::zeros(n);
            term.add_grad(&xp, 1.0, &mut gp);
            let mut gm = DVector::zeros(n);
            term.add_grad(&xm, 1.0, &mut gm);
            for j in 0..n {
                let fdh = (gp[j] - gm[j]) / (2.0 * eps);
                let scale = h[(j, i)].abs().max(1.0);
                assert!(
                    (fdh - h[(j, i)]).abs() <= tol * scale,
                    "hess[{j},{i}]: fd {fdh} vs analytic {}",
                    h[(j, i)]
                );
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n = 5;
            let mut x = DVector::from_fn(n, |_, _| 0.3 + rng.gen::<f64>());
            let affine = Term::Affine {
                a: vec![(0, 1.3), (2, -0.7)],
                b: 0.4,
            };
            fd_check(&affine, &x, 1e-5);
            let quad = Term::Quadratic {
                q: vec![(0, 0, 1.0), (0, 1, 2.0), (1, 1, 1.0), (2, 3, -0.5)],
                a: vec![(4, 2.0)],
                b: -1.0,
            };
            fd_check(&quad, &x, 1e-5);
            let quartic = Term::SumQuartic {
                quads: vec![
                    (0.25, vec![(0, 0, 1.0), (1, 1, 1.0)]),
                    (-0.1, vec![(2, 2, 1.0), (2, 3, 1.0)]),
                ],
                a: vec![(0, -0.3)],
                b: 0.2,
            };
            fd_check(&quartic, &x, 1e-4);
            let lg = Term::LogGap {
                top: 4,
                top_coef: 1.5,
                arg: 1,
                arg_coef: 2.0,
            };
            fd_check(&lg, &x, 1e-5);
            let qol = Term::Qol {
                terms: vec![(0, 1, 0.8), (2, 3, 1.2)],
            };
            fd_check(&qol, &x, 1e-5);
            let shifted = Term::Shifted {
                inner: Box::new(Term::Quadratic {
                    q: vec![(0, 0, 1.0)],
                    a: vec![],
                    b: 0.0,
                }),
                s: 4,
            };
            fd_check(&shifted, &x, 1e-5);
            // Scaled terms evaluate consistently: f_scaled(y) = f(d .* y).
            let d = vec![2.0, 0.5, 3.0, 1.0, 0.25];
            for t in [&affine, &quad, &quartic, &lg, &qol] {
                let st = t.scaled(&d);
                let xy = DVector::from_fn(n, |i, _| x[i] * d[i]);
                let a = st.eval(&x);
                let b = t.eval(&xy);
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
            x[0] += 1.0;
        }
    }

    #[test]
    fn constrained_parabola_hits_its_active_bound() {
        // min (x-3)^2 subject to x <= 2: optimum x = 2.
        let obj = Term::Quadratic {
            q: vec![(0, 0, 1.0)],
            a: vec![(0, -6.0)],
            b: 9.0,
        };
        let cons = vec![Term::Affine {
            a: vec![(0, 1.0)],
            b: -2.0,
        }];
        let out = minimize(
            &obj,
            &cons,
            &DVector::from_vec(vec![0.0]),
            &BarrierSpec::default(),
        )
        .unwrap();
        assert_eq!(out.status, BarrierStatus::Converged);
        assert!((out.x[0] - 2.0).abs() < 1e-4, "x = {}", out.x[0]);
        assert!((out.objective - 1.0).abs() < 1e-3);
    }

    #[test]
    fn projection_onto_a_halfspace_is_symmetric() {
        // min x^2 + y^2 subject to x + y >= 2: optimum (1, 1).
        let obj = Term::Quadratic {
            q: vec![(0, 0, 1.0), (1, 1, 1.0)],
            a: vec![],
            b: 0.0,
        };
        let cons = vec![Term::Affine {
            a: vec![(0, -1.0), (1, -1.0)],
            b: 2.0,
        }];
        let out = minimize(
            &obj,
            &cons,
            &DVector::from_vec(vec![3.0, 3.0]),
            &BarrierSpec::default(),
        )
        .unwrap();
        assert!((out.x[0] - 1.0).abs() < 1e-4);
        assert!((out.x[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn quadratic_over_linear_box_program() {
        // min p^2/z with 0.1 <= p, z <= 2: optimum (0.1, 2) -> 0.005.
        let obj = Term::Qol {
            terms: vec![(0, 1, 1.0)],
        };
        let cons = vec![
            Term::Affine {
                a: vec![(0, -1.0)],
                b: 0.1,
            },
            Term::Affine {
                a: vec![(1, 1.0)],
                b: -2.0,
            },
            Term::Affine {
                a: vec![(1, -1.0)],
                b: 0.01,
            },
        ];
        let out = minimize(
            &obj,
            &cons,
            &DVector::from_vec(vec![1.0, 1.0]),
            &BarrierSpec::default(),
        )
        .unwrap();
        assert!((out.x[0] - 0.1).abs() < 1e-3);
        assert!((out.x[1] - 2.0).abs() < 1e-3);
        assert!((out.objective - 0.005).abs() < 1e-4);
    }

    #[test]
    fn rate_constraint_couples_log_and_linear_vars() {
        // min p^2/z  s.t.  z <= log2(1 + 4p), 0.01 <= p <= 1, z >= 0.5.
        // At the optimum z hits log2(1+4p) and z = 0.5 -> p = (2^0.5-1)/4.
        let obj = Term::Qol {
            terms: vec![(0, 1, 1.0)],
        };
        let cons = vec![
            Term::LogGap {
                top: 1,
                top_coef: 1.0,
                arg: 0,
                arg_coef: 4.0,
            },
            Term::Affine {
                a: vec![(0, -1.0)],
                b: 0.01,
            },
            Term::Affine {
                a: vec![(0, 1.0)],
                b: -1.0,
            },
            Term::Affine {
                a: vec![(1, -1.0)],
                b: 0.5,
            },
        ];
        let out = minimize(
            &obj,
            &cons,
            &DVector::from_vec(vec![0.5, 0.8]),
            &BarrierSpec::default(),
        )
        .unwrap();
        let p_star = (2f64.powf(0.5) - 1.0) / 4.0;
        assert!((out.x[0] - p_star).abs() < 1e-3, "p = {}", out.x[0]);
        assert!((out.x[1] - 0.5).abs() < 1e-3, "z = {}", out.x[1]);
    }

    #[test]
    fn start_must_be_strictly_interior() {
        let obj = Term::Affine {
            a: vec![(0, 1.0)],
            b: 0.0,
        };
        let cons = vec![Term::Affine {
            a: vec![(0, -1.0)],
            b: 0.0,
        }];
        // x = 0 sits exactly on the boundary.
        let err = minimize(&obj, &cons, &DVector::from_vec(vec![0.0]), &BarrierSpec::default())
            .unwrap_err();
        assert!(matches!(err, BarrierError::NotInterior { .. }));
    }

    #[test]
    fn phase_one_recovers_an_interior_point() {
        // 1 <= x <= 3 from the infeasible start x = 0.
        let cons = vec![
            Term::Affine {
                a: vec![(0, -1.0)],
                b: 1.0,
            },
            Term::Affine {
                a: vec![(0, 1.0)],
                b: -3.0,
            },
        ];
        let x = phase_one(&cons, &DVector::from_vec(vec![0.0]), &BarrierSpec::default())
            .expect("feasible system");
        assert!(x[0] > 1.0 && x[0] < 3.0, "x = {}", x[0]);
        // x <= 1 and x >= 2 cannot both hold.
        let bad = vec![
            Term::Affine {
                a: vec![(0, 1.0)],
                b: -1.0,
            },
            Term::Affine {
                a: vec![(0, -1.0)],
                b: 2.0,
            },
        ];
        assert!(phase_one(&bad, &DVector::from_vec(vec![0.0]), &BarrierSpec::default()).is_none());
    }

    #[test]
    fn binding_budget_is_respected_to_tolerance() {
        // min (p1-2)^2 + (p2-2)^2 s.t. p1 + p2 <= 1, p >= 0:
        // symmetric optimum at p1 = p2 = 0.5.
        let obj = Term::Quadratic {
            q: vec![(0, 0, 1.0), (1, 1, 1.0)],
            a: vec![(0, -4.0), (1, -4.0)],
            b: 8.0,
        };
        let cons = vec![
            Term::Affine {
                a: vec![(0, 1.0), (1, 1.0)],
                b: -1.0,
            },
            Term::Affine {
                a: vec![(0, -1.0)],
                b: 0.0,
            },
            Term::Affine {
                a: vec![(1, -1.0)],
                b: 0.0,
            },
        ];
        let out = minimize(
            &obj,
            &cons,
            &DVector::from_vec(vec![0.2, 0.2]),
            &BarrierSpec::default(),
        )
        .unwrap();
        assert!((out.x[0] - 0.5).abs() < 1e-4);
        assert!((out.x[1] - 0.5).abs() < 1e-4);
        assert!(out.x[0] + out.x[1] <= 1.0 + 1e-9);
    }
}
