//! Box-constrained limited-memory quasi-Newton ascent with a projected
//! backtracking (Armijo) line search. Used both for hyperparameter fitting
//! (unbounded or loosely bounded raw parameters) and for acquisition
//! maximization over the unit cube.

use std::collections::VecDeque;

use crate::linalg::dot;
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct AscentConfig<T> {
    pub max_steps: usize,
    /// Stop once the projected-gradient infinity norm falls below this.
    pub grad_tol: T,
    /// Stop once an accepted step improves the objective by less than
    /// `ftol · max(1, |f|)`. Zero disables the test.
    pub ftol: T,
    pub memory: usize,
    pub lower: Option<Vec<T>>,
    pub upper: Option<Vec<T>>,
    /// Largest coordinate move of the first (unscaled) step.
    pub max_initial_step: T,
    pub max_backtracks: usize,
}

impl<T: Scalar> Default for AscentConfig<T> {
    fn default() -> Self {
        Self {
            max_steps: 500,
            grad_tol: T::of(1e-8),
            ftol: T::zero(),
            memory: 10,
            lower: None,
            upper: None,
            max_initial_step: T::one(),
            max_backtracks: 40,
        }
    }
}

impl<T: Scalar> AscentConfig<T> {
    pub fn with_bounds(mut self, lower: Vec<T>, upper: Vec<T>) -> Self {
        self.lower = Some(lower);
        self.upper = Some(upper);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    ObjectiveTolerance,
    MaxSteps,
    /// The step underflowed: the iterate did not change in floating point.
    Stalled,
    LineSearchFailed,
}

#[derive(Debug, Clone)]
pub struct AscentResult<T> {
    pub x: Vec<T>,
    pub value: T,
    pub grad: Vec<T>,
    /// Accepted steps.
    pub steps: usize,
    pub evaluations: usize,
    pub termination: Termination,
}

/// Iterate passed to the observer: step 0 is the starting point.
pub struct Iterate<'a, T> {
    pub step: usize,
    pub x: &'a [T],
    pub value: T,
    pub grad: &'a [T],
}

fn project<T: Scalar>(x: &mut [T], lower: Option<&[T]>, upper: Option<&[T]>) {
    if let Some(lo) = lower {
        x.iter_mut().zip(lo).for_each(|(v, l)| *v = v.max(*l));
    }
    if let Some(hi) = upper {
        x.iter_mut().zip(hi).for_each(|(v, h)| *v = v.min(*h));
    }
}

/// Gradient with components zeroed where a bound blocks ascent.
fn projected_gradient<T: Scalar>(x: &[T], g: &[T], lower: Option<&[T]>, upper: Option<&[T]>) -> Vec<T> {
    let mut pg = g.to_vec();
    for i in 0..x.len() {
        let at_lo = lower.is_some_and(|l| x[i] <= l[i]);
        let at_hi = upper.is_some_and(|u| x[i] >= u[i]);
        if (at_lo && g[i] < T::zero()) || (at_hi && g[i] > T::zero()) {
            pg[i] = T::zero();
        }
    }
    pg
}

fn inf_norm<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// Two-loop recursion producing an ascent direction from the masked gradient.
fn direction<T: Scalar>(pg: &[T], pairs: &VecDeque<(Vec<T>, Vec<T>, T)>) -> Vec<T> {
    // pairs hold (s, y, 1/(yᵀs)) with y the change of the *negated* gradient
    let mut q = pg.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = *rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * *yi);
        alphas.push(a);
    }
    if let Some((s, y, _)) = pairs.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|qi| *qi *= gamma);
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.into_iter().rev()) {
        let b = *rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * *si);
    }
    q
}

/// Maximizes `f` starting from `x0` (projected into the box first).
///
/// `f` returns the value and gradient; an `Err` at a trial point during the
/// line search is treated as a rejected step, while an `Err` at `x0` is
/// returned to the caller. `observe` sees every accepted iterate, including the
/// start.
pub fn maximize<T, E, F, O>(mut f: F, x0: Vec<T>, cfg: &AscentConfig<T>, mut observe: O) -> Result<AscentResult<T>, E>
where
    T: Scalar,
    F: FnMut(&[T]) -> Result<(T, Vec<T>), E>,
    O: FnMut(&Iterate<'_, T>),
{
    let lower = cfg.lower.as_deref();
    let upper = cfg.upper.as_deref();
    let mut x = x0;
    project(&mut x, lower, upper);
    let (mut fx, mut g) = f(&x)?;
    let mut evaluations = 1;
    observe(&Iterate { step: 0, x: &x, value: fx, grad: &g });

    let mut pairs: VecDeque<(Vec<T>, Vec<T>, T)> = VecDeque::with_capacity(cfg.memory);
    let mut steps = 0;
    let c1 = T::of(1e-4);
    let termination = loop {
        let pg = projected_gradient(&x, &g, lower, upper);
        if inf_norm(&pg) < cfg.grad_tol {
            break Termination::GradientTolerance;
        }
        if steps >= cfg.max_steps {
            break Termination::MaxSteps;
        }

        let mut p = direction(&pg, &pairs);
        for i in 0..p.len() {
            if pg[i] == T::zero() {
                p[i] = T::zero();
            }
        }
        if !(dot(&p, &pg) > T::zero()) || p.iter().any(|v| !v.is_finite()) {
            pairs.clear();
            p = pg.clone();
        }
        let mut t = if pairs.is_empty() {
            let m = inf_norm(&p);
            if m > cfg.max_initial_step {
                cfg.max_initial_step / m
            } else {
                T::one()
            }
        } else {
            T::one()
        };

        let mut accepted = None;
        let mut stalled = false;
        for _ in 0..=cfg.max_backtracks {
            let mut xt: Vec<T> = x.iter().zip(&p).map(|(xi, pi)| *xi + t * *pi).collect();
            project(&mut xt, lower, upper);
            if xt == x {
                stalled = true;
                break;
            }
            let step: Vec<T> = xt.iter().zip(&x).map(|(a, b)| *a - *b).collect();
            if let Ok((ft, gt)) = f(&xt) {
                evaluations += 1;
                if ft.is_finite() && ft >= fx + c1 * dot(&g, &step) {
                    accepted = Some((xt, ft, gt, step));
                    break;
                }
            } else {
                evaluations += 1;
            }
            t *= T::of(0.5);
        }

        let Some((xt, ft, gt, s)) = accepted else {
            if stalled {
                break Termination::Stalled;
            }
            if pairs.is_empty() {
                break Termination::LineSearchFailed;
            }
            pairs.clear();
            continue;
        };

        // curvature pair for the negated objective
        let y: Vec<T> = gt.iter().zip(&g).map(|(a, b)| *b - *a).collect();
        let sy = dot(&s, &y);
        if sy > T::of(1e-10) * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > T::zero() {
            if pairs.len() == cfg.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, T::one() / sy));
        }
        let improvement = ft - fx;
        x = xt;
        fx = ft;
        g = gt;
        steps += 1;
        observe(&Iterate { step: steps, x: &x, value: fx, grad: &g });
        if cfg.ftol > T::zero() && improvement <= cfg.ftol * fx.abs().max(T::one()) {
            break Termination::ObjectiveTolerance;
        }
    };

    Ok(AscentResult { x, value: fx, grad: g, steps, evaluations, termination })
}
