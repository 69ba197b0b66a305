//! Limited-memory BFGS with a strong-Wolfe line search.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsSettings {
    /// Number of stored correction pairs; `1` gives memoryless BFGS.
    pub memory: usize,
    pub max_iterations: usize,
    /// Stop when the gradient's Euclidean norm drops below this.
    pub gradient_tolerance: f64,
    /// Stop when the objective drops below this.
    pub objective_target: f64,
}

impl Default for LbfgsSettings {
    fn default() -> Self {
        Self { memory: 10, max_iterations: 500, gradient_tolerance: 1e-9, objective_target: f64::NEG_INFINITY }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    GradientTolerance,
    ObjectiveTarget,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub stop: StopReason,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Minimizes `f`, which returns the value and writes the gradient.
pub fn minimize<F>(mut f: F, x0: Vec<f64>, settings: &LbfgsSettings) -> Minimum
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut evals = 1;
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(settings.memory + 1);
    let mut iterations = 0;
    let mut stop = StopReason::MaxIterations;
    let mut d = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];

    loop {
        let gn = norm(&g);
        if fx <= settings.objective_target {
            stop = StopReason::ObjectiveTarget;
            break;
        }
        if gn <= settings.gradient_tolerance {
            stop = StopReason::GradientTolerance;
            break;
        }
        if iterations >= settings.max_iterations {
            break;
        }
        iterations += 1;

        // Two-loop recursion.
        d.copy_from_slice(&g);
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dot(s, &d);
            for (di, yi) in d.iter_mut().zip(y) {
                *di -= a * yi;
            }
            alphas.push(a);
        }
        let h0 = match hist.back() {
            Some((s, y, _)) => dot(s, y) / dot(y, y),
            None => 1.0 / gn.max(1e-300),
        };
        d.iter_mut().for_each(|v| *v *= h0);
        for ((s, y, rho), a) in hist.iter().zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, &d);
            for (di, si) in d.iter_mut().zip(s) {
                *di += (a - b) * si;
            }
        }
        d.iter_mut().for_each(|v| *v = -*v);
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            hist.clear();
            for (di, gi) in d.iter_mut().zip(&g) {
                *di = -gi / gn.max(1e-300);
            }
            slope = dot(&g, &d);
        }

        let Some((step, f_new, e)) = wolfe_search(&mut f, &x, fx, &d, slope, &mut x_new, &mut g_new) else {
            evals += 40;
            if hist.is_empty() {
                stop = StopReason::LineSearchFailed;
                break;
            }
            hist.clear();
            continue;
        };
        evals += e;
        let s: Vec<f64> = d.iter().map(|v| v * step).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        x.copy_from_slice(&x_new);
        g.copy_from_slice(&g_new);
        let decreased = f_new < fx;
        fx = f_new;
        if sy > 1e-16 * norm(&s) * norm(&y) {
            if hist.len() == settings.memory.max(1) {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        if !decreased && step == 0.0 {
            stop = StopReason::LineSearchFailed;
            break;
        }
    }
    let gradient_norm = norm(&g);
    Minimum { x, value: fx, gradient_norm, iterations, evaluations: evals, stop }
}

/// Strong-Wolfe line search (`c1 = 1e-4`, `c2 = 0.9`) by bracketing and
/// bisection-safeguarded cubic zoom. Returns `(step, f, evaluations)`.
fn wolfe_search<F>(
    f: &mut F,
    x: &[f64],
    fx: f64,
    d: &[f64],
    slope0: f64,
    x_new: &mut [f64],
    g_new: &mut [f64],
) -> Option<(f64, f64, usize)>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    const C1: f64 = 1e-4;
    const C2: f64 = 0.9;
    let mut evals = 0;
    let mut eval = |t: f64, xn: &mut [f64], gn: &mut [f64]| -> (f64, f64) {
        for i in 0..x.len() {
            xn[i] = x[i] + t * d[i];
        }
        let v = f(xn, gn);
        (v, dot(gn, d))
    };

    let (mut lo, mut f_lo, mut s_lo) = (0.0, fx, slope0);
    let mut hi: Option<(f64, f64, f64)> = None;
    let mut t = 1.0;
    for _ in 0..40 {
        let (ft, st) = eval(t, x_new, g_new);
        evals += 1;
        if !ft.is_finite() || ft > fx + C1 * t * slope0 || (hi.is_none() && evals > 1 && ft >= f_lo) {
            hi = Some((t, ft, st));
        } else if st.abs() <= -C2 * slope0 {
            return Some((t, ft, evals));
        } else if st >= 0.0 {
            hi = Some((lo, f_lo, s_lo));
            lo = t;
            f_lo = ft;
            s_lo = st;
        } else {
            lo = t;
            f_lo = ft;
            s_lo = st;
            if hi.is_none() {
                t *= 2.0;
                continue;
            }
        }
        let (th, fh, sh) = hi.expect("bracket set above");
        t = cubic_min(lo, f_lo, s_lo, th, fh, sh);
        if (th - lo).abs() < 1e-16 * lo.abs().max(1.0) {
            break;
        }
    }
    if lo > 0.0 && f_lo < fx {
        let (ft, _) = eval(lo, x_new, g_new);
        return Some((lo, ft, evals + 1));
    }
    None
}

/// Minimizer of the cubic interpolant on `[a, b]`, safeguarded to the
/// middle 80% of the interval.
fn cubic_min(a: f64, fa: f64, ga: f64, b: f64, fb: f64, gb: f64) -> f64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let width = hi - lo;
    let d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - ga * gb;
    let mut t = 0.5 * (a + b);
    if disc >= 0.0 && fa.is_finite() && fb.is_finite() {
        let d2 = disc.sqrt() * (b - a).signum();
        let cand = b - (b - a) * (gb + d2 - d1) / (gb - ga + 2.0 * d2);
        if cand.is_finite() {
            t = cand;
        }
    }
    t.clamp(lo + 0.1 * width, hi - 0.1 * width)
}
