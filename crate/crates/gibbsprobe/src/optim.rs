//! In-crate numerical optimisers.
//!
//! Three small, deterministic routines cover every minimisation need of the
//! crate: [`lbfgs`] for smooth convex objectives with analytic gradients (the
//! interaction-screening neighbourhood problems), [`fista_l1`] for the same
//! objectives with an optional l1 penalty, and [`nelder_mead`] for low-dimensional
//! derivative-free maximum-likelihood fits. All three are pure functions of
//! their inputs — no hidden state, no randomness.

/// Options for [`lbfgs`].
#[derive(Debug, Clone)]
pub struct LbfgsOptions {
    /// Stop when the Euclidean norm of the gradient falls to this value.
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Number of curvature pairs kept for the two-loop recursion.
    pub memory: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-9,
            max_iter: 1000,
            memory: 10,
        }
    }
}

/// Outcome of a smooth minimisation.
#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub x: Vec<f64>,
    pub value: f64,
    /// Euclidean norm of the (generalised) gradient at `x`.
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Limited-memory BFGS with Armijo backtracking line search.
///
/// `f` evaluates the objective at its first argument and writes the gradient
/// into its second. Designed for smooth convex objectives; stops when
/// `‖∇f‖₂ ≤ grad_tol` (converged) or after `max_iter` iterations or a failed
/// line search (not converged).
pub fn lbfgs<F>(x0: &[f64], mut f: F, opts: &LbfgsOptions) -> MinimizeResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut value = f(&x, &mut g);
    let mut s_list: Vec<Vec<f64>> = Vec::new();
    let mut y_list: Vec<Vec<f64>> = Vec::new();
    let mut rho_list: Vec<f64> = Vec::new();

    for iteration in 0..opts.max_iter {
        let g_norm = norm(&g);
        if g_norm <= opts.grad_tol {
            return MinimizeResult {
                x,
                value,
                grad_norm: g_norm,
                iterations: iteration,
                converged: true,
            };
        }

        // Two-loop recursion for the search direction d = −H·g.
        let mut q = g.clone();
        let mut alphas = vec![0.0; s_list.len()];
        for i in (0..s_list.len()).rev() {
            let alpha = rho_list[i] * dot(&s_list[i], &q);
            alphas[i] = alpha;
            for (qj, yj) in q.iter_mut().zip(&y_list[i]) {
                *qj -= alpha * yj;
            }
        }
        if let (Some(s), Some(y)) = (s_list.last(), y_list.last()) {
            let gamma = dot(s, y) / dot(y, y);
            for qj in &mut q {
                *qj *= gamma;
            }
        }
        for i in 0..s_list.len() {
            let beta = rho_list[i] * dot(&y_list[i], &q);
            let coeff = alphas[i] - beta;
            for (qj, sj) in q.iter_mut().zip(&s_list[i]) {
                *qj += coeff * sj;
            }
        }
        let d: Vec<f64> = q.iter().map(|&v| -v).collect();

        let mut slope = dot(&g, &d);
        let mut direction = d;
        if slope >= 0.0 {
            // Numerical loss of descent (stale curvature pairs): fall back to
            // steepest descent.
            direction = g.iter().map(|&v| -v).collect();
            slope = -g_norm * g_norm;
            s_list.clear();
            y_list.clear();
            rho_list.clear();
        }

        // Armijo backtracking from a unit step (scaled on the first step).
        let mut alpha = if s_list.is_empty() {
            (1.0f64).min(1.0 / g_norm.max(1e-12))
        } else {
            1.0
        };
        let c1 = 1e-4;
        let mut x_new = vec![0.0; n];
        let mut g_new = vec![0.0; n];
        let mut accepted = false;
        for _ in 0..60 {
            for ((xn, &xv), &dv) in x_new.iter_mut().zip(&x).zip(&direction) {
                *xn = xv + alpha * dv;
            }
            let value_new = f(&x_new, &mut g_new);
            if value_new <= value + c1 * alpha * slope {
                // Curvature information for the next iteration.
                let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
                let sy = dot(&s, &y);
                if sy > 1e-12 * norm(&s) * norm(&y) {
                    s_list.push(s);
                    y_list.push(y);
                    rho_list.push(1.0 / sy);
                    if s_list.len() > opts.memory {
                        s_list.remove(0);
                        y_list.remove(0);
                        rho_list.remove(0);
                    }
                }
                x.copy_from_slice(&x_new);
                g.copy_from_slice(&g_new);
                value = value_new;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return MinimizeResult {
                grad_norm: norm(&g),
                x,
                value,
                iterations: iteration + 1,
                converged: false,
            };
        }
    }
    MinimizeResult {
        grad_norm: norm(&g),
        x,
        value,
        iterations: opts.max_iter,
        converged: false,
    }
}

/// Soft-threshold operator, the proximal map of `λ‖·‖₁`.
fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Norm of the exact first-order optimality residual of
/// `min f(x) + λ‖x‖₁` at `x` with smooth gradient `g`.
fn l1_kkt_residual(x: &[f64], g: &[f64], lambda: f64) -> f64 {
    x.iter()
        .zip(g)
        .map(|(&xi, &gi)| {
            if xi > 0.0 {
                gi + lambda
            } else if xi < 0.0 {
                gi - lambda
            } else {
                (gi.abs() - lambda).max(0.0)
            }
        })
        .map(|r| r * r)
        .sum::<f64>()
        .sqrt()
}

/// FISTA (accelerated proximal gradient) for `min f(x) + λ‖x‖₁` with a
/// backtracking Lipschitz estimate.
///
/// Stops when the norm of the exact subgradient optimality residual falls to
/// `grad_tol`. With `λ = 0` this reduces to accelerated gradient descent, but
/// [`lbfgs`] is preferred there.
pub fn fista_l1<F>(x0: &[f64], mut f: F, lambda: f64, opts: &LbfgsOptions) -> MinimizeResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut lipschitz = 1.0f64;
    let mut g_y = vec![0.0; n];
    let mut g_x = vec![0.0; n];
    let mut iterations = 0;

    for iteration in 0..opts.max_iter {
        iterations = iteration + 1;
        let f_y = f(&y, &mut g_y);
        // Backtracking on the Lipschitz estimate.
        let mut x_next = vec![0.0; n];
        loop {
            for i in 0..n {
                x_next[i] = soft_threshold(y[i] - g_y[i] / lipschitz, lambda / lipschitz);
            }
            let mut g_tmp = vec![0.0; n];
            let f_next = f(&x_next, &mut g_tmp);
            let diff: Vec<f64> = x_next.iter().zip(&y).map(|(a, b)| a - b).collect();
            let quad = f_y + dot(&g_y, &diff) + 0.5 * lipschitz * dot(&diff, &diff);
            if f_next <= quad + 1e-15 * f_y.abs().max(1.0) || lipschitz > 1e18 {
                break;
            }
            lipschitz *= 2.0;
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let momentum = (t - 1.0) / t_next;
        for i in 0..n {
            let step = x_next[i] - x[i];
            y[i] = x_next[i] + momentum * step;
        }
        x.copy_from_slice(&x_next);
        t = t_next;

        let value = f(&x, &mut g_x);
        let residual = l1_kkt_residual(&x, &g_x, lambda);
        if residual <= opts.grad_tol {
            return MinimizeResult {
                x,
                value,
                grad_norm: residual,
                iterations,
                converged: true,
            };
        }
    }
    let value = f(&x, &mut g_x);
    MinimizeResult {
        grad_norm: l1_kkt_residual(&x, &g_x, lambda),
        x,
        value,
        iterations,
        converged: false,
    }
}

/// Options for [`nelder_mead`].
#[derive(Debug, Clone)]
pub struct NmOptions {
    /// Per-coordinate offsets of the initial simplex from the start point.
    pub initial_steps: Vec<f64>,
    /// Converged when both vertex spread and value spread fall below these.
    pub x_tol: f64,
    pub f_tol: f64,
    pub max_iter: usize,
}

impl NmOptions {
    pub fn with_steps(initial_steps: Vec<f64>) -> Self {
        Self {
            initial_steps,
            x_tol: 1e-10,
            f_tol: 1e-12,
            max_iter: 2000,
        }
    }
}

/// Nelder–Mead simplex minimisation with the dimension-adaptive coefficients
/// of Gao & Han. Deterministic given the start point and options; returns the
/// best vertex seen, which never exceeds the starting value.
pub fn nelder_mead<F>(x0: &[f64], mut f: F, opts: &NmOptions) -> MinimizeResult
where
    F: FnMut(&[f64]) -> f64,
{
    let d = x0.len();
    assert!(d >= 1, "need at least one parameter");
    assert_eq!(opts.initial_steps.len(), d, "one initial step per parameter");
    let dd = d as f64;
    let alpha = 1.0;
    let beta = 1.0 + 2.0 / dd;
    let gamma = 0.75 - 1.0 / (2.0 * dd);
    let delta = 1.0 - 1.0 / dd;

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
    simplex.push(x0.to_vec());
    for i in 0..d {
        let mut v = x0.to_vec();
        let step = if opts.initial_steps[i] != 0.0 {
            opts.initial_steps[i]
        } else {
            1e-3
        };
        v[i] += step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let mut evaluations = d + 1;

    for iteration in 0..opts.max_iter {
        // Sort vertices by value (stable: ties keep insertion order).
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
        let simplex_sorted: Vec<Vec<f64>> = order.iter().map(|&i| simplex[i].clone()).collect();
        let values_sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();
        simplex = simplex_sorted;
        values = values_sorted;

        let f_spread = values[d] - values[0];
        let x_spread = simplex[1..]
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&simplex[0])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max)
            })
            .fold(0.0f64, f64::max);
        if f_spread.abs() <= opts.f_tol && x_spread <= opts.x_tol {
            return MinimizeResult {
                x: simplex[0].clone(),
                value: values[0],
                grad_norm: f64::NAN,
                iterations: iteration,
                converged: true,
            };
        }

        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0; d];
        for v in &simplex[..d] {
            for (c, &vi) in centroid.iter_mut().zip(v) {
                *c += vi / dd;
            }
        }
        let worst = simplex[d].clone();
        let reflect: Vec<f64> = centroid
            .iter()
            .zip(&worst)
            .map(|(&c, &w)| c + alpha * (c - w))
            .collect();
        let f_reflect = f(&reflect);
        evaluations += 1;

        if f_reflect < values[0] {
            let expand: Vec<f64> = centroid
                .iter()
                .zip(&worst)
                .map(|(&c, &w)| c + beta * (c - w))
                .collect();
            let f_expand = f(&expand);
            evaluations += 1;
            if f_expand < f_reflect {
                simplex[d] = expand;
                values[d] = f_expand;
            } else {
                simplex[d] = reflect;
                values[d] = f_reflect;
            }
        } else if f_reflect < values[d - 1] {
            simplex[d] = reflect;
            values[d] = f_reflect;
        } else {
            let contract: Vec<f64> = if f_reflect < values[d] {
                centroid
                    .iter()
                    .zip(&reflect)
                    .map(|(&c, &r)| c + gamma * (r - c))
                    .collect()
            } else {
                centroid
                    .iter()
                    .zip(&worst)
                    .map(|(&c, &w)| c - gamma * (c - w))
                    .collect()
            };
            let f_contract = f(&contract);
            evaluations += 1;
            if f_contract < values[d].min(f_reflect) {
                simplex[d] = contract;
                values[d] = f_contract;
            } else {
                // Shrink toward the best vertex.
                for i in 1..=d {
                    let best = simplex[0].clone();
                    for (vj, &bj) in simplex[i].iter_mut().zip(&best) {
                        *vj = bj + delta * (*vj - bj);
                    }
                    values[i] = f(&simplex[i]);
                    evaluations += 1;
                }
            }
        }
        let _ = evaluations;
    }

    let (best_idx, _) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
        .expect("non-empty simplex");
    MinimizeResult {
        x: simplex[best_idx].clone(),
        value: values[best_idx],
        grad_norm: f64::NAN,
        iterations: opts.max_iter,
        converged: false,
    }
}
