//! Box-constrained Nelder-Mead simplex minimizer.
//!
//! Trial points are projected onto the box before evaluation. Convergence is
//! declared when the spread of objective values over the simplex falls below
//! `f_rel_tol * (|f_best| + f_rel_tol)`; the search then restarts once from the
//! best vertex with a fresh simplex and stops when the restart gains nothing.

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    pub f_rel_tol: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_evals: 2000,
            f_rel_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    fn project(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
    }
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Minimizes `f` starting from `x0` with per-coordinate initial steps `steps`.
/// Non-finite objective values are treated as `+inf`.
pub fn nelder_mead<F>(
    mut f: F,
    x0: &[f64],
    steps: &[f64],
    bounds: &Bounds,
    opts: &NelderMeadOptions,
) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut best_x = x0.to_vec();
    bounds.project(&mut best_x);
    let mut best_f = eval(&best_x, &mut evals);
    if dim == 0 {
        return NelderMeadResult {
            x: best_x,
            f: best_f,
            evals,
            converged: true,
        };
    }

    let mut restarts = 0;
    loop {
        let (x, fx, converged) =
            run_simplex(&mut eval, &mut evals, &best_x, best_f, steps, bounds, opts);
        let gain = best_f - fx;
        if fx <= best_f {
            best_x = x;
            best_f = fx;
        }
        let tol = opts.f_rel_tol * (best_f.abs() + opts.f_rel_tol);
        if !converged || evals >= opts.max_evals {
            return NelderMeadResult {
                x: best_x,
                f: best_f,
                evals,
                converged: converged && evals < opts.max_evals,
            };
        }
        restarts += 1;
        if restarts >= 2 && !(gain > tol) {
            return NelderMeadResult {
                x: best_x,
                f: best_f,
                evals,
                converged: true,
            };
        }
        if restarts > 10 {
            return NelderMeadResult {
                x: best_x,
                f: best_f,
                evals,
                converged: true,
            };
        }
    }
}

fn run_simplex<E>(
    eval: &mut E,
    evals: &mut usize,
    x0: &[f64],
    f0: f64,
    steps: &[f64],
    bounds: &Bounds,
    opts: &NelderMeadOptions,
) -> (Vec<f64>, f64, bool)
where
    E: FnMut(&[f64], &mut usize) -> f64,
{
    let dim = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((x0.to_vec(), f0));
    for i in 0..dim {
        let mut v = x0.to_vec();
        let step = steps[i];
        v[i] += step;
        if v[i] > bounds.upper[i] || v[i] < bounds.lower[i] {
            v[i] = x0[i] - step;
        }
        bounds.project(&mut v);
        let fv = eval(&v, evals);
        simplex.push((v, fv));
    }

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let f_best = simplex[0].1;
        let f_worst = simplex[dim].1;
        let tol = opts.f_rel_tol * (f_best.abs() + opts.f_rel_tol);
        if f_best.is_finite() && (f_worst - f_best) <= tol {
            return (simplex[0].0.clone(), f_best, true);
        }
        if *evals >= opts.max_evals {
            return (simplex[0].0.clone(), f_best, false);
        }

        let mut centroid = vec![0.0; dim];
        for (v, _) in simplex.iter().take(dim) {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / dim as f64;
            }
        }
        let worst = simplex[dim].0.clone();
        let along = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(&worst)
                .map(|(c, w)| c + t * (c - w))
                .collect();
            bounds.project(&mut p);
            p
        };

        let xr = along(alpha);
        let fr = eval(&xr, evals);
        if fr < simplex[0].1 {
            let xe = along(gamma);
            let fe = eval(&xe, evals);
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[dim - 1].1 {
            simplex[dim] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < simplex[dim].1 {
            let xc = along(rho);
            let fc = eval(&xc, evals);
            (xc, fc)
        } else {
            let xc = along(-rho);
            let fc = eval(&xc, evals);
            (xc, fc)
        };
        if fc < simplex[dim].1.min(fr) {
            simplex[dim] = (xc, fc);
            continue;
        }
        // Shrink toward the best vertex.
        let best = simplex[0].0.clone();
        for item in simplex.iter_mut().skip(1) {
            let mut v: Vec<f64> = best
                .iter()
                .zip(&item.0)
                .map(|(b, x)| b + sigma * (x - b))
                .collect();
            bounds.project(&mut v);
            let fv = eval(&v, evals);
            *item = (v, fv);
        }
    }
}
