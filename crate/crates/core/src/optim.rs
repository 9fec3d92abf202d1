//! Minimizers: golden-section search on an interval, Nelder-Mead on R^n,
//! and BFGS with finite-difference gradients.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Minimizes a unimodal `f` on `[lo, hi]` by golden-section search.
///
/// Returns `(argmin, min)`. Non-finite function values are treated as `+∞`.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let mut eval = |x: f64| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (eval(c), eval(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    pub initial_step: f64,
    /// Stop when the spread of simplex values falls below this.
    pub f_tol: f64,
    pub max_evaluations: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            initial_step: 0.5,
            f_tol: 1e-9,
            max_evaluations: 20_000,
        }
    }
}

/// Minimizes `f` with the Nelder-Mead simplex method (standard
/// reflection/expansion/contraction/shrink coefficients 1, 2, 1/2, 1/2).
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    opts: NelderMeadOptions,
) -> NelderMeadResult {
    let n = x0.len();
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
    if n == 0 {
        let v = eval(x0, &mut evals);
        return NelderMeadResult {
            x: Vec::new(),
            value: v,
            evaluations: evals,
            converged: true,
        };
    }

    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += opts.initial_step;
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| eval(p, &mut evals)).collect();
    let mut converged = false;

    while evals < opts.max_evaluations {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = (values[n] - values[0]).abs();
        if spread <= opts.f_tol * (1.0 + values[0].abs()) && values[0].is_finite() {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(1.0);
        let fr = eval(&xr, &mut evals);
        if fr < values[0] {
            let xe = along(2.0);
            let fe = eval(&xe, &mut evals);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
        } else {
            let (xc, fc) = if fr < values[n] {
                let xc = along(0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            } else {
                let xc = along(-0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            };
            if fc < values[n].min(fr) {
                simplex[n] = xc;
                values[n] = fc;
            } else {
                for i in 1..=n {
                    let shrunk: Vec<f64> = simplex[0]
                        .iter()
                        .zip(&simplex[i])
                        .map(|(b, p)| b + 0.5 * (p - b))
                        .collect();
                    values[i] = eval(&shrunk, &mut evals);
                    simplex[i] = shrunk;
                }
            }
        }
    }

    let best = (0..=n)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap_or(0);
    NelderMeadResult {
        x: simplex[best].clone(),
        value: values[best],
        evaluations: evals,
        converged,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions {
    /// Relative finite-difference step.
    pub grad_step: f64,
    /// Stop when the largest gradient component falls below this.
    pub g_tol: f64,
    /// Stop when the relative decrease of `f` falls below this twice in a row.
    pub f_tol: f64,
    pub max_iter: usize,
    /// Largest step component proposed by the line search.
    pub max_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions {
            grad_step: 1e-6,
            g_tol: 1e-6,
            f_tol: 1e-13,
            max_iter: 500,
            max_step: 2.0,
        }
    }
}

fn central_gradient<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64], fx: f64, rel: f64, evals: &mut usize) -> Vec<f64> {
    let mut z = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = rel * x[i].abs().max(1.0);
            z[i] = x[i] + h;
            let fp = f(&z);
            z[i] = x[i] - h;
            let fm = f(&z);
            z[i] = x[i];
            *evals += 2;
            match (fp.is_finite(), fm.is_finite()) {
                (true, true) => (fp - fm) / (2.0 * h),
                (true, false) => (fp - fx) / h,
                (false, true) => (fx - fm) / h,
                (false, false) => 0.0,
            }
        })
        .collect()
}

/// Minimizes a smooth `f` by BFGS with central-difference gradients and a
/// backtracking Armijo line search. `f` must be finite at `x0`.
pub fn bfgs<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], opts: BfgsOptions) -> NelderMeadResult {
    let n = x0.len();
    let mut evals = 1;
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    if n == 0 || !fx.is_finite() {
        return NelderMeadResult {
            x,
            value: fx,
            evaluations: evals,
            converged: n == 0 && fx.is_finite(),
        };
    }
    let mut g = central_gradient(&mut f, &x, fx, opts.grad_step, &mut evals);
    let mut h = vec![vec![0.0; n]; n];
    let reset = |h: &mut Vec<Vec<f64>>| {
        for (i, row) in h.iter_mut().enumerate() {
            row.iter_mut().for_each(|v| *v = 0.0);
            row[i] = 1.0;
        }
    };
    reset(&mut h);
    let mut converged = false;
    let mut small_steps = 0;

    for _ in 0..opts.max_iter {
        if g.iter().fold(0.0f64, |m, v| m.max(v.abs())) < opts.g_tol {
            converged = true;
            break;
        }
        let mut d: Vec<f64> = (0..n).map(|i| -(0..n).map(|j| h[i][j] * g[j]).sum::<f64>()).collect();
        let mut slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            reset(&mut h);
            d = g.iter().map(|v| -v).collect();
            slope = -g.iter().map(|v| v * v).sum::<f64>();
        }
        let big = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if big > opts.max_step {
            let s = opts.max_step / big;
            d.iter_mut().for_each(|v| *v *= s);
            slope *= s;
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
            let fnew = f(&xn);
            evals += 1;
            if fnew.is_finite() && fnew <= fx + 1e-4 * alpha * slope {
                accepted = Some((xn, fnew));
                break;
            }
            alpha *= 0.5;
        }
        let Some((xn, fnew)) = accepted else {
            // no decrease along the quasi-Newton direction
            converged = g.iter().fold(0.0f64, |m, v| m.max(v.abs())) < opts.g_tol.sqrt();
            break;
        };
        let gn = central_gradient(&mut f, &xn, fnew, opts.grad_step, &mut evals);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&yv).map(|(a, b)| a * b).sum();
        let decrease = fx - fnew;
        x = xn;
        g = gn;
        let old = fx;
        fx = fnew;
        if sy > 1e-12 * s.iter().map(|v| v * v).sum::<f64>().sqrt() * yv.iter().map(|v| v * v).sum::<f64>().sqrt() {
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h[i][j] * yv[j]).sum()).collect();
            let yhy: f64 = yv.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..n {
                for j in 0..n {
                    h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }
        if decrease <= opts.f_tol * (1.0 + old.abs()) {
            small_steps += 1;
            if small_steps >= 2 {
                converged = true;
                break;
            }
        } else {
            small_steps = 0;
        }
    }
    NelderMeadResult {
        x,
        value: fx,
        evaluations: evals,
        converged,
    }
}
