//! Exact Gaussian likelihood of a regression with ARMA(p, q) errors.
//!
//! The error process is put in Harvey's state-space form with state
//! dimension `r = max(p, q + 1)`. The response and the regression columns
//! are filtered together, so `β` and the innovation variance are
//! concentrated out by GLS on the innovations.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

/// Largest admissible |partial autocorrelation| at an accepted optimum.
pub(crate) const PACF_BOUND: f64 = 0.9999;
const STEADY_TOL: f64 = 1e-13;

/// Maps partial autocorrelations in (-1, 1) to the coefficients of a
/// stationary AR polynomial (Durbin-Levinson recursion).
pub(crate) fn pacf_to_ar(pacf: &[f64]) -> Vec<f64> {
    let mut phi: Vec<f64> = Vec::with_capacity(pacf.len());
    for (k, &r) in pacf.iter().enumerate() {
        let prev = phi.clone();
        for j in 0..k {
            phi[j] = prev[j] - r * prev[k - 1 - j];
        }
        phi.push(r);
    }
    phi
}

/// Unconstrained parameters to `(ar, ma)`; MA coefficients are the negated
/// AR map so that the MA polynomial is invertible.
pub(crate) fn unpack(u: &[f64], p: usize, q: usize) -> (Vec<f64>, Vec<f64>, f64) {
    let pacf: Vec<f64> = u.iter().map(|v| v.tanh()).collect();
    let max_abs = pacf.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let ar = pacf_to_ar(&pacf[..p]);
    let ma = pacf_to_ar(&pacf[p..p + q]).into_iter().map(|v| -v).collect();
    (ar, ma, max_abs)
}

/// Smallest admissible modulus of an AR or MA polynomial root.
pub(crate) const ROOT_MARGIN: f64 = 1.01;

/// Largest modulus of `1/z` over the roots `z` of `1 - c₁z - … - c_k z^k`
/// (the eigenvalues of its companion matrix).
pub(crate) fn max_inverse_root(c: &[f64]) -> f64 {
    let k = c.len();
    if k == 0 {
        return 0.0;
    }
    let comp = DMatrix::from_fn(k, k, |i, j| if i == 0 { c[j] } else if i == j + 1 { 1.0 } else { 0.0 });
    comp.complex_eigenvalues().iter().fold(0.0f64, |m, z| m.max(z.norm()))
}

/// True when every AR and MA root lies at least `ROOT_MARGIN` from the
/// origin.
pub(crate) fn roots_clear(ar: &[f64], ma: &[f64]) -> bool {
    let neg_ma: Vec<f64> = ma.iter().map(|v| -v).collect();
    max_inverse_root(ar) <= 1.0 / ROOT_MARGIN && max_inverse_root(&neg_ma) <= 1.0 / ROOT_MARGIN
}

/// Error-process system matrices (unit innovation variance).
pub(crate) struct ArmaSystem {
    r: usize,
    phi: Vec<f64>,
    rvec: Vec<f64>,
    p0: Vec<f64>,
}

impl ArmaSystem {
    pub(crate) fn new(ar: &[f64], ma: &[f64]) -> Option<Self> {
        let r = ar.len().max(ma.len() + 1);
        let mut phi = vec![0.0; r];
        phi[..ar.len()].copy_from_slice(ar);
        let mut rvec = vec![0.0; r];
        rvec[0] = 1.0;
        rvec[1..=ma.len()].copy_from_slice(ma);
        let p0 = stationary_cov(&phi, &rvec)?;
        Some(ArmaSystem { r, phi, rvec, p0 })
    }

    pub(crate) fn dim(&self) -> usize {
        self.r
    }

    /// `T a` for a state vector.
    pub(crate) fn transition(&self, a: &[f64]) -> Vec<f64> {
        let r = self.r;
        (0..r)
            .map(|i| self.phi[i] * a[0] + if i + 1 < r { a[i + 1] } else { 0.0 })
            .collect()
    }

    /// `T P T' + R R'` in place, `P` symmetric row-major `r × r`.
    fn predict_cov(&self, p: &mut [f64], scratch: &mut [f64]) {
        let r = self.r;
        // M = T P
        for i in 0..r {
            for j in 0..r {
                let below = if i + 1 < r { p[(i + 1) * r + j] } else { 0.0 };
                scratch[i * r + j] = self.phi[i] * p[j] + below;
            }
        }
        // P = M T' + R R', upper triangle mirrored
        for i in 0..r {
            for j in i..r {
                let right = if j + 1 < r { scratch[i * r + j + 1] } else { 0.0 };
                let v = scratch[i * r] * self.phi[j] + right + self.rvec[i] * self.rvec[j];
                p[i * r + j] = v;
                p[j * r + i] = v;
            }
        }
    }
}

/// Solves `P = T P T' + R R'` through the Kronecker form.
fn stationary_cov(phi: &[f64], rvec: &[f64]) -> Option<Vec<f64>> {
    let r = phi.len();
    let t = DMatrix::from_fn(r, r, |i, j| {
        if j == 0 {
            phi[i]
        } else if j == i + 1 {
            1.0
        } else {
            0.0
        }
    });
    let kron = t.kronecker(&t);
    let a = DMatrix::identity(r * r, r * r) - kron;
    let rr = DVector::from_fn(r * r, |k, _| rvec[k % r] * rvec[k / r]);
    let v = a.lu().solve(&rr)?;
    if v.iter().any(|x| !x.is_finite()) {
        return None;
    }
    let mut p = vec![0.0; r * r];
    for col in 0..r {
        for row in 0..r {
            p[row * r + col] = v[col * r + row];
        }
    }
    if p[0] <= 0.0 {
        return None;
    }
    Some(p)
}

/// Concentrated fit for fixed ARMA coefficients.
#[derive(Debug, Clone)]
pub(crate) struct Profile {
    pub loglik: f64,
    pub beta: DVector<f64>,
    pub sigma2: f64,
    /// `(X̃'X̃)⁻¹` of the whitened regression.
    pub gls_inv: DMatrix<f64>,
    pub n_obs: usize,
    /// `a_{n+1|n}` of the error state.
    pub terminal_state: Vec<f64>,
    /// One-step predictions of the error process for every time point.
    pub one_step: Vec<f64>,
}

/// Runs the filter on `[y | X]` and concentrates out `β` and `σ²`.
/// `keep` stores the one-step predictions and terminal state.
pub(crate) fn profile(sys: &ArmaSystem, y: &[f64], x: &DMatrix<f64>, keep: bool) -> Option<Profile> {
    let n = y.len();
    let p = x.ncols();
    let k = p + 1;
    let r = sys.r;
    let mut a = vec![0.0; r * k];
    let mut pm = sys.p0.clone();
    let mut scratch = vec![0.0; r * r];
    let mut prev = vec![0.0; r * r];
    let mut frozen = false;
    let mut gain = vec![0.0; r];
    let mut f_frozen = 0.0;

    let mut xtx = DMatrix::<f64>::zeros(p, p);
    let mut xty = DVector::<f64>::zeros(p);
    let mut yty = 0.0;
    let mut sum_ln_f = 0.0;
    let mut n_obs = 0usize;
    let mut v = vec![0.0; k];
    let mut one_step_cols: Vec<f64> = if keep { Vec::with_capacity(n * k) } else { Vec::new() };
    let mut next_a = vec![0.0; r * k];

    for t in 0..n {
        if keep {
            one_step_cols.extend_from_slice(&a[..k]);
        }
        let observed = !y[t].is_nan();
        if !frozen {
            prev.copy_from_slice(&pm);
        }
        if observed {
            let f = if frozen { f_frozen } else { pm[0] };
            if !(f > 1e-300) {
                return None;
            }
            v[0] = y[t] - a[0];
            for c in 0..p {
                v[c + 1] = x[(t, c)] - a[c + 1];
            }
            sum_ln_f += f.ln();
            yty += v[0] * v[0] / f;
            for i in 0..p {
                xty[i] += v[i + 1] * v[0] / f;
                for j in 0..=i {
                    xtx[(i, j)] += v[i + 1] * v[j + 1] / f;
                }
            }
            n_obs += 1;
            if !frozen {
                for i in 0..r {
                    gain[i] = pm[i * r] / f;
                }
            }
            for i in 0..r {
                for c in 0..k {
                    a[i * k + c] += gain[i] * v[c];
                }
            }
            if !frozen {
                for i in 0..r {
                    for j in i..r {
                        let v = pm[i * r + j] - gain[i] * gain[j] * f;
                        pm[i * r + j] = v;
                        pm[j * r + i] = v;
                    }
                }
            }
        } else if frozen {
            // leave steady state: P currently holds the steady prediction
            frozen = false;
        }

        // a ← T a
        for i in 0..r {
            for c in 0..k {
                let below = if i + 1 < r { a[(i + 1) * k + c] } else { 0.0 };
                next_a[i * k + c] = sys.phi[i] * a[c] + below;
            }
        }
        std::mem::swap(&mut a, &mut next_a);

        if !frozen {
            sys.predict_cov(&mut pm, &mut scratch);
            if observed {
                let diff = pm.iter().zip(&prev).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                if diff < STEADY_TOL {
                    frozen = true;
                    f_frozen = pm[0];
                    for i in 0..r {
                        gain[i] = pm[i * r] / f_frozen;
                    }
                }
            }
        }
    }

    if n_obs <= p {
        return None;
    }
    for i in 0..p {
        for j in 0..i {
            xtx[(j, i)] = xtx[(i, j)];
        }
    }
    let (beta, gls_inv) = if p == 0 {
        (DVector::zeros(0), DMatrix::zeros(0, 0))
    } else {
        let chol = xtx.cholesky()?;
        (chol.solve(&xty), chol.inverse())
    };
    let ssr = (yty - beta.dot(&xty)).max(0.0);
    let nf = n_obs as f64;
    let sigma2 = ssr / nf;
    if !(sigma2 > 0.0) {
        return None;
    }
    let loglik = -0.5 * nf * ((2.0 * PI).ln() + sigma2.ln() + 1.0) - 0.5 * sum_ln_f;
    if !loglik.is_finite() {
        return None;
    }

    let (terminal_state, one_step) = if keep {
        let resid = |cols: &[f64]| cols[0] - (0..p).map(|c| cols[c + 1] * beta[c]).sum::<f64>();
        let terminal = (0..r).map(|i| resid(&a[i * k..(i + 1) * k])).collect();
        let steps = one_step_cols.chunks(k).map(resid).collect();
        (terminal, steps)
    } else {
        (Vec::new(), Vec::new())
    };

    Some(Profile {
        loglik,
        beta,
        sigma2,
        gls_inv,
        n_obs,
        terminal_state,
        one_step,
    })
}
