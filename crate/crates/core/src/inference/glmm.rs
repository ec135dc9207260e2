//! Logistic mixed model with crossed random intercepts, fitted by the
//! Laplace approximation.
//!
//! Random effects are written `b_k = sigma_k * u_k` with `u_k ~ N(0, I)`.
//! For fixed sigmas and fixed effects, the spherical modes minimize the
//! convex penalized deviance `D(beta, u) + |u|^2` by damped Newton steps. The
//! Laplace objective adds `log det(Z'WZ + I)` over the random-effect block
//! and is minimized over beta with its exact gradient, starting from the
//! joint mode of the penalized deviance. The factor with the most
//! levels has a diagonal block and is eliminated by a Schur complement, so the
//! only dense solve is over the fixed effects plus the remaining factors.
//! An outer bounded Nelder-Mead search runs over `ln sigma`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::design::{DesignMatrix, Grouping};
use super::logistic::{deviance, irls, sigmoid, wald_table};
use super::report::{FitKind, RegressionReport, VarianceComponent};
use crate::error::{ArgusError, Result};

pub const SIGMA_LOWER: f64 = 1e-3;
pub const SIGMA_UPPER: f64 = 10.0;
pub const MAX_OUTER_ITER: usize = 200;
pub const OUTER_TOL: f64 = 1e-6;
const MAX_NEWTON_ITER: usize = 100;
const MAX_PROFILE_ITER: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct GlmmOptions {
    /// Evaluate at these standard deviations (zeros allowed) instead of optimizing.
    pub fixed_sigmas: Option<Vec<f64>>,
    pub max_outer_iter: usize,
    pub tol: f64,
}

impl Default for GlmmOptions {
    fn default() -> Self {
        Self {
            fixed_sigmas: None,
            max_outer_iter: MAX_OUTER_ITER,
            tol: OUTER_TOL,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GlmmFit {
    pub beta: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub sigmas: Vec<f64>,
    pub at_boundary: Vec<bool>,
    /// Laplace approximation of `-2 log L`.
    pub objective: f64,
    pub log_likelihood: f64,
    /// Predicted random intercepts `sigma_k * u_k`, per factor.
    pub random_intercepts: Vec<Vec<f64>>,
    pub outer_iterations: usize,
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone)]
struct State {
    beta: DVector<f64>,
    u: Vec<DVector<f64>>,
}

struct System {
    d_big: Vec<f64>,
    c: Vec<Vec<(usize, f64)>>,
    s: DMatrix<f64>,
    rhs: DVector<f64>,
    r_big: Vec<f64>,
    r_dense: DVector<f64>,
}

struct Problem<'a> {
    y: &'a [bool],
    x: &'a DMatrix<f64>,
    factors: &'a [Grouping],
    big: usize,
    small: Vec<usize>,
    /// Dense-block offset of each small factor, parallel to `small`.
    offsets: Vec<usize>,
    m: usize,
    big_members: Vec<Vec<usize>>,
}

struct Mode {
    state: State,
    objective: f64,
    sys: System,
}

impl<'a> Problem<'a> {
    fn new(y: &'a [bool], x: &'a DMatrix<f64>, factors: &'a [Grouping]) -> Self {
        let big = (0..factors.len())
            .max_by_key(|&k| (factors[k].n_levels(), usize::MAX - k))
            .unwrap();
        let small: Vec<usize> = (0..factors.len()).filter(|&k| k != big).collect();
        let mut offsets = Vec::new();
        let mut m = x.ncols();
        for &k in &small {
            offsets.push(m);
            m += factors[k].n_levels();
        }
        let mut big_members = vec![Vec::new(); factors[big].n_levels()];
        for (i, &l) in factors[big].index.iter().enumerate() {
            big_members[l].push(i);
        }
        Self {
            y,
            x,
            factors,
            big,
            small,
            offsets,
            m,
            big_members,
        }
    }

    fn p(&self) -> usize {
        self.x.ncols()
    }

    fn eta(&self, sigmas: &[f64], st: &State) -> DVector<f64> {
        let mut eta = self.x * &st.beta;
        for (k, f) in self.factors.iter().enumerate() {
            if sigmas[k] != 0.0 {
                for (i, &l) in f.index.iter().enumerate() {
                    eta[i] += sigmas[k] * st.u[k][l];
                }
            }
        }
        eta
    }

    fn penalized(&self, sigmas: &[f64], st: &State) -> f64 {
        deviance(self.y, &self.eta(sigmas, st)) + st.u.iter().map(|u| u.norm_squared()).sum::<f64>()
    }

    /// Sparse dense-block coordinates of row `i`.
    fn dense_row(&self, sigmas: &[f64], i: usize, out: &mut Vec<(usize, f64)>) {
        out.clear();
        for j in 0..self.p() {
            out.push((j, self.x[(i, j)]));
        }
        for (s, &k) in self.small.iter().enumerate() {
            out.push((self.offsets[s] + self.factors[k].index[i], sigmas[k]));
        }
    }

    fn system(&self, sigmas: &[f64], st: &State) -> System {
        let p = self.p();
        let m = self.m;
        let eta = self.eta(sigmas, st);
        let mu: Vec<f64> = eta.iter().map(|&e| sigmoid(e)).collect();
        let w: Vec<f64> = mu.iter().map(|v| (v * (1.0 - v)).max(1e-300)).collect();
        let e: Vec<f64> = self
            .y
            .iter()
            .zip(&mu)
            .map(|(&yi, v)| f64::from(u8::from(yi)) - v)
            .collect();

        let mut dense = DMatrix::<f64>::zeros(m, m);
        let mut r_dense = DVector::<f64>::zeros(m);
        let mut row = Vec::with_capacity(m.min(p + self.small.len()));
        for i in 0..self.y.len() {
            self.dense_row(sigmas, i, &mut row);
            for &(a, va) in &row {
                r_dense[a] += e[i] * va;
                let wa = w[i] * va;
                for &(b, vb) in &row {
                    if b <= a {
                        dense[(a, b)] += wa * vb;
                    }
                }
            }
        }
        for (s, &k) in self.small.iter().enumerate() {
            for l in 0..self.factors[k].n_levels() {
                let j = self.offsets[s] + l;
                dense[(j, j)] += 1.0;
                r_dense[j] -= st.u[k][l];
            }
        }

        let sb = sigmas[self.big];
        let n_big = self.factors[self.big].n_levels();
        let mut d_big = vec![1.0; n_big];
        let mut r_big = vec![0.0; n_big];
        let mut c = Vec::with_capacity(n_big);
        let mut scratch = vec![0.0; m];
        let mut touched: Vec<usize> = Vec::new();
        for (l, members) in self.big_members.iter().enumerate() {
            touched.clear();
            let mut se = 0.0;
            for &i in members {
                d_big[l] += sb * sb * w[i];
                se += e[i];
                if sb != 0.0 {
                    self.dense_row(sigmas, i, &mut row);
                    for &(a, va) in &row {
                        if scratch[a] == 0.0 && !touched.contains(&a) {
                            touched.push(a);
                        }
                        scratch[a] += w[i] * sb * va;
                    }
                }
            }
            r_big[l] = sb * se - st.u[self.big][l];
            touched.sort_unstable();
            let cl: Vec<(usize, f64)> = touched
                .iter()
                .map(|&a| (a, std::mem::take(&mut scratch[a])))
                .collect();
            c.push(cl);
        }

        // Schur complement of the diagonal block, lower triangle only.
        let mut rhs = r_dense.clone();
        for (l, cl) in c.iter().enumerate() {
            let inv = 1.0 / d_big[l];
            for &(a, ca) in cl {
                rhs[a] -= ca * r_big[l] * inv;
                for &(b, cb) in cl {
                    if b <= a {
                        dense[(a, b)] -= ca * cb * inv;
                    }
                }
            }
        }
        dense.fill_upper_triangle_with_lower_triangle();
        System {
            d_big,
            c,
            s: dense,
            rhs,
            r_big,
            r_dense,
        }
    }

    /// Newton direction for the penalized deviance. With `fix_beta` only the
    /// random-effect coordinates move. Returns the dense and diagonal parts
    /// and the Newton decrement.
    fn direction(&self, sys: &System, fix_beta: bool) -> Result<(DVector<f64>, Vec<f64>, f64)> {
        let lo = if fix_beta { self.p() } else { 0 };
        let k = self.m - lo;
        let mut dd = DVector::zeros(self.m);
        if k > 0 {
            let chol = sys
                .s
                .view((lo, lo), (k, k))
                .into_owned()
                .cholesky()
                .ok_or_else(|| {
                    ArgusError::Numerical("penalized information is not positive definite".into())
                })?;
            let sol = chol.solve(&sys.rhs.rows(lo, k).into_owned());
            dd.rows_mut(lo, k).copy_from(&sol);
        }
        let db: Vec<f64> = sys
            .c
            .iter()
            .enumerate()
            .map(|(l, cl)| {
                let cross: f64 = cl
                    .iter()
                    .filter(|(a, _)| *a >= lo)
                    .map(|&(a, v)| v * dd[a])
                    .sum();
                (sys.r_big[l] - cross) / sys.d_big[l]
            })
            .collect();
        let decrement = sys.r_dense.rows(lo, k).dot(&dd.rows(lo, k))
            + sys.r_big.iter().zip(&db).map(|(r, d)| r * d).sum::<f64>();
        Ok((dd, db, decrement))
    }

    /// Minimizes the penalized deviance by damped Newton steps, over the
    /// random effects only or jointly with the fixed effects.
    fn mode(&self, sigmas: &[f64], start: &State, fix_beta: bool) -> Result<Mode> {
        let mut st = start.clone();
        let mut f = self.penalized(sigmas, &st);
        'outer: for _ in 0..MAX_NEWTON_ITER {
            let sys = self.system(sigmas, &st);
            let (dd, db, decrement) = self.direction(&sys, fix_beta)?;
            if decrement < 1e-10 {
                break;
            }
            let mut scale = 1.0;
            loop {
                let cand = self.step(&st, &dd, &db, scale);
                let fc = self.penalized(sigmas, &cand);
                if fc.is_finite() && fc <= f {
                    st = cand;
                    f = fc;
                    break;
                }
                scale *= 0.5;
                if scale < 1e-12 {
                    break 'outer;
                }
            }
        }
        Ok(self.finish(sigmas, st, f))
    }

    /// Laplace objective minimized over the fixed effects for given sigmas.
    /// Starts from the joint mode of the penalized deviance, then takes
    /// scaled gradient steps on the Laplace objective itself.
    fn profile(&self, sigmas: &[f64], start: &State) -> Result<Mode> {
        let mut best = self.mode(sigmas, start, false)?;
        if sigmas.iter().all(|&s| s == 0.0) {
            return Ok(best);
        }
        let p = self.p();
        for _ in 0..MAX_PROFILE_ITER {
            let grad = self.beta_gradient(sigmas, &best)?;
            let cov = self.covariance_from(&best.sys)?;
            let step = -0.5 * (&cov * &grad);
            if step.amax() < 1e-10 {
                break;
            }
            let mut scale = 1.0;
            let mut moved = false;
            while scale >= 1e-6 {
                let mut cand = best.state.clone();
                for j in 0..p {
                    cand.beta[j] += scale * step[j];
                }
                let m = self.mode(sigmas, &cand, true)?;
                if m.objective <= best.objective {
                    moved = best.objective - m.objective > 1e-13 * best.objective.abs().max(1.0);
                    best = m;
                    break;
                }
                scale *= 0.5;
            }
            if !moved {
                break;
            }
        }
        Ok(best)
    }

    /// Gradient of the Laplace objective in the fixed effects at a
    /// conditional mode. The log-determinant term depends on beta through the
    /// IRLS weights, both directly and through the mode's own shift.
    fn beta_gradient(&self, sigmas: &[f64], mode: &Mode) -> Result<DVector<f64>> {
        let p = self.p();
        let mo = self.m - p;
        let sys = &mode.sys;
        let st = &mode.state;
        let eta = self.eta(sigmas, st);
        let mu: Vec<f64> = eta.iter().map(|&e| sigmoid(e)).collect();
        let w: Vec<f64> = mu.iter().map(|v| (v * (1.0 - v)).max(1e-300)).collect();
        let inv_oo = if mo > 0 {
            sys.s
                .view((p, p), (mo, mo))
                .into_owned()
                .cholesky()
                .ok_or_else(|| {
                    ArgusError::Numerical("random-effect block is not positive definite".into())
                })?
                .inverse()
        } else {
            DMatrix::zeros(0, 0)
        };
        // Small-factor part of each diagonal-block row, shifted to 0..mo.
        let c_o: Vec<Vec<(usize, f64)>> = sys
            .c
            .iter()
            .map(|cl| {
                cl.iter()
                    .filter(|(a, _)| *a >= p)
                    .map(|&(a, v)| (a - p, v))
                    .collect()
            })
            .collect();
        let sb = sigmas[self.big];
        let small_idx = |i: usize| -> Vec<(usize, f64)> {
            self.small
                .iter()
                .enumerate()
                .map(|(s, &k)| (self.offsets[s] + self.factors[k].index[i] - p, sigmas[k]))
                .collect()
        };

        // Leverages h_i = v_i' H_uu^{-1} v_i.
        let n = self.y.len();
        let mut h = vec![0.0; n];
        for (l, members) in self.big_members.iter().enumerate() {
            let d = sys.d_big[l];
            let g: Vec<f64> = if c_o[l].is_empty() {
                vec![0.0; mo]
            } else {
                (0..mo)
                    .map(|j| c_o[l].iter().map(|&(a, v)| v * inv_oo[(a, j)]).sum())
                    .collect()
            };
            let cc: f64 = c_o[l].iter().map(|&(a, v)| v * g[a]).sum();
            let inv_bb = 1.0 / d + cc / (d * d);
            for &i in members {
                let js = small_idx(i);
                let mut hi = sb * sb * inv_bb;
                for &(j, sj) in &js {
                    hi -= 2.0 * sb * sj * g[j] / d;
                    for &(k, sk) in &js {
                        hi += sj * sk * inv_oo[(j, k)];
                    }
                }
                h[i] = hi;
            }
        }

        // Shift of the mode per unit change in each fixed effect:
        // du/dbeta_j = -H_uu^{-1} (Lambda Z' W x_j).
        let mut grad = DVector::zeros(p);
        for j in 0..p {
            let mut r_b = vec![0.0; sys.d_big.len()];
            let mut r_o = DVector::zeros(mo);
            for i in 0..n {
                let wx = w[i] * self.x[(i, j)];
                r_b[self.factors[self.big].index[i]] += sb * wx;
                for (a, sa) in small_idx(i) {
                    r_o[a] += sa * wx;
                }
            }
            let mut t = r_o.clone();
            for (l, cl) in c_o.iter().enumerate() {
                for &(a, v) in cl {
                    t[a] -= v * r_b[l] / sys.d_big[l];
                }
            }
            let z_o = &inv_oo * t;
            let z_b: Vec<f64> = c_o
                .iter()
                .enumerate()
                .map(|(l, cl)| {
                    (r_b[l] - cl.iter().map(|&(a, v)| v * z_o[a]).sum::<f64>()) / sys.d_big[l]
                })
                .collect();
            let mut gj = 0.0;
            for i in 0..n {
                let yi = f64::from(u8::from(self.y[i]));
                let mut deta = self.x[(i, j)] - sb * z_b[self.factors[self.big].index[i]];
                for (a, sa) in small_idx(i) {
                    deta -= sa * z_o[a];
                }
                let wprime = w[i] * (1.0 - 2.0 * mu[i]);
                gj += -2.0 * (yi - mu[i]) * self.x[(i, j)] + wprime * deta * h[i];
            }
            grad[j] = gj;
        }
        Ok(grad)
    }

    fn step(&self, st: &State, dd: &DVector<f64>, db: &[f64], scale: f64) -> State {
        let p = self.p();
        let mut out = st.clone();
        for j in 0..p {
            out.beta[j] += scale * dd[j];
        }
        for (s, &k) in self.small.iter().enumerate() {
            for l in 0..self.factors[k].n_levels() {
                out.u[k][l] += scale * dd[self.offsets[s] + l];
            }
        }
        for (l, d) in db.iter().enumerate() {
            out.u[self.big][l] += scale * d;
        }
        out
    }

    fn finish(&self, sigmas: &[f64], state: State, f: f64) -> Mode {
        let sys = self.system(sigmas, &state);
        let p = self.p();
        let mut logdet: f64 = sys.d_big.iter().map(|d| d.ln()).sum();
        if self.m > p {
            let soo = sys.s.view((p, p), (self.m - p, self.m - p)).into_owned();
            logdet += match soo.cholesky() {
                Some(ch) => 2.0 * ch.l().diagonal().iter().map(|v| v.ln()).sum::<f64>(),
                None => f64::INFINITY,
            };
        }
        Mode {
            state,
            objective: f + logdet,
            sys,
        }
    }

    /// Fixed-effect block of the inverse penalized information.
    fn covariance_from(&self, sys: &System) -> Result<DMatrix<f64>> {
        let inv = sys
            .s
            .clone()
            .cholesky()
            .ok_or_else(|| ArgusError::Numerical("singular information at the optimum".into()))?
            .inverse();
        let p = self.p();
        Ok(inv.view((0, 0), (p, p)).into_owned())
    }
}

fn clamp_ln(v: f64) -> f64 {
    v.clamp(SIGMA_LOWER.ln(), SIGMA_UPPER.ln())
}

/// Bounded Nelder-Mead; returns the best point, its value, iterations and
/// the per-iteration best values.
fn nelder_mead<F: FnMut(&[f64]) -> Result<f64>>(
    mut f: F,
    x0: &[f64],
    step: f64,
    max_iter: usize,
    tol: f64,
) -> Result<(Vec<f64>, f64, usize, Vec<f64>)> {
    let k = x0.len();
    let clamp = |v: Vec<f64>| -> Vec<f64> { v.into_iter().map(clamp_ln).collect() };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(k + 1);
    let p0 = clamp(x0.to_vec());
    simplex.push((p0.clone(), f(&p0)?));
    for j in 0..k {
        let mut v = x0.to_vec();
        v[j] += step;
        let v = clamp(v);
        let fv = f(&v)?;
        simplex.push((v, fv));
    }
    let mut trace = Vec::new();
    for iter in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        trace.push(simplex[0].1);
        if simplex[k].1 - simplex[0].1 < tol {
            return Ok((simplex[0].0.clone(), simplex[0].1, iter, trace));
        }
        let centroid: Vec<f64> = (0..k)
            .map(|j| simplex[..k].iter().map(|(v, _)| v[j]).sum::<f64>() / k as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            clamp(
                (0..k)
                    .map(|j| centroid[j] + t * (simplex[k].0[j] - centroid[j]))
                    .collect(),
            )
        };
        let xr = along(-1.0);
        let fr = f(&xr)?;
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = f(&xe)?;
            simplex[k] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[k - 1].1 {
            simplex[k] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[k].1 {
                let xc = along(-0.5);
                let fc = f(&xc)?;
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = f(&xc)?;
                (xc, fc)
            };
            if fc < simplex[k].1.min(fr) {
                simplex[k] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for s in simplex.iter_mut().skip(1) {
                    let v: Vec<f64> = (0..k).map(|j| best[j] + 0.5 * (s.0[j] - best[j])).collect();
                    let v = clamp(v);
                    let fv = f(&v)?;
                    *s = (v, fv);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    trace.push(simplex[0].1);
    if simplex[k].1 - simplex[0].1 < tol {
        return Ok((simplex[0].0.clone(), simplex[0].1, max_iter, trace));
    }
    Err(ArgusError::NonConvergence {
        iterations: max_iter,
        trace,
    })
}

pub fn fit_glmm(
    y: &[bool],
    design: &DesignMatrix,
    factors: &[Grouping],
    options: &GlmmOptions,
) -> Result<GlmmFit> {
    let n = design.nrows();
    if factors.is_empty() {
        return Err(ArgusError::invalid(
            "mixed model needs at least one grouping factor",
        ));
    }
    if factors.iter().any(|f| f.index.len() != n) {
        return Err(ArgusError::invalid(
            "grouping length does not match the design",
        ));
    }
    // Also validates the response and design.
    let glm = irls(y, design)?;
    let problem = Problem::new(y, &design.x, factors);
    let zero_state = State {
        beta: glm.beta.clone(),
        u: factors
            .iter()
            .map(|f| DVector::zeros(f.n_levels()))
            .collect(),
    };

    let mut warm = zero_state.clone();
    let evaluate = |sigmas: &[f64], warm: &mut State| -> Result<f64> {
        let mode = problem.profile(sigmas, warm)?;
        *warm = mode.state;
        Ok(mode.objective)
    };

    let (sigmas, outer_iterations, trace) = match &options.fixed_sigmas {
        Some(s) => {
            if s.len() != factors.len() || s.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(ArgusError::invalid(
                    "fixed sigmas must be finite, non-negative, one per factor",
                ));
            }
            (s.clone(), 0, Vec::new())
        }
        None => {
            let x0 = vec![0.5f64.ln(); factors.len()];
            let (best, _, iters, trace) = nelder_mead(
                |ln_s| {
                    let s: Vec<f64> = ln_s.iter().map(|v| v.exp()).collect();
                    evaluate(&s, &mut warm)
                },
                &x0,
                1.0,
                options.max_outer_iter,
                options.tol,
            )?;
            let mut candidates: Vec<Vec<f64>> = vec![best.iter().map(|v| v.exp()).collect()];
            let near_lower: Vec<bool> =
                best.iter().map(|v| *v <= SIGMA_LOWER.ln() + 1e-3).collect();
            if near_lower.iter().any(|&b| b) {
                candidates.push(
                    best.iter()
                        .zip(&near_lower)
                        .map(|(v, &b)| if b { 0.0 } else { v.exp() })
                        .collect(),
                );
            }
            candidates.push(vec![0.0; factors.len()]);
            let mut chosen = candidates[0].clone();
            let mut chosen_obj = f64::INFINITY;
            for cand in candidates {
                let obj = problem.profile(&cand, &warm)?.objective;
                if obj < chosen_obj - 1e-12 {
                    chosen_obj = obj;
                    chosen = cand;
                }
            }
            (chosen, iters, trace)
        }
    };

    let start = if sigmas.iter().all(|&s| s == 0.0) {
        zero_state
    } else {
        warm
    };
    let mode = problem.profile(&sigmas, &start)?;
    let covariance = problem.covariance_from(&mode.sys)?;
    let at_boundary = sigmas
        .iter()
        .map(|&s| s <= SIGMA_LOWER * (1.0 + 1e-9))
        .collect();
    let random_intercepts = factors
        .iter()
        .enumerate()
        .map(|(k, _)| mode.state.u[k].iter().map(|u| sigmas[k] * u).collect())
        .collect();
    Ok(GlmmFit {
        beta: mode.state.beta.clone(),
        covariance,
        sigmas,
        at_boundary,
        objective: mode.objective,
        log_likelihood: -0.5 * mode.objective,
        random_intercepts,
        outer_iterations,
        trace,
    })
}

pub fn fit_glmm_logistic(
    y: &[bool],
    design: &DesignMatrix,
    factors: &[Grouping],
    options: &GlmmOptions,
    response: &str,
) -> Result<RegressionReport> {
    let fit = fit_glmm(y, design, factors, options)?;
    let random_effects = factors
        .iter()
        .zip(fit.sigmas.iter().zip(&fit.at_boundary))
        .map(|(f, (&s, &b))| VarianceComponent {
            group: f.name.clone(),
            n_levels: f.n_levels(),
            variance: if b { 0.0 } else { s * s },
            sd: if b { 0.0 } else { s },
            at_boundary: b,
        })
        .collect();
    let mut metadata = BTreeMap::new();
    metadata.insert("approximation".to_string(), "laplace".to_string());
    Ok(RegressionReport {
        model_id: None,
        kind: FitKind::Glmm,
        response: response.to_string(),
        n: y.len(),
        coefficients: wald_table(&design.names, &fit.beta, &fit.covariance),
        random_effects,
        r2: None,
        adj_r2: None,
        log_likelihood: fit.log_likelihood,
        deviance: None,
        iterations: fit.outer_iterations,
        metadata,
    })
}
