//! `b = log(Delta u)` on grid solutions, the almost Jacobi residual, and a
//! sampled check of the restricted quadratic form behind it.

use crate::cone::{
    dynamic_cn, epsilon_jacobi, epsilon_jacobi_unchecked, Gamma2Sampler, Spectrum,
    INEQUALITY_SLACK,
};
use crate::error::{Error, Result};
use crate::grid::GridFunction;
pub use crate::grid::{hessian_field, HessianField};
use crate::linalg::{dot, norm2, SymMatrix, NODE_SWEEPS};
use crate::report::ExperimentReport;
use crate::rhs::RhsSpec;
use crate::rng::CounterRng;

/// `log(Delta_h u)` at every node of depth >= 1 (NaN on the outer layer).
pub fn log_laplacian_field(u: &GridFunction) -> Result<GridFunction> {
    let mut values = vec![f64::NAN; u.len()];
    for (p, v) in values.iter_mut().enumerate() {
        if u.depth(p) < 1 {
            continue;
        }
        let lap = u.laplacian(p);
        if !(lap > 0.0) {
            return Err(Error::Admissibility {
                node: u.multi_index(p),
                reason: format!("discrete Laplacian {lap} is not positive"),
            });
        }
        *v = lap.ln();
    }
    u.with_values(values)
}

/// Per-node terms of the almost Jacobi residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiNode {
    /// Flat grid index.
    pub node: usize,
    pub laplacian: f64,
    pub delta_f_b: f64,
    pub grad_f_b_sq: f64,
    pub epsilon: f64,
    /// `sum_i f_{p_i} b_i`.
    pub drift_term: f64,
    /// `C Gamma^2 (1 + Delta u)`.
    pub remainder: f64,
    /// `delta_f_b - epsilon grad_f_b_sq - drift_term + remainder`.
    pub residual: f64,
    /// Same expression for the exact solution, when one is known.
    pub exact_residual: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct JacobiReport {
    pub nodes: Vec<JacobiNode>,
    pub constant: f64,
    /// `max |u| + max |D_h u| + 1`.
    pub gamma: f64,
    pub h: f64,
    pub min_residual: f64,
    pub argmin: usize,
    /// Smallest remainder constant making every node residual nonnegative.
    pub min_constant: f64,
    /// `max |residual - exact_residual| / h^2` when the exact solution is
    /// known, else `max(0, -min_residual) / h^2`.
    pub k_floor: f64,
    pub min_epsilon: f64,
}

impl JacobiReport {
    /// `max |residual - exact_residual| / h^2` over the nodes with
    /// `|x - center|_inf <= half_width`, a subdomain that does not move
    /// under refinement. `None` without an exact solution or when no node
    /// qualifies.
    pub fn consistency_constant(&self, u: &GridFunction, half_width: f64) -> Option<f64> {
        let center = u.center();
        let h2 = self.h * self.h;
        let mut worst: Option<f64> = None;
        for nd in &self.nodes {
            let inside = u
                .coords(nd.node)
                .iter()
                .zip(&center)
                .all(|(x, c)| (x - c).abs() <= half_width * (1.0 + 1e-12));
            if let (true, Some(exact)) = (inside, nd.exact_residual) {
                let k = (nd.residual - exact).abs() / h2;
                worst = Some(worst.map_or(k, |w: f64| w.max(k)));
            }
        }
        worst
    }

    pub fn to_report(&self, u: &GridFunction) -> ExperimentReport {
        let mut r = ExperimentReport::new([
            "node", "x1", "laplacian", "delta_f_b", "grad_f_b_sq", "epsilon", "drift", "remainder",
            "residual",
        ]);
        for nd in &self.nodes {
            r.push(vec![
                nd.node.into(),
                u.coords(nd.node)[0].into(),
                nd.laplacian.into(),
                nd.delta_f_b.into(),
                nd.grad_f_b_sq.into(),
                nd.epsilon.into(),
                nd.drift_term.into(),
                nd.remainder.into(),
                nd.residual.into(),
            ]);
        }
        r.set("nodes", self.nodes.len());
        r.set("h", self.h);
        r.set("C", self.constant);
        r.set("Gamma", self.gamma);
        r.set("min_residual", self.min_residual);
        r.set("C_min", self.min_constant);
        r.set("K", self.k_floor);
        r.set("min_epsilon", self.min_epsilon);
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiOptions {
    /// Remainder constant; `None` means `10 (1 + proxy)` with `proxy` from
    /// [`rhs_c11_proxy`].
    pub constant: Option<f64>,
    /// Multiplier applied to the gradient weight (1 for the inequality
    /// itself; larger values are a falsification control).
    pub epsilon_scale: f64,
}

impl Default for JacobiOptions {
    fn default() -> Self {
        JacobiOptions {
            constant: None,
            epsilon_scale: 1.0,
        }
    }
}

/// Max over the nodes of depth >= 1 of the first and pure second central
/// differences of `f` in each of its `2n + 1` arguments.
pub fn rhs_c11_proxy(u: &GridFunction, rhs: &RhsSpec) -> f64 {
    const STEP: f64 = 1e-4;
    let n = u.n();
    let mut worst = 0.0f64;
    let mut x = vec![0.0; n];
    for p in (0..u.len()).filter(|&p| u.depth(p) >= 1) {
        u.coords_into(p, &mut x);
        let mut args: Vec<f64> = x.clone();
        args.push(u.values()[p]);
        args.extend(u.gradient(p));
        let eval = |a: &[f64]| rhs.eval(&a[..n], a[n], &a[n + 1..]);
        let f0 = eval(&args);
        for k in 0..args.len() {
            let orig = args[k];
            args[k] = orig + STEP;
            let fp = eval(&args);
            args[k] = orig - STEP;
            let fm = eval(&args);
            args[k] = orig;
            worst = worst
                .max(((fp - fm) / (2.0 * STEP)).abs())
                .max(((fp - 2.0 * f0 + fm) / (STEP * STEP)).abs());
        }
    }
    worst
}

fn node_epsilon(n: usize, hm: &SymMatrix, lap: f64, scale: f64) -> Result<f64> {
    let lmin = crate::linalg::jacobi_eigenvalues(hm, NODE_SWEEPS)
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let eps = epsilon_jacobi(n, lmin / lap)?;
    Ok(scale * eps)
}

fn remainder(c: f64, gamma: f64, lap: f64) -> f64 {
    c * gamma * gamma * (1.0 + lap)
}

/// Almost Jacobi residual at every node of depth >= 2, with the default
/// options and remainder constant `c` (or the default when `None`).
pub fn jacobi_residual(u: &GridFunction, rhs: &RhsSpec, c: Option<f64>) -> Result<JacobiReport> {
    jacobi_residual_with(
        u,
        rhs,
        &JacobiOptions {
            constant: c,
            ..JacobiOptions::default()
        },
    )
}

pub fn jacobi_residual_with(
    u: &GridFunction,
    rhs: &RhsSpec,
    opts: &JacobiOptions,
) -> Result<JacobiReport> {
    let n = u.n();
    if n < 4 {
        return Err(Error::UnsupportedDimension(n));
    }
    if let Some(p) = (0..u.len()).find(|&p| {
        u.depth(p) >= 1 && !crate::cone::matrix_certificate(&u.hessian(p)).in_gamma2
    }) {
        return Err(Error::Admissibility {
            node: u.multi_index(p),
            reason: "Hessian is not in the Gamma_2 cone".into(),
        });
    }
    let b = log_laplacian_field(u)?;
    let gamma = u.max_abs() + u.max_gradient_norm() + 1.0;
    let constant = opts
        .constant
        .unwrap_or_else(|| 10.0 * (1.0 + rhs_c11_proxy(u, rhs)));
    let exact = match rhs {
        RhsSpec::Manufactured { solution, .. } => Some(solution),
        _ => None,
    };
    let h = u.h();
    let mut nodes = Vec::new();
    let mut x = vec![0.0; n];
    for p in (0..u.len()).filter(|&p| u.depth(p) >= 2) {
        let hm = u.hessian(p);
        let lap = hm.trace();
        let grad_u = u.gradient(p);
        u.coords_into(p, &mut x);
        let bg = b.gradient(p);
        let bh = b.hessian(p);
        let (delta_f_b, grad_f_b_sq) = f_contractions(&hm, &bg, &bh);
        let epsilon = node_epsilon(n, &hm, lap, opts.epsilon_scale)?;
        let fp = rhs.d_p(&x, u.values()[p], &grad_u);
        let drift_term = dot(&fp, &bg);
        let rem = remainder(constant, gamma, lap);
        let residual = delta_f_b - epsilon * grad_f_b_sq - drift_term + rem;
        let exact_residual = exact
            .map(|s| -> Result<f64> {
                let hs = s.hessian(&x);
                let ls = hs.trace();
                let (sg, sh) = s.log_laplacian_derivatives(&x);
                let (d, g) = f_contractions(&hs, &sg, &sh);
                let e = node_epsilon(n, &hs, ls, opts.epsilon_scale)?;
                let fps = rhs.d_p(&x, s.value(&x), &s.gradient(&x));
                Ok(d - e * g - dot(&fps, &sg) + remainder(constant, gamma, ls))
            })
            .transpose()?;
        nodes.push(JacobiNode {
            node: p,
            laplacian: lap,
            delta_f_b,
            grad_f_b_sq,
            epsilon,
            drift_term,
            remainder: rem,
            residual,
            exact_residual,
        });
    }
    if nodes.is_empty() {
        return Err(Error::Configuration("grid has no nodes of depth >= 2".into()));
    }
    let (argmin, min_residual) = nodes
        .iter()
        .map(|nd| (nd.node, nd.residual))
        .fold((0, f64::INFINITY), |acc, v| if v.1 < acc.1 { v } else { acc });
    let min_constant = nodes
        .iter()
        .map(|nd| {
            let base = nd.residual - nd.remainder;
            -base / (gamma * gamma * (1.0 + nd.laplacian))
        })
        .fold(0.0f64, f64::max);
    let k_floor = if exact.is_some() {
        nodes
            .iter()
            .map(|nd| (nd.residual - nd.exact_residual.unwrap_or(nd.residual)).abs())
            .fold(0.0f64, f64::max)
            / (h * h)
    } else {
        (-min_residual).max(0.0) / (h * h)
    };
    let min_epsilon = nodes.iter().map(|nd| nd.epsilon).fold(f64::INFINITY, f64::min);
    Ok(JacobiReport {
        nodes,
        constant,
        gamma,
        h,
        min_residual,
        argmin,
        min_constant,
        k_floor,
        min_epsilon,
    })
}

/// `(sum F_ij b_ij, sum F_ij b_i b_j)` with `F = (tr H) I - H`.
fn f_contractions(hm: &SymMatrix, bg: &[f64], bh: &SymMatrix) -> (f64, f64) {
    let n = hm.dim();
    let t = hm.trace();
    let mut d = 0.0;
    let mut g = 0.0;
    for i in 0..n {
        for j in 0..n {
            let fij = if i == j { t } else { 0.0 } - hm.get(i, j);
            d += fij * bh.get(i, j);
            g += fij * bg[i] * bg[j];
        }
    }
    (d, g)
}

/// One instance of the restricted quadratic form for index `i` of a
/// diagonal Hessian with eigenvalues `lambda` and `sigma_2 = f`.
#[derive(Debug, Clone, PartialEq)]
pub struct QformInstance {
    pub theta: f64,
    pub delta: f64,
    pub eta: f64,
    pub e_sq: f64,
    pub l_sq: f64,
    pub e_dot_l: f64,
    /// Largest deviation of the three inner products from their closed forms.
    pub closed_form_defect: f64,
    pub trace: f64,
    pub det: f64,
    e: Vec<f64>,
    l: Vec<f64>,
    dfv: Vec<f64>,
    fii: f64,
    sum_f: f64,
    index: usize,
}

impl QformInstance {
    /// `3|t|^2 - 2 beta <t,E>^2 - eta beta <t,L>^2`.
    pub fn q_tilde(&self, t: &[f64]) -> f64 {
        let beta = 1.0 + self.theta;
        let te = dot(t, &self.e);
        let tl = dot(t, &self.l);
        3.0 * norm2(t) - 2.0 * beta * te * te - self.eta * beta * tl * tl
    }

    /// `3|t|^2 - 2 t_i^2 - eta (sum t)^2`.
    pub fn q_full(&self, t: &[f64]) -> f64 {
        let s: f64 = t.iter().sum();
        3.0 * norm2(t) - 2.0 * t[self.index] * t[self.index] - self.eta * s * s
    }

    /// Lower bound for [`Self::q_full`] at `t` with `<DF, t> = fi`.
    pub fn q_lower_bound(&self, t: &[f64], fi: f64) -> f64 {
        let df4 = norm2(&self.dfv).powi(2);
        let k = 1.0 + 1.0 / self.theta;
        self.q_tilde(t)
            - 2.0 * k * self.fii * self.fii * fi * fi / df4
            - self.eta * k * self.sum_f * self.sum_f * fi * fi / df4
    }

    /// `DF = (F_11, ..., F_nn)`.
    pub fn df(&self) -> &[f64] {
        &self.dfv
    }
}

/// The default choice `min{1/100, (n-1) f / (9 |DF|^2)}`.
pub fn default_theta(n: usize, f: f64, df_sq: f64) -> f64 {
    (0.01f64).min((n as f64 - 1.0) * f / (9.0 * df_sq))
}

/// Builds `E`, `L`, `eta` and the 2x2 coefficient matrix for index `i`.
/// `lambda` must satisfy `sigma_2(lambda) = f`; `theta = None` uses
/// [`default_theta`].
pub fn qform_instance(
    lambda: &Spectrum,
    i: usize,
    epsilon: f64,
    theta: Option<f64>,
) -> QformInstance {
    let n = lambda.n();
    let lap = lambda.sigma1();
    let f = lambda.sigma2();
    let dfv: Vec<f64> = lambda.values().iter().map(|l| lap - l).collect();
    let df_sq = norm2(&dfv);
    let fii = dfv[i];
    let sum_f: f64 = dfv.iter().sum();
    let theta = theta.unwrap_or_else(|| default_theta(n, f, df_sq));
    let delta = 1.0 + epsilon;
    let eta = 1.0 + delta * fii / lap;
    let beta = 1.0 + theta;
    let e: Vec<f64> = (0..n)
        .map(|k| if k == i { 1.0 } else { 0.0 } - fii / df_sq * dfv[k])
        .collect();
    let l: Vec<f64> = (0..n).map(|k| 1.0 - sum_f / df_sq * dfv[k]).collect();
    let e_sq = norm2(&e);
    let l_sq = norm2(&l);
    let e_dot_l = dot(&e, &l);
    let nf = n as f64;
    let df_closed = (nf - 1.0) * lap * lap - 2.0 * f;
    let closed = [
        1.0 - fii * fii / df_closed,
        1.0 - 2.0 * (nf - 1.0) * f / df_closed,
        1.0 - (nf - 1.0) * fii * lap / df_closed,
    ];
    let closed_form_defect = [e_sq, l_sq, e_dot_l]
        .iter()
        .zip(closed)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let a11 = 3.0 - 2.0 * beta * e_sq;
    let a12 = -2.0 * beta * e_dot_l;
    let a21 = -eta * beta * e_dot_l;
    let a22 = 3.0 - eta * beta * l_sq;
    QformInstance {
        theta,
        delta,
        eta,
        e_sq,
        l_sq,
        e_dot_l,
        closed_form_defect,
        trace: a11 + a22,
        det: a11 * a22 - a12 * a21,
        e,
        l,
        dfv,
        fii,
        sum_f,
        index: i,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QformOptions {
    /// Range of the sampled `f = sigma_2`.
    pub f_range: (f64, f64),
    /// Replaces the default theta when set.
    pub theta: Option<f64>,
    /// Draw spectra that violate the dynamic condition (n >= 5) and use the
    /// unchecked, negative epsilon.
    pub violate_dynamic: bool,
    /// Bound for the prescribed `|<DF, t>| = |f_i|`.
    pub fi_scale: f64,
}

impl Default for QformOptions {
    fn default() -> Self {
        QformOptions {
            f_range: (0.1, 10.0),
            theta: None,
            violate_dynamic: false,
            fi_scale: 0.1,
        }
    }
}

/// Totals of a sampled quadratic-form run.
#[derive(Debug, Clone)]
pub struct QformSummary {
    pub samples: usize,
    pub trace_violations: usize,
    pub det_violations: usize,
    /// Random `t` with `Q~_i(t) < -slack |t|^2`.
    pub q_tilde_violations: usize,
    /// Random `t` where the Cauchy-Schwarz lower bound for `Q_i` fails.
    pub bound_violations: usize,
    pub min_trace: f64,
    pub min_det: f64,
    pub max_closed_form_defect: f64,
    pub acceptance_rate: f64,
    pub report: ExperimentReport,
}

impl QformSummary {
    pub fn violations(&self) -> usize {
        self.trace_violations + self.det_violations + self.q_tilde_violations + self.bound_violations
    }
}

/// Samples `samples` instances and checks trace, determinant, `Q~_i >= 0`
/// on a random `t`, and the lower bound for `Q_i`. The report holds one row
/// per sample.
pub fn qform_verify(n: usize, samples: usize, seed: u64) -> Result<QformSummary> {
    qform_verify_with(n, samples, seed, &QformOptions::default())
}

pub fn qform_verify_with(
    n: usize,
    samples: usize,
    seed: u64,
    opts: &QformOptions,
) -> Result<QformSummary> {
    if n < 4 {
        return Err(Error::UnsupportedDimension(n));
    }
    if opts.violate_dynamic && n < 5 {
        return Err(Error::param("the dynamic condition only applies for n >= 5"));
    }
    let root = CounterRng::new(seed);
    let mut spec_rng = root.split(1);
    let mut aux = root.split(2);
    let c = dynamic_cn(n)?;
    let mut sampler = Gamma2Sampler::new(n);
    if n >= 5 {
        sampler = sampler.with_dynamic_condition(c);
    }
    let mut report = ExperimentReport::new([
        "sample", "index", "ratio", "f", "theta", "epsilon", "trace", "det", "q_tilde", "q_gap",
    ]);
    let mut s = QformSummary {
        samples,
        trace_violations: 0,
        det_violations: 0,
        q_tilde_violations: 0,
        bound_violations: 0,
        min_trace: f64::INFINITY,
        min_det: f64::INFINITY,
        max_closed_form_defect: 0.0,
        acceptance_rate: 0.0,
        report: ExperimentReport::default(),
    };
    for k in 0..samples {
        let raw = if opts.violate_dynamic {
            sampler.sample_violating(&mut spec_rng, c)
        } else {
            sampler.sample(&mut spec_rng)
        };
        let f = aux.uniform(opts.f_range.0, opts.f_range.1);
        let lambda = raw.scaled((f / raw.sigma2()).sqrt());
        let i = aux.below(n as u64) as usize;
        let ratio = lambda.min() / lambda.sigma1();
        let epsilon = if opts.violate_dynamic {
            epsilon_jacobi_unchecked(n, ratio)
        } else {
            epsilon_jacobi(n, ratio)?
        };
        let inst = qform_instance(&lambda, i, epsilon, opts.theta);
        let fi = aux.uniform(-opts.fi_scale, opts.fi_scale);
        let t0: Vec<f64> = (0..n).map(|_| aux.normal()).collect();
        let dfv = inst.df();
        let shift = (fi - dot(dfv, &t0)) / norm2(dfv);
        let t: Vec<f64> = t0.iter().zip(dfv).map(|(a, d)| a + shift * d).collect();
        let qt = inst.q_tilde(&t);
        let gap = inst.q_full(&t) - inst.q_lower_bound(&t, fi);
        let tn = norm2(&t);
        if inst.trace < -INEQUALITY_SLACK {
            s.trace_violations += 1;
        }
        if inst.det < -INEQUALITY_SLACK {
            s.det_violations += 1;
        }
        if qt < -INEQUALITY_SLACK * tn.max(1.0) {
            s.q_tilde_violations += 1;
        }
        if gap < -INEQUALITY_SLACK * (tn + 1.0) {
            s.bound_violations += 1;
        }
        s.min_trace = s.min_trace.min(inst.trace);
        s.min_det = s.min_det.min(inst.det);
        s.max_closed_form_defect = s.max_closed_form_defect.max(inst.closed_form_defect);
        report.push(vec![
            k.into(),
            i.into(),
            ratio.into(),
            f.into(),
            inst.theta.into(),
            epsilon.into(),
            inst.trace.into(),
            inst.det.into(),
            qt.into(),
            gap.into(),
        ]);
    }
    s.acceptance_rate = sampler.acceptance_rate();
    report.set("n", n);
    report.set("samples", samples);
    report.set("seed", seed);
    report.set("falsification", opts.violate_dynamic);
    report.set("trace_violations", s.trace_violations);
    report.set("det_violations", s.det_violations);
    report.set("q_tilde_violations", s.q_tilde_violations);
    report.set("bound_violations", s.bound_violations);
    report.set("min_trace", s.min_trace);
    report.set("min_det", s.min_det);
    report.set("max_closed_form_defect", s.max_closed_form_defect);
    report.set("acceptance_rate", s.acceptance_rate);
    s.report = report;
    Ok(s)
}
