//! Elementary symmetric functions, the Gamma_2 cone, and the closed-form
//! constants and quadratic polynomials behind the almost Jacobi inequality.
//!
//! Conventions: a spectrum is sorted descending, `lambda[0] >= ... >=
//! lambda[n-1]`. The dimension constant `c(n) = (sqrt(3n^2+1) - n + 1)/(2n)`
//! is the dynamic semi-convexity threshold, and `y` always denotes the
//! ratio `F_ii / Delta u` of a linearized coefficient to the Laplacian.

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::report::{Cell, ExperimentReport};
use crate::rng::CounterRng;

/// Relative tolerance for algebraic identities.
pub const IDENTITY_TOL: f64 = 1e-12;
/// Absolute slack for inequality properties.
pub const INEQUALITY_SLACK: f64 = 1e-10;
/// Relative width of the cone boundary that is classified as outside.
pub const BOUNDARY_TOL: f64 = 1e-14;

/// Eigenvalues of a Hessian candidate, sorted descending.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    values: Vec<f64>,
}

impl Spectrum {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::param(format!(
                "a spectrum needs n >= 2 values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("spectrum values must be finite"));
        }
        // stable: exact ties keep input order
        values.sort_by(|a, b| b.total_cmp(a));
        Ok(Spectrum { values })
    }

    pub fn of_matrix(h: &SymMatrix) -> Result<Self> {
        Spectrum::new(h.eigenvalues())
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max(&self) -> f64 {
        self.values[0]
    }

    pub fn min(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn sigma1(&self) -> f64 {
        sigma_k(self, 1).expect("k = 1 is always valid")
    }

    pub fn sigma2(&self) -> f64 {
        sigma_k(self, 2).expect("n >= 2")
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// `t * lambda`; order is preserved for t > 0.
    pub fn scaled(&self, t: f64) -> Spectrum {
        Spectrum::new(self.values.iter().map(|v| v * t).collect()).expect("same length")
    }
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bp = s - a;
    (s, (a - (s - bp)) + (b - bp))
}

/// k-th elementary symmetric polynomial by the incremental recurrence
/// `e_j <- e_j + lambda_m e_{j-1}`, with every product and sum carried in
/// compensated (double-double style) form.
pub fn sigma_k(lambda: &Spectrum, k: usize) -> Result<f64> {
    let n = lambda.n();
    if k < 1 || k > n {
        return Err(Error::param(format!("sigma_k needs 1 <= k <= n = {n}, got k = {k}")));
    }
    let mut hi = vec![0.0; k + 1];
    let mut lo = vec![0.0; k + 1];
    hi[0] = 1.0;
    for (m, &l) in lambda.values().iter().enumerate() {
        for j in (1..=k.min(m + 1)).rev() {
            let p = l * hi[j - 1];
            let perr = l.mul_add(hi[j - 1], -p) + l * lo[j - 1];
            let (s, serr) = two_sum(hi[j], p);
            let tail = lo[j] + serr + perr;
            let (h2, l2) = two_sum(s, tail);
            hi[j] = h2;
            lo[j] = l2;
        }
    }
    Ok(hi[k] + lo[k])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeCertificate {
    pub sigma1: f64,
    pub sigma2: f64,
    pub in_gamma2: bool,
}

/// Strict membership in the open cone. Values within `BOUNDARY_TOL` of the
/// boundary (relative to `sum |lambda_i|`) count as outside.
pub fn in_gamma2(lambda: &Spectrum) -> ConeCertificate {
    let sigma1 = lambda.sigma1();
    let sigma2 = lambda.sigma2();
    let scale: f64 = lambda.values().iter().map(|v| v.abs()).sum();
    let in_gamma2 = sigma1 > BOUNDARY_TOL * scale && sigma2 > BOUNDARY_TOL * scale * scale;
    ConeCertificate {
        sigma1,
        sigma2,
        in_gamma2,
    }
}

/// Membership test from the matrix invariants `tr H` and `sigma_2(H)`,
/// without an eigen-decomposition. The boundary scale is `sqrt(n) |H|_F`,
/// an upper bound for `sum |lambda_i|`.
pub fn matrix_certificate(h: &SymMatrix) -> ConeCertificate {
    let sigma1 = h.trace();
    let sigma2 = h.sigma2();
    let scale = (h.dim() as f64).sqrt() * h.frobenius();
    let in_gamma2 = sigma1 > BOUNDARY_TOL * scale && sigma2 > BOUNDARY_TOL * scale * scale;
    ConeCertificate {
        sigma1,
        sigma2,
        in_gamma2,
    }
}

fn require_gamma2(lambda: &Spectrum) -> Result<ConeCertificate> {
    let cert = in_gamma2(lambda);
    if !cert.in_gamma2 {
        return Err(Error::domain(format!(
            "spectrum {:?} is not in Gamma_2 (sigma1 = {}, sigma2 = {})",
            lambda.values(),
            cert.sigma1,
            cert.sigma2
        )));
    }
    Ok(cert)
}

/// `sigma_1 - n/(n-2) |lambda_n|`, strictly positive on Gamma_2 for n > 2.
pub fn sharp_min_eig_gap(lambda: &Spectrum) -> Result<f64> {
    let n = lambda.n();
    if n <= 2 {
        return Err(Error::domain("the sharp minimum-eigenvalue bound needs n > 2"));
    }
    let cert = require_gamma2(lambda)?;
    Ok(cert.sigma1 - (n as f64 / (n as f64 - 2.0)) * lambda.min().abs())
}

/// Margins (right minus left side, minimised over i where relevant) of the
/// four bounds on `sigma_1 - lambda_i`:
///
/// 0. `sigma_2/sigma_1 <= sigma_1 - lambda_1`
/// 1. `sigma_1 - lambda_1 <= (n-1)/n sigma_1`
/// 2. `(1 - 1/sqrt 2) sigma_1 <= sigma_1 - lambda_i` for i >= 2
/// 3. `sigma_1 - lambda_i <= (2n-2)/n sigma_1` for i >= 2
pub fn fii_bounds_margins(lambda: &Spectrum) -> Result<[f64; 4]> {
    let cert = require_gamma2(lambda)?;
    let n = lambda.n() as f64;
    let s1 = cert.sigma1;
    let f1 = s1 - lambda.max();
    let mut m = [
        f1 - cert.sigma2 / s1,
        (n - 1.0) / n * s1 - f1,
        f64::INFINITY,
        f64::INFINITY,
    ];
    for &l in &lambda.values()[1..] {
        let fi = s1 - l;
        m[2] = m[2].min(fi - (1.0 - std::f64::consts::FRAC_1_SQRT_2) * s1);
        m[3] = m[3].min((2.0 * n - 2.0) / n * s1 - fi);
    }
    Ok(m)
}

/// True iff all four bounds of [`fii_bounds_margins`] hold up to a relative
/// tolerance of 1e-12.
pub fn fii_bounds_check(lambda: &Spectrum) -> Result<bool> {
    let margins = fii_bounds_margins(lambda)?;
    let tol = IDENTITY_TOL * lambda.sigma1().abs().max(1.0);
    Ok(margins.iter().all(|&m| m >= -tol))
}

/// Coefficients of the linearized sigma_2 operator, `F = (tr H) I - H`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedCoeffs {
    pub f: SymMatrix,
    /// `|sum_i F_ii - (n-1) tr H|`.
    pub trace_identity_residual: f64,
}

pub fn linearized_coeffs(hessian: &SymMatrix) -> Result<LinearizedCoeffs> {
    let n = hessian.dim();
    let asym = hessian.asymmetry();
    if asym > IDENTITY_TOL * hessian.frobenius() {
        return Err(Error::param(format!("hessian is not symmetric (asymmetry {asym:e})")));
    }
    let t = hessian.trace();
    let mut f = SymMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let delta = if i == j { t } else { 0.0 };
            f.set(i, j, delta - hessian.get(i, j));
        }
    }
    let trace_identity_residual = (f.trace() - (n as f64 - 1.0) * t).abs();
    Ok(LinearizedCoeffs {
        f,
        trace_identity_residual,
    })
}

fn require_dim(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::param(format!("dimension must be >= 2, got {n}")));
    }
    Ok(())
}

/// Dynamic semi-convexity constant `c(n) = (sqrt(3n^2+1) - n + 1) / (2n)`.
pub fn dynamic_cn(n: usize) -> Result<f64> {
    require_dim(n)?;
    let nf = n as f64;
    Ok(((3.0 * nf * nf + 1.0).sqrt() - nf + 1.0) / (2.0 * nf))
}

/// Prefactor `C(n) = (sqrt(3n^2+1) - n - 1) / (3(n-1))` of the n >= 5
/// epsilon, so that `epsilon = C(n) (c(n) + lambda_min / Delta u)`.
pub fn jacobi_prefactor(n: usize) -> Result<f64> {
    require_dim(n)?;
    let nf = n as f64;
    Ok(((3.0 * nf * nf + 1.0).sqrt() - nf - 1.0) / (3.0 * (nf - 1.0)))
}

/// Gradient weight of the almost Jacobi inequality as a function of
/// `ratio = lambda_min / Delta u`.
///
/// n = 4: `(2/9)(1/2 + ratio)`. n >= 5: `C(n)(c(n) + ratio)`, which equals
/// `-(2n y_n^-)/(3(n-1)) (y_n^+ - F_nn/Delta u)` with `F_nn/Delta u = 1 - ratio`.
pub fn epsilon_jacobi(n: usize, ratio: f64) -> Result<f64> {
    match n {
        0..=3 => Err(Error::UnsupportedDimension(n)),
        4 => {
            if ratio < -0.5 {
                return Err(Error::domain(format!(
                    "lambda_min / Delta u = {ratio} < -1/2 is outside Gamma_2 for n = 4"
                )));
            }
            Ok(2.0 / 9.0 * (0.5 + ratio))
        }
        _ => {
            let c = dynamic_cn(n)?;
            if ratio < -c {
                return Err(Error::domain(format!(
                    "dynamic semi-convexity violated: lambda_min / Delta u = {ratio} < -c({n}) = {}",
                    -c
                )));
            }
            Ok(jacobi_prefactor(n)? * (c + ratio))
        }
    }
}

/// Same formula as [`epsilon_jacobi`] without the domain check; may be
/// negative. Used by falsification controls.
pub fn epsilon_jacobi_unchecked(n: usize, ratio: f64) -> f64 {
    if n == 4 {
        2.0 / 9.0 * (0.5 + ratio)
    } else {
        let nf = n as f64;
        let s = (3.0 * nf * nf + 1.0).sqrt();
        (s - nf - 1.0) / (3.0 * (nf - 1.0)) * ((s - nf + 1.0) / (2.0 * nf) + ratio)
    }
}

/// Roots `(y_n^-, y_n^+) = (n + 1 -+ sqrt(3n^2+1)) / (2n)` of
/// `q_1(y) = -2n y^2 + (2n+2) y + n - 1`.
pub fn roots_yn(n: usize) -> Result<(f64, f64)> {
    require_dim(n)?;
    let nf = n as f64;
    let s = (3.0 * nf * nf + 1.0).sqrt();
    Ok(((nf + 1.0 - s) / (2.0 * nf), (nf + 1.0 + s) / (2.0 * nf)))
}

/// Roots `(n - 2 -+ sqrt(9n^2 - 12n + 4)) / (2n)` of
/// `R_1(y) = -2n y^2 + (2n-4) y + 4(n-1)`.
pub fn roots_ytilde(n: usize) -> Result<(f64, f64)> {
    require_dim(n)?;
    let nf = n as f64;
    let s = (9.0 * nf * nf - 12.0 * nf + 4.0).sqrt();
    Ok(((nf - 2.0 - s) / (2.0 * nf), (nf - 2.0 + s) / (2.0 * nf)))
}

/// `q_1(y) = -2n y^2 + (2n+2) y + (n-1)`.
pub fn q1(n: usize, y: f64) -> f64 {
    let nf = n as f64;
    -2.0 * nf * y * y + (2.0 * nf + 2.0) * y + nf - 1.0
}

/// epsilon-coefficient of `q_delta`: `r(y) = -2n y^2 + 4(n-1) y - 3(n-1)`.
pub fn r_eps(n: usize, y: f64) -> f64 {
    let nf = n as f64;
    -2.0 * nf * y * y + 4.0 * (nf - 1.0) * y - 3.0 * (nf - 1.0)
}

/// `R_1(y) = -2n y^2 + (2n-4) y + 4(n-1)`.
pub fn big_r1(n: usize, y: f64) -> f64 {
    let nf = n as f64;
    -2.0 * nf * y * y + (2.0 * nf - 4.0) * y + 4.0 * (nf - 1.0)
}

/// epsilon-coefficient of `R_delta`: `-2n y^2 + 4(n-1) y`.
pub fn r_tilde(n: usize, y: f64) -> f64 {
    let nf = n as f64;
    -2.0 * nf * y * y + 4.0 * (nf - 1.0) * y
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QValues {
    /// `q_delta(y)`
    pub q_delta: f64,
    /// `R_delta(y)`
    pub r_delta: f64,
    /// `q_{delta,theta}(y)`, evaluated from its own coefficients.
    pub q_delta_theta: f64,
    /// `|q_{delta,theta} - q_delta - theta R_delta|`.
    pub split_residual: f64,
}

/// The determinant polynomial `q_{delta,beta}(y)` with `beta = 1 + theta`,
/// `delta = 1 + epsilon`, and its split `q_delta + theta R_delta`.
///
/// Accepts `y` in `(0, (2n-2)/n]`; the right end is admitted because the
/// n = 4 root `y^+ = 3/2` sits exactly there.
pub fn q_polynomials(n: usize, epsilon: f64, theta: f64, y: f64) -> Result<QValues> {
    require_dim(n)?;
    if !(0.0..=0.25).contains(&theta) {
        return Err(Error::param(format!("theta = {theta} outside [0, 1/4]")));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::param(format!("epsilon = {epsilon} outside [0, 1]")));
    }
    let nf = n as f64;
    let upper = (2.0 * nf - 2.0) / nf;
    if !(y > 0.0 && y <= upper) {
        return Err(Error::domain(format!("y = {y} outside (0, {upper}]")));
    }
    let delta = 1.0 + epsilon;
    let beta = 1.0 + theta;
    let q_delta = -2.0 * nf * delta * y * y
        + (4.0 * (nf - 1.0) * delta - 2.0 * nf + 6.0) * y
        + (nf - 1.0) * (4.0 - 3.0 * delta);
    let r_delta =
        -2.0 * nf * delta * y * y + (4.0 * (nf - 1.0) * delta - 2.0 * nf) * y + 4.0 * (nf - 1.0);
    let q_delta_theta = -2.0 * nf * beta * delta * y * y
        + (4.0 * (nf - 1.0) * beta * delta - 2.0 * nf * beta + 6.0) * y
        + (nf - 1.0) * (4.0 * beta - 3.0 * delta);
    let split_residual = (q_delta_theta - q_delta - theta * r_delta).abs();
    let scale = 1.0 + q_delta.abs() + r_delta.abs() + 2.0 * nf * delta * beta * y * y;
    debug_assert!(split_residual <= IDENTITY_TOL * scale * 10.0);
    Ok(QValues {
        q_delta,
        r_delta,
        q_delta_theta,
        split_residual,
    })
}

/// `delta <= 3(1-theta)/(1+theta) * n/(2n-2)`, the condition making the
/// trace of the restricted form nonnegative.
pub fn trace_condition(n: usize, delta: f64, theta: f64) -> bool {
    let nf = n as f64;
    delta <= 3.0 * (1.0 - theta) / (1.0 + theta) * nf / (2.0 * nf - 2.0)
}

/// Worst-case epsilon at `y = F_nn / Delta u`: `(2/9)(3/2 - y)` for n = 4,
/// `-(2n y_n^-)/(3(n-1)) (y_n^+ - y)` for n >= 5.
pub fn epsilon_at_y(n: usize, y: f64) -> Result<f64> {
    match n {
        0..=3 => Err(Error::UnsupportedDimension(n)),
        4 => Ok(2.0 / 9.0 * (1.5 - y)),
        _ => {
            let (ym, yp) = roots_yn(n)?;
            let nf = n as f64;
            Ok(-(2.0 * nf * ym) / (3.0 * (nf - 1.0)) * (yp - y))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolyScan {
    pub n: usize,
    pub theta: f64,
    pub points: usize,
    /// `(y, epsilon, q_{delta,theta}(y))` per grid point.
    pub samples: Vec<(f64, f64, f64)>,
    pub min_value: f64,
    pub argmin: f64,
}

/// Evaluates `q_{delta,theta}` on `y_k = k y^+ / points`, k = 1..=points,
/// with epsilon from [`epsilon_at_y`].
pub fn poly_scan(n: usize, points: usize, theta: f64) -> Result<PolyScan> {
    if points == 0 {
        return Err(Error::param("poly_scan needs at least one point"));
    }
    let upper = if n == 4 { 1.5 } else { roots_yn(n)?.1 };
    let mut samples = Vec::with_capacity(points);
    let mut min_value = f64::INFINITY;
    let mut argmin = f64::NAN;
    for k in 1..=points {
        let y = upper * k as f64 / points as f64;
        let eps = epsilon_at_y(n, y)?;
        let q = q_polynomials(n, eps, theta, y)?.q_delta_theta;
        if q < min_value {
            min_value = q;
            argmin = y;
        }
        samples.push((y, eps, q));
    }
    Ok(PolyScan {
        n,
        theta,
        points,
        samples,
        min_value,
        argmin,
    })
}

/// Rejection sampler for Gamma_2: iid uniform eigenvalues on `[lo, hi]`.
#[derive(Debug, Clone)]
pub struct Gamma2Sampler {
    pub n: usize,
    pub lo: f64,
    pub hi: f64,
    /// Additional filter `lambda_min / sigma_1 >= -c` (dynamic condition).
    pub min_ratio: Option<f64>,
    pub proposals: u64,
    pub accepted: u64,
}

impl Gamma2Sampler {
    pub fn new(n: usize) -> Self {
        Gamma2Sampler {
            n,
            lo: -1.0,
            hi: 3.0,
            min_ratio: None,
            proposals: 0,
            accepted: 0,
        }
    }

    pub fn with_dynamic_condition(mut self, c: f64) -> Self {
        self.min_ratio = Some(c);
        self
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }

    pub fn sample(&mut self, rng: &mut CounterRng) -> Spectrum {
        loop {
            self.proposals += 1;
            let vals: Vec<f64> = (0..self.n).map(|_| rng.uniform(self.lo, self.hi)).collect();
            let s = Spectrum::new(vals).expect("n >= 2");
            let cert = in_gamma2(&s);
            if !cert.in_gamma2 {
                continue;
            }
            if let Some(c) = self.min_ratio {
                if s.min() / cert.sigma1 < -c {
                    continue;
                }
            }
            self.accepted += 1;
            return s;
        }
    }

    /// Gamma_2 spectra with `lambda_min / sigma_1 < -c`. Uniform proposals
    /// almost never land there for n >= 5, so the ratio is drawn directly:
    /// `lambda_1..lambda_{n-1}` uniform on `[0, hi]`, target ratio `r`
    /// uniform on `(-(n-2)/n, -c)`, and `lambda_n = r S / (1 - r)` with `S`
    /// the sum of the others. Proposals outside Gamma_2 are rejected.
    pub fn sample_violating(&mut self, rng: &mut CounterRng, c: f64) -> Spectrum {
        let nf = self.n as f64;
        let floor = -(nf - 2.0) / nf;
        loop {
            self.proposals += 1;
            let mut vals: Vec<f64> = (0..self.n - 1).map(|_| rng.uniform(0.0, self.hi)).collect();
            let sum: f64 = vals.iter().sum();
            let r = rng.uniform(floor, -c);
            vals.push(r * sum / (1.0 - r));
            let s = Spectrum::new(vals).expect("n >= 2");
            let cert = in_gamma2(&s);
            if !cert.in_gamma2 || s.min() / cert.sigma1 >= -c {
                continue;
            }
            self.accepted += 1;
            return s;
        }
    }
}

/// Totals of a sampled run of the minimum-eigenvalue bound and the four
/// bounds on `sigma_1 - lambda_i`.
#[derive(Debug, Clone)]
pub struct LemmaSummary {
    pub n: usize,
    pub samples: usize,
    /// Samples whose gap [`sharp_min_eig_gap`] is below `-slack sigma_1`.
    pub gap_violations: usize,
    /// Per bound of [`fii_bounds_margins`], samples with margin below
    /// `-slack sigma_1`.
    pub bound_violations: [usize; 4],
    /// Smallest gap relative to `sigma_1`.
    pub min_gap: f64,
    /// Smallest margins relative to `sigma_1`.
    pub min_margins: [f64; 4],
    pub acceptance_rate: f64,
    pub report: ExperimentReport,
}

impl LemmaSummary {
    pub fn violations(&self) -> usize {
        self.gap_violations + self.bound_violations.iter().sum::<usize>()
    }
}

/// Checks both cone lemmas on `samples` spectra drawn from
/// [`Gamma2Sampler`] with the given seed, at [`INEQUALITY_SLACK`]. The
/// report holds one row per sample with the relative gap and margins.
pub fn lemma_scan(n: usize, samples: usize, seed: u64) -> Result<LemmaSummary> {
    if n < 3 {
        return Err(Error::UnsupportedDimension(n));
    }
    let mut rng = CounterRng::new(seed).split(1);
    let mut sampler = Gamma2Sampler::new(n);
    let mut report = ExperimentReport::new(["sample", "ratio", "gap", "m0", "m1", "m2", "m3"]);
    let mut gap_violations = 0;
    let mut bound_violations = [0; 4];
    let mut min_gap = f64::INFINITY;
    let mut min_margins = [f64::INFINITY; 4];
    for k in 0..samples {
        let lambda = sampler.sample(&mut rng);
        let s1 = lambda.sigma1();
        let gap = sharp_min_eig_gap(&lambda)? / s1;
        let margins = fii_bounds_margins(&lambda)?.map(|m| m / s1);
        if gap < -INEQUALITY_SLACK {
            gap_violations += 1;
        }
        min_gap = min_gap.min(gap);
        for j in 0..4 {
            if margins[j] < -INEQUALITY_SLACK {
                bound_violations[j] += 1;
            }
            min_margins[j] = min_margins[j].min(margins[j]);
        }
        let mut row: Vec<Cell> = vec![k.into(), (lambda.min() / s1).into(), gap.into()];
        row.extend(margins.iter().map(|&m| Cell::from(m)));
        report.push(row);
    }
    report.set("n", n);
    report.set("samples", samples);
    report.set("seed", seed);
    report.set("min_gap", min_gap);
    for j in 0..4 {
        report.set(&format!("min_margin{j}"), min_margins[j]);
    }
    report.set("gap_violations", gap_violations);
    report.set("bound_violations", bound_violations.iter().sum::<usize>());
    report.set("acceptance_rate", sampler.acceptance_rate());
    Ok(LemmaSummary {
        n,
        samples,
        gap_violations,
        bound_violations,
        min_gap,
        min_margins,
        acceptance_rate: sampler.acceptance_rate(),
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_sigma(vals: &[f64], k: usize) -> f64 {
        let n = vals.len();
        let mut total = 0.0;
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize == k {
                total += (0..n).filter(|i| mask & (1 << i) != 0).map(|i| vals[i]).product::<f64>();
            }
        }
        total
    }

    fn spec(v: &[f64]) -> Spectrum {
        Spectrum::new(v.to_vec()).unwrap()
    }

    #[test]
    fn spectrum_sorts_descending() {
        let s = spec(&[0.0, 2.0, -1.0, 1.0]);
        assert_eq!(s.values(), &[2.0, 1.0, 0.0, -1.0]);
        assert!(Spectrum::new(vec![1.0]).is_err());
        assert!(Spectrum::new(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn sigma_k_examples() {
        assert_eq!(sigma_k(&spec(&[1.0; 4]), 2).unwrap(), 6.0);
        // brute force over the six pairs of (2, 1, 0, -1)
        assert_eq!(brute_sigma(&[2.0, 1.0, 0.0, -1.0], 2), -1.0);
        assert_eq!(sigma_k(&spec(&[2.0, 1.0, 0.0, -1.0]), 2).unwrap(), -1.0);
        assert!(matches!(sigma_k(&spec(&[1.0, 2.0]), 3), Err(Error::Parameter(_))));
        assert!(matches!(sigma_k(&spec(&[1.0, 2.0]), 0), Err(Error::Parameter(_))));
    }

    #[test]
    fn sigma_k_matches_subset_enumeration() {
        let mut rng = CounterRng::new(9);
        for n in 2..=8 {
            for _ in 0..20 {
                let v: Vec<f64> = (0..n).map(|_| rng.uniform(-3.0, 3.0)).collect();
                let s = spec(&v);
                for k in 1..=n {
                    let want = brute_sigma(s.values(), k);
                    let got = sigma_k(&s, k).unwrap();
                    assert!((got - want).abs() <= 1e-12 * (1.0 + want.abs()) * 10.0, "n={n} k={k}");
                }
            }
        }
    }

    #[test]
    fn cone_membership_examples() {
        assert!(in_gamma2(&spec(&[1.0; 4])).in_gamma2);
        assert!(!in_gamma2(&spec(&[1.0, -1.0])).in_gamma2);
        let c = in_gamma2(&spec(&[3.0, 1.0, 1.0, -1.0]));
        assert_eq!((c.sigma1, c.sigma2), (4.0, 2.0));
        assert!(c.in_gamma2);
        // boundary sigma_2 = 0 is outside
        assert!(!in_gamma2(&spec(&[1.0, 0.0, 0.0])).in_gamma2);
    }

    #[test]
    fn sharp_gap_examples() {
        assert_eq!(sharp_min_eig_gap(&spec(&[1.0; 4])).unwrap(), 2.0);
        assert_eq!(sharp_min_eig_gap(&spec(&[1.0, 1.0, 0.0])).unwrap(), 2.0);
        assert!(matches!(sharp_min_eig_gap(&spec(&[1.0, 1.0])), Err(Error::Domain(_))));
        assert!(matches!(sharp_min_eig_gap(&spec(&[1.0, -1.0, -1.0])), Err(Error::Domain(_))));
    }

    #[test]
    fn fii_examples() {
        let m = fii_bounds_margins(&spec(&[1.0; 4])).unwrap();
        // sigma_1 - lambda_1 = 3, sigma_2/sigma_1 = 1.5, (n-1)/n sigma_1 = 3
        assert_eq!(m[0], 1.5);
        assert_eq!(m[1], 0.0);
        assert!(fii_bounds_check(&spec(&[1.0; 4])).unwrap());
        // (2, 1, 1, -0.5): s1 = 3.5, s2 = 2 + 2 - 1 + 1 - 0.5 - 0.5 = 3
        let s = spec(&[2.0, 1.0, 1.0, -0.5]);
        assert_eq!(s.sigma2(), 3.0);
        let m = fii_bounds_margins(&s).unwrap();
        assert!((m[0] - (1.5 - 3.0 / 3.5)).abs() < 1e-15);
        assert!((m[1] - (0.75 * 3.5 - 1.5)).abs() < 1e-15);
        assert!((m[2] - (2.5 - (1.0 - 0.5f64.sqrt()) * 3.5)).abs() < 1e-15);
        assert!((m[3] - (1.5 * 3.5 - 4.0)).abs() < 1e-15);
        assert!(fii_bounds_check(&s).unwrap());
        assert!(fii_bounds_check(&spec(&[1.0, -2.0, 0.0])).is_err());
    }

    #[test]
    fn linearized_examples() {
        let lc = linearized_coeffs(&SymMatrix::identity(4)).unwrap();
        assert_eq!(lc.f, SymMatrix::from_diagonal(&[3.0; 4]));
        let lc = linearized_coeffs(&SymMatrix::from_diagonal(&[2.0, 1.0, 0.0, -1.0])).unwrap();
        assert_eq!(lc.f, SymMatrix::from_diagonal(&[0.0, 1.0, 2.0, 3.0]));
        assert_eq!(lc.trace_identity_residual, 0.0);
        let mut bad = SymMatrix::identity(3);
        bad.set(0, 1, 0.5);
        assert!(matches!(linearized_coeffs(&bad), Err(Error::Parameter(_))));
    }

    #[test]
    fn linearized_spectrum_is_shifted() {
        let mut rng = CounterRng::new(21);
        for n in 2..=6 {
            let mut h = SymMatrix::zeros(n);
            for i in 0..n {
                for j in i..n {
                    h.set_sym(i, j, rng.uniform(-1.0, 1.0));
                }
            }
            let lc = linearized_coeffs(&h).unwrap();
            let t = h.trace();
            let mut want: Vec<f64> = h.eigenvalues().iter().map(|l| t - l).collect();
            want.sort_by(|a, b| b.total_cmp(a));
            for (a, b) in lc.f.eigenvalues().iter().zip(&want) {
                assert!((a - b).abs() < 1e-10);
            }
            assert!(lc.trace_identity_residual <= IDENTITY_TOL * (1.0 + t.abs()) * n as f64);
        }
    }

    #[test]
    fn dynamic_constant() {
        assert_eq!(dynamic_cn(4).unwrap(), 0.5);
        assert!((dynamic_cn(2).unwrap() - (13f64.sqrt() - 1.0) / 4.0).abs() < 1e-15);
        let limit = (3f64.sqrt() - 1.0) / 2.0;
        let mut prev = f64::INFINITY;
        for n in 2..=64 {
            let c = dynamic_cn(n).unwrap();
            assert!(c < prev && c > limit);
            prev = c;
        }
        assert!(dynamic_cn(1).is_err());
        // C(n) increases toward (sqrt 3 - 1)/3
        let climit = (3f64.sqrt() - 1.0) / 3.0;
        let mut prev = f64::NEG_INFINITY;
        for n in 2..=64 {
            let c = jacobi_prefactor(n).unwrap();
            assert!(c > prev && c < climit);
            prev = c;
        }
    }

    #[test]
    fn epsilon_examples() {
        assert_eq!(epsilon_jacobi(4, -0.5).unwrap(), 0.0);
        assert!((epsilon_jacobi(4, 0.25).unwrap() - 1.0 / 6.0).abs() < 1e-16);
        let c5 = dynamic_cn(5).unwrap();
        assert_eq!(epsilon_jacobi(5, -c5).unwrap(), 0.0);
        assert!(matches!(epsilon_jacobi(5, -c5 - 1e-9), Err(Error::Domain(_))));
        assert!(matches!(epsilon_jacobi(3, 0.1), Err(Error::UnsupportedDimension(3))));
        // the two printed forms agree
        for n in 5..=12 {
            let (ym, yp) = roots_yn(n).unwrap();
            let nf = n as f64;
            for k in 0..20 {
                let ratio = -dynamic_cn(n).unwrap() + 0.05 * k as f64;
                let via_roots = -(2.0 * nf * ym) / (3.0 * (nf - 1.0)) * (yp - (1.0 - ratio));
                assert!((epsilon_jacobi(n, ratio).unwrap() - via_roots).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn root_examples() {
        assert_eq!(roots_yn(4).unwrap(), (-0.25, 1.5));
        assert_eq!(roots_ytilde(4).unwrap(), (-1.0, 1.5));
        let n = 5;
        let (ym, yp) = roots_yn(n).unwrap();
        assert!(ym < 0.0 && yp > 0.0);
        for k in 0..100 {
            let y = -2.0 + 4.0 * k as f64 / 99.0;
            let nf = n as f64;
            let factored = 2.0 * nf * (y - ym) * (yp - y);
            assert!((factored - q1(n, y)).abs() < 1e-12);
        }
        for n in 5..=40 {
            assert!(roots_ytilde(n).unwrap().1 > roots_yn(n).unwrap().1);
        }
    }

    #[test]
    fn q_examples() {
        let q = q_polynomials(4, 0.0, 0.0, 1.5).unwrap();
        assert_eq!(q.q_delta, 0.0);
        assert_eq!(q.q_delta_theta, 0.0);
        // y = 0 lies outside the admissible interval; evaluate q_1(0) directly
        assert_eq!(q1(4, 0.0), 3.0);
        assert!(matches!(q_polynomials(4, 0.0, 0.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(q_polynomials(4, 0.0, 0.0, 1.6), Err(Error::Domain(_))));
        assert!(matches!(q_polynomials(4, 0.0, 0.3, 1.0), Err(Error::Parameter(_))));
        // n = 4 decompositions into q_1 + eps r and R_1 + eps r~
        for k in 1..=50 {
            let y = 1.5 * k as f64 / 50.0;
            let eps = 0.3;
            let q = q_polynomials(4, eps, 0.1, y).unwrap();
            assert!((q.q_delta - (q1(4, y) + eps * r_eps(4, y))).abs() < 1e-12);
            assert!((q.r_delta - (big_r1(4, y) + eps * r_tilde(4, y))).abs() < 1e-12);
            assert!((q1(4, y) - 8.0 * (y + 0.25) * (1.5 - y)).abs() < 1e-12);
            assert!((big_r1(4, y) - 8.0 * (y + 1.0) * (1.5 - y)).abs() < 1e-12);
            assert!((r_eps(4, y) - (8.0 * y * (1.5 - y) - 9.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn trace_condition_examples() {
        assert!(trace_condition(4, 1.403, 0.01));
        assert!(!trace_condition(4, 0.5, 1.0));
        let delta = 1.0 + (3f64.sqrt() - 1.0) / 3.0 * ((13f64.sqrt() - 1.0) / 4.0 + 1.0);
        assert!((delta - 1.403).abs() < 1e-3);
        for n in 2..=64 {
            assert!(trace_condition(n, delta, 0.01), "n = {n}");
        }
        // the global cap dominates every attainable delta
        for n in 4..=64 {
            let eps_max = epsilon_jacobi_unchecked(n, 1.0);
            assert!(1.0 + eps_max <= delta + 1e-12);
        }
    }

    #[test]
    fn lemma_scan_is_clean_and_deterministic() {
        for n in 3..=8 {
            let a = lemma_scan(n, 2000, 7).unwrap();
            assert_eq!(a.violations(), 0, "n={n}");
            assert!(a.min_gap > 0.0);
            assert_eq!(a.report.to_csv(), lemma_scan(n, 2000, 7).unwrap().report.to_csv());
        }
        assert!(matches!(lemma_scan(2, 10, 0), Err(Error::UnsupportedDimension(2))));
    }

    #[test]
    fn cone_homogeneity() {
        let mut rng = CounterRng::new(4);
        for n in 2..=8 {
            let mut sampler = Gamma2Sampler::new(n);
            for _ in 0..200 {
                let s = sampler.sample(&mut rng);
                for t in [1e-6, 1.0, 1e6] {
                    assert!(in_gamma2(&s.scaled(t)).in_gamma2);
                }
            }
        }
    }

    #[test]
    fn polynomial_nonnegativity_scans() {
        for n in 4..=10 {
            let scan = poly_scan(n, 4096, 0.01).unwrap();
            assert!(scan.min_value >= -INEQUALITY_SLACK, "n={n}: {}", scan.min_value);
            for theta in [1e-4, 1e-3, 0.01] {
                assert!(poly_scan(n, 512, theta).unwrap().min_value >= -INEQUALITY_SLACK);
            }
        }
    }

    #[test]
    fn remainder_bounds() {
        for n in 4..=12 {
            let yp = if n == 4 { 1.5 } else { roots_yn(n).unwrap().1 };
            let nf = n as f64;
            for k in 1..4096 {
                let y = yp * k as f64 / 4096.0;
                assert!(r_eps(n, y) >= -3.0 * (nf - 1.0) - INEQUALITY_SLACK);
                assert!(big_r1(n, y) >= -INEQUALITY_SLACK);
                assert!(r_tilde(n, y) >= -INEQUALITY_SLACK);
            }
        }
    }

    proptest! {
        #[test]
        fn newton_identity(vals in proptest::collection::vec(-10.0f64..10.0, 2..9)) {
            let s = Spectrum::new(vals).unwrap();
            let s1 = s.sigma1();
            let resid = s1 * s1 - s.norm_sq() - 2.0 * s.sigma2();
            prop_assert!(resid.abs() <= IDENTITY_TOL * (1.0 + s1 * s1));
        }

        #[test]
        fn lemma_bounds_on_cone(seed in any::<u64>(), n in 3usize..9) {
            let mut rng = CounterRng::new(seed);
            let mut sampler = Gamma2Sampler::new(n);
            for _ in 0..50 {
                let s = sampler.sample(&mut rng);
                prop_assert!(sharp_min_eig_gap(&s).unwrap() > 0.0);
                prop_assert!(fii_bounds_check(&s).unwrap());
                let h = SymMatrix::from_diagonal(s.values());
                prop_assert!(linearized_coeffs(&h).unwrap().f.min_eigenvalue() > 0.0);
            }
        }
    }
}
