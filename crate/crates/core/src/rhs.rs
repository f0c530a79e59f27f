//! Right-hand sides `f(x, z, p)` and manufactured exact solutions.

use std::fmt;
use std::sync::Arc;

use crate::cone::sigma_k;
use crate::cone::Spectrum;
use crate::error::{Error, Result};
use crate::linalg::{dot, SymMatrix};

/// Step for central differences in `z` and `p` when no closed form exists.
pub const PARTIAL_STEP: f64 = 1e-5;

/// One-dimensional profile `g` of the ridge term `amp * g(d . x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    Zero,
    Exp,
    Quartic,
    Cubic,
    Sin,
}

impl Profile {
    /// `[g, g', g'', g''', g'''']` at `s`.
    pub fn derivatives(self, s: f64) -> [f64; 5] {
        match self {
            Profile::Zero => [0.0; 5],
            Profile::Exp => [s.exp(); 5],
            Profile::Quartic => [s.powi(4), 4.0 * s.powi(3), 12.0 * s * s, 24.0 * s, 24.0],
            Profile::Cubic => [s.powi(3), 3.0 * s * s, 6.0 * s, 6.0, 0.0],
            Profile::Sin => {
                let (sn, cs) = s.sin_cos();
                [sn, cs, -sn, -cs, sn]
            }
        }
    }
}

/// `u*(x) = x^T A x / 2 + b . x + c + amp * g(d . x)`, with all derivatives
/// through fourth order in closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct Manufactured {
    pub a: SymMatrix,
    pub b: Vec<f64>,
    pub c: f64,
    pub amp: f64,
    pub direction: Vec<f64>,
    pub profile: Profile,
}

impl Manufactured {
    /// `|x|^2 / 2 + amp * g(x_1)` in dimension n.
    pub fn ridge(n: usize, amp: f64, profile: Profile) -> Self {
        let mut direction = vec![0.0; n];
        direction[0] = 1.0;
        Manufactured {
            a: SymMatrix::identity(n),
            b: vec![0.0; n],
            c: 0.0,
            amp,
            direction,
            profile,
        }
    }

    pub fn n(&self) -> usize {
        self.a.dim()
    }

    /// The quadratic-plus-affine part, dropping the ridge term.
    pub fn quadratic_part(&self) -> Manufactured {
        Manufactured {
            amp: 0.0,
            profile: Profile::Zero,
            ..self.clone()
        }
    }

    /// Adds the affine function `slope . x + offset`.
    pub fn shifted(&self, slope: &[f64], offset: f64) -> Manufactured {
        let mut s = self.clone();
        for (bi, si) in s.b.iter_mut().zip(slope) {
            *bi += si;
        }
        s.c += offset;
        s
    }

    fn ridge_derivs(&self, x: &[f64]) -> [f64; 5] {
        if self.amp == 0.0 {
            return [0.0; 5];
        }
        let g = self.profile.derivatives(dot(&self.direction, x));
        g.map(|v| self.amp * v)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        0.5 * self.a.quad_form(x) + dot(&self.b, x) + self.c + self.ridge_derivs(x)[0]
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let g1 = self.ridge_derivs(x)[1];
        self.a
            .mat_vec(x)
            .iter()
            .zip(&self.b)
            .zip(&self.direction)
            .map(|((ax, b), d)| ax + b + g1 * d)
            .collect()
    }

    pub fn hessian(&self, x: &[f64]) -> SymMatrix {
        let g2 = self.ridge_derivs(x)[2];
        let n = self.n();
        let mut h = self.a.clone();
        for i in 0..n {
            for j in 0..n {
                h.set(i, j, self.a.get(i, j) + g2 * self.direction[i] * self.direction[j]);
            }
        }
        h
    }

    pub fn laplacian(&self, x: &[f64]) -> f64 {
        self.a.trace() + self.ridge_derivs(x)[2] * dot(&self.direction, &self.direction)
    }

    pub fn sigma2(&self, x: &[f64]) -> f64 {
        self.hessian(x).sigma2()
    }

    /// Gradient of `sigma_2(D^2 u*)`: `sum_ij F_ij u_ijk` with the third
    /// derivatives of the ridge term.
    pub fn sigma2_gradient(&self, x: &[f64]) -> Vec<f64> {
        let g3 = self.ridge_derivs(x)[3];
        let h = self.hessian(x);
        let t = h.trace();
        // F contracted with d d^T: tr(H)|d|^2 - d^T H d.
        let dd = dot(&self.direction, &self.direction);
        let fdd = t * dd - h.quad_form(&self.direction);
        self.direction.iter().map(|dk| g3 * dk * fdd).collect()
    }

    /// `(b_k, b_kl)` for `b = log(Delta u*)`.
    pub fn log_laplacian_derivatives(&self, x: &[f64]) -> (Vec<f64>, SymMatrix) {
        let g = self.ridge_derivs(x);
        let dd = dot(&self.direction, &self.direction);
        let lap = self.laplacian(x);
        let n = self.n();
        let grad: Vec<f64> = self.direction.iter().map(|d| g[3] * dd * d / lap).collect();
        let mut hess = SymMatrix::zeros(n);
        for k in 0..n {
            for l in 0..n {
                let v = g[4] * dd * self.direction[k] * self.direction[l] / lap - grad[k] * grad[l];
                hess.set(k, l, v);
            }
        }
        (grad, hess)
    }
}

/// Weight `w(z, p) = 1 + kz sin z + kp sum_i sin p_i` coupling a
/// manufactured right-hand side to the unknown.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Coupling {
    pub kz: f64,
    pub kp: f64,
}

impl Coupling {
    pub fn none() -> Self {
        Coupling::default()
    }

    pub fn is_none(&self) -> bool {
        self.kz == 0.0 && self.kp == 0.0
    }

    fn weight(&self, z: f64, p: &[f64]) -> f64 {
        1.0 + self.kz * z.sin() + self.kp * p.iter().map(|v| v.sin()).sum::<f64>()
    }
}

/// x-dependent factor of a separable right-hand side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum XPart {
    Constant(f64),
    /// `c0 + c2 |x|^2`.
    Radial { c0: f64, c2: f64 },
}

impl XPart {
    fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            XPart::Constant(c) => c,
            XPart::Radial { c0, c2 } => c0 + c2 * dot(x, x),
        }
    }
}

pub type RhsFn = dyn Fn(&[f64], f64, &[f64]) -> f64 + Send + Sync;

/// Right-hand side `f(x, z, p)` of `sigma_2(D^2 u) = f`.
#[derive(Clone)]
pub enum RhsSpec {
    Constant(f64),
    /// `g(x) exp(z_coef z + p_coefs . p)`.
    Separable {
        x_part: XPart,
        z_coef: f64,
        p_coefs: Vec<f64>,
    },
    /// `sigma_2(D^2 u*(x)) w(u*(x), Du*(x)) / w(z, p)`, so that `u*` solves
    /// the equation exactly.
    Manufactured {
        solution: Manufactured,
        coupling: Coupling,
    },
    /// Arbitrary closure; partials by central differences.
    Custom(Arc<RhsFn>),
}

impl fmt::Debug for RhsSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RhsSpec::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            RhsSpec::Separable {
                x_part,
                z_coef,
                p_coefs,
            } => f
                .debug_struct("Separable")
                .field("x_part", x_part)
                .field("z_coef", z_coef)
                .field("p_coefs", p_coefs)
                .finish(),
            RhsSpec::Manufactured { solution, coupling } => f
                .debug_struct("Manufactured")
                .field("solution", solution)
                .field("coupling", coupling)
                .finish(),
            RhsSpec::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl RhsSpec {
    pub fn manufactured(solution: Manufactured, coupling: Coupling) -> Self {
        RhsSpec::Manufactured { solution, coupling }
    }

    pub fn custom(f: impl Fn(&[f64], f64, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        RhsSpec::Custom(Arc::new(f))
    }

    pub fn eval(&self, x: &[f64], z: f64, p: &[f64]) -> f64 {
        match self {
            RhsSpec::Constant(c) => *c,
            RhsSpec::Separable {
                x_part,
                z_coef,
                p_coefs,
            } => x_part.eval(x) * (z_coef * z + dot(p_coefs, p)).exp(),
            RhsSpec::Manufactured { solution, coupling } => {
                let base = solution.sigma2(x);
                if coupling.is_none() {
                    return base;
                }
                let star = coupling.weight(solution.value(x), &solution.gradient(x));
                base * star / coupling.weight(z, p)
            }
            RhsSpec::Custom(f) => f(x, z, p),
        }
    }

    /// True when `f_z` and `f_p` come from closed forms.
    pub fn has_analytic_partials(&self) -> bool {
        !matches!(self, RhsSpec::Custom(_))
    }

    /// True when `f` does not depend on `(z, p)`.
    pub fn is_x_only(&self) -> bool {
        match self {
            RhsSpec::Constant(_) => true,
            RhsSpec::Separable { z_coef, p_coefs, .. } => {
                *z_coef == 0.0 && p_coefs.iter().all(|c| *c == 0.0)
            }
            RhsSpec::Manufactured { coupling, .. } => coupling.is_none(),
            RhsSpec::Custom(_) => false,
        }
    }

    pub fn d_z(&self, x: &[f64], z: f64, p: &[f64]) -> f64 {
        match self {
            RhsSpec::Constant(_) => 0.0,
            RhsSpec::Separable { z_coef, .. } => z_coef * self.eval(x, z, p),
            RhsSpec::Manufactured { coupling, .. } => {
                if coupling.kz == 0.0 {
                    return 0.0;
                }
                -self.eval(x, z, p) * coupling.kz * z.cos() / coupling.weight(z, p)
            }
            RhsSpec::Custom(f) => {
                (f(x, z + PARTIAL_STEP, p) - f(x, z - PARTIAL_STEP, p)) / (2.0 * PARTIAL_STEP)
            }
        }
    }

    pub fn d_p(&self, x: &[f64], z: f64, p: &[f64]) -> Vec<f64> {
        match self {
            RhsSpec::Constant(_) => vec![0.0; p.len()],
            RhsSpec::Separable { p_coefs, .. } => {
                let v = self.eval(x, z, p);
                p_coefs.iter().map(|c| c * v).collect()
            }
            RhsSpec::Manufactured { coupling, .. } => {
                if coupling.kp == 0.0 {
                    return vec![0.0; p.len()];
                }
                let v = self.eval(x, z, p);
                let w = coupling.weight(z, p);
                p.iter().map(|pi| -v * coupling.kp * pi.cos() / w).collect()
            }
            RhsSpec::Custom(f) => {
                let mut q = p.to_vec();
                (0..p.len())
                    .map(|i| {
                        q[i] = p[i] + PARTIAL_STEP;
                        let hi = f(x, z, &q);
                        q[i] = p[i] - PARTIAL_STEP;
                        let lo = f(x, z, &q);
                        q[i] = p[i];
                        (hi - lo) / (2.0 * PARTIAL_STEP)
                    })
                    .collect()
            }
        }
    }
}

/// A named manufactured test problem.
#[derive(Debug, Clone)]
pub struct Case {
    pub name: String,
    pub solution: Manufactured,
    pub rhs: RhsSpec,
}

pub const CASE_NAMES: &[&str] = &["quadratic", "exp", "quartic", "cubic", "sin", "coupled"];

/// Builds the test problem `name` in dimension n:
///
/// - `quadratic`: `|x|^2/2`, constant right-hand side.
/// - `exp`: `|x|^2/2 + 0.05 e^{x_1}`.
/// - `quartic`: `|x|^2/2 + 0.01 x_1^4`.
/// - `cubic`: `|x|^2/2 + 0.05 x_1^3`.
/// - `sin`: `|x|^2/2 + 0.01 sin x_1`.
/// - `coupled`: the `exp` solution with a right-hand side depending on `u`
///   and `Du`.
pub fn case(name: &str, n: usize) -> Result<Case> {
    if n < 2 {
        return Err(Error::UnsupportedDimension(n));
    }
    let (solution, coupling) = match name {
        "quadratic" => (Manufactured::ridge(n, 0.0, Profile::Zero), Coupling::none()),
        "exp" => (Manufactured::ridge(n, 0.05, Profile::Exp), Coupling::none()),
        "quartic" => (Manufactured::ridge(n, 0.01, Profile::Quartic), Coupling::none()),
        "cubic" => (Manufactured::ridge(n, 0.05, Profile::Cubic), Coupling::none()),
        "sin" => (Manufactured::ridge(n, 0.01, Profile::Sin), Coupling::none()),
        "coupled" => (
            Manufactured::ridge(n, 0.05, Profile::Exp),
            Coupling { kz: 0.1, kp: 0.05 },
        ),
        _ => {
            return Err(Error::Configuration(format!(
                "unknown case {name:?}; expected one of {CASE_NAMES:?}"
            )))
        }
    };
    let rhs = if name == "quadratic" {
        let ev = Spectrum::new(vec![1.0; n])?;
        RhsSpec::Constant(sigma_k(&ev, 2)?)
    } else {
        RhsSpec::manufactured(solution.clone(), coupling)
    };
    Ok(Case {
        name: name.to_string(),
        solution,
        rhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd<F: Fn(f64) -> f64>(f: F, t: f64) -> f64 {
        let e = 1e-5;
        (f(t + e) - f(t - e)) / (2.0 * e)
    }

    fn solutions() -> Vec<Manufactured> {
        let mut v: Vec<Manufactured> = [Profile::Exp, Profile::Quartic, Profile::Cubic, Profile::Sin]
            .iter()
            .map(|&p| Manufactured::ridge(3, 0.07, p))
            .collect();
        let mut skew = Manufactured::ridge(3, 0.05, Profile::Sin);
        skew.direction = vec![0.6, -0.3, 0.5];
        skew.a.set_sym(0, 2, 0.2);
        v.push(skew.shifted(&[0.1, 0.2, -0.3], 0.4));
        v
    }

    #[test]
    fn profile_derivatives_are_consistent() {
        for p in [Profile::Exp, Profile::Quartic, Profile::Cubic, Profile::Sin] {
            for s in [-0.7, 0.2, 1.3] {
                let d = p.derivatives(s);
                for k in 0..4 {
                    let num = fd(|t| p.derivatives(t)[k], s);
                    assert!((num - d[k + 1]).abs() < 1e-7, "{p:?} k={k}");
                }
            }
        }
    }

    #[test]
    fn manufactured_derivatives_match_differences() {
        let x = [0.3, -0.4, 0.2];
        for u in solutions() {
            let g = u.gradient(&x);
            let h = u.hessian(&x);
            let sg = u.sigma2_gradient(&x);
            let (bg, bh) = u.log_laplacian_derivatives(&x);
            for k in 0..3 {
                let shift = |t: f64| {
                    let mut y = x;
                    y[k] = t;
                    y
                };
                assert!((fd(|t| u.value(&shift(t)), x[k]) - g[k]).abs() < 1e-8);
                assert!((fd(|t| u.sigma2(&shift(t)), x[k]) - sg[k]).abs() < 1e-7);
                assert!((fd(|t| u.laplacian(&shift(t)).ln(), x[k]) - bg[k]).abs() < 1e-8);
                for l in 0..3 {
                    assert!((fd(|t| u.gradient(&shift(t))[l], x[k]) - h.get(k, l)).abs() < 1e-7);
                    assert!((fd(|t| u.log_laplacian_derivatives(&shift(t)).0[l], x[k]) - bh.get(k, l)).abs() < 1e-7);
                }
            }
            assert!((h.trace() - u.laplacian(&x)).abs() < 1e-14);
        }
    }

    #[test]
    fn manufactured_rhs_is_exact_at_solution() {
        let u = Manufactured::ridge(4, 0.05, Profile::Exp);
        let rhs = RhsSpec::manufactured(u.clone(), Coupling { kz: 0.1, kp: 0.05 });
        let x = [0.1, 0.2, -0.3, 0.4];
        let f = rhs.eval(&x, u.value(&x), &u.gradient(&x));
        assert!((f - u.sigma2(&x)).abs() < 1e-14);
    }

    #[test]
    fn analytic_partials_match_numeric() {
        let u = Manufactured::ridge(2, 0.05, Profile::Exp);
        let specs = vec![
            RhsSpec::manufactured(u, Coupling { kz: 0.1, kp: 0.05 }),
            RhsSpec::Separable {
                x_part: XPart::Radial { c0: 1.0, c2: 0.5 },
                z_coef: 0.3,
                p_coefs: vec![0.1, -0.2],
            },
        ];
        let (x, z, p) = ([0.2, 0.1], 0.4, [0.3, -0.5]);
        for s in specs {
            let f = s.clone();
            let numeric = RhsSpec::custom(move |x, z, p| f.eval(x, z, p));
            assert!(s.has_analytic_partials() && !numeric.has_analytic_partials());
            assert!((s.d_z(&x, z, &p) - numeric.d_z(&x, z, &p)).abs() < 1e-8);
            for (a, b) in s.d_p(&x, z, &p).iter().zip(numeric.d_p(&x, z, &p)) {
                assert!((a - b).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn named_cases() {
        for name in CASE_NAMES {
            let c = case(name, 4).unwrap();
            assert_eq!(c.solution.n(), 4);
        }
        assert!(matches!(case("quadratic", 4).unwrap().rhs, RhsSpec::Constant(c) if c == 6.0));
        assert!(case("nope", 4).is_err());
        assert!(case("exp", 1).is_err());
    }
}
