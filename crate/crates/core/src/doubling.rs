//! The auxiliary test function P and the measured doubling ratio
//! `sup_{B_2} Delta u / sup_{B_1} Delta u`.
//!
//! The grid is expected to model the ball of radius 3 (a centered cube of
//! half-side at least 3), so that `rho = 9 - |x|^2` is positive inside.

use crate::cone::{dynamic_cn, matrix_certificate};
use crate::error::{Error, Result};
use crate::grid::{dist, GridFunction};
use crate::report::ExperimentReport;

/// Relative slack for the parameter constraints; two of them hold with
/// equality for the default choice.
pub const CONSTRAINT_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DoublingConfig {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub r_inner: f64,
    pub r_outer: f64,
    pub constant_c: f64,
}

/// One named inequality between the parameters: holds iff `lhs <= rhs`
/// up to [`CONSTRAINT_SLACK`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintCheck {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

fn check(name: &'static str, lhs: f64, rhs: f64) -> ConstraintCheck {
    ConstraintCheck {
        name,
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + CONSTRAINT_SLACK) + f64::MIN_POSITIVE,
    }
}

impl DoublingConfig {
    /// The final parameter choice for dimension n, C¹ scale `cap` (the
    /// quantity Gamma) and constant `c`:
    /// `gamma = 10 n c Gamma^2 / c_n`, `alpha = 1 / (60 n c Gamma gamma)`,
    /// `beta = 1 / (120 n^2 c Gamma^2 gamma)`, with radii 1 and 2. Fails if
    /// any of the six constraints from [`Self::constraints`] does not hold.
    pub fn defaults(n: usize, cap: f64, c: f64) -> Result<Self> {
        if !(cap >= 1.0 && c > 0.0) {
            return Err(Error::Configuration(format!(
                "need Gamma >= 1 and C > 0, got Gamma = {cap}, C = {c}"
            )));
        }
        let nf = n as f64;
        let cn = dynamic_cn(n)?;
        let gamma = 10.0 * nf * c / cn * cap * cap;
        let alpha = 1.0 / (60.0 * nf * c * cap * gamma);
        let beta = 1.0 / (120.0 * nf * nf * c * cap * cap * gamma);
        let cfg = DoublingConfig {
            alpha,
            beta,
            gamma,
            r_inner: 1.0,
            r_outer: 2.0,
            constant_c: c,
        };
        if let Some(bad) = cfg.constraints(n, cap)?.into_iter().find(|k| !k.holds) {
            return Err(Error::Configuration(format!(
                "default parameters violate {}: {} > {}",
                bad.name, bad.lhs, bad.rhs
            )));
        }
        Ok(cfg)
    }

    /// Explicit parameters; only positivity and the radius order are
    /// enforced.
    pub fn custom(alpha: f64, beta: f64, gamma: f64, r_inner: f64, r_outer: f64, c: f64) -> Result<Self> {
        if [alpha, beta, gamma, r_inner, c].iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Configuration("all doubling parameters must be positive".into()));
        }
        if !(r_inner < r_outer) {
            return Err(Error::Configuration(format!(
                "inner radius {r_inner} must be below outer radius {r_outer}"
            )));
        }
        Ok(DoublingConfig {
            alpha,
            beta,
            gamma,
            r_inner,
            r_outer,
            constant_c: c,
        })
    }

    /// The six parameter constraints of the maximum-principle argument,
    /// in the order they arise (ten inequalities in total).
    pub fn constraints(&self, n: usize, cap: f64) -> Result<Vec<ConstraintCheck>> {
        let nf = n as f64;
        let cn = dynamic_cn(n)?;
        let (a, b, g, c) = (self.alpha, self.beta, self.gamma, self.constant_c);
        Ok(vec![
            check("1: alpha <= 1", a, 1.0),
            check("1: beta Gamma <= 1", b * cap, 1.0),
            check("1: Gamma^2 <= gamma", cap * cap, g),
            check("2: alpha^2 <= beta / (3C)", a * a, b / (3.0 * c)),
            check("2: beta <= 1 / (3C Gamma^2)", b, 1.0 / (3.0 * c * cap * cap)),
            check("3: C / (4 c_n) <= gamma", c / (4.0 * cn), g),
            check("4: beta <= alpha / (2n Gamma)", b, a / (2.0 * nf * cap)),
            check("5: 10 n C / c_n <= gamma", 10.0 * nf * c / cn, g),
            check("6: alpha^2 <= beta / (30 C gamma)", a * a, b / (30.0 * c * g)),
            check("6: beta <= 1 / (30 C Gamma^2 gamma)", b, 1.0 / (30.0 * c * cap * cap * g)),
        ])
    }

    fn validate_grid(&self, u: &GridFunction) -> Result<()> {
        if self.r_outer > u.half_side() * (1.0 + 1e-12) {
            return Err(Error::Configuration(format!(
                "outer radius {} exceeds the grid half-side {}",
                self.r_outer,
                u.half_side()
            )));
        }
        Ok(())
    }
}

/// `3 max |D_h u| + max |u| + 1` over the nodes of the radius-3 ball.
pub fn c1_scale(u: &GridFunction) -> f64 {
    let center = u.center();
    let nodes = u.ball_nodes(&center, 3.0);
    let max_u = nodes.iter().map(|&p| u.values()[p].abs()).fold(0.0, f64::max);
    let max_du = nodes
        .iter()
        .filter(|&&p| u.depth(p) >= 1)
        .map(|&p| u.gradient(p).iter().map(|g| g * g).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    3.0 * max_du + max_u + 1.0
}

fn require_admissible(u: &GridFunction) -> Result<()> {
    if let Some(p) = (0..u.len())
        .find(|&p| u.depth(p) >= 1 && !matrix_certificate(&u.hessian(p)).in_gamma2)
    {
        return Err(Error::Admissibility {
            node: u.multi_index(p),
            reason: "Hessian is not in the Gamma_2 cone".into(),
        });
    }
    Ok(())
}

fn masked_sup(u: &GridFunction, r: f64, field: impl Fn(usize) -> f64) -> Result<(f64, usize)> {
    let center = u.center();
    u.ball_nodes(&center, r)
        .into_iter()
        .filter(|&p| u.depth(p) >= 1)
        .map(|p| (field(p), p))
        .fold(None, |acc: Option<(f64, usize)>, (v, p)| match acc {
            Some((best, _)) if best >= v => acc,
            _ => Some((v, p)),
        })
        .ok_or_else(|| Error::Configuration(format!("no interior grid nodes within radius {r}")))
}

/// Node-wise test function
/// `2 log rho + alpha (x.Du - u) + beta/2 |Du|^2 + log max{b - sup_{B_1} b, gamma}`
/// with `rho = 9 - |x|^2` and `b = log Delta_h u`. NaN where it is
/// undefined (outer layer, or `rho <= 0`). Positions are relative to the
/// grid center.
pub fn auxiliary_p(u: &GridFunction, cfg: &DoublingConfig) -> Result<GridFunction> {
    require_admissible(u)?;
    let (sup_b, _) = masked_sup(u, cfg.r_inner, |p| u.laplacian(p).ln())?;
    let center = u.center();
    let mut x = vec![0.0; u.n()];
    let values = (0..u.len())
        .map(|p| {
            if u.depth(p) < 1 {
                return f64::NAN;
            }
            u.coords_into(p, &mut x);
            for (xi, ci) in x.iter_mut().zip(&center) {
                *xi -= ci;
            }
            let rho = 9.0 - x.iter().map(|v| v * v).sum::<f64>();
            if rho <= 0.0 {
                return f64::NAN;
            }
            let du = u.gradient(p);
            let xdu: f64 = x.iter().zip(&du).map(|(a, b)| a * b).sum();
            let du2: f64 = du.iter().map(|v| v * v).sum();
            let bbar = u.laplacian(p).ln() - sup_b;
            2.0 * rho.ln()
                + cfg.alpha * (xdu - u.values()[p])
                + 0.5 * cfg.beta * du2
                + bbar.max(cfg.gamma).ln()
        })
        .collect();
    u.with_values(values)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoublingReport {
    pub sup_inner: f64,
    pub sup_outer: f64,
    pub ratio: f64,
    /// The C¹ scale Gamma.
    pub cap: f64,
    /// `ln C + C Gamma^6` with the configured C.
    pub log_bound: f64,
    /// `C exp(C Gamma^6)`; infinite when it overflows.
    pub bound: f64,
    /// Smallest `C'` with `ratio <= C' exp(C' Gamma^6)`.
    pub fitted_c: f64,
    pub max_p_node: usize,
    pub max_p_location: Vec<f64>,
    pub p_max: f64,
}

impl DoublingReport {
    pub fn to_report(&self) -> ExperimentReport {
        let mut r = ExperimentReport::new(["quantity", "value"]);
        for (k, v) in [
            ("sup_inner", self.sup_inner),
            ("sup_outer", self.sup_outer),
            ("ratio", self.ratio),
            ("Gamma", self.cap),
            ("log_bound", self.log_bound),
            ("fitted_C", self.fitted_c),
            ("P_max", self.p_max),
        ] {
            r.push(vec![k.into(), v.into()]);
        }
        r.set("ratio", self.ratio);
        r.set("fitted_C", self.fitted_c);
        r.set("log_bound", self.log_bound);
        r.set("ratio_within_bound", self.ratio.ln() <= self.log_bound);
        r.set("max_P_node", self.max_p_node);
        r
    }
}

/// Root of `ln c + c g6 = target` in `c > 0` by bisection on a log scale.
fn fit_constant(target: f64, g6: f64) -> f64 {
    let phi = |c: f64| c.ln() + c * g6 - target;
    let (mut lo, mut hi) = (f64::MIN_POSITIVE, 1.0f64);
    while phi(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        let mid = if mid <= lo || mid >= hi { 0.5 * (lo + hi) } else { mid };
        if phi(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

pub fn doubling_ratio(u: &GridFunction, cfg: &DoublingConfig) -> Result<DoublingReport> {
    require_admissible(u)?;
    cfg.validate_grid(u)?;
    let (sup_inner, _) = masked_sup(u, cfg.r_inner, |p| u.laplacian(p))?;
    let (sup_outer, _) = masked_sup(u, cfg.r_outer, |p| u.laplacian(p))?;
    let ratio = sup_outer / sup_inner;
    let cap = c1_scale(u);
    let g6 = cap.powi(6);
    let c = cfg.constant_c;
    let log_bound = c.ln() + c * g6;
    let pf = auxiliary_p(u, cfg)?;
    let (p_max, max_p_node) = pf
        .values()
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_nan())
        .fold((f64::NEG_INFINITY, 0), |acc, (p, &v)| if v > acc.0 { (v, p) } else { acc });
    Ok(DoublingReport {
        sup_inner,
        sup_outer,
        ratio,
        cap,
        log_bound,
        bound: log_bound.exp(),
        fitted_c: fit_constant(ratio.ln(), g6),
        max_p_node,
        max_p_location: u.coords(max_p_node),
        p_max,
    })
}

/// Distance between the P maximizers of two grids (in physical units).
pub fn maximizer_shift(a: &DoublingReport, b: &DoublingReport) -> f64 {
    dist(&a.max_p_location, &b.max_p_location)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rhs::case;
    use crate::solver::{solve_manufactured, SolveOptions};

    fn paraboloid(n: usize, m: usize) -> GridFunction {
        GridFunction::sample_centered(n, m, 3.0, |x| 0.5 * x.iter().map(|v| v * v).sum::<f64>()).unwrap()
    }

    fn closed_form_p(cfg: &DoublingConfig, r2: f64) -> f64 {
        2.0 * (9.0 - r2).ln() + cfg.alpha * 0.5 * r2 + 0.5 * cfg.beta * r2 + cfg.gamma.ln()
    }

    #[test]
    fn defaults_satisfy_all_constraints() {
        for n in 2..=8 {
            for cap in [1.0, 3.5, 40.0] {
                for c in [1.0, 10.0, 1e3] {
                    let cfg = DoublingConfig::defaults(n, cap, c).unwrap();
                    let checks = cfg.constraints(n, cap).unwrap();
                    assert_eq!(checks.len(), 10);
                    assert!(checks.iter().all(|k| k.holds), "{checks:?}");
                }
            }
        }
    }

    #[test]
    fn constraints_detect_bad_parameters() {
        let cfg = DoublingConfig::custom(2.0, 1.0, 1.0, 1.0, 2.0, 10.0).unwrap();
        assert!(cfg.constraints(4, 2.0).unwrap().iter().any(|k| !k.holds));
        assert!(DoublingConfig::custom(1.0, 1.0, 1.0, 2.0, 1.0, 1.0).is_err());
        assert!(DoublingConfig::defaults(4, 0.5, 1.0).is_err());
    }

    #[test]
    fn paraboloid_p_matches_closed_form() {
        let u = paraboloid(3, 25);
        let cfg = DoublingConfig::defaults(3, c1_scale(&u), 10.0).unwrap();
        let pf = auxiliary_p(&u, &cfg).unwrap();
        for p in 0..u.len() {
            let x = u.coords(p);
            let r2: f64 = x.iter().map(|v| v * v).sum();
            if u.depth(p) >= 1 && r2 < 9.0 {
                assert!((pf.values()[p] - closed_form_p(&cfg, r2)).abs() < 1e-12);
            } else {
                assert!(pf.values()[p].is_nan());
            }
        }
    }

    #[test]
    fn maximizer_matches_dense_radial_oracle() {
        let u = paraboloid(2, 49);
        for cfg in [
            DoublingConfig::defaults(2, c1_scale(&u), 10.0).unwrap(),
            DoublingConfig::custom(1.0, 0.5, 2.0, 1.0, 2.0, 1.0).unwrap(),
        ] {
            let rep = doubling_ratio(&u, &cfg).unwrap();
            let r_grid = dist(&rep.max_p_location, &[0.0, 0.0]);
            let r_dense = (0..300_000)
                .map(|k| k as f64 * 3.0 / 300_000.0)
                .map(|r| (r, closed_form_p(&cfg, r * r)))
                .fold((0.0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a })
                .0;
            assert!((r_grid - r_dense).abs() <= u.h(), "{r_grid} vs {r_dense}");
        }
    }

    #[test]
    fn gamma_doubling_shifts_by_log_two() {
        let u = paraboloid(3, 13);
        let cfg = DoublingConfig::defaults(3, c1_scale(&u), 10.0).unwrap();
        let cfg2 = DoublingConfig {
            gamma: 2.0 * cfg.gamma,
            ..cfg.clone()
        };
        let (a, b) = (auxiliary_p(&u, &cfg).unwrap(), auxiliary_p(&u, &cfg2).unwrap());
        for (x, y) in a.values().iter().zip(b.values()).filter(|(x, _)| !x.is_nan()) {
            assert!((y - x - 2f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn paraboloid_ratio_is_one() {
        let u = paraboloid(3, 25);
        let cfg = DoublingConfig::defaults(3, c1_scale(&u), 10.0).unwrap();
        let rep = doubling_ratio(&u, &cfg).unwrap();
        assert_eq!(rep.ratio, 1.0);
        assert!(rep.sup_outer >= rep.sup_inner);
        assert!(rep.fitted_c > 0.0 && rep.fitted_c.ln() + rep.fitted_c * rep.cap.powi(6) >= -1e-9);
    }

    #[test]
    fn outer_ball_must_fit_the_grid() {
        let u = GridFunction::sample_centered(2, 5, 3.0, |x| x[0] * x[0] + x[1] * x[1]).unwrap();
        let big = DoublingConfig::custom(0.1, 0.1, 10.0, 1.0, 4.0, 1.0).unwrap();
        assert!(matches!(doubling_ratio(&u, &big), Err(Error::Configuration(_))));
    }

    #[test]
    fn solved_exp_ratio_matches_analytic_sups() {
        let c = case("exp", 3).unwrap();
        let ratio_err = |m: usize| {
            let run = solve_manufactured(&c.rhs, &c.solution, m, 3.0, &SolveOptions::default()).unwrap();
            let cfg = DoublingConfig::defaults(3, c1_scale(&run.outcome.u), 10.0).unwrap();
            let rep = doubling_ratio(&run.outcome.u, &cfg).unwrap();
            let exact = (3.0 + 0.05 * 2f64.exp()) / (3.0 + 0.05 * 1f64.exp());
            (rep.ratio - exact).abs()
        };
        let (e1, e2) = (ratio_err(13), ratio_err(25));
        assert!(e2 < e1 && e2 < 1e-3, "{e1} {e2}");
    }

    #[test]
    fn fitted_constant_solves_the_bound() {
        for (ratio, g) in [(1.5, 2.0), (1.0, 1.0), (30.0, 5.0)] {
            let c = fit_constant(f64::ln(ratio), f64::powi(g, 6));
            assert!((c.ln() + c * g.powi(6) - ratio.ln()).abs() < 1e-9);
        }
    }
}
