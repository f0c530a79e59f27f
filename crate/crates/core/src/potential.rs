//! Wolff potentials of density measures, the Harnack-type estimate,
//! weighted Hölder seminorms and oscillation decay on grid functions.

use crate::cone::BOUNDARY_TOL;
use crate::error::{Error, Result};
use crate::grid::{dist, GridFunction};
use crate::report::ExperimentReport;
use crate::rng::CounterRng;

/// Volume of the unit ball in dimension n.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI / n as f64 * unit_ball_volume(n - 2),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DensityKind {
    Constant(f64),
    /// Piecewise-linear profile `values[k]` at distance `radii[k]` from
    /// `center`, zero beyond the last radius. `radii` starts at 0.
    Radial {
        center: Vec<f64>,
        radii: Vec<f64>,
        values: Vec<f64>,
    },
    /// Node values times cell volume.
    Grid(GridFunction),
}

/// Absolutely continuous measure `mu = density dx` on `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMeasure {
    n: usize,
    kind: DensityKind,
}

impl DensityMeasure {
    pub fn constant(n: usize, c: f64) -> Result<Self> {
        if !(c >= 0.0) {
            return Err(Error::param(format!("density must be nonnegative, got {c}")));
        }
        Ok(DensityMeasure {
            n,
            kind: DensityKind::Constant(c),
        })
    }

    pub fn radial(center: Vec<f64>, radii: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if radii.len() != values.len() || radii.len() < 2 || radii[0] != 0.0 {
            return Err(Error::param("radial profile needs >= 2 samples starting at radius 0"));
        }
        if radii.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param("profile radii must increase"));
        }
        if values.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::param("density must be nonnegative"));
        }
        Ok(DensityMeasure {
            n: center.len(),
            kind: DensityKind::Radial {
                center,
                radii,
                values,
            },
        })
    }

    pub fn grid(g: GridFunction) -> Result<Self> {
        if let Some(v) = g.values().iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::param(format!("density must be nonnegative, found {v}")));
        }
        Ok(DensityMeasure {
            n: g.n(),
            kind: DensityKind::Grid(g),
        })
    }

    /// `sigma_2(D^2_h u)` at the nodes of depth >= 1, zero on the outer
    /// layer, as a grid density.
    pub fn hessian_measure(u: &GridFunction) -> Result<Self> {
        let values = (0..u.len())
            .map(|p| if u.depth(p) >= 1 { u.hessian(p).sigma2() } else { 0.0 })
            .collect();
        DensityMeasure::grid(u.with_values(values)?)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> &DensityKind {
        &self.kind
    }

    /// Same measure with the density multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        if !(s >= 0.0) {
            return Err(Error::param("scale must be nonnegative"));
        }
        let kind = match &self.kind {
            DensityKind::Constant(c) => DensityKind::Constant(c * s),
            DensityKind::Radial {
                center,
                radii,
                values,
            } => DensityKind::Radial {
                center: center.clone(),
                radii: radii.clone(),
                values: values.iter().map(|v| v * s).collect(),
            },
            DensityKind::Grid(g) => DensityKind::Grid(g.with_values(g.values().iter().map(|v| v * s).collect())?),
        };
        Ok(DensityMeasure { n: self.n, kind })
    }

    /// `mu(B_t(x))` at each of the ascending radii `ts`.
    ///
    /// A grid node carries `value * h^n`, spread over the ball of the same
    /// volume around it; the fraction inside `B_t(x)` is taken as the
    /// fraction of `t^n` between `(d - rho)^n` and `(d + rho)^n`, which is
    /// exact for the node at `x` itself and keeps the measure free of atoms.
    fn masses(&self, x: &[f64], ts: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::param(format!("point has {} coordinates, expected {}", x.len(), self.n)));
        }
        let n = self.n;
        let ni = n as i32;
        match &self.kind {
            DensityKind::Constant(c) => {
                let wn = unit_ball_volume(n);
                Ok(ts.iter().map(|t| c * wn * t.powi(ni)).collect())
            }
            DensityKind::Radial {
                center,
                radii,
                values,
            } => {
                if dist(center, x) != 0.0 {
                    return Err(Error::param("radial densities are evaluated at their center only"));
                }
                Ok(ts.iter().map(|&t| radial_mass(n, radii, values, t)).collect())
            }
            DensityKind::Grid(g) => {
                let cell = g.h().powi(ni);
                let rho = g.h() / unit_ball_volume(n).powf(1.0 / n as f64);
                // full[k]: mass of nodes entirely inside B_{ts[k]}, as a
                // difference array.
                let mut full = vec![0.0; ts.len() + 1];
                let mut out = vec![0.0; ts.len()];
                let mut xp = vec![0.0; n];
                for p in 0..g.len() {
                    let m = g.values()[p] * cell;
                    if m == 0.0 {
                        continue;
                    }
                    g.coords_into(p, &mut xp);
                    let d = dist(&xp, x);
                    let (lo, hi) = ((d - rho).max(0.0), d + rho);
                    let (lo_n, hi_n) = (lo.powi(ni), hi.powi(ni));
                    let a = ts.partition_point(|&t| t <= lo);
                    let b = ts.partition_point(|&t| t < hi);
                    for k in a..b {
                        out[k] += m * (ts[k].powi(ni) - lo_n) / (hi_n - lo_n);
                    }
                    full[b] += m;
                }
                let mut acc = 0.0;
                for k in 0..ts.len() {
                    acc += full[k];
                    out[k] += acc;
                }
                Ok(out)
            }
        }
    }
}

/// `n w_n int_0^t rho(s) s^(n-1) ds` for a piecewise-linear profile.
fn radial_mass(n: usize, radii: &[f64], values: &[f64], t: f64) -> f64 {
    let nf = n as f64;
    let mut total = 0.0;
    for k in 0..radii.len() - 1 {
        let (a, b) = (radii[k], radii[k + 1]);
        if a >= t {
            break;
        }
        let hi = b.min(t);
        let q = (values[k + 1] - values[k]) / (b - a);
        let p = values[k] - q * a;
        total += p * (hi.powf(nf) - a.powf(nf)) / nf + q * (hi.powf(nf + 1.0) - a.powf(nf + 1.0)) / (nf + 1.0);
    }
    nf * unit_ball_volume(n) * total
}

/// Lower cutoff of the quadrature, relative to `r`.
pub const WOLFF_CUTOFF: f64 = 1e-6;

/// `W(x, r) = int_0^r (mu(B_t(x)) / t^(n-4))^(1/2) dt/t` by the composite
/// midpoint rule in `s = log t` over `[log(r * 1e-6), log r]`.
pub fn wolff_potential(mu: &DensityMeasure, x: &[f64], r: f64, steps: usize) -> Result<f64> {
    let n = mu.n();
    if n < 4 {
        return Err(Error::UnsupportedDimension(n));
    }
    if !(r > 0.0) {
        return Err(Error::param(format!("radius must be positive, got {r}")));
    }
    if steps < 100 {
        return Err(Error::param(format!("need at least 100 quadrature steps, got {steps}")));
    }
    let (s0, s1) = ((r * WOLFF_CUTOFF).ln(), r.ln());
    let ds = (s1 - s0) / steps as f64;
    let ts: Vec<f64> = (0..steps).map(|k| (s0 + (k as f64 + 0.5) * ds).exp()).collect();
    let masses = mu.masses(x, &ts)?;
    let power = n as f64 - 4.0;
    let total: f64 = ts.iter().zip(&masses).map(|(t, m)| (m / t.powf(power)).sqrt()).sum();
    Ok(total * ds)
}

/// Closed form `(c w_n)^(1/2) r^2 / 2` for a constant density `c`.
pub fn wolff_constant_density(n: usize, c: f64, r: f64) -> f64 {
    (c * unit_ball_volume(n)).sqrt() * r * r / 2.0
}

/// Constant in `W(x, 4r) <= C(n) |f|_inf^(1/2) r^2`: `8 w_n^(1/2)`.
pub fn wolff_bound_constant(n: usize) -> f64 {
    8.0 * unit_ball_volume(n).sqrt()
}

/// Hessians in the closed cone, as required of 2-convex functions. The
/// tolerance is relative to `sqrt(n) |H|_F`.
fn require_two_convex(u: &GridFunction) -> Result<()> {
    for p in (0..u.len()).filter(|&p| u.depth(p) >= 1) {
        let hm = u.hessian(p);
        let scale = (u.n() as f64).sqrt() * hm.frobenius();
        let tol = 1e3 * BOUNDARY_TOL * scale.max(1.0);
        if hm.trace() < -tol || hm.sigma2() < -tol * scale.max(1.0) {
            return Err(Error::Admissibility {
                node: u.multi_index(p),
                reason: "function is not 2-convex".into(),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarnackReport {
    pub center: Vec<f64>,
    pub r: f64,
    pub nodes: usize,
    pub sup: f64,
    pub inf: f64,
    pub c1: f64,
    pub c2: f64,
    pub holds: bool,
    /// Smallest `C_2` for the given `C_1`.
    pub min_c2: f64,
    /// `min_c2 / |f|_inf^(1/2)`.
    pub normalized_c2: f64,
}

impl HarnackReport {
    pub fn to_report(&self) -> ExperimentReport {
        let mut r = ExperimentReport::new(["r", "nodes", "sup", "inf", "min_C2"]);
        r.push(vec![self.r.into(), self.nodes.into(), self.sup.into(), self.inf.into(), self.min_c2.into()]);
        r.set("C1", self.c1);
        r.set("C2", self.c2);
        r.set("holds", self.holds);
        r.set("min_C2", self.min_c2);
        r.set("normalized_C2", self.normalized_c2);
        r
    }
}

/// `sup_{B_r} u <= C1 inf_{B_r} u + C2 r^2` on the ball around the grid
/// center.
pub fn harnack_check(u: &GridFunction, rhs_sup: f64, r: f64, c1: f64, c2: f64) -> Result<HarnackReport> {
    harnack_check_at(u, &u.center(), rhs_sup, r, c1, c2)
}

pub fn harnack_check_at(
    u: &GridFunction,
    center: &[f64],
    rhs_sup: f64,
    r: f64,
    c1: f64,
    c2: f64,
) -> Result<HarnackReport> {
    let big_r = u.half_side() - dist(center, &u.center());
    if !(r > 0.0 && r < big_r / 10.0) {
        return Err(Error::param(format!(
            "radius {r} must lie in (0, R/10) with R = {big_r}"
        )));
    }
    if let Some(v) = u.values().iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::domain(format!("function must be nonnegative, found {v}")));
    }
    require_two_convex(u)?;
    let nodes = u.ball_nodes(center, r);
    let vals = nodes.iter().map(|&p| u.values()[p]);
    let sup = vals.clone().fold(f64::NEG_INFINITY, f64::max);
    let inf = vals.fold(f64::INFINITY, f64::min);
    let min_c2 = ((sup - c1 * inf) / (r * r)).max(0.0);
    Ok(HarnackReport {
        center: center.to_vec(),
        r,
        nodes: nodes.len(),
        sup,
        inf,
        c1,
        c2,
        holds: sup <= c1 * inf + c2 * r * r,
        min_c2,
        normalized_c2: if rhs_sup > 0.0 { min_c2 / rhs_sup.sqrt() } else { f64::INFINITY },
    })
}

/// Above this many ball nodes the pair maximum is estimated from
/// [`SEMINORM_PAIRS`] random pairs.
pub const SEMINORM_EXACT_NODES: usize = 4096;
pub const SEMINORM_PAIRS: usize = 20_000;
pub const SEMINORM_SEED: u64 = 0x5EED;

#[derive(Debug, Clone, PartialEq)]
pub struct SeminormReport {
    /// `sup d_x^n |u(x)|`.
    pub weighted_sup: f64,
    /// `sup d_{x,y}^(n+gamma) |u(x) - u(y)| / |x - y|^gamma`.
    pub weighted_holder: f64,
    pub gamma: f64,
    pub r: f64,
    pub nodes: usize,
    pub pairs: usize,
    /// Seed of the pair sample, `None` when all pairs were used.
    pub seed: Option<u64>,
    /// Node-sum approximation of `int_{B_R} |u|`.
    pub integral_abs: f64,
}

impl SeminormReport {
    /// `[u] / (int |u| + R^(n+2))`.
    pub fn holder_constant(&self, n: usize) -> f64 {
        self.weighted_holder / (self.integral_abs + self.r.powi(n as i32 + 2))
    }
}

/// Weighted sup norm and Hölder seminorm over the nodes with
/// `|x - center| < R`, where `d_x = R - |x - center|`.
pub fn weighted_seminorms(u: &GridFunction, gamma: f64, r: f64) -> Result<SeminormReport> {
    weighted_seminorms_seeded(u, gamma, r, SEMINORM_SEED)
}

pub fn weighted_seminorms_seeded(u: &GridFunction, gamma: f64, r: f64, seed: u64) -> Result<SeminormReport> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::param(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    if !(r > 0.0) {
        return Err(Error::param(format!("radius must be positive, got {r}")));
    }
    let n = u.n();
    let center = u.center();
    let pts: Vec<(Vec<f64>, f64, f64)> = (0..u.len())
        .filter_map(|p| {
            let x = u.coords(p);
            let d = r - dist(&x, &center);
            (d > 0.0).then(|| (x, d, u.values()[p]))
        })
        .collect();
    if pts.is_empty() {
        return Err(Error::Configuration(format!("no grid nodes inside radius {r}")));
    }
    let nf = n as i32;
    let weighted_sup = pts.iter().map(|(_, d, v)| d.powi(nf) * v.abs()).fold(0.0, f64::max);
    let integral_abs = pts.iter().map(|(_, _, v)| v.abs()).sum::<f64>() * u.h().powi(nf);
    let quotient = |a: &(Vec<f64>, f64, f64), b: &(Vec<f64>, f64, f64)| {
        let dxy = a.1.min(b.1);
        dxy.powf(n as f64 + gamma) * (a.2 - b.2).abs() / dist(&a.0, &b.0).powf(gamma)
    };
    let mut holder = 0.0f64;
    let (pairs, used_seed) = if pts.len() <= SEMINORM_EXACT_NODES {
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                holder = holder.max(quotient(&pts[i], &pts[j]));
            }
        }
        (pts.len() * (pts.len() - 1) / 2, None)
    } else {
        let mut rng = CounterRng::new(seed);
        let len = pts.len() as u64;
        let mut count = 0;
        while count < SEMINORM_PAIRS {
            let i = rng.below(len) as usize;
            let j = rng.below(len) as usize;
            if i == j {
                continue;
            }
            holder = holder.max(quotient(&pts[i], &pts[j]));
            count += 1;
        }
        (count, Some(seed))
    };
    Ok(SeminormReport {
        weighted_sup,
        weighted_holder: holder,
        gamma,
        r,
        nodes: pts.len(),
        pairs,
        seed: used_seed,
        integral_abs,
    })
}

/// Smallest constant in `|u| <= eps^gamma [u] + C eps^(-n) int |u|` for
/// each `eps`, and their maximum.
pub fn interpolation_constants(rep: &SeminormReport, n: usize, eps: &[f64]) -> (Vec<f64>, f64) {
    let per: Vec<f64> = eps
        .iter()
        .map(|&e| {
            let gap = (rep.weighted_sup - e.powf(rep.gamma) * rep.weighted_holder).max(0.0);
            if gap == 0.0 {
                0.0
            } else {
                gap * e.powi(n as i32) / rep.integral_abs
            }
        })
        .collect();
    let worst = per.iter().copied().fold(0.0, f64::max);
    (per, worst)
}

/// Candidate decay factors tried by [`oscillation_decay`].
const THETA_STEPS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct OscillationRow {
    pub r: f64,
    pub omega_r: f64,
    pub omega_10r: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OscillationReport {
    pub rows: Vec<OscillationRow>,
    pub theta: f64,
    pub c: f64,
    /// `max |D^2_h u|` (operator norm) over `B_{10 r_max}`, the scale the
    /// fitted `C` is compared against.
    pub hessian_scale: f64,
}

impl OscillationReport {
    pub fn to_report(&self) -> ExperimentReport {
        let mut r = ExperimentReport::new(["r", "omega_r", "omega_10r", "satisfied"]);
        for row in &self.rows {
            r.push(vec![row.r.into(), row.omega_r.into(), row.omega_10r.into(), row.satisfied.into()]);
        }
        r.set("theta", self.theta);
        r.set("C", self.c);
        r.set("hessian_scale", self.hessian_scale);
        r
    }
}

fn oscillation(u: &GridFunction, x: &[f64], r: f64) -> f64 {
    let nodes = u.ball_nodes(x, r);
    let (lo, hi) = nodes
        .iter()
        .map(|&p| u.values()[p])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    hi - lo
}

/// `omega_r = osc_{B_r(x)} u` against `omega_{10r}` for each radius, with
/// a fitted pair `(theta, C)`: for each theta on a 0.01 grid, `C(theta)`
/// is the least constant with `omega_r <= theta omega_{10r} + C r^2` for
/// all radii; the reported theta is the smallest one whose `C(theta)` does
/// not exceed the Hessian scale.
pub fn oscillation_decay(u: &GridFunction, x: &[f64], radii: &[f64]) -> Result<OscillationReport> {
    if radii.is_empty() {
        return Err(Error::param("need at least one radius"));
    }
    let room = u.half_side() - dist(x, &u.center());
    if let Some(r) = radii.iter().find(|&&r| !(r > 0.0 && 10.0 * r <= room * (1.0 + 1e-12))) {
        return Err(Error::param(format!(
            "radius {r} out of range: 10 r must fit inside the grid ({room})"
        )));
    }
    require_two_convex(u)?;
    let omegas: Vec<(f64, f64, f64)> = radii
        .iter()
        .map(|&r| (r, oscillation(u, x, r), oscillation(u, x, 10.0 * r)))
        .collect();
    let r_max = radii.iter().copied().fold(0.0, f64::max);
    let hessian_scale = u
        .ball_nodes(x, 10.0 * r_max)
        .into_iter()
        .filter(|&p| u.depth(p) >= 1)
        .map(|p| u.hessian(p).eigenvalues().iter().map(|v| v.abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    let c_of = |theta: f64| {
        omegas
            .iter()
            .map(|(r, w, w10)| ((w - theta * w10) / (r * r)).max(0.0))
            .fold(0.0, f64::max)
    };
    let (theta, c) = (0..THETA_STEPS)
        .map(|k| k as f64 / THETA_STEPS as f64)
        .map(|t| (t, c_of(t)))
        .find(|(_, c)| *c <= hessian_scale)
        .unwrap_or_else(|| {
            let t = (THETA_STEPS - 1) as f64 / THETA_STEPS as f64;
            (t, c_of(t))
        });
    let rows = omegas
        .iter()
        .map(|&(r, w, w10)| OscillationRow {
            r,
            omega_r: w,
            omega_10r: w10,
            satisfied: w <= theta * w10 + c * r * r * (1.0 + 1e-12),
        })
        .collect();
    Ok(OscillationReport {
        rows,
        theta,
        c,
        hessian_scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_sq(x: &[f64]) -> f64 {
        0.5 * x.iter().map(|v| v * v).sum::<f64>()
    }

    #[test]
    fn unit_ball_volumes() {
        use std::f64::consts::PI;
        assert_eq!(unit_ball_volume(2), PI);
        assert!((unit_ball_volume(3) - 4.0 / 3.0 * PI).abs() < 1e-15);
        assert!((unit_ball_volume(4) - PI * PI / 2.0).abs() < 1e-14);
        assert!((unit_ball_volume(5) - 8.0 * PI * PI / 15.0).abs() < 1e-14);
    }

    #[test]
    fn constant_density_closed_form() {
        for n in 4..=7 {
            let mu = DensityMeasure::constant(n, 3.0).unwrap();
            let w = wolff_potential(&mu, &vec![0.0; n], 0.7, 200_000).unwrap();
            let exact = wolff_constant_density(n, 3.0, 0.7);
            assert!(((w - exact) / exact).abs() < 1e-8, "n={n}");
        }
    }

    #[test]
    fn zero_density_gives_zero() {
        let mu = DensityMeasure::constant(4, 0.0).unwrap();
        assert_eq!(wolff_potential(&mu, &[0.0; 4], 1.0, 1000).unwrap(), 0.0);
    }

    #[test]
    fn wolff_argument_checks() {
        let mu = DensityMeasure::constant(3, 1.0).unwrap();
        assert!(matches!(wolff_potential(&mu, &[0.0; 3], 1.0, 1000), Err(Error::UnsupportedDimension(3))));
        let mu = DensityMeasure::constant(4, 1.0).unwrap();
        assert!(wolff_potential(&mu, &[0.0; 4], 1.0, 10).is_err());
        assert!(wolff_potential(&mu, &[0.0; 4], -1.0, 1000).is_err());
        assert!(DensityMeasure::constant(4, -1.0).is_err());
    }

    #[test]
    fn bound_on_four_r() {
        let f_sup = 2.5;
        let mu = DensityMeasure::constant(5, f_sup).unwrap();
        for r in [0.1, 1.0, 3.0] {
            let w = wolff_potential(&mu, &[0.0; 5], 4.0 * r, 20_000).unwrap();
            assert!(w <= wolff_bound_constant(5) * f_sup.sqrt() * r * r * (1.0 + 1e-8));
        }
    }

    #[test]
    fn radial_profile_matches_constant() {
        let c = 1.7;
        let flat = DensityMeasure::radial(vec![0.0; 4], vec![0.0, 0.5, 10.0], vec![c, c, c]).unwrap();
        let a = wolff_potential(&flat, &[0.0; 4], 2.0, 20_000).unwrap();
        let b = wolff_potential(&DensityMeasure::constant(4, c).unwrap(), &[0.0; 4], 2.0, 20_000).unwrap();
        assert!((a - b).abs() < 1e-12 * b);
        assert!(wolff_potential(&flat, &[0.1, 0.0, 0.0, 0.0], 1.0, 1000).is_err());
    }

    #[test]
    fn grid_density_approaches_constant() {
        let g = GridFunction::sample_centered(4, 21, 1.0, |_| 2.0).unwrap();
        let mu = DensityMeasure::grid(g).unwrap();
        let w = wolff_potential(&mu, &[0.0; 4], 0.9, 20_000).unwrap();
        let exact = wolff_constant_density(4, 2.0, 0.9);
        assert!(((w - exact) / exact).abs() < 0.05, "{w} {exact}");
    }

    #[test]
    fn monotone_and_scaling() {
        let mu = DensityMeasure::radial(vec![0.0; 4], vec![0.0, 1.0, 2.0], vec![3.0, 1.0, 0.0]).unwrap();
        let mut last = 0.0;
        for k in 1..=20 {
            let w = wolff_potential(&mu, &[0.0; 4], 0.15 * k as f64, 20_000).unwrap();
            assert!(w >= last * (1.0 - 1e-10));
            last = w;
        }
        let s = 3.0;
        let scaled = mu.scaled(s * s).unwrap();
        let (a, b) = (
            wolff_potential(&mu, &[0.0; 4], 1.3, 20_000).unwrap(),
            wolff_potential(&scaled, &[0.0; 4], 1.3, 20_000).unwrap(),
        );
        assert!((b - s * a).abs() <= 1e-10 * b);
    }

    #[test]
    fn harnack_examples() {
        let one = GridFunction::sample_centered(2, 41, 1.0, |_| 1.0).unwrap();
        let rep = harnack_check(&one, 1.0, 0.05, 1.0, 0.0).unwrap();
        assert!(rep.holds && rep.sup == rep.inf && rep.min_c2 == 0.0);

        let q = GridFunction::sample_centered(2, 81, 1.0, half_sq).unwrap();
        let rep = harnack_check(&q, 1.0, 0.0875, 1.0, 0.5).unwrap();
        assert_eq!(rep.inf, 0.0);
        let r_eff: f64 = q.ball_nodes(&[0.0, 0.0], 0.0875).iter().map(|&p| dist(&q.coords(p), &[0.0, 0.0])).fold(0.0, f64::max);
        assert!((rep.sup - r_eff * r_eff / 2.0).abs() < 1e-15);
        assert!((rep.min_c2 - 0.5 * (r_eff / 0.0875).powi(2)).abs() < 1e-12);

        let far = harnack_check_at(&q, &[0.5, 0.5], 1.0, 0.025, 1.0, 0.0).unwrap();
        let near = harnack_check_at(&q, &[0.25, 0.25], 1.0, 0.025, 1.0, 0.0).unwrap();
        assert!(far.sup / far.inf < near.sup / near.inf && far.sup / far.inf < 1.5);
    }

    #[test]
    fn harnack_argument_checks() {
        let q = GridFunction::sample_centered(2, 41, 1.0, half_sq).unwrap();
        assert!(matches!(harnack_check(&q, 1.0, 0.2, 1.0, 1.0), Err(Error::Parameter(_))));
        let neg = q.map_coords(|x| half_sq(x) - 0.1);
        assert!(matches!(harnack_check(&neg, 1.0, 0.05, 1.0, 1.0), Err(Error::Domain(_))));
        let concave = q.map_coords(|x| 2.0 - half_sq(x));
        assert!(matches!(harnack_check(&concave, 1.0, 0.05, 1.0, 1.0), Err(Error::Admissibility { .. })));
    }

    #[test]
    fn seminorms_of_constant() {
        let u = GridFunction::sample_centered(2, 21, 1.0, |_| 2.5).unwrap();
        let rep = weighted_seminorms(&u, 0.5, 1.0).unwrap();
        assert_eq!(rep.weighted_holder, 0.0);
        assert!((rep.weighted_sup - 2.5).abs() < 1e-15);
        assert!(rep.seed.is_none());
        assert!(weighted_seminorms(&u, 0.0, 1.0).is_err());
        assert!(weighted_seminorms(&u, 1.5, 1.0).is_err());
    }

    #[test]
    fn seminorms_of_linear_function_match_axis_oracle() {
        let u = GridFunction::sample_centered(4, 11, 1.0, |x| x[0]).unwrap();
        let rep = weighted_seminorms(&u, 1.0, 1.0).unwrap();
        // Along the axis d^4 |s| peaks at s = 1/5; off-axis nodes only
        // shrink the weight.
        let dense = (0..=100_000)
            .map(|k| k as f64 / 100_000.0)
            .map(|s| (1.0 - s).powi(4) * s)
            .fold(0.0, f64::max);
        let axis_nodes = (0..=5).map(|k| k as f64 * 0.2).map(|s| (1.0 - s).powi(4) * s).fold(0.0, f64::max);
        assert!(rep.weighted_sup <= dense + 1e-15 && rep.weighted_sup >= axis_nodes - 1e-15);
        // Holder quotient of a linear function is at most the weight.
        assert!(rep.weighted_holder <= 1.0 && rep.weighted_holder >= 0.8f64.powi(5));
    }

    #[test]
    fn seminorm_triangle_inequality() {
        let a = GridFunction::sample_centered(3, 9, 1.0, |x| (x[0] * 2.0).sin() + x[1]).unwrap();
        let b = GridFunction::sample_centered(3, 9, 1.0, |x| x[2] * x[2] - x[0] * x[1]).unwrap();
        let sum = a.with_values(a.values().iter().zip(b.values()).map(|(x, y)| x + y).collect()).unwrap();
        let s = |g: &GridFunction| weighted_seminorms(g, 0.4, 1.0).unwrap().weighted_holder;
        assert!(s(&sum) <= s(&a) + s(&b) + 1e-14);
    }

    #[test]
    fn sampled_pairs_are_deterministic() {
        let u = GridFunction::sample_centered(4, 13, 1.0, |x| x[0] * x[1] + x[3]).unwrap();
        let a = weighted_seminorms(&u, 0.5, 1.0).unwrap();
        let b = weighted_seminorms(&u, 0.5, 1.0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.seed, Some(SEMINORM_SEED));
        assert_eq!(a.pairs, SEMINORM_PAIRS);
    }

    #[test]
    fn interpolation_holds_with_fitted_constant() {
        let u = GridFunction::sample_centered(4, 11, 1.0, |x| 1.0 + half_sq(x)).unwrap();
        let rep = weighted_seminorms(&u, 0.5, 1.0).unwrap();
        let eps = [0.01, 0.1, 1.0];
        let (per, c) = interpolation_constants(&rep, 4, &eps);
        assert!(c.is_finite());
        for (e, ce) in eps.iter().zip(&per) {
            let rhs = e.powf(0.5) * rep.weighted_holder + c * e.powi(-4) * rep.integral_abs;
            assert!(rep.weighted_sup <= rhs * (1.0 + 1e-12));
            assert!(*ce <= c);
        }
    }

    #[test]
    fn oscillation_examples() {
        let q = GridFunction::sample_centered(2, 101, 1.0, half_sq).unwrap();
        let rep = oscillation_decay(&q, &[0.0, 0.0], &[0.02, 0.05, 0.09]).unwrap();
        for row in &rep.rows {
            let r_eff: f64 = q.ball_nodes(&[0.0, 0.0], row.r).iter().map(|&p| dist(&q.coords(p), &[0.0, 0.0])).fold(0.0, f64::max);
            assert!((row.omega_r - r_eff * r_eff / 2.0).abs() < 1e-15);
            assert!(row.satisfied);
        }
        assert_eq!(rep.theta, 0.0);
        assert!(rep.c <= rep.hessian_scale);

        let flat = GridFunction::sample_centered(2, 21, 1.0, |_| 4.0).unwrap();
        let rep = oscillation_decay(&flat, &[0.0, 0.0], &[0.05]).unwrap();
        assert_eq!((rep.c, rep.rows[0].omega_r), (0.0, 0.0));
        assert!(oscillation_decay(&flat, &[0.0, 0.0], &[0.2]).is_err());
    }
}
