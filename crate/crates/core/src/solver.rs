//! Damped Newton solver for `sigma_2(D^2 u) = f(x, u, Du)` on uniform grids
//! with Dirichlet data.
//!
//! The unknowns are the nodes of depth >= 1. Each Newton correction solves
//! the linearization `F_ij dH_ij - f_z du - f_p . dDu`, with `F = (tr H) I - H`
//! evaluated on the current central-difference Hessian. A backtracking line
//! search keeps every accepted iterate inside the cone.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Col;

use crate::cone::{matrix_certificate, ConeCertificate};
use crate::error::{Error, Result};
use crate::grid::GridFunction;
pub use crate::grid::{hessian_field, HessianField};
use crate::linalg::solve_dense;
use crate::rhs::{Manufactured, RhsSpec};

/// Largest number of unknowns solved by sparse LU in dimension n. LU fill
/// grows quickly with the dimension, so higher dimensions switch to the
/// Krylov solver earlier.
pub fn direct_limit(n: usize) -> usize {
    match n {
        0..=2 => 250_000,
        3 => 40_000,
        _ => 5_000,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearSolver {
    /// Sparse LU up to [`direct_limit`] unknowns, Krylov beyond.
    Auto,
    Direct,
    Krylov,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Residual target; `None` means `1e-10 * max(1, max f)` over the
    /// initial nodes.
    pub tol: Option<f64>,
    pub max_iter: usize,
    /// Smallest step length tried by the line search.
    pub step_floor: f64,
    pub linear: LinearSolver,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: None,
            max_iter: 50,
            step_floor: 1e-4,
            linear: LinearSolver::Auto,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub u: GridFunction,
    /// Number of accepted Newton corrections.
    pub iterations: usize,
    /// Max-norm of `sigma_2(D^2_h u) - f(x, u, D_h u)` over the unknowns.
    pub final_residual: f64,
    pub admissible: bool,
    pub damping_history: Vec<f64>,
    /// Residual before the first correction, then after each one.
    pub residual_history: Vec<f64>,
    pub tol: f64,
}

/// Per-node cone certificates of the central-difference Hessian.
#[derive(Debug, Clone)]
pub struct AdmissibilityReport {
    /// `None` on the boundary layer.
    pub certificates: Vec<Option<ConeCertificate>>,
    pub admissible: bool,
    pub inadmissible_nodes: usize,
    pub first_inadmissible: Option<Vec<usize>>,
    pub min_sigma2: f64,
    pub min_laplacian: f64,
}

pub fn admissibility_scan(u: &GridFunction) -> AdmissibilityReport {
    let mut certificates = vec![None; u.len()];
    let mut inadmissible_nodes = 0;
    let mut first = None;
    let mut min_sigma2 = f64::INFINITY;
    let mut min_laplacian = f64::INFINITY;
    for (p, slot) in certificates.iter_mut().enumerate() {
        if u.depth(p) < 1 {
            continue;
        }
        let cert = matrix_certificate(&u.hessian(p));
        min_sigma2 = min_sigma2.min(cert.sigma2);
        min_laplacian = min_laplacian.min(cert.sigma1);
        if !cert.in_gamma2 {
            inadmissible_nodes += 1;
            first.get_or_insert(p);
        }
        *slot = Some(cert);
    }
    AdmissibilityReport {
        certificates,
        admissible: inadmissible_nodes == 0,
        inadmissible_nodes,
        first_inadmissible: first.map(|p| u.multi_index(p)),
        min_sigma2,
        min_laplacian,
    }
}

fn first_bad_node(u: &GridFunction) -> Option<usize> {
    (0..u.len()).find(|&p| u.depth(p) >= 1 && !matrix_certificate(&u.hessian(p)).in_gamma2)
}

/// Nodal residual `sigma_2(D^2_h u) - f` at every unknown, in unknown order.
fn residual(u: &GridFunction, rhs: &RhsSpec, unknowns: &[usize]) -> Vec<f64> {
    let mut x = vec![0.0; u.n()];
    unknowns
        .iter()
        .map(|&p| {
            u.coords_into(p, &mut x);
            u.hessian(p).sigma2() - rhs.eval(&x, u.values()[p], &u.gradient(p))
        })
        .collect()
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, b| a.max(b.abs()))
}

/// Sparse Newton matrix in coordinate form (duplicates are summed).
fn jacobian(u: &GridFunction, rhs: &RhsSpec, unknowns: &[usize], column: &[usize]) -> Vec<(usize, usize, f64)> {
    let n = u.n();
    let h = u.h();
    let h2 = h * h;
    let per_row = 1 + 2 * n + 2 * n * (n - 1);
    let mut trips = Vec::with_capacity(unknowns.len() * per_row);
    let mut x = vec![0.0; n];
    for (row, &p) in unknowns.iter().enumerate() {
        let hm = u.hessian(p);
        let t = hm.trace();
        let grad = u.gradient(p);
        u.coords_into(p, &mut x);
        let z = u.values()[p];
        let fz = rhs.d_z(&x, z, &grad);
        let fp = rhs.d_p(&x, z, &grad);
        let mut push = |q: usize, v: f64| {
            let c = column[q];
            if c != usize::MAX {
                trips.push((row, c, v));
            }
        };
        let mut center = -fz;
        for i in 0..n {
            let fii = t - hm.get(i, i);
            let s = u.stride(i);
            center -= 2.0 * fii / h2;
            push(p + s, fii / h2 - fp[i] / (2.0 * h));
            push(p - s, fii / h2 + fp[i] / (2.0 * h));
        }
        push(p, center);
        for i in 0..n {
            for j in (i + 1)..n {
                // d sigma_2 / d H_ij counted for both (i,j) and (j,i).
                let w = -2.0 * hm.get(i, j) / (4.0 * h2);
                if w == 0.0 {
                    continue;
                }
                let (si, sj) = (u.stride(i), u.stride(j));
                push(p + si + sj, w);
                push(p - si - sj, w);
                push(p + si - sj, -w);
                push(p - si + sj, -w);
            }
        }
    }
    trips
}

fn solve_direct(dim: usize, trips: &[(usize, usize, f64)], b: &[f64]) -> Result<Vec<f64>> {
    let entries: Vec<Triplet<usize, usize, f64>> =
        trips.iter().map(|&(r, c, v)| Triplet::new(r, c, v)).collect();
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(dim, dim, &entries)
        .map_err(|e| Error::LinearAlgebra(format!("cannot assemble sparse matrix: {e:?}")))?;
    let lu = mat
        .sp_lu()
        .map_err(|e| Error::LinearAlgebra(format!("sparse LU failed: {e:?}")))?;
    let mut rhs = Col::<f64>::from_fn(dim, |i| b[i]);
    lu.solve_in_place(&mut rhs);
    let x: Vec<f64> = (0..dim).map(|i| rhs[i]).collect();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::LinearAlgebra("Newton matrix is singular to working precision".into()));
    }
    Ok(x)
}

/// Compressed sparse rows.
struct Csr {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl Csr {
    fn from_triplets(dim: usize, trips: &[(usize, usize, f64)]) -> Self {
        let mut sorted = trips.to_vec();
        sorted.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0; dim + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut data: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *data.last_mut().expect("nonempty") += v;
                continue;
            }
            last = Some((r, c));
            indices.push(c);
            data.push(v);
            indptr[r + 1] = indices.len();
        }
        for r in 1..=dim {
            indptr[r] = indptr[r].max(indptr[r - 1]);
        }
        Csr {
            indptr,
            indices,
            data,
        }
    }

    fn mul(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.indptr[r]..self.indptr[r + 1] {
                s += self.data[k] * x[self.indices[k]];
            }
            *yr = s;
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        (0..self.indptr.len() - 1)
            .map(|r| {
                (self.indptr[r]..self.indptr[r + 1])
                    .find(|&k| self.indices[k] == r)
                    .map_or(0.0, |k| self.data[k])
            })
            .collect()
    }
}

/// Restarted GMRES with right diagonal preconditioning.
fn solve_krylov(dim: usize, trips: &[(usize, usize, f64)], b: &[f64]) -> Result<Vec<f64>> {
    const RESTART: usize = 60;
    const MAX_CYCLES: usize = 200;
    const REL_TOL: f64 = 1e-13;
    let a = Csr::from_triplets(dim, trips);
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x = vec![0.0; dim];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut tmp = vec![0.0; dim];
    let mut w = vec![0.0; dim];
    for _ in 0..MAX_CYCLES {
        a.mul(&x, &mut tmp);
        let r: Vec<f64> = b.iter().zip(&tmp).map(|(bi, ti)| bi - ti).collect();
        let beta = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if beta <= REL_TOL * bnorm {
            return Ok(x);
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut hess = vec![vec![0.0; RESTART]; RESTART + 1];
        let (mut cs, mut sn) = (vec![0.0; RESTART], vec![0.0; RESTART]);
        let mut g = vec![0.0; RESTART + 1];
        g[0] = beta;
        let mut steps = 0;
        for j in 0..RESTART {
            let pv: Vec<f64> = basis[j].iter().zip(&inv_diag).map(|(v, d)| v * d).collect();
            a.mul(&pv, &mut w);
            for (i, vi) in basis.iter().enumerate() {
                let hij: f64 = w.iter().zip(vi).map(|(a, b)| a * b).sum();
                hess[i][j] = hij;
                for (wk, vk) in w.iter_mut().zip(vi) {
                    *wk -= hij * vk;
                }
            }
            let wn = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            hess[j + 1][j] = wn;
            for i in 0..j {
                let t = cs[i] * hess[i][j] + sn[i] * hess[i + 1][j];
                hess[i + 1][j] = -sn[i] * hess[i][j] + cs[i] * hess[i + 1][j];
                hess[i][j] = t;
            }
            let rho = hess[j][j].hypot(hess[j + 1][j]);
            if rho == 0.0 {
                break;
            }
            cs[j] = hess[j][j] / rho;
            sn[j] = hess[j + 1][j] / rho;
            hess[j][j] = rho;
            hess[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            steps = j + 1;
            if g[j + 1].abs() <= REL_TOL * bnorm || wn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        let mut y = vec![0.0; steps];
        for i in (0..steps).rev() {
            let s: f64 = ((i + 1)..steps).map(|k| hess[i][k] * y[k]).sum();
            y[i] = (g[i] - s) / hess[i][i];
        }
        for (k, yk) in y.iter().enumerate() {
            for (xi, (vi, d)) in x.iter_mut().zip(basis[k].iter().zip(&inv_diag)) {
                *xi += yk * vi * d;
            }
        }
    }
    a.mul(&x, &mut tmp);
    let rn = b.iter().zip(&tmp).map(|(bi, ti)| (bi - ti).powi(2)).sum::<f64>().sqrt();
    if !(rn <= 1e-8 * bnorm) {
        return Err(Error::LinearAlgebra(format!(
            "GMRES stalled at relative residual {:e}",
            rn / bnorm
        )));
    }
    Ok(x)
}

fn linear_solve(
    kind: LinearSolver,
    n: usize,
    dim: usize,
    trips: &[(usize, usize, f64)],
    b: &[f64],
) -> Result<Vec<f64>> {
    match kind {
        LinearSolver::Direct => solve_direct(dim, trips, b),
        LinearSolver::Krylov => solve_krylov(dim, trips, b),
        LinearSolver::Auto if dim <= direct_limit(n) => solve_direct(dim, trips, b),
        LinearSolver::Auto => solve_krylov(dim, trips, b),
    }
}

fn unknown_maps(u: &GridFunction) -> (Vec<usize>, Vec<usize>) {
    let mut column = vec![usize::MAX; u.len()];
    let mut unknowns = Vec::new();
    for (p, col) in column.iter_mut().enumerate() {
        if u.depth(p) >= 1 {
            *col = unknowns.len();
            unknowns.push(p);
        }
    }
    (unknowns, column)
}

/// Solves `sigma_2(D^2_h u) = f(x, u, D_h u)` at the nodes of depth >= 1,
/// with `u` fixed to `boundary` on the outer layer. `init` supplies the
/// interior starting values and must be admissible.
///
/// At least one Newton correction is always applied. A trial step is
/// accepted when the iterate stays in the cone and the residual max-norm
/// decreases, or already meets the tolerance.
pub fn solve(
    rhs: &RhsSpec,
    boundary: &GridFunction,
    init: &GridFunction,
    opts: &SolveOptions,
) -> Result<SolveOutcome> {
    if !boundary.same_grid(init) {
        return Err(Error::param("boundary and initial guess live on different grids"));
    }
    let mut u = init.clone();
    for p in 0..u.len() {
        if u.depth(p) == 0 {
            u.values_mut()[p] = boundary.values()[p];
        }
    }
    if let Some(p) = first_bad_node(&u) {
        return Err(Error::Admissibility {
            node: u.multi_index(p),
            reason: "initial guess is not in the Gamma_2 cone".into(),
        });
    }
    let (unknowns, column) = unknown_maps(&u);
    let mut fmax = 0.0f64;
    let mut x = vec![0.0; u.n()];
    for &p in &unknowns {
        u.coords_into(p, &mut x);
        let f = rhs.eval(&x, u.values()[p], &u.gradient(p));
        if !(f > 0.0) {
            return Err(Error::domain(format!(
                "right-hand side is not positive at node {:?} (f = {f})",
                u.multi_index(p)
            )));
        }
        fmax = fmax.max(f);
    }
    let tol = opts.tol.unwrap_or(1e-10 * fmax.max(1.0));

    let mut r = residual(&u, rhs, &unknowns);
    let mut rnorm = max_norm(&r);
    let mut damping_history = Vec::new();
    let mut residual_history = vec![rnorm];
    for it in 1..=opts.max_iter {
        let trips = jacobian(&u, rhs, &unknowns, &column);
        let delta = linear_solve(opts.linear, u.n(), unknowns.len(), &trips, &r)?;
        let mut step = 1.0;
        let accepted = loop {
            let mut trial = u.clone();
            for (k, &p) in unknowns.iter().enumerate() {
                trial.values_mut()[p] -= step * delta[k];
            }
            if first_bad_node(&trial).is_none() {
                let tr = residual(&trial, rhs, &unknowns);
                let tn = max_norm(&tr);
                if tn < rnorm || tn <= tol {
                    break Some((trial, tr, tn));
                }
            }
            step *= 0.5;
            if step < opts.step_floor {
                break None;
            }
        };
        let Some((next, nr, nn)) = accepted else {
            return Err(Error::Nonconvergence {
                iterations: it - 1,
                residual: rnorm,
                reason: format!(
                    "line search reached the step floor {} without an admissible decrease",
                    opts.step_floor
                ),
            });
        };
        u = next;
        r = nr;
        rnorm = nn;
        damping_history.push(step);
        residual_history.push(rnorm);
        if rnorm <= tol {
            return Ok(SolveOutcome {
                u,
                iterations: it,
                final_residual: rnorm,
                admissible: true,
                damping_history,
                residual_history,
                tol,
            });
        }
    }
    Err(Error::Nonconvergence {
        iterations: opts.max_iter,
        residual: rnorm,
        reason: format!("residual still above tolerance {tol:e}"),
    })
}

/// Least-squares quadratic `c + b.x + x^T A x / 2` through the boundary
/// values of `boundary`.
pub fn fit_boundary_quadratic(boundary: &GridFunction) -> Result<Manufactured> {
    let n = boundary.n();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let k = 1 + n + pairs.len();
    let mut ata = vec![0.0; k * k];
    let mut atb = vec![0.0; k];
    let mut x = vec![0.0; n];
    let mut row = vec![0.0; k];
    for p in (0..boundary.len()).filter(|&p| boundary.depth(p) == 0) {
        boundary.coords_into(p, &mut x);
        row[0] = 1.0;
        row[1..=n].copy_from_slice(&x);
        for (c, &(i, j)) in pairs.iter().enumerate() {
            row[1 + n + c] = if i == j { 0.5 * x[i] * x[i] } else { x[i] * x[j] };
        }
        let v = boundary.values()[p];
        for a in 0..k {
            atb[a] += row[a] * v;
            for b in 0..k {
                ata[a * k + b] += row[a] * row[b];
            }
        }
    }
    let coef = solve_dense(ata, atb)
        .ok_or_else(|| Error::LinearAlgebra("boundary quadratic fit is singular".into()))?;
    let mut q = Manufactured::ridge(n, 0.0, crate::rhs::Profile::Zero);
    q.c = coef[0];
    q.b = coef[1..=n].to_vec();
    for (c, &(i, j)) in pairs.iter().enumerate() {
        q.a.set_sym(i, j, coef[1 + n + c]);
    }
    Ok(q)
}

/// `q` plus the discrete harmonic extension of the boundary mismatch
/// `boundary - q`, so the result matches the Dirichlet data exactly.
pub fn blended_init(boundary: &GridFunction, q: &Manufactured) -> Result<GridFunction> {
    let qgrid = boundary.map_coords(|x| q.value(x));
    let (unknowns, column) = unknown_maps(boundary);
    let n = boundary.n();
    let mut trips = Vec::with_capacity(unknowns.len() * (2 * n + 1));
    let mut b = vec![0.0; unknowns.len()];
    for (row, &p) in unknowns.iter().enumerate() {
        trips.push((row, row, -2.0 * n as f64));
        for a in 0..n {
            for q in [p + boundary.stride(a), p - boundary.stride(a)] {
                if column[q] != usize::MAX {
                    trips.push((row, column[q], 1.0));
                } else {
                    b[row] -= boundary.values()[q] - qgrid.values()[q];
                }
            }
        }
    }
    let w = linear_solve(LinearSolver::Auto, boundary.n(), unknowns.len(), &trips, &b)?;
    let mut values = boundary.values().to_vec();
    for (k, &p) in unknowns.iter().enumerate() {
        values[p] = qgrid.values()[p] + w[k];
    }
    boundary.with_values(values)
}

/// Default starting guess: the boundary least-squares quadratic blended
/// toward the interior.
pub fn default_init(boundary: &GridFunction) -> Result<GridFunction> {
    blended_init(boundary, &fit_boundary_quadratic(boundary)?)
}

/// Outcome of solving a manufactured problem, with the error against the
/// exact solution.
#[derive(Debug, Clone)]
pub struct ManufacturedRun {
    pub outcome: SolveOutcome,
    pub exact: GridFunction,
    pub max_error: f64,
}

/// Solves the problem whose exact solution is `solution` on the centered
/// cube of half-side `radius`, starting from its quadratic part.
pub fn solve_manufactured(
    rhs: &RhsSpec,
    solution: &Manufactured,
    m: usize,
    radius: f64,
    opts: &SolveOptions,
) -> Result<ManufacturedRun> {
    let exact = GridFunction::sample_centered(solution.n(), m, radius, |x| solution.value(x))?;
    let init = blended_init(&exact, &solution.quadratic_part())?;
    let outcome = solve(rhs, &exact, &init, opts)?;
    let max_error = outcome
        .u
        .values()
        .iter()
        .zip(exact.values())
        .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    Ok(ManufacturedRun {
        outcome,
        exact,
        max_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rhs::{case, Coupling, Profile};

    fn half_sq(n: usize, m: usize) -> GridFunction {
        GridFunction::sample_centered(n, m, 1.0, |x| 0.5 * x.iter().map(|v| v * v).sum::<f64>()).unwrap()
    }

    #[test]
    fn exact_quadratic_converges_in_one_step() {
        let u = half_sq(4, 9);
        let out = solve(&RhsSpec::Constant(6.0), &u, &u, &SolveOptions::default()).unwrap();
        assert_eq!(out.iterations, 1);
        assert!(out.final_residual < 1e-12);
        assert!(out.admissible);
    }

    #[test]
    fn scan_examples() {
        let rep = admissibility_scan(&half_sq(3, 7));
        assert!(rep.admissible);
        assert!((rep.min_laplacian - 3.0).abs() < 1e-12);
        let neg = admissibility_scan(&half_sq(3, 7).map_coords(|x| -0.5 * x.iter().map(|v| v * v).sum::<f64>()));
        assert!(!neg.admissible);
        assert_eq!(neg.inadmissible_nodes, 5 * 5 * 5);
    }

    #[test]
    fn saddle_scan_agrees_with_eigenvalues() {
        let u = GridFunction::sample_centered(4, 7, 1.0, |x| {
            x[0] * x[0] - x[1] * x[1] + 0.1 * x.iter().map(|v| v * v).sum::<f64>()
        })
        .unwrap();
        let rep = admissibility_scan(&u);
        // Hessian diag(2.2, -1.8, 0.2, 0.2): sigma_1 = 0.8, sigma_2 < 0.
        let ev = u.hessian(u.flat_index(&[3, 3, 3, 3])).eigenvalues();
        let pairs: f64 = (0..4).flat_map(|i| ((i + 1)..4).map(move |j| (i, j))).map(|(i, j)| ev[i] * ev[j]).sum();
        assert!(pairs < 0.0);
        assert!(!rep.admissible);
        assert_eq!(rep.inadmissible_nodes, 5usize.pow(4));
    }

    #[test]
    fn inadmissible_init_is_rejected() {
        let u = half_sq(2, 7);
        let bad = u.map_coords(|x| -x[0] * x[0]);
        let err = solve(&RhsSpec::Constant(1.0), &u, &bad, &SolveOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Admissibility { .. }));
    }

    #[test]
    fn nonpositive_rhs_is_rejected() {
        let u = half_sq(2, 7);
        let err = solve(&RhsSpec::Constant(-1.0), &u, &u, &SolveOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn manufactured_second_order() {
        let c = case("exp", 2).unwrap();
        let e1 = solve_manufactured(&c.rhs, &c.solution, 9, 1.0, &SolveOptions::default()).unwrap();
        let e2 = solve_manufactured(&c.rhs, &c.solution, 17, 1.0, &SolveOptions::default()).unwrap();
        let ratio = e1.max_error / e2.max_error;
        assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
        for w in e2.outcome.residual_history.windows(2) {
            assert!(w[1] < w[0] || w[1] <= e2.outcome.tol);
        }
    }

    #[test]
    fn coupled_rhs_recovers_solution() {
        let u = Manufactured::ridge(3, 0.05, Profile::Exp);
        let rhs = RhsSpec::manufactured(u.clone(), Coupling { kz: 0.1, kp: 0.05 });
        let e1 = solve_manufactured(&rhs, &u, 9, 1.0, &SolveOptions::default()).unwrap();
        let e2 = solve_manufactured(&rhs, &u, 17, 1.0, &SolveOptions::default()).unwrap();
        let ratio = e1.max_error / e2.max_error;
        assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn krylov_matches_direct() {
        let c = case("quartic", 3).unwrap();
        let direct = solve_manufactured(&c.rhs, &c.solution, 9, 1.0, &SolveOptions::default()).unwrap();
        let opts = SolveOptions {
            linear: LinearSolver::Krylov,
            ..SolveOptions::default()
        };
        let krylov = solve_manufactured(&c.rhs, &c.solution, 9, 1.0, &opts).unwrap();
        for (a, b) in direct.outcome.u.values().iter().zip(krylov.outcome.u.values()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn default_init_matches_boundary_and_is_admissible() {
        let c = case("sin", 3).unwrap();
        let exact = GridFunction::sample_centered(3, 9, 1.0, |x| c.solution.value(x)).unwrap();
        let init = default_init(&exact).unwrap();
        for p in (0..exact.len()).filter(|&p| exact.depth(p) == 0) {
            assert_eq!(init.values()[p], exact.values()[p]);
        }
        assert!(admissibility_scan(&init).admissible);
        let out = solve(&c.rhs, &exact, &init, &SolveOptions::default()).unwrap();
        assert!(out.final_residual <= out.tol);
    }

    #[test]
    fn quadratic_fit_recovers_quadratic() {
        let q = Manufactured::ridge(3, 0.0, Profile::Zero).shifted(&[0.5, -0.25, 1.0], 2.0);
        let g = GridFunction::sample_centered(3, 7, 1.0, |x| q.value(x)).unwrap();
        let fit = fit_boundary_quadratic(&g).unwrap();
        assert!((fit.c - 2.0).abs() < 1e-10);
        assert!((fit.b[2] - 1.0).abs() < 1e-10);
        assert!((fit.a.get(1, 1) - 1.0).abs() < 1e-10);
        assert!(fit.a.get(0, 1).abs() < 1e-10);
    }

    #[test]
    fn affine_invariance_of_discrete_operators() {
        let u = GridFunction::sample_centered(3, 9, 1.0, |x| (x[0] + 0.5 * x[1]).exp() + x[2] * x[2]).unwrap();
        // Dyadic slope and offset on a dyadic grid keep the sums exact.
        let v = u.map_coords(|x| (x[0] + 0.5 * x[1]).exp() + x[2] * x[2] + 0.5 * x[0] - 0.25 * x[2] + 2.0);
        for p in (0..u.len()).filter(|&p| u.depth(p) >= 1) {
            let (a, b) = (u.hessian(p), v.hessian(p));
            assert!((a.sigma2() - b.sigma2()).abs() < 1e-10);
            assert!((u.laplacian(p) - v.laplacian(p)).abs() < 1e-10);
        }
    }

    #[test]
    fn rescaling_is_exact_on_dyadic_grids() {
        let f = |x: &[f64]| (0.7 * x[0]).exp() + x[1].powi(4) * 0.1 + x[0] * x[1];
        let u = GridFunction::sample_centered(2, 9, 2.0, f).unwrap();
        let r = 2.0;
        let ur = GridFunction::sample_centered(2, 9, 1.0, |x| f(&[r * x[0], r * x[1]]) / (r * r)).unwrap();
        for p in (0..u.len()).filter(|&p| u.depth(p) >= 1) {
            assert_eq!(u.hessian(p).sigma2(), ur.hessian(p).sigma2());
        }
    }
}
