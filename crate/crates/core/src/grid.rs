//! Scalar fields on uniform tensor grids, central-difference stencils and
//! the text file format.
//!
//! Nodes are stored in lexicographic order with the last axis fastest. The
//! "depth" of a node is its distance (in nodes) to the nearest face; a
//! stencil of half-width k is defined at depth >= k.

use std::fmt::Write as _;
use std::path::Path;

use crate::cone::{matrix_certificate, ConeCertificate};
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

const MAGIC: &str = "SIGMA2GRID v1";

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    n: usize,
    m: usize,
    h: f64,
    origin: Vec<f64>,
    values: Vec<f64>,
}

fn check_shape(n: usize, m: usize, h: f64, origin: &[f64], len: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::param("grid dimension must be >= 1"));
    }
    if m < 5 || m % 2 == 0 {
        return Err(Error::param(format!("points per axis must be odd and >= 5, got {m}")));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::param(format!("grid spacing must be positive, got {h}")));
    }
    if origin.len() != n {
        return Err(Error::param(format!("origin has {} entries, expected {n}", origin.len())));
    }
    let expected = m
        .checked_pow(n as u32)
        .ok_or_else(|| Error::param("grid too large"))?;
    if len != expected {
        return Err(Error::param(format!("{len} values given, m^n = {expected}")));
    }
    Ok(())
}

impl GridFunction {
    pub fn new(n: usize, m: usize, h: f64, origin: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_shape(n, m, h, &origin, values.len())?;
        Ok(GridFunction {
            n,
            m,
            h,
            origin,
            values,
        })
    }

    /// Samples `f` on the cube `[-radius, radius]^n` with `m` points per axis.
    pub fn sample_centered(
        n: usize,
        m: usize,
        radius: f64,
        f: impl Fn(&[f64]) -> f64,
    ) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::param(format!("radius must be positive, got {radius}")));
        }
        let h = 2.0 * radius / (m as f64 - 1.0);
        let len = m.checked_pow(n as u32).unwrap_or(0);
        let mut g = GridFunction::new(n, m, h, vec![-radius; n], vec![0.0; len])?;
        let mut x = vec![0.0; n];
        for p in 0..len {
            g.coords_into(p, &mut x);
            g.values[p] = f(&x);
        }
        Ok(g)
    }

    /// Same grid, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        GridFunction::new(self.n, self.m, self.h, self.origin.clone(), values)
    }

    /// Same grid, values from a function of position.
    pub fn map_coords(&self, f: impl Fn(&[f64]) -> f64) -> Self {
        let mut x = vec![0.0; self.n];
        let values = (0..self.len())
            .map(|p| {
                self.coords_into(p, &mut x);
                f(&x)
            })
            .collect();
        GridFunction {
            values,
            ..self.clone_shape()
        }
    }

    fn clone_shape(&self) -> Self {
        GridFunction {
            n: self.n,
            m: self.m,
            h: self.h,
            origin: self.origin.clone(),
            values: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_grid(&self, other: &GridFunction) -> bool {
        self.n == other.n && self.m == other.m && self.h == other.h && self.origin == other.origin
    }

    /// Half the side length of the cube.
    pub fn half_side(&self) -> f64 {
        0.5 * self.h * (self.m as f64 - 1.0)
    }

    pub fn center(&self) -> Vec<f64> {
        self.origin.iter().map(|o| o + self.half_side()).collect()
    }

    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        self.m.pow((self.n - 1 - axis) as u32)
    }

    pub fn multi_index(&self, mut p: usize) -> Vec<usize> {
        let mut idx = vec![0; self.n];
        for a in (0..self.n).rev() {
            idx[a] = p % self.m;
            p /= self.m;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.m + i)
    }

    pub fn coords(&self, p: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        self.coords_into(p, &mut x);
        x
    }

    pub fn coords_into(&self, mut p: usize, x: &mut [f64]) {
        for a in (0..self.n).rev() {
            x[a] = self.origin[a] + (p % self.m) as f64 * self.h;
            p /= self.m;
        }
    }

    pub fn depth(&self, mut p: usize) -> usize {
        let mut d = usize::MAX;
        for _ in 0..self.n {
            let i = p % self.m;
            d = d.min(i.min(self.m - 1 - i));
            p /= self.m;
        }
        d
    }

    /// Nodes with `|x - center| <= r + h/2`.
    pub fn ball_nodes(&self, center: &[f64], r: f64) -> Vec<usize> {
        let lim = r + 0.5 * self.h;
        let mut x = vec![0.0; self.n];
        (0..self.len())
            .filter(|&p| {
                self.coords_into(p, &mut x);
                dist(&x, center) <= lim
            })
            .collect()
    }

    #[inline]
    fn at(&self, p: usize, axis: usize, step: isize) -> f64 {
        let s = self.stride(axis) as isize;
        self.values[(p as isize + step * s) as usize]
    }

    /// Central first difference along `axis` (depth >= 1).
    pub fn d1(&self, p: usize, axis: usize) -> f64 {
        (self.at(p, axis, 1) - self.at(p, axis, -1)) / (2.0 * self.h)
    }

    pub fn gradient(&self, p: usize) -> Vec<f64> {
        (0..self.n).map(|a| self.d1(p, a)).collect()
    }

    /// Second difference `(i, j)` (depth >= 1). Diagonal entries use the
    /// three-point stencil, mixed entries the four-corner stencil, which is
    /// symmetric in `(i, j)` by construction.
    pub fn d2(&self, p: usize, i: usize, j: usize) -> f64 {
        let h2 = self.h * self.h;
        if i == j {
            return (self.at(p, i, 1) - 2.0 * self.values[p] + self.at(p, i, -1)) / h2;
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        let sa = self.stride(a) as isize;
        let sb = self.stride(b) as isize;
        let q = p as isize;
        let v = |o: isize| self.values[(q + o) as usize];
        (v(sa + sb) - v(sa - sb) - v(-sa + sb) + v(-sa - sb)) / (4.0 * h2)
    }

    pub fn hessian(&self, p: usize) -> SymMatrix {
        let mut hm = SymMatrix::zeros(self.n);
        for i in 0..self.n {
            for j in i..self.n {
                hm.set_sym(i, j, self.d2(p, i, j));
            }
        }
        hm
    }

    pub fn laplacian(&self, p: usize) -> f64 {
        (0..self.n).map(|a| self.d2(p, a, a)).sum()
    }

    /// Third difference `u_ijk` (depth >= 2): the central difference of a
    /// Hessian entry, chosen canonically from the multiset `{i, j, k}` so
    /// that every permutation returns the identical float. A repeated index
    /// pair is differenced along the remaining index; otherwise the entry
    /// `(a, b)` of the two smallest indices is differenced along the largest.
    pub fn d3(&self, p: usize, i: usize, j: usize, k: usize) -> f64 {
        let mut s = [i, j, k];
        s.sort_unstable();
        let (a, b, c) = if s[0] == s[1] {
            (s[0], s[1], s[2])
        } else if s[1] == s[2] {
            (s[1], s[2], s[0])
        } else {
            (s[0], s[1], s[2])
        };
        let st = self.stride(c);
        (self.d2(p + st, a, b) - self.d2(p - st, a, b)) / (2.0 * self.h)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    /// Max over nodes of depth >= 1 of `|D_h u|`.
    pub fn max_gradient_norm(&self) -> f64 {
        (0..self.len())
            .filter(|&p| self.depth(p) >= 1)
            .map(|p| self.gradient(p).iter().map(|g| g * g).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(26 * (self.len() + 2));
        s.push_str(MAGIC);
        s.push('\n');
        write!(s, "{} {} {:.16e}", self.n, self.m, self.h).expect("string write");
        for o in &self.origin {
            write!(s, " {o:.16e}").expect("string write");
        }
        s.push('\n');
        for v in &self.values {
            writeln!(s, "{v:.16e}").expect("string write");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(MAGIC) {
            return Err(Error::Format(format!("first line must be {MAGIC:?}")));
        }
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("missing header line".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() < 4 {
            return Err(Error::Format(format!("header too short: {header:?}")));
        }
        let n: usize = parse(fields[0])?;
        let m: usize = parse(fields[1])?;
        let h: f64 = parse(fields[2])?;
        if fields.len() != 3 + n {
            return Err(Error::Format(format!(
                "header has {} origin entries, expected {n}",
                fields.len() - 3
            )));
        }
        let origin = fields[3..].iter().map(|f| parse(f)).collect::<Result<Vec<f64>>>()?;
        let values = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| parse(l.trim()))
            .collect::<Result<Vec<f64>>>()?;
        GridFunction::new(n, m, h, origin, values).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        GridFunction::from_text(&std::fs::read_to_string(path)?)
    }
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Format(format!("cannot parse {s:?}")))
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Central-difference Hessians and gradients at every node of depth >= 1.
///
/// Storage is packed: `n * n` entries per node for the Hessian and `n` for
/// the gradient, NaN on the boundary layer.
#[derive(Debug, Clone)]
pub struct HessianField {
    n: usize,
    m: usize,
    h: f64,
    origin: Vec<f64>,
    hess: Vec<f64>,
    grad: Vec<f64>,
    certificates: Vec<Option<ConeCertificate>>,
}

impl HessianField {
    pub fn new(u: &GridFunction) -> Self {
        let n = u.n();
        let len = u.len();
        let mut hess = vec![f64::NAN; len * n * n];
        let mut grad = vec![f64::NAN; len * n];
        let mut certificates = vec![None; len];
        for p in 0..len {
            if u.depth(p) < 1 {
                continue;
            }
            let hm = u.hessian(p);
            for i in 0..n {
                for j in 0..n {
                    hess[p * n * n + i * n + j] = hm.get(i, j);
                }
                grad[p * n + i] = u.d1(p, i);
            }
            certificates[p] = Some(matrix_certificate(&hm));
        }
        HessianField {
            n,
            m: u.m(),
            h: u.h(),
            origin: u.origin().to_vec(),
            hess,
            grad,
            certificates,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn len(&self) -> usize {
        self.certificates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.certificates.is_empty()
    }

    pub fn is_interior(&self, p: usize) -> bool {
        self.certificates[p].is_some()
    }

    pub fn hessian(&self, p: usize) -> Option<SymMatrix> {
        self.certificates[p]?;
        let nn = self.n * self.n;
        let rows: Vec<Vec<f64>> = self.hess[p * nn..(p + 1) * nn]
            .chunks(self.n)
            .map(<[f64]>::to_vec)
            .collect();
        SymMatrix::from_rows(&rows).ok()
    }

    pub fn gradient(&self, p: usize) -> Option<&[f64]> {
        self.certificates[p]?;
        Some(&self.grad[p * self.n..(p + 1) * self.n])
    }

    pub fn laplacian(&self, p: usize) -> Option<f64> {
        self.certificates[p].map(|c| c.sigma1)
    }

    pub fn certificate(&self, p: usize) -> Option<ConeCertificate> {
        self.certificates[p]
    }

    /// True iff every interior node is in the open cone.
    pub fn admissible(&self) -> bool {
        self.first_inadmissible().is_none()
    }

    pub fn first_inadmissible(&self) -> Option<usize> {
        self.certificates
            .iter()
            .position(|c| matches!(c, Some(c) if !c.in_gamma2))
    }
}

/// Central-difference Hessian field of `u`.
pub fn hessian_field(u: &GridFunction) -> HessianField {
    HessianField::new(u)
}
