//! Uniform grids over boxes in R^n, sampled fields, phantoms and grid quadrature.
//!
//! Fields are zero outside their box. Integrals use the composite trapezoid
//! rule on every axis, summed sequentially in row-major order so results are
//! bitwise reproducible.

pub mod io;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};

pub use io::{read_grid, write_grid, GridFile, GridHeader};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    lo: Vec<f64>,
    hi: Vec<f64>,
    shape: Vec<usize>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, shape: Vec<usize>) -> Result<Self> {
        let n = lo.len();
        if n == 0 || hi.len() != n || shape.len() != n {
            return Err(TomoError::InvalidDomain(format!(
                "lo/hi/shape lengths {}/{}/{} must agree and be nonzero",
                lo.len(),
                hi.len(),
                shape.len()
            )));
        }
        for i in 0..n {
            if !(lo[i].is_finite() && hi[i].is_finite()) || hi[i] <= lo[i] {
                return Err(TomoError::InvalidDomain(format!(
                    "axis {i}: need finite lo < hi, got [{}, {}]",
                    lo[i], hi[i]
                )));
            }
            if shape[i] < 2 {
                return Err(TomoError::InvalidDomain(format!(
                    "axis {i}: need at least 2 samples, got {}",
                    shape[i]
                )));
            }
            let h = (hi[i] - lo[i]) / (shape[i] - 1) as f64;
            if !(h.is_finite() && h > 0.0) {
                return Err(TomoError::InvalidDomain(format!("axis {i}: degenerate spacing {h}")));
            }
        }
        Ok(Self { lo, hi, shape })
    }

    /// The cube [-half, half]^dim with `n` samples per axis.
    pub fn centered(half: f64, n: usize, dim: usize) -> Result<Self> {
        Self::new(vec![-half; dim], vec![half; dim], vec![n; dim])
    }

    pub fn ndim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / (self.shape[axis] - 1) as f64
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        if i + 1 == self.shape[axis] {
            self.hi[axis]
        } else {
            self.lo[axis] + i as f64 * self.spacing(axis)
        }
    }

    pub fn axis_coords(&self, axis: usize) -> Vec<f64> {
        (0..self.shape[axis]).map(|i| self.coord(axis, i)).collect()
    }

    /// Row-major multi-index of a flat index.
    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.ndim()];
        for ax in (0..self.ndim()).rev() {
            idx[ax] = flat % self.shape[ax];
            flat /= self.shape[ax];
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn node(&self, flat: usize) -> Vec<f64> {
        self.unravel(flat)
            .iter()
            .enumerate()
            .map(|(ax, &i)| self.coord(ax, i))
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&v, (&l, &h))| v >= l && v <= h)
    }

    /// Composite trapezoid weights along one axis.
    pub fn trapezoid_weights(&self, axis: usize) -> Vec<f64> {
        let h = self.spacing(axis);
        let n = self.shape[axis];
        (0..n)
            .map(|i| if i == 0 || i + 1 == n { 0.5 * h } else { h })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    domain: BoxDomain,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(domain: BoxDomain, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(TomoError::DimensionMismatch {
                expected: domain.len(),
                actual: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(TomoError::NonFiniteSample { index });
        }
        Ok(Self { domain, values })
    }

    pub fn zeros(domain: BoxDomain) -> Self {
        let n = domain.len();
        Self {
            domain,
            values: vec![0.0; n],
        }
    }

    /// Samples `f` at every node. Non-finite results are replaced by zero.
    pub fn from_fn<F>(domain: BoxDomain, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let values = (0..domain.len())
            .into_par_iter()
            .map(|k| {
                let v = f(&domain.node(k));
                if v.is_finite() {
                    v
                } else {
                    0.0
                }
            })
            .collect();
        Self { domain, values }
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn ndim(&self) -> usize {
        self.domain.ndim()
    }

    pub fn at(&self, idx: &[usize]) -> f64 {
        self.values[self.domain.ravel(idx)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            domain: self.domain.clone(),
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    /// Flat index of the largest sample.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = k;
            }
        }
        best
    }

    /// Multilinear interpolation; zero outside the box.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        match self.ndim() {
            1 => self.linear1(x[0]),
            2 => self.bilinear(x[0], x[1]),
            3 => self.trilinear(x[0], x[1], x[2]),
            _ => self.multilinear(x),
        }
    }

    fn locate(&self, axis: usize, x: f64) -> Option<(usize, f64)> {
        let lo = self.domain.lo[axis];
        let hi = self.domain.hi[axis];
        if !(x >= lo && x <= hi) {
            return None;
        }
        let n = self.domain.shape[axis];
        let t = (x - lo) / self.domain.spacing(axis);
        let i = (t.floor() as usize).min(n - 2);
        Some((i, t - i as f64))
    }

    fn linear1(&self, x: f64) -> f64 {
        match self.locate(0, x) {
            Some((i, t)) => self.values[i] * (1.0 - t) + self.values[i + 1] * t,
            None => 0.0,
        }
    }

    pub fn bilinear(&self, x: f64, y: f64) -> f64 {
        let (Some((i, s)), Some((j, t))) = (self.locate(0, x), self.locate(1, y)) else {
            return 0.0;
        };
        let ny = self.domain.shape[1];
        let k = i * ny + j;
        let v = &self.values;
        (1.0 - s) * ((1.0 - t) * v[k] + t * v[k + 1]) + s * ((1.0 - t) * v[k + ny] + t * v[k + ny + 1])
    }

    pub fn trilinear(&self, x: f64, y: f64, z: f64) -> f64 {
        let (Some((i, r)), Some((j, s)), Some((k, t))) =
            (self.locate(0, x), self.locate(1, y), self.locate(2, z))
        else {
            return 0.0;
        };
        let [_, ny, nz] = [self.domain.shape[0], self.domain.shape[1], self.domain.shape[2]];
        let v = &self.values;
        let at = |a: usize, b: usize, c: usize| v[(a * ny + b) * nz + c];
        let lerp = |a: f64, b: f64, w: f64| a + w * (b - a);
        let c00 = lerp(at(i, j, k), at(i, j, k + 1), t);
        let c01 = lerp(at(i, j + 1, k), at(i, j + 1, k + 1), t);
        let c10 = lerp(at(i + 1, j, k), at(i + 1, j, k + 1), t);
        let c11 = lerp(at(i + 1, j + 1, k), at(i + 1, j + 1, k + 1), t);
        lerp(lerp(c00, c01, s), lerp(c10, c11, s), r)
    }

    fn multilinear(&self, x: &[f64]) -> f64 {
        let n = self.ndim();
        let mut base = Vec::with_capacity(n);
        for (ax, &xa) in x.iter().enumerate().take(n) {
            match self.locate(ax, xa) {
                Some(p) => base.push(p),
                None => return 0.0,
            }
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << n) {
            let mut w = 1.0;
            let mut idx = Vec::with_capacity(n);
            for (ax, &(i, t)) in base.iter().enumerate() {
                if corner >> ax & 1 == 1 {
                    w *= t;
                    idx.push(i + 1);
                } else {
                    w *= 1.0 - t;
                    idx.push(i);
                }
            }
            acc += w * self.at(&idx);
        }
        acc
    }
}

/// Named, uniformly sampled parameter axes with values over their product.
#[derive(Clone, Debug, PartialEq)]
pub struct TomogramTable {
    names: Vec<String>,
    grid: ScalarField,
}

impl TomogramTable {
    pub fn new(names: Vec<String>, domain: BoxDomain, values: Vec<f64>) -> Result<Self> {
        if names.len() != domain.ndim() {
            return Err(TomoError::DimensionMismatch {
                expected: domain.ndim(),
                actual: names.len(),
            });
        }
        Ok(Self {
            names,
            grid: ScalarField::new(domain, values)?,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn axis_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn domain(&self) -> &BoxDomain {
        self.grid.domain()
    }

    pub fn values(&self) -> &[f64] {
        self.grid.values()
    }

    pub fn as_field(&self) -> &ScalarField {
        &self.grid
    }

    pub fn at(&self, idx: &[usize]) -> f64 {
        self.grid.at(idx)
    }
}

/// Analytic test functions with known integrals.
pub trait Phantom: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> f64;
    fn mass(&self) -> f64;

    fn sample(&self, domain: &BoxDomain) -> ScalarField {
        ScalarField::from_fn(domain.clone(), |x| self.eval(x))
    }
}

/// mass · N(center, covariance).
#[derive(Clone, Debug)]
pub struct Gaussian {
    center: Vec<f64>,
    precision: DMatrix<f64>,
    norm: f64,
    mass: f64,
}

impl Gaussian {
    pub fn new(center: &[f64], covariance: &DMatrix<f64>, mass: f64) -> Result<Self> {
        let n = center.len();
        if covariance.nrows() != n || covariance.ncols() != n {
            return Err(TomoError::DimensionMismatch {
                expected: n,
                actual: covariance.nrows(),
            });
        }
        let asym = (covariance - covariance.transpose()).amax();
        if asym > 1e-12 * covariance.amax().max(1.0) {
            return Err(TomoError::NotPositiveDefinite(format!(
                "asymmetric by {asym:.3e}"
            )));
        }
        let chol = covariance.clone().cholesky().ok_or_else(|| {
            let ev = covariance.clone().symmetric_eigenvalues();
            TomoError::NotPositiveDefinite(format!("eigenvalues {:?}", ev.as_slice()))
        })?;
        let det = chol.l().diagonal().iter().map(|d| d * d).product::<f64>();
        let norm = 1.0 / ((2.0 * std::f64::consts::PI).powi(n as i32) * det).sqrt();
        Ok(Self {
            center: center.to_vec(),
            precision: chol.inverse(),
            norm,
            mass,
        })
    }

    /// Isotropic Gaussian with standard deviation `sigma`.
    pub fn isotropic(center: &[f64], sigma: f64, mass: f64) -> Result<Self> {
        let n = center.len();
        Self::new(center, &(DMatrix::identity(n, n) * (sigma * sigma)), mass)
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }
}

impl Phantom for Gaussian {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let n = self.center.len();
        let mut q = 0.0;
        for i in 0..n {
            let di = x[i] - self.center[i];
            for j in 0..n {
                q += di * self.precision[(i, j)] * (x[j] - self.center[j]);
            }
        }
        self.mass * self.norm * (-0.5 * q).exp()
    }

    fn mass(&self) -> f64 {
        self.mass
    }
}

/// Sum of Gaussians.
#[derive(Clone, Debug)]
pub struct Mixture(pub Vec<Gaussian>);

impl Phantom for Mixture {
    fn dim(&self) -> usize {
        self.0.first().map_or(0, |g| g.dim())
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.0.iter().map(|g| g.eval(x)).sum()
    }

    fn mass(&self) -> f64 {
        self.0.iter().map(|g| g.mass()).sum()
    }
}

/// Compactly supported bump h·(1 − |x−c|²/r²)^4 inside the ball of radius r.
#[derive(Clone, Debug)]
pub struct Bump {
    pub center: Vec<f64>,
    pub radius: f64,
    pub height: f64,
}

impl Phantom for Bump {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let r2: f64 = x
            .iter()
            .zip(&self.center)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / (self.radius * self.radius);
        if r2 >= 1.0 {
            0.0
        } else {
            self.height * (1.0 - r2).powi(4)
        }
    }

    fn mass(&self) -> f64 {
        // ∫_ball (1-ρ²)^4 = ω_n r^n · n·B(n/2, 5)/2
        let r = self.radius;
        let pi = std::f64::consts::PI;
        match self.dim() {
            1 => self.height * r * 256.0 / 315.0,
            2 => self.height * pi * r * r / 5.0,
            3 => self.height * 4.0 * pi * r.powi(3) * 128.0 / 3465.0,
            _ => f64::NAN,
        }
    }
}

pub fn make_gaussian_phantom(
    domain: &BoxDomain,
    center: &[f64],
    covariance: &DMatrix<f64>,
    mass: f64,
) -> Result<ScalarField> {
    if center.len() != domain.ndim() {
        return Err(TomoError::DimensionMismatch {
            expected: domain.ndim(),
            actual: center.len(),
        });
    }
    if !domain.contains(center) {
        return Err(TomoError::InvalidParameter(format!(
            "phantom center {center:?} lies outside the domain"
        )));
    }
    Ok(Gaussian::new(center, covariance, mass)?.sample(domain))
}

/// ∫ f dⁿx by the composite trapezoid rule.
pub fn integrate(f: &ScalarField) -> f64 {
    let d = f.domain();
    let w: Vec<Vec<f64>> = (0..d.ndim()).map(|ax| d.trapezoid_weights(ax)).collect();
    let last = d.ndim() - 1;
    let inner = d.shape()[last];
    let mut total = 0.0;
    for (row, chunk) in f.values().chunks(inner).enumerate() {
        let mut wr = 1.0;
        let mut r = row;
        for ax in (0..last).rev() {
            let n = d.shape()[ax];
            wr *= w[ax][r % n];
            r /= n;
        }
        let s: f64 = chunk.iter().zip(&w[last]).map(|(v, wi)| v * wi).sum();
        total += wr * s;
    }
    total
}

/// ‖a − b‖₂ / ‖a‖₂ over grid nodes.
pub fn l2_relative_error(a: &ScalarField, b: &ScalarField) -> Result<f64> {
    if a.domain() != b.domain() {
        return Err(TomoError::DomainMismatch(format!(
            "{:?} vs {:?}",
            a.domain(),
            b.domain()
        )));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (x, y) in a.values().iter().zip(b.values()) {
        num += (x - y) * (x - y);
        den += x * x;
    }
    Ok(if num == 0.0 {
        0.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        (num / den).sqrt()
    })
}
