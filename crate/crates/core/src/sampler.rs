//! Tomogram samplers: anything that can evaluate f̂(λ, μ).

use std::f64::consts::PI;

use crate::error::{Result, TomoError};
use crate::field::TomogramTable;
use crate::radon_affine::canonical_line;

/// A tomogram evaluated on demand at (λ, μ).
pub trait TomogramSampler: Sync {
    fn sample(&self, lambda: f64, mu: &[f64]) -> f64;

    /// Values at several λ for one μ. Implementations may share work across λ.
    fn sample_lambdas(&self, lambdas: &[f64], mu: &[f64]) -> Vec<f64> {
        lambdas.iter().map(|&l| self.sample(l, mu)).collect()
    }
}

impl<F> TomogramSampler for F
where
    F: Fn(f64, &[f64]) -> f64 + Sync,
{
    fn sample(&self, lambda: f64, mu: &[f64]) -> f64 {
        self(lambda, mu)
    }
}

/// Counts evaluations of an inner sampler (used by budget reports and tests).
pub struct Counting<S> {
    pub inner: S,
    pub calls: std::sync::atomic::AtomicUsize,
}

impl<S: TomogramSampler> Counting<S> {
    pub fn new(inner: S) -> Self {
        Self {
            inner,
            calls: Default::default(),
        }
    }

    pub fn count(&self) -> usize {
        self.calls.load(std::sync::atomic::Ordering::Relaxed)
    }
}

impl<S: TomogramSampler> TomogramSampler for Counting<S> {
    fn sample(&self, lambda: f64, mu: &[f64]) -> f64 {
        self.calls.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        self.inner.sample(lambda, mu)
    }

    fn sample_lambdas(&self, lambdas: &[f64], mu: &[f64]) -> Vec<f64> {
        self.calls
            .fetch_add(lambdas.len(), std::sync::atomic::Ordering::Relaxed);
        self.inner.sample_lambdas(lambdas, mu)
    }
}

/// A planar tomogram stored on a `["lambda", "theta"]` table with
/// θ_j = jπ/N, extended to any μ ≠ 0 by `f̂(λ, μ) = f̂(λ/|μ|, μ/|μ|)/|μ|`
/// and `f̂(−λ, −n) = f̂(λ, n)`. Bilinear in (λ, θ), zero outside the λ range.
pub struct TableSampler<'a> {
    table: &'a TomogramTable,
    d0: f64,
    dd: f64,
    nd: usize,
    nt: usize,
}

impl<'a> TableSampler<'a> {
    pub fn new(table: &'a TomogramTable) -> Result<Self> {
        if table.names() != ["lambda", "theta"] {
            return Err(TomoError::Header(format!(
                "expected axes [\"lambda\", \"theta\"], got {:?}",
                table.names()
            )));
        }
        let d = table.domain();
        let (nd, nt) = (d.shape()[0], d.shape()[1]);
        let dtheta = PI / nt as f64;
        if d.lo()[1].abs() > 1e-9 || (d.spacing(1) - dtheta).abs() > 1e-9 * dtheta {
            return Err(TomoError::Header("theta axis must be jπ/N, j < N".into()));
        }
        Ok(Self {
            table,
            d0: d.lo()[0],
            dd: d.spacing(0),
            nd,
            nt,
        })
    }

    /// Number of angles N.
    pub fn n_angles(&self) -> usize {
        self.nt
    }

    pub fn lambda_step(&self) -> f64 {
        self.dd
    }

    /// Largest |λ| covered on both sides of zero.
    pub fn lambda_reach(&self) -> f64 {
        (-self.d0).min(self.d0 + self.dd * (self.nd - 1) as f64)
    }

    fn column(&self, j: usize, d: f64) -> f64 {
        // θ = π is θ = 0 with the orientation reversed
        let (j, d) = if j == self.nt { (0, -d) } else { (j, d) };
        let u = (d - self.d0) / self.dd;
        if !(u >= 0.0) || u > (self.nd - 1) as f64 {
            return 0.0;
        }
        let i = (u as usize).min(self.nd - 2);
        let w = u - i as f64;
        self.table.at(&[i, j]) * (1.0 - w) + self.table.at(&[i + 1, j]) * w
    }
}

impl TomogramSampler for TableSampler<'_> {
    fn sample(&self, lambda: f64, mu: &[f64]) -> f64 {
        if mu.len() != 2 {
            return f64::NAN;
        }
        let (d, theta, r) = canonical_line(lambda, mu[0], mu[1]);
        if !(r > 0.0) {
            return f64::NAN;
        }
        let u = theta / (PI / self.nt as f64);
        let j = (u as usize).min(self.nt - 1);
        let w = u - j as f64;
        (self.column(j, d) * (1.0 - w) + self.column(j + 1, d) * w) / r
    }
}
