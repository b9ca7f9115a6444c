//! Tomography along diffeomorphic images of hyperplanes and along shifted quadrics.
//!
//! Forward transforms are level-set integrals on the grid of `f`
//! (see [`crate::levelset`]).
//!
//! ## Deformed inverse by change of variables
//!
//! With `x = φ(q)` and `J = |det ∂φ/∂q|`,
//! `∫ f(q) δ(λ − μ·φ(q)) dq = ∫ F(x) δ(λ − μ·x) dx` where
//! `F(x) = f(φ⁻¹x)/J(φ⁻¹x)`. The deformed tomogram of `f` is therefore the
//! affine tomogram of `F`, and the deformed inverse
//! `f(q) = ∫ dλ dⁿμ/(2π)ⁿ f̂(λ,μ) J(q) e^{i(λ−μ·φ(q))}` is `J(q)·F(φ(q))`
//! with `F` from the affine inverse. The affine inverse is evaluated directly
//! at the points `φ(q)`; for `φ = id` this is the exact computation
//! [`invert_affine`](crate::radon_affine::invert_affine) performs.
//!
//! ## Quadric inverse
//!
//! For `g_μ(q) = (q−μ)·B(q−μ) + a·(q−μ)`,
//! `f(q) = (|det B|/πⁿ) ∫ dⁿμ e^{−i g_μ(q)} L(μ)` with
//! `L(μ) = ∫ dλ f̂(λ,μ) e^{iλ}`. `L` is computed once per μ node by
//! Gauss–Legendre panels in λ, graded towards the critical value
//! `g_μ(μ − B⁻¹a/2)` where `f̂(·, μ)` has a jump (definite B) or a logarithmic
//! singularity (indefinite B). The μ integral uses tensor Gauss–Legendre
//! panels over the output box padded by `mu_pad`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Result, TomoError};
use crate::field::{BoxDomain, ScalarField};
use crate::levelset::{level_set_integrals, LevelFunction};
use crate::quadrature::Rule;
use crate::radon_affine::{affine_tomogram, FilteredProjections, QuadratureSpec};
use crate::sampler::TomogramSampler;

type VecMap = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
type ScalarMap = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Largest dimension supported by [`Diffeomorphism::compose`].
const MAX_DIM: usize = 16;

/// A map φ of Rⁿ with analytic derivative and a declared singular set.
#[derive(Clone)]
pub struct Diffeomorphism {
    pub name: String,
    pub dim: usize,
    forward: VecMap,
    inverse: Option<VecMap>,
    /// Row-major ∂φᵢ/∂qⱼ.
    derivative: VecMap,
    jacobian: ScalarMap,
    singular_distance: ScalarMap,
    /// Radius of the excluded neighbourhood of the singular set.
    pub eps: f64,
    identity: bool,
}

impl std::fmt::Debug for Diffeomorphism {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Diffeomorphism")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("eps", &self.eps)
            .finish()
    }
}

impl Diffeomorphism {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        forward: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        inverse: Option<VecMap>,
        derivative: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        jacobian: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        singular_distance: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        eps: f64,
    ) -> Self {
        Self {
            name: name.into(),
            dim,
            forward: Arc::new(forward),
            inverse,
            derivative: Arc::new(derivative),
            jacobian: Arc::new(jacobian),
            singular_distance: Arc::new(singular_distance),
            eps,
            identity: false,
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut d = Self::new(
            "identity",
            dim,
            |q, x| x.copy_from_slice(q),
            Some(Arc::new(|x: &[f64], q: &mut [f64]| q.copy_from_slice(x))),
            move |_, m| {
                m.fill(0.0);
                for i in 0..dim {
                    m[i * dim + i] = 1.0;
                }
            },
            |_| 1.0,
            |_| f64::INFINITY,
            0.0,
        );
        d.identity = true;
        d
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    pub fn forward(&self, q: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        (self.forward)(q, &mut x);
        x
    }

    pub fn forward_into(&self, q: &[f64], x: &mut [f64]) {
        (self.forward)(q, x)
    }

    pub fn inverse(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.inverse.as_ref().map(|inv| {
            let mut q = vec![0.0; self.dim];
            inv(x, &mut q);
            q
        })
    }

    pub fn has_inverse(&self) -> bool {
        self.inverse.is_some()
    }

    pub fn derivative_into(&self, q: &[f64], m: &mut [f64]) {
        (self.derivative)(q, m)
    }

    pub fn jacobian_det(&self, q: &[f64]) -> f64 {
        (self.jacobian)(q)
    }

    pub fn singular_distance(&self, q: &[f64]) -> f64 {
        (self.singular_distance)(q)
    }

    /// Whether `q` lies in the excluded neighbourhood of the singular set.
    pub fn is_singular(&self, q: &[f64]) -> bool {
        self.singular_distance(q) <= self.eps
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &Diffeomorphism) -> Result<Diffeomorphism> {
        if self.dim != inner.dim {
            return Err(TomoError::DimensionMismatch {
                expected: self.dim,
                actual: inner.dim,
            });
        }
        let n = self.dim;
        if n > MAX_DIM {
            return Err(TomoError::Unsupported(format!("composition in {n} > {MAX_DIM} dimensions")));
        }
        let (a1, b1) = (self.clone(), inner.clone());
        let (a2, b2) = (self.clone(), inner.clone());
        let (a3, b3) = (self.clone(), inner.clone());
        let (a4, b4) = (self.clone(), inner.clone());
        let inverse: Option<VecMap> = match (&self.inverse, &inner.inverse) {
            (Some(ia), Some(ib)) => {
                let (ia, ib) = (ia.clone(), ib.clone());
                Some(Arc::new(move |x: &[f64], q: &mut [f64]| {
                    let mut y = [0.0; MAX_DIM];
                    ia(x, &mut y[..n]);
                    ib(&y[..n], q);
                }))
            }
            _ => None,
        };
        Ok(Diffeomorphism::new(
            format!("{}∘{}", self.name, inner.name),
            n,
            move |q, x| {
                let mut y = [0.0; MAX_DIM];
                b1.forward_into(q, &mut y[..n]);
                a1.forward_into(&y[..n], x);
            },
            inverse,
            move |q, m| {
                let mut y = [0.0; MAX_DIM];
                b2.forward_into(q, &mut y[..n]);
                let mut da = vec![0.0; n * n];
                let mut db = vec![0.0; n * n];
                a2.derivative_into(&y[..n], &mut da);
                b2.derivative_into(q, &mut db);
                for i in 0..n {
                    for j in 0..n {
                        m[i * n + j] = (0..n).map(|k| da[i * n + k] * db[k * n + j]).sum();
                    }
                }
            },
            move |q| {
                let mut y = [0.0; MAX_DIM];
                b3.forward_into(q, &mut y[..n]);
                a3.jacobian_det(&y[..n]) * b3.jacobian_det(q)
            },
            move |q| {
                let mut y = [0.0; MAX_DIM];
                b4.forward_into(q, &mut y[..n]);
                b4.singular_distance(q).min(a4.singular_distance(&y[..n]))
            },
            self.eps.max(inner.eps),
        ))
    }
}

/// `(q, p) ↦ (q, p)/(q² + p²)`, Jacobian `1/(q²+p²)²`, singular at the origin.
pub fn conformal_inversion() -> Diffeomorphism {
    let inv = |q: &[f64], x: &mut [f64]| {
        let r2 = q[0] * q[0] + q[1] * q[1];
        x[0] = q[0] / r2;
        x[1] = q[1] / r2;
    };
    Diffeomorphism::new(
        "conformal_inversion",
        2,
        inv,
        Some(Arc::new(inv)),
        |q, m| {
            let (a, b) = (q[0], q[1]);
            let r2 = a * a + b * b;
            let r4 = r2 * r2;
            m[0] = (b * b - a * a) / r4;
            m[1] = -2.0 * a * b / r4;
            m[2] = -2.0 * a * b / r4;
            m[3] = (a * a - b * b) / r4;
        },
        |q| {
            let r2 = q[0] * q[0] + q[1] * q[1];
            1.0 / (r2 * r2)
        },
        |q| q[0].hypot(q[1]),
        1e-3,
    )
}

/// `(q, p) ↦ (1/q, p)`, Jacobian `1/q²`, singular on `q = 0`.
pub fn axis_inversion() -> Diffeomorphism {
    let map = |q: &[f64], x: &mut [f64]| {
        x[0] = 1.0 / q[0];
        x[1] = q[1];
    };
    Diffeomorphism::new(
        "axis_inversion",
        2,
        map,
        Some(Arc::new(map)),
        |q, m| {
            m[0] = -1.0 / (q[0] * q[0]);
            m[1] = 0.0;
            m[2] = 0.0;
            m[3] = 1.0;
        },
        |q| 1.0 / (q[0] * q[0]),
        |q| q[0].abs(),
        1e-3,
    )
}

/// `(q₁..qₙ, p₁..pₙ) ↦ (q, q⊙p)`, Jacobian `∏|qⱼ|`, singular on every `qⱼ = 0`.
pub fn bertrand(n: usize) -> Result<Diffeomorphism> {
    if n == 0 || 2 * n > MAX_DIM {
        return Err(TomoError::InvalidParameter(format!("bertrand(n) needs 1 ≤ n ≤ {}", MAX_DIM / 2)));
    }
    Ok(Diffeomorphism::new(
        format!("bertrand({n})"),
        2 * n,
        move |q, x| {
            for j in 0..n {
                x[j] = q[j];
                x[n + j] = q[j] * q[n + j];
            }
        },
        Some(Arc::new(move |x: &[f64], q: &mut [f64]| {
            for j in 0..n {
                q[j] = x[j];
                q[n + j] = x[n + j] / x[j];
            }
        })),
        move |q, m| {
            let d = 2 * n;
            m.fill(0.0);
            for j in 0..n {
                m[j * d + j] = 1.0;
                m[(n + j) * d + j] = q[n + j];
                m[(n + j) * d + n + j] = q[j];
            }
        },
        move |q| q[..n].iter().map(|v| v.abs()).product(),
        move |q| q[..n].iter().fold(f64::INFINITY, |m, v| m.min(v.abs())),
        1e-3,
    ))
}

/// The built-in maps: conformal inversion, axis inversion and planar Bertrand.
pub fn builtin_diffeos() -> Vec<Diffeomorphism> {
    vec![
        conformal_inversion(),
        axis_inversion(),
        bertrand(1).expect("n = 1 is valid"),
    ]
}

pub fn diffeo_by_name(name: &str) -> Result<Diffeomorphism> {
    match name {
        "line" | "identity" => Ok(Diffeomorphism::identity(2)),
        "circle" | "conformal_inversion" => Ok(conformal_inversion()),
        "hyperbola" | "axis_inversion" => Ok(axis_inversion()),
        "bertrand" => bertrand(1),
        other => Err(TomoError::InvalidParameter(format!("unknown geometry {other:?}"))),
    }
}

/// The curve `λ(q² + p²) = μq + νp`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CircleGeometry {
    /// Circle through the origin.
    Circle { center: [f64; 2], radius: f64 },
    /// λ = 0: the line through the origin with the given normal.
    Line { normal: [f64; 2] },
}

pub fn circle_geometry(lambda: f64, mu: f64, nu: f64) -> Result<CircleGeometry> {
    if mu == 0.0 && nu == 0.0 {
        return Err(TomoError::InvalidParameter("(mu, nu) must not both vanish".into()));
    }
    if lambda == 0.0 {
        return Ok(CircleGeometry::Line { normal: [mu, nu] });
    }
    let center = [mu / (2.0 * lambda), nu / (2.0 * lambda)];
    Ok(CircleGeometry::Circle {
        center,
        radius: center[0].hypot(center[1]),
    })
}

struct ProjectedLevel<'a> {
    phi: &'a Diffeomorphism,
    mu: [f64; 2],
}

impl LevelFunction for ProjectedLevel<'_> {
    fn value(&self, q: [f64; 2]) -> f64 {
        let mut x = [0.0; 2];
        self.phi.forward_into(&q, &mut x);
        self.mu[0] * x[0] + self.mu[1] * x[1]
    }

    fn grad(&self, q: [f64; 2]) -> [f64; 2] {
        let mut m = [0.0; 4];
        self.phi.derivative_into(&q, &mut m);
        [
            self.mu[0] * m[0] + self.mu[1] * m[2],
            self.mu[0] * m[1] + self.mu[1] * m[3],
        ]
    }
}

fn check_deformed(f: &ScalarField, phi: &Diffeomorphism, mu: &[f64]) -> Result<()> {
    if f.ndim() != 2 || phi.dim != 2 {
        return Err(TomoError::Unsupported(format!(
            "level-set tomograms are planar (field {}-D, map {}-D)",
            f.ndim(),
            phi.dim
        )));
    }
    if mu.len() != 2 {
        return Err(TomoError::DimensionMismatch {
            expected: 2,
            actual: mu.len(),
        });
    }
    if !(mu[0] != 0.0 || mu[1] != 0.0) || !mu.iter().all(|m| m.is_finite()) {
        return Err(TomoError::InvalidParameter(format!("mu must be nonzero and finite, got {mu:?}")));
    }
    Ok(())
}

/// `∫ f(q) δ(λ − μ·φ(q)) d²q` for several λ.
pub fn deformed_tomogram_batch(f: &ScalarField, phi: &Diffeomorphism, lambdas: &[f64], mu: &[f64]) -> Result<Vec<f64>> {
    check_deformed(f, phi, mu)?;
    let g = ProjectedLevel { phi, mu: [mu[0], mu[1]] };
    Ok(level_set_integrals(f, &g, lambdas))
}

/// `∫ f(q) δ(λ − μ·φ(q)) d²q`.
pub fn deformed_tomogram(f: &ScalarField, phi: &Diffeomorphism, lambda: f64, mu: &[f64]) -> Result<f64> {
    Ok(deformed_tomogram_batch(f, phi, &[lambda], mu)?[0])
}

/// The same tomogram evaluated in `x = φ(q)` coordinates: the affine
/// tomogram of `F(x) = f(φ⁻¹x)/J(φ⁻¹x)` resampled on `x_domain`.
pub fn deformed_tomogram_xspace(
    f: &ScalarField,
    phi: &Diffeomorphism,
    lambda: f64,
    mu: &[f64],
    x_domain: &BoxDomain,
) -> Result<f64> {
    let big_f = pushforward(f, phi, x_domain)?;
    affine_tomogram(&big_f, lambda, mu)
}

/// `F(x) = f(φ⁻¹x)/J(φ⁻¹x)` on `x_domain`.
pub fn pushforward(f: &ScalarField, phi: &Diffeomorphism, x_domain: &BoxDomain) -> Result<ScalarField> {
    if !phi.has_inverse() {
        return Err(TomoError::Unsupported(format!("{} has no inverse", phi.name)));
    }
    if x_domain.ndim() != phi.dim || f.ndim() != phi.dim {
        return Err(TomoError::DimensionMismatch {
            expected: phi.dim,
            actual: x_domain.ndim(),
        });
    }
    Ok(ScalarField::from_fn(x_domain.clone(), |x| {
        let q = phi.inverse(x).expect("checked above");
        if phi.is_singular(&q) {
            return 0.0;
        }
        let v = f.interpolate(&q);
        if v == 0.0 {
            0.0
        } else {
            v / phi.jacobian_det(&q)
        }
    }))
}

/// Deformed tomogram of a gridded field, batched over λ.
pub struct DeformedSampler<'a> {
    pub field: &'a ScalarField,
    pub phi: &'a Diffeomorphism,
}

impl TomogramSampler for DeformedSampler<'_> {
    fn sample(&self, lambda: f64, mu: &[f64]) -> f64 {
        deformed_tomogram(self.field, self.phi, lambda, mu).unwrap_or(f64::NAN)
    }

    fn sample_lambdas(&self, lambdas: &[f64], mu: &[f64]) -> Vec<f64> {
        deformed_tomogram_batch(self.field, self.phi, lambdas, mu)
            .unwrap_or_else(|_| vec![f64::NAN; lambdas.len()])
    }
}

/// Affine quadrature covering the image `φ(out_domain)`: the λ reach is the
/// largest `|φ(q)|` over the nodes and the λ step matches the node count.
pub fn image_quadrature(phi: &Diffeomorphism, out_domain: &BoxDomain, n_angles: usize) -> QuadratureSpec {
    let mut reach: f64 = 0.0;
    for k in 0..out_domain.len() {
        let q = out_domain.node(k);
        if phi.is_singular(&q) {
            continue;
        }
        let x = phi.forward(&q);
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r.is_finite() {
            reach = reach.max(r);
        }
    }
    let n = *out_domain.shape().iter().max().unwrap_or(&2);
    QuadratureSpec {
        n_angles,
        n_polar: n_angles / 2,
        lambda_step: 2.0 * reach / (n - 1) as f64,
        lambda_max: reach,
    }
}

fn check_singular(phi: &Diffeomorphism, out_domain: &BoxDomain) -> Result<()> {
    for k in 0..out_domain.len() {
        let q = out_domain.node(k);
        if phi.is_singular(&q) {
            return Err(TomoError::SingularSet(format!(
                "node {q:?} is within {} of the singular set of {}",
                phi.eps, phi.name
            )));
        }
    }
    Ok(())
}

/// `f(q) = ∫ dλ dⁿμ/(2π)ⁿ f̂(λ,μ) J(q) e^{i(λ−μ·φ(q))}`.
pub fn deformed_invert<S: TomogramSampler + ?Sized>(
    sampler: &S,
    phi: &Diffeomorphism,
    out_domain: &BoxDomain,
    quad: &QuadratureSpec,
) -> Result<ScalarField> {
    if out_domain.ndim() != phi.dim {
        return Err(TomoError::DimensionMismatch {
            expected: phi.dim,
            actual: out_domain.ndim(),
        });
    }
    check_singular(phi, out_domain)?;
    let fp = FilteredProjections::build(sampler, phi.dim, quad)?;
    if phi.is_identity() {
        return Ok(ScalarField::from_fn(out_domain.clone(), |x| fp.eval(x)));
    }
    Ok(ScalarField::from_fn(out_domain.clone(), |q| {
        let x = phi.forward(q);
        phi.jacobian_det(q) * fp.eval(&x)
    }))
}

/// `∫ f(q,p) δ(λ − ξq − νqp) dq dp` on the planar phase grid.
pub fn bertrand_tomogram(f: &ScalarField, xi: f64, nu: f64, lambda: f64) -> Result<f64> {
    if nu == 0.0 {
        return Err(TomoError::InvalidParameter("bertrand tomogram needs nu ≠ 0".into()));
    }
    warn_if_crosses_axis(f.domain());
    deformed_tomogram(f, &bertrand(1)?, lambda, &[xi, nu])
}

/// Inverse of the planar Bertrand transform with weight `|q|`.
pub fn bertrand_invert<S: TomogramSampler + ?Sized>(
    sampler: &S,
    out_domain: &BoxDomain,
    quad: &QuadratureSpec,
) -> Result<ScalarField> {
    warn_if_crosses_axis(out_domain);
    deformed_invert(sampler, &bertrand(1)?, out_domain, quad)
}

fn warn_if_crosses_axis(d: &BoxDomain) {
    if d.ndim() >= 1 && d.lo()[0] <= 0.0 && d.hi()[0] >= 0.0 {
        log::warn!("support crosses q = 0, the singular set of the Bertrand map");
    }
}

/// `g(q) = (q−μ)·B(q−μ) + a·(q−μ)` with symmetric, non-singular `B`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadricSpec {
    b: DMatrix<f64>,
    a: DVector<f64>,
    det: f64,
    b_inv: DMatrix<f64>,
}

impl QuadricSpec {
    pub fn new(b: DMatrix<f64>, a: DVector<f64>) -> Result<Self> {
        let n = b.nrows();
        if b.ncols() != n || a.len() != n || n == 0 {
            return Err(TomoError::DimensionMismatch {
                expected: n,
                actual: a.len(),
            });
        }
        let scale = b.amax().max(1e-300);
        if (&b - b.transpose()).amax() > 1e-12 * scale {
            return Err(TomoError::InvalidParameter("B must be symmetric".into()));
        }
        let det = b.determinant();
        if !(det.abs() > 1e-12 * scale.powi(n as i32)) {
            return Err(TomoError::InvalidParameter(format!("B must be non-singular (det = {det:.3e})")));
        }
        let b_inv = b.clone().try_inverse().ok_or_else(|| TomoError::InvalidParameter("B is not invertible".into()))?;
        Ok(Self { b, a, det, b_inv })
    }

    pub fn dim(&self) -> usize {
        self.b.nrows()
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn a(&self) -> &DVector<f64> {
        &self.a
    }

    pub fn value(&self, q: &[f64], mu: &[f64]) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            let di = q[i] - mu[i];
            acc += self.a[i] * di;
            for j in 0..n {
                acc += di * self.b[(i, j)] * (q[j] - mu[j]);
            }
        }
        acc
    }

    /// The critical point `μ − B⁻¹a/2` of `g_μ`.
    pub fn critical_point(&self, mu: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| mu[i] - 0.5 * (0..n).map(|j| self.b_inv[(i, j)] * self.a[j]).sum::<f64>())
            .collect()
    }

    fn level(&self, mu: &[f64]) -> QuadricLevel {
        QuadricLevel {
            b: [self.b[(0, 0)], self.b[(0, 1)], self.b[(1, 0)], self.b[(1, 1)]],
            a: [self.a[0], self.a[1]],
            mu: [mu[0], mu[1]],
        }
    }
}

struct QuadricLevel {
    b: [f64; 4],
    a: [f64; 2],
    mu: [f64; 2],
}

impl LevelFunction for QuadricLevel {
    fn value(&self, q: [f64; 2]) -> f64 {
        let d = [q[0] - self.mu[0], q[1] - self.mu[1]];
        d[0] * (self.b[0] * d[0] + self.b[1] * d[1]) + d[1] * (self.b[2] * d[0] + self.b[3] * d[1]) + self.a[0] * d[0] + self.a[1] * d[1]
    }

    fn grad(&self, q: [f64; 2]) -> [f64; 2] {
        let d = [q[0] - self.mu[0], q[1] - self.mu[1]];
        [
            2.0 * (self.b[0] * d[0] + self.b[1] * d[1]) + self.a[0],
            2.0 * (self.b[2] * d[0] + self.b[3] * d[1]) + self.a[1],
        ]
    }
}

fn check_quadric(f: &ScalarField, spec: &QuadricSpec, mu: &[f64]) -> Result<()> {
    if f.ndim() != 2 || spec.dim() != 2 {
        return Err(TomoError::Unsupported("quadric tomograms are planar".into()));
    }
    if mu.len() != 2 {
        return Err(TomoError::DimensionMismatch {
            expected: 2,
            actual: mu.len(),
        });
    }
    Ok(())
}

/// `∫ f(q) δ(λ − g_μ(q)) d²q` for several λ.
pub fn quadric_tomogram_batch(f: &ScalarField, spec: &QuadricSpec, lambdas: &[f64], mu: &[f64]) -> Result<Vec<f64>> {
    check_quadric(f, spec, mu)?;
    Ok(level_set_integrals(f, &spec.level(mu), lambdas))
}

/// `∫ f(q) δ(λ − (q−μ)·B(q−μ) − a·(q−μ)) d²q`.
pub fn quadric_tomogram(f: &ScalarField, spec: &QuadricSpec, lambda: f64, mu: &[f64]) -> Result<f64> {
    Ok(quadric_tomogram_batch(f, spec, &[lambda], mu)?[0])
}

pub struct QuadricSampler<'a> {
    pub field: &'a ScalarField,
    pub spec: &'a QuadricSpec,
}

impl TomogramSampler for QuadricSampler<'_> {
    fn sample(&self, lambda: f64, mu: &[f64]) -> f64 {
        quadric_tomogram(self.field, self.spec, lambda, mu).unwrap_or(f64::NAN)
    }

    fn sample_lambdas(&self, lambdas: &[f64], mu: &[f64]) -> Vec<f64> {
        quadric_tomogram_batch(self.field, self.spec, lambdas, mu)
            .unwrap_or_else(|_| vec![f64::NAN; lambdas.len()])
    }
}

/// Discretization of the quadric inverse.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadricQuadrature {
    /// Padding of the output box that defines the μ box.
    pub mu_pad: f64,
    /// Width of the Gauss–Legendre panels in each μ coordinate.
    pub mu_panel: f64,
    pub mu_order: usize,
    /// Largest λ panel width away from the critical value.
    pub lambda_panel: f64,
    pub lambda_order: usize,
    /// Number of halvings of the λ panels towards the critical value.
    pub grading_levels: usize,
    /// Optional damping ladder ε for `e^{−ε|μ − c_q|²}`; the result is
    /// extrapolated linearly to ε = 0. Empty means no damping.
    pub damping: Vec<f64>,
}

impl Default for QuadricQuadrature {
    fn default() -> Self {
        Self {
            mu_pad: 3.0,
            mu_panel: 2.4,
            mu_order: 6,
            lambda_panel: 4.0,
            lambda_order: 8,
            grading_levels: 10,
            damping: Vec::new(),
        }
    }
}

impl QuadricQuadrature {
    pub const MIN_ORDER: usize = 2;

    fn validate(&self) -> Result<()> {
        let ok = self.mu_pad >= 0.0
            && self.mu_panel > 0.0
            && self.lambda_panel > 0.0
            && self.mu_order >= Self::MIN_ORDER
            && self.lambda_order >= Self::MIN_ORDER
            && self.damping.iter().all(|e| *e > 0.0)
            && self.damping.len() != 1;
        if ok {
            Ok(())
        } else {
            Err(TomoError::QuadratureBudget(format!(
                "{self:?}: widths must be positive, orders ≥ {}, damping empty or ≥ 2 positive values",
                Self::MIN_ORDER
            )))
        }
    }
}

/// Result of [`quadric_invert_with_report`].
#[derive(Clone, Debug)]
pub struct QuadricReport {
    pub field: ScalarField,
    pub mu_nodes: usize,
    pub lambda_nodes: usize,
    /// max |L| on the outermost μ panels divided by max |L|: a proxy for
    /// the truncation error of the μ box.
    pub truncation_estimate: f64,
}

/// `f(q) = (|det B|/πⁿ) ∫ dⁿμ dλ f̂(λ,μ) e^{i(λ − g_μ(q))}`.
pub fn quadric_invert<S: TomogramSampler + ?Sized>(
    sampler: &S,
    spec: &QuadricSpec,
    out_domain: &BoxDomain,
    quad: &QuadricQuadrature,
) -> Result<ScalarField> {
    Ok(quadric_invert_with_report(sampler, spec, out_domain, quad)?.field)
}

pub fn quadric_invert_with_report<S: TomogramSampler + ?Sized>(
    sampler: &S,
    spec: &QuadricSpec,
    out_domain: &BoxDomain,
    quad: &QuadricQuadrature,
) -> Result<QuadricReport> {
    if spec.dim() != 2 || out_domain.ndim() != 2 {
        return Err(TomoError::Unsupported("quadric inverse is planar".into()));
    }
    quad.validate()?;
    let axes: Vec<Rule> = (0..2)
        .map(|ax| {
            let (a, b) = (out_domain.lo()[ax] - quad.mu_pad, out_domain.hi()[ax] + quad.mu_pad);
            let panels = ((b - a) / quad.mu_panel).ceil().max(1.0) as usize;
            Rule::composite(a, b, panels, quad.mu_order)
        })
        .collect();
    let mut mus = Vec::with_capacity(axes[0].len() * axes[1].len());
    for (x, wx) in axes[0].nodes.iter().zip(&axes[0].weights) {
        for (y, wy) in axes[1].nodes.iter().zip(&axes[1].weights) {
            mus.push(([*x, *y], wx * wy));
        }
    }
    let out_nodes: Vec<Vec<f64>> = (0..out_domain.len()).map(|k| out_domain.node(k)).collect();

    let per_mu: Vec<(Complex64, usize)> = mus
        .par_iter()
        .map(|(mu, _)| {
            let (mut gmin, mut gmax) = (f64::INFINITY, f64::NEG_INFINITY);
            for q in &out_nodes {
                let g = spec.value(q, mu);
                gmin = gmin.min(g);
                gmax = gmax.max(g);
            }
            let c = spec.critical_point(mu);
            let lc = spec.value(&c, mu);
            if out_domain.contains(&c) {
                gmin = gmin.min(lc);
                gmax = gmax.max(lc);
            }
            let margin = 1e-9 * (gmax - gmin).abs().max(1.0);
            let rule = Rule::graded(
                gmin - margin,
                gmax + margin,
                lc,
                quad.lambda_panel,
                quad.grading_levels,
                quad.lambda_order,
            );
            let vals = sampler.sample_lambdas(&rule.nodes, mu);
            let mut l = Complex64::new(0.0, 0.0);
            for ((lam, w), v) in rule.nodes.iter().zip(&rule.weights).zip(&vals) {
                l += Complex64::from_polar(w * v, *lam);
            }
            (l, rule.len())
        })
        .collect();
    if per_mu.iter().any(|(l, _)| !l.re.is_finite() || !l.im.is_finite()) {
        return Err(TomoError::InvalidParameter("sampler returned non-finite values".into()));
    }

    let lmax = per_mu.iter().fold(0.0f64, |m, (l, _)| m.max(l.norm()));
    let edge_panel = |v: f64, r: &Rule, ax: usize| {
        let a = out_domain.lo()[ax] - quad.mu_pad;
        let b = out_domain.hi()[ax] + quad.mu_pad;
        let w = (b - a) / ((b - a) / quad.mu_panel).ceil().max(1.0);
        let _ = r;
        v < a + w || v > b - w
    };
    let mut edge_max: f64 = 0.0;
    for ((mu, _), (l, _)) in mus.iter().zip(&per_mu) {
        if edge_panel(mu[0], &axes[0], 0) || edge_panel(mu[1], &axes[1], 1) {
            edge_max = edge_max.max(l.norm());
        }
    }
    let truncation_estimate = if lmax > 0.0 { edge_max / lmax } else { 0.0 };
    if truncation_estimate > 1e-3 {
        log::warn!(
            "quadric inverse: μ box may be too small, boundary |L| / max |L| = {truncation_estimate:.2e}"
        );
    }

    let shift = {
        let c0 = spec.critical_point(&[0.0, 0.0]);
        [-c0[0], -c0[1]]
    };
    let pref = spec.det().abs() / PI.powi(2);
    let eval = |q: &[f64], eps: f64| {
        let mut acc = Complex64::new(0.0, 0.0);
        for ((mu, w), (l, _)) in mus.iter().zip(&per_mu) {
            let mut weight = *w;
            if eps > 0.0 {
                let dx = mu[0] - q[0] - shift[0];
                let dy = mu[1] - q[1] - shift[1];
                weight *= (-eps * (dx * dx + dy * dy)).exp();
            }
            acc += l * Complex64::from_polar(weight, -spec.value(q, mu));
        }
        pref * acc.re
    };
    let field = if quad.damping.is_empty() {
        ScalarField::from_fn(out_domain.clone(), |q| eval(q, 0.0))
    } else {
        // linear extrapolation to ε = 0 through the two smallest rungs
        let mut eps = quad.damping.clone();
        eps.sort_by(f64::total_cmp);
        let (e1, e2) = (eps[0], eps[1]);
        ScalarField::from_fn(out_domain.clone(), |q| {
            let (f1, f2) = (eval(q, e1), eval(q, e2));
            (e2 * f1 - e1 * f2) / (e2 - e1)
        })
    };
    Ok(QuadricReport {
        field,
        mu_nodes: mus.len(),
        lambda_nodes: per_mu.iter().map(|(_, n)| n).sum(),
        truncation_estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Gaussian, Phantom};

    #[test]
    fn builtin_values() {
        let c = conformal_inversion();
        assert_eq!(c.forward(&[1.0, 0.0]), vec![1.0, 0.0]);
        assert_eq!(c.forward(&[2.0, 0.0]), vec![0.5, 0.0]);
        assert!((c.jacobian_det(&[2.0, 0.0]) - 1.0 / 16.0).abs() < 1e-15);
        let a = axis_inversion();
        assert_eq!(a.forward(&[2.0, 3.0]), vec![0.5, 3.0]);
        assert!((a.jacobian_det(&[2.0, 3.0]) - 0.25).abs() < 1e-15);
        let b = bertrand(1).unwrap();
        assert_eq!(b.forward(&[2.0, 3.0]), vec![2.0, 6.0]);
        assert_eq!(b.jacobian_det(&[-2.0, 3.0]), 2.0);
        assert_eq!(builtin_diffeos().len(), 3);
    }

    #[test]
    fn jacobians_match_derivative_determinants() {
        let q = [0.7, -1.3];
        for phi in builtin_diffeos() {
            let mut m = [0.0; 4];
            phi.derivative_into(&q, &mut m);
            let det = (m[0] * m[3] - m[1] * m[2]).abs();
            assert!((det - phi.jacobian_det(&q)).abs() < 1e-12, "{}", phi.name);
            // finite-difference check of the derivative
            let h = 1e-6;
            for j in 0..2 {
                let mut qp = q;
                let mut qm = q;
                qp[j] += h;
                qm[j] -= h;
                let (xp, xm) = (phi.forward(&qp), phi.forward(&qm));
                for i in 0..2 {
                    let fd = (xp[i] - xm[i]) / (2.0 * h);
                    assert!((fd - m[i * 2 + j]).abs() < 1e-6, "{} d{i}/d{j}", phi.name);
                }
            }
            let back = phi.inverse(&phi.forward(&q)).unwrap();
            assert!((back[0] - q[0]).abs() < 1e-12 && (back[1] - q[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn bertrand_in_four_dimensions() {
        let b = bertrand(2).unwrap();
        let q = [1.5, -2.0, 0.3, 0.7];
        let y = b.forward(&q);
        for (a, w) in y.iter().zip([1.5, -2.0, 0.45, -1.4]) {
            assert!((a - w).abs() < 1e-15);
        }
        assert!((b.jacobian_det(&q) - 3.0).abs() < 1e-15);
        assert!(b.is_singular(&[0.0, 1.0, 1.0, 1.0]));
    }

    #[test]
    fn composition() {
        let c = conformal_inversion();
        let id = c.compose(&c).unwrap();
        let q = [0.4, 1.1];
        let x = id.forward(&q);
        assert!((x[0] - q[0]).abs() < 1e-14 && (x[1] - q[1]).abs() < 1e-14);
        assert!((id.jacobian_det(&q) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn circle_geometry_examples() {
        assert_eq!(
            circle_geometry(1.0, 2.0, 0.0).unwrap(),
            CircleGeometry::Circle {
                center: [1.0, 0.0],
                radius: 1.0
            }
        );
        assert!(matches!(circle_geometry(0.0, 1.0, 1.0).unwrap(), CircleGeometry::Line { .. }));
        assert_eq!(
            circle_geometry(0.5, 0.0, 1.0).unwrap(),
            CircleGeometry::Circle {
                center: [0.0, 1.0],
                radius: 1.0
            }
        );
        assert!(circle_geometry(1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn identity_reduces_to_affine() {
        let d = BoxDomain::centered(4.0, 81, 2).unwrap();
        let f = Gaussian::isotropic(&[0.4, 0.1], 0.8, 1.0).unwrap().sample(&d);
        let id = Diffeomorphism::identity(2);
        for &(l, m, n) in &[(0.3, 1.0, 0.2), (-0.8, -0.4, 1.3), (1.1, 2.0, -1.0)] {
            let a = affine_tomogram(&f, l, &[m, n]).unwrap();
            let b = deformed_tomogram(&f, &id, l, &[m, n]).unwrap();
            assert!((a - b).abs() <= 1e-6 * a.abs(), "{a} vs {b}");
        }
        assert!(deformed_tomogram(&f, &id, 0.0, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn singular_out_domain_rejected() {
        let out = BoxDomain::centered(2.0, 21, 2).unwrap();
        let zero = |_: f64, _: &[f64]| 0.0;
        let quad = QuadratureSpec::for_domain(&out);
        assert!(matches!(
            deformed_invert(&zero, &conformal_inversion(), &out, &quad),
            Err(TomoError::SingularSet(_))
        ));
    }

    #[test]
    fn quadric_spec_validation() {
        assert!(QuadricSpec::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]), DVector::zeros(2)).is_err());
        assert!(QuadricSpec::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]), DVector::zeros(2)).is_err());
        let s = QuadricSpec::new(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0])), DVector::from_vec(vec![0.2, 0.4]))
            .unwrap();
        assert_eq!(s.critical_point(&[0.0, 0.0]), vec![-0.1, 0.2]);
    }

    #[test]
    fn quadric_circle_of_radial_gaussian() {
        let d = BoxDomain::centered(6.0, 241, 2).unwrap();
        let f = ScalarField::from_fn(d, |x| (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp());
        let s = QuadricSpec::new(DMatrix::identity(2, 2), DVector::zeros(2)).unwrap();
        for r in [0.5f64, 1.0, 2.0] {
            let l = r * r;
            let v = quadric_tomogram(&f, &s, l, &[0.0, 0.0]).unwrap();
            // bilinear interpolation of f limits accuracy to ~h²/8
            assert!((v - PI * (-l / 2.0).exp()).abs() < 1e-3 * v, "{r}: {v}");
        }
        assert_eq!(quadric_tomogram(&f, &s, -0.5, &[0.0, 0.0]).unwrap(), 0.0);
    }
}
