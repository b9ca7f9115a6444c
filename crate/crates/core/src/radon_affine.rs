//! Radon transforms along lines and hyperplanes, and their inverses.
//!
//! Conventions: a line is `d = q cosθ + p sinθ` with signed `d`, so `(d, θ)`
//! and `(−d, θ+π)` name the same line. The affine tomogram
//! `f̂(λ, μ) = ∫ f(x) δ(λ − μ·x) dⁿx` equals the hyperplane integral at
//! distance `λ/|μ|` along `μ/|μ|`, divided by `|μ|`.
//!
//! Forward line integrals are exact for the bilinear interpolant of the grid:
//! the line is split where it crosses grid lines and each piece, on which the
//! interpolant is a quadratic in arc length, is integrated with Simpson's rule.
//!
//! ## Inversion paths
//!
//! *Tangent circles.* With `F(r)` the average of `f̂` over lines tangent to the
//! circle of radius `r` about `x`, `f(x) = −(1/π) ∫₀^∞ F'(r)/r dr`. `F` is even
//! in `r`, so `F'(r)/r → F''(0)` at the origin. On `r_k = kΔ` (Δ the sinogram
//! step) the derivative is a central difference and the integral a trapezoid
//! rule whose first node uses `F''(0) ≈ 2(F₁ − F₀)/Δ²`; this covers `[0, Δ]`
//! without dropping it. The result is `I = Σ a_k F_k` with
//! `a₀ = −3/(2Δ)`, `a₁ = 3/(4Δ)`, `a_k = 1/((k²−1)Δ)` for `k ≥ 2`. Since `F_k`
//! is itself a θ-average of sinogram samples shifted by `±kΔ`, the whole
//! scheme collapses to one convolution per angle followed by backprojection,
//! which is exactly equal to the per-point formula because linear
//! interpolation commutes with whole-step shifts.
//!
//! *Affine Fourier inverse.* Writing `μ = ρω` and using homogeneity
//! `f̂(λ, ρω) = f̂(λ/ρ, ω)/ρ`, the λ-integral becomes the 1-D Fourier transform
//! of the projection `p_ω(t) = f̂(t, ω)`, and
//! `f(x) = (2π)⁻ⁿ ∫_{S^{n−1}} dω ∫₀^∞ ρ^{n−1} p̃_ω(ρ) e^{−iρ ω·x} dρ`.
//! Folding antipodal directions gives `(1/4π²) ∫₀^π dθ (|ρ| p̃)ˇ(x·ω)` in the
//! plane and `−(1/4π²) ∫_{hemisphere} p''_ω(x·ω) dω` in space. Both kernels
//! are band-limited at `ρ ≤ π/Δ` and sampled on the λ grid:
//!
//! - `|ρ|`: `h(0) = π²/Δ²`, `h(mΔ) = −4/(m²Δ²)` for odd `m`, 0 for even `m`;
//! - `ρ²`: `h(0) = 2π³/(3Δ³)`, `h(mΔ) = 4π(−1)^m/(m²Δ³)`.
//!
//! Only unit `μ` are sampled; the output is zero outside the ball of radius
//! `λ_max` that the sampled projections cover.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Result, TomoError};
use crate::field::{BoxDomain, ScalarField, TomogramTable};
use crate::quadrature::gauss_legendre;
use crate::sampler::TomogramSampler;

pub const MIN_ANGLES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineParam {
    pub d: f64,
    pub theta: f64,
}

fn check_mu(mu: &[f64], dim: usize) -> Result<f64> {
    if mu.len() != dim {
        return Err(TomoError::DimensionMismatch {
            expected: dim,
            actual: mu.len(),
        });
    }
    let norm = mu.iter().map(|m| m * m).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(TomoError::InvalidParameter(format!("mu must be nonzero and finite, got {mu:?}")));
    }
    Ok(norm)
}

fn require_dim(f: &ScalarField, dim: usize) -> Result<()> {
    if f.ndim() != dim {
        return Err(TomoError::DimensionMismatch {
            expected: dim,
            actual: f.ndim(),
        });
    }
    Ok(())
}

/// ∫ ds f(s sinθ + d cosθ, −s cosθ + d sinθ).
pub fn radon_line(f: &ScalarField, line: LineParam) -> Result<f64> {
    require_dim(f, 2)?;
    Ok(line_integral(f, line.d, line.theta))
}

/// Exact integral of the bilinear interpolant along the line.
pub(crate) fn line_integral(f: &ScalarField, d: f64, theta: f64) -> f64 {
    let (sn, cs) = theta.sin_cos();
    let n = [cs, sn];
    let t = [sn, -cs];
    let dom = f.domain();
    let (mut s0, mut s1) = (f64::NEG_INFINITY, f64::INFINITY);
    for k in 0..2 {
        let base = d * n[k];
        if t[k].abs() < 1e-14 {
            if base < dom.lo()[k] || base > dom.hi()[k] {
                return 0.0;
            }
            continue;
        }
        let a = (dom.lo()[k] - base) / t[k];
        let b = (dom.hi()[k] - base) / t[k];
        s0 = s0.max(a.min(b));
        s1 = s1.min(a.max(b));
    }
    if s1.partial_cmp(&s0) != Some(std::cmp::Ordering::Greater) {
        return 0.0;
    }
    let mut breaks = Vec::with_capacity(dom.shape()[0] + dom.shape()[1] + 2);
    breaks.push(s0);
    breaks.push(s1);
    for k in 0..2 {
        if t[k].abs() < 1e-14 {
            continue;
        }
        let base = d * n[k];
        let (lo, h) = (dom.lo()[k], dom.spacing(k));
        // grid lines whose crossing lies strictly inside (s0, s1)
        let c0 = base + s0 * t[k];
        let c1 = base + s1 * t[k];
        let (cmin, cmax) = (c0.min(c1), c0.max(c1));
        let i0 = ((cmin - lo) / h).ceil().max(0.0) as usize;
        let i1 = (((cmax - lo) / h).floor().max(0.0) as usize).min(dom.shape()[k] - 1);
        for i in i0..=i1 {
            let s = (lo + i as f64 * h - base) / t[k];
            if s > s0 && s < s1 {
                breaks.push(s);
            }
        }
    }
    breaks.sort_unstable_by(f64::total_cmp);
    let (lo, hi) = (dom.lo(), dom.hi());
    let eval = |s: f64| {
        let x = (s * t[0] + d * n[0]).clamp(lo[0], hi[0]);
        let y = (s * t[1] + d * n[1]).clamp(lo[1], hi[1]);
        f.bilinear(x, y)
    };
    let mut total = 0.0;
    let mut fa = eval(breaks[0]);
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let fb = eval(b);
        if b > a {
            let fm = eval(0.5 * (a + b));
            total += (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        }
        fa = fb;
    }
    total
}

/// Sub-samples per grid cell along each in-plane axis of [`plane_integral`].
const PLANE_REFINE: usize = 3;

/// Integral over the plane `n·x = d` of the trilinear interpolant, by the
/// trapezoid rule on a refinement of the grid of the two axes least aligned
/// with `n`. The refinement tames the kinks where the plane crosses grid
/// planes of the third axis.
fn plane_integral(f: &ScalarField, n: [f64; 3], d: f64) -> f64 {
    let dom = f.domain();
    let a = (0..3)
        .max_by(|&i, &j| n[i].abs().total_cmp(&n[j].abs()))
        .unwrap();
    let (b, c) = match a {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let r = PLANE_REFINE;
    let nb = (dom.shape()[b] - 1) * r + 1;
    let nc = (dom.shape()[c] - 1) * r + 1;
    let (hb, hc) = (dom.spacing(b) / r as f64, dom.spacing(c) / r as f64);
    let (lo_a, hi_a) = (dom.lo()[a], dom.hi()[a]);
    let mut total = 0.0;
    let mut x = [0.0; 3];
    for i in 0..nb {
        x[b] = dom.lo()[b] + i as f64 * hb;
        let wb = if i == 0 || i == nb - 1 { 0.5 } else { 1.0 };
        let mut row = 0.0;
        for j in 0..nc {
            x[c] = dom.lo()[c] + j as f64 * hc;
            x[a] = (d - n[b] * x[b] - n[c] * x[c]) / n[a];
            if x[a] < lo_a || x[a] > hi_a {
                continue;
            }
            let wc = if j == 0 || j == nc - 1 { 0.5 } else { 1.0 };
            row += wc * f.trilinear(x[0], x[1], x[2]);
        }
        total += wb * row;
    }
    total * hb * hc / n[a].abs()
}

/// (n−1)-dimensional integral over `λ = μ·x` with density `1/|μ|`.
pub fn radon_hyperplane(f: &ScalarField, lambda: f64, mu: &[f64]) -> Result<f64> {
    let norm = check_mu(mu, f.ndim())?;
    match f.ndim() {
        2 => affine_tomogram(f, lambda, mu),
        3 => {
            let n = [mu[0] / norm, mu[1] / norm, mu[2] / norm];
            Ok(plane_integral(f, n, lambda / norm) / norm)
        }
        k => Err(TomoError::Unsupported(format!("hyperplane transform in {k} dimensions"))),
    }
}

/// Canonical (d, θ) with θ ∈ [0, π) for the line `λ = μ·x`, |μ| = 1 after scaling.
pub fn canonical_line(lambda: f64, mu: f64, nu: f64) -> (f64, f64, f64) {
    let r = mu.hypot(nu);
    let mut theta = nu.atan2(mu);
    let mut d = lambda / r;
    if theta < 0.0 {
        theta += PI;
        d = -d;
    }
    if theta >= PI {
        theta -= PI;
        d = -d;
    }
    (d, theta, r)
}

/// `∫ f(x) δ(λ − μ·x) dⁿx`.
pub fn affine_tomogram(f: &ScalarField, lambda: f64, mu: &[f64]) -> Result<f64> {
    let norm = check_mu(mu, f.ndim())?;
    match f.ndim() {
        1 => Ok(f.interpolate(&[lambda / mu[0]]) / norm),
        2 => {
            let (d, theta, r) = canonical_line(lambda, mu[0], mu[1]);
            Ok(line_integral(f, d, theta) / r)
        }
        3 => radon_hyperplane(f, lambda, mu),
        k => Err(TomoError::Unsupported(format!("affine tomogram in {k} dimensions"))),
    }
}

/// Samples the affine tomogram of a gridded field.
pub struct AffineSampler<'a> {
    pub field: &'a ScalarField,
}

impl TomogramSampler for AffineSampler<'_> {
    fn sample(&self, lambda: f64, mu: &[f64]) -> f64 {
        affine_tomogram(self.field, lambda, mu).unwrap_or(f64::NAN)
    }
}

/// Signed-distance sinogram over θ_j = jπ/N, j < N, and d ∈ [−KΔ, KΔ].
pub fn sinogram_with(f: &ScalarField, n_theta: usize, d_step: f64, d_max: f64) -> Result<TomogramTable> {
    require_dim(f, 2)?;
    if n_theta < 2 || !(d_step > 0.0) || !(d_max > 0.0) {
        return Err(TomoError::InvalidParameter(format!(
            "sinogram needs n_theta ≥ 2 and positive steps (got {n_theta}, {d_step}, {d_max})"
        )));
    }
    let k = (d_max / d_step).ceil() as usize;
    let nd = 2 * k + 1;
    let dmax = k as f64 * d_step;
    let domain = BoxDomain::new(
        vec![-dmax, 0.0],
        vec![dmax, PI * (n_theta - 1) as f64 / n_theta as f64],
        vec![nd, n_theta],
    )?;
    let thetas: Vec<f64> = (0..n_theta).map(|j| PI * j as f64 / n_theta as f64).collect();
    let values: Vec<f64> = (0..nd)
        .into_par_iter()
        .flat_map_iter(|i| {
            let d = (i as f64 - k as f64) * d_step;
            thetas.iter().map(move |&th| line_integral(f, d, th)).collect::<Vec<_>>()
        })
        .collect();
    TomogramTable::new(vec!["lambda".into(), "theta".into()], domain, values)
}

/// Sinogram with the d step equal to the smallest grid spacing and a d range
/// covering the whole box.
pub fn sinogram(f: &ScalarField, n_theta: usize) -> Result<TomogramTable> {
    let dom = f.domain();
    let h = dom.spacing(0).min(dom.spacing(1));
    let reach = corner_radius(dom);
    sinogram_with(f, n_theta, h, reach)
}

/// Largest distance from the origin to a corner of the box.
pub fn corner_radius(dom: &BoxDomain) -> f64 {
    dom.lo()
        .iter()
        .zip(dom.hi())
        .map(|(l, h)| l.abs().max(h.abs()).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Per-angle projections of a sinogram table.
struct Projections {
    d0: f64,
    dd: f64,
    thetas: Vec<f64>,
    cols: Vec<Vec<f64>>,
}

impl Projections {
    fn from_table(sino: &TomogramTable) -> Result<Self> {
        let dom = sino.domain();
        if dom.ndim() != 2 {
            return Err(TomoError::DimensionMismatch {
                expected: 2,
                actual: dom.ndim(),
            });
        }
        let (nd, nt) = (dom.shape()[0], dom.shape()[1]);
        let want_hi = PI * (nt - 1) as f64 / nt as f64;
        if dom.lo()[1].abs() > 1e-9 || (dom.hi()[1] - want_hi).abs() > 1e-9 {
            return Err(TomoError::InvalidDomain(format!(
                "theta axis must sample [0, π) uniformly: expected [0, {want_hi}], got [{}, {}]",
                dom.lo()[1],
                dom.hi()[1]
            )));
        }
        let v = sino.values();
        let cols = (0..nt).map(|j| (0..nd).map(|i| v[i * nt + j]).collect()).collect();
        Ok(Self {
            d0: dom.lo()[0],
            dd: dom.spacing(0),
            thetas: (0..nt).map(|j| PI * j as f64 / nt as f64).collect(),
            cols,
        })
    }

    fn d_max(&self) -> f64 {
        (-self.d0).min(self.d0 + self.dd * (self.cols[0].len() - 1) as f64)
    }

    fn check_angles(&self) -> Result<()> {
        if self.thetas.len() < MIN_ANGLES {
            return Err(TomoError::AngularUndersampling {
                angles: self.thetas.len(),
                min: MIN_ANGLES,
            });
        }
        Ok(())
    }
}

/// Linear interpolation on a uniform grid starting at `t0`; zero outside.
#[inline]
pub(crate) fn lerp_uniform(v: &[f64], t0: f64, dt: f64, s: f64) -> f64 {
    let u = (s - t0) / dt;
    if !(u >= 0.0) || u > (v.len() - 1) as f64 {
        return 0.0;
    }
    let i = (u as usize).min(v.len() - 2);
    let w = u - i as f64;
    v[i] * (1.0 - w) + v[i + 1] * w
}

/// `(1/2π) ∫₀^{2π} f̂(q cosθ + p sinθ + r, θ) dθ` on the sinogram angles.
pub fn tangent_circle_average(sino: &TomogramTable, q: f64, p: f64, r: f64) -> Result<f64> {
    let pr = Projections::from_table(sino)?;
    let reach = q.hypot(p) + r.abs();
    if reach > pr.d_max() * (1.0 + 1e-12) {
        return Err(TomoError::OutOfRange(format!(
            "offsets up to {reach:.4} requested but the sinogram covers |d| ≤ {:.4}",
            pr.d_max()
        )));
    }
    let mut acc = 0.0;
    for (th, col) in pr.thetas.iter().zip(&pr.cols) {
        let s = q * th.cos() + p * th.sin();
        acc += lerp_uniform(col, pr.d0, pr.dd, s + r) + lerp_uniform(col, pr.d0, pr.dd, s - r);
    }
    Ok(acc / (2 * pr.thetas.len()) as f64)
}

/// Tangent-circle filter taps `c_m`, m ≥ 0, for step Δ (symmetric in m).
fn hilbert_taps(len: usize, step: f64) -> Vec<f64> {
    let mut a = vec![0.0; len];
    a[0] = -1.5 / step;
    if len > 1 {
        a[1] = 0.75 / step;
    }
    for (m, am) in a.iter_mut().enumerate().skip(2) {
        *am = 1.0 / (((m * m) as f64 - 1.0) * step);
    }
    let mut c: Vec<f64> = a.iter().map(|am| -am / PI).collect();
    c[0] *= 2.0;
    c
}

fn hilbert_reconstruct(pr: &Projections, out: &BoxDomain, stride: usize) -> ScalarField {
    let nd = pr.cols[0].len();
    let step = pr.dd * stride as f64;
    let taps = hilbert_taps(nd / stride + 2, step);
    let filtered: Vec<Vec<f64>> = pr
        .cols
        .par_iter()
        .map(|col| {
            (0..nd)
                .map(|i| {
                    let mut g = taps[0] * col[i];
                    for (m, &cm) in taps.iter().enumerate().skip(1) {
                        let off = m * stride;
                        let up = col.get(i + off).copied().unwrap_or(0.0);
                        let down = if off <= i { col[i - off] } else { 0.0 };
                        g += cm * (up + down);
                    }
                    g
                })
                .collect()
        })
        .collect();
    backproject_columns(pr, &filtered, out, 1.0 / (2 * pr.thetas.len()) as f64, true)
}

fn backproject_columns(pr: &Projections, cols: &[Vec<f64>], out: &BoxDomain, scale: f64, mask: bool) -> ScalarField {
    let trig: Vec<(f64, f64)> = pr.thetas.iter().map(|t| (t.cos(), t.sin())).collect();
    let reach = pr.d_max();
    ScalarField::from_fn(out.clone(), |x| {
        if mask && x[0].hypot(x[1]) > reach {
            return 0.0;
        }
        let mut acc = 0.0;
        for ((c, s), col) in trig.iter().zip(cols) {
            acc += lerp_uniform(col, pr.d0, pr.dd, x[0] * c + x[1] * s);
        }
        acc * scale
    })
}

/// `f(q,p) = −(1/π) ∫₀^∞ F'(r)/r dr` from a signed-d sinogram.
pub fn invert_radon_hilbert(sino: &TomogramTable, out_domain: &BoxDomain) -> Result<ScalarField> {
    require_domain_dim(out_domain, 2)?;
    let pr = Projections::from_table(sino)?;
    pr.check_angles()?;
    Ok(hilbert_reconstruct(&pr, out_domain, 1))
}

/// Reconstruction at the sinogram step Δ together with a Richardson estimate
/// of its relative discretization error, `‖f_Δ − f_2Δ‖ / (3‖f_Δ‖)`.
pub fn invert_radon_hilbert_checked(sino: &TomogramTable, out_domain: &BoxDomain) -> Result<(ScalarField, f64)> {
    require_domain_dim(out_domain, 2)?;
    let pr = Projections::from_table(sino)?;
    pr.check_angles()?;
    let fine = hilbert_reconstruct(&pr, out_domain, 1);
    let coarse = hilbert_reconstruct(&pr, out_domain, 2);
    let err = crate::field::l2_relative_error(&fine, &coarse)? / 3.0;
    Ok((fine, err))
}

/// Unfiltered backprojection: the θ-average of `f̂(x·n(θ), θ)`.
pub fn backproject(sino: &TomogramTable, out_domain: &BoxDomain) -> Result<ScalarField> {
    require_domain_dim(out_domain, 2)?;
    let pr = Projections::from_table(sino)?;
    Ok(backproject_columns(
        &pr,
        &pr.cols,
        out_domain,
        1.0 / pr.thetas.len() as f64,
        false,
    ))
}

fn require_domain_dim(d: &BoxDomain, dim: usize) -> Result<()> {
    if d.ndim() != dim {
        return Err(TomoError::DimensionMismatch {
            expected: dim,
            actual: d.ndim(),
        });
    }
    Ok(())
}

/// Discretization of the affine inverse.
///
/// In the plane, `n_angles` directions θ_j = jπ/N. In space, directions on
/// the upper hemisphere use `n_polar` Gauss–Legendre nodes in cos θ times
/// `n_angles` equally spaced azimuths. Projections are sampled at
/// `λ = kΔ`, `|λ| ≤ lambda_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureSpec {
    pub n_angles: usize,
    pub n_polar: usize,
    pub lambda_step: f64,
    pub lambda_max: f64,
}

impl QuadratureSpec {
    pub const MIN_ANGLES: usize = 8;
    pub const MIN_POLAR: usize = 2;
    pub const MIN_LAMBDA_NODES: usize = 17;

    /// Defaults for reconstructing on `out`: λ step = smallest spacing, λ range
    /// reaching every corner, 180 angles (2-D) or 24 × 48 directions (3-D).
    pub fn for_domain(out: &BoxDomain) -> Self {
        let step = (0..out.ndim())
            .map(|a| out.spacing(a))
            .fold(f64::INFINITY, f64::min);
        let (n_angles, n_polar) = if out.ndim() == 3 { (48, 24) } else { (180, 0) };
        Self {
            n_angles,
            n_polar,
            lambda_step: step,
            lambda_max: corner_radius(out),
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let k = (self.lambda_max / self.lambda_step).ceil();
        let nodes = 2.0 * k + 1.0;
        let mut problems = Vec::new();
        if self.n_angles < Self::MIN_ANGLES {
            problems.push(format!("n_angles = {} < {}", self.n_angles, Self::MIN_ANGLES));
        }
        if dim == 3 && self.n_polar < Self::MIN_POLAR {
            problems.push(format!("n_polar = {} < {}", self.n_polar, Self::MIN_POLAR));
        }
        if !(self.lambda_step > 0.0 && self.lambda_max > 0.0) || !(nodes >= Self::MIN_LAMBDA_NODES as f64) {
            problems.push(format!(
                "lambda grid with step {} and reach {} has fewer than {} nodes",
                self.lambda_step,
                self.lambda_max,
                Self::MIN_LAMBDA_NODES
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(TomoError::QuadratureBudget(problems.join("; ")))
        }
    }

    /// Number of sampler evaluations this spec requires.
    pub fn evaluations(&self, dim: usize) -> usize {
        let k = (self.lambda_max / self.lambda_step).ceil() as usize;
        let dirs = if dim == 3 { self.n_angles * self.n_polar } else { self.n_angles };
        dirs * (2 * k + 1)
    }
}

/// Filtered projections of the affine inverse, ready to be evaluated at any point.
pub struct FilteredProjections {
    dirs: Vec<[f64; 3]>,
    weights: Vec<f64>,
    t0: f64,
    dt: f64,
    cols: Vec<Vec<f64>>,
    reach: f64,
}

impl FilteredProjections {
    pub fn build<S: TomogramSampler + ?Sized>(sampler: &S, dim: usize, quad: &QuadratureSpec) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(TomoError::Unsupported(format!("affine inverse in {dim} dimensions")));
        }
        quad.validate(dim)?;
        let k = (quad.lambda_max / quad.lambda_step).ceil() as i64;
        let dt = quad.lambda_step;
        let lambdas: Vec<f64> = (-k..=k).map(|i| i as f64 * dt).collect();

        let (dirs, weights): (Vec<[f64; 3]>, Vec<f64>) = if dim == 2 {
            let n = quad.n_angles;
            (0..n)
                .map(|j| {
                    let th = PI * j as f64 / n as f64;
                    ([th.cos(), th.sin(), 0.0], PI / n as f64 / (4.0 * PI * PI))
                })
                .unzip()
        } else {
            let (u, w) = gauss_legendre(quad.n_polar);
            let na = quad.n_angles;
            let mut dirs = Vec::new();
            let mut weights = Vec::new();
            for (ui, wi) in u.iter().zip(&w) {
                let cz = 0.5 * (ui + 1.0);
                let sz = (1.0 - cz * cz).max(0.0).sqrt();
                for a in 0..na {
                    let ph = 2.0 * PI * a as f64 / na as f64;
                    dirs.push([sz * ph.cos(), sz * ph.sin(), cz]);
                    weights.push(0.5 * wi * 2.0 * PI / na as f64 / (8.0 * PI * PI * PI));
                }
            }
            (dirs, weights)
        };

        let nl = lambdas.len();
        let kernel: Vec<f64> = (0..nl)
            .map(|m| {
                let mf = m as f64;
                if dim == 2 {
                    if m == 0 {
                        PI * PI / (dt * dt)
                    } else if m % 2 == 1 {
                        -4.0 / (mf * mf * dt * dt)
                    } else {
                        0.0
                    }
                } else if m == 0 {
                    2.0 * PI.powi(3) / (3.0 * dt.powi(3))
                } else {
                    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                    4.0 * PI * sign / (mf * mf * dt.powi(3))
                }
            })
            .collect();

        let cols: Vec<Vec<f64>> = dirs
            .par_iter()
            .map(|dir| {
                let p = sampler.sample_lambdas(&lambdas, &dir[..dim]);
                (0..nl)
                    .map(|i| {
                        let mut acc = 0.0;
                        for (kk, pk) in p.iter().enumerate() {
                            acc += pk * kernel[kk.abs_diff(i)];
                        }
                        acc * dt
                    })
                    .collect()
            })
            .collect();
        if cols.iter().flatten().any(|v| !v.is_finite()) {
            return Err(TomoError::InvalidParameter(
                "sampler returned non-finite values on the quadrature nodes".into(),
            ));
        }
        Ok(Self {
            dirs,
            weights,
            t0: lambdas[0],
            dt,
            cols,
            reach: k as f64 * dt,
        })
    }

    /// Radius of the ball on which the reconstruction is supported.
    pub fn reach(&self) -> f64 {
        self.reach
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        if r2 > self.reach * self.reach {
            return 0.0;
        }
        let mut acc = 0.0;
        for ((dir, w), col) in self.dirs.iter().zip(&self.weights).zip(&self.cols) {
            let s: f64 = x.iter().zip(dir).map(|(a, b)| a * b).sum();
            acc += w * lerp_uniform(col, self.t0, self.dt, s);
        }
        acc
    }
}

/// `f(x) = ∫ dλ dⁿμ/(2π)ⁿ f̂(λ, μ) e^{i(λ−μ·x)}` by the polar reduction.
pub fn invert_affine<S: TomogramSampler + ?Sized>(
    sampler: &S,
    out_domain: &BoxDomain,
    quad: &QuadratureSpec,
) -> Result<ScalarField> {
    let fp = FilteredProjections::build(sampler, out_domain.ndim(), quad)?;
    Ok(ScalarField::from_fn(out_domain.clone(), |x| fp.eval(x)))
}
