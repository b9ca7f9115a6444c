//! Coherent-state tomography on the truncated Fock space `span{|0⟩..|n_max⟩}`.
//!
//! Phase-space points are `z = u + iv` on a square grid. Symbols:
//!
//! - K (Husimi–Kano): `K_A(z) = ⟨z|A|z⟩`;
//! - φ (Sudarshan): `A = ∫ d²z/π φ_A(z) |z⟩⟨z|`, related to K by
//!   `K = φ ∗ e^{−|z|²}/π`, i.e. `φ̃(k) = e^{|k|²/4} K̃(k)`.
//!
//! φ is a distribution in general, so it is computed band-limited: the
//! anti-Gaussian factor is applied for `|k| ≤ Ξ` and the spectrum is zeroed
//! beyond. The quantizer `Ĝ(z′)` has matrix elements
//! `⟨n|Ĝ(z′)|m⟩ = φ_{h_nm}(z′)` with `h_nm(z) = ⟨n|z⟩⟨z|m⟩`, so the same
//! band-limited filter produces every quantizer on the whole grid at once.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::field::io::{GridFile, GridHeader};
use crate::field::BoxDomain;
use crate::linalg::{c, exp_i_hermitian, hermitian_eigen, hermiticity_defect, CMat, CVec, I};
use crate::quadrature::gauss_legendre;

pub type OperatorMatrix = CMat;

/// Radius of the disc whose samples enter the K → operator fit.
pub const FIT_RADIUS: f64 = 1.5;

/// Largest truncation accepted by [`star_product`].
pub const STAR_MAX_NMAX: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct FockSpace {
    n_max: usize,
}

impl FockSpace {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(TomoError::InvalidParameter("n_max must be at least 1".into()));
        }
        Ok(Self { n_max })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        self.n_max + 1
    }

    /// `a|n⟩ = √n |n−1⟩`.
    pub fn annihilation(&self) -> CMat {
        let d = self.dim();
        CMat::from_fn(d, d, |i, j| if j == i + 1 { c((j as f64).sqrt(), 0.0) } else { c(0.0, 0.0) })
    }

    pub fn creation(&self) -> CMat {
        self.annihilation().adjoint()
    }

    pub fn projector(&self, n: usize) -> CMat {
        let d = self.dim();
        CMat::from_fn(d, d, |i, j| if i == n && j == n { c(1.0, 0.0) } else { c(0.0, 0.0) })
    }

    /// Whether `|z|² ≤ n_max/4`, the range in which truncation is harmless.
    pub fn guard_ok(&self, z: Complex64) -> bool {
        z.norm_sqr() <= self.n_max as f64 / 4.0
    }

    /// Default band limit Ξ = 4√n_max + 2.
    pub fn default_cutoff(&self) -> f64 {
        4.0 * (self.n_max as f64).sqrt() + 2.0
    }

    /// Default phase grid: half-width 2√n_max + 3, 128² nodes.
    pub fn default_domain(&self) -> BoxDomain {
        let r = 2.0 * (self.n_max as f64).sqrt() + 3.0;
        BoxDomain::centered(r, 128, 2).expect("valid default domain")
    }
}

fn coherent_components(z: Complex64, dim: usize) -> Vec<Complex64> {
    let mut v = Vec::with_capacity(dim);
    let mut term = c((-0.5 * z.norm_sqr()).exp(), 0.0);
    for j in 0..dim {
        if j > 0 {
            term = term * z / (j as f64).sqrt();
        }
        v.push(term);
    }
    v
}

/// `1 − Σ|c_j|²`, the probability mass lost to truncation.
pub fn coherent_defect(z: Complex64, space: &FockSpace) -> f64 {
    1.0 - coherent_components(z, space.dim()).iter().map(|x| x.norm_sqr()).sum::<f64>()
}

/// Truncated coherent state `c_j = e^{−|z|²/2} zʲ/√j!`.
pub fn coherent_vector(z: Complex64, space: &FockSpace) -> CVec {
    if !space.guard_ok(z) {
        log::warn!(
            "|z|² = {:.3} exceeds n_max/4; truncation defect {:.3e}",
            z.norm_sqr(),
            coherent_defect(z, space)
        );
    }
    CVec::from_vec(coherent_components(z, space.dim()))
}

/// `D(z) = exp(z a† − z̄ a)` on the truncation.
pub fn displacement_matrix(z: Complex64, space: &FockSpace) -> CMat {
    if !space.guard_ok(z) {
        log::warn!("displacement with |z|² = {:.3} beyond the truncation guard", z.norm_sqr());
    }
    let gen = space.creation() * z - space.annihilation() * z.conj();
    // gen is anti-Hermitian: gen = iH
    let h = gen.map(|x| x * (-I));
    exp_i_hermitian(&h, 1.0)
}

/// `⟨z|A|z⟩`.
pub fn husimi_k(a: &CMat, z: Complex64) -> Complex64 {
    let v = coherent_components(z, a.nrows());
    let mut acc = c(0.0, 0.0);
    for i in 0..v.len() {
        let mut row = c(0.0, 0.0);
        for j in 0..v.len() {
            row += a[(i, j)] * v[j];
        }
        acc += v[i].conj() * row;
    }
    acc
}

/// A state: Hermitian, positive semidefinite, unit trace.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(CMat);

impl DensityMatrix {
    pub fn new(m: CMat) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(TomoError::InvalidParameter("density matrix must be square".into()));
        }
        let herm = hermiticity_defect(&m);
        if herm > 1e-12 {
            return Err(TomoError::InvalidParameter(format!("not Hermitian (defect {herm:.3e})")));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > 1e-12 || tr.im.abs() > 1e-12 {
            return Err(TomoError::InvalidParameter(format!("trace {tr} ≠ 1")));
        }
        let (ev, _) = hermitian_eigen(&m);
        if ev[0] < -1e-10 {
            return Err(TomoError::InvalidParameter(format!("negative eigenvalue {:.3e}", ev[0])));
        }
        Ok(Self(m))
    }

    pub fn pure(psi: &CVec) -> Result<Self> {
        let n = psi.norm();
        if n == 0.0 {
            return Err(TomoError::InvalidParameter("zero vector".into()));
        }
        let v = psi / c(n, 0.0);
        Self::new(&v * v.adjoint())
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(CMat::identity(dim, dim) / c(dim as f64, 0.0))
    }

    /// Random state `GG†/Tr(GG†)` with complex Gaussian `G`.
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let g = CMat::from_fn(dim, dim, |_, _| c(normal(rng), normal(rng)));
        let m = &g * g.adjoint();
        let tr = m.trace().re;
        let mut m = m / c(tr, 0.0);
        // exact Hermitian symmetry
        let ma = m.adjoint();
        m = (&m + ma) * c(0.5, 0.0);
        Self(m)
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Box–Muller
    let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (2.0 * PI * v).cos()
}

/// JSON form `{dim, re, im}` of a complex matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixJson {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl MatrixJson {
    pub fn from_matrix(m: &CMat) -> Self {
        let d = m.nrows();
        Self {
            dim: d,
            re: (0..d).map(|i| (0..d).map(|j| m[(i, j)].re).collect()).collect(),
            im: (0..d).map(|i| (0..d).map(|j| m[(i, j)].im).collect()).collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<CMat> {
        let d = self.dim;
        let rows_ok = |rows: &Vec<Vec<f64>>| rows.len() == d && rows.iter().all(|r| r.len() == d);
        if !rows_ok(&self.re) || !rows_ok(&self.im) {
            return Err(TomoError::DimensionMismatch {
                expected: d,
                actual: self.re.len(),
            });
        }
        Ok(CMat::from_fn(d, d, |i, j| c(self.re[i][j], self.im[i][j])))
    }
}

/// Complex samples on a square phase-space grid, optionally labelled with the
/// band limit they were filtered at.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseGrid {
    domain: BoxDomain,
    values: Vec<Complex64>,
    cutoff: Option<f64>,
}

impl PhaseGrid {
    pub fn new(domain: BoxDomain, values: Vec<Complex64>) -> Result<Self> {
        if domain.ndim() != 2 {
            return Err(TomoError::DimensionMismatch {
                expected: 2,
                actual: domain.ndim(),
            });
        }
        if values.len() != domain.len() {
            return Err(TomoError::DimensionMismatch {
                expected: domain.len(),
                actual: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(TomoError::NonFiniteSample { index });
        }
        Ok(Self {
            domain,
            values,
            cutoff: None,
        })
    }

    pub fn from_fn<F>(domain: BoxDomain, f: F) -> Self
    where
        F: Fn(Complex64) -> Complex64 + Sync,
    {
        let values = (0..domain.len())
            .into_par_iter()
            .map(|k| {
                let x = domain.node(k);
                f(c(x[0], x[1]))
            })
            .collect();
        Self {
            domain,
            values,
            cutoff: None,
        }
    }

    pub fn constant(domain: BoxDomain, v: Complex64) -> Self {
        let n = domain.len();
        Self {
            domain,
            values: vec![v; n],
            cutoff: None,
        }
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn cutoff(&self) -> Option<f64> {
        self.cutoff
    }

    pub fn with_cutoff(mut self, cutoff: f64) -> Self {
        self.cutoff = Some(cutoff);
        self
    }

    pub fn z(&self, k: usize) -> Complex64 {
        let x = self.domain.node(k);
        c(x[0], x[1])
    }

    /// Half-width of the (square) box.
    pub fn radius(&self) -> f64 {
        self.domain
            .lo()
            .iter()
            .chain(self.domain.hi())
            .fold(f64::INFINITY, |m, v| m.min(v.abs()))
    }

    /// Periodic trapezoid weights `h_u h_v`, matching the DFT model of the grid.
    pub fn weights(&self) -> Vec<f64> {
        vec![self.domain.spacing(0) * self.domain.spacing(1); self.domain.len()]
    }

    /// `∫ d²z` of the samples.
    pub fn integral(&self) -> Complex64 {
        self.weights().iter().zip(&self.values).map(|(w, v)| v * *w).sum()
    }

    pub fn argmax_abs(&self) -> usize {
        let mut best = 0;
        for (k, v) in self.values.iter().enumerate() {
            if v.norm() > self.values[best].norm() {
                best = k;
            }
        }
        best
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            domain: self.domain.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            cutoff: self.cutoff,
        }
    }

    /// ‖a − b‖₂ / ‖a‖₂ over the nodes.
    pub fn l2_relative_error(&self, other: &PhaseGrid) -> Result<f64> {
        check_same_grid(self, other)?;
        let (mut num, mut den) = (0.0, 0.0);
        for (a, b) in self.values.iter().zip(&other.values) {
            num += (a - b).norm_sqr();
            den += a.norm_sqr();
        }
        Ok(if num == 0.0 { 0.0 } else { (num / den).sqrt() })
    }

    pub fn to_grid_file(&self) -> GridFile {
        let mut header = GridHeader::for_domain(&self.domain);
        header.axes = Some(vec!["u".into(), "v".into()]);
        header.complex = true;
        if let Some(xi) = self.cutoff {
            header.meta = Some(serde_json::json!({ "cutoff": xi }));
        }
        let data = self.values.iter().flat_map(|v| [v.re, v.im]).collect();
        GridFile { header, data }
    }

    pub fn from_grid_file(g: GridFile) -> Result<Self> {
        if !g.header.complex {
            return Err(TomoError::Header("expected a complex phase grid".into()));
        }
        let domain = g.header.domain()?;
        let values = g.data.chunks_exact(2).map(|p| c(p[0], p[1])).collect();
        let cutoff = g
            .header
            .meta
            .as_ref()
            .and_then(|m| m.get("cutoff"))
            .and_then(|v| v.as_f64());
        let mut pg = Self::new(domain, values)?;
        pg.cutoff = cutoff;
        Ok(pg)
    }
}

fn check_same_grid(a: &PhaseGrid, b: &PhaseGrid) -> Result<()> {
    if a.domain != b.domain {
        return Err(TomoError::DomainMismatch(format!("{:?} vs {:?}", a.domain, b.domain)));
    }
    Ok(())
}

/// `K_A` on every node of `domain`.
pub fn husimi_grid(a: &CMat, domain: &BoxDomain) -> PhaseGrid {
    PhaseGrid::from_fn(domain.clone(), |z| husimi_k(a, z))
}

/// `∫ d²z/π ⟨z|ρ|z⟩` on the grid.
pub fn husimi_normalization(rho: &CMat, grid: &BoxDomain) -> f64 {
    let n_max = rho.nrows().saturating_sub(1);
    let pg = husimi_grid(rho, grid);
    if pg.radius() < 2.0 * (n_max as f64).sqrt() {
        log::warn!("phase grid radius {:.3} is below 2√n_max", pg.radius());
    }
    pg.integral().re / PI
}

/// Least-squares recovery of A from samples of `K_A`.
///
/// Fits `e^{|z|²}K(z) = Σ c_nm z̄ⁿ zᵐ` with columns scaled by `r^{n+m}` and
/// sets `A_nm = c_nm √(n! m!)`.
pub fn reconstruct_from_samples(zs: &[Complex64], ks: &[Complex64], space: &FockSpace) -> Result<CMat> {
    let d = space.dim();
    let unknowns = d * d;
    if zs.len() != ks.len() {
        return Err(TomoError::DimensionMismatch {
            expected: zs.len(),
            actual: ks.len(),
        });
    }
    if zs.len() < unknowns {
        return Err(TomoError::RankDeficient {
            rank: zs.len(),
            expected: unknowns,
            condition: f64::INFINITY,
        });
    }
    let r = zs.iter().fold(0.0f64, |m, z| m.max(z.norm())).max(1e-300);
    let mut design = CMat::zeros(zs.len(), unknowns);
    let mut rhs = CVec::zeros(zs.len());
    for (row, (z, k)) in zs.iter().zip(ks).enumerate() {
        let zb = z.conj() / r;
        let zr = z / r;
        let mut pn = c(1.0, 0.0);
        for n in 0..d {
            let mut pm = c(1.0, 0.0);
            for m in 0..d {
                design[(row, n * d + m)] = pn * pm;
                pm *= zr;
            }
            pn *= zb;
        }
        rhs[row] = k * z.norm_sqr().exp();
    }
    let svd = design.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = smax / smin;
    let tol = smax * 1e-12;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if rank < unknowns {
        return Err(TomoError::RankDeficient {
            rank,
            expected: unknowns,
            condition,
        });
    }
    let coef = svd
        .solve(&rhs, tol)
        .map_err(|e| TomoError::InvalidParameter(e.to_string()))?;
    let fact: Vec<f64> = (0..d).scan(1.0, |acc, k| {
        if k > 0 {
            *acc *= k as f64;
        }
        Some(*acc)
    })
    .collect();
    Ok(CMat::from_fn(d, d, |n, m| {
        coef[n * d + m] / r.powi((n + m) as i32) * (fact[n] * fact[m]).sqrt()
    }))
}

/// [`reconstruct_from_samples`] on the grid nodes within [`FIT_RADIUS`].
pub fn reconstruct_from_k(k: &PhaseGrid, space: &FockSpace) -> Result<CMat> {
    let (mut zs, mut ks) = (Vec::new(), Vec::new());
    for (idx, v) in k.values().iter().enumerate() {
        let z = k.z(idx);
        if z.norm() <= FIT_RADIUS {
            zs.push(z);
            ks.push(*v);
        }
    }
    reconstruct_from_samples(&zs, &ks, space)
}

/// Recovery of A through Taylor coefficients of `e^{|z|²}K(z)` obtained by
/// sampling circles (Cauchy integrals over the angle, then a Vandermonde
/// solve over radii). Intended as a cross-check for `n_max ≤ 3`.
pub fn reconstruct_by_circles(k: impl Fn(Complex64) -> Complex64, space: &FockSpace) -> Result<CMat> {
    let d = space.dim();
    let n_max = space.n_max() as i64;
    let angles = 4 * d;
    let radii: Vec<f64> = (0..d).map(|j| 0.4 + 0.25 * j as f64).collect();
    // P(r e^{iθ}) = Σ_{n,m} c_nm r^{n+m} e^{i(m−n)θ}
    // moment_k(r) = Σ_n c_{n,n+k} r^{2n+k}
    let mut a = CMat::zeros(d, d);
    for kk in -n_max..=n_max {
        let mut moments = Vec::with_capacity(d);
        for &r in &radii {
            let mut acc = c(0.0, 0.0);
            for t in 0..angles {
                let th = 2.0 * PI * t as f64 / angles as f64;
                let z = Complex64::from_polar(r, th);
                acc += k(z) * (r * r).exp() * Complex64::from_polar(1.0, -(kk as f64) * th);
            }
            moments.push(acc / angles as f64);
        }
        // unknowns c_{n, n+k} for admissible n
        let ns: Vec<i64> = (0..=n_max).filter(|&n| n + kk >= 0 && n + kk <= n_max).collect();
        let mut v = DMatrix::<Complex64>::zeros(radii.len(), ns.len());
        for (i, &r) in radii.iter().enumerate() {
            for (j, &n) in ns.iter().enumerate() {
                v[(i, j)] = c(r.powi((2 * n + kk) as i32), 0.0);
            }
        }
        let rhs = CVec::from_vec(moments);
        let sol = v
            .svd(true, true)
            .solve(&rhs, 1e-14)
            .map_err(|e| TomoError::InvalidParameter(e.to_string()))?;
        for (j, &n) in ns.iter().enumerate() {
            let m = n + kk;
            let scale = (factorial(n as usize) * factorial(m as usize)).sqrt();
            a[(n as usize, m as usize)] = sol[j] * scale;
        }
    }
    Ok(a)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

struct Fft2 {
    n0: usize,
    n1: usize,
    f0: Arc<dyn Fft<f64>>,
    f1: Arc<dyn Fft<f64>>,
    i0: Arc<dyn Fft<f64>>,
    i1: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(n0: usize, n1: usize) -> Self {
        let mut p = FftPlanner::new();
        Self {
            n0,
            n1,
            f0: p.plan_fft_forward(n0),
            f1: p.plan_fft_forward(n1),
            i0: p.plan_fft_inverse(n0),
            i1: p.plan_fft_inverse(n1),
        }
    }

    fn run(&self, data: &mut [Complex64], inverse: bool) {
        let (a0, a1) = if inverse { (&self.i0, &self.i1) } else { (&self.f0, &self.f1) };
        for row in data.chunks_exact_mut(self.n1) {
            a1.process(row);
        }
        let mut col = vec![c(0.0, 0.0); self.n0];
        for j in 0..self.n1 {
            for i in 0..self.n0 {
                col[i] = data[i * self.n1 + j];
            }
            a0.process(&mut col);
            for i in 0..self.n0 {
                data[i * self.n1 + j] = col[i];
            }
        }
        if inverse {
            let s = 1.0 / (self.n0 * self.n1) as f64;
            for v in data.iter_mut() {
                *v *= s;
            }
        }
    }
}

/// The band-limited multiplier `e^{|k|²/4}·1(|k| ≤ Ξ)` on the DFT modes of `domain`.
fn anti_gaussian_filter(domain: &BoxDomain, cutoff: f64) -> Vec<f64> {
    let (n0, n1) = (domain.shape()[0], domain.shape()[1]);
    let freq = |i: usize, n: usize, h: f64| {
        let j = if i < n / 2 { i as f64 } else { i as f64 - n as f64 };
        2.0 * PI * j / (n as f64 * h)
    };
    let (h0, h1) = (domain.spacing(0), domain.spacing(1));
    let mut out = Vec::with_capacity(n0 * n1);
    for i in 0..n0 {
        let k0 = freq(i, n0, h0);
        for j in 0..n1 {
            let k1 = freq(j, n1, h1);
            let k2 = k0 * k0 + k1 * k1;
            out.push(if k2 <= cutoff * cutoff { (k2 / 4.0).exp() } else { 0.0 });
        }
    }
    out
}

/// Applies the band-limited anti-Gaussian filter to several grids sharing a domain.
struct PhiFilter {
    fft: Fft2,
    filter: Vec<f64>,
}

impl PhiFilter {
    fn new(domain: &BoxDomain, cutoff: f64) -> Self {
        Self {
            fft: Fft2::new(domain.shape()[0], domain.shape()[1]),
            filter: anti_gaussian_filter(domain, cutoff),
        }
    }

    fn apply(&self, values: &[Complex64]) -> (Vec<Complex64>, f64) {
        let mut data = values.to_vec();
        self.fft.run(&mut data, false);
        let dc = data[0].norm().max(f64::MIN_POSITIVE);
        let mut edge: f64 = 0.0;
        let fmax = self.filter.iter().cloned().fold(0.0, f64::max);
        for (v, f) in data.iter_mut().zip(&self.filter) {
            *v *= *f;
            if *f > 0.5 * fmax {
                edge = edge.max(v.norm());
            }
        }
        self.fft.run(&mut data, true);
        (data, edge / dc)
    }
}

/// Ratio of amplified spectral content near the band limit to the DC term
/// above which [`phi_from_k`] warns about the distributional regime.
pub const DISTRIBUTIONAL_THRESHOLD: f64 = 1e3;

/// Band-limited Sudarshan symbol: `φ^{(Ξ)} = F⁻¹[e^{|k|²/4}·1(|k|≤Ξ)·F K]`.
pub fn phi_from_k(k: &PhaseGrid, cutoff: f64) -> Result<PhaseGrid> {
    if !(cutoff > 0.0) {
        return Err(TomoError::InvalidParameter(format!("cutoff must be positive, got {cutoff}")));
    }
    let filt = PhiFilter::new(k.domain(), cutoff);
    let (values, edge) = filt.apply(k.values());
    if edge > DISTRIBUTIONAL_THRESHOLD {
        log::warn!("distributional regime: spectral content at the cutoff is {edge:.2e} × DC (Ξ = {cutoff})");
    }
    Ok(PhaseGrid {
        domain: k.domain().clone(),
        values,
        cutoff: Some(cutoff),
    })
}

/// `⟨n|Ĝ(z′)|m⟩` for every node z′ of `domain`: entry `[n·d + m]` is a grid.
pub struct QuantizerField {
    domain: BoxDomain,
    dim: usize,
    cutoff: f64,
    entries: Vec<Vec<Complex64>>,
}

impl QuantizerField {
    pub fn new(space: &FockSpace, domain: &BoxDomain, cutoff: f64) -> Result<Self> {
        if domain.ndim() != 2 || !(cutoff > 0.0) {
            return Err(TomoError::InvalidParameter("quantizer needs a 2-D grid and a positive cutoff".into()));
        }
        let d = space.dim();
        let comps: Vec<Vec<Complex64>> = (0..domain.len())
            .map(|k| {
                let x = domain.node(k);
                coherent_components(c(x[0], x[1]), d)
            })
            .collect();
        let filt = PhiFilter::new(domain, cutoff);
        let entries: Vec<Vec<Complex64>> = (0..d * d)
            .into_par_iter()
            .map(|nm| {
                let (n, m) = (nm / d, nm % d);
                let h: Vec<Complex64> = comps.iter().map(|v| v[n] * v[m].conj()).collect();
                filt.apply(&h).0
            })
            .collect();
        Ok(Self {
            domain: domain.clone(),
            dim: d,
            cutoff,
            entries,
        })
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    /// Ĝ at grid node `k`.
    pub fn at(&self, k: usize) -> CMat {
        CMat::from_fn(self.dim, self.dim, |n, m| self.entries[n * self.dim + m][k])
    }

    /// `∫ d²z′/π Ĝ(z′) K(z′)`.
    pub fn reconstruct(&self, k: &PhaseGrid) -> Result<CMat> {
        if k.domain() != &self.domain {
            return Err(TomoError::DomainMismatch("K grid differs from the quantizer grid".into()));
        }
        let w = k.weights();
        let d = self.dim;
        Ok(CMat::from_fn(d, d, |n, m| {
            let e = &self.entries[n * d + m];
            let mut acc = c(0.0, 0.0);
            for ((g, kv), wi) in e.iter().zip(k.values()).zip(&w) {
                acc += g * kv * *wi;
            }
            acc / PI
        }))
    }
}

/// Ĝ(z′) on the truncation by FFT convolution over `grid`, taken at the node
/// nearest to `zp`.
pub fn quantizer_g(zp: Complex64, space: &FockSpace, grid: &BoxDomain, cutoff: f64) -> Result<CMat> {
    let qf = QuantizerField::new(space, grid, cutoff)?;
    let k = nearest_node(grid, zp);
    Ok(qf.at(k))
}

pub fn nearest_node(grid: &BoxDomain, z: Complex64) -> usize {
    let idx: Vec<usize> = [z.re, z.im]
        .iter()
        .enumerate()
        .map(|(ax, &x)| {
            let t = ((x - grid.lo()[ax]) / grid.spacing(ax)).round();
            t.clamp(0.0, (grid.shape()[ax] - 1) as f64) as usize
        })
        .collect();
    grid.ravel(&idx)
}

/// `g_Ξ(r) = ∫₀^Ξ k e^{k²/4} J₀(kr) dk`, the radial quantizer kernel.
pub struct RadialKernel {
    dr: f64,
    table: Vec<f64>,
}

impl RadialKernel {
    pub fn new(cutoff: f64, r_max: f64, dr: f64) -> Self {
        let (kx, kw) = gauss_legendre(64);
        let (tx, tw) = gauss_legendre(64);
        let panels = (cutoff.ceil() as usize).max(1) * 2;
        let n = (r_max / dr).ceil() as usize + 2;
        let table = (0..n)
            .into_par_iter()
            .map(|i| {
                let r = i as f64 * dr;
                let mut acc = 0.0;
                for p in 0..panels {
                    let (a, b) = (cutoff * p as f64 / panels as f64, cutoff * (p + 1) as f64 / panels as f64);
                    for (x, w) in kx.iter().zip(&kw) {
                        let k = 0.5 * (a + b) + 0.5 * (b - a) * x;
                        // J₀(kr) = (1/π) ∫₀^π cos(kr sin t) dt
                        let j0: f64 = tx
                            .iter()
                            .zip(&tw)
                            .map(|(t, wt)| {
                                let s = 0.5 * PI * (t + 1.0);
                                0.5 * PI * wt * (k * r * s.sin()).cos()
                            })
                            .sum::<f64>()
                            / PI;
                        acc += 0.5 * (b - a) * w * k * (k * k / 4.0).exp() * j0;
                    }
                }
                acc
            })
            .collect();
        Self { dr, table }
    }

    pub fn eval(&self, r: f64) -> f64 {
        crate::radon_affine::lerp_uniform(&self.table, 0.0, self.dr, r)
    }
}

/// Ĝ(z′) by direct quadrature `(1/2π) Σ w g_Ξ(|z − z′|) ⟨n|z⟩⟨z|m⟩` over the grid.
pub fn quantizer_g_direct(zp: Complex64, space: &FockSpace, grid: &BoxDomain, kernel: &RadialKernel) -> CMat {
    let pg = PhaseGrid::constant(grid.clone(), c(0.0, 0.0));
    let w = pg.weights();
    let d = space.dim();
    let mut g = CMat::zeros(d, d);
    for (k, wk) in w.iter().enumerate() {
        let z = pg.z(k);
        let kr = kernel.eval((z - zp).norm());
        let v = coherent_components(z, d);
        for n in 0..d {
            for m in 0..d {
                g[(n, m)] += v[n] * v[m].conj() * (kr * wk);
            }
        }
    }
    g / c(2.0 * PI, 0.0)
}

/// `K_{Ĝ(z′)}(z) = ⟨z|Ĝ(z′)|z⟩` over the grid with untruncated overlaps,
/// i.e. the band-limited image of `π δ(z − z′)`.
pub fn mollified_orthonormality(zp: Complex64, grid: &BoxDomain, cutoff: f64) -> Result<PhaseGrid> {
    let k = PhaseGrid::from_fn(grid.clone(), |z| c((-(z - zp).norm_sqr()).exp(), 0.0));
    phi_from_k(&k, cutoff)
}

/// `Tr(ρA) ≈ ∫ d²z/π K_ρ φ_A`.
pub fn pair_expectation(k_rho: &PhaseGrid, phi_a: &PhaseGrid) -> Result<Complex64> {
    check_same_grid(k_rho, phi_a)?;
    let w = k_rho.weights();
    Ok(w.iter()
        .zip(k_rho.values())
        .zip(phi_a.values())
        .map(|((w, a), b)| a * b * *w)
        .sum::<Complex64>()
        / PI)
}

/// Cost, in kernel evaluations, of the direct double integral for a star product.
pub fn star_cost_estimate(grid: &BoxDomain, space: &FockSpace) -> f64 {
    let nodes = grid.len() as f64;
    let d = space.dim() as f64;
    nodes * nodes * nodes * d * d * d
}

/// `(K₁ ⋆ K₂)(z) = ∫∫ d²z₁/π d²z₂/π K₁(z₁) K₂(z₂) Tr(Ĝ(z₁)Ĝ(z₂)|z⟩⟨z|)`,
/// evaluated by factorizing the kernel: `⟨z|X₁ X₂|z⟩` with
/// `Xᵢ = ∫ d²z′/π Kᵢ(z′) Ĝ(z′)`.
pub fn star_product(k1: &PhaseGrid, k2: &PhaseGrid, space: &FockSpace, cutoff: f64) -> Result<PhaseGrid> {
    check_same_grid(k1, k2)?;
    if space.n_max() > STAR_MAX_NMAX {
        return Err(TomoError::BudgetExceeded(format!(
            "star product limited to n_max ≤ {STAR_MAX_NMAX}; n_max = {} would need ~{:.2e} kernel evaluations",
            space.n_max(),
            star_cost_estimate(k1.domain(), space)
        )));
    }
    let qf = QuantizerField::new(space, k1.domain(), cutoff)?;
    let x1 = qf.reconstruct(k1)?;
    let x2 = qf.reconstruct(k2)?;
    let prod = x1 * x2;
    Ok(husimi_grid(&prod, k1.domain()).with_cutoff(cutoff))
}

/// `Q(z₁, z₂, z) = Tr(Ĝ(z₁) Ĝ(z₂) |z⟩⟨z|)` at grid nodes `k1`, `k2`.
pub fn star_kernel(qf: &QuantizerField, k1: usize, k2: usize, z: Complex64) -> Complex64 {
    husimi_k(&(qf.at(k1) * qf.at(k2)), z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use rand::SeedableRng;

    fn space(n: usize) -> FockSpace {
        FockSpace::new(n).unwrap()
    }

    #[test]
    fn vacuum_and_overlaps() {
        let s = space(32);
        let v0 = coherent_vector(c(0.0, 0.0), &s);
        assert_eq!(v0[0], c(1.0, 0.0));
        assert!(v0.iter().skip(1).all(|x| x.norm() == 0.0));
        let v1 = coherent_vector(c(1.0, 0.0), &s);
        let ov = v1.dotc(&v0).norm_sqr();
        assert!((ov - (-1.0f64).exp()).abs() < 1e-8);
        for &z in &[c(2.0, 0.0), c(-1.0, 1.5), c(0.3, -1.9)] {
            assert!((coherent_vector(z, &s).norm_squared() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn displacement_properties() {
        let s = space(32);
        let id = CMat::identity(33, 33);
        assert!(max_abs(&(displacement_matrix(c(0.0, 0.0), &s) - &id)) < 1e-12);
        let z = c(0.8, -0.6);
        let prod = displacement_matrix(z, &s) * displacement_matrix(-z, &s);
        assert!(max_abs(&(prod - &id)) < 1e-8);
        let d1 = displacement_matrix(c(1.0, 0.0), &s);
        let v = coherent_vector(c(1.0, 0.0), &s);
        let diff = (0..33).map(|i| (d1[(i, 0)] - v[i]).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-8, "{diff}");
    }

    #[test]
    fn husimi_examples() {
        let s = space(10);
        let id = CMat::identity(11, 11);
        assert!((husimi_k(&id, c(0.5, 0.3)) - 1.0).norm() < 1e-10);
        let p0 = s.projector(0);
        let z = c(0.7, -0.2);
        assert!((husimi_k(&p0, z).re - (-z.norm_sqr()).exp()).abs() < 1e-14);
        let s32 = space(32);
        let z0 = c(0.5, 0.5);
        let pz = DensityMatrix::pure(&coherent_vector(z0, &s32)).unwrap();
        let k = husimi_k(pz.matrix(), z);
        assert!((k.re - (-(z - z0).norm_sqr()).exp()).abs() < 1e-8);
    }

    #[test]
    fn density_validation() {
        let m = CMat::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.0, 0.1), c(0.0, 0.1), c(0.5, 0.0)]);
        assert!(DensityMatrix::new(m).is_err());
        let neg = CMat::from_row_slice(2, 2, &[c(1.5, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-0.5, 0.0)]);
        assert!(DensityMatrix::new(neg).is_err());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let r = DensityMatrix::random(4, &mut rng);
        assert!(DensityMatrix::new(r.matrix().clone()).is_ok());
    }

    #[test]
    fn json_roundtrip() {
        let m = CMat::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.1, -0.2), c(0.1, 0.2), c(0.5, 0.0)]);
        let j = MatrixJson::from_matrix(&m);
        let s = serde_json::to_string(&j).unwrap();
        let back: MatrixJson = serde_json::from_str(&s).unwrap();
        assert_eq!(back.to_matrix().unwrap(), m);
        assert!(serde_json::from_str::<MatrixJson>(r#"{"dim":1,"re":[[1]],"im":[[0]],"x":1}"#).is_err());
    }

    #[test]
    fn circles_agree_with_least_squares() {
        let s = space(3);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let rho = DensityMatrix::random(4, &mut rng);
        let a = reconstruct_by_circles(|z| husimi_k(rho.matrix(), z), &s).unwrap();
        assert!(max_abs(&(a - rho.matrix())) < 1e-8);
    }

    #[test]
    fn too_few_samples_rejected() {
        let s = space(2);
        let zs = vec![c(0.1, 0.0); 9];
        let ks = vec![c(1.0, 0.0); 9];
        assert!(matches!(
            reconstruct_from_samples(&zs, &ks, &s),
            Err(TomoError::RankDeficient { .. })
        ));
        assert!(reconstruct_from_samples(&zs[..4], &ks[..4], &s).is_err());
    }

    #[test]
    fn fft_filter_preserves_dc() {
        let s = space(2);
        let dom = s.default_domain();
        let k = husimi_grid(&s.projector(0), &dom);
        let phi = phi_from_k(&k, 6.0).unwrap();
        assert_eq!(phi.cutoff(), Some(6.0));
        let plain = |g: &PhaseGrid| g.values().iter().sum::<Complex64>();
        assert!((plain(&phi) - plain(&k)).norm() < 1e-9 * plain(&k).norm());
    }

    #[test]
    fn direct_quantizer_matches_fft() {
        let s = space(1);
        let dom = BoxDomain::centered(6.0, 96, 2).unwrap();
        let xi = 5.0;
        let kernel = RadialKernel::new(xi, 18.0, 0.002);
        let k = nearest_node(&dom, c(0.3, -0.2));
        let zp = c(dom.node(k)[0], dom.node(k)[1]);
        let fft = quantizer_g(zp, &s, &dom, xi).unwrap();
        let direct = quantizer_g_direct(zp, &s, &dom, &kernel);
        assert!(max_abs(&(&fft - &direct)) < 1e-2 * max_abs(&fft), "{fft} vs {direct}");
        assert!(hermiticity_defect(&fft) < 1e-8);
    }

    #[test]
    fn star_budget_enforced() {
        let s = space(5);
        let dom = BoxDomain::centered(4.0, 16, 2).unwrap();
        let k = PhaseGrid::constant(dom, c(1.0, 0.0));
        let err = star_product(&k, &k, &s, 6.0).unwrap_err();
        assert!(err.is_budget());
        assert!(err.to_string().contains("kernel evaluations"));
    }
}
