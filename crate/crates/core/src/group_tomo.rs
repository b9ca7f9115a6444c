//! Tomography of states on full matrix algebras through unitary
//! representations, with SU(2) spin-j as the concrete family.
//!
//! - sampling function `F_ρ(g) = Tr(ρ U(g))`;
//! - spectral tomogram `W_ω(ξ; λ) = Tr(ω δ(λ − ξ̂))`, a finite set of atoms;
//! - its Fourier form `W(λ) = (1/2π) ∫ e^{−isλ} F(exp(sξ)) ds`, windowed.
//!
//! The biorthogonal dual uses the bilinear pairing `⟨D, U⟩ = Tr(D U)`, under
//! which `ρ = Σ_i F_ρ(x_i) D_i` holds with no extra conjugation.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::linalg::{c, exp_i_hermitian, hermitian_eigen, hermiticity_defect, max_abs, min_eigenvalue, CMat, CVec};

/// Eigenvalues closer than this are merged into one atom.
pub const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum GroupId {
    /// Spin-j representation of SU(2), `two_j = 2j`.
    Su2 { two_j: usize },
    Custom,
}

/// An SU(2) element stored as a unit quaternion `(w, x, y, z)`, i.e. the
/// spin-½ matrix `w I + i (x σ_x + y σ_y + z σ_z)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Su2Element {
    q: [f64; 4],
}

impl Su2Element {
    pub fn identity() -> Self {
        Self { q: [1.0, 0.0, 0.0, 0.0] }
    }

    /// `exp(i s n̂·σ/2)`; the axis need not be normalized.
    pub fn from_axis_angle(axis: [f64; 3], s: f64) -> Result<Self> {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if !(n > 0.0) || !s.is_finite() {
            return Err(TomoError::InvalidParameter("axis must be non-zero and angle finite".into()));
        }
        let (sn, cs) = (0.5 * s).sin_cos();
        Ok(Self {
            q: [cs, sn * axis[0] / n, sn * axis[1] / n, sn * axis[2] / n],
        })
    }

    /// Haar-random element.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let q: [f64; 4] = std::array::from_fn(|_| rng.random::<f64>() * 2.0 - 1.0);
            let n2: f64 = q.iter().map(|v| v * v).sum();
            // rejection sampling in the 4-ball gives a uniform direction
            if n2 > 1e-6 && n2 <= 1.0 {
                let n = n2.sqrt();
                return Self { q: q.map(|v| v / n) };
            }
        }
    }

    pub fn quaternion(&self) -> [f64; 4] {
        self.q
    }

    pub fn inverse(&self) -> Self {
        let [w, x, y, z] = self.q;
        Self { q: [w, -x, -y, -z] }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let [a0, a1, a2, a3] = self.q;
        let [b0, b1, b2, b3] = other.q;
        // (a0 + i a·σ)(b0 + i b·σ) = a0b0 − a·b + i(a0 b + b0 a − a×b)·σ
        Self {
            q: [
                a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
                a0 * b1 + b0 * a1 - (a2 * b3 - a3 * b2),
                a0 * b2 + b0 * a2 - (a3 * b1 - a1 * b3),
                a0 * b3 + b0 * a3 - (a1 * b2 - a2 * b1),
            ],
        }
    }

    /// `(n̂, s)` with `g = exp(i s n̂·σ/2)`, `s ∈ [0, 2π]`.
    pub fn axis_angle(&self) -> ([f64; 3], f64) {
        let [w, x, y, z] = self.q;
        let v = (x * x + y * y + z * z).sqrt();
        if v == 0.0 {
            return ([0.0, 0.0, 1.0], if w >= 0.0 { 0.0 } else { 2.0 * PI });
        }
        ([x / v, y / v, z / v], 2.0 * v.atan2(w))
    }
}

#[derive(Clone, Debug)]
pub struct UnitaryRep {
    dim: usize,
    group_id: GroupId,
    generators: Vec<CMat>,
}

/// Spin-j representation, `two_j = 2j ≥ 1`, basis ordered `m = j, j−1, …, −j`.
pub fn su2_rep(two_j: usize) -> Result<UnitaryRep> {
    if two_j == 0 {
        return Err(TomoError::InvalidParameter("2j must be a positive integer".into()));
    }
    let dim = two_j + 1;
    let j = two_j as f64 / 2.0;
    let m = |k: usize| j - k as f64;
    let mut jp = CMat::zeros(dim, dim);
    for k in 1..dim {
        // J₊|m⟩ = √(j(j+1) − m(m+1)) |m+1⟩
        jp[(k - 1, k)] = c((j * (j + 1.0) - m(k) * (m(k) + 1.0)).sqrt(), 0.0);
    }
    let jm = jp.adjoint();
    let jx = (&jp + &jm) * c(0.5, 0.0);
    let jy = (&jp - &jm) * c(0.0, -0.5);
    let jz = CMat::from_fn(dim, dim, |a, b| if a == b { c(m(a), 0.0) } else { c(0.0, 0.0) });
    Ok(UnitaryRep {
        dim,
        group_id: GroupId::Su2 { two_j },
        generators: vec![jx, jy, jz],
    })
}

/// [`su2_rep`] from `j` given as a number (0.5, 1, 1.5, …).
pub fn su2_rep_j(j: f64) -> Result<UnitaryRep> {
    let two_j = 2.0 * j;
    if !(two_j >= 1.0) || (two_j - two_j.round()).abs() > 1e-12 {
        return Err(TomoError::InvalidParameter(format!("j = {j} is not a positive half-integer")));
    }
    su2_rep(two_j.round() as usize)
}

impl UnitaryRep {
    /// Representation generated by arbitrary Hermitian matrices, evaluated
    /// at parameters θ as `exp(i Σ θ_k ξ̂_k)`.
    pub fn custom(generators: Vec<CMat>) -> Result<Self> {
        let dim = generators.first().map(|g| g.nrows()).unwrap_or(0);
        if dim == 0 {
            return Err(TomoError::InvalidParameter("at least one generator required".into()));
        }
        for g in &generators {
            if g.nrows() != dim || g.ncols() != dim {
                return Err(TomoError::DimensionMismatch {
                    expected: dim,
                    actual: g.nrows(),
                });
            }
            if hermiticity_defect(g) > 1e-12 {
                return Err(TomoError::InvalidParameter("generators must be Hermitian".into()));
            }
        }
        Ok(Self {
            dim,
            group_id: GroupId::Custom,
            generators,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn group_id(&self) -> &GroupId {
        &self.group_id
    }

    pub fn generators(&self) -> &[CMat] {
        &self.generators
    }

    /// `U(g) = exp(i s n̂·J)` for SU(2) representations.
    pub fn evaluate(&self, g: &Su2Element) -> CMat {
        let (n, s) = g.axis_angle();
        self.evaluate_axis(n, s)
    }

    pub fn evaluate_axis(&self, n: [f64; 3], s: f64) -> CMat {
        exp_i_hermitian(&self.combine(&n), s)
    }

    pub fn evaluate_params(&self, theta: &[f64]) -> CMat {
        exp_i_hermitian(&self.combine(theta), 1.0)
    }

    fn combine(&self, coeffs: &[f64]) -> CMat {
        let mut m = CMat::zeros(self.dim, self.dim);
        for (g, &a) in self.generators.iter().zip(coeffs) {
            m += g * c(a, 0.0);
        }
        m
    }

    pub fn algebra_element(&self, coeffs: &[f64]) -> Result<AlgebraElement> {
        if coeffs.len() != self.generators.len() {
            return Err(TomoError::DimensionMismatch {
                expected: self.generators.len(),
                actual: coeffs.len(),
            });
        }
        Ok(AlgebraElement {
            coeffs: coeffs.to_vec(),
            matrix: self.combine(coeffs),
        })
    }

    /// Max-abs deviation of `[J_x, J_y] = iJ_z` and cyclic relations (SU(2) only).
    pub fn commutator_residual(&self) -> f64 {
        if self.generators.len() != 3 {
            return f64::NAN;
        }
        let g = &self.generators;
        let comm = |a: &CMat, b: &CMat| a * b - b * a;
        let i = c(0.0, 1.0);
        [(0, 1, 2), (1, 2, 0), (2, 0, 1)]
            .iter()
            .map(|&(a, b, k)| max_abs(&(comm(&g[a], &g[b]) - &g[k] * i)))
            .fold(0.0, f64::max)
    }
}

/// `ξ̂ = Σ coeffs_k ξ̂_k`.
#[derive(Clone, Debug)]
pub struct AlgebraElement {
    pub coeffs: Vec<f64>,
    pub matrix: CMat,
}

impl AlgebraElement {
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|v| v * s).collect(),
            matrix: &self.matrix * c(s, 0.0),
        }
    }
}

fn check_dim(a: &CMat, dim: usize) -> Result<()> {
    if a.nrows() != dim || a.ncols() != dim {
        return Err(TomoError::DimensionMismatch {
            expected: dim,
            actual: a.nrows(),
        });
    }
    Ok(())
}

/// `F_ρ(g) = Tr(ρ U(g))`.
pub fn sampling_function(rho: &CMat, rep: &UnitaryRep, g: &Su2Element) -> Result<Complex64> {
    check_dim(rho, rep.dim())?;
    Ok((rho * rep.evaluate(g)).trace())
}

/// Smallest eigenvalue of the Gram matrix `F_ρ(g_i⁻¹ g_j)`.
pub fn gram_psd_check(rho: &CMat, rep: &UnitaryRep, elements: &[Su2Element]) -> Result<f64> {
    check_dim(rho, rep.dim())?;
    if elements.is_empty() {
        return Err(TomoError::InvalidParameter("no group elements".into()));
    }
    let us: Vec<CMat> = elements.iter().map(|g| rep.evaluate(g)).collect();
    let n = elements.len();
    let mut gram = CMat::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            // U(g_i⁻¹ g_j) = U(g_i)† U(g_j)
            let v = (rho * us[i].adjoint() * &us[j]).trace();
            gram[(i, j)] = v;
            gram[(j, i)] = v.conj();
        }
    }
    Ok(min_eigenvalue(&gram))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub lambda: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteTomogram {
    pub atoms: Vec<Atom>,
}

impl DiscreteTomogram {
    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    /// `Σ_k w_k e^{isλ_k}`.
    pub fn characteristic(&self, s: f64) -> Complex64 {
        self.atoms
            .iter()
            .map(|a| Complex64::from_polar(a.weight, s * a.lambda))
            .sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,weight\n");
        for a in &self.atoms {
            out.push_str(&format!("{},{}\n", a.lambda, a.weight));
        }
        out
    }
}

/// Eigenvalue clusters of ξ̂ with their eigenvectors.
fn spectral_clusters(xi: &CMat) -> Vec<(f64, Vec<CVec>)> {
    let (vals, vecs) = hermitian_eigen(xi);
    let mut clusters: Vec<(f64, Vec<CVec>, usize)> = Vec::new();
    let mut start = f64::NAN;
    for (k, &v) in vals.iter().enumerate() {
        let col = vecs.column(k).into_owned();
        match clusters.last_mut() {
            Some((sum, members, count)) if (v - start).abs() <= DEGENERACY_TOL => {
                *sum += v;
                *count += 1;
                members.push(col);
            }
            _ => {
                start = v;
                clusters.push((v, vec![col], 1));
            }
        }
    }
    clusters
        .into_iter()
        .map(|(sum, members, count)| (sum / count as f64, members))
        .collect()
}

/// `w_k = Tr(ω P_k)` over the eigenprojectors of ξ̂.
pub fn tomogram_spectral(omega: &CMat, xi: &AlgebraElement) -> Result<DiscreteTomogram> {
    check_dim(omega, xi.matrix.nrows())?;
    let atoms = spectral_clusters(&xi.matrix)
        .into_iter()
        .map(|(lambda, vecs)| {
            let weight = vecs.iter().map(|v| v.dotc(&(omega * v)).re).sum();
            Atom { lambda, weight }
        })
        .collect();
    Ok(DiscreteTomogram { atoms })
}

/// Smallest distance between distinct eigenvalues of ξ̂ (∞ with one cluster).
pub fn min_gap(xi: &AlgebraElement) -> f64 {
    let cl = spectral_clusters(&xi.matrix);
    cl.windows(2).map(|w| w[1].0 - w[0].0).fold(f64::INFINITY, f64::min)
}

/// Windowed Fourier tomogram sampled on a λ grid.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierTomogram {
    pub lambdas: Vec<f64>,
    pub values: Vec<f64>,
    /// Frequency resolution `π/S` of the window `[−S, S]`.
    pub resolution: f64,
    /// `F(exp(sξ))` on the s grid.
    pub samples: Vec<(f64, Complex64)>,
}

impl FourierTomogram {
    /// Trapezoid mass of W within `±min(3·resolution, half_gap)` of `center`.
    pub fn peak_mass(&self, center: f64, half_gap: f64) -> f64 {
        let r = (3.0 * self.resolution).min(half_gap);
        let mut acc = 0.0;
        for k in 1..self.lambdas.len() {
            let (a, b) = (self.lambdas[k - 1], self.lambdas[k]);
            let (lo, hi) = (a.max(center - r), b.min(center + r));
            if hi <= lo {
                continue;
            }
            let lerp = |x: f64| self.values[k - 1] + (self.values[k] - self.values[k - 1]) * (x - a) / (b - a);
            acc += 0.5 * (hi - lo) * (lerp(lo) + lerp(hi));
        }
        acc
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,value\n");
        for (l, v) in self.lambdas.iter().zip(&self.values) {
            out.push_str(&format!("{l},{v}\n"));
        }
        out
    }
}

/// `W(λ) = (1/2π) Σ_s Δs · hann(s) · e^{−isλ} Tr(ω e^{isξ̂})`.
///
/// `s_grid` must be uniform and symmetric about 0.
pub fn tomogram_fourier(omega: &CMat, xi: &AlgebraElement, lambda_grid: &[f64], s_grid: &[f64]) -> Result<FourierTomogram> {
    check_dim(omega, xi.matrix.nrows())?;
    let n = s_grid.len();
    if n < 3 {
        return Err(TomoError::InvalidParameter("s grid needs at least 3 points".into()));
    }
    let s_max = s_grid[n - 1];
    let ds = (s_grid[n - 1] - s_grid[0]) / (n - 1) as f64;
    for (k, &s) in s_grid.iter().enumerate() {
        if (s + s_grid[n - 1 - k]).abs() > 1e-9 * s_max.abs().max(1.0) {
            return Err(TomoError::InvalidParameter("s grid must be symmetric about 0".into()));
        }
        if (s - (s_grid[0] + k as f64 * ds)).abs() > 1e-9 * s_max.abs().max(1.0) {
            return Err(TomoError::InvalidParameter("s grid must be uniform".into()));
        }
    }
    let length = 2.0 * s_max;
    let gap = min_gap(xi);
    if gap.is_finite() && length < 4.0 * 2.0 * PI / gap {
        log::warn!(
            "window length {length:.3} too short for eigenvalue gap {gap:.3e}; resolvable gap ≈ {:.3e}",
            8.0 * PI / length
        );
    }
    let (vals, vecs) = hermitian_eigen(&xi.matrix);
    // Tr(ω e^{isξ̂}) = Σ_k e^{isλ_k} ⟨v_k|ω|v_k⟩
    let diag: Vec<f64> = (0..vals.len())
        .map(|k| {
            let v = vecs.column(k);
            v.dotc(&(omega * v)).re
        })
        .collect();
    let samples: Vec<(f64, Complex64)> = s_grid
        .iter()
        .map(|&s| {
            let f = vals
                .iter()
                .zip(&diag)
                .map(|(l, d)| Complex64::from_polar(*d, s * l))
                .sum();
            (s, f)
        })
        .collect();
    let hann = |s: f64| 0.5 * (1.0 + (PI * s / s_max).cos());
    let values = lambda_grid
        .iter()
        .map(|&l| {
            let mut acc = c(0.0, 0.0);
            for (k, (s, f)) in samples.iter().enumerate() {
                let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
                acc += f * Complex64::from_polar(w * ds * hann(*s), -s * l);
            }
            acc.re / (2.0 * PI)
        })
        .collect();
    Ok(FourierTomogram {
        lambdas: lambda_grid.to_vec(),
        values,
        resolution: PI / s_max,
        samples,
    })
}

/// `Tr(ω e^{isξ̂})` by direct matrix exponential.
pub fn characteristic_function(omega: &CMat, xi: &AlgebraElement, s: f64) -> Complex64 {
    (omega * exp_i_hermitian(&xi.matrix, s)).trace()
}

/// Residuals of `U(g⁻¹hg) = U(g)†U(h)U(g)` and of `F_ρ(g⁻¹hg) = F_{UρU†}(h)`.
pub fn equivariance_check(rep: &UnitaryRep, rho: &CMat, g: &Su2Element, h: &Su2Element) -> Result<(f64, f64)> {
    check_dim(rho, rep.dim())?;
    let ghg = g.inverse().mul(h).mul(g);
    let ug = rep.evaluate(g);
    let lhs = rep.evaluate(&ghg);
    let rhs = ug.adjoint() * rep.evaluate(h) * &ug;
    let r1 = max_abs(&(&lhs - &rhs));
    let transported = &ug * rho * ug.adjoint();
    let f1 = sampling_function(rho, rep, &ghg)?;
    let f2 = sampling_function(&transported, rep, h)?;
    Ok((r1, (f1 - f2).norm()))
}

/// Families `U_i`, `D_i` with `Tr(D_i U_j) = δ_ij`.
#[derive(Clone, Debug)]
pub struct TomographicPair {
    pub u_set: Vec<CMat>,
    pub d_set: Vec<CMat>,
    pub residual: f64,
}

impl TomographicPair {
    /// `F_i = Tr(ρ U_i)`.
    pub fn sample(&self, rho: &CMat) -> Vec<Complex64> {
        self.u_set.iter().map(|u| (rho * u).trace()).collect()
    }

    /// `ρ = Σ_i F_i D_i`.
    pub fn reconstruct(&self, samples: &[Complex64]) -> Result<CMat> {
        if samples.len() != self.d_set.len() {
            return Err(TomoError::DimensionMismatch {
                expected: self.d_set.len(),
                actual: samples.len(),
            });
        }
        let n = self.d_set[0].nrows();
        let mut out = CMat::zeros(n, n);
        for (f, d) in samples.iter().zip(&self.d_set) {
            out += d * *f;
        }
        Ok(out)
    }
}

pub fn build_biorthogonal_pair(u_set: &[CMat]) -> Result<TomographicPair> {
    let n = u_set.first().map(|u| u.nrows()).unwrap_or(0);
    if n == 0 {
        return Err(TomoError::InvalidParameter("empty U set".into()));
    }
    for u in u_set {
        check_dim(u, n)?;
    }
    let n2 = n * n;
    if u_set.len() != n2 {
        return Err(TomoError::RankDeficient {
            rank: u_set.len().min(n2),
            expected: n2,
            condition: f64::INFINITY,
        });
    }
    // column j = row-major vec(U_j)
    let umat = CMat::from_fn(n2, n2, |r, j| u_set[j][(r / n, r % n)]);
    let svd = umat.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let rank = svd.singular_values.iter().filter(|&&s| s > 1e-10 * smax).count();
    if rank < n2 {
        return Err(TomoError::RankDeficient {
            rank,
            expected: n2,
            condition: smax / smin,
        });
    }
    let inv = umat
        .try_inverse()
        .ok_or_else(|| TomoError::RankDeficient {
            rank,
            expected: n2,
            condition: smax / smin,
        })?;
    // Tr(D_i U_j) = vec(D_iᵀ)·vec(U_j), so vec(D_iᵀ) is row i of the inverse
    let d_set: Vec<CMat> = (0..n2)
        .map(|i| CMat::from_fn(n, n, |a, b| inv[(i, b * n + a)]))
        .collect();
    let mut residual: f64 = 0.0;
    for (i, d) in d_set.iter().enumerate() {
        for (j, u) in u_set.iter().enumerate() {
            let want = if i == j { 1.0 } else { 0.0 };
            residual = residual.max(((d * u).trace() - want).norm());
        }
    }
    Ok(TomographicPair {
        u_set: u_set.to_vec(),
        d_set,
        residual,
    })
}

pub fn pauli_set() -> Vec<CMat> {
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    vec![
        CMat::identity(2, 2),
        CMat::from_row_slice(2, 2, &[z, o, o, z]),
        CMat::from_row_slice(2, 2, &[z, -i, i, z]),
        CMat::from_row_slice(2, 2, &[o, z, z, -o]),
    ]
}
