//! `qtomo` (coherent states) and `gtomo` (SU(2) representations).

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use tomo_core::cstomo::{
    husimi_grid, phi_from_k, reconstruct_from_k, star_product, FockSpace, MatrixJson, PhaseGrid, QuantizerField,
};
use tomo_core::group_tomo::{gram_psd_check, su2_rep_j, tomogram_fourier, tomogram_spectral, Su2Element, UnitaryRep};
use tomo_core::linalg::CMat;
use tomo_core::BoxDomain;

use crate::config::{at_least, positive, NumList};
use crate::io::{read_grid_file, read_json, write_atomic, write_grid_file, write_json};

#[derive(Subcommand, Debug, Clone)]
pub enum Qtomo {
    /// K_A(z) = ⟨z|A|z⟩ on a phase grid
    Husimi(HusimiOpts),
    /// band-limited symbol φ from a K grid
    Phi(PhiOpts),
    /// operator from a K grid through the quantizer Ĝ
    Quantize(QuantizeOpts),
    /// operator from a K grid by least squares
    Reconstruct(ReconstructOpts),
    /// K₁ ⋆ K₂
    Star(StarOpts),
}

#[derive(Subcommand, Debug, Clone)]
pub enum Gtomo {
    /// spectral tomogram of a spin-j state along an axis
    Spin(SpinOpts),
    /// Fourier tomogram W(λ) as CSV
    Fourier(FourierOpts),
    /// positivity of sampled Gram matrices
    Gram(GramOpts),
}

fn read_matrix(path: &str) -> Result<CMat> {
    let m: MatrixJson = read_json(path)?;
    Ok(m.to_matrix()?)
}

fn read_phase_grid(path: &str) -> Result<PhaseGrid> {
    PhaseGrid::from_grid_file(read_grid_file(path)?).with_context(|| format!("reading phase grid {path}"))
}

fn space_for(nmax: Option<usize>, dim: Option<usize>) -> Result<FockSpace> {
    match (nmax, dim) {
        (Some(n), Some(d)) if n + 1 != d => bail!("nmax = {n} needs a {}×{} operator, got {d}×{d}", n + 1, n + 1),
        (Some(n), _) => Ok(FockSpace::new(n)?),
        (None, Some(d)) if d >= 2 => Ok(FockSpace::new(d - 1)?),
        _ => bail!("nmax is required"),
    }
}

fn cutoff(opt: Option<f64>, space: &FockSpace) -> Result<f64> {
    positive("cutoff", opt.unwrap_or_else(|| space.default_cutoff()))
}

#[derive(Args, Serialize, Deserialize, Default, Debug, Clone)]
#[serde(default, deny_unknown_fields)]
pub struct HusimiOpts {
    /// operator as JSON {dim, re, im}
    #[arg(long)]
    pub state: Option<String>,
    #[arg(long)]
    pub nmax: Option<usize>,
    /// nodes per axis of the phase grid
    #[arg(long)]
    pub grid: Option<usize>,
    /// half-width of the phase grid
    #[arg(long, allow_hyphen_values = true)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub csv: Option<String>,
}

fn phase_domain(space: &FockSpace, grid: Option<usize>, radius: Option<f64>) -> Result<BoxDomain> {
    let d = space.default_domain();
    let n = at_least("grid", grid.unwrap_or(d.shape()[0]), 4)?;
    let r = positive("radius", radius.unwrap_or(d.hi()[0]))?;
    Ok(BoxDomain::centered(r, n, 2)?)
}

fn phase_csv(g: &PhaseGrid) -> Result<Vec<u8>> {
    use std::io::Write;
    let mut buf = Vec::new();
    writeln!(buf, "re_z,im_z,re,im")?;
    for (k, v) in g.values().iter().enumerate() {
        let z = g.z(k);
        writeln!(buf, "{},{},{},{}", z.re, z.im, v.re, v.im)?;
    }
    Ok(buf)
}

fn husimi(o: HusimiOpts) -> Result<()> {
    let Some(state) = o.state.as_deref() else {
        bail!("state is required");
    };
    let a = read_matrix(state)?;
    let space = space_for(o.nmax, Some(a.nrows()))?;
    let grid = husimi_grid(&a, &phase_domain(&space, o.grid, o.radius)?);
    if let Some(p) = &o.csv {
        write_atomic(p, &phase_csv(&grid)?)?;
    }
    write_grid_file(o.out.as_deref().unwrap_or("-"), &grid.to_grid_file())
}

#[derive(Args, Serialize, Deserialize, Default, Debug, Clone)]
#[serde(default, deny_unknown_fields)]
pub struct PhiOpts {
    /// K grid (complex TOMOGRD1), "-" for stdin
    #[arg(long)]
    pub input: Option<String>,
    #[arg(long)]
    pub nmax: Option<usize>,
    /// band limit Ξ (default 4√nmax + 2)
    #[arg(long, allow_hyphen_values = true)]
    pub cutoff: Option<f64>,
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub csv: Option<String>,
}

fn phi(o: PhiOpts) -> Result<()> {
    let k = read_phase_grid(o.input.as_deref().unwrap_or("-"))?;
    let xi = match (o.cutoff, o.nmax) {
        (Some(x), _) => positive("cutoff", x)?,
        (None, Some(n)) => FockSpace::new(n)?.default_cutoff(),
        (None, None) => bail!("phi needs --cutoff or --nmax"),
    };
    let phi = phi_from_k(&k, xi)?;
    if let Some(p) = &o.csv {
        write_atomic(p, &phase_csv(&phi)?)?;
    }
    write_grid_file(o.out.as_deref().unwrap_or("-"), &phi.to_grid_file())
}

#[derive(Args, Serialize, Deserialize, Default, Debug, Clone)]
#[serde(default, deny_unknown_fields)]
pub struct QuantizeOpts {
    #[arg(long)]
    pub input: Option<String>,
    #[arg(long)]
    pub nmax: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub cutoff: Option<f64>,
    /// operator JSON, "-" for stdout
    #[arg(long)]
    pub out: Option<String>,
}

fn quantize(o: QuantizeOpts) -> Result<()> {
    let k = read_phase_grid(o.input.as_deref().unwrap_or("-"))?;
    let space = space_for(o.nmax, None)?;
    let qf = QuantizerField::new(&space, k.domain(), cutoff(o.cutoff, &space)?)?;
    write_json(o.out.as_deref().unwrap_or("-"), &MatrixJson::from_matrix(&qf.reconstruct(&k)?))
}

#[derive(Args, Serialize, Deserialize, Default, Debug, Clone)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructOpts {
    #[arg(long)]
    pub input: Option<String>,
    #[arg(long)]
    pub nmax: Option<usize>,
    #[arg(long)]
    pub out: Option<String>,
}

fn reconstruct(o: ReconstructOpts) -> Result<()> {
    let k = read_phase_grid(o.input.as_deref().unwrap_or("-"))?;
    let space = space_for(o.nmax, None)?;
    write_json(o.out.as_deref().unwrap_or("-"), &MatrixJson::from_matrix(&reconstruct_from_k(&k, &space)?))
}

#[derive(Args, Serialize, Deserialize, Default, Debug, Clone)]
#[serde(default, deny_unknown_fields)]
pub struct StarOpts {
    #[arg(long)]
    pub left: Option<String>,
    #[arg(long)]
    pub right: Option<String>,
    #[arg(long)]
    pub nmax: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub cutoff: Option<f64>,
    #[arg(long)]
    pub out: Option<String>,
}

fn star(o: StarOpts) -> Result<()> {
    let (Some(l), Some(r)) = (o.left.as_deref(), o.right.as_deref()) else {
        bail!("star needs --left and --right");
    };
    let (k1, k2) = (read_phase_grid(l)?, read_phase_grid(r)?);
    let space = space_for(o.nmax, None)?;
    let out = star_product(&k1, &k2, &space, cutoff(o.cutoff, &space)?)?;
    write_grid_file(o.out.as_deref().unwrap_or("-"), &out.to_grid_file())
}

pub fn qtomo(cmd: Qtomo) -> Result<()> {
    match cmd {
        Qtomo::Husimi(o) => husimi(o),
        Qtomo::Phi(o) => phi(o),
        Qtomo::Quantize(o) => quantize(o),
        Qtomo::Reconstruct(o) => reconstruct(o),
        Qtomo::Star(o) => star(o),
    }
}

fn rep_for(j: Option<f64>) -> Result<UnitaryRep> {
    let Some(j) = j else {
        bail!("j is required");
    };
    Ok(su2_rep_j(j)?)
}

fn axis(a: Option<&NumList>) -> Result<[f64; 3]> {
    let v = a.map_or(vec![0.0, 0.0, 1.0], |l| l.0.clone());
    match v.as_slice() {
        &[x, y, z] if x != 0.0 || y != 0.0 || z != 0.0 => Ok([x, y, z]),
        _ => bail!("axis needs three numbers, not all zero; got {v:?}"),
    }
}

fn state_for(path: Option<&str>, rep: &UnitaryRep) -> Result<CMat> {
    let Some(p) = path else {
        bail!("state is required");
    };
    let m = read_matrix(p)?;
    if m.nrows() != rep.dim() {
        bail!("state is {}×{}, the representation has dimension {}", m.nrows(), m.nrows(), rep.dim());
    }
    Ok(m)
}

#[derive(Args, Serialize, Deserialize, Default, Debug, Clone)]
#[serde(default, deny_unknown_fields)]
pub struct SpinOpts {
    /// spin j (half-integer)
    #[arg(long, allow_hyphen_values = true)]
    pub j: Option<f64>,
    /// density matrix JSON {dim, re, im}
    #[arg(long)]
    pub state: Option<String>,
    /// algebra element coefficients along the generators
    #[arg(long, allow_hyphen_values = true)]
    pub axis: Option<NumList>,
    /// tomogram JSON, "-" for stdout
    #[arg(long)]
    pub out: Option<String>,
    /// export lambda,weight as CSV
    #[arg(long)]
    pub csv: Option<String>,
}

fn spin(o: SpinOpts) -> Result<()> {
    let rep = rep_for(o.j)?;
    let rho = state_for(o.state.as_deref(), &rep)?;
    let xi = rep.algebra_element(&axis(o.axis.as_ref())?)?;
    let w = tomogram_spectral(&rho, &xi)?;
    if let Some(p) = &o.csv {
        write_atomic(p, w.to_csv().as_bytes())?;
    }
    write_json(o.out.as_deref().unwrap_or("-"), &w)
}

#[derive(Args, Serialize, Deserialize, Default, Debug, Clone)]
#[serde(default, deny_unknown_fields)]
pub struct FourierOpts {
    #[arg(long, allow_hyphen_values = true)]
    pub j: Option<f64>,
    #[arg(long)]
    pub state: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub axis: Option<NumList>,
    /// half-length of the s window
    #[arg(long, allow_hyphen_values = true)]
    pub s_max: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub s_step: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda_max: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda_step: Option<f64>,
    /// CSV lambda,value, "-" for stdout
    #[arg(long)]
    pub out: Option<String>,
}

fn symmetric_grid(name: &str, half: f64, step: f64) -> Result<Vec<f64>> {
    let half = positive(name, half)?;
    let step = positive(name, step)?;
    let k = (half / step).round() as i64;
    if k < 1 {
        bail!("{name}: the window must hold at least one step");
    }
    Ok((-k..=k).map(|i| i as f64 * step).collect())
}

fn fourier(o: FourierOpts) -> Result<()> {
    let rep = rep_for(o.j)?;
    let rho = state_for(o.state.as_deref(), &rep)?;
    let n = axis(o.axis.as_ref())?;
    let xi = rep.algebra_element(&n)?;
    let norm = n.iter().map(|v| v * v).sum::<f64>().sqrt();
    let j = (rep.dim() - 1) as f64 / 2.0;
    let s = symmetric_grid("s_max/s_step", o.s_max.unwrap_or(60.0), o.s_step.unwrap_or(0.03))?;
    let l = symmetric_grid(
        "lambda_max/lambda_step",
        o.lambda_max.unwrap_or(norm * j + 1.0),
        o.lambda_step.unwrap_or(0.005),
    )?;
    let w = tomogram_fourier(&rho, &xi, &l, &s)?;
    write_atomic(o.out.as_deref().unwrap_or("-"), w.to_csv().as_bytes())
}

#[derive(Args, Serialize, Deserialize, Default, Debug, Clone)]
#[serde(default, deny_unknown_fields)]
pub struct GramOpts {
    #[arg(long, allow_hyphen_values = true)]
    pub j: Option<f64>,
    /// density matrix JSON; random states when absent
    #[arg(long)]
    pub state: Option<String>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// group elements per Gram matrix
    #[arg(long)]
    pub elements: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct GramReport {
    pub j: f64,
    pub trials: usize,
    pub elements: usize,
    pub min_eigenvalue: f64,
    pub pass: bool,
    pub seed: u64,
}

fn gram(o: GramOpts) -> Result<()> {
    let rep = rep_for(o.j)?;
    let seed = o.seed.unwrap_or(0);
    eprintln!("seed: {seed}");
    let trials = at_least("trials", o.trials.unwrap_or(1000), 1)?;
    let elements = at_least("elements", o.elements.unwrap_or(6), 1)?;
    let fixed = o.state.as_deref().map(|p| state_for(Some(p), &rep)).transpose()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..trials {
        let rho = match &fixed {
            Some(m) => m.clone(),
            None => tomo_core::cstomo::DensityMatrix::random(rep.dim(), &mut rng).matrix().clone(),
        };
        let gs: Vec<Su2Element> = (0..elements).map(|_| Su2Element::random(&mut rng)).collect();
        worst = worst.min(gram_psd_check(&rho, &rep, &gs)?);
    }
    let report = GramReport {
        j: (rep.dim() - 1) as f64 / 2.0,
        trials,
        elements,
        min_eigenvalue: worst,
        pass: worst >= -1e-10,
        seed,
    };
    write_json(o.out.as_deref().unwrap_or("-"), &report)
}

pub fn gtomo(cmd: Gtomo) -> Result<()> {
    match cmd {
        Gtomo::Spin(o) => spin(o),
        Gtomo::Fourier(o) => fourier(o),
        Gtomo::Gram(o) => gram(o),
    }
}
