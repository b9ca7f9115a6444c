//! `phantom`, `forward`, `invert`, `backproject` and `report`.

use std::f64::consts::PI;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use tomo_core::field::io::{field_to_csv, table_to_csv, GridFile};
use tomo_core::field::{integrate, l2_relative_error, Bump, Gaussian, Mixture, Phantom};
use tomo_core::radon_affine::{
    affine_tomogram, backproject, invert_affine, invert_radon_hilbert, sinogram_with, AffineSampler, QuadratureSpec,
};
use tomo_core::radon_deformed::{
    circle_geometry, deformed_invert, deformed_tomogram_batch, diffeo_by_name, image_quadrature, quadric_invert,
    quadric_tomogram_batch, CircleGeometry, DeformedSampler, Diffeomorphism, QuadricQuadrature, QuadricSampler,
    QuadricSpec,
};
use tomo_core::{BoxDomain, ScalarField, TableSampler, TomogramSampler, TomogramTable};

use crate::config::{at_least, distinct, positive, NumList};
use crate::io::{read_grid_file, write_atomic, write_grid_file, write_json};

const GEOMETRIES: [&str; 5] = ["line", "circle", "hyperbola", "bertrand", "quadric"];

/// Box from `extent` (all lows, then all highs) or a centered box of half-width 4.
fn domain(grid: Option<usize>, extent: Option<&NumList>, dim: usize) -> Result<BoxDomain> {
    let n = at_least("grid", grid.unwrap_or(128), 2)?;
    match extent {
        Some(e) => {
            if e.0.len() != 2 * dim {
                bail!("extent needs {} numbers (lows then highs), got {}", 2 * dim, e.0.len());
            }
            Ok(BoxDomain::new(e.0[..dim].to_vec(), e.0[dim..].to_vec(), vec![n; dim])?)
        }
        None => Ok(BoxDomain::centered(4.0, n, dim)?),
    }
}

fn domain_json(d: &BoxDomain) -> Value {
    json!({"lo": d.lo(), "hi": d.hi(), "shape": d.shape()})
}

fn domain_from_json(v: &Value) -> Result<BoxDomain> {
    let get = |k: &str| -> Result<Vec<f64>> {
        serde_json::from_value(v.get(k).cloned().ok_or_else(|| anyhow!("source domain lacks {k:?}"))?)
            .with_context(|| format!("source domain field {k:?}"))
    };
    let shape: Vec<usize> = serde_json::from_value(v.get("shape").cloned().unwrap_or(Value::Null))?;
    Ok(BoxDomain::new(get("lo")?, get("hi")?, shape)?)
}

fn check_geometry(g: &str) -> Result<()> {
    if GEOMETRIES.contains(&g) {
        Ok(())
    } else {
        bail!("unknown geometry {g:?} (expected one of {})", GEOMETRIES.join(", "))
    }
}

fn quadric_spec(b: Option<&NumList>, a: Option<&NumList>) -> Result<QuadricSpec> {
    let b = b.map_or(vec![1.0, 0.0, 0.0, 1.0], |l| l.0.clone());
    let a = a.map_or(vec![0.0, 0.0], |l| l.0.clone());
    if b.len() != 4 || a.len() != 2 {
        bail!("quadric needs --B with 4 entries and --a with 2, got {} and {}", b.len(), a.len());
    }
    Ok(QuadricSpec::new(DMatrix::from_row_slice(2, 2, &b), DVector::from_vec(a))?)
}

#[derive(Args, Serialize, Deserialize, Default, Debug, Clone)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomOpts {
    /// gaussian, bump or mixture (random Gaussians)
    #[arg(long)]
    pub kind: Option<String>,
    /// output TOMOGRD1 file, "-" for stdout
    #[arg(long)]
    pub out: Option<String>,
    /// nodes per axis
    #[arg(long)]
    pub grid: Option<usize>,
    /// box as lows then highs, e.g. -4,-4,4,4
    #[arg(long, allow_hyphen_values = true)]
    pub extent: Option<NumList>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub center: Option<NumList>,
    #[arg(long, allow_hyphen_values = true)]
    pub sigma: Option<f64>,
    /// covariance entries, row-major (overrides sigma)
    #[arg(long, allow_hyphen_values = true)]
    pub cov: Option<NumList>,
    #[arg(long, allow_hyphen_values = true)]
    pub mass: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub radius: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub height: Option<f64>,
    /// number of components of a random mixture
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// also export the grid as CSV
    #[arg(long)]
    pub csv: Option<String>,
}

pub fn phantom(o: PhantomOpts) -> Result<()> {
    let dim = o.dim.unwrap_or(2);
    if !(1..=3).contains(&dim) {
        bail!("dim must be 1, 2 or 3, got {dim}");
    }
    let dom = domain(o.grid, o.extent.as_ref(), dim)?;
    let center = o.center.map_or_else(
        || (0..dim).map(|a| 0.5 * (dom.lo()[a] + dom.hi()[a])).collect(),
        |c| c.0,
    );
    if center.len() != dim {
        bail!("center needs {dim} coordinates, got {}", center.len());
    }
    let f = match o.kind.as_deref().unwrap_or("gaussian") {
        "gaussian" => {
            let cov = match &o.cov {
                Some(c) if c.0.len() == dim * dim => DMatrix::from_row_slice(dim, dim, &c.0),
                Some(c) => bail!("cov needs {} entries, got {}", dim * dim, c.0.len()),
                None => {
                    let s = positive("sigma", o.sigma.unwrap_or(1.0))?;
                    DMatrix::identity(dim, dim) * (s * s)
                }
            };
            tomo_core::field::make_gaussian_phantom(&dom, &center, &cov, o.mass.unwrap_or(1.0))?
        }
        "bump" => Bump {
            center,
            radius: positive("radius", o.radius.unwrap_or(1.0))?,
            height: o.height.unwrap_or(1.0),
        }
        .sample(&dom),
        "mixture" => {
            let seed = o.seed.unwrap_or(0);
            eprintln!("seed: {seed}");
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let count = at_least("count", o.count.unwrap_or(3), 1)?;
            let parts = (0..count)
                .map(|_| {
                    let c: Vec<f64> = (0..dim)
                        .map(|a| {
                            let (lo, hi) = (dom.lo()[a], dom.hi()[a]);
                            let w = 0.25 * (hi - lo);
                            rng.random_range(lo + w..hi - w)
                        })
                        .collect();
                    let width = (0..dim).map(|a| dom.hi()[a] - dom.lo()[a]).fold(f64::INFINITY, f64::min);
                    let sigma = width * rng.random_range(0.04..0.1);
                    Gaussian::isotropic(&c, sigma, rng.random_range(0.5..1.5))
                })
                .collect::<tomo_core::Result<Vec<_>>>()?;
            Mixture(parts).sample(&dom)
        }
        other => bail!("unknown phantom kind {other:?} (expected gaussian, bump or mixture)"),
    };
    if let Some(path) = &o.csv {
        let mut buf = Vec::new();
        field_to_csv(&mut buf, &f)?;
        write_atomic(path, &buf)?;
    }
    write_grid_file(o.out.as_deref().unwrap_or("-"), &GridFile::from_field(&f))
}

#[derive(Args, Serialize, Deserialize, Default, Debug, Clone)]
#[serde(default, deny_unknown_fields)]
pub struct ForwardOpts {
    /// input field, "-" for stdin
    #[arg(long)]
    pub input: Option<String>,
    /// output table, "-" for stdout
    #[arg(long)]
    pub out: Option<String>,
    /// line, circle, hyperbola, bertrand or quadric
    #[arg(long)]
    pub geometry: Option<String>,
    /// number of directions θ_j = jπ/N
    #[arg(long)]
    pub angles: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda_step: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda_max: Option<f64>,
    /// quadric matrix, row-major
    #[arg(long = "B", allow_hyphen_values = true)]
    #[serde(rename = "B")]
    pub b: Option<NumList>,
    /// quadric linear term
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<NumList>,
    /// quadric table: μ nodes per axis
    #[arg(long)]
    pub mu_nodes: Option<usize>,
    /// quadric table: margin of the μ box around the field box
    #[arg(long, allow_hyphen_values = true)]
    pub mu_pad: Option<f64>,
    /// quadric table: number of λ nodes
    #[arg(long)]
    pub lambda_nodes: Option<usize>,
    /// export the table as CSV
    #[arg(long)]
    pub csv: Option<String>,
    /// circle geometry: export center and radius of every sampled curve
    #[arg(long)]
    pub family_csv: Option<String>,
}

fn planar_table(f: &ScalarField, phi: &Diffeomorphism, n: usize, step: f64, reach: f64) -> Result<TomogramTable> {
    if phi.is_identity() {
        return Ok(sinogram_with(f, n, step, reach)?);
    }
    let k = (reach / step).ceil() as usize;
    let lambdas: Vec<f64> = (0..2 * k + 1).map(|i| (i as f64 - k as f64) * step).collect();
    let cols: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let th = PI * j as f64 / n as f64;
            deformed_tomogram_batch(f, phi, &lambdas, &[th.cos(), th.sin()])
        })
        .collect::<tomo_core::Result<_>>()?;
    let nd = lambdas.len();
    let values: Vec<f64> = (0..nd * n).map(|k| cols[k % n][k / n]).collect();
    let dom = BoxDomain::new(
        vec![lambdas[0], 0.0],
        vec![lambdas[nd - 1], PI * (n - 1) as f64 / n as f64],
        vec![nd, n],
    )?;
    Ok(TomogramTable::new(vec!["lambda".into(), "theta".into()], dom, values)?)
}

fn quadric_table(f: &ScalarField, spec: &QuadricSpec, mu_nodes: usize, pad: f64, nl: usize) -> Result<TomogramTable> {
    let src = f.domain();
    let lo = [src.lo()[0] - pad, src.lo()[1] - pad];
    let hi = [src.hi()[0] + pad, src.hi()[1] + pad];
    let mu_dom = BoxDomain::new(lo.to_vec(), hi.to_vec(), vec![mu_nodes, mu_nodes])?;
    let mus: Vec<[f64; 2]> = (0..mu_dom.len())
        .map(|k| {
            let m = mu_dom.node(k);
            [m[0], m[1]]
        })
        .collect();
    // the critical value −a·B⁻¹a/4 is the same for every μ; the λ nodes are
    // midpoints around it so none of them sits on the log spike of a saddle
    let lambda_c = spec.value(&spec.critical_point(&[0.0, 0.0]), &[0.0, 0.0]);
    let nodes: Vec<Vec<f64>> = (0..src.len()).map(|k| src.node(k)).collect();
    let (gmin, gmax) = mus
        .par_iter()
        .map(|mu| {
            nodes.iter().fold((lambda_c, lambda_c), |(lo, hi), q| {
                let g = spec.value(q, mu);
                (lo.min(g), hi.max(g))
            })
        })
        .reduce(|| (lambda_c, lambda_c), |a, b| (a.0.min(b.0), a.1.max(b.1)));
    let h = (gmax - gmin) / (nl - 1) as f64;
    let below = ((lambda_c - gmin) / h).ceil();
    let gmin = lambda_c - (below - 0.5) * h;
    let gmax = gmin + (nl - 1) as f64 * h;
    let cols: Vec<Vec<f64>> = mus
        .par_iter()
        .map(|mu| {
            let lambdas: Vec<f64> = (0..nl).map(|i| gmin + h * i as f64).collect();
            quadric_tomogram_batch(f, spec, &lambdas, mu)
        })
        .collect::<tomo_core::Result<_>>()?;
    let nm = mus.len();
    let values: Vec<f64> = (0..nl * nm).map(|k| cols[k % nm][k / nm]).collect();
    let dom = BoxDomain::new(vec![gmin, lo[0], lo[1]], vec![gmax, hi[0], hi[1]], vec![nl, mu_nodes, mu_nodes])?;
    Ok(TomogramTable::new(vec!["lambda".into(), "mu_x".into(), "mu_y".into()], dom, values)?)
}

fn family_csv(t: &TomogramTable) -> Result<Vec<u8>> {
    use std::io::Write;
    let mut buf = Vec::new();
    writeln!(buf, "lambda,mu,nu,center_x,center_y,radius,value")?;
    for (k, v) in t.values().iter().enumerate() {
        let x = t.domain().node(k);
        let (mu, nu) = (x[1].cos(), x[1].sin());
        // λ = 0 is a line through the origin and has no center
        if let CircleGeometry::Circle { center, radius } = circle_geometry(x[0], mu, nu)? {
            writeln!(buf, "{},{mu},{nu},{},{},{radius},{v}", x[0], center[0], center[1])?;
        }
    }
    Ok(buf)
}

pub fn forward(o: ForwardOpts) -> Result<()> {
    let input = o.input.as_deref().unwrap_or("-");
    let out = o.out.as_deref().unwrap_or("-");
    distinct(input, out)?;
    let geometry = o.geometry.as_deref().unwrap_or("line");
    check_geometry(geometry)?;
    let f = read_grid_file(input)?.into_field()?;
    if f.ndim() != 2 {
        bail!("forward transforms need a 2-D field, got {} dimensions", f.ndim());
    }
    let mut meta = json!({"geometry": geometry, "source": domain_json(f.domain())});
    let table = if geometry == "quadric" {
        let spec = quadric_spec(o.b.as_ref(), o.a.as_ref())?;
        meta["B"] = json!(spec.b().as_slice());
        meta["a"] = json!(spec.a().as_slice());
        let pad = o.mu_pad.unwrap_or(QuadricQuadrature::default().mu_pad);
        if !(pad >= 0.0) {
            bail!("mu_pad must be non-negative, got {pad}");
        }
        quadric_table(
            &f,
            &spec,
            at_least("mu_nodes", o.mu_nodes.unwrap_or(49), 2)?,
            pad,
            at_least("lambda_nodes", o.lambda_nodes.unwrap_or(1025), 2)?,
        )?
    } else {
        let phi = diffeo_by_name(geometry)?;
        let n = at_least("angles", o.angles.unwrap_or(180), 2)?;
        let (step, reach) = if phi.is_identity() {
            let d = f.domain();
            (d.spacing(0).min(d.spacing(1)), tomo_core::radon_affine::corner_radius(d))
        } else {
            let q = image_quadrature(&phi, f.domain(), n);
            (q.lambda_step, q.lambda_max)
        };
        let step = positive("lambda_step", o.lambda_step.unwrap_or(step))?;
        let reach = positive("lambda_max", o.lambda_max.unwrap_or(reach))?;
        planar_table(&f, &phi, n, step, reach)?
    };
    if let Some(path) = &o.csv {
        let mut buf = Vec::new();
        table_to_csv(&mut buf, &table)?;
        write_atomic(path, &buf)?;
    }
    if let Some(path) = &o.family_csv {
        if geometry != "circle" {
            bail!("family_csv is only defined for the circle geometry");
        }
        write_atomic(path, &family_csv(&table)?)?;
    }
    let mut file = GridFile::from_table(&table);
    file.header.meta = Some(meta);
    write_grid_file(out, &file)
}

#[derive(Args, Serialize, Deserialize, Default, Debug, Clone)]
#[serde(default, deny_unknown_fields)]
pub struct InvertOpts {
    #[arg(long)]
    pub input: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
    /// defaults to the geometry recorded in the table
    #[arg(long)]
    pub geometry: Option<String>,
    /// line geometry: hilbert (default) or affine
    #[arg(long)]
    pub method: Option<String>,
    /// output nodes per axis (default: the source grid)
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub extent: Option<NumList>,
    /// field to compare against
    #[arg(long)]
    pub reference: Option<String>,
    /// where to write the comparison report (default stderr)
    #[arg(long)]
    pub report: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub mu_pad: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub mu_panel: Option<f64>,
    #[arg(long)]
    pub mu_order: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda_panel: Option<f64>,
    #[arg(long)]
    pub lambda_order: Option<usize>,
    #[arg(long)]
    pub grading_levels: Option<usize>,
}

/// Trilinear interpolation of a `[lambda, mu_x, mu_y]` table.
struct QuadricTable<'a>(&'a TomogramTable);

impl TomogramSampler for QuadricTable<'_> {
    fn sample(&self, lambda: f64, mu: &[f64]) -> f64 {
        self.0.as_field().interpolate(&[lambda, mu[0], mu[1]])
    }
}

fn output_domain(grid: Option<usize>, extent: Option<&NumList>, meta: Option<&Value>) -> Result<BoxDomain> {
    let source = meta.and_then(|m| m.get("source")).map(domain_from_json).transpose()?;
    match (source, grid, extent) {
        (_, _, Some(_)) => domain(grid, extent, 2),
        (Some(s), None, None) => Ok(s),
        (Some(s), Some(n), None) => Ok(BoxDomain::new(s.lo().to_vec(), s.hi().to_vec(), vec![n; 2])?),
        (None, _, None) => domain(grid, None, 2),
    }
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct Invariant {
    pub name: String,
    pub value: f64,
    pub pass: bool,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct RoundTripReport {
    pub geometry: String,
    pub grid_shape: Vec<usize>,
    pub l2_error: f64,
    pub invariants: Vec<Invariant>,
    pub wall_time_s: f64,
    pub seed: Option<u64>,
}

fn quadric_quadrature(o: &InvertOpts) -> QuadricQuadrature {
    let d = QuadricQuadrature::default();
    QuadricQuadrature {
        mu_pad: o.mu_pad.unwrap_or(d.mu_pad),
        mu_panel: o.mu_panel.unwrap_or(d.mu_panel),
        mu_order: o.mu_order.unwrap_or(d.mu_order),
        lambda_panel: o.lambda_panel.unwrap_or(d.lambda_panel),
        lambda_order: o.lambda_order.unwrap_or(d.lambda_order),
        grading_levels: o.grading_levels.unwrap_or(d.grading_levels),
        damping: d.damping,
    }
}

pub fn invert(o: InvertOpts) -> Result<()> {
    let start = Instant::now();
    let input = o.input.as_deref().unwrap_or("-");
    let out = o.out.as_deref().unwrap_or("-");
    distinct(input, out)?;
    let file = read_grid_file(input)?;
    let meta = file.header.meta.clone();
    let recorded = meta.as_ref().and_then(|m| m.get("geometry")).and_then(Value::as_str).map(str::to_owned);
    let geometry = o.geometry.clone().or(recorded).unwrap_or_else(|| "line".into());
    check_geometry(&geometry)?;
    let table = file.into_table()?;
    let dom = output_domain(o.grid, o.extent.as_ref(), meta.as_ref())?;

    let rec = if geometry == "quadric" {
        if table.names() != ["lambda", "mu_x", "mu_y"] {
            bail!("quadric inversion needs a [lambda, mu_x, mu_y] table, got {:?}", table.names());
        }
        let m = meta.as_ref();
        let list = |k: &str| -> Result<Option<NumList>> {
            m.and_then(|m| m.get(k)).map(|v| Ok(serde_json::from_value::<NumList>(v.clone())?)).transpose()
        };
        let spec = quadric_spec(list("B")?.as_ref(), list("a")?.as_ref())?;
        quadric_invert(&QuadricTable(&table), &spec, &dom, &quadric_quadrature(&o))?
    } else {
        let method = o.method.as_deref().unwrap_or("hilbert");
        let ts = TableSampler::new(&table)?;
        let quad = QuadratureSpec {
            n_angles: ts.n_angles(),
            n_polar: 0,
            lambda_step: ts.lambda_step(),
            lambda_max: ts.lambda_reach(),
        };
        match (geometry.as_str(), method) {
            ("line", "hilbert") => invert_radon_hilbert(&table, &dom)?,
            ("line", "affine") => invert_affine(&ts, &dom, &quad)?,
            (_, "hilbert") | (_, "affine") => deformed_invert(&ts, &diffeo_by_name(&geometry)?, &dom, &quad)?,
            (_, m) => bail!("unknown method {m:?} (expected hilbert or affine)"),
        }
    };
    write_grid_file(out, &GridFile::from_field(&rec))?;

    if let Some(path) = &o.reference {
        let reference = read_grid_file(path)?.into_field()?;
        let l2 = l2_relative_error(&reference, &rec).context("comparing with the reference")?;
        let pass = l2 < threshold_for(&geometry);
        let report = RoundTripReport {
            geometry,
            grid_shape: dom.shape().to_vec(),
            l2_error: l2,
            invariants: vec![Invariant {
                name: "round_trip".into(),
                value: l2,
                pass,
            }],
            wall_time_s: start.elapsed().as_secs_f64(),
            seed: None,
        };
        match &o.report {
            Some(p) => write_json(p, &report)?,
            None => eprintln!("{}", serde_json::to_string(&report)?),
        }
    }
    Ok(())
}

/// Acceptance level of a round trip per geometry.
fn threshold_for(geometry: &str) -> f64 {
    match geometry {
        "line" => 0.05,
        "quadric" => 0.15,
        _ => 0.10,
    }
}

#[derive(Args, Serialize, Deserialize, Default, Debug, Clone)]
#[serde(default, deny_unknown_fields)]
pub struct BackprojectOpts {
    #[arg(long)]
    pub input: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub extent: Option<NumList>,
}

pub fn backproject_cmd(o: BackprojectOpts) -> Result<()> {
    let input = o.input.as_deref().unwrap_or("-");
    let out = o.out.as_deref().unwrap_or("-");
    distinct(input, out)?;
    let file = read_grid_file(input)?;
    let meta = file.header.meta.clone();
    let table = file.into_table()?;
    let dom = output_domain(o.grid, o.extent.as_ref(), meta.as_ref())?;
    write_grid_file(out, &GridFile::from_field(&backproject(&table, &dom)?))
}

#[derive(Args, Serialize, Deserialize, Default, Debug, Clone)]
#[serde(default, deny_unknown_fields)]
pub struct ReportOpts {
    /// comma-separated geometries (default: all)
    #[arg(long)]
    pub geometry: Option<String>,
    /// nodes per axis of every round trip
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub angles: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// report JSON, "-" for stdout
    #[arg(long)]
    pub out: Option<String>,
}

/// Test phantom and box for each geometry, supported away from singular sets.
fn report_phantom(geometry: &str, n: usize) -> Result<ScalarField> {
    Ok(match geometry {
        "line" => {
            let dom = BoxDomain::centered(4.0, n, 2)?;
            let cov = DMatrix::from_row_slice(2, 2, &[0.8, 0.2, 0.2, 0.4]);
            Gaussian::new(&[0.3, -0.2], &cov, 1.0)?.sample(&dom)
        }
        "circle" | "hyperbola" => {
            let dom = BoxDomain::new(vec![0.4, -1.1], vec![2.6, 1.1], vec![n, n])?;
            Bump {
                center: vec![1.5, 0.15],
                radius: 0.75,
                height: 1.0,
            }
            .sample(&dom)
        }
        "bertrand" => {
            let dom = BoxDomain::new(vec![0.6, -1.2], vec![2.8, 1.2], vec![n, n])?;
            Bump {
                center: vec![1.6, 0.1],
                radius: 0.8,
                height: 1.0,
            }
            .sample(&dom)
        }
        _ => {
            let dom = BoxDomain::centered(3.0, n, 2)?;
            Gaussian::isotropic(&[0.3, -0.2], 0.6, 1.0)?.sample(&dom)
        }
    })
}

fn homogeneity<S: TomogramSampler>(sampler: &S, rng: &mut ChaCha8Rng, center_scale: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let th = rng.random_range(0.1..PI - 0.1);
        let r = rng.random_range(0.5..2.0);
        let mu = [r * th.cos(), r * th.sin()];
        let lambda = r * center_scale * rng.random_range(0.5..1.5);
        let s = rng.random_range(0.3..3.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let base = sampler.sample(lambda, &mu);
        if base.abs() < 1e-8 {
            continue;
        }
        let v = sampler.sample(s * lambda, &[s * mu[0], s * mu[1]]);
        worst = worst.max((v - base / s.abs()).abs() / base.abs());
    }
    worst
}

fn round_trip(geometry: &str, n: usize, angles: usize, rng: &mut ChaCha8Rng) -> Result<(ScalarField, Vec<Invariant>)> {
    let f = report_phantom(geometry, n)?;
    let dom = f.domain().clone();
    let mut invariants = Vec::new();
    let rec = match geometry {
        "line" => {
            let sampler = AffineSampler { field: &f };
            let h = homogeneity(&sampler, rng, 0.3);
            invariants.push(Invariant {
                name: "homogeneity".into(),
                value: h,
                pass: h < 1e-6,
            });
            let th = rng.random_range(0.0..PI);
            let step = 0.02;
            let mass: f64 = (-400..=400)
                .map(|k| affine_tomogram(&f, k as f64 * step, &[th.cos(), th.sin()]).map(|v| v * step))
                .sum::<tomo_core::Result<f64>>()?;
            let dev = (mass - integrate(&f)).abs() / integrate(&f);
            invariants.push(Invariant {
                name: "mass".into(),
                value: dev,
                pass: dev < 1e-4,
            });
            let quad = QuadratureSpec {
                n_angles: angles,
                ..QuadratureSpec::for_domain(&dom)
            };
            invert_affine(&sampler, &dom, &quad)?
        }
        "quadric" => {
            let spec = QuadricSpec::new(DMatrix::identity(2, 2), DVector::zeros(2))?;
            let sampler = QuadricSampler { field: &f, spec: &spec };
            quadric_invert(&sampler, &spec, &dom, &QuadricQuadrature::default())?
        }
        _ => {
            let phi = diffeo_by_name(geometry)?;
            let sampler = DeformedSampler { field: &f, phi: &phi };
            let h = homogeneity(&sampler, rng, 1.0);
            invariants.push(Invariant {
                name: "homogeneity".into(),
                value: h,
                pass: h < 1e-6,
            });
            deformed_invert(&sampler, &phi, &dom, &image_quadrature(&phi, &dom, angles))?
        }
    };
    let l2 = l2_relative_error(&f, &rec)?;
    invariants.push(Invariant {
        name: "round_trip".into(),
        value: l2,
        pass: l2 < threshold_for(geometry),
    });
    Ok((rec, invariants))
}

pub fn report(o: ReportOpts) -> Result<()> {
    let seed = o.seed.unwrap_or(0);
    eprintln!("seed: {seed}");
    let n = at_least("grid", o.grid.unwrap_or(96), 16)?;
    let angles = at_least("angles", o.angles.unwrap_or(180), QuadratureSpec::MIN_ANGLES)?;
    let list = o.geometry.clone().unwrap_or_else(|| GEOMETRIES.join(","));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reports = Vec::new();
    for g in list.split(',').map(str::trim) {
        check_geometry(g)?;
        let start = Instant::now();
        let (rec, invariants) = round_trip(g, n, angles, &mut rng)?;
        let l2 = invariants.last().map_or(f64::NAN, |i| i.value);
        reports.push(RoundTripReport {
            geometry: g.to_owned(),
            grid_shape: rec.domain().shape().to_vec(),
            l2_error: l2,
            invariants,
            wall_time_s: start.elapsed().as_secs_f64(),
            seed: Some(seed),
        });
    }
    write_json(o.out.as_deref().unwrap_or("-"), &reports)
}
