//! Integrals of a gridded 2-D field over level curves of a smooth function:
//! `∫ f(q) δ(λ − g(q)) d²q = ∫_{g=λ} f/|∇g| ds`.
//!
//! Marching squares on the grid of `f`. In each cell whose corner values of
//! `g` bracket λ, edge crossings are located on the exact `g` and the curve
//! piece is modelled as the quadratic through both crossings and the midpoint
//! projected onto the curve. Simpson's rule on that arc integrates
//! `f_bilinear/|∇g|`. For affine `g` the arcs are straight and the bilinear
//! integrand is quadratic along them, so the result is exact.

use rayon::prelude::*;

use crate::field::ScalarField;

/// A smooth function on the plane with its gradient.
pub trait LevelFunction: Sync {
    fn value(&self, q: [f64; 2]) -> f64;
    fn grad(&self, q: [f64; 2]) -> [f64; 2];
}

impl<V, G> LevelFunction for (V, G)
where
    V: Fn([f64; 2]) -> f64 + Sync,
    G: Fn([f64; 2]) -> [f64; 2] + Sync,
{
    fn value(&self, q: [f64; 2]) -> f64 {
        (self.0)(q)
    }

    fn grad(&self, q: [f64; 2]) -> [f64; 2] {
        (self.1)(q)
    }
}

fn lerp2(a: [f64; 2], b: [f64; 2], t: f64) -> [f64; 2] {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

/// Root of `g − λ` on the segment a→b given signed residuals at both ends.
fn edge_root<G: LevelFunction>(g: &G, a: [f64; 2], b: [f64; 2], mut sa: f64, mut sb: f64, lambda: f64) -> [f64; 2] {
    let (mut ta, mut tb) = (0.0f64, 1.0f64);
    if sa == 0.0 {
        return a;
    }
    if sb == 0.0 {
        return b;
    }
    let scale = sa.abs().max(sb.abs());
    let mut side = 0i8;
    let mut t = ta;
    for _ in 0..60 {
        t = (ta * sb - tb * sa) / (sb - sa);
        let s = g.value(lerp2(a, b, t)) - lambda;
        if s.abs() <= 1e-15 * scale || (tb - ta) < 1e-14 {
            break;
        }
        // Illinois modification of regula falsi
        if (s > 0.0) == (sb > 0.0) {
            tb = t;
            sb = s;
            if side == 1 {
                sa *= 0.5;
            }
            side = 1;
        } else {
            ta = t;
            sa = s;
            if side == -1 {
                sb *= 0.5;
            }
            side = -1;
        }
    }
    lerp2(a, b, t)
}

/// Newton projection of `p` onto `{g = λ}` along the gradient.
fn project<G: LevelFunction>(g: &G, mut p: [f64; 2], lambda: f64) -> [f64; 2] {
    for _ in 0..3 {
        let s = g.value(p) - lambda;
        let d = g.grad(p);
        let n2 = d[0] * d[0] + d[1] * d[1];
        if n2 == 0.0 || s == 0.0 {
            break;
        }
        p = [p[0] - s * d[0] / n2, p[1] - s * d[1] / n2];
    }
    p
}

fn weight<G: LevelFunction>(f: &ScalarField, g: &G, p: [f64; 2]) -> f64 {
    let v = f.bilinear(p[0], p[1]);
    if v == 0.0 {
        return 0.0;
    }
    let d = g.grad(p);
    let n = d[0].hypot(d[1]);
    if n > 0.0 {
        v / n
    } else {
        0.0
    }
}

/// Point of `{g = λ}` near the middle of the chord p0→p1, kept inside the cell.
fn curve_midpoint<G: LevelFunction>(g: &G, p0: [f64; 2], p1: [f64; 2], lambda: f64, lo: [f64; 2], hi: [f64; 2]) -> [f64; 2] {
    let mid = lerp2(p0, p1, 0.5);
    let mut m = project(g, mid, lambda);
    // keep the midpoint near the chord; far excursions mean the cell
    // holds more curve than one arc and the chord midpoint is safer
    let chord = (p1[0] - p0[0]).hypot(p1[1] - p0[1]);
    if (m[0] - mid[0]).hypot(m[1] - mid[1]) > chord || !m[0].is_finite() || !m[1].is_finite() {
        m = mid;
    }
    [m[0].clamp(lo[0], hi[0]), m[1].clamp(lo[1], hi[1])]
}

/// Simpson's rule on the quadratic arc through p0, m, p1.
fn simpson<G: LevelFunction>(f: &ScalarField, g: &G, p0: [f64; 2], m: [f64; 2], p1: [f64; 2]) -> f64 {
    let d0 = [-3.0 * p0[0] + 4.0 * m[0] - p1[0], -3.0 * p0[1] + 4.0 * m[1] - p1[1]];
    let dm = [p1[0] - p0[0], p1[1] - p0[1]];
    let d1 = [p0[0] - 4.0 * m[0] + 3.0 * p1[0], p0[1] - 4.0 * m[1] + 3.0 * p1[1]];
    (weight(f, g, p0) * d0[0].hypot(d0[1]) + 4.0 * weight(f, g, m) * dm[0].hypot(dm[1]) + weight(f, g, p1) * d1[0].hypot(d1[1]))
        / 6.0
}

const MAX_DEPTH: usize = 14;

/// Adaptive bisection of an arc, used where `|∇g|` varies strongly
/// (close to critical points of `g`).
#[allow(clippy::too_many_arguments)]
fn refine<G: LevelFunction>(
    f: &ScalarField,
    g: &G,
    p: [[f64; 2]; 3],
    whole: f64,
    lambda: f64,
    lo: [f64; 2],
    hi: [f64; 2],
    depth: usize,
) -> f64 {
    let [p0, m, p1] = p;
    let ml = curve_midpoint(g, p0, m, lambda, lo, hi);
    let mr = curve_midpoint(g, m, p1, lambda, lo, hi);
    let left = simpson(f, g, p0, ml, m);
    let right = simpson(f, g, m, mr, p1);
    let sum = left + right;
    if depth >= MAX_DEPTH || (sum - whole).abs() <= 1e-10 * sum.abs() {
        return sum;
    }
    refine(f, g, [p0, ml, m], left, lambda, lo, hi, depth + 1) + refine(f, g, [m, mr, p1], right, lambda, lo, hi, depth + 1)
}

fn grad_norm<G: LevelFunction>(g: &G, p: [f64; 2]) -> f64 {
    let d = g.grad(p);
    d[0].hypot(d[1])
}

fn arc<G: LevelFunction>(f: &ScalarField, g: &G, p0: [f64; 2], p1: [f64; 2], lambda: f64, lo: [f64; 2], hi: [f64; 2]) -> f64 {
    if p0 == p1 {
        return 0.0;
    }
    let m = curve_midpoint(g, p0, p1, lambda, lo, hi);
    let whole = simpson(f, g, p0, m, p1);
    let gn = [grad_norm(g, p0), grad_norm(g, m), grad_norm(g, p1)];
    let gmin = gn.iter().copied().fold(f64::INFINITY, f64::min);
    let gmax = gn.iter().copied().fold(0.0, f64::max);
    if gmax <= 1.1 * gmin {
        return whole;
    }
    refine(f, g, [p0, m, p1], whole, lambda, lo, hi, 0)
}

/// Critical point of `g` near the cell `[lo, hi]` by Newton's method with a
/// finite-difference Hessian.
fn critical_point<G: LevelFunction>(g: &G, start: [f64; 2], lo: [f64; 2], hi: [f64; 2]) -> Option<[f64; 2]> {
    let scale = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let h = 1e-6 * scale;
    let mut p = start;
    for _ in 0..20 {
        let d = g.grad(p);
        let dx = g.grad([p[0] + h, p[1]]);
        let dy = g.grad([p[0], p[1] + h]);
        let (a, b, c, e) = ((dx[0] - d[0]) / h, (dy[0] - d[0]) / h, (dx[1] - d[1]) / h, (dy[1] - d[1]) / h);
        let det = a * e - b * c;
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let step = [(e * d[0] - b * d[1]) / det, (a * d[1] - c * d[0]) / det];
        p = [p[0] - step[0], p[1] - step[1]];
        if step[0].hypot(step[1]) < 1e-12 * scale {
            break;
        }
    }
    let inside = (0..2).all(|k| p[k] >= lo[k] && p[k] <= hi[k]);
    inside.then_some(p)
}

/// Contribution of the rectangle `[lo, hi]` with corner values `gc`
/// (counter-clockwise from `lo`) to the level `λ`.
fn cell_total<G: LevelFunction>(f: &ScalarField, g: &G, lo: [f64; 2], hi: [f64; 2], gc: [f64; 4], lambda: f64) -> f64 {
    let pc = [lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]];
    let s = gc.map(|v| v - lambda);
    let pos = s.map(|v| v > 0.0);
    let mut cross: [Option<[f64; 2]>; 4] = [None; 4];
    let mut count = 0;
    for e in 0..4 {
        let (a, b) = (e, (e + 1) % 4);
        if pos[a] != pos[b] {
            cross[e] = Some(edge_root(g, pc[a], pc[b], s[a], s[b], lambda));
            count += 1;
        }
    }
    if count == 2 {
        let mut it = cross.iter().flatten();
        let (p, q) = (*it.next().unwrap(), *it.next().unwrap());
        arc(f, g, p, q, lambda, lo, hi)
    } else if count == 4 {
        let e = cross.map(|c| c.unwrap());
        let centre = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
        if (g.value(centre) - lambda > 0.0) == pos[0] {
            // corners 0 and 2 joined through the centre
            arc(f, g, e[0], e[1], lambda, lo, hi) + arc(f, g, e[2], e[3], lambda, lo, hi)
        } else {
            arc(f, g, e[3], e[0], lambda, lo, hi) + arc(f, g, e[1], e[2], lambda, lo, hi)
        }
    } else {
        0.0
    }
}

type Rect = ([f64; 2], [f64; 2], [f64; 4]);

/// A grid cell split into rectangles along whose edges `g` is monotone, so
/// that no pair of crossings hides between two corners.
struct Cell {
    parts: Vec<Rect>,
    gmin: f64,
    gmax: f64,
}

const MAX_SPLITS: usize = 6;

/// Zero of `t ↦ h(t)` on `[a, b]` given opposite signs at the ends.
fn bisect(h: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut ha = h(a);
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        let hm = h(m);
        if hm == 0.0 {
            return m;
        }
        if (hm > 0.0) == (ha > 0.0) {
            a = m;
            ha = hm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

#[allow(clippy::too_many_arguments)]
fn subdivide<G: LevelFunction>(
    g: &G,
    lo: [f64; 2],
    hi: [f64; 2],
    gc: [f64; 4],
    dg: [[f64; 2]; 4],
    depth: usize,
    cell: &mut Cell,
) {
    for v in gc {
        cell.gmin = cell.gmin.min(v);
        cell.gmax = cell.gmax.max(v);
    }
    let tiny = 1e-12 * (hi[0] - lo[0]).max(hi[1] - lo[1]);
    if depth >= MAX_SPLITS || hi[0] - lo[0] <= tiny || hi[1] - lo[1] <= tiny {
        cell.parts.push((lo, hi, gc));
        return;
    }
    let mut cuts_x = Vec::new();
    let mut cuts_y = Vec::new();
    if depth == 0 && may_hold_critical(dg) {
        let centre = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
        if let Some(p) = critical_point(g, centre, lo, hi) {
            cuts_x.push(p[0]);
            cuts_y.push(p[1]);
        }
    }
    if cuts_x.is_empty() {
        // edges along x: bottom (0→1) and top (3→2); along y: left (0→3) and right (1→2)
        for &(a, b, y) in &[(0, 1, lo[1]), (3, 2, hi[1])] {
            if dg[a][0] * dg[b][0] < 0.0 {
                cuts_x.push(bisect(|x| g.grad([x, y])[0], lo[0], hi[0]));
                break;
            }
        }
        if cuts_x.is_empty() {
            for &(a, b, x) in &[(0, 3, lo[0]), (1, 2, hi[0])] {
                if dg[a][1] * dg[b][1] < 0.0 {
                    cuts_y.push(bisect(|y| g.grad([x, y])[1], lo[1], hi[1]));
                    break;
                }
            }
        }
    }
    if cuts_x.is_empty() && cuts_y.is_empty() {
        cell.parts.push((lo, hi, gc));
        return;
    }
    let xs: Vec<f64> = std::iter::once(lo[0]).chain(cuts_x).chain(std::iter::once(hi[0])).collect();
    let ys: Vec<f64> = std::iter::once(lo[1]).chain(cuts_y).chain(std::iter::once(hi[1])).collect();
    let corner = |x: f64, y: f64| -> (f64, [f64; 2]) {
        let p = [x, y];
        let pc = [lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]];
        match pc.iter().position(|&c| c == p) {
            Some(k) => (gc[k], dg[k]),
            None => (g.value(p), g.grad(p)),
        }
    };
    let vals: Vec<Vec<(f64, [f64; 2])>> = xs.iter().map(|&x| ys.iter().map(|&y| corner(x, y)).collect()).collect();
    for a in 0..xs.len() - 1 {
        for b in 0..ys.len() - 1 {
            let k = [(a, b), (a + 1, b), (a + 1, b + 1), (a, b + 1)];
            subdivide(
                g,
                [xs[a], ys[b]],
                [xs[a + 1], ys[b + 1]],
                k.map(|(i, j)| vals[i][j].0),
                k.map(|(i, j)| vals[i][j].1),
                depth + 1,
                cell,
            );
        }
    }
}

fn split_cell<G: LevelFunction>(g: &G, lo: [f64; 2], hi: [f64; 2], gc: [f64; 4], dg: [[f64; 2]; 4]) -> Cell {
    let mut cell = Cell {
        parts: Vec::with_capacity(1),
        gmin: f64::INFINITY,
        gmax: f64::NEG_INFINITY,
    };
    subdivide(g, lo, hi, gc, dg, 0, &mut cell);
    cell
}

/// Whether both gradient components change sign over the corners, the
/// necessary condition for a critical point inside a small cell.
fn may_hold_critical(grads: [[f64; 2]; 4]) -> bool {
    (0..2).all(|k| {
        let lo = grads.iter().map(|d| d[k]).fold(f64::INFINITY, f64::min);
        let hi = grads.iter().map(|d| d[k]).fold(f64::NEG_INFINITY, f64::max);
        lo <= 0.0 && hi >= 0.0
    })
}

/// `∫ f δ(λ − g) d²q` for every λ in `lambdas` (any order). `f` must be 2-D.
pub fn level_set_integrals<G: LevelFunction>(f: &ScalarField, g: &G, lambdas: &[f64]) -> Vec<f64> {
    assert_eq!(f.ndim(), 2, "level-set integrals need a 2-D field");
    let dom = f.domain();
    let (nx, ny) = (dom.shape()[0], dom.shape()[1]);
    let xs = dom.axis_coords(0);
    let ys = dom.axis_coords(1);
    let fv = f.values();

    let mut order: Vec<usize> = (0..lambdas.len()).collect();
    order.sort_by(|&a, &b| lambdas[a].total_cmp(&lambdas[b]));
    let sorted: Vec<f64> = order.iter().map(|&k| lambdas[k]).collect();

    let nodes: Vec<(f64, [f64; 2])> = (0..nx * ny)
        .into_par_iter()
        .map(|k| {
            let q = [xs[k / ny], ys[k % ny]];
            (g.value(q), g.grad(q))
        })
        .collect();

    let rows: Vec<Vec<f64>> = (0..nx - 1)
        .into_par_iter()
        .map(|i| {
            let mut acc = vec![0.0; sorted.len()];
            for j in 0..ny - 1 {
                let k00 = i * ny + j;
                // corners counter-clockwise: (i,j), (i+1,j), (i+1,j+1), (i,j+1)
                let idx = [k00, k00 + ny, k00 + ny + 1, k00 + 1];
                if idx.iter().all(|&k| fv[k] == 0.0) {
                    continue;
                }
                let gc = idx.map(|k| nodes[k].0);
                if gc.iter().any(|v| !v.is_finite()) {
                    continue;
                }
                let lo = [xs[i], ys[j]];
                let hi = [xs[i + 1], ys[j + 1]];
                let cell = split_cell(g, lo, hi, gc, idx.map(|k| nodes[k].1));
                let start = sorted.partition_point(|&l| l < cell.gmin);
                let end = sorted.partition_point(|&l| l <= cell.gmax);
                for (slot, &lambda) in acc[start..end.max(start)].iter_mut().zip(&sorted[start..end.max(start)]) {
                    for &(plo, phi, pg) in &cell.parts {
                        *slot += cell_total(f, g, plo, phi, pg, lambda);
                    }
                }
            }
            acc
        })
        .collect();

    let mut sums = vec![0.0; sorted.len()];
    for row in &rows {
        for (s, v) in sums.iter_mut().zip(row) {
            *s += v;
        }
    }
    let mut out = vec![0.0; lambdas.len()];
    for (pos, &k) in order.iter().enumerate() {
        out[k] = sums[pos];
    }
    out
}
