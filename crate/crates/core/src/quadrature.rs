//! Gauss–Legendre rules and composite panels.

use std::f64::consts::PI;

/// Nodes and weights of the n-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        dp = if d != 0.0 { d } else { dp };
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// P_n(z) and P_n'(z) by the three-term recurrence.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (z * p1 - p0) / (z * z - 1.0))
}

/// A 1-D quadrature rule: nodes with weights.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Gauss–Legendre on [a, b] with `order` nodes.
    pub fn gauss(a: f64, b: f64, order: usize) -> Self {
        let mut r = Self::default();
        r.push_panel(a, b, &gauss_legendre(order));
        r
    }

    /// `panels` equal Gauss–Legendre panels on [a, b].
    pub fn composite(a: f64, b: f64, panels: usize, order: usize) -> Self {
        let gl = gauss_legendre(order);
        let mut r = Self::default();
        let h = (b - a) / panels as f64;
        for p in 0..panels {
            r.push_panel(a + p as f64 * h, a + (p + 1) as f64 * h, &gl);
        }
        r
    }

    /// Panels on [a, b] graded geometrically towards `c` (ratio 1/2), for
    /// integrands with an integrable singularity at `c`.
    pub fn graded(a: f64, b: f64, c: f64, max_width: f64, levels: usize, order: usize) -> Self {
        let gl = gauss_legendre(order);
        let mut r = Self::default();
        let c = c.clamp(a, b);
        if c > a {
            r.push_graded_side(c, a, max_width, levels, &gl);
        }
        if b > c {
            r.push_graded_side(c, b, max_width, levels, &gl);
        }
        r
    }

    fn push_graded_side(&mut self, c: f64, end: f64, max_width: f64, levels: usize, gl: &(Vec<f64>, Vec<f64>)) {
        let len = (end - c).abs();
        let dir = (end - c).signum();
        // [c, c+δ], [c+δ, c+2δ], [c+2δ, c+4δ], ... then uniform panels
        let mut edges = vec![0.0];
        let first = (len.min(max_width)) / 2f64.powi(levels as i32);
        let mut t = first;
        while t < len.min(max_width) {
            edges.push(t);
            t *= 2.0;
        }
        let mut last = len.min(max_width);
        edges.push(last);
        if len > last {
            let n = ((len - last) / max_width).ceil() as usize;
            let h = (len - last) / n as f64;
            for _ in 0..n {
                last += h;
                edges.push(last);
            }
            *edges.last_mut().unwrap() = len;
        }
        for e in edges.windows(2) {
            let (u, v) = (c + dir * e[0], c + dir * e[1]);
            self.push_panel(u.min(v), u.max(v), gl);
        }
    }

    fn push_panel(&mut self, a: f64, b: f64, gl: &(Vec<f64>, Vec<f64>)) {
        let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
        for (x, w) in gl.0.iter().zip(&gl.1) {
            self.nodes.push(m + h * x);
            self.weights.push(h * w);
        }
    }
}
