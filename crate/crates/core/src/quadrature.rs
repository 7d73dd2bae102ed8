//! Deterministic one-dimensional quadrature rules.
//!
//! Everything here is plain numerics: Gauss–Legendre nodes by Newton
//! iteration on the Legendre recurrence, composite rules over panels, and
//! geometrically graded panels for integrands that concentrate near an
//! endpoint (heat kernels as `t -> 0`).

use std::f64::consts::PI;

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped affinely onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite rule: a fixed Gauss–Legendre rule applied on each panel.
#[derive(Debug, Clone)]
pub struct CompositeRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl CompositeRule {
    pub fn from_breaks(breaks: &[f64], per_panel: usize) -> Self {
        let gl = GaussLegendre::new(per_panel);
        let mut nodes = Vec::with_capacity(breaks.len().saturating_sub(1) * per_panel);
        let mut weights = Vec::with_capacity(nodes.capacity());
        for w in breaks.windows(2) {
            for (x, wt) in gl.mapped(w[0], w[1]) {
                nodes.push(x);
                weights.push(wt);
            }
        }
        Self { nodes, weights }
    }

    pub fn uniform(a: f64, b: f64, panels: usize, per_panel: usize) -> Self {
        let breaks: Vec<f64> = (0..=panels).map(|i| a + (b - a) * i as f64 / panels as f64).collect();
        Self::from_breaks(&breaks, per_panel)
    }

    /// Panels on `[0, b]` shrinking geometrically (ratio 1/2) toward 0.
    pub fn graded_to_zero(b: f64, levels: usize, per_panel: usize) -> Self {
        let mut breaks = vec![0.0];
        for k in (0..levels).rev() {
            breaks.push(b * 0.5f64.powi(k as i32));
        }
        Self::from_breaks(&breaks, per_panel)
    }

    /// Panels on `[a, b]` graded geometrically toward an interior or end point `c`,
    /// with the smallest panel of width about `min_width`.
    pub fn graded_toward(a: f64, b: f64, c: f64, min_width: f64, per_panel: usize) -> Self {
        let c = c.clamp(a, b);
        let mut breaks = vec![c];
        let mut w = min_width;
        let mut x = c;
        while x > a {
            x = (x - w).max(a);
            breaks.push(x);
            w *= 2.0;
        }
        w = min_width;
        x = c;
        while x < b {
            x = (x + w).min(b);
            breaks.push(x);
            w *= 2.0;
        }
        breaks.sort_by(|p, q| p.partial_cmp(q).unwrap());
        breaks.dedup();
        Self::from_breaks(&breaks, per_panel)
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// `∫_0^∞ e^{-λt} g(t) dt` by the trapezoid rule in `u = ln t` on the given
/// log-spaced nodes. The integrand must vanish at both ends of the grid.
pub fn laplace_transform(nodes: &[f64], lambda: f64, mut g: impl FnMut(f64) -> f64) -> f64 {
    if nodes.len() < 2 {
        return 0.0;
    }
    let h = (nodes[nodes.len() - 1] / nodes[0]).ln() / (nodes.len() - 1) as f64;
    let mut acc = 0.0;
    for (i, &t) in nodes.iter().enumerate() {
        let end = i == 0 || i + 1 == nodes.len();
        let w = if end { 0.5 * h } else { h };
        acc += w * t * (-lambda * t).exp() * g(t);
    }
    acc
}
