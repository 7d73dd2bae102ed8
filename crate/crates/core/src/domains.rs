//! Canonical domains: boundary parametrization, inward normals, distance to
//! the boundary, and deterministic quadrature over the boundary, the interior,
//! and time.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{config, domain, Error, Result};
use crate::quadrature::{CompositeRule, GaussLegendre};

/// Points on the boundary closer than this are treated as on it.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// Default truncation radius for the half-space boundary `R^m`.
pub const DEFAULT_TRUNCATION_RADIUS: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Domain {
    /// `(a, b)`.
    Interval { a: f64, b: f64 },
    /// `(0, ∞)`.
    HalfLine,
    /// `(0, ∞) × R^m`; points are `(x_0, x_1, .., x_m)`.
    HalfSpace { m: usize },
    /// `{ |x| < 1 } ⊂ R^d`.
    UnitBall { d: usize },
}

impl Domain {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Domain::Interval { a, b }.validated()
    }

    pub fn half_space(m: usize) -> Result<Self> {
        Domain::HalfSpace { m }.validated()
    }

    pub fn unit_ball(d: usize) -> Result<Self> {
        Domain::UnitBall { d }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        match self {
            Domain::Interval { a, b } if !(a < b) || !a.is_finite() || !b.is_finite() => {
                config(format!("interval requires a < b, got ({a}, {b})"))
            }
            Domain::HalfSpace { m: 0 } => config("half-space requires m >= 1"),
            Domain::UnitBall { d: 0 } => config("unit ball requires d >= 1"),
            other => Ok(other),
        }
    }

    pub fn dimension(&self) -> usize {
        match *self {
            Domain::Interval { .. } | Domain::HalfLine => 1,
            Domain::HalfSpace { m } => m + 1,
            Domain::UnitBall { d } => d,
        }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self, Domain::Interval { .. } | Domain::UnitBall { .. })
    }

    /// Short tag used in CSV rows and the experiment registry.
    pub fn tag(&self) -> String {
        match *self {
            Domain::Interval { a, b } if a == 0.0 && b == 1.0 => "interval".into(),
            Domain::Interval { a, b } => format!("interval({a},{b})"),
            Domain::HalfLine => "halfline".into(),
            Domain::HalfSpace { m } => format!("halfspace{m}"),
            Domain::UnitBall { d } => format!("ball{d}"),
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dimension() {
            return domain(format!(
                "point {x:?} has dimension {}, domain {} has dimension {}",
                x.len(),
                self.tag(),
                self.dimension()
            ));
        }
        Ok(())
    }

    /// Signed distance to the boundary: positive inside.
    fn signed_distance(&self, x: &[f64]) -> f64 {
        match *self {
            Domain::Interval { a, b } => (x[0] - a).min(b - x[0]),
            Domain::HalfLine | Domain::HalfSpace { .. } => x[0],
            Domain::UnitBall { .. } => 1.0 - norm(x),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dimension() && self.signed_distance(x) > 0.0
    }

    pub fn dist_to_boundary(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let s = self.signed_distance(x);
        if s > 0.0 && s.is_finite() {
            Ok(s)
        } else {
            domain(format!("{x:?} is not an interior point of {}", self.tag()))
        }
    }

    pub fn require_interior(&self, x: &[f64]) -> Result<()> {
        self.dist_to_boundary(x).map(|_| ())
    }

    pub fn is_on_boundary(&self, y: &[f64]) -> bool {
        y.len() == self.dimension() && self.signed_distance(y).abs() <= BOUNDARY_TOL
    }

    pub fn require_boundary(&self, y: &[f64]) -> Result<()> {
        self.check_dim(y)?;
        if self.is_on_boundary(y) {
            Ok(())
        } else {
            domain(format!("{y:?} is not on the boundary of {}", self.tag()))
        }
    }

    /// Unit inward normal at a boundary point.
    pub fn inward_normal(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.require_boundary(y)?;
        Ok(match *self {
            Domain::Interval { a, b } => {
                if (y[0] - a).abs() <= (y[0] - b).abs() {
                    vec![1.0]
                } else {
                    vec![-1.0]
                }
            }
            Domain::HalfLine => vec![1.0],
            Domain::HalfSpace { m } => {
                let mut n = vec![0.0; m + 1];
                n[0] = 1.0;
                n
            }
            Domain::UnitBall { .. } => {
                let r = norm(y);
                y.iter().map(|v| -v / r).collect()
            }
        })
    }

    /// Largest probe distance along an inward normal for which the probe
    /// point's distance to the boundary equals the step.
    pub fn reach(&self) -> f64 {
        match *self {
            Domain::Interval { a, b } => 0.5 * (b - a),
            Domain::HalfLine | Domain::HalfSpace { .. } => f64::INFINITY,
            Domain::UnitBall { .. } => 1.0,
        }
    }

    /// Interior points at the given distances from `anchor` along the inward normal.
    pub fn normal_probe_line(&self, anchor: &[f64], distances: &[f64]) -> Result<Vec<Vec<f64>>> {
        let n = self.inward_normal(anchor)?;
        let reach = self.reach();
        distances
            .iter()
            .map(|&s| {
                if !(s > 0.0) || s > reach {
                    return domain(format!("probe distance {s} outside (0, {reach}] for {}", self.tag()));
                }
                let p: Vec<f64> = anchor.iter().zip(&n).map(|(a, v)| a + s * v).collect();
                Ok(p)
            })
            .collect()
    }

    /// Canonical anchor used by rate experiments.
    pub fn default_anchor(&self) -> Vec<f64> {
        match *self {
            Domain::Interval { a, .. } => vec![a],
            Domain::HalfLine => vec![0.0],
            Domain::HalfSpace { m } => vec![0.0; m + 1],
            Domain::UnitBall { d } => {
                let mut v = vec![0.0; d];
                v[0] = 1.0;
                v
            }
        }
    }

    /// Deterministic quadrature for the natural boundary measure.
    ///
    /// The half-space boundary is unbounded and needs `truncation_radius`.
    pub fn boundary_quadrature(&self, n: usize, truncation_radius: Option<f64>) -> Result<BoundaryQuadrature> {
        if n == 0 {
            return config("boundary quadrature needs n >= 1");
        }
        match *self {
            Domain::Interval { a, b } => Ok(BoundaryQuadrature::new(vec![vec![a], vec![b]], vec![1.0, 1.0])),
            Domain::HalfLine => Ok(BoundaryQuadrature::new(vec![vec![0.0]], vec![1.0])),
            Domain::HalfSpace { m } => {
                let r = truncation_radius
                    .ok_or_else(|| Error::Config("half-space boundary quadrature needs a truncation radius".into()))?;
                if !(r > 0.0) {
                    return config(format!("truncation radius must be positive, got {r}"));
                }
                let per_panel = 8;
                let panels = n.div_ceil(per_panel).max(1);
                let rule = CompositeRule::uniform(-r, r, panels, per_panel);
                let mut q = tensor_boundary(m, &rule.nodes, &rule.weights);
                q.truncation_radius = Some(r);
                Ok(q)
            }
            Domain::UnitBall { d } => sphere_quadrature(d, n),
        }
    }

    /// Half-space boundary rule graded toward `center` (a boundary point), so
    /// kernels concentrated at scale `min_width` are resolved.
    pub fn graded_boundary_quadrature(
        &self,
        center: &[f64],
        min_width: f64,
        truncation_radius: f64,
    ) -> Result<BoundaryQuadrature> {
        match *self {
            Domain::HalfSpace { m } => {
                self.require_boundary(center)?;
                let mut axes = Vec::with_capacity(m);
                for i in 0..m {
                    axes.push(CompositeRule::graded_toward(
                        -truncation_radius,
                        truncation_radius,
                        center[i + 1],
                        min_width,
                        12,
                    ));
                }
                let mut q = tensor_boundary_axes(m, &axes);
                q.truncation_radius = Some(truncation_radius);
                Ok(q)
            }
            Domain::UnitBall { d: 2 } => {
                let n = ((60.0 / min_width).ceil() as usize).max(256);
                sphere_quadrature(2, n)
            }
            _ => self.boundary_quadrature(1, Some(truncation_radius)),
        }
    }

    /// Interior quadrature rule with roughly `n` nodes per axis.
    pub fn interior_quadrature(&self, n: usize) -> Result<InteriorQuadrature> {
        let n = n.max(2);
        match *self {
            Domain::Interval { a, b } => {
                let gl = GaussLegendre::new(n);
                let (nodes, weights) = gl.mapped(a, b).map(|(x, w)| (vec![x], w)).unzip();
                Ok(InteriorQuadrature { nodes, weights })
            }
            Domain::HalfLine => {
                let rule = CompositeRule::uniform(0.0, HALF_LINE_INTERIOR_CUTOFF, n.div_ceil(8), 16);
                let nodes = rule.nodes.iter().map(|&x| vec![x]).collect();
                Ok(InteriorQuadrature { nodes, weights: rule.weights })
            }
            Domain::UnitBall { d: 1 } => Domain::Interval { a: -1.0, b: 1.0 }.interior_quadrature(n),
            Domain::UnitBall { d } if d == 2 || d == 3 => {
                let radial = GaussLegendre::new(n);
                let sphere = sphere_quadrature(d, 2 * n)?;
                let mut nodes = Vec::with_capacity(radial.len() * sphere.len());
                let mut weights = Vec::with_capacity(nodes.capacity());
                for (r, wr) in radial.mapped(0.0, 1.0) {
                    let jac = r.powi(d as i32 - 1);
                    for (y, wy) in sphere.nodes.iter().zip(&sphere.weights) {
                        nodes.push(y.iter().map(|v| r * v).collect());
                        weights.push(wr * wy * jac);
                    }
                }
                Ok(InteriorQuadrature { nodes, weights })
            }
            Domain::UnitBall { d } => config(format!("interior quadrature not supported for ball{d}")),
            Domain::HalfSpace { .. } => config("interior quadrature on the half-space is not supported"),
        }
    }
}

/// Interior rules on the half-line are truncated here.
pub const HALF_LINE_INTERIOR_CUTOFF: f64 = 60.0;

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn dist2(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Discrete approximation of a boundary measure: nodes on the boundary with
/// nonnegative weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryQuadrature {
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation_radius: Option<f64>,
}

impl BoundaryQuadrature {
    pub fn new(nodes: Vec<Vec<f64>>, weights: Vec<f64>) -> Self {
        assert_eq!(nodes.len(), weights.len());
        Self { nodes, weights, truncation_radius: None }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(y, &w)| w * f(y)).sum()
    }

    /// Upper bound on the fraction of `∫ e^{-|y|²/(4s)} dy` lost outside the
    /// truncation ball, for heat-type kernels at time scale `s`.
    pub fn gaussian_tail_bound(&self, s: f64) -> Option<f64> {
        self.truncation_radius.map(|r| {
            // 1-d Gaussian tail: erfc(R / (2√s)) ≤ exp(−R²/4s)
            (-(r * r) / (4.0 * s)).exp()
        })
    }
}

/// Interior quadrature: nodes in the domain with positive weights.
#[derive(Debug, Clone)]
pub struct InteriorQuadrature {
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl InteriorQuadrature {
    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(y, &w)| w * f(y)).sum()
    }
}

fn tensor_boundary(m: usize, nodes: &[f64], weights: &[f64]) -> BoundaryQuadrature {
    let axis = CompositeRule { nodes: nodes.to_vec(), weights: weights.to_vec() };
    let axes = vec![axis; m];
    tensor_boundary_axes(m, &axes)
}

fn tensor_boundary_axes(m: usize, axes: &[CompositeRule]) -> BoundaryQuadrature {
    let mut pts: Vec<(Vec<f64>, f64)> = vec![(vec![0.0], 1.0)];
    for axis in axes.iter().take(m) {
        let mut next = Vec::with_capacity(pts.len() * axis.nodes.len());
        for (p, w) in &pts {
            for (&x, &wx) in axis.nodes.iter().zip(&axis.weights) {
                let mut q = p.clone();
                q.push(x);
                next.push((q, w * wx));
            }
        }
        pts = next;
    }
    let (nodes, weights) = pts.into_iter().unzip();
    BoundaryQuadrature::new(nodes, weights)
}

fn sphere_quadrature(d: usize, n: usize) -> Result<BoundaryQuadrature> {
    match d {
        1 => Ok(BoundaryQuadrature::new(vec![vec![-1.0], vec![1.0]], vec![1.0, 1.0])),
        2 => {
            let w = 2.0 * PI / n as f64;
            let nodes = (0..n)
                .map(|k| {
                    let th = 2.0 * PI * k as f64 / n as f64;
                    vec![th.cos(), th.sin()]
                })
                .collect();
            Ok(BoundaryQuadrature::new(nodes, vec![w; n]))
        }
        3 => {
            let gl = GaussLegendre::new(n);
            let nphi = 2 * n;
            let wphi = 2.0 * PI / nphi as f64;
            let mut nodes = Vec::with_capacity(n * nphi);
            let mut weights = Vec::with_capacity(n * nphi);
            for (z, wz) in gl.nodes.iter().zip(&gl.weights) {
                let s = (1.0 - z * z).sqrt();
                for k in 0..nphi {
                    let phi = 2.0 * PI * k as f64 / nphi as f64;
                    nodes.push(vec![s * phi.cos(), s * phi.sin(), *z]);
                    weights.push(wz * wphi);
                }
            }
            Ok(BoundaryQuadrature::new(nodes, weights))
        }
        _ => config(format!("boundary quadrature for ball{d} is not supported (d <= 3)")),
    }
}

/// Time discretization of `(0, T]`. The origin is implicit: paths start at 0
/// at `t = 0` and `nodes[0] > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    nodes: Vec<f64>,
    scheme: TimeScheme,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeScheme {
    Uniform,
    LogSpaced,
    Custom,
}

impl TimeGrid {
    pub fn uniform(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || steps == 0 {
            return config(format!("uniform grid needs T > 0 and steps >= 1, got ({horizon}, {steps})"));
        }
        let nodes = (1..=steps).map(|i| horizon * i as f64 / steps as f64).collect();
        Ok(Self { nodes, scheme: TimeScheme::Uniform })
    }

    pub fn log_spaced(t_min: f64, t_max: f64, n: usize) -> Result<Self> {
        if !(t_min > 0.0) || !(t_max > t_min) || n < 2 {
            return config(format!("log grid needs 0 < t_min < t_max and n >= 2, got ({t_min}, {t_max}, {n})"));
        }
        let (l0, l1) = (t_min.ln(), t_max.ln());
        let nodes = (0..n).map(|i| (l0 + (l1 - l0) * i as f64 / (n - 1) as f64).exp()).collect();
        Ok(Self { nodes, scheme: TimeScheme::LogSpaced })
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() || !(nodes[0] > 0.0) || nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return config("time grid nodes must be positive and strictly increasing");
        }
        Ok(Self { nodes, scheme: TimeScheme::Custom })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn scheme(&self) -> TimeScheme {
        self.scheme
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        *self.nodes.last().expect("grid is nonempty")
    }

    /// Cells `(s_j, s_{j+1})` with `s_0 = 0`.
    pub fn cells(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        std::iter::once(0.0).chain(self.nodes.iter().copied()).zip(self.nodes.iter().copied())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn distance_examples() {
        let i = Domain::interval(0.0, 1.0).unwrap();
        assert_eq!(i.dist_to_boundary(&[0.25]).unwrap(), 0.25);
        let b = Domain::unit_ball(2).unwrap();
        assert!((b.dist_to_boundary(&[0.6, 0.0]).unwrap() - 0.4).abs() < 1e-15);
        let h = Domain::half_space(1).unwrap();
        assert_eq!(h.dist_to_boundary(&[0.01, 7.3]).unwrap(), 0.01);
    }

    #[test]
    fn distance_rejects_exterior_and_boundary() {
        let i = Domain::interval(0.0, 1.0).unwrap();
        assert!(matches!(i.dist_to_boundary(&[1.0]), Err(Error::Domain(_))));
        assert!(matches!(i.dist_to_boundary(&[1.5]), Err(Error::Domain(_))));
        assert!(matches!(Domain::HalfLine.dist_to_boundary(&[-0.1]), Err(Error::Domain(_))));
        assert!(Domain::interval(1.0, 1.0).is_err());
        assert_eq!(Domain::half_space(3).unwrap().dimension(), 4);
    }

    #[test]
    fn circle_quadrature_four_nodes() {
        let q = Domain::unit_ball(2).unwrap().boundary_quadrature(4, None).unwrap();
        let expected = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)];
        for (node, (ex, ey)) in q.nodes.iter().zip(expected) {
            assert!((node[0] - ex).abs() < 1e-15 && (node[1] - ey).abs() < 1e-15);
        }
        assert!(q.weights.iter().all(|&w| (w - PI / 2.0).abs() < 1e-15));
    }

    #[test]
    fn two_point_and_single_point_boundaries() {
        let q = Domain::interval(0.0, 1.0).unwrap().boundary_quadrature(17, None).unwrap();
        assert_eq!(q.nodes, vec![vec![0.0], vec![1.0]]);
        assert_eq!(q.weights, vec![1.0, 1.0]);
        let q = Domain::HalfLine.boundary_quadrature(5, None).unwrap();
        assert_eq!(q.nodes, vec![vec![0.0]]);
        assert_eq!(q.weights, vec![1.0]);
    }

    #[test]
    fn half_space_needs_truncation() {
        let h = Domain::half_space(1).unwrap();
        assert!(matches!(h.boundary_quadrature(64, None), Err(Error::Config(_))));
        let q = h.boundary_quadrature(64, Some(20.0)).unwrap();
        assert!((q.total_weight() - 40.0).abs() < 1e-10);
        assert!(q.nodes.iter().all(|y| h.is_on_boundary(y)));
        let q2 = Domain::half_space(2).unwrap().boundary_quadrature(16, Some(3.0)).unwrap();
        assert!((q2.total_weight() - 36.0).abs() < 1e-10);
    }

    #[test]
    fn weight_sums_match_boundary_measure() {
        let q = Domain::unit_ball(2).unwrap().boundary_quadrature(101, None).unwrap();
        assert!((q.total_weight() - 2.0 * PI).abs() < 1e-12);
        let q = Domain::unit_ball(3).unwrap().boundary_quadrature(24, None).unwrap();
        assert!((q.total_weight() - 4.0 * PI).abs() < 1e-10);
        let g = Domain::half_space(1).unwrap().graded_boundary_quadrature(&[0.0, 0.3], 1e-3, 20.0).unwrap();
        assert!((g.total_weight() - 40.0).abs() < 1e-10);
    }

    #[test]
    fn probe_line_examples() {
        let b = Domain::unit_ball(2).unwrap();
        let p = b.normal_probe_line(&[1.0, 0.0], &[0.1, 0.01]).unwrap();
        assert!((p[0][0] - 0.9).abs() < 1e-15 && p[0][1] == 0.0);
        assert!((p[1][0] - 0.99).abs() < 1e-15);
        let h = Domain::half_space(1).unwrap();
        assert_eq!(h.normal_probe_line(&[0.0, 0.0], &[0.5]).unwrap(), vec![vec![0.5, 0.0]]);
        let i = Domain::interval(0.0, 1.0).unwrap();
        assert_eq!(i.normal_probe_line(&[0.0], &[0.25]).unwrap(), vec![vec![0.25]]);
        assert!(matches!(i.normal_probe_line(&[0.0], &[0.75]), Err(Error::Domain(_))));
        assert!(matches!(b.normal_probe_line(&[0.5, 0.0], &[0.1]), Err(Error::Domain(_))));
    }

    #[test]
    fn time_grids() {
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        assert_eq!(g.nodes(), &[0.25, 0.5, 0.75, 1.0]);
        let cells: Vec<_> = g.cells().collect();
        assert_eq!(cells[0], (0.0, 0.25));
        let l = TimeGrid::log_spaced(1e-3, 1.0, 4).unwrap();
        assert!((l.nodes()[1] - 1e-2).abs() < 1e-15);
        assert!(TimeGrid::from_nodes(vec![0.0, 1.0]).is_err());
        assert!(TimeGrid::from_nodes(vec![0.5, 0.5]).is_err());
    }

    fn domain_strategy() -> impl Strategy<Value = (Domain, Vec<f64>)> {
        prop_oneof![
            (-2.0..2.0f64, 0.1..3.0f64)
                .prop_map(|(a, w)| { (Domain::Interval { a, b: a + w }, vec![if w > 1.0 { a } else { a + w }]) }),
            Just((Domain::HalfLine, vec![0.0])),
            (-5.0..5.0f64).prop_map(|y| (Domain::HalfSpace { m: 1 }, vec![0.0, y])),
            (0.0..(2.0 * PI)).prop_map(|th| (Domain::UnitBall { d: 2 }, vec![th.cos(), th.sin()])),
        ]
    }

    proptest! {
        #[test]
        fn probe_distance_round_trips((dom, anchor) in domain_strategy(), frac in 0.001..1.0f64) {
            let reach = dom.reach().min(10.0);
            let s = frac * reach;
            let p = dom.normal_probe_line(&anchor, &[s]).unwrap();
            let back = dom.dist_to_boundary(&p[0]).unwrap();
            prop_assert!((back - s).abs() < 1e-12 * s.max(1.0), "{back} vs {s}");
        }
    }
}
