//! Dirichlet maps `γ ↦ Dγ`, the weak-solution residual, and one-dimensional
//! distributional Laplacian identities.
//!
//! Distributional pairings use `(δ'_a, φ) = −φ'(a)`.

use serde::Serialize;

use crate::domains::{BoundaryQuadrature, Domain};
use crate::error::{config, usage, Result};
use crate::fields::elliptic_field;
use crate::kernels::{green_normal_unchecked, KernelConfig};
use crate::noise::{BoundaryNoiseSpec, NoiseRealization};
use crate::quadrature::{CompositeRule, GaussLegendre};

/// Boundary data `γ` in one of the representations the maps understand.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryData {
    /// `(γ(a), γ(b))` on an interval.
    Endpoints { left: f64, right: f64 },
    /// `γ(0)` on the half-line.
    Scalar(f64),
    /// Function samples aligned with a boundary quadrature.
    Samples { quadrature: BoundaryQuadrature, values: Vec<f64> },
    /// A realization of a boundary noise.
    Noise { spec: BoundaryNoiseSpec, realization: NoiseRealization },
}

impl BoundaryData {
    pub fn samples(quadrature: BoundaryQuadrature, values: Vec<f64>) -> Result<Self> {
        if values.len() != quadrature.len() {
            return config(format!(
                "{} boundary values for a quadrature with {} nodes",
                values.len(),
                quadrature.len()
            ));
        }
        Ok(Self::Samples { quadrature, values })
    }

    /// Samples `f` at the nodes of `quadrature`.
    pub fn from_fn(quadrature: BoundaryQuadrature, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = quadrature.nodes.iter().map(|y| f(y)).collect();
        Self::Samples { quadrature, values }
    }

    /// `aγ + bγ'` for two data of the same shape.
    pub fn combine(a: f64, g: &Self, b: f64, h: &Self) -> Result<Self> {
        match (g, h) {
            (Self::Endpoints { left: l1, right: r1 }, Self::Endpoints { left: l2, right: r2 }) => {
                Ok(Self::Endpoints { left: a * l1 + b * l2, right: a * r1 + b * r2 })
            }
            (Self::Scalar(u), Self::Scalar(v)) => Ok(Self::Scalar(a * u + b * v)),
            (Self::Samples { quadrature: q1, values: v1 }, Self::Samples { quadrature: q2, values: v2 })
                if q1 == q2 =>
            {
                Ok(Self::Samples {
                    quadrature: q1.clone(),
                    values: v1.iter().zip(v2).map(|(x, y)| a * x + b * y).collect(),
                })
            }
            _ => usage("linear combination needs boundary data of the same representation"),
        }
    }

    /// Smallest and largest boundary value, when the data are function values.
    pub fn range(&self) -> Option<(f64, f64)> {
        let vals: Vec<f64> = match self {
            Self::Endpoints { left, right } => vec![*left, *right],
            Self::Scalar(v) => vec![*v],
            Self::Samples { values, .. } => values.clone(),
            Self::Noise { .. } => return None,
        };
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some((lo, hi))
    }

    /// `∫ γ g dν` for function-valued data.
    fn pair(&self, dom: &Domain, mut g: impl FnMut(&[f64]) -> f64) -> Result<f64> {
        match (self, *dom) {
            (Self::Endpoints { left, right }, Domain::Interval { a, b }) => Ok(left * g(&[a]) + right * g(&[b])),
            (Self::Scalar(v), Domain::HalfLine) => Ok(v * g(&[0.0])),
            (Self::Samples { quadrature, values }, _) => {
                Ok(quadrature.nodes.iter().zip(&quadrature.weights).zip(values).map(|((y, w), v)| w * v * g(y)).sum())
            }
            (Self::Noise { .. }, _) => usage("pairing a noise realization needs the fields module"),
            (d, _) => config(format!("boundary data {d:?} does not fit the domain {}", dom.tag())),
        }
    }
}

/// `Dγ(x)`: the solution of `Δu = λu`, `u = γ` on the boundary.
///
/// Uses the explicit formulas on the interval and half-line, and the
/// boundary pairing `(γ, ∂𝒢/∂n_y(x,·))` otherwise.
pub fn dirichlet_map(dom: &Domain, cfg: &KernelConfig, gamma: &BoundaryData, x: &[f64]) -> Result<f64> {
    if let Some(v) = dirichlet_map_closed_form(dom, cfg, gamma, x)? {
        return Ok(v);
    }
    dirichlet_map_quadrature(dom, cfg, gamma, x)
}

/// Explicit Dirichlet maps on the interval and half-line, and the harmonic
/// extension of equispaced samples on the disk; `None` elsewhere.
pub fn dirichlet_map_closed_form(
    dom: &Domain,
    cfg: &KernelConfig,
    gamma: &BoundaryData,
    x: &[f64],
) -> Result<Option<f64>> {
    cfg.validate(dom)?;
    dom.require_interior(x)?;
    match (dom, gamma) {
        (Domain::Interval { a, b }, BoundaryData::Endpoints { left, right }) => {
            let (l, s) = (b - a, cfg.lambda.sqrt());
            if cfg.lambda == 0.0 {
                Ok(Some(left + (right - left) * (x[0] - a) / l))
            } else {
                let v = (left * (s * (b - x[0])).sinh() + right * (s * (x[0] - a)).sinh()) / (s * l).sinh();
                Ok(Some(v))
            }
        }
        (Domain::HalfLine, BoundaryData::Scalar(g)) => Ok(Some(g * (-cfg.lambda.sqrt() * x[0]).exp())),
        (Domain::UnitBall { d: 2 }, BoundaryData::Samples { quadrature, values }) if cfg.lambda == 0.0 => {
            Ok(disk_trig_extension(quadrature, values, x))
        }
        _ => Ok(None),
    }
}

/// Harmonic extension of the trigonometric interpolant of samples at
/// equispaced angles `2πk/N`; `None` for any other node layout.
fn disk_trig_extension(q: &crate::domains::BoundaryQuadrature, values: &[f64], x: &[f64]) -> Option<f64> {
    let n = q.len();
    if n < 3 {
        return None;
    }
    for (k, y) in q.nodes.iter().enumerate() {
        let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
        if (y[0] - th.cos()).abs() > 1e-12 || (y[1] - th.sin()).abs() > 1e-12 {
            return None;
        }
    }
    let (r, phi) = (x[0].hypot(x[1]), x[1].atan2(x[0]));
    let top = n / 2;
    let mut u = values.iter().sum::<f64>() / n as f64;
    for m in 1..=top {
        let (mut a, mut b) = (0.0, 0.0);
        for (k, v) in values.iter().enumerate() {
            let th = 2.0 * std::f64::consts::PI * (m * k % n) as f64 / n as f64;
            a += v * th.cos();
            b += v * th.sin();
        }
        // the Nyquist mode is split evenly between ±N/2
        let scale = if 2 * m == n { 1.0 } else { 2.0 } / n as f64;
        u += scale * r.powi(m as i32) * (a * (m as f64 * phi).cos() + b * (m as f64 * phi).sin());
    }
    Some(u)
}

/// `(γ, ∂𝒢/∂n_y(x,·))` evaluated on the boundary representation of `γ`.
pub fn dirichlet_map_quadrature(dom: &Domain, cfg: &KernelConfig, gamma: &BoundaryData, x: &[f64]) -> Result<f64> {
    cfg.validate(dom)?;
    dom.require_interior(x)?;
    if let BoundaryData::Noise { spec, realization } = gamma {
        return elliptic_field(dom, cfg, spec, realization, x);
    }
    let mut err = None;
    let v = gamma.pair(dom, |y| {
        green_normal_unchecked(dom, cfg, x, y).unwrap_or_else(|e| {
            err = Some(e);
            0.0
        })
    })?;
    match err {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// A test function `ψ` vanishing on the boundary, with its Laplacian and
/// inward normal derivative.
#[derive(Debug, Clone, Copy)]
pub enum TestFunction {
    /// `sin(kπ(x−a)/L)` on `(a, b)`.
    IntervalSine { k: u32 },
    /// `(1 − |x|²) Re(x₁ + i x₂)^k` on the unit ball (`x₁` only when `d = 1`,
    /// where `k ≤ 1` so the second factor stays harmonic).
    BallBubble { k: u32 },
    /// `x e^{-x}` on the half-line.
    HalfLineXExp,
    /// User-supplied `(ψ, Δψ, ∂ψ/∂n)`.
    Custom { value: fn(&[f64]) -> f64, laplacian: fn(&[f64]) -> f64, normal_derivative: fn(&[f64]) -> f64 },
}

fn harmonic_power(k: u32, x: &[f64]) -> f64 {
    let (re, im) = (x[0], x.get(1).copied().unwrap_or(0.0));
    let (mut pr, mut pi) = (1.0, 0.0);
    for _ in 0..k {
        let t = pr * re - pi * im;
        pi = pr * im + pi * re;
        pr = t;
    }
    pr
}

impl TestFunction {
    pub fn value(&self, dom: &Domain, x: &[f64]) -> f64 {
        match (*self, *dom) {
            (Self::IntervalSine { k }, Domain::Interval { a, b }) => {
                (k as f64 * std::f64::consts::PI * (x[0] - a) / (b - a)).sin()
            }
            (Self::BallBubble { k }, _) => (1.0 - x.iter().map(|v| v * v).sum::<f64>()) * harmonic_power(k, x),
            (Self::HalfLineXExp, _) => x[0] * (-x[0]).exp(),
            (Self::Custom { value, .. }, _) => value(x),
            _ => f64::NAN,
        }
    }

    pub fn laplacian(&self, dom: &Domain, x: &[f64]) -> f64 {
        match (*self, *dom) {
            (Self::IntervalSine { k }, Domain::Interval { a, b }) => {
                let w = k as f64 * std::f64::consts::PI / (b - a);
                -w * w * (w * (x[0] - a)).sin()
            }
            // (1−|x|²)h with h harmonic and homogeneous of degree k
            (Self::BallBubble { k }, _) => -(2.0 * x.len() as f64 + 4.0 * k as f64) * harmonic_power(k, x),
            (Self::HalfLineXExp, _) => (x[0] - 2.0) * (-x[0]).exp(),
            (Self::Custom { laplacian, .. }, _) => laplacian(x),
            _ => f64::NAN,
        }
    }

    /// Inward normal derivative at a boundary point.
    pub fn normal_derivative(&self, dom: &Domain, y: &[f64]) -> f64 {
        match (*self, *dom) {
            (Self::IntervalSine { k }, Domain::Interval { a, b }) => {
                let w = k as f64 * std::f64::consts::PI / (b - a);
                if (y[0] - a).abs() <= (y[0] - b).abs() {
                    w
                } else {
                    -w * (w * (b - a)).cos()
                }
            }
            (Self::BallBubble { k }, _) => 2.0 * harmonic_power(k, y),
            (Self::HalfLineXExp, _) => 1.0,
            (Self::Custom { normal_derivative, .. }, _) => normal_derivative(y),
            _ => f64::NAN,
        }
    }

    fn fits(&self, dom: &Domain) -> bool {
        matches!(
            (self, dom),
            (Self::IntervalSine { k: 1.. }, Domain::Interval { .. })
                | (Self::BallBubble { k: 0 | 1 }, Domain::UnitBall { d: 1 })
                | (Self::BallBubble { .. }, Domain::UnitBall { d: 2.. })
                | (Self::HalfLineXExp, Domain::HalfLine)
                | (Self::Custom { .. }, _)
        )
    }
}

/// Boundary nodes used to pair `γ` with `∂ψ/∂n`, and to check `ψ = 0`.
fn boundary_rule(dom: &Domain, gamma: &BoundaryData) -> Result<BoundaryQuadrature> {
    match gamma {
        BoundaryData::Samples { quadrature, .. } => Ok(quadrature.clone()),
        _ => dom.boundary_quadrature(256, None),
    }
}

/// `|(u, Δψ) + (γ, ∂ψ/∂n) − λ(u, ψ)|` with `u = Dγ`, all pairings by quadrature.
pub fn weak_residual(dom: &Domain, cfg: &KernelConfig, gamma: &BoundaryData, psi: &TestFunction) -> Result<f64> {
    weak_residual_with(dom, cfg, gamma, psi, 48)
}

/// [`weak_residual`] with an explicit interior quadrature order.
pub fn weak_residual_with(
    dom: &Domain,
    cfg: &KernelConfig,
    gamma: &BoundaryData,
    psi: &TestFunction,
    interior_order: usize,
) -> Result<f64> {
    cfg.validate(dom)?;
    if !psi.fits(dom) {
        return usage(format!("test function {psi:?} is not defined on {}", dom.tag()));
    }
    let bq = boundary_rule(dom, gamma)?;
    for y in &bq.nodes {
        let v = psi.value(dom, y);
        if v.abs() > 1e-12 {
            return usage(format!("test function does not vanish on the boundary: ψ({y:?}) = {v:e}"));
        }
    }
    let iq = dom.interior_quadrature(interior_order)?;
    let mut u_lap = 0.0;
    let mut u_psi = 0.0;
    for (x, w) in iq.nodes.iter().zip(&iq.weights) {
        if !dom.contains(x) {
            continue;
        }
        let u = dirichlet_map(dom, cfg, gamma, x)?;
        u_lap += w * u * psi.laplacian(dom, x);
        u_psi += w * u * psi.value(dom, x);
    }
    let boundary = match gamma {
        BoundaryData::Noise { .. } => return usage("weak residual needs function-valued boundary data"),
        g => g.pair(dom, |y| psi.normal_derivative(dom, y))?,
    };
    Ok((u_lap + boundary - cfg.lambda * u_psi).abs())
}

/// The three one-dimensional cases: `ψ₁ = 1` and `ψ₂ = x` on `(0,1)`,
/// `ψ = e^{-x}` on the half-line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LaplacianCase {
    IntervalPsi1,
    IntervalPsi2,
    HalflineExp,
}

impl LaplacianCase {
    pub const ALL: [LaplacianCase; 3] = [Self::IntervalPsi1, Self::IntervalPsi2, Self::HalflineExp];

    pub fn name(&self) -> &'static str {
        match self {
            Self::IntervalPsi1 => "interval_psi1",
            Self::IntervalPsi2 => "interval_psi2",
            Self::HalflineExp => "halfline_exp",
        }
    }

    fn psi(&self, x: f64) -> f64 {
        match self {
            Self::IntervalPsi1 => 1.0,
            Self::IntervalPsi2 => x,
            Self::HalflineExp => (-x).exp(),
        }
    }
}

/// A one-dimensional test function with its first two derivatives.
#[derive(Debug, Clone, Copy)]
pub struct Phi {
    pub f: fn(f64) -> f64,
    pub d1: fn(f64) -> f64,
    pub d2: fn(f64) -> f64,
}

impl Phi {
    /// `sin(πx)` on `(0, 1)`.
    pub fn sine() -> Self {
        use std::f64::consts::PI;
        Self { f: |x| (PI * x).sin(), d1: |x| PI * (PI * x).cos(), d2: |x| -PI * PI * (PI * x).sin() }
    }

    /// `x e^{-x}` on the half-line.
    pub fn x_exp() -> Self {
        Self { f: |x| x * (-x).exp(), d1: |x| (1.0 - x) * (-x).exp(), d2: |x| (x - 2.0) * (-x).exp() }
    }
}

/// `(lhs, rhs)` where `lhs = ∫ ψ φ''` by quadrature and `rhs` is the pairing
/// of `φ` with the stated distributional Laplacian:
/// `Δψ₁ = δ₀' − δ₁'`, `Δψ₂ = −δ₁'`, `Δe^{-x} = −δ₀' + e^{-x}`.
pub fn distributional_laplacian_check(case: LaplacianCase, phi: &Phi) -> Result<(f64, f64)> {
    let dprime = |a: f64| -(phi.d1)(a);
    match case {
        LaplacianCase::IntervalPsi1 | LaplacianCase::IntervalPsi2 => {
            for a in [0.0, 1.0] {
                if (phi.f)(a).abs() > 1e-12 {
                    return usage(format!("φ({a}) = {} does not vanish", (phi.f)(a)));
                }
            }
            let gl = GaussLegendre::new(64);
            let lhs = gl.integrate(0.0, 1.0, |x| case.psi(x) * (phi.d2)(x));
            let rhs = match case {
                LaplacianCase::IntervalPsi1 => dprime(0.0) - dprime(1.0),
                _ => -dprime(1.0),
            };
            Ok((lhs, rhs))
        }
        LaplacianCase::HalflineExp => {
            if (phi.f)(0.0).abs() > 1e-12 {
                return usage(format!("φ(0) = {} does not vanish", (phi.f)(0.0)));
            }
            let rule = CompositeRule::uniform(0.0, 80.0, 80, 16);
            let lhs = rule.integrate(|x| case.psi(x) * (phi.d2)(x));
            let pair = rule.integrate(|x| case.psi(x) * (phi.f)(x));
            Ok((lhs, -dprime(0.0) + pair))
        }
    }
}
