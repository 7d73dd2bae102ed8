//! Dirichlet heat kernels `G(t,x,y)`, resolvent (Green) kernels
//! `𝒢(x,y) = ∫_0^∞ e^{-λt} G(t,x,y) dt`, and their inward normal derivatives
//! in the boundary variable.
//!
//! All normal derivatives use the unit normal pointing into the domain, so the
//! Poisson kernel and the first-passage densities are nonnegative.
//!
//! Representations:
//! - half-line and half-space: method of images with the free Gaussian
//!   `Γ(t,x) = (4πt)^{-d/2} e^{-|x|²/4t}`;
//! - interval: image series for small times, sine eigen-series for
//!   `t >= 0.05 L²` (both are public for cross-checking);
//! - unit disk: Bessel eigen-series, valid for `t >= DISK_MIN_TIME`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::domains::{dist2, norm, Domain};
use crate::error::{config, domain, Error, Result};
use crate::quadrature::laplace_transform;
use crate::special::{bessel_j, disk_mode_table, DISK_MIN_TIME};

pub const DEFAULT_SERIES_TERMS: usize = 64;

/// Eigen-series is used on the interval once `t / L²` reaches this.
pub const EIGEN_SWITCH: f64 = 0.05;

/// Resolvent shift and discretization parameters for kernel evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "default_terms")]
    pub series_terms: usize,
    /// Upper bound for the lower end of the Laplace-transform time grid.
    #[serde(default = "default_t_min")]
    pub laplace_t_min: f64,
    #[serde(default = "default_per_decade")]
    pub laplace_per_decade: usize,
}

fn default_terms() -> usize {
    DEFAULT_SERIES_TERMS
}
fn default_t_min() -> f64 {
    1e-8
}
fn default_per_decade() -> usize {
    60
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            series_terms: DEFAULT_SERIES_TERMS,
            laplace_t_min: default_t_min(),
            laplace_per_decade: default_per_decade(),
        }
    }
}

impl KernelConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        Self { lambda, ..Self::default() }
    }

    pub fn validate(&self, domain: &Domain) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return config(format!("lambda must be finite and >= 0, got {}", self.lambda));
        }
        if !domain.is_bounded() && self.lambda <= 0.0 {
            return config(format!("lambda > 0 is required on the unbounded domain {}", domain.tag()));
        }
        if self.series_terms == 0 {
            return config("series_terms must be >= 1");
        }
        if !(self.laplace_t_min > 0.0) || self.laplace_per_decade < 4 {
            return config("Laplace grid needs t_min > 0 and at least 4 points per decade");
        }
        Ok(())
    }

    /// Log-spaced nodes for the Laplace transform. The upper end makes
    /// `e^{-(λ+μ₁)T} < 1e-12` with `μ₁` the bottom of the Dirichlet spectrum;
    /// the lower end is `min(laplace_t_min, r²/400)` for kernels whose time
    /// scale is `r²`.
    pub fn laplace_nodes(&self, domain: &Domain, r2: f64) -> Result<Vec<f64>> {
        self.validate(domain)?;
        let decay = self.lambda + spectral_bottom(domain);
        if decay <= 0.0 {
            return config("Laplace transform diverges: lambda = 0 on an unbounded domain");
        }
        let t_max = 27.7 / decay;
        let t_min = self.laplace_t_min.min(r2 / 400.0).max(1e-300);
        let decades = (t_max / t_min).log10();
        let n = ((decades * self.laplace_per_decade as f64).ceil() as usize).max(8);
        let (l0, l1) = (t_min.ln(), t_max.ln());
        Ok((0..=n).map(|i| (l0 + (l1 - l0) * i as f64 / n as f64).exp()).collect())
    }
}

fn spectral_bottom(domain: &Domain) -> f64 {
    match *domain {
        Domain::Interval { a, b } => (PI / (b - a)).powi(2),
        Domain::UnitBall { d: 1 } => (PI / 2.0).powi(2),
        // j_{0,1}²; Dirichlet spectrum of the disk
        Domain::UnitBall { d: 2 } => 2.404_825_557_695_773f64.powi(2),
        // π² for the 3-ball; larger balls only need a positive lower bound
        Domain::UnitBall { .. } => PI * PI,
        Domain::HalfLine | Domain::HalfSpace { .. } => 0.0,
    }
}

/// Free heat kernel `(4πt)^{-d/2} e^{-r²/4t}` as a function of `r²`.
pub fn gaussian(dim: usize, t: f64, r2: f64) -> f64 {
    (4.0 * PI * t).powf(-(dim as f64) / 2.0) * (-r2 / (4.0 * t)).exp()
}

fn g1(t: f64, z: f64) -> f64 {
    (4.0 * PI * t).powf(-0.5) * (-z * z / (4.0 * t)).exp()
}

/// Which derivative of `G(t,x,y)` to evaluate: `∂_t^n ∂_{x_axis}^{|α|}` with
/// `n ∈ {0,1}` and `|α| ∈ {0,1}` (not both one).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Derivative {
    pub time_order: u32,
    pub space_axis: Option<usize>,
}

impl Derivative {
    pub const NONE: Derivative = Derivative { time_order: 0, space_axis: None };

    pub fn space_order(&self) -> u32 {
        self.space_axis.is_some() as u32
    }
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        domain(format!("heat kernel needs t > 0, got {t}"))
    }
}

/// `G(t, x, y)` for the domain's Dirichlet Laplacian.
pub fn heat_kernel(dom: &Domain, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    check_time(t)?;
    dom.require_interior(x)?;
    dom.require_interior(y)?;
    heat_kernel_unchecked(dom, DEFAULT_SERIES_TERMS, t, x, y)
}

pub(crate) fn heat_kernel_unchecked(dom: &Domain, terms: usize, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    match *dom {
        Domain::Interval { a, b } => {
            let l = b - a;
            if t >= EIGEN_SWITCH * l * l {
                Ok(interval_heat_eigen(a, b, terms, t, x[0], y[0]).0)
            } else {
                Ok(interval_heat_images(a, b, terms, t, x[0], y[0]))
            }
        }
        Domain::HalfLine => Ok(g1(t, x[0] - y[0]) - g1(t, x[0] + y[0])),
        Domain::HalfSpace { m } => {
            let r2 = dist2(x, y);
            let rbar2 = r2 - (x[0] - y[0]).powi(2) + (x[0] + y[0]).powi(2);
            Ok(gaussian(m + 1, t, r2) - gaussian(m + 1, t, rbar2))
        }
        Domain::UnitBall { d: 2 } => disk_heat(t, x, Some(y)),
        Domain::UnitBall { d } => config(format!("heat kernel on ball{d} is not supported (d = 2 only)")),
    }
}

/// Image series on `(a, b)`: `Σ_n [g(ξ−η+2nL) − g(ξ+η+2nL)]` in shifted
/// coordinates, summed outward from `n = 0` until terms underflow or
/// `terms` images on each side are used.
pub fn interval_heat_images(a: f64, b: f64, terms: usize, t: f64, x: f64, y: f64) -> f64 {
    let l = b - a;
    let (xi, eta) = (x - a, y - a);
    image_sum(l, terms, t, |z| g1(t, xi - eta + z) - g1(t, xi + eta + z))
}

fn image_sum(l: f64, terms: usize, t: f64, mut term: impl FnMut(f64) -> f64) -> f64 {
    let mut s = term(0.0);
    for n in 1..=terms as i64 {
        let shift = 2.0 * n as f64 * l;
        let add = term(shift) + term(-shift);
        s += add;
        // Gaussian images beyond ~40 standard deviations are below 1e-300
        if shift - 2.0 * l > 0.0 && (shift - 2.0 * l).powi(2) / (4.0 * t) > 700.0 {
            break;
        }
    }
    s
}

/// Sine eigen-series on `(a, b)` with its truncation error bound
/// `2 e^{-K²π²t/L²}` (in units of `2/L`).
pub fn interval_heat_eigen(a: f64, b: f64, terms: usize, t: f64, x: f64, y: f64) -> (f64, f64) {
    let l = b - a;
    let (xi, eta) = ((x - a) / l, (y - a) / l);
    let tau = t / (l * l);
    let mut s = 0.0;
    for k in 1..=terms {
        let kp = k as f64 * PI;
        s += (kp * xi).sin() * (kp * eta).sin() * (-kp * kp * tau).exp();
    }
    let kk = terms as f64 * PI;
    (2.0 / l * s, 2.0 / l * 2.0 * (-kk * kk * tau).exp())
}

/// Analytic derivatives of `G`; see [`Derivative`].
pub fn heat_kernel_derivative(dom: &Domain, deriv: Derivative, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    check_time(t)?;
    dom.require_interior(x)?;
    dom.require_interior(y)?;
    if deriv.time_order > 1 || (deriv.time_order == 1 && deriv.space_axis.is_some()) {
        return config("only ∂_t and single spatial first derivatives are implemented");
    }
    if let Some(ax) = deriv.space_axis {
        if ax >= dom.dimension() {
            return config(format!("derivative axis {ax} out of range"));
        }
    }
    if deriv == Derivative::NONE {
        return heat_kernel_unchecked(dom, DEFAULT_SERIES_TERMS, t, x, y);
    }
    // derivative of the 1-d Gaussian term g(z) in t or z
    let dg = |z: f64| -> f64 {
        let g = g1(t, z);
        if deriv.time_order == 1 {
            g * (z * z / (4.0 * t * t) - 0.5 / t)
        } else {
            -z / (2.0 * t) * g
        }
    };
    match *dom {
        Domain::Interval { a, b } => {
            let (xi, eta) = (x[0] - a, y[0] - a);
            Ok(image_sum(b - a, DEFAULT_SERIES_TERMS, t, |z| dg(xi - eta + z) - dg(xi + eta + z)))
        }
        Domain::HalfLine => Ok(dg(x[0] - y[0]) - dg(x[0] + y[0])),
        Domain::HalfSpace { m } => {
            let d = m + 1;
            let r2 = dist2(x, y);
            let rbar2 = r2 - (x[0] - y[0]).powi(2) + (x[0] + y[0]).powi(2);
            let (g, gbar) = (gaussian(d, t, r2), gaussian(d, t, rbar2));
            Ok(match deriv.space_axis {
                None => {
                    let f = |r2: f64, g: f64| g * (r2 / (4.0 * t * t) - d as f64 / (2.0 * t));
                    f(r2, g) - f(rbar2, gbar)
                }
                Some(0) => -(x[0] - y[0]) / (2.0 * t) * g + (x[0] + y[0]) / (2.0 * t) * gbar,
                Some(i) => -(x[i] - y[i]) / (2.0 * t) * (g - gbar),
            })
        }
        Domain::UnitBall { .. } => config("analytic derivatives are not implemented on the ball"),
    }
}

/// Inward normal derivative `∂G/∂n_y(t, x, y)` at a boundary point `y`.
pub fn heat_kernel_normal_derivative(dom: &Domain, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    check_time(t)?;
    dom.require_interior(x)?;
    dom.require_boundary(y)?;
    heat_normal_unchecked(dom, DEFAULT_SERIES_TERMS, t, x, y)
}

pub(crate) fn heat_normal_unchecked(dom: &Domain, terms: usize, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    match *dom {
        Domain::Interval { a, b } => {
            let l = b - a;
            // reflect so the boundary point sits at the left end
            let xi = if (y[0] - a).abs() <= (y[0] - b).abs() { x[0] - a } else { b - x[0] };
            if t >= EIGEN_SWITCH * l * l {
                Ok(interval_normal_eigen(l, terms, t, xi))
            } else {
                Ok(interval_normal_images(l, terms, t, xi))
            }
        }
        Domain::HalfLine => Ok(x[0] / t * g1(t, x[0])),
        Domain::HalfSpace { m } => Ok(x[0] / t * gaussian(m + 1, t, dist2(x, y))),
        Domain::UnitBall { d: 2 } => disk_heat_normal(t, x, y),
        Domain::UnitBall { d } => config(format!("heat kernel on ball{d} is not supported (d = 2 only)")),
    }
}

/// `Σ_n (z_n/t) g(z_n)`, `z_n = ξ + 2nL`: inward derivative at the left end.
pub fn interval_normal_images(l: f64, terms: usize, t: f64, xi: f64) -> f64 {
    image_sum(l, terms, t, |z| {
        let zz = xi + z;
        zz / t * g1(t, zz)
    })
}

/// `(2/L) Σ_k (kπ/L) sin(kπξ/L) e^{-k²π²t/L²}`.
pub fn interval_normal_eigen(l: f64, terms: usize, t: f64, xi: f64) -> f64 {
    let tau = t / (l * l);
    let mut s = 0.0;
    for k in 1..=terms {
        let kp = k as f64 * PI;
        s += kp * (kp * xi / l).sin() * (-kp * kp * tau).exp();
    }
    2.0 / (l * l) * s
}

/// The half-space formula with the sign exactly as it is commonly printed,
/// `−(x₀/t) Γ(t, x − y)`, i.e. the derivative along `−e₀`.
pub fn halfspace_normal_derivative_outward(m: usize, t: f64, x: &[f64], y: &[f64]) -> f64 {
    -x[0] / t * gaussian(m + 1, t, dist2(x, y))
}

fn polar(x: &[f64]) -> (f64, f64) {
    (norm(x), x[1].atan2(x[0]))
}

fn disk_heat(t: f64, x: &[f64], y: Option<&[f64]>) -> Result<f64> {
    if t < DISK_MIN_TIME {
        return domain(format!("disk heat kernel series needs t >= {DISK_MIN_TIME:.4}, got {t}"));
    }
    let y = y.expect("interior point");
    let (r, th) = polar(x);
    let (rho, ph) = polar(y);
    let mut s = 0.0;
    for mode in disk_mode_table() {
        let decay = (-mode.zero * mode.zero * t).exp();
        if decay < 1e-18 {
            continue;
        }
        let n = mode.order as i32;
        let c = if n == 0 { 1.0 } else { 2.0 };
        s += c * bessel_j(n, mode.zero * r) * bessel_j(n, mode.zero * rho) * (n as f64 * (th - ph)).cos() * decay
            / (PI * mode.j_next * mode.j_next);
    }
    Ok(s)
}

fn disk_heat_normal(t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    if t < DISK_MIN_TIME {
        return domain(format!("disk heat kernel series needs t >= {DISK_MIN_TIME:.4}, got {t}"));
    }
    let (r, th) = polar(x);
    let ph = y[1].atan2(y[0]);
    let mut s = 0.0;
    for mode in disk_mode_table() {
        let decay = (-mode.zero * mode.zero * t).exp();
        if decay < 1e-18 {
            continue;
        }
        let n = mode.order as i32;
        let c = if n == 0 { 1.0 } else { 2.0 };
        s += c * mode.zero * bessel_j(n, mode.zero * r) * (n as f64 * (th - ph)).cos() * decay / (PI * mode.j_next);
    }
    Ok(s)
}

/// `𝒢(x, y) = ∫_0^∞ e^{-λt} G(t,x,y) dt`, using closed forms where they exist
/// (half-line with λ > 0, disk with λ = 0) and Laplace quadrature otherwise.
pub fn green_kernel(dom: &Domain, cfg: &KernelConfig, x: &[f64], y: &[f64]) -> Result<f64> {
    cfg.validate(dom)?;
    // the kernel vanishes when either argument is on the boundary
    if dom.is_on_boundary(x) || dom.is_on_boundary(y) {
        return Ok(0.0);
    }
    dom.require_interior(x)?;
    dom.require_interior(y)?;
    if dist2(x, y) == 0.0 {
        return Err(Error::Singular(x.to_vec()));
    }
    match *dom {
        Domain::HalfLine => {
            let s = cfg.lambda.sqrt();
            Ok(((-s * (x[0] - y[0]).abs()).exp() - (-s * (x[0] + y[0])).exp()) / (2.0 * s))
        }
        Domain::UnitBall { d: 2 } if cfg.lambda == 0.0 => {
            let ry = norm(y);
            let num = if ry == 0.0 {
                1.0
            } else {
                let ystar: Vec<f64> = y.iter().map(|v| v / (ry * ry)).collect();
                dist2(x, &ystar).sqrt() * ry
            };
            Ok((num / dist2(x, y).sqrt()).ln() / (2.0 * PI))
        }
        Domain::UnitBall { d: 2 } => config("disk Green kernel is implemented for lambda = 0 only"),
        _ => green_kernel_quadrature(dom, cfg, x, y),
    }
}

/// Laplace-transform quadrature of the heat kernel, without closed forms.
pub fn green_kernel_quadrature(dom: &Domain, cfg: &KernelConfig, x: &[f64], y: &[f64]) -> Result<f64> {
    let r2 = dist2(x, y);
    if r2 == 0.0 {
        return Err(Error::Singular(x.to_vec()));
    }
    let nodes = cfg.laplace_nodes(dom, r2)?;
    let mut err = None;
    let v = laplace_transform(&nodes, cfg.lambda, |t| {
        heat_kernel_unchecked(dom, cfg.series_terms, t, x, y).unwrap_or_else(|e| {
            err = Some(e);
            0.0
        })
    });
    match err {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// Normalizing constant `C_d` of the Poisson kernel of the unit ball,
/// calibrated so that the harmonic extension of `1` equals `1` at the centre
/// under the boundary quadrature.
pub fn poisson_constant(d: usize) -> f64 {
    match (Domain::UnitBall { d }).boundary_quadrature(64, None) {
        Ok(q) => 1.0 / q.total_weight(),
        Err(_) => {
            let area = 2.0 * PI.powf(d as f64 / 2.0) / statrs::function::gamma::gamma(d as f64 / 2.0);
            1.0 / area
        }
    }
}

/// Inward normal derivative `∂𝒢/∂n_y(x, y)` of the resolvent kernel.
pub fn green_normal_derivative(dom: &Domain, cfg: &KernelConfig, x: &[f64], y: &[f64]) -> Result<f64> {
    cfg.validate(dom)?;
    dom.require_interior(x)?;
    dom.require_boundary(y)?;
    green_normal_unchecked(dom, cfg, x, y)
}

pub(crate) fn green_normal_unchecked(dom: &Domain, cfg: &KernelConfig, x: &[f64], y: &[f64]) -> Result<f64> {
    match *dom {
        Domain::UnitBall { d } if cfg.lambda == 0.0 => {
            let r2 = x.iter().map(|v| v * v).sum::<f64>();
            Ok(poisson_constant(d) * (1.0 - r2) / dist2(x, y).sqrt().powi(d as i32))
        }
        Domain::UnitBall { .. } => config("ball Green kernel normal derivative needs lambda = 0"),
        Domain::HalfLine => Ok((-cfg.lambda.sqrt() * x[0]).exp()),
        _ => green_normal_quadrature(dom, cfg, x, y),
    }
}

/// Laplace quadrature of [`heat_kernel_normal_derivative`].
pub fn green_normal_quadrature(dom: &Domain, cfg: &KernelConfig, x: &[f64], y: &[f64]) -> Result<f64> {
    let r2 = dist2(x, y);
    let nodes = cfg.laplace_nodes(dom, r2)?;
    let mut err = None;
    let v = laplace_transform(&nodes, cfg.lambda, |t| {
        heat_normal_unchecked(dom, cfg.series_terms, t, x, y).unwrap_or_else(|e| {
            err = Some(e);
            0.0
        })
    });
    match err {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// Which Gaussian factor to use in the tangential Fourier transform on the
/// half-space boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FourierForm {
    /// `e^{-((2t)^m/2)|η|²}`, the factor as it appears in the literature.
    Printed,
    /// `e^{-t|η|²}`, the direct transform of the Gaussian. Agrees with
    /// `Printed` when `m = 1`.
    Direct,
}

/// `∫_{R^m} e^{i⟨z,η⟩} ∂G/∂n_y(t, x, (0,z)) dz` with the inward normal:
/// `x₀/(2√π t^{3/2}) e^{-x₀²/4t} e^{i⟨x',η⟩ − c(t)|η|²}`.
pub fn halfspace_fourier_normal_derivative(t: f64, x: &[f64], eta: &[f64], form: FourierForm) -> Result<Complex64> {
    check_time(t)?;
    if !(x[0] > 0.0) {
        return domain(format!("x₀ must be positive, got {}", x[0]));
    }
    let m = x.len() - 1;
    if eta.len() != m {
        return domain(format!("frequency has dimension {}, boundary has {m}", eta.len()));
    }
    let eta2: f64 = eta.iter().map(|v| v * v).sum();
    let phase: f64 = x[1..].iter().zip(eta).map(|(a, b)| a * b).sum();
    let c = match form {
        FourierForm::Printed => (2.0 * t).powi(m as i32) / 2.0,
        FourierForm::Direct => t,
    };
    let modulus = x[0] / (2.0 * PI.sqrt() * t.powf(1.5)) * (-x[0] * x[0] / (4.0 * t) - c * eta2).exp();
    Ok(Complex64::from_polar(modulus, phase))
}

/// Laplace transform in time of [`halfspace_fourier_normal_derivative`].
pub fn halfspace_green_fourier_normal_derivative(
    cfg: &KernelConfig,
    x: &[f64],
    eta: &[f64],
    form: FourierForm,
) -> Result<Complex64> {
    let m = x.len() - 1;
    let dom = Domain::HalfSpace { m };
    dom.require_interior(x)?;
    let nodes = cfg.laplace_nodes(&dom, x[0] * x[0])?;
    let mut acc = Complex64::new(0.0, 0.0);
    // modulus is real-valued in t; phase is constant
    let modulus = laplace_transform(&nodes, cfg.lambda, |t| {
        halfspace_fourier_normal_derivative(t, x, eta, form).map(|z| z.norm()).unwrap_or(0.0)
    });
    let phase: f64 = x[1..].iter().zip(eta).map(|(a, b)| a * b).sum();
    acc += Complex64::from_polar(modulus, phase);
    Ok(acc)
}

/// Probe set for fitting Gaussian bounds.
#[derive(Debug, Clone)]
pub struct BoundProbe {
    pub times: Vec<f64>,
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<Vec<f64>>,
}

impl BoundProbe {
    /// Log-spaced times in `[1e-3, horizon]` with a domain-appropriate point grid.
    pub fn default_for(dom: &Domain, horizon: f64) -> Result<Self> {
        let times: Vec<f64> =
            (0..=16).map(|i| (1e-3f64.ln() + (horizon.ln() - 1e-3f64.ln()) * i as f64 / 16.0).exp()).collect();
        let (xs, ys) = match *dom {
            Domain::Interval { a, b } => {
                let pts: Vec<Vec<f64>> = (0..10).map(|i| vec![a + (b - a) * (0.05 + 0.1 * i as f64)]).collect();
                (pts.clone(), pts)
            }
            Domain::HalfLine => {
                let pts: Vec<Vec<f64>> = [0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0].iter().map(|&v| vec![v]).collect();
                (pts.clone(), pts)
            }
            Domain::HalfSpace { m: 1 } => {
                let mut pts = Vec::new();
                for &x0 in &[0.05, 0.2, 0.5, 1.0] {
                    for &x1 in &[-0.5, 0.0, 0.3, 1.0] {
                        pts.push(vec![x0, x1]);
                    }
                }
                (pts.clone(), pts)
            }
            _ => return config(format!("no default bound probe for {}", dom.tag())),
        };
        Ok(Self { times, xs, ys })
    }
}

/// Outcome of fitting `|∂_t^n ∂_x^α G| ≤ K₁ t^{-(d+|α|+2n)/2} e^{-|x−y|²/(K₂t)}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussianBoundFit {
    pub time_order: u32,
    pub space_order: u32,
    pub k1: f64,
    pub k2: f64,
    /// `(K₂, K₁(K₂))` for every scanned `K₂`.
    pub scan: Vec<(f64, f64)>,
    /// `(t, x, y)` attaining `K₁` at the chosen `K₂`.
    pub worst: (f64, Vec<f64>, Vec<f64>),
}

/// `K₁` values above this are treated as "no bound at this `K₂`".
pub const K1_CAP: f64 = 1e3;

/// Scans `K₂` over `[1, 100]` and returns the smallest `K₂` whose fitted `K₁`
/// stays below [`K1_CAP`], together with that `K₁`.
pub fn check_gaussian_bound(
    dom: &Domain,
    deriv: Derivative,
    horizon: f64,
    probe: &BoundProbe,
) -> Result<GaussianBoundFit> {
    let d = dom.dimension() as f64;
    let expo = (d + deriv.space_order() as f64 + 2.0 * deriv.time_order as f64) / 2.0;
    let mut samples = Vec::new();
    for &t in probe.times.iter().filter(|&&t| t <= horizon) {
        for x in &probe.xs {
            for y in &probe.ys {
                let v = heat_kernel_derivative(dom, deriv, t, x, y)?.abs();
                samples.push((t, dist2(x, y), v, x, y));
            }
        }
    }
    let k2_grid: Vec<f64> = (0..=60).map(|i| 10f64.powf(2.0 * i as f64 / 60.0)).collect();
    let mut scan = Vec::with_capacity(k2_grid.len());
    let mut chosen: Option<(f64, f64, usize)> = None;
    for &k2 in &k2_grid {
        let mut best = 0.0;
        let mut arg = 0;
        for (i, (t, r2, v, _, _)) in samples.iter().enumerate() {
            // log-space ratio avoids overflow of e^{r²/(K₂t)}
            let log_ratio = v.ln() + expo * t.ln() + r2 / (k2 * t);
            let ratio = if *v == 0.0 { 0.0 } else { log_ratio.exp() };
            if ratio > best {
                best = ratio;
                arg = i;
            }
        }
        scan.push((k2, best));
        if chosen.is_none() && best.is_finite() && best <= K1_CAP {
            chosen = Some((k2, best, arg));
        }
    }
    match chosen {
        Some((k2, k1, arg)) => {
            let (t, _, _, x, y) = &samples[arg];
            Ok(GaussianBoundFit {
                time_order: deriv.time_order,
                space_order: deriv.space_order(),
                k1,
                k2,
                scan,
                worst: (*t, x.to_vec(), y.to_vec()),
            })
        }
        None => {
            let (k2, k1) = scan.last().copied().unwrap_or((0.0, f64::INFINITY));
            Err(Error::CheckFailed(format!(
                "Gaussian bound (n={}, |α|={}) on {} violated for every scanned K₂; K₁({k2}) = {k1:e}",
                deriv.time_order,
                deriv.space_order(),
                dom.tag()
            )))
        }
    }
}

/// Smallest `C` with `|∂𝒢/∂n_y(x,y)| ≤ C|x−y|^{1−d}` (d > 1) or
/// `≤ C(1 + log⁺|x−y|^{-1})` (d = 1) over the given pairs.
pub fn check_green_normal_bound(dom: &Domain, cfg: &KernelConfig, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> Result<f64> {
    let d = dom.dimension();
    let mut c: f64 = 0.0;
    for x in xs {
        for y in ys {
            let v = green_normal_derivative(dom, cfg, x, y)?.abs();
            let r = dist2(x, y).sqrt();
            let rhs = if d > 1 { r.powi(1 - d as i32) } else { 1.0 + (1.0 / r).ln().max(0.0) };
            c = c.max(v / rhs);
        }
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{CompositeRule, GaussLegendre};

    const UNIT: Domain = Domain::Interval { a: 0.0, b: 1.0 };

    #[test]
    fn half_line_images_vanish_at_boundary() {
        let g = heat_kernel_unchecked(&Domain::HalfLine, 64, 0.3, &[0.7], &[0.0]).unwrap();
        assert_eq!(g, 0.0);
        let v = heat_kernel(&Domain::HalfLine, 0.3, &[0.7], &[0.2]).unwrap();
        assert!((v - (g1(0.3, 0.5) - g1(0.3, 0.9))).abs() < 1e-16);
    }

    #[test]
    fn gaussian_at_origin() {
        for m in 1..4 {
            let v = gaussian(m + 1, 0.7, 0.0);
            assert!((v - (4.0 * PI * 0.7).powf(-((m + 1) as f64) / 2.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn interval_images_match_eigenseries() {
        let img = interval_heat_images(0.0, 1.0, 64, 0.1, 0.3, 0.7);
        let (eig, bound) = interval_heat_eigen(0.0, 1.0, 64, 0.1, 0.3, 0.7);
        assert!((img - eig).abs() < 1e-10, "{img} vs {eig}");
        assert!(bound < 1e-100);
        // shifted and scaled interval
        let img = interval_heat_images(-1.0, 2.0, 64, 0.6, 0.1, 1.2);
        let (eig, _) = interval_heat_eigen(-1.0, 2.0, 64, 0.6, 0.1, 1.2);
        assert!((img - eig).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(heat_kernel(&UNIT, 0.0, &[0.3], &[0.4]), Err(Error::Domain(_))));
        assert!(matches!(heat_kernel(&UNIT, 0.1, &[1.3], &[0.4]), Err(Error::Domain(_))));
        assert!(matches!(heat_kernel_normal_derivative(&UNIT, 0.1, &[0.3], &[0.4]), Err(Error::Domain(_))));
        assert!(matches!(
            green_kernel(&Domain::HalfLine, &KernelConfig::with_lambda(1.0), &[0.4], &[0.4]),
            Err(Error::Singular(_))
        ));
        assert!(matches!(
            green_kernel(&Domain::HalfLine, &KernelConfig::default(), &[0.4], &[0.3]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn halfspace_normal_derivative_closed_form() {
        let h = Domain::HalfSpace { m: 1 };
        let v = heat_kernel_normal_derivative(&h, 1.0, &[1.0, 0.0], &[0.0, 0.0]).unwrap();
        let expected = (4.0 * PI).recip() * (-0.25f64).exp();
        assert!((v - expected).abs() < 1e-15);
        let printed = halfspace_normal_derivative_outward(1, 1.0, &[1.0, 0.0], &[0.0, 0.0]);
        assert!((printed + expected).abs() < 1e-15);
        // near the boundary at small t the outward derivative is negative
        assert!(halfspace_normal_derivative_outward(1, 1e-3, &[0.01, 0.0], &[0.0, 0.0]) < 0.0);
    }

    #[test]
    fn halfspace_normal_derivative_matches_finite_difference() {
        let h = Domain::HalfSpace { m: 1 };
        let (t, x) = (0.2, [0.4, 0.1]);
        let y = [0.0, -0.3];
        let e = 1e-5;
        // G vanishes on the boundary, so a one-sided difference quotient uses G(y + e n) / e
        let g = |y0: f64| heat_kernel_unchecked(&h, 64, t, &x, &[y0, y[1]]).unwrap();
        let fd = (-g(2.0 * e) + 4.0 * g(e) - 3.0 * g(0.0)) / (2.0 * e);
        let v = heat_kernel_normal_derivative(&h, t, &x, &y).unwrap();
        assert!((fd - v).abs() < 1e-6 * v.abs(), "{fd} vs {v}");
    }

    #[test]
    fn interval_normal_derivative_fd_and_series() {
        for &t in &[0.02, 0.1, 0.5] {
            let x = 0.3;
            let h = 1e-6;
            let g = |y: f64| heat_kernel_unchecked(&UNIT, 64, t, &[x], &[y]).unwrap();
            let fd = (g(h) - g(-h).min(0.0) * 0.0 - g(0.0)) / h; // one-sided, G(0)=0
            let fd2 = (4.0 * g(h) - g(2.0 * h) - 3.0 * g(0.0)) / (2.0 * h);
            let v = heat_kernel_normal_derivative(&UNIT, t, &[x], &[0.0]).unwrap();
            assert!((fd2 - v).abs() < 1e-6 * v.abs(), "t={t}: {fd2} vs {v} ({fd})");
            if t >= 0.05 {
                let eig = 2.0
                    * PI
                    * (1..=64)
                        .map(|k| {
                            let k = k as f64;
                            k * (k * PI * x).sin() * (-k * k * PI * PI * t).exp()
                        })
                        .sum::<f64>();
                assert!((eig - v).abs() < 1e-12 * v.abs());
            }
            // symmetric end
            let w = heat_kernel_normal_derivative(&UNIT, t, &[1.0 - x], &[1.0]).unwrap();
            assert!((w - v).abs() < 1e-14 * v.abs().max(1.0));
        }
    }

    #[test]
    fn half_line_green_closed_form_matches_quadrature() {
        let cfg = KernelConfig::with_lambda(1.0);
        let closed = green_kernel(&Domain::HalfLine, &cfg, &[1.0], &[2.0]).unwrap();
        let expected = 0.5 * ((-1.0f64).exp() - (-3.0f64).exp());
        assert!((closed - expected).abs() < 1e-15);
        let quad = green_kernel_quadrature(&Domain::HalfLine, &cfg, &[1.0], &[2.0]).unwrap();
        assert!((quad - closed).abs() < 1e-8, "{quad} vs {closed}");
        for &x in &[0.1, 1.0, 5.0] {
            assert_eq!(green_kernel(&Domain::HalfLine, &cfg, &[x], &[0.0]).unwrap(), 0.0);
        }
    }

    #[test]
    fn interval_green_matches_closed_form() {
        // λ = 0: 𝒢(x,y) = min(x,y)(1 − max(x,y))
        let cfg = KernelConfig::default();
        for &(x, y) in &[(0.2, 0.7), (0.5, 0.45), (0.9, 0.1)] {
            let v = green_kernel(&UNIT, &cfg, &[x], &[y]).unwrap();
            let exact = f64::min(x, y) * (1.0 - f64::max(x, y));
            assert!((v - exact).abs() < 1e-8, "{v} vs {exact}");
        }
    }

    #[test]
    fn green_symmetry_random_pairs() {
        let cfg = KernelConfig::with_lambda(0.7);
        let mut s = 0.123f64;
        let mut next = || {
            s = (s * 9301.0 + 0.4929).fract();
            s
        };
        for _ in 0..20 {
            let (x, y) = (0.05 + 0.9 * next(), 0.05 + 0.9 * next());
            let a = green_kernel(&UNIT, &cfg, &[x], &[y]).unwrap();
            let b = green_kernel(&UNIT, &cfg, &[y], &[x]).unwrap();
            assert!((a - b).abs() < 1e-9);
            let (x2, y2) = (3.0 * next(), 3.0 * next());
            let a = green_kernel(&Domain::HalfLine, &cfg, &[x2], &[y2]).unwrap();
            let b = green_kernel(&Domain::HalfLine, &cfg, &[y2], &[x2]).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn disk_green_closed_form_properties() {
        let ball = Domain::UnitBall { d: 2 };
        let cfg = KernelConfig::default();
        let a = green_kernel(&ball, &cfg, &[0.3, 0.1], &[-0.2, 0.5]).unwrap();
        let b = green_kernel(&ball, &cfg, &[-0.2, 0.5], &[0.3, 0.1]).unwrap();
        assert!((a - b).abs() < 1e-14);
        // Laplace-transform of the Bessel series agrees away from the diagonal
        // (the small-time part is negligible because the points are far apart)
        let x = [0.3, 0.1];
        let y = [-0.5, -0.4];
        let series = {
            let rule = CompositeRule::graded_to_zero(30.0, 40, 16);
            rule.integrate(|t| {
                if t < DISK_MIN_TIME {
                    gaussian(2, t, dist2(&x, &y))
                } else {
                    disk_heat(t, &x, Some(&y)).unwrap()
                }
            })
        };
        let closed = green_kernel(&ball, &cfg, &x, &y).unwrap();
        assert!((series - closed).abs() < 1e-4, "{series} vs {closed}");
    }

    #[test]
    fn half_line_green_normal_derivative() {
        let cfg = KernelConfig::with_lambda(1.0);
        for &x in &[0.01, 0.5, 2.0] {
            let v = green_normal_derivative(&Domain::HalfLine, &cfg, &[x], &[0.0]).unwrap();
            assert!((v - (-x).exp()).abs() < 1e-15);
            let q = green_normal_quadrature(&Domain::HalfLine, &cfg, &[x], &[0.0]).unwrap();
            assert!((q - v).abs() < 1e-8, "x={x}: {q} vs {v}");
        }
    }

    #[test]
    fn disk_poisson_kernel_integrates_to_one() {
        let ball = Domain::UnitBall { d: 2 };
        let cfg = KernelConfig::default();
        let q = ball.boundary_quadrature(2048, None).unwrap();
        for x in [[0.0, 0.0], [0.5, 0.2], [-0.7, 0.6]] {
            let s = q.integrate(|y| green_normal_derivative(&ball, &cfg, &x, y).unwrap());
            assert!((s - 1.0).abs() < 1e-10, "{s}");
        }
        let centre = green_normal_derivative(&ball, &cfg, &[0.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((centre - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!((poisson_constant(3) - 1.0 / (4.0 * PI)).abs() < 1e-12);
        assert!((poisson_constant(5) - 3.0 / (8.0 * PI * PI)).abs() < 1e-12);
    }

    #[test]
    fn disk_heat_normal_derivative_matches_poisson_kernel() {
        // ∫_0^∞ ∂G/∂n dt is the Poisson kernel; compare via the series for t ≥ t0 plus
        // the small-time contribution, which is negligible for a deep interior point.
        let x = [0.1, 0.05];
        let y = [0.0, 1.0];
        let rule = CompositeRule::graded_to_zero(20.0, 30, 16);
        let tail = rule.integrate(|t| if t < DISK_MIN_TIME { 0.0 } else { disk_heat_normal(t, &x, &y).unwrap() });
        let pk = green_normal_derivative(&Domain::UnitBall { d: 2 }, &KernelConfig::default(), &x, &y).unwrap();
        assert!((tail - pk).abs() < 1e-6, "{tail} vs {pk}");
    }

    #[test]
    fn disk_heat_symmetry_and_mass() {
        let ball = Domain::UnitBall { d: 2 };
        let a = heat_kernel(&ball, 0.05, &[0.2, 0.3], &[-0.4, 0.1]).unwrap();
        let b = heat_kernel(&ball, 0.05, &[-0.4, 0.1], &[0.2, 0.3]).unwrap();
        assert!((a - b).abs() < 1e-12 * a.abs());
        assert!(matches!(heat_kernel(&ball, 1e-4, &[0.2, 0.3], &[0.1, 0.1]), Err(Error::Domain(_))));
        let q = ball.interior_quadrature(24).unwrap();
        let mass = q.integrate(|y| heat_kernel_unchecked(&ball, 64, 0.1, &[0.3, 0.0], y).unwrap());
        assert!(mass > 0.0 && mass <= 1.0 + 1e-8, "{mass}");
    }

    #[test]
    fn fourier_forms() {
        let x = [0.4, 0.3];
        let z0 = halfspace_fourier_normal_derivative(0.2, &x, &[0.0], FourierForm::Printed).unwrap();
        let expected = 0.4 / (2.0 * PI.sqrt() * 0.2f64.powf(1.5)) * (-0.16f64 / 0.8).exp();
        assert!((z0.norm() - expected).abs() < 1e-14);
        for &eta in &[0.5, 2.0] {
            let p = halfspace_fourier_normal_derivative(0.2, &x, &[eta], FourierForm::Printed).unwrap();
            let q = halfspace_fourier_normal_derivative(0.2, &x, &[-eta], FourierForm::Printed).unwrap();
            assert!((p.norm() - q.norm()).abs() < 1e-15);
            let d = halfspace_fourier_normal_derivative(0.2, &x, &[eta], FourierForm::Direct).unwrap();
            assert!((p - d).norm() < 1e-15, "m = 1 forms coincide");
        }
        let x3 = [0.4, 0.3, -0.2];
        let p = halfspace_fourier_normal_derivative(0.2, &x3, &[1.0, 0.5], FourierForm::Printed).unwrap();
        let d = halfspace_fourier_normal_derivative(0.2, &x3, &[1.0, 0.5], FourierForm::Direct).unwrap();
        assert!((p.norm() - d.norm()).abs() > 1e-3, "m = 2 forms differ");
    }

    #[test]
    fn fourier_matches_quadrature_oracle() {
        // transform of (x₀/t)Γ(t, x − (0,z)) over z ∈ R by Gauss–Legendre
        let (t, x) = (0.3, [0.5, 0.2]);
        let rule = CompositeRule::uniform(-15.0, 15.0, 60, 16);
        for &eta in &[0.0, 0.7, 2.5] {
            let re = rule.integrate(|z| (eta * z).cos() * x[0] / t * gaussian(2, t, x[0] * x[0] + (x[1] - z).powi(2)));
            let im = rule.integrate(|z| (eta * z).sin() * x[0] / t * gaussian(2, t, x[0] * x[0] + (x[1] - z).powi(2)));
            let f = halfspace_fourier_normal_derivative(t, &x, &[eta], FourierForm::Direct).unwrap();
            assert!((f.re - re).abs() < 1e-10 && (f.im - im).abs() < 1e-10, "{f} vs {re}+{im}i");
        }
    }

    #[test]
    fn green_fourier_is_first_passage_transform() {
        let cfg = KernelConfig::with_lambda(1.0);
        let x = [0.3, 0.4];
        for &eta in &[0.0, 1.0, 3.0] {
            let f = halfspace_green_fourier_normal_derivative(&cfg, &x, &[eta], FourierForm::Printed).unwrap();
            let exact = (-x[0] * (1.0f64 + eta * eta).sqrt()).exp();
            assert!((f.norm() - exact).abs() < 1e-8, "{} vs {exact}", f.norm());
        }
    }

    #[test]
    fn chapman_kolmogorov_on_interval() {
        let gl = GaussLegendre::new(200);
        let (t, s, x, y) = (0.03, 0.05, 0.2, 0.65);
        let lhs = gl.integrate(0.0, 1.0, |z| {
            heat_kernel_unchecked(&UNIT, 64, t, &[x], &[z]).unwrap()
                * heat_kernel_unchecked(&UNIT, 64, s, &[z], &[y]).unwrap()
        });
        let rhs = heat_kernel(&UNIT, t + s, &[x], &[y]).unwrap();
        assert!((lhs - rhs).abs() < 1e-6);
    }

    #[test]
    fn gaussian_bound_half_line() {
        let probe = BoundProbe::default_for(&Domain::HalfLine, 1.0).unwrap();
        let fit = check_gaussian_bound(&Domain::HalfLine, Derivative::NONE, 1.0, &probe).unwrap();
        assert!(fit.k1.is_finite());
        // G ≤ Γ₁ gives K₁ ≤ (4π)^{-1/2} as soon as K₂ ≥ 4
        let at4 = fit.scan.iter().find(|(k2, _)| *k2 >= 4.0).unwrap();
        assert!(at4.1 <= (4.0 * PI).powf(-0.5) * (1.0 + 1e-12), "{at4:?}");
    }

    #[test]
    fn gaussian_bounds_exist_for_derivatives() {
        for dom in [UNIT, Domain::HalfLine, Domain::HalfSpace { m: 1 }] {
            let probe = BoundProbe::default_for(&dom, 1.0).unwrap();
            for deriv in [
                Derivative::NONE,
                Derivative { time_order: 0, space_axis: Some(0) },
                Derivative { time_order: 1, space_axis: None },
            ] {
                let fit = check_gaussian_bound(&dom, deriv, 1.0, &probe).unwrap();
                assert!(fit.k1 <= K1_CAP && fit.k2 > 1.0, "{} {deriv:?}: {fit:?}", dom.tag());
            }
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let h = 1e-6;
        for dom in [UNIT, Domain::HalfLine] {
            let (t, x, y) = (0.04, 0.3, 0.45);
            let g = |t: f64, x: f64| heat_kernel_unchecked(&dom, 64, t, &[x], &[y]).unwrap();
            let dt =
                heat_kernel_derivative(&dom, Derivative { time_order: 1, space_axis: None }, t, &[x], &[y]).unwrap();
            let dx =
                heat_kernel_derivative(&dom, Derivative { time_order: 0, space_axis: Some(0) }, t, &[x], &[y]).unwrap();
            assert!(((g(t + h, x) - g(t - h, x)) / (2.0 * h) - dt).abs() < 1e-5 * dt.abs().max(1.0));
            assert!(((g(t, x + h) - g(t, x - h)) / (2.0 * h) - dx).abs() < 1e-5 * dx.abs().max(1.0));
        }
        let hs = Domain::HalfSpace { m: 1 };
        let (t, x, y) = (0.1, [0.3, 0.2], [0.5, -0.1]);
        for axis in 0..2 {
            let d =
                heat_kernel_derivative(&hs, Derivative { time_order: 0, space_axis: Some(axis) }, t, &x, &y).unwrap();
            let mut xp = x;
            let mut xm = x;
            xp[axis] += h;
            xm[axis] -= h;
            let fd = (heat_kernel_unchecked(&hs, 64, t, &xp, &y).unwrap()
                - heat_kernel_unchecked(&hs, 64, t, &xm, &y).unwrap())
                / (2.0 * h);
            assert!((fd - d).abs() < 1e-6, "axis {axis}");
        }
        let dt = heat_kernel_derivative(&hs, Derivative { time_order: 1, space_axis: None }, t, &x, &y).unwrap();
        let fd = (heat_kernel_unchecked(&hs, 64, t + h, &x, &y).unwrap()
            - heat_kernel_unchecked(&hs, 64, t - h, &x, &y).unwrap())
            / (2.0 * h);
        assert!((fd - dt).abs() < 1e-6);
    }

    #[test]
    fn green_normal_bound_is_finite() {
        let ball = Domain::UnitBall { d: 2 };
        let xs: Vec<Vec<f64>> = [0.5, 0.9, 0.99, 0.999].iter().map(|&r| vec![r, 0.0]).collect();
        let q = ball.boundary_quadrature(64, None).unwrap();
        let c = check_green_normal_bound(&ball, &KernelConfig::default(), &xs, &q.nodes).unwrap();
        assert!(c.is_finite() && c <= 1.0 / PI + 1e-12, "{c}");
        let xs: Vec<Vec<f64>> = [0.001, 0.01, 0.1, 0.5].iter().map(|&r| vec![r]).collect();
        let c = check_green_normal_bound(&UNIT, &KernelConfig::default(), &xs, &[vec![0.0], vec![1.0]]).unwrap();
        assert!(c.is_finite() && c <= 1.0 + 1e-6, "{c}");
    }
}
