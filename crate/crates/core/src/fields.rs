//! Pointwise solution fields driven by boundary noise, their exact second
//! moments, and the pathwise Young bound for fractional noise.
//!
//! Every Gaussian family is reduced to a pairing vector `c(x)` with
//! `u(x) = Σ_k c_k(x) ξ_k`, where `ξ_k` are the noise coordinates. The vectors
//! are computed once per probe point and then reused across samples.

use serde::Serialize;
use std::f64::consts::PI;

use crate::domains::{dist2, Domain, TimeGrid};
use crate::error::{config, domain, usage, Result};
use crate::kernels::{
    green_normal_unchecked, halfspace_fourier_normal_derivative, halfspace_green_fourier_normal_derivative,
    heat_kernel_unchecked, heat_normal_unchecked, FourierForm, KernelConfig,
};
use crate::noise::{BoundaryBasis, BoundaryNoiseSpec, NoiseRealization, SpectralMode};
use crate::quadrature::CompositeRule;

/// Fourier factor used for homogeneous noise on the half-space boundary.
/// Both forms agree for a one-dimensional boundary.
pub const FIELD_FOURIER_FORM: FourierForm = FourierForm::Printed;

/// Which kernel the boundary pairing uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lag {
    /// `∂𝒢/∂n_y(x, ·)`.
    Elliptic,
    /// `∂G/∂n_y(τ, x, ·)`.
    Heat(f64),
}

const SUPPORTED: &str = "supported (domain, noise) pairs: white/cylindrical-fbm with nodal basis on every domain, \
with Fourier basis on ball2; signed-series and poisson on every domain; homogeneous on halfspace{m}";

fn kernel(dom: &Domain, cfg: &KernelConfig, lag: Lag, x: &[f64], y: &[f64]) -> Result<f64> {
    match lag {
        Lag::Elliptic => green_normal_unchecked(dom, cfg, x, y),
        Lag::Heat(t) => {
            if !(t > 0.0) {
                return domain(format!("heat pairing needs a positive time lag, got {t}"));
            }
            heat_normal_unchecked(dom, cfg.series_terms, t, x, y)
        }
    }
}

fn fourier_at(cfg: &KernelConfig, lag: Lag, x: &[f64], eta: &[f64]) -> Result<num_complex::Complex64> {
    match lag {
        Lag::Elliptic => halfspace_green_fourier_normal_derivative(cfg, x, eta, FIELD_FOURIER_FORM),
        Lag::Heat(t) => halfspace_fourier_normal_derivative(t, x, eta, FIELD_FOURIER_FORM),
    }
}

/// Pairing vector `c(x)` of a Gaussian family: `u = Σ_k c_k ξ_k`.
pub fn pairings(dom: &Domain, cfg: &KernelConfig, spec: &BoundaryNoiseSpec, lag: Lag, x: &[f64]) -> Result<Vec<f64>> {
    dom.require_interior(x)?;
    match spec {
        BoundaryNoiseSpec::WhiteNoise { nu, basis, order }
        | BoundaryNoiseSpec::CylFractionalWiener { nu, basis, order, .. } => {
            let mut k = Vec::with_capacity(nu.len());
            for y in &nu.nodes {
                k.push(kernel(dom, cfg, lag, x, y)?);
            }
            match basis {
                BoundaryBasis::Nodal => Ok(k.iter().zip(&nu.weights).map(|(v, w)| w.sqrt() * v).collect()),
                BoundaryBasis::Fourier => {
                    if *dom != (Domain::UnitBall { d: 2 }) {
                        return config(format!("Fourier basis on {}; {SUPPORTED}", dom.tag()));
                    }
                    let mut c = vec![0.0; *order];
                    let harmonics = (*order - 1) / 2 + 1;
                    for ((y, w), kv) in nu.nodes.iter().zip(&nu.weights).zip(&k) {
                        let a = w * kv;
                        c[0] += a / (2.0 * PI).sqrt();
                        let (c1, s1) = (y[0], y[1]);
                        let (mut cn, mut sn) = (1.0, 0.0);
                        for n in 1..harmonics {
                            let t = cn * c1 - sn * s1;
                            sn = sn * c1 + cn * s1;
                            cn = t;
                            let i = 2 * n - 1;
                            if i < *order {
                                c[i] += a * cn / PI.sqrt();
                            }
                            if i + 1 < *order {
                                c[i + 1] += a * sn / PI.sqrt();
                            }
                        }
                    }
                    Ok(c)
                }
            }
        }
        BoundaryNoiseSpec::SignedMeasureSeries { measures, .. } => {
            let mut c = Vec::with_capacity(measures.len());
            for m in measures {
                let mut s = 0.0;
                for a in &m.atoms {
                    s += a.mass * kernel(dom, cfg, lag, x, &a.point)?;
                }
                c.push(s);
            }
            Ok(c)
        }
        BoundaryNoiseSpec::HomogeneousWiener { atoms, modes } => {
            let Domain::HalfSpace { m } = *dom else {
                return config(format!("homogeneous noise on {}; {SUPPORTED}", dom.tag()));
            };
            let mut c = vec![0.0; atoms.len()];
            for mode in modes {
                match *mode {
                    SpectralMode::Constant { atom } => {
                        let a = &atoms[atom];
                        check_freq(m, &a.frequency)?;
                        c[atom] = a.weight.sqrt() * fourier_at(cfg, lag, x, &a.frequency)?.re;
                    }
                    SpectralMode::Pair { cos_atom, sin_atom } => {
                        let a = &atoms[cos_atom];
                        check_freq(m, &a.frequency)?;
                        let f = fourier_at(cfg, lag, x, &a.frequency)?;
                        let s = (2.0 * a.weight).sqrt();
                        c[cos_atom] = s * f.re;
                        c[sin_atom] = s * f.im;
                    }
                }
            }
            Ok(c)
        }
        BoundaryNoiseSpec::PoissonMeasure { .. } => usage("Poisson noise has no Gaussian pairing vector"),
    }
}

fn check_freq(m: usize, eta: &[f64]) -> Result<()> {
    if eta.len() == m {
        Ok(())
    } else {
        config(format!("spectral atom of dimension {} on a boundary of dimension {m}", eta.len()))
    }
}

fn check_coefficients(spec: &BoundaryNoiseSpec, r: &NoiseRealization) -> Result<()> {
    if r.coefficients.len() != spec.mode_count() {
        return usage(format!(
            "realization has {} coefficients, {} noise expects {}",
            r.coefficients.len(),
            spec.family_name(),
            spec.mode_count()
        ));
    }
    Ok(())
}

fn dot(c: &[f64], v: &[f64]) -> f64 {
    c.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// `u_γ(x) = (γ, ∂𝒢/∂n_y(x, ·))` for one realization of `γ`.
pub fn elliptic_field(
    dom: &Domain,
    cfg: &KernelConfig,
    spec: &BoundaryNoiseSpec,
    realization: &NoiseRealization,
    x: &[f64],
) -> Result<f64> {
    cfg.validate(dom)?;
    field_at(dom, cfg, spec, realization, Lag::Elliptic, x)
}

/// `v_γ(t, x) = (γ, ∂G/∂n_y(t, x, ·))` for a fixed snapshot of `γ`.
pub fn parabolic_field_v(
    dom: &Domain,
    cfg: &KernelConfig,
    spec: &BoundaryNoiseSpec,
    snapshot: &NoiseRealization,
    t: f64,
    x: &[f64],
) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("v(t, x) needs t > 0, got {t}"));
    }
    field_at(dom, cfg, spec, snapshot, Lag::Heat(t), x)
}

fn field_at(
    dom: &Domain,
    cfg: &KernelConfig,
    spec: &BoundaryNoiseSpec,
    realization: &NoiseRealization,
    lag: Lag,
    x: &[f64],
) -> Result<f64> {
    dom.require_interior(x)?;
    if let BoundaryNoiseSpec::PoissonMeasure { .. } = spec {
        let mut s = 0.0;
        for p in &realization.points {
            s += kernel(dom, cfg, lag, x, &p.location)? * p.mark;
        }
        return Ok(s);
    }
    check_coefficients(spec, realization)?;
    Ok(dot(&pairings(dom, cfg, spec, lag, x)?, &realization.coefficients))
}

/// Precomputed elliptic pairings for a set of probe points.
#[derive(Debug, Clone)]
pub struct EllipticPlan {
    pub probes: Vec<Vec<f64>>,
    coeffs: Vec<Vec<f64>>,
}

impl EllipticPlan {
    pub fn new(dom: &Domain, cfg: &KernelConfig, spec: &BoundaryNoiseSpec, probes: &[Vec<f64>]) -> Result<Self> {
        cfg.validate(dom)?;
        let coeffs = probes.iter().map(|x| pairings(dom, cfg, spec, Lag::Elliptic, x)).collect::<Result<_>>()?;
        Ok(Self { probes: probes.to_vec(), coeffs })
    }

    /// Field values at every probe for one coefficient draw.
    pub fn evaluate(&self, realization: &NoiseRealization) -> Vec<f64> {
        self.coeffs.iter().map(|c| dot(c, &realization.coefficients)).collect()
    }

    /// `Σ_k c_k²`: the exact variance of the truncated field.
    pub fn truncated_variance(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.iter().map(|v| v * v).sum()).collect()
    }

    pub fn coefficients(&self, probe: usize) -> &[f64] {
        &self.coeffs[probe]
    }
}

/// Quadrature point inside each time cell for the stochastic convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConvolutionRule {
    /// Integrand at the left end of each cell (Itô sums, `H = 1/2`).
    ItoLeftPoint,
    /// Integrand at the cell midpoint (Riemann–Stieltjes sums, `H > 1/2`).
    YoungMidpoint,
}

impl ConvolutionRule {
    pub fn for_hurst(h: f64) -> Result<Self> {
        if h == 0.5 {
            Ok(Self::ItoLeftPoint)
        } else if h > 0.5 && h < 1.0 {
            Ok(Self::YoungMidpoint)
        } else {
            usage(format!("stochastic convolution supports H = 1/2 and H in (1/2, 1), got {h}"))
        }
    }
}

/// Tail fractions above this trigger refinement of the time grid.
pub const TAIL_TOLERANCE: f64 = 1e-3;
const MAX_REFINEMENTS: usize = 4;

/// Cached boundary pairings `c_{j,k}(x)` at the time lags `t − s_j` of a grid.
#[derive(Debug, Clone)]
pub struct ConvolutionPlan {
    dom: Domain,
    cfg: KernelConfig,
    grid: TimeGrid,
    rule: ConvolutionRule,
    probes: Vec<Vec<f64>>,
    modes: usize,
    /// per probe: `cells × modes`, row-major
    cache: Vec<Vec<f64>>,
    /// per probe: `∫_0^{Δ_last} Σ_k c_k(τ)² dτ` over the discrete total
    tail_fraction: Vec<Option<f64>>,
    refinements: usize,
}

fn refine(grid: &TimeGrid) -> Result<TimeGrid> {
    let mut nodes = Vec::with_capacity(2 * grid.len());
    for (a, b) in grid.cells() {
        nodes.push(0.5 * (a + b));
        nodes.push(b);
    }
    TimeGrid::from_nodes(nodes)
}

impl ConvolutionPlan {
    /// Builds the cache on `grid` (horizon `t = grid.horizon()`), refining the
    /// grid while the last cell carries more than [`TAIL_TOLERANCE`] of the
    /// second moment at some probe.
    pub fn new(
        dom: &Domain,
        cfg: &KernelConfig,
        spec: &BoundaryNoiseSpec,
        grid: &TimeGrid,
        rule: ConvolutionRule,
        probes: &[Vec<f64>],
    ) -> Result<Self> {
        for x in probes {
            dom.require_interior(x)?;
        }
        let mut grid = grid.clone();
        let mut refinements = 0;
        loop {
            let plan = Self::build(dom, cfg, spec, &grid, rule, probes, refinements)?;
            let worst = plan.tail_fraction.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
            if worst <= TAIL_TOLERANCE || refinements >= MAX_REFINEMENTS || !spec.is_gaussian() {
                return Ok(plan);
            }
            grid = refine(&grid)?;
            refinements += 1;
        }
    }

    fn build(
        dom: &Domain,
        cfg: &KernelConfig,
        spec: &BoundaryNoiseSpec,
        grid: &TimeGrid,
        rule: ConvolutionRule,
        probes: &[Vec<f64>],
        refinements: usize,
    ) -> Result<Self> {
        let t = grid.horizon();
        let cells: Vec<(f64, f64)> = grid.cells().collect();
        let modes = spec.mode_count();
        let mut cache = Vec::with_capacity(probes.len());
        let mut tail_fraction = Vec::with_capacity(probes.len());
        for x in probes {
            if !spec.is_gaussian() {
                cache.push(Vec::new());
                tail_fraction.push(None);
                continue;
            }
            let mut c = Vec::with_capacity(cells.len() * modes);
            let mut total = 0.0;
            for &(a, b) in &cells {
                let s = match rule {
                    ConvolutionRule::ItoLeftPoint => a,
                    ConvolutionRule::YoungMidpoint => 0.5 * (a + b),
                };
                let row = pairings(dom, cfg, spec, Lag::Heat(t - s), x)?;
                total += (b - a) * row.iter().map(|v| v * v).sum::<f64>();
                c.extend(row);
            }
            let (a, _) = *cells.last().expect("nonempty grid");
            let last = t - a;
            let tail = if matches!(dom, Domain::UnitBall { .. }) {
                None
            } else {
                let rule = CompositeRule::graded_to_zero(last, 24, 8);
                let mut acc = 0.0;
                for (&tau, &w) in rule.nodes.iter().zip(&rule.weights) {
                    let row = pairings(dom, cfg, spec, Lag::Heat(tau), x)?;
                    acc += w * row.iter().map(|v| v * v).sum::<f64>();
                }
                Some(if total > 0.0 { acc / total } else { 0.0 })
            };
            cache.push(c);
            tail_fraction.push(tail);
        }
        Ok(Self {
            dom: *dom,
            cfg: *cfg,
            grid: grid.clone(),
            rule,
            probes: probes.to_vec(),
            modes,
            cache,
            tail_fraction,
            refinements,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn rule(&self) -> ConvolutionRule {
        self.rule
    }

    pub fn probes(&self) -> &[Vec<f64>] {
        &self.probes
    }

    pub fn horizon(&self) -> f64 {
        self.grid.horizon()
    }

    pub fn refinements(&self) -> usize {
        self.refinements
    }

    pub fn tail_fraction(&self) -> &[Option<f64>] {
        &self.tail_fraction
    }

    /// `c_{j,k}` for probe `p`: row `j` is the cell, column `k` the mode.
    pub fn kernel_row(&self, p: usize, cell: usize) -> &[f64] {
        &self.cache[p][cell * self.modes..(cell + 1) * self.modes]
    }

    /// `Σ_j Δ_j Σ_k c_{j,k}²`: the exact second moment of the discrete
    /// Itô sum with standard Brownian coordinates.
    pub fn discrete_variance(&self) -> Vec<f64> {
        let widths: Vec<f64> = self.grid.cells().map(|(a, b)| b - a).collect();
        (0..self.probes.len())
            .map(|p| {
                widths
                    .iter()
                    .enumerate()
                    .map(|(j, w)| w * self.kernel_row(p, j).iter().map(|v| v * v).sum::<f64>())
                    .sum()
            })
            .collect()
    }

    /// `∫_O G(t, x, y) u₀(y) dy` at every probe.
    pub fn initial_term(&self, u0: &dyn Fn(&[f64]) -> f64) -> Result<Vec<f64>> {
        let q = self.dom.interior_quadrature(200)?;
        let t = self.horizon();
        let vals: Vec<f64> = q.nodes.iter().map(|y| u0(y)).collect();
        self.probes
            .iter()
            .map(|x| {
                let mut s = 0.0;
                for ((y, w), v) in q.nodes.iter().zip(&q.weights).zip(&vals) {
                    if *v != 0.0 && self.dom.contains(y) && dist2(x, y) > 0.0 {
                        s += w * v * heat_kernel_unchecked(&self.dom, self.cfg.series_terms, t, x, y)?;
                    }
                }
                Ok(s)
            })
            .collect()
    }
}

/// `u(t, x) = Σ_j (Δξ_j, ∂G/∂n_y(t − s_j, x, ·))` at every probe of the plan,
/// plus the initial-condition term when `u0` is given.
pub fn mild_solution(
    plan: &ConvolutionPlan,
    spec: &BoundaryNoiseSpec,
    xi: &NoiseRealization,
    u0: Option<&dyn Fn(&[f64]) -> f64>,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; plan.probes.len()];
    if let BoundaryNoiseSpec::PoissonMeasure { .. } = spec {
        let t = plan.horizon();
        for (p, x) in plan.probes.iter().enumerate() {
            for pt in &xi.points {
                if pt.time < t {
                    out[p] += heat_normal_unchecked(&plan.dom, plan.cfg.series_terms, t - pt.time, x, &pt.location)?
                        * pt.mark;
                }
            }
        }
    } else {
        let expected = ConvolutionRule::for_hurst(spec.hurst())?;
        if expected != plan.rule {
            return usage(format!("convolution rule {:?} does not match H = {}", plan.rule, spec.hurst()));
        }
        let paths = xi.paths.as_ref().ok_or_else(|| crate::Error::Usage("realization has no time paths".into()))?;
        if paths.rows != plan.modes || paths.grid.len() != plan.grid.len() {
            return usage(format!(
                "paths are {}×{}, plan expects {}×{}",
                paths.rows,
                paths.grid.len(),
                plan.modes,
                plan.grid.len()
            ));
        }
        let n = plan.grid.len();
        let mut incr = vec![0.0; plan.modes * n];
        for k in 0..plan.modes {
            let row = paths.row(k);
            let mut prev = 0.0;
            for j in 0..n {
                incr[j * plan.modes + k] = row[j] - prev;
                prev = row[j];
            }
        }
        for (p, o) in out.iter_mut().enumerate() {
            *o = dot(&plan.cache[p], &incr);
        }
    }
    if let Some(f) = u0 {
        for (o, v) in out.iter_mut().zip(plan.initial_term(f)?) {
            *o += v;
        }
    }
    Ok(out)
}

/// Exact `E u²(x)` for Gaussian boundary noise, from the family's
/// second-moment formula (the pairing integral against `ν`, the series of
/// squared pairings, or the spectral integral).
pub fn analytic_variance_elliptic(
    dom: &Domain,
    cfg: &KernelConfig,
    spec: &BoundaryNoiseSpec,
    x: &[f64],
) -> Result<f64> {
    cfg.validate(dom)?;
    dom.require_interior(x)?;
    match spec {
        BoundaryNoiseSpec::WhiteNoise { nu, .. } | BoundaryNoiseSpec::CylFractionalWiener { nu, .. } => {
            let mut s = 0.0;
            for (y, w) in nu.nodes.iter().zip(&nu.weights) {
                s += w * green_normal_unchecked(dom, cfg, x, y)?.powi(2);
            }
            Ok(s)
        }
        BoundaryNoiseSpec::SignedMeasureSeries { .. } => {
            Ok(pairings(dom, cfg, spec, Lag::Elliptic, x)?.iter().map(|v| v * v).sum())
        }
        BoundaryNoiseSpec::HomogeneousWiener { atoms, .. } => {
            let Domain::HalfSpace { .. } = dom else {
                return config(format!("homogeneous noise on {}; {SUPPORTED}", dom.tag()));
            };
            let mut s = 0.0;
            for a in atoms {
                s += a.weight * fourier_at(cfg, Lag::Elliptic, x, &a.frequency)?.norm_sqr();
            }
            Ok(s)
        }
        BoundaryNoiseSpec::PoissonMeasure { .. } => {
            usage("Poisson noise has no Gaussian variance formula; use levy_moment_bound or levy_second_moment")
        }
    }
}

/// Time rule on `(0, t]` graded toward `s = 0`, where the heat pairing is singular.
pub fn time_rule(t: f64) -> CompositeRule {
    CompositeRule::graded_to_zero(t, 60, 16)
}

/// Exact `E|u(t,x)|²` for `H = 1/2` Gaussian noise with `u₀ = 0`.
pub fn analytic_variance_parabolic(
    dom: &Domain,
    cfg: &KernelConfig,
    spec: &BoundaryNoiseSpec,
    t: f64,
    x: &[f64],
) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("parabolic variance needs t > 0, got {t}"));
    }
    dom.require_interior(x)?;
    if spec.hurst() != 0.5 {
        return usage(format!("exact parabolic variance is an Itô-isometry formula; H = {}", spec.hurst()));
    }
    let rule = time_rule(t);
    match spec {
        BoundaryNoiseSpec::WhiteNoise { nu, .. } | BoundaryNoiseSpec::CylFractionalWiener { nu, .. } => {
            let mut s = 0.0;
            for (&tau, &wt) in rule.nodes.iter().zip(&rule.weights) {
                let mut inner = 0.0;
                for (y, w) in nu.nodes.iter().zip(&nu.weights) {
                    inner += w * heat_normal_unchecked(dom, cfg.series_terms, tau, x, y)?.powi(2);
                }
                s += wt * inner;
            }
            Ok(s)
        }
        BoundaryNoiseSpec::SignedMeasureSeries { .. } => {
            let mut s = 0.0;
            for (&tau, &wt) in rule.nodes.iter().zip(&rule.weights) {
                s += wt * pairings(dom, cfg, spec, Lag::Heat(tau), x)?.iter().map(|v| v * v).sum::<f64>();
            }
            Ok(s)
        }
        BoundaryNoiseSpec::HomogeneousWiener { atoms, .. } => {
            let Domain::HalfSpace { m } = *dom else {
                return config(format!("homogeneous noise on {}; {SUPPORTED}", dom.tag()));
            };
            let x0 = x[0];
            let mut s = 0.0;
            for (&tau, &wt) in rule.nodes.iter().zip(&rule.weights) {
                let front = x0 * x0 / (4.0 * PI * tau.powi(3)) * (-x0 * x0 / (2.0 * tau)).exp();
                if front == 0.0 {
                    continue;
                }
                let spread = match FIELD_FOURIER_FORM {
                    FourierForm::Printed => (2.0 * tau).powi(m as i32),
                    FourierForm::Direct => 2.0 * tau,
                };
                let inner: f64 = atoms
                    .iter()
                    .map(|a| a.weight * (-spread * a.frequency.iter().map(|v| v * v).sum::<f64>()).exp())
                    .sum();
                s += wt * front * inner;
            }
            Ok(s)
        }
        BoundaryNoiseSpec::PoissonMeasure { .. } => {
            usage("Poisson noise has no Gaussian variance formula; use levy_moment_bound or levy_second_moment")
        }
    }
}

/// `(∫ f² dν, ∫ f dν, ∫ |f| dν)` for `f = kernel · ρ` (integrated over `(0,t]`
/// as well in the parabolic case).
fn levy_integrals(
    dom: &Domain,
    cfg: &KernelConfig,
    spec: &BoundaryNoiseSpec,
    x: &[f64],
    t: Option<f64>,
) -> Result<(f64, f64, f64)> {
    let BoundaryNoiseSpec::PoissonMeasure { intensity, mark } = spec else {
        return usage(format!("Lévy moments need Poisson noise, got {}", spec.family_name()));
    };
    dom.require_interior(x)?;
    let (mut f2, mut f1, mut fa) = (0.0, 0.0, 0.0);
    let marks: Vec<f64> = intensity.iter().map(|a| mark.eval(&a.point)).collect();
    let mut accumulate = |lag: Lag, wt: f64| -> Result<()> {
        for (a, rho) in intensity.iter().zip(&marks) {
            if a.mass == 0.0 || *rho == 0.0 {
                continue;
            }
            let f = kernel(dom, cfg, lag, x, &a.point)? * rho;
            f2 += wt * a.mass * f * f;
            f1 += wt * a.mass * f;
            fa += wt * a.mass * f.abs();
        }
        Ok(())
    };
    match t {
        None => {
            cfg.validate(dom)?;
            accumulate(Lag::Elliptic, 1.0)?;
        }
        Some(t) => {
            if !(t > 0.0) {
                return domain(format!("parabolic Lévy moment needs t > 0, got {t}"));
            }
            let rule = time_rule(t);
            for (&tau, &wt) in rule.nodes.iter().zip(&rule.weights) {
                accumulate(Lag::Heat(tau), wt)?;
            }
        }
    }
    Ok((f2, f1, fa))
}

/// `2[∫ f² dν + (∫ |f| dν)²]`, the second-moment bound for Poisson noise, with
/// `f = ∂𝒢/∂n(x,·)ρ` (elliptic, `t = None`) or `f = ∂G/∂n(s,x,·)ρ` over
/// `(0, t] × ∂O` (parabolic).
pub fn levy_moment_bound(
    dom: &Domain,
    cfg: &KernelConfig,
    spec: &BoundaryNoiseSpec,
    x: &[f64],
    t: Option<f64>,
) -> Result<f64> {
    let (f2, _, fa) = levy_integrals(dom, cfg, spec, x, t)?;
    Ok(2.0 * (f2 + fa * fa))
}

/// Exact `E(∫ f dπ)² = ∫ f² dν + (∫ f dν)²` for the same `f`.
pub fn levy_second_moment(
    dom: &Domain,
    cfg: &KernelConfig,
    spec: &BoundaryNoiseSpec,
    x: &[f64],
    t: Option<f64>,
) -> Result<f64> {
    let (f2, f1, _) = levy_integrals(dom, cfg, spec, x, t)?;
    Ok(f2 + f1 * f1)
}

/// Factors of the pathwise estimate `|∫_0^t f dW^H| ≤ Λ_α(W^H) I_α(f)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct YoungBound {
    pub integral_bound: f64,
    pub lambda_alpha: f64,
    pub i_alpha: f64,
}

fn check_alpha(alpha: f64, hurst: f64) -> Result<()> {
    if hurst > 0.5 && alpha > 1.0 - hurst && alpha < 0.5 {
        Ok(())
    } else {
        usage(format!("need H > 1/2 and 1 − H < α < 1/2; got H = {hurst}, α = {alpha}"))
    }
}

/// Panels on `[0, 1]` halving toward both ends.
fn graded_both_ends(levels: usize, per_panel: usize) -> CompositeRule {
    let mut breaks = vec![0.0];
    for k in (1..levels).rev() {
        breaks.push(0.5f64.powi(k as i32 + 1));
    }
    breaks.push(0.5);
    for k in 1..levels {
        breaks.push(1.0 - 0.5f64.powi(k as i32 + 1));
    }
    breaks.push(1.0);
    CompositeRule::from_breaks(&breaks, per_panel)
}

/// `I_α(f) = ∫_0^t (|f(r)| r^{-α} + α ∫_0^r |f(r) − f(q)| (r − q)^{-α-1} dq) dr`.
///
/// Both integrals use the substitution `u ↦ u^p`, `p = 1/(1−α)`, which removes
/// the endpoint singularities for Lipschitz `f`; panels are graded toward
/// `r = 0`, `r = t` and `q = r` so sharply peaked `f` are resolved.
pub fn i_alpha(f: &dyn Fn(f64) -> f64, t: f64, alpha: f64) -> f64 {
    let p = 1.0 / (1.0 - alpha);
    let outer = graded_both_ends(40, 8);
    let inner = CompositeRule::graded_to_zero(1.0, 40, 8);
    let mut total = 0.0;
    for (&v, &wv) in outer.nodes.iter().zip(&outer.weights) {
        let r = t * v.powf(p);
        let dr = t * p * v.powf(p - 1.0);
        let fr = f(r);
        let mut s = fr.abs() * r.powf(-alpha) * dr;
        if r > 0.0 {
            let inner_int = inner.integrate(|w| {
                let h = r * w.powf(p);
                let dq = r * p * w.powf(p - 1.0);
                if h <= 0.0 {
                    0.0
                } else {
                    (fr - f(r - h)).abs() * h.powf(-alpha - 1.0) * dq
                }
            });
            s += alpha * inner_int * dr;
        }
        total += wv * s;
    }
    total
}

/// `Λ_α = sup_{s<t} |D^{1−α}_{t−} W_{t−}(s)| / Γ(1−α)` over pairs of grid nodes,
/// with `W` linear between nodes (so the fractional derivative is exact).
pub fn lambda_alpha(grid: &[f64], path: &[f64], alpha: f64) -> f64 {
    // nodes including the origin
    let mut s_nodes = Vec::with_capacity(grid.len() + 1);
    let mut w = Vec::with_capacity(grid.len() + 1);
    s_nodes.push(0.0);
    w.push(0.0);
    s_nodes.extend_from_slice(grid);
    w.extend_from_slice(path);
    let ga = statrs::function::gamma::gamma(alpha);
    let g1a = statrs::function::gamma::gamma(1.0 - alpha);
    let beta = 1.0 - alpha;
    let mut sup: f64 = 0.0;
    for i in 0..s_nodes.len() {
        let s = s_nodes[i];
        // ∫_s^{t} (W(s) − W(r)) (r − s)^{-(2−α)} dr accumulated segment by segment
        let mut integral = 0.0;
        for j in i..s_nodes.len() - 1 {
            let (ra, rb) = (s_nodes[j], s_nodes[j + 1]);
            let slope = (w[j + 1] - w[j]) / (rb - ra);
            let (ua, ub) = (ra - s, rb - s);
            // W(s) − W(s+u) = A − slope·u on this segment
            let a = w[i] - w[j] + slope * ua;
            let prim = |u: f64| -> f64 {
                let lin = -slope * u.powf(alpha) / alpha;
                if u == 0.0 {
                    lin
                } else {
                    a * u.powf(alpha - 1.0) / (alpha - 1.0) + lin
                }
            };
            let seg = if j == i { prim(ub) - (-slope * 0.0) } else { prim(ub) - prim(ua) };
            integral += seg;
            let t = rb;
            let h = w[i] - w[j + 1];
            let d = (h / (t - s).powf(beta) + beta * integral) / ga;
            sup = sup.max(d.abs());
        }
    }
    sup / g1a
}

/// Riemann–Stieltjes midpoint sum `Σ_j f(m_j)(W(s_{j+1}) − W(s_j))`.
pub fn young_sum(f: &dyn Fn(f64) -> f64, grid: &[f64], path: &[f64]) -> f64 {
    let mut prev_t = 0.0;
    let mut prev_w = 0.0;
    let mut s = 0.0;
    for (&t, &w) in grid.iter().zip(path) {
        s += f(0.5 * (prev_t + t)) * (w - prev_w);
        prev_t = t;
        prev_w = w;
    }
    s
}

/// `(Λ_α I_α, Λ_α, I_α)` for `f` on `[0, t]`, `t` the last grid node.
pub fn young_bound(f: &dyn Fn(f64) -> f64, grid: &[f64], path: &[f64], alpha: f64, hurst: f64) -> Result<YoungBound> {
    check_alpha(alpha, hurst)?;
    if grid.len() != path.len() || grid.is_empty() {
        return usage("path and grid lengths differ");
    }
    let t = *grid.last().unwrap();
    let i = i_alpha(f, t, alpha);
    if i == 0.0 {
        return Ok(YoungBound { integral_bound: 0.0, lambda_alpha: 0.0, i_alpha: 0.0 });
    }
    let l = lambda_alpha(grid, path, alpha);
    Ok(YoungBound { integral_bound: l * i, lambda_alpha: l, i_alpha: i })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{
        sample_elliptic_white, sample_fbm_paths, sample_poisson_measure, Atom, DiscreteMeasure, Mark, PathMatrix,
        PoissonPoint,
    };

    const UNIT: Domain = Domain::Interval { a: 0.0, b: 1.0 };

    fn interval_white() -> BoundaryNoiseSpec {
        BoundaryNoiseSpec::white_noise(UNIT.boundary_quadrature(1, None).unwrap(), BoundaryBasis::Nodal, 2).unwrap()
    }

    #[test]
    fn interval_two_point_variance() {
        let spec = interval_white();
        for &x in &[0.1, 0.5, 0.8] {
            let v = analytic_variance_elliptic(&UNIT, &KernelConfig::default(), &spec, &[x]).unwrap();
            let exact = (1.0 - x) * (1.0 - x) + x * x;
            assert!((v - exact).abs() < 1e-8, "{v} vs {exact}");
        }
    }

    #[test]
    fn disk_white_variance_oracle() {
        let ball = Domain::UnitBall { d: 2 };
        let spec =
            BoundaryNoiseSpec::white_noise(ball.boundary_quadrature(4096, None).unwrap(), BoundaryBasis::Nodal, 0)
                .unwrap();
        for &r in &[0.5f64, 0.9, 0.99] {
            let v = analytic_variance_elliptic(&ball, &KernelConfig::default(), &spec, &[r, 0.0]).unwrap();
            let exact = (1.0 + r * r) / (1.0 - r * r) / (2.0 * PI);
            // independent oracle: Fourier series Σ r^{2|n|}/(2π)
            let series: f64 = (-3000i32..=3000).map(|n| r.powi(2 * n.abs())).sum::<f64>() / (2.0 * PI);
            assert!((exact - series).abs() < 1e-10);
            assert!((v - exact).abs() < 1e-9 * exact, "r={r}: {v} vs {exact}");
        }
    }

    #[test]
    fn fourier_pairing_recovers_truncated_series() {
        let ball = Domain::UnitBall { d: 2 };
        let nu = ball.boundary_quadrature(512, None).unwrap();
        let spec = BoundaryNoiseSpec::white_noise(nu, BoundaryBasis::Fourier, 41).unwrap();
        let plan = EllipticPlan::new(&ball, &KernelConfig::default(), &spec, &[vec![0.3, 0.4]]).unwrap();
        let r: f64 = 0.5;
        let expected = (1.0 + 2.0 * (1..=20).map(|n| r.powi(2 * n)).sum::<f64>()) / (2.0 * PI);
        assert!((plan.truncated_variance()[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn zero_realization_gives_zero() {
        let spec = interval_white();
        let r = NoiseRealization::zero_coefficients(2);
        assert_eq!(elliptic_field(&UNIT, &KernelConfig::default(), &spec, &r, &[0.3]).unwrap(), 0.0);
        assert_eq!(parabolic_field_v(&UNIT, &KernelConfig::default(), &spec, &r, 0.2, &[0.3]).unwrap(), 0.0);
    }

    #[test]
    fn poisson_single_atom_pairing() {
        let ball = Domain::UnitBall { d: 2 };
        let spec =
            BoundaryNoiseSpec::poisson(vec![Atom { point: vec![1.0, 0.0], mass: 2.0 }], Mark::constant(1.0)).unwrap();
        let r = sample_poisson_measure(&spec, 1.0, 5).unwrap();
        let x = [0.2, 0.1];
        let u = elliptic_field(&ball, &KernelConfig::default(), &spec, &r, &x).unwrap();
        let k = green_normal_unchecked(&ball, &KernelConfig::default(), &x, &[1.0, 0.0]).unwrap();
        assert!((u - k * r.points.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn half_line_field_matches_dirichlet_map() {
        let hl = Domain::HalfLine;
        let cfg = KernelConfig::with_lambda(1.0);
        let spec =
            BoundaryNoiseSpec::white_noise(hl.boundary_quadrature(1, None).unwrap(), BoundaryBasis::Nodal, 1).unwrap();
        let r = sample_elliptic_white(&spec, 3).unwrap();
        let g = r.coefficients[0];
        for &x in &[0.1, 1.0, 4.0] {
            let u = elliptic_field(&hl, &cfg, &spec, &r, &[x]).unwrap();
            let d =
                crate::dirichlet::dirichlet_map(&hl, &cfg, &crate::dirichlet::BoundaryData::Scalar(g), &[x]).unwrap();
            assert!((u - d).abs() < 1e-14);
        }
    }

    #[test]
    fn unsupported_pairs_are_config_errors() {
        let spec = BoundaryNoiseSpec::homogeneous(crate::noise::spectral_atoms_1d(|_| 1.0, 2.0, 4)).unwrap();
        let r = NoiseRealization::zero_coefficients(8);
        let e = elliptic_field(&UNIT, &KernelConfig::default(), &spec, &r, &[0.3]).unwrap_err();
        assert!(matches!(e, crate::Error::Config(ref m) if m.contains("supported")), "{e}");
    }

    #[test]
    fn large_time_v_decays_with_spectral_gap() {
        let spec = interval_white();
        let r = NoiseRealization { coefficients: vec![1.0, 0.0], ..Default::default() };
        let t = 2.0;
        let v = parabolic_field_v(&UNIT, &KernelConfig::default(), &spec, &r, t, &[0.3]).unwrap();
        let lead = 2.0 * PI * (PI * 0.3).sin() * (-PI * PI * t).exp();
        assert!((v - lead).abs() < 1e-3 * lead.abs());
    }

    #[test]
    fn mild_solution_eigenfunction_initial_condition() {
        let spec = interval_white();
        let grid = TimeGrid::uniform(0.1, 16).unwrap();
        let plan = ConvolutionPlan::new(
            &UNIT,
            &KernelConfig::default(),
            &spec,
            &grid,
            ConvolutionRule::ItoLeftPoint,
            &[vec![0.3], vec![0.5]],
        )
        .unwrap();
        let zero = PathMatrix { grid: plan.grid().clone(), rows: 2, values: vec![0.0; 2 * plan.grid().len()] };
        let xi = NoiseRealization { paths: Some(zero), ..Default::default() };
        let u0 = |y: &[f64]| (PI * y[0]).sin();
        let u = mild_solution(&plan, &spec, &xi, Some(&u0)).unwrap();
        for (x, v) in [0.3, 0.5].iter().zip(&u) {
            let exact = (-PI * PI * 0.1).exp() * (PI * x).sin();
            assert!((v - exact).abs() < 1e-8, "{v} vs {exact}");
        }
    }

    #[test]
    fn mild_solution_single_poisson_jump() {
        let spec = BoundaryNoiseSpec::poisson(vec![Atom { point: vec![0.0], mass: 1.0 }], Mark::constant(1.0)).unwrap();
        let grid = TimeGrid::uniform(0.2, 8).unwrap();
        let plan = ConvolutionPlan::new(
            &UNIT,
            &KernelConfig::default(),
            &spec,
            &grid,
            ConvolutionRule::ItoLeftPoint,
            &[vec![0.3]],
        )
        .unwrap();
        let xi = NoiseRealization {
            points: vec![PoissonPoint { time: 0.05, location: vec![0.0], mark: 1.0 }],
            ..Default::default()
        };
        let u = mild_solution(&plan, &spec, &xi, None).unwrap()[0];
        let k = heat_normal_unchecked(&UNIT, 64, 0.15, &[0.3], &[0.0]).unwrap();
        assert!((u - k).abs() < 1e-14);
        let late = NoiseRealization {
            points: vec![PoissonPoint { time: 0.3, location: vec![0.0], mark: 1.0 }],
            ..Default::default()
        };
        assert_eq!(mild_solution(&plan, &spec, &late, None).unwrap()[0], 0.0);
    }

    #[test]
    fn rule_mismatch_is_usage_error() {
        let spec = interval_white();
        let grid = TimeGrid::uniform(0.1, 8).unwrap();
        let plan = ConvolutionPlan::new(
            &UNIT,
            &KernelConfig::default(),
            &spec,
            &grid,
            ConvolutionRule::YoungMidpoint,
            &[vec![0.3]],
        )
        .unwrap();
        let paths = sample_fbm_paths(0.5, plan.grid(), 2, 1).unwrap();
        let xi = NoiseRealization { paths: Some(paths), ..Default::default() };
        assert!(matches!(mild_solution(&plan, &spec, &xi, None), Err(crate::Error::Usage(_))));
    }

    #[test]
    fn discrete_variance_approaches_analytic() {
        let spec = interval_white();
        let x = [0.25];
        let exact = analytic_variance_parabolic(&UNIT, &KernelConfig::default(), &spec, 0.1, &x).unwrap();
        let mut prev = f64::INFINITY;
        for steps in [128, 512, 2048] {
            let plan = ConvolutionPlan::new(
                &UNIT,
                &KernelConfig::default(),
                &spec,
                &TimeGrid::uniform(0.1, steps).unwrap(),
                ConvolutionRule::ItoLeftPoint,
                &[x.to_vec()],
            )
            .unwrap();
            let err = (plan.discrete_variance()[0] - exact).abs() / exact;
            assert!(err < prev);
            prev = err;
        }
        assert!(prev < 1e-3, "{prev}");
    }

    #[test]
    fn parabolic_variance_increases_in_t() {
        let spec = interval_white();
        let mut prev = 0.0;
        for &t in &[1e-4, 1e-3, 1e-2, 0.1, 0.5] {
            let v = analytic_variance_parabolic(&UNIT, &KernelConfig::default(), &spec, t, &[0.2]).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn homogeneous_display_matches_direct_transform() {
        // |F ∂G/∂n|² by direct z-quadrature of the kernel, against the closed display
        let hs = Domain::HalfSpace { m: 1 };
        let atoms = crate::noise::spectral_atoms_1d(|_| crate::noise::white_spectral_density(1), 4.0, 16);
        let spec = BoundaryNoiseSpec::homogeneous(atoms.clone()).unwrap();
        let (t, x) = (0.3, [0.4, 0.1]);
        let display = analytic_variance_parabolic(&hs, &KernelConfig::with_lambda(1.0), &spec, t, &x).unwrap();
        let zrule = CompositeRule::uniform(-12.0, 12.0, 96, 16);
        let srule = time_rule(t);
        let mut generic = 0.0;
        for (&s, &ws) in srule.nodes.iter().zip(&srule.weights) {
            let mut inner = 0.0;
            for a in &atoms {
                let eta = a.frequency[0];
                let k = |z: f64| heat_normal_unchecked(&hs, 64, s, &x, &[0.0, z]).unwrap();
                let re = zrule.integrate(|z| (eta * z).cos() * k(z));
                let im = zrule.integrate(|z| (eta * z).sin() * k(z));
                inner += a.weight * (re * re + im * im);
            }
            generic += ws * inner;
        }
        assert!((generic - display).abs() < 1e-6 * display, "{generic} vs {display}");
    }

    #[test]
    fn levy_atom_arithmetic() {
        let ball = Domain::UnitBall { d: 2 };
        let cfg = KernelConfig::default();
        let y0 = vec![0.0, 1.0];
        let spec =
            BoundaryNoiseSpec::poisson(vec![Atom { point: y0.clone(), mass: 0.7 }], Mark::constant(1.0)).unwrap();
        let x = [0.1, 0.2];
        let f = green_normal_unchecked(&ball, &cfg, &x, &y0).unwrap();
        let b = levy_moment_bound(&ball, &cfg, &spec, &x, None).unwrap();
        assert!((b - 2.0 * (0.7 * f * f + 0.49 * f * f)).abs() < 1e-12);
        let zero = BoundaryNoiseSpec::poisson(vec![Atom { point: y0, mass: 0.7 }], Mark::constant(0.0)).unwrap();
        assert_eq!(levy_moment_bound(&ball, &cfg, &zero, &x, None).unwrap(), 0.0);
    }

    #[test]
    fn signed_series_variance_is_sum_of_squares() {
        let ball = Domain::UnitBall { d: 2 };
        let cfg = KernelConfig::default();
        let m1 = DiscreteMeasure { atoms: vec![Atom { point: vec![1.0, 0.0], mass: 1.0 }] };
        let m2 = DiscreteMeasure {
            atoms: vec![Atom { point: vec![0.0, -1.0], mass: -0.5 }, Atom { point: vec![-1.0, 0.0], mass: 0.25 }],
        };
        let spec = BoundaryNoiseSpec::signed_series(vec![m1, m2], 0.5, None).unwrap();
        let x = [0.3, -0.2];
        let k = |y: &[f64]| green_normal_unchecked(&ball, &cfg, &x, y).unwrap();
        let exact = k(&[1.0, 0.0]).powi(2) + (-0.5 * k(&[0.0, -1.0]) + 0.25 * k(&[-1.0, 0.0])).powi(2);
        let v = analytic_variance_elliptic(&ball, &cfg, &spec, &x).unwrap();
        assert!((v - exact).abs() < 1e-14);
    }

    #[test]
    fn i_alpha_of_constant() {
        for &alpha in &[0.3, 0.4, 0.45] {
            let i = i_alpha(&|_| 1.0, 1.0, alpha);
            assert!((i - 1.0 / (1.0 - alpha)).abs() < 1e-10, "{i}");
        }
        assert_eq!(i_alpha(&|_| 0.0, 1.0, 0.3), 0.0);
    }

    #[test]
    fn i_alpha_of_linear_function() {
        // f(r) = r: ∫ r^{1−α} + α ∫_0^r (r−q)^{−α} dq dr = 1/(2−α) + α/((1−α)(2−α))
        let a = 0.3;
        let exact = 1.0 / (2.0 - a) + a / ((1.0 - a) * (2.0 - a));
        let i = i_alpha(&|r| r, 1.0, a);
        assert!((i - exact).abs() < 1e-10, "{i} vs {exact}");
    }

    #[test]
    fn lambda_alpha_of_linear_path() {
        // W(r) = r: W(s) − W(t) = −(t−s); D = (−(t−s)^α − (1−α)(t−s)^α/α)/Γ(α)
        let grid: Vec<f64> = (1..=8).map(|i| i as f64 / 8.0).collect();
        let a = 0.3;
        let l = lambda_alpha(&grid, &grid, a);
        let g = statrs::function::gamma::gamma;
        let exact = (1.0 + (1.0 - a) / a) / g(a) / g(1.0 - a);
        assert!((l - exact).abs() < 1e-12, "{l} vs {exact}");
    }

    #[test]
    fn young_bound_dominates_sum() {
        let grid = TimeGrid::uniform(1.0, 256).unwrap();
        let paths = sample_fbm_paths(0.75, &grid, 20, 99).unwrap();
        let f = |s: f64| (3.0 * s).sin() + 0.5;
        for k in 0..20 {
            let row = paths.row(k);
            let b = young_bound(&f, grid.nodes(), row, 0.3, 0.75).unwrap();
            let s = young_sum(&f, grid.nodes(), row);
            assert!(s.abs() <= 1.05 * b.integral_bound, "{s} vs {b:?}");
        }
        assert!(matches!(young_bound(&f, grid.nodes(), paths.row(0), 0.2, 0.75), Err(crate::Error::Usage(_))));
    }
}
