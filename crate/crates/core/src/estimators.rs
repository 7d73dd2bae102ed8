//! Monte Carlo second moments, blow-up regression and boundary-rate checks.

use rayon::prelude::*;
use serde::Serialize;

use crate::domains::{dist2, Domain};
use crate::error::{config, usage, Error, Result};
use crate::noise::BoundaryNoiseSpec;
use crate::quadrature::CompositeRule;

/// Samples per deterministic block. Blocks are summed independently and
/// merged in block order, so the result does not depend on the worker count.
pub const MC_BLOCK: usize = 64;
pub const MIN_SAMPLES: usize = 100;

/// Default probe distances for rate experiments.
pub const DEFAULT_DISTANCES: [f64; 9] = [0.5, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001];

/// Monte Carlo estimate at one probe.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldEstimate {
    pub n: usize,
    pub mean: f64,
    /// Standard error of `mean`.
    pub mean_stderr: f64,
    pub second_moment: f64,
    /// Standard error of `second_moment`, from the sample fourth moment.
    pub stderr: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    s1: f64,
    s2: f64,
    s4: f64,
}

impl Sums {
    fn push(&mut self, u: f64) {
        let u2 = u * u;
        self.s1 += u;
        self.s2 += u2;
        self.s4 += u2 * u2;
    }

    fn merge(&mut self, o: &Sums) {
        self.s1 += o.s1;
        self.s2 += o.s2;
        self.s4 += o.s4;
    }

    fn finish(&self, n: usize) -> FieldEstimate {
        let nf = n as f64;
        let m2 = self.s2 / nf;
        let mean = self.s1 / nf;
        let var = ((self.s4 - nf * m2 * m2) / (nf - 1.0)).max(0.0);
        let var1 = ((self.s2 - nf * mean * mean) / (nf - 1.0)).max(0.0);
        FieldEstimate { n, mean, mean_stderr: (var1 / nf).sqrt(), second_moment: m2, stderr: (var / nf).sqrt() }
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Usage(format!("cannot start worker pool: {e}")))
}

/// Second moments at several probes from one sampler call per seed.
///
/// Sample `i` uses seed `seed + i`. `sampler` returns the field at every probe.
pub fn mc_second_moments<F>(sampler: F, n: usize, seed: u64, workers: usize) -> Result<Vec<FieldEstimate>>
where
    F: Fn(u64) -> Result<Vec<f64>> + Sync,
{
    if n < MIN_SAMPLES {
        return usage(format!("Monte Carlo needs N >= {MIN_SAMPLES}, got {n}"));
    }
    let blocks = n.div_ceil(MC_BLOCK);
    let run_block = |b: usize| -> Result<Vec<Sums>> {
        let mut sums: Vec<Sums> = Vec::new();
        for i in b * MC_BLOCK..((b + 1) * MC_BLOCK).min(n) {
            let s = seed.wrapping_add(i as u64);
            let vals = sampler(s)?;
            if sums.is_empty() {
                sums = vec![Sums::default(); vals.len()];
            } else if vals.len() != sums.len() {
                return usage("sampler returned a varying number of probes");
            }
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { seed: s });
            }
            for (acc, v) in sums.iter_mut().zip(vals) {
                acc.push(v);
            }
        }
        Ok(sums)
    };
    let parts: Vec<Result<Vec<Sums>>> = pool(workers)?.install(|| (0..blocks).into_par_iter().map(run_block).collect());
    let mut total: Vec<Sums> = Vec::new();
    for part in parts {
        let part = part?;
        if total.is_empty() {
            total = part;
        } else {
            for (t, p) in total.iter_mut().zip(&part) {
                t.merge(p);
            }
        }
    }
    Ok(total.iter().map(|s| s.finish(n)).collect())
}

/// Single-probe form of [`mc_second_moments`].
pub fn mc_second_moment<F>(sampler: F, n: usize, seed: u64, workers: usize) -> Result<FieldEstimate>
where
    F: Fn(u64) -> Result<f64> + Sync,
{
    Ok(mc_second_moments(|s| sampler(s).map(|v| vec![v]), n, seed, workers)?.remove(0))
}

/// How the values were regressed against distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitKind {
    /// `log value = intercept + slope · log dist`.
    PowerLaw,
    /// `value = intercept + slope · (1 + log⁺ dist⁻¹)²`.
    LogSquare,
}

/// Boundary-rate summary for one experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub distances: Vec<f64>,
    pub values: Vec<f64>,
    pub fit: FitKind,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub excluded: Vec<usize>,
    pub warnings: Vec<String>,
    pub bound_kind: Option<BoundKind>,
    pub bound_rhs: Vec<f64>,
    pub ratios: Vec<f64>,
    /// `max value / rhs` over probes.
    pub bound_constant: f64,
    /// Relative growth of the running maximum of the ratio over the three
    /// closest probes.
    pub tail_growth: f64,
    pub stable: bool,
}

/// `(1 + log⁺(1/dist))²`.
pub fn log_square(dist: f64) -> f64 {
    (1.0 + (1.0 / dist).ln().max(0.0)).powi(2)
}

fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ssr: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r2 = if syy > 0.0 { (1.0 - ssr / syy).clamp(0.0, 1.0) } else { 1.0 };
    (slope, intercept, r2)
}

fn check_distances(distances: &[f64], values: &[f64]) -> Result<()> {
    if distances.len() != values.len() {
        return usage(format!("{} distances but {} values", distances.len(), values.len()));
    }
    if distances.windows(2).any(|w| !(w[1] < w[0])) || distances.iter().any(|d| !(*d > 0.0)) {
        return usage("probe distances must be positive and strictly decreasing");
    }
    Ok(())
}

/// Regression of `values` against `distances` (slope part of the report).
pub fn fit_blowup(distances: &[f64], values: &[f64], fit: FitKind) -> Result<RateReport> {
    check_distances(distances, values)?;
    let mut excluded = Vec::new();
    let mut warnings = Vec::new();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (i, (&d, &v)) in distances.iter().zip(values).enumerate() {
        if !(v > 0.0) || !v.is_finite() {
            excluded.push(i);
            warnings.push(format!("value {v} at dist {d} excluded from the fit"));
            continue;
        }
        match fit {
            FitKind::PowerLaw => {
                xs.push(d.ln());
                ys.push(v.ln());
            }
            FitKind::LogSquare => {
                xs.push(log_square(d));
                ys.push(v);
            }
        }
    }
    if xs.len() < 4 {
        return usage(format!("rate fit needs at least 4 positive values, have {}", xs.len()));
    }
    let (slope, intercept, r_squared) = least_squares(&xs, &ys);
    Ok(RateReport {
        distances: distances.to_vec(),
        values: values.to_vec(),
        fit,
        slope,
        intercept,
        r_squared,
        excluded,
        warnings,
        bound_kind: None,
        bound_rhs: Vec::new(),
        ratios: Vec::new(),
        bound_constant: f64::NAN,
        tail_growth: f64::NAN,
        stable: false,
    })
}

/// Allowed growth of the running ratio maximum over the three closest probes.
pub const STABILITY_TOLERANCE: f64 = 0.25;

/// Compares `values` with the bound's right side (bound part of the report).
///
/// Stable means the running maximum of `value / rhs`, taken from the far
/// probes inward, grows by less than [`STABILITY_TOLERANCE`] across the three
/// closest probes.
pub fn check_bound(report: &mut RateReport, kind: BoundKind, rhs: &[f64]) -> Result<()> {
    if rhs.len() != report.values.len() {
        return usage("bound evaluations and values differ in length");
    }
    if rhs.len() < 3 {
        return usage("bound check needs at least three probes");
    }
    let ratios: Vec<f64> = report.values.iter().zip(rhs).map(|(v, r)| v / r).collect();
    let mut running = Vec::with_capacity(ratios.len());
    let mut m = f64::NEG_INFINITY;
    for r in &ratios {
        m = m.max(*r);
        running.push(m);
    }
    let n = running.len();
    let (before, last) = (running[n - 3], running[n - 1]);
    let growth = if before > 0.0 {
        (last - before) / before
    } else if last > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    report.bound_kind = Some(kind);
    report.bound_constant = m;
    report.bound_rhs = rhs.to_vec();
    report.ratios = ratios;
    report.tail_growth = growth;
    report.stable = m.is_finite() && growth.is_finite() && growth < STABILITY_TOLERANCE;
    if !report.stable {
        report
            .warnings
            .push(format!("ratio to the {} bound grows by {growth:.3} over the closest probes", kind.name()));
    }
    Ok(())
}

/// The boundary-rate statements checked by the harness, one per noise family
/// and equation (the white-noise elliptic case has separate `d > 1` and
/// `d = 1` forms).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    WhiteEllipticIntegral,
    WhiteEllipticLog,
    SignedSeriesElliptic,
    HomogeneousElliptic,
    LevyElliptic,
    WhiteParabolic,
    SignedSeriesParabolic,
    HomogeneousParabolic,
    LevyParabolic,
    FractionalYoung,
}

impl BoundKind {
    pub const ALL: [BoundKind; 10] = [
        Self::WhiteEllipticIntegral,
        Self::WhiteEllipticLog,
        Self::SignedSeriesElliptic,
        Self::HomogeneousElliptic,
        Self::LevyElliptic,
        Self::WhiteParabolic,
        Self::SignedSeriesParabolic,
        Self::HomogeneousParabolic,
        Self::LevyParabolic,
        Self::FractionalYoung,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::WhiteEllipticIntegral => "white-elliptic-integral",
            Self::WhiteEllipticLog => "white-elliptic-log",
            Self::SignedSeriesElliptic => "signed-series-elliptic",
            Self::HomogeneousElliptic => "homogeneous-elliptic",
            Self::LevyElliptic => "levy-elliptic",
            Self::WhiteParabolic => "white-parabolic",
            Self::SignedSeriesParabolic => "signed-series-parabolic",
            Self::HomogeneousParabolic => "homogeneous-parabolic",
            Self::LevyParabolic => "levy-parabolic",
            Self::FractionalYoung => "fractional-young",
        }
    }

    /// The right side being checked, as text.
    pub fn statement(&self) -> &'static str {
        match self {
            Self::WhiteEllipticIntegral => "E u^2(x) <= C ∫|x-y|^(2-2d) ν(dy), d > 1",
            Self::WhiteEllipticLog => "E u^2(x) <= C [1 + log+ dist(x)^(-1)]^2, d = 1",
            Self::SignedSeriesElliptic => "E u^2(x) <= C dist(x)^(2-2d) (log form when d = 1)",
            Self::HomogeneousElliptic => "E u^2(x) <= C ∫(x0^-2 χ{|η|<=1} + x0^-4 |η|^(-1/m) χ{|η|>1}) ν(dη)",
            Self::LevyElliptic => {
                "E u^2(x) <= C [∫|x-y|^(2-2d) ρ^2 dν + (∫|x-y|^(1-d) |ρ| dν)^2] (log form when d = 1)"
            }
            Self::WhiteParabolic => "E|u(t,x)|^2 <= C ∫|x-y|^(-2d) ν(dy)",
            Self::SignedSeriesParabolic => "E|u(t,x)|^2 <= C dist(x)^(-2d)",
            Self::HomogeneousParabolic => "E|u(t,x)|^2 <= C e^t ∫(x0^-2 χ{|η|<=1} + x0^-4 |η|^(-1/m) χ{|η|>1}) ν(dη)",
            Self::LevyParabolic => "E u^2(t,x) <= C [∫|x-y|^(-2d) ρ^2 dν + (∫|x-y|^(-d-1) |ρ| dν)^2], d > 1",
            Self::FractionalYoung => "sup_t |u(t,x)| <= C dist(x)^(-d+1-α), H > 1/2",
        }
    }

    pub fn is_parabolic(&self) -> bool {
        matches!(
            self,
            Self::WhiteParabolic
                | Self::SignedSeriesParabolic
                | Self::HomogeneousParabolic
                | Self::LevyParabolic
                | Self::FractionalYoung
        )
    }

    /// Regression used for the slope report.
    pub fn fit_kind(&self, dom: &Domain) -> FitKind {
        match self {
            Self::WhiteEllipticLog => FitKind::LogSquare,
            Self::SignedSeriesElliptic | Self::LevyElliptic if dom.dimension() == 1 => FitKind::LogSquare,
            _ => FitKind::PowerLaw,
        }
    }
}

/// Inputs a bound evaluator may need besides the probe point.
#[derive(Debug, Clone, Copy)]
pub struct BoundContext<'a> {
    pub domain: &'a Domain,
    pub spec: &'a BoundaryNoiseSpec,
    pub t: Option<f64>,
    /// Young exponent, for [`BoundKind::FractionalYoung`].
    pub alpha: Option<f64>,
}

fn nu_integral(ctx: &BoundContext, x: &[f64], power: f64) -> Result<f64> {
    match ctx.spec {
        BoundaryNoiseSpec::WhiteNoise { nu, .. } | BoundaryNoiseSpec::CylFractionalWiener { nu, .. } => {
            Ok(nu.integrate(|y| dist2(x, y).powf(0.5 * power)))
        }
        other => config(format!("bound needs white or cylindrical noise, got {}", other.family_name())),
    }
}

fn homogeneous_integral(ctx: &BoundContext, x: &[f64]) -> Result<f64> {
    let (BoundaryNoiseSpec::HomogeneousWiener { atoms, .. }, Domain::HalfSpace { m }) = (ctx.spec, ctx.domain) else {
        return config("homogeneous bound needs homogeneous noise on a half-space");
    };
    let x0 = x[0];
    Ok(atoms
        .iter()
        .map(|a| {
            let r = a.frequency.iter().map(|v| v * v).sum::<f64>().sqrt();
            let f = if r <= 1.0 { x0.powi(-2) } else { x0.powi(-4) * r.powf(-1.0 / *m as f64) };
            a.weight * f
        })
        .sum())
}

fn levy_two_term(ctx: &BoundContext, x: &[f64], p2: f64, p1: f64) -> Result<f64> {
    let BoundaryNoiseSpec::PoissonMeasure { intensity, mark } = ctx.spec else {
        return config(format!("Lévy bound needs Poisson noise, got {}", ctx.spec.family_name()));
    };
    let (mut a, mut b) = (0.0, 0.0);
    for at in intensity {
        let rho = mark.eval(&at.point);
        let r = dist2(x, &at.point).sqrt();
        a += at.mass * r.powf(p2) * rho * rho;
        b += at.mass * r.powf(p1) * rho.abs();
    }
    Ok(a + b * b)
}

/// Right side of `kind` at `x`, without the unspecified constant.
pub fn bound_rhs(kind: BoundKind, ctx: &BoundContext, x: &[f64]) -> Result<f64> {
    let d = ctx.domain.dimension() as f64;
    let dist = ctx.domain.dist_to_boundary(x)?;
    match kind {
        BoundKind::WhiteEllipticIntegral => nu_integral(ctx, x, 2.0 - 2.0 * d),
        BoundKind::WhiteEllipticLog => Ok(log_square(dist)),
        BoundKind::SignedSeriesElliptic if d == 1.0 => Ok(log_square(dist)),
        BoundKind::SignedSeriesElliptic => Ok(dist.powf(2.0 - 2.0 * d)),
        BoundKind::HomogeneousElliptic => homogeneous_integral(ctx, x),
        BoundKind::LevyElliptic if d == 1.0 => Ok(log_square(dist)),
        BoundKind::LevyElliptic => levy_two_term(ctx, x, 2.0 - 2.0 * d, 1.0 - d),
        BoundKind::WhiteParabolic => nu_integral(ctx, x, -2.0 * d),
        BoundKind::SignedSeriesParabolic => Ok(dist.powf(-2.0 * d)),
        BoundKind::HomogeneousParabolic => {
            let t = ctx.t.ok_or_else(|| Error::Usage("homogeneous parabolic bound needs t".into()))?;
            Ok(t.exp() * homogeneous_integral(ctx, x)?)
        }
        BoundKind::LevyParabolic => {
            if d == 1.0 {
                return config("the parabolic Lévy bound is stated for d > 1");
            }
            levy_two_term(ctx, x, -2.0 * d, -d - 1.0)
        }
        BoundKind::FractionalYoung => {
            let a = ctx.alpha.ok_or_else(|| Error::Usage("fractional bound needs α".into()))?;
            Ok(dist.powf(-d + 1.0 - a))
        }
    }
}

/// Fails unless every [`BoundKind`] appears exactly once in `registered`.
pub fn coverage_lock(registered: &[BoundKind]) -> Result<()> {
    for k in BoundKind::ALL {
        match registered.iter().filter(|r| **r == k).count() {
            1 => {}
            0 => return Err(Error::CheckFailed(format!("no experiment registered for {}", k.name()))),
            n => return Err(Error::CheckFailed(format!("{} is registered {n} times", k.name()))),
        }
    }
    Ok(())
}

/// Time-integral inequality check at one `(d, K₂, t)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeIntegralReport {
    pub d: usize,
    pub k2: f64,
    pub t: f64,
    pub r_grid: Vec<f64>,
    pub closed_form: Vec<f64>,
    pub quadrature: Vec<f64>,
    pub max_relative_error: f64,
    /// `max_r LHS(r) r^{2d}`.
    pub max_scaled: f64,
    /// `Γ(d) (2K₂)^d`.
    pub bound: f64,
    pub holds: bool,
}

/// `∫_0^t s^{-d-1} e^{-r²/(2K₂ s)} ds = (2K₂/r²)^d Γ(d, r²/(2K₂t))`.
pub fn time_integral_closed_form(d: usize, k2: f64, t: f64, r: f64) -> f64 {
    let df = d as f64;
    let z = r * r / (2.0 * k2 * t);
    (2.0 * k2 / (r * r)).powi(d as i32) * statrs::function::gamma::gamma(df) * statrs::function::gamma::gamma_ur(df, z)
}

/// The same integral by Gauss–Legendre panels in `ln s`.
pub fn time_integral_quadrature(d: usize, k2: f64, t: f64, r: f64) -> f64 {
    let c = r * r / (2.0 * k2);
    // below s_min the integrand is under e^{-745}
    let s_min = (c / 745.0).min(t * 1e-3);
    let rule = CompositeRule::uniform(s_min.ln(), t.ln(), 400, 16);
    rule.integrate(|v| {
        let s = v.exp();
        s.powi(-(d as i32)) * (-c / s).exp()
    })
}

/// Checks `sup_r r^{2d} ∫_0^t s^{-d-1} e^{-r²/(2K₂s)} ds ≤ Γ(d)(2K₂)^d` on `r_grid`,
/// comparing quadrature with the closed form along the way.
pub fn check_time_integral(d: usize, k2: f64, t: f64, r_grid: &[f64]) -> Result<TimeIntegralReport> {
    if d == 0 || !(k2 > 0.0) || !(t > 0.0) || r_grid.iter().any(|r| !(*r > 0.0)) {
        return usage("time-integral check needs d >= 1, K2 > 0, t > 0 and positive radii");
    }
    let closed: Vec<f64> = r_grid.iter().map(|&r| time_integral_closed_form(d, k2, t, r)).collect();
    let quad: Vec<f64> = r_grid.iter().map(|&r| time_integral_quadrature(d, k2, t, r)).collect();
    let max_relative_error = closed
        .iter()
        .zip(&quad)
        .map(|(c, q)| if *c == 0.0 { q.abs() } else { ((c - q) / c).abs() })
        .fold(0.0, f64::max);
    let max_scaled = r_grid.iter().zip(&closed).map(|(r, c)| c * r.powi(2 * d as i32)).fold(0.0, f64::max);
    let bound = statrs::function::gamma::gamma(d as f64) * (2.0 * k2).powi(d as i32);
    Ok(TimeIntegralReport {
        d,
        k2,
        t,
        r_grid: r_grid.to_vec(),
        closed_form: closed,
        quadrature: quad,
        max_relative_error,
        max_scaled,
        bound,
        holds: max_scaled <= bound * (1.0 + 1e-12),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn constant_sampler() {
        let e = mc_second_moment(|_| Ok(2.0), 1000, 0, 4).unwrap();
        assert_eq!(e.second_moment, 4.0);
        assert_eq!(e.stderr, 0.0);
        assert_eq!(e.mean, 2.0);
        assert_eq!(e.mean_stderr, 0.0);
    }

    #[test]
    fn too_few_samples() {
        assert!(matches!(mc_second_moment(|_| Ok(1.0), 50, 0, 1), Err(Error::Usage(_))));
    }

    #[test]
    fn standard_normal_second_moment() {
        let f = |s: u64| -> Result<f64> { Ok(crate::noise::rng_for(s).sample::<f64, _>(StandardNormal)) };
        let e = mc_second_moment(f, 100_000, 7, 4).unwrap();
        // chi-square oracle: Var(Z²) = 2
        assert!((e.stderr - (2.0f64 / 1e5).sqrt()).abs() < 3e-4);
        assert!((e.second_moment - 1.0).abs() < 4.0 * e.stderr, "{e:?}");
    }

    #[test]
    fn worker_count_does_not_change_result() {
        let f = |s: u64| -> Result<Vec<f64>> {
            let mut r = crate::noise::rng_for(s);
            Ok(vec![r.sample(StandardNormal), r.random::<f64>()])
        };
        let a = mc_second_moments(f, 1000, 3, 1).unwrap();
        let b = mc_second_moments(f, 1000, 3, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn non_finite_sample_records_seed() {
        let f = |s: u64| -> Result<f64> { Ok(if s == 150 { f64::NAN } else { 1.0 }) };
        assert_eq!(mc_second_moment(f, 200, 100, 3).unwrap_err(), Error::NonFinite { seed: 150 });
    }

    #[test]
    fn power_law_recovery() {
        let d = DEFAULT_DISTANCES;
        for p in [-4.0, -2.0, -1.0, 0.0] {
            let v: Vec<f64> = d.iter().map(|x: &f64| 3.0 * x.powf(p)).collect();
            let r = fit_blowup(&d, &v, FitKind::PowerLaw).unwrap();
            assert!((r.slope - p).abs() < 1e-12, "{p}: {}", r.slope);
            assert!((r.r_squared - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn disk_white_noise_slope() {
        let d = DEFAULT_DISTANCES;
        let v: Vec<f64> = d
            .iter()
            .map(|s| {
                let r = 1.0 - s;
                (1.0 + r * r) / (1.0 - r * r) / (2.0 * std::f64::consts::PI)
            })
            .collect();
        let tail = fit_blowup(&d[4..], &v[4..], FitKind::PowerLaw).unwrap();
        assert!((tail.slope + 1.0).abs() < 0.01, "{}", tail.slope);
    }

    #[test]
    fn nonpositive_values_are_excluded() {
        let d = DEFAULT_DISTANCES;
        let mut v: Vec<f64> = d.iter().map(|x| x.powi(-2)).collect();
        v[1] = 0.0;
        let r = fit_blowup(&d, &v, FitKind::PowerLaw).unwrap();
        assert_eq!(r.excluded, vec![1]);
        assert_eq!(r.warnings.len(), 1);
        let few = [1.0, -1.0, -1.0, -1.0, -1.0, -1.0, 1.0, 1.0, -1.0];
        assert!(fit_blowup(&d, &few, FitKind::PowerLaw).is_err());
    }

    #[test]
    fn distances_must_decrease() {
        assert!(fit_blowup(&[0.1, 0.2, 0.05, 0.01], &[1.0; 4], FitKind::PowerLaw).is_err());
    }

    #[test]
    fn half_of_rhs_gives_half() {
        let d = DEFAULT_DISTANCES;
        let rhs: Vec<f64> = d.iter().map(|x| x.powi(-2)).collect();
        let v: Vec<f64> = rhs.iter().map(|r| 0.5 * r).collect();
        let mut r = fit_blowup(&d, &v, FitKind::PowerLaw).unwrap();
        check_bound(&mut r, BoundKind::SignedSeriesElliptic, &rhs).unwrap();
        assert_eq!(r.bound_constant, 0.5);
        assert!(r.stable);
    }

    #[test]
    fn diverging_ratio_is_unstable() {
        let d = DEFAULT_DISTANCES;
        let rhs: Vec<f64> = d.iter().map(|x| x.powi(-1)).collect();
        let v: Vec<f64> = d.iter().map(|x| x.powi(-2)).collect();
        let mut r = fit_blowup(&d, &v, FitKind::PowerLaw).unwrap();
        check_bound(&mut r, BoundKind::WhiteParabolic, &rhs).unwrap();
        assert!(!r.stable);
        assert!(r.warnings.iter().any(|w| w.contains("white-parabolic")));
    }

    #[test]
    fn log_square_fit_constant() {
        let d = DEFAULT_DISTANCES;
        let v: Vec<f64> = d.iter().map(|x| 0.7 * log_square(*x)).collect();
        let r = fit_blowup(&d, &v, FitKind::LogSquare).unwrap();
        assert!((r.slope - 0.7).abs() < 1e-12 && r.intercept.abs() < 1e-12);
    }

    #[test]
    fn coverage_lock_detects_gaps() {
        assert!(coverage_lock(&BoundKind::ALL).is_ok());
        assert!(coverage_lock(&BoundKind::ALL[1..]).is_err());
        let mut dup = BoundKind::ALL.to_vec();
        dup.push(BoundKind::LevyParabolic);
        assert!(coverage_lock(&dup).is_err());
    }

    #[test]
    fn time_integral_unit_case() {
        // ∫_0^1 s^{-2} e^{-1/(2s)} ds = 2 e^{-1/2}
        let exact = 2.0 * (-0.5f64).exp();
        assert!((time_integral_closed_form(1, 1.0, 1.0, 1.0) - exact).abs() < 1e-14);
        assert!((time_integral_quadrature(1, 1.0, 1.0, 1.0) - exact).abs() < 1e-10);
    }

    #[test]
    fn time_integral_large_t_limit() {
        for d in 1..=3 {
            let k2 = 1.7;
            let r = 0.3;
            let v = time_integral_closed_form(d, k2, 1e12, r) * r.powi(2 * d as i32);
            let lim = statrs::function::gamma::gamma(d as f64) * (2.0 * k2).powi(d as i32);
            assert!((v - lim).abs() < 1e-9 * lim);
        }
    }

    #[test]
    fn time_integral_check_holds() {
        let r: Vec<f64> = (0..40).map(|i| 10f64.powf(-3.0 + 0.1 * i as f64)).collect();
        for d in 1..=3 {
            let rep = check_time_integral(d, 2.0, 1.0, &r).unwrap();
            assert!(rep.holds && rep.max_relative_error < 1e-10, "{rep:?}");
        }
    }

    #[test]
    fn time_integral_monotone_in_t() {
        let mut prev = 0.0;
        for t in [0.01, 0.1, 1.0, 10.0] {
            let v = time_integral_closed_form(2, 1.0, t, 0.5);
            assert!(v >= prev);
            prev = v;
        }
    }
}
