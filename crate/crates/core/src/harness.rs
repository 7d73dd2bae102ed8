//! Experiment configuration, registry and runner.
//!
//! Every experiment is described by a TOML file; the defaults live in the
//! repository's `experiments/` directory and are compiled in, so the registry
//! can run without a checkout. A run writes one CSV (fixed columns, one row per
//! probe or check) and one JSON summary.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::path::{Path, PathBuf};

use crate::dirichlet::{
    dirichlet_map, dirichlet_map_closed_form, dirichlet_map_quadrature, distributional_laplacian_check, weak_residual,
    BoundaryData, LaplacianCase, Phi, TestFunction,
};
use crate::domains::{Domain, TimeGrid};
use crate::error::{config, usage, Error, Result};
use crate::estimators::{
    bound_rhs, check_bound, check_time_integral, coverage_lock, fit_blowup, mc_second_moments, BoundContext, BoundKind,
    FitKind, DEFAULT_DISTANCES,
};
use crate::fields::{
    analytic_variance_elliptic, analytic_variance_parabolic, elliptic_field, i_alpha, levy_second_moment,
    mild_solution, young_bound, young_sum, ConvolutionPlan, ConvolutionRule, EllipticPlan,
};
use crate::kernels::{
    check_gaussian_bound, heat_kernel, heat_kernel_unchecked, heat_normal_unchecked, interval_heat_eigen,
    interval_heat_images, BoundProbe, Derivative, KernelConfig, EIGEN_SWITCH,
};
use crate::noise::{
    fbm_covariance, rng_for, sample_elliptic_white, sample_fbm_paths, sample_homogeneous_coeffs,
    sample_poisson_measure, spectral_atoms_1d, white_spectral_density, Atom, BoundaryBasis, BoundaryNoiseSpec,
    DiscreteMeasure, FbmGenerator, Mark, NoiseRealization, SpectralAtom,
};
use crate::quadrature::{CompositeRule, GaussLegendre};
use crate::special::DISK_MIN_TIME;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "BNOISE_OUT_DIR";

/// Fixed CSV header.
pub const CSV_COLUMNS: [&str; 10] =
    ["experiment", "domain", "dist", "t", "value", "stderr", "bound_rhs", "ratio", "N", "seed"];

// ---------------------------------------------------------------------------
// configuration

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub domain: Option<DomainConfig>,
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub probe: ProbeConfig,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub young: Option<YoungConfig>,
    #[serde(default)]
    pub fbm: Option<FbmConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainKind {
    Interval,
    Halfline,
    Halfspace,
    Ball,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub kind: DomainKind,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub m: Option<usize>,
    pub d: Option<usize>,
}

impl DomainConfig {
    pub fn build(&self) -> Result<Domain> {
        match self.kind {
            DomainKind::Interval => Domain::interval(self.a.unwrap_or(0.0), self.b.unwrap_or(1.0)),
            DomainKind::Halfline => Ok(Domain::HalfLine),
            DomainKind::Halfspace => {
                Domain::half_space(self.m.ok_or_else(|| Error::Config("domain.m is required for a half-space".into()))?)
            }
            DomainKind::Ball => {
                Domain::unit_ball(self.d.ok_or_else(|| Error::Config("domain.d is required for a ball".into()))?)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseFamily {
    White,
    CylindricalFbm,
    SignedSeries,
    Homogeneous,
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectralDensity {
    /// Flat density `(2π)^{-m/2}`.
    White,
    /// `e^{-η²/2}/√(2π)`.
    Gaussian,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub family: NoiseFamily,
    pub basis: Option<BoundaryBasis>,
    /// Boundary quadrature size (white, cylindrical and Poisson families).
    pub nodes: Option<usize>,
    /// Fourier truncation order.
    pub order: Option<usize>,
    /// Grade the boundary quadrature toward the probe anchor.
    #[serde(default)]
    pub graded: bool,
    pub truncation_radius: Option<f64>,
    pub hurst: Option<f64>,
    pub measures: Option<Vec<DiscreteMeasure>>,
    pub spectral_density: Option<SpectralDensity>,
    /// CSV file with columns `frequency,weight` (one-dimensional boundary).
    pub spectral_file: Option<PathBuf>,
    pub cutoff: Option<f64>,
    pub half_count: Option<usize>,
    /// Poisson intensity per unit boundary measure.
    pub rate: Option<f64>,
    /// Mark polynomial coefficients in `|y|`.
    pub mark: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
struct SpectralRow {
    frequency: f64,
    weight: f64,
}

impl NoiseConfig {
    fn quadrature(&self, dom: &Domain, anchor: &[f64], min_dist: f64) -> Result<crate::BoundaryQuadrature> {
        let radius = match dom {
            Domain::HalfSpace { .. } => Some(
                self.truncation_radius
                    .ok_or_else(|| Error::Config("noise.truncation_radius is required on a half-space".into()))?,
            ),
            _ => self.truncation_radius,
        };
        if self.graded {
            dom.graded_boundary_quadrature(anchor, 0.25 * min_dist, radius.unwrap_or(1.0))
        } else {
            dom.boundary_quadrature(self.nodes.unwrap_or(1), radius)
        }
    }

    /// Builds the noise law. `anchor` and `min_dist` steer graded quadratures;
    /// `base` resolves relative file paths.
    pub fn build(&self, dom: &Domain, anchor: &[f64], min_dist: f64, base: &Path) -> Result<BoundaryNoiseSpec> {
        match self.family {
            NoiseFamily::White => {
                let nu = self.quadrature(dom, anchor, min_dist)?;
                BoundaryNoiseSpec::white_noise(nu, self.basis.unwrap_or(BoundaryBasis::Nodal), self.order.unwrap_or(0))
            }
            NoiseFamily::CylindricalFbm => {
                let h =
                    self.hurst.ok_or_else(|| Error::Config("noise.hurst is required for cylindrical-fbm".into()))?;
                let nu = self.quadrature(dom, anchor, min_dist)?;
                BoundaryNoiseSpec::cylindrical_fbm(
                    nu,
                    self.basis.unwrap_or(BoundaryBasis::Nodal),
                    self.order.unwrap_or(0),
                    h,
                )
            }
            NoiseFamily::SignedSeries => {
                let measures = self
                    .measures
                    .clone()
                    .ok_or_else(|| Error::Config("noise.measures is required for signed-series".into()))?;
                for m in &measures {
                    for a in &m.atoms {
                        dom.require_boundary(&a.point).map_err(|e| Error::Config(format!("noise.measures: {e}")))?;
                    }
                }
                BoundaryNoiseSpec::signed_series(measures, self.hurst.unwrap_or(0.5), None)
            }
            NoiseFamily::Homogeneous => {
                let Domain::HalfSpace { m: 1 } = dom else {
                    return config(format!("homogeneous noise is configured on halfspace1 only, not {}", dom.tag()));
                };
                let atoms = match (&self.spectral_file, self.spectral_density) {
                    (Some(path), _) => {
                        let path = if path.is_absolute() { path.clone() } else { base.join(path) };
                        let mut rdr = csv::Reader::from_path(&path)
                            .map_err(|e| Error::Config(format!("noise.spectral_file {}: {e}", path.display())))?;
                        let mut atoms = Vec::new();
                        for row in rdr.deserialize::<SpectralRow>() {
                            let row =
                                row.map_err(|e| Error::Config(format!("noise.spectral_file {}: {e}", path.display())))?;
                            atoms.push(SpectralAtom { frequency: vec![row.frequency], weight: row.weight });
                        }
                        atoms
                    }
                    (None, Some(density)) => {
                        let cutoff = self.cutoff.unwrap_or(8.0);
                        let half = self.half_count.unwrap_or(64);
                        match density {
                            SpectralDensity::White => spectral_atoms_1d(|_| white_spectral_density(1), cutoff, half),
                            SpectralDensity::Gaussian => spectral_atoms_1d(
                                |e| (-0.5 * e * e).exp() / (2.0 * std::f64::consts::PI).sqrt(),
                                cutoff,
                                half,
                            ),
                        }
                    }
                    (None, None) => return config(
                        "noise.spectral_file: homogeneous noise needs noise.spectral_file or noise.spectral_density",
                    ),
                };
                BoundaryNoiseSpec::homogeneous(atoms)
            }
            NoiseFamily::Poisson => {
                let q = self.quadrature(dom, anchor, min_dist)?;
                let rate = self.rate.unwrap_or(1.0);
                let atoms =
                    q.nodes.into_iter().zip(q.weights).map(|(point, w)| Atom { point, mass: rate * w }).collect();
                BoundaryNoiseSpec::poisson(atoms, Mark { coeffs: self.mark.clone().unwrap_or_else(|| vec![1.0]) })
            }
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub distances: Option<Vec<f64>>,
    pub anchor: Option<Vec<f64>>,
    pub points: Option<Vec<Vec<f64>>>,
    pub t: Option<f64>,
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    #[serde(default)]
    pub n: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

fn default_seed() -> u64 {
    1
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

impl Default for McConfig {
    fn default() -> Self {
        Self { n: 0, seed: default_seed(), workers: default_workers() }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct YoungConfig {
    pub alpha: f64,
    pub pairs: usize,
    pub steps: usize,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FbmConfig {
    pub hurst: Vec<f64>,
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub csv: Option<String>,
    pub json: Option<String>,
}

/// Experiments understood by [`run`].
pub const EXPERIMENTS: [&str; 12] = [
    "kernel-selftest",
    "gaussian-bounds",
    "dirichlet-maps",
    "laplacian-identities",
    "elliptic-ito",
    "parabolic-ito",
    "elliptic-rate",
    "parabolic-rate",
    "young-bound",
    "time-integral",
    "fbm-covariance",
    "kernel-green-bound",
];

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    fn domain(&self) -> Result<Domain> {
        self.domain.as_ref().ok_or_else(|| Error::Config("domain section is required".into()))?.build()
    }

    fn noise(&self) -> Result<&NoiseConfig> {
        self.noise.as_ref().ok_or_else(|| Error::Config("noise section is required".into()))
    }

    /// Checks the (experiment × domain × noise) combination before any work.
    pub fn validate(&self) -> Result<()> {
        let name = self.experiment.name.as_str();
        if !EXPERIMENTS.contains(&name) {
            return config(format!("experiment.name: unknown experiment {name:?}; known: {}", EXPERIMENTS.join(", ")));
        }
        if self.mc.workers == 0 {
            return config("mc.workers must be at least 1");
        }
        let needs_noise =
            matches!(name, "elliptic-ito" | "parabolic-ito" | "elliptic-rate" | "parabolic-rate" | "young-bound");
        if !needs_noise {
            return Ok(());
        }
        let dom = self.domain()?;
        let noise = self.noise()?;
        let parabolic = matches!(name, "parabolic-ito" | "parabolic-rate" | "young-bound");
        if parabolic && !self.probe.t.is_some_and(|t| t > 0.0) {
            return config("probe.t: parabolic experiments need a positive time");
        }
        if matches!(name, "elliptic-ito" | "parabolic-ito") {
            if self.probe.points.as_ref().is_none_or(|p| p.is_empty()) {
                return config("probe.points: Itô checks need explicit probe points");
            }
            if self.mc.n < crate::estimators::MIN_SAMPLES {
                return config(format!("mc.n: Itô checks need at least {} samples", crate::estimators::MIN_SAMPLES));
            }
            if noise.family == NoiseFamily::Poisson {
                return config("noise.family: Itô checks need Gaussian noise");
            }
        }
        if name == "parabolic-ito" && self.probe.steps.is_none() {
            return config("probe.steps: parabolic Itô check needs a time-step count");
        }
        if name == "young-bound" {
            if dom.dimension() != 1 || !dom.is_bounded() {
                return config("domain: young-bound runs on an interval");
            }
            if noise.family != NoiseFamily::SignedSeries {
                return config("noise.family: young-bound needs signed-series noise");
            }
            let h = noise.hurst.unwrap_or(0.5);
            let y = self.young.as_ref().ok_or_else(|| Error::Config("young section is required".into()))?;
            if !(h > 0.5 && h < 1.0) {
                return config(format!("noise.hurst: young-bound needs 1/2 < H < 1, got {h}"));
            }
            if !(y.alpha > 1.0 - h && y.alpha < 0.5) {
                return config(format!("young.alpha must lie in (1 − H, 1/2) = ({}, 0.5), got {}", 1.0 - h, y.alpha));
            }
        }
        if name.ends_with("-rate") {
            let d = dom.dimension();
            match (noise.family, &dom) {
                (NoiseFamily::Homogeneous, Domain::HalfSpace { .. }) => {}
                (NoiseFamily::Homogeneous, _) => {
                    return config(format!("noise.family: homogeneous noise needs a half-space, not {}", dom.tag()))
                }
                (NoiseFamily::Poisson, _) if name == "parabolic-rate" && d == 1 => {
                    return config("noise.family: the parabolic Lévy bound needs d > 1")
                }
                _ => {}
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// registry

/// One row of the experiment registry.
#[derive(Debug, Clone, Serialize)]
pub struct RegistryEntry {
    pub experiment: &'static str,
    pub domain: &'static str,
    pub noise: &'static str,
    pub noise_label: &'static str,
    /// The result in the source text this experiment checks.
    pub anchor: &'static str,
    pub bound: Option<BoundKind>,
    pub file: &'static str,
    #[serde(skip)]
    pub config: &'static str,
}

macro_rules! entry {
    ($exp:expr, $dom:expr, $noise:expr, $label:expr, $anchor:expr, $bound:expr, $file:literal) => {
        RegistryEntry {
            experiment: $exp,
            domain: $dom,
            noise: $noise,
            noise_label: $label,
            anchor: $anchor,
            bound: $bound,
            file: $file,
            config: include_str!(concat!("../../../experiments/", $file)),
        }
    };
}

static REGISTRY: std::sync::LazyLock<Vec<RegistryEntry>> = std::sync::LazyLock::new(|| {
    use BoundKind::*;
    vec![
        entry!(
            "kernel-selftest",
            "all",
            "none",
            "-",
            "heat kernel: symmetry, semigroup, sub-Markov mass, image vs eigenfunction series",
            None,
            "kernel-selftest.toml"
        ),
        entry!(
            "gaussian-bounds",
            "interval,halfline",
            "none",
            "-",
            "Gaussian bounds on heat-kernel derivatives",
            None,
            "gaussian-bounds.toml"
        ),
        entry!(
            "kernel-green-bound",
            "interval,halfline,ball2",
            "none",
            "-",
            "pointwise bound on the normal derivative of the Green kernel",
            None,
            "kernel-green-bound.toml"
        ),
        entry!(
            "dirichlet-maps",
            "interval,halfline,ball1,ball2",
            "none",
            "-",
            "Dirichlet map: interval and half-line examples, weak formulation",
            None,
            "dirichlet-maps.toml"
        ),
        entry!(
            "laplacian-identities",
            "interval,halfline",
            "none",
            "-",
            "distributional Laplacian of the harmonic extensions",
            None,
            "laplacian-identities.toml"
        ),
        entry!(
            "elliptic-ito",
            "ball2",
            "white",
            "white noise, Fourier basis",
            "second moment of the elliptic white-noise field",
            None,
            "elliptic-ito-ball2-white.toml"
        ),
        entry!(
            "parabolic-ito",
            "interval",
            "white",
            "white noise H=1/2 (BM at both ends)",
            "Itô isometry for the boundary stochastic convolution",
            None,
            "parabolic-ito-interval-white.toml"
        ),
        entry!(
            "elliptic-rate",
            "ball2",
            "white",
            "white noise",
            "elliptic white noise: integral bound, d > 1",
            Some(WhiteEllipticIntegral),
            "elliptic-rate-ball2-white.toml"
        ),
        entry!(
            "elliptic-rate",
            "interval",
            "white",
            "white noise",
            "elliptic white noise: log bound, d = 1",
            Some(WhiteEllipticLog),
            "elliptic-rate-interval-white.toml"
        ),
        entry!(
            "elliptic-rate",
            "ball2",
            "signed-series",
            "series of signed measures",
            "elliptic signed-measure series: dist^(2-2d)",
            Some(SignedSeriesElliptic),
            "elliptic-rate-ball2-signed-series.toml"
        ),
        entry!(
            "elliptic-rate",
            "halfspace1",
            "homogeneous",
            "homogeneous Wiener, white spectrum",
            "elliptic homogeneous noise on the half-space",
            Some(HomogeneousElliptic),
            "elliptic-rate-halfspace1-homogeneous.toml"
        ),
        entry!(
            "elliptic-rate",
            "ball2",
            "poisson",
            "Poisson random measure",
            "elliptic Lévy noise: two-term bound",
            Some(LevyElliptic),
            "elliptic-rate-ball2-poisson.toml"
        ),
        entry!(
            "parabolic-rate",
            "interval",
            "white",
            "white noise H=1/2",
            "parabolic white noise: Itô isometry and ∫|x-y|^(-2d) bound",
            Some(WhiteParabolic),
            "parabolic-rate-interval-white.toml"
        ),
        entry!(
            "parabolic-rate",
            "interval",
            "signed-series",
            "series of signed measures H=1/2",
            "parabolic signed-measure series: dist^(-2d)",
            Some(SignedSeriesParabolic),
            "parabolic-rate-interval-signed-series.toml"
        ),
        entry!(
            "parabolic-rate",
            "halfspace1",
            "homogeneous",
            "homogeneous Wiener, white spectrum",
            "parabolic homogeneous noise on the half-space",
            Some(HomogeneousParabolic),
            "parabolic-rate-halfspace1-homogeneous.toml"
        ),
        entry!(
            "parabolic-rate",
            "halfspace1",
            "poisson",
            "Poisson random measure",
            "parabolic Lévy noise: two-term bound, d > 1",
            Some(LevyParabolic),
            "parabolic-rate-halfspace1-poisson.toml"
        ),
        entry!(
            "young-bound",
            "interval",
            "fbm",
            "signed-measure series, fBM H>1/2",
            "fractional noise H > 1/2: pathwise Young bound",
            Some(FractionalYoung),
            "young-bound-interval-fbm.toml"
        ),
        entry!(
            "time-integral",
            "-",
            "none",
            "-",
            "time integral of the Gaussian bound against |x-y|^(-2d)",
            None,
            "time-integral.toml"
        ),
        entry!(
            "fbm-covariance",
            "-",
            "fbm",
            "fractional Brownian motion",
            "fractional Brownian motion covariance",
            None,
            "fbm-covariance.toml"
        ),
    ]
});

pub fn registry() -> &'static [RegistryEntry] {
    &REGISTRY
}

/// Coverage lock over the registry plus consistency of each bundled config
/// with its row.
pub fn check_registry() -> Result<()> {
    let bounds: Vec<BoundKind> = registry().iter().filter_map(|e| e.bound).collect();
    coverage_lock(&bounds)?;
    for e in registry() {
        if e.anchor.is_empty() {
            return Err(Error::CheckFailed(format!("{} has no anchor", e.file)));
        }
        let cfg =
            ExperimentConfig::from_toml(e.config).map_err(|err| Error::CheckFailed(format!("{}: {err}", e.file)))?;
        if cfg.experiment.name != e.experiment {
            return Err(Error::CheckFailed(format!(
                "{} runs {}, registered as {}",
                e.file, cfg.experiment.name, e.experiment
            )));
        }
        if let Some(k) = e.bound {
            let dom = cfg.domain()?;
            let found = bound_for(&cfg.experiment.name, cfg.noise()?.family, &dom)?;
            if found != k {
                return Err(Error::CheckFailed(format!(
                    "{} checks {}, registered as {}",
                    e.file,
                    found.name(),
                    k.name()
                )));
            }
        }
    }
    Ok(())
}

/// Text dump of the registry, one row per experiment.
pub fn list_experiments() -> String {
    let mut out = String::from("experiment\tdomain\tnoise\tanchor\tbound\n");
    for e in registry() {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            e.experiment,
            e.domain,
            e.noise_label,
            e.anchor,
            e.bound.map(|b| b.name()).unwrap_or("-")
        ));
    }
    out
}

/// Finds the registry row for `experiment`, narrowed by domain and noise.
pub fn lookup(experiment: &str, domain: Option<&str>, noise: Option<&str>) -> Result<&'static RegistryEntry> {
    let hits: Vec<&RegistryEntry> = registry()
        .iter()
        .filter(|e| e.experiment == experiment)
        .filter(|e| domain.is_none_or(|d| e.domain == d))
        .filter(|e| noise.is_none_or(|n| e.noise == n))
        .collect();
    match hits.as_slice() {
        [one] => Ok(one),
        [] => usage(format!(
            "no registered experiment {experiment} (domain {domain:?}, noise {noise:?}); see list-experiments"
        )),
        many => usage(format!(
            "{experiment} is registered for several setups; pick one with --domain/--noise: {}",
            many.iter().map(|e| format!("{}/{}", e.domain, e.noise)).collect::<Vec<_>>().join(", ")
        )),
    }
}

fn bound_for(experiment: &str, family: NoiseFamily, dom: &Domain) -> Result<BoundKind> {
    let d = dom.dimension();
    Ok(match (experiment, family) {
        ("elliptic-rate", NoiseFamily::White | NoiseFamily::CylindricalFbm) if d == 1 => BoundKind::WhiteEllipticLog,
        ("elliptic-rate", NoiseFamily::White | NoiseFamily::CylindricalFbm) => BoundKind::WhiteEllipticIntegral,
        ("elliptic-rate", NoiseFamily::SignedSeries) => BoundKind::SignedSeriesElliptic,
        ("elliptic-rate", NoiseFamily::Homogeneous) => BoundKind::HomogeneousElliptic,
        ("elliptic-rate", NoiseFamily::Poisson) => BoundKind::LevyElliptic,
        ("parabolic-rate", NoiseFamily::White | NoiseFamily::CylindricalFbm) => BoundKind::WhiteParabolic,
        ("parabolic-rate", NoiseFamily::SignedSeries) => BoundKind::SignedSeriesParabolic,
        ("parabolic-rate", NoiseFamily::Homogeneous) => BoundKind::HomogeneousParabolic,
        ("parabolic-rate", NoiseFamily::Poisson) => BoundKind::LevyParabolic,
        ("young-bound", NoiseFamily::SignedSeries) => BoundKind::FractionalYoung,
        _ => return config(format!("no bound registered for {experiment} with {family:?} noise")),
    })
}

// ---------------------------------------------------------------------------
// running

/// Overrides from the command line.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out_dir: Option<PathBuf>,
    /// Directory for relative paths inside the config.
    pub base_dir: Option<PathBuf>,
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsvRow {
    pub experiment: String,
    pub domain: String,
    pub dist: Option<f64>,
    pub t: Option<f64>,
    pub value: f64,
    pub stderr: Option<f64>,
    pub bound_rhs: Option<f64>,
    pub ratio: Option<f64>,
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
}

/// A named pass/fail outcome inside an experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Debug, Clone)]
struct Outcome {
    domain: String,
    rows: Vec<CsvRow>,
    checks: Vec<Check>,
    detail: serde_json::Value,
}

/// Result of one run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub experiment: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub rows: Vec<CsvRow>,
    pub summary: serde_json::Value,
    pub csv_path: Option<PathBuf>,
    pub json_path: Option<PathBuf>,
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    seed: u64,
    workers: usize,
    base: PathBuf,
}

impl Ctx<'_> {
    fn row(&self, domain: &str, dist: Option<f64>, t: Option<f64>, value: f64) -> CsvRow {
        CsvRow {
            experiment: self.cfg.experiment.name.clone(),
            domain: domain.to_string(),
            dist,
            t,
            value,
            stderr: None,
            bound_rhs: None,
            ratio: None,
            n: 0,
            seed: self.seed,
        }
    }
}

/// Runs `cfg` and returns rows, checks and the JSON summary without writing files.
pub fn execute(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutcome> {
    cfg.validate()?;
    let ctx = Ctx {
        cfg,
        seed: opts.seed.unwrap_or(cfg.mc.seed),
        workers: opts.workers.unwrap_or(cfg.mc.workers).max(1),
        base: opts.base_dir.clone().unwrap_or_else(|| PathBuf::from(".")),
    };
    let out = match cfg.experiment.name.as_str() {
        "kernel-selftest" => kernel_selftest(&ctx)?,
        "gaussian-bounds" => gaussian_bounds(&ctx)?,
        "kernel-green-bound" => green_bound(&ctx)?,
        "dirichlet-maps" => dirichlet_maps(&ctx)?,
        "laplacian-identities" => laplacian_identities(&ctx)?,
        "elliptic-ito" => elliptic_ito(&ctx)?,
        "parabolic-ito" => parabolic_ito(&ctx)?,
        "elliptic-rate" => rate(&ctx, false)?,
        "parabolic-rate" => rate(&ctx, true)?,
        "young-bound" => young(&ctx)?,
        "time-integral" => time_integral(&ctx)?,
        "fbm-covariance" => fbm_covariance_check(&ctx)?,
        other => return config(format!("experiment.name: unknown experiment {other:?}")),
    };
    let passed = out.checks.iter().all(|c| c.passed);
    let timestamp =
        std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let summary = json!({
        "experiment": cfg.experiment.name,
        "domain": out.domain,
        "noise": cfg.noise.as_ref().map(|n| n.family),
        "passed": passed,
        "checks": out.checks,
        "detail": out.detail,
        "environment": {
            "seed": ctx.seed,
            "workers": ctx.workers,
            "samples": cfg.mc.n,
            "kernel": cfg.kernel,
            "grid": { "t": cfg.probe.t, "steps": cfg.probe.steps },
            "versions": {
                "boundary-noise": env!("CARGO_PKG_VERSION"),
                "os": std::env::consts::OS,
                "arch": std::env::consts::ARCH,
            },
            "timestamp": timestamp,
        },
    });
    Ok(RunOutcome {
        experiment: cfg.experiment.name.clone(),
        passed,
        checks: out.checks,
        rows: out.rows,
        summary,
        csv_path: None,
        json_path: None,
    })
}

/// Default output directory: `$BNOISE_OUT_DIR`, else `out`.
pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out"))
}

/// Serializes rows with the fixed header.
pub fn csv_bytes(rows: &[CsvRow]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(CSV_COLUMNS).map_err(|e| Error::Io(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

/// Runs `cfg` and writes its CSV and JSON into the output directory.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutcome> {
    let mut out = execute(cfg, opts)?;
    let dir = opts.out_dir.clone().unwrap_or_else(default_out_dir);
    std::fs::create_dir_all(&dir)?;
    let stem = default_stem(cfg);
    let csv_path = dir.join(cfg.output.csv.clone().unwrap_or_else(|| format!("{stem}.csv")));
    let json_path = dir.join(cfg.output.json.clone().unwrap_or_else(|| format!("{stem}.json")));
    std::fs::write(&csv_path, csv_bytes(&out.rows)?)?;
    let text = serde_json::to_string_pretty(&out.summary).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(&json_path, text)?;
    out.csv_path = Some(csv_path);
    out.json_path = Some(json_path);
    Ok(out)
}

fn default_stem(cfg: &ExperimentConfig) -> String {
    let mut s = cfg.experiment.name.clone();
    if let Some(Ok(d)) = cfg.domain.as_ref().map(|d| d.build()) {
        s.push('-');
        s.push_str(&d.tag());
    }
    if let Some(n) = &cfg.noise {
        s.push('-');
        s.push_str(&serde_json::to_value(n.family).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default());
    }
    s
}

/// Runs a registry row with its bundled config.
pub fn run_registered(entry: &RegistryEntry, opts: &RunOptions) -> Result<RunOutcome> {
    let cfg = ExperimentConfig::from_toml(entry.config)?;
    run(&cfg, opts)
}

// ---------------------------------------------------------------------------
// experiments

fn kernel_selftest(ctx: &Ctx) -> Result<Outcome> {
    let started = std::time::Instant::now();
    let unit = Domain::Interval { a: 0.0, b: 1.0 };
    let terms = ctx.cfg.kernel.series_terms;
    let mut rows = Vec::new();
    let mut checks = Vec::new();

    // image series vs eigenfunction series
    let pts: Vec<f64> = (1..10).map(|i| i as f64 / 10.0).collect();
    let mut worst: f64 = 0.0;
    for &t in &[EIGEN_SWITCH, 0.1, 0.3, 1.0] {
        for &x in &pts {
            for &y in &pts {
                let a = interval_heat_images(0.0, 1.0, terms, t, x, y);
                let (b, _) = interval_heat_eigen(0.0, 1.0, terms, t, x, y);
                worst = worst.max((a - b).abs());
            }
        }
    }
    checks.push(Check::new("images-vs-eigen", worst <= 1e-10, format!("max |difference| = {worst:e}")));
    rows.push(CsvRow { bound_rhs: Some(1e-10), ratio: Some(worst / 1e-10), ..ctx.row("interval", None, None, worst) });

    // symmetry
    let mut rng = rng_for(ctx.seed);
    use rand::Rng;
    let domains = [unit, Domain::HalfLine, Domain::HalfSpace { m: 1 }, Domain::UnitBall { d: 2 }];
    for dom in domains {
        let mut worst: f64 = 0.0;
        for _ in 0..50 {
            let (x, y) = (random_point(&dom, &mut rng), random_point(&dom, &mut rng));
            let t = rng.random_range(DISK_MIN_TIME..1.0);
            let a = heat_kernel(&dom, t, &x, &y)?;
            let b = heat_kernel(&dom, t, &y, &x)?;
            worst = worst.max((a - b).abs());
        }
        checks.push(Check::new(
            format!("symmetry-{}", dom.tag()),
            worst <= 1e-10,
            format!("max |G(t,x,y) - G(t,y,x)| = {worst:e}"),
        ));
        rows.push(CsvRow {
            bound_rhs: Some(1e-10),
            ratio: Some(worst / 1e-10),
            ..ctx.row(&dom.tag(), None, None, worst)
        });
    }

    // Chapman–Kolmogorov
    let gl = GaussLegendre::new(200);
    let halfline_rule = CompositeRule::uniform(0.0, 12.0, 60, 16);
    let mut worst_ck: f64 = 0.0;
    for &(t, s, x, y) in &[(0.03, 0.05, 0.2, 0.65), (0.01, 0.2, 0.5, 0.5), (0.1, 0.1, 0.9, 0.15)] {
        let lhs = gl.integrate(0.0, 1.0, |z| {
            heat_kernel_unchecked(&unit, terms, t, &[x], &[z]).unwrap_or(f64::NAN)
                * heat_kernel_unchecked(&unit, terms, s, &[z], &[y]).unwrap_or(f64::NAN)
        });
        worst_ck = worst_ck.max((lhs - heat_kernel(&unit, t + s, &[x], &[y])?).abs());
        let hl = Domain::HalfLine;
        let lhs = halfline_rule.integrate(|z| {
            if z <= 0.0 {
                return 0.0;
            }
            heat_kernel_unchecked(&hl, terms, t, &[x], &[z]).unwrap_or(f64::NAN)
                * heat_kernel_unchecked(&hl, terms, s, &[z], &[y]).unwrap_or(f64::NAN)
        });
        worst_ck = worst_ck.max((lhs - heat_kernel(&hl, t + s, &[x], &[y])?).abs());
    }
    checks.push(Check::new("chapman-kolmogorov", worst_ck <= 1e-6, format!("max defect = {worst_ck:e}")));
    rows.push(CsvRow {
        bound_rhs: Some(1e-6),
        ratio: Some(worst_ck / 1e-6),
        ..ctx.row("interval,halfline", None, None, worst_ck)
    });

    // sub-Markov mass
    let mut max_mass: f64 = 0.0;
    for &t in &[0.001, 0.05, 0.5] {
        for &x in &[0.01, 0.3, 0.5] {
            max_mass = max_mass.max(
                gl.integrate(0.0, 1.0, |z| heat_kernel_unchecked(&unit, terms, t, &[x], &[z]).unwrap_or(f64::NAN)),
            );
            let m = CompositeRule::uniform(0.0, 30.0, 120, 16)
                .integrate(|z| heat_kernel_unchecked(&Domain::HalfLine, terms, t, &[x], &[z]).unwrap_or(f64::NAN));
            max_mass = max_mass.max(m);
        }
    }
    let ball = Domain::UnitBall { d: 2 };
    let q = ball.interior_quadrature(32)?;
    for &t in &[0.01, 0.1] {
        let m = q.integrate(|y| heat_kernel_unchecked(&ball, terms, t, &[0.3, 0.2], y).unwrap_or(f64::NAN));
        max_mass = max_mass.max(m);
    }
    let ok = max_mass <= 1.0 + 1e-8;
    checks.push(Check::new("sub-markov", ok, format!("max mass = {max_mass:.12}")));
    rows.push(CsvRow {
        bound_rhs: Some(1.0 + 1e-8),
        ratio: Some(max_mass / (1.0 + 1e-8)),
        ..ctx.row("all", None, None, max_mass)
    });

    let elapsed = started.elapsed().as_secs_f64();
    Ok(Outcome { domain: "all".into(), rows, checks, detail: json!({ "elapsed_seconds": elapsed }) })
}

fn random_point(dom: &Domain, rng: &mut impl rand::Rng) -> Vec<f64> {
    match *dom {
        Domain::Interval { a, b } => vec![rng.random_range(a + 0.01..b - 0.01)],
        Domain::HalfLine => vec![rng.random_range(0.01..3.0)],
        Domain::HalfSpace { m } => {
            let mut v = vec![rng.random_range(0.01..2.0)];
            v.extend((0..m).map(|_| rng.random_range(-2.0..2.0)));
            v
        }
        Domain::UnitBall { d } => loop {
            let v: Vec<f64> = (0..d).map(|_| rng.random_range(-0.95..0.95)).collect();
            if v.iter().map(|a| a * a).sum::<f64>() < 0.95 * 0.95 {
                break v;
            }
        },
    }
}

fn gaussian_bounds(ctx: &Ctx) -> Result<Outcome> {
    let horizon = ctx.cfg.probe.t.unwrap_or(1.0);
    let derivs = [
        Derivative::NONE,
        Derivative { time_order: 0, space_axis: Some(0) },
        Derivative { time_order: 1, space_axis: None },
    ];
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut fits = Vec::new();
    for dom in [Domain::Interval { a: 0.0, b: 1.0 }, Domain::HalfLine] {
        let probe = BoundProbe::default_for(&dom, horizon)?;
        for deriv in derivs {
            let name = format!("{}-n{}-a{}", dom.tag(), deriv.time_order, deriv.space_order());
            match check_gaussian_bound(&dom, deriv, horizon, &probe) {
                Ok(fit) => {
                    checks.push(Check::new(&name, true, format!("K1 = {:.6}, K2 = {:.4}", fit.k1, fit.k2)));
                    rows.push(CsvRow {
                        bound_rhs: Some(crate::kernels::K1_CAP),
                        ratio: Some(fit.k1 / crate::kernels::K1_CAP),
                        ..ctx.row(&dom.tag(), None, Some(horizon), fit.k1)
                    });
                    fits.push(json!({ "domain": dom.tag(), "fit": fit }));
                }
                Err(Error::CheckFailed(msg)) => {
                    checks.push(Check::new(&name, false, msg));
                    rows.push(ctx.row(&dom.tag(), None, Some(horizon), f64::INFINITY));
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(Outcome { domain: "interval,halfline".into(), rows, checks, detail: json!({ "fits": fits }) })
}

fn green_bound(ctx: &Ctx) -> Result<Outcome> {
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let cases: [(Domain, KernelConfig, Vec<Vec<f64>>, Vec<Vec<f64>>); 3] = [
        (
            Domain::Interval { a: 0.0, b: 1.0 },
            KernelConfig::with_lambda(1.0),
            DEFAULT_DISTANCES.iter().map(|d| vec![*d]).collect(),
            vec![vec![0.0], vec![1.0]],
        ),
        (
            Domain::HalfLine,
            KernelConfig::with_lambda(1.0),
            DEFAULT_DISTANCES.iter().map(|d| vec![*d]).collect(),
            vec![vec![0.0]],
        ),
        (
            Domain::UnitBall { d: 2 },
            KernelConfig::default(),
            DEFAULT_DISTANCES.iter().map(|d| vec![1.0 - d, 0.0]).collect(),
            (0..64)
                .map(|k| {
                    let th = 2.0 * std::f64::consts::PI * k as f64 / 64.0;
                    vec![th.cos(), th.sin()]
                })
                .collect(),
        ),
    ];
    for (dom, kcfg, xs, ys) in cases {
        let c = crate::kernels::check_green_normal_bound(&dom, &kcfg, &xs, &ys)?;
        checks.push(Check::new(dom.tag(), c.is_finite(), format!("C = {c:.6}")));
        rows.push(ctx.row(&dom.tag(), None, None, c));
    }
    Ok(Outcome { domain: "interval,halfline,ball2".into(), rows, checks, detail: json!({}) })
}

/// Trial pairs `(γ, ψ)` for the weak formulation on each bounded domain.
fn weak_pairs() -> Result<Vec<(Domain, KernelConfig, BoundaryData, TestFunction, &'static str)>> {
    let unit = Domain::Interval { a: 0.0, b: 1.0 };
    let ball1 = Domain::UnitBall { d: 1 };
    let ball2 = Domain::UnitBall { d: 2 };
    let q1 = ball1.boundary_quadrature(2, None)?;
    let q2 = ball2.boundary_quadrature(256, None)?;
    let ends = |l, r| BoundaryData::Endpoints { left: l, right: r };
    let s = |k| TestFunction::IntervalSine { k };
    let b = |k| TestFunction::BallBubble { k };
    Ok(vec![
        (unit, KernelConfig::default(), ends(1.0, 3.0), s(1), "γ=(1,3), sin πx"),
        (unit, KernelConfig::default(), ends(-2.0, 0.5), s(2), "γ=(-2,0.5), sin 2πx"),
        (unit, KernelConfig::with_lambda(3.0), ends(1.0, 3.0), s(1), "λ=3, γ=(1,3), sin πx"),
        (unit, KernelConfig::with_lambda(0.5), ends(0.0, 1.0), s(3), "λ=0.5, γ=(0,1), sin 3πx"),
        (
            unit,
            KernelConfig::with_lambda(10.0),
            ends(2.0, -1.0),
            TestFunction::Custom {
                value: |x| x[0] * x[0] * (1.0 - x[0]),
                laplacian: |x| 2.0 - 6.0 * x[0],
                normal_derivative: |y| if y[0] == 0.0 { 0.0 } else { 1.0 },
            },
            "λ=10, γ=(2,-1), x²(1-x)",
        ),
        (ball1, KernelConfig::default(), BoundaryData::from_fn(q1.clone(), |_| 1.0), b(0), "γ=1, 1-x²"),
        (ball1, KernelConfig::default(), BoundaryData::from_fn(q1.clone(), |y| y[0]), b(1), "γ=x, (1-x²)x"),
        (
            ball1,
            KernelConfig::default(),
            BoundaryData::from_fn(q1.clone(), |y| 2.0 - y[0]),
            TestFunction::Custom {
                value: |x| (1.0 - x[0] * x[0]) * x[0].exp(),
                laplacian: |x| -(1.0 + 4.0 * x[0] + x[0] * x[0]) * x[0].exp(),
                normal_derivative: |y| 2.0 * y[0].exp(),
            },
            "γ=2-x, (1-x²)eˣ",
        ),
        (ball1, KernelConfig::default(), BoundaryData::from_fn(q1.clone(), |y| 3.0 * y[0]), b(0), "γ=3x, 1-x²"),
        (
            ball1,
            KernelConfig::default(),
            BoundaryData::from_fn(q1, |y| 1.0 + y[0]),
            TestFunction::Custom {
                value: |x| (0.5 * std::f64::consts::PI * x[0]).cos(),
                laplacian: |x| -0.25 * std::f64::consts::PI.powi(2) * (0.5 * std::f64::consts::PI * x[0]).cos(),
                normal_derivative: |_| 0.5 * std::f64::consts::PI,
            },
            "γ=1+x, cos(πx/2)",
        ),
        (ball2, KernelConfig::default(), BoundaryData::from_fn(q2.clone(), |_| 1.0), b(0), "γ=1, 1-|x|²"),
        (ball2, KernelConfig::default(), BoundaryData::from_fn(q2.clone(), |y| y[0]), b(1), "γ=x₁, (1-|x|²)x₁"),
        (
            ball2,
            KernelConfig::default(),
            BoundaryData::from_fn(q2.clone(), |y| y[0] * y[0] - y[1] * y[1]),
            b(2),
            "γ=x₁²-x₂², (1-|x|²)Re z²",
        ),
        (
            ball2,
            KernelConfig::default(),
            BoundaryData::from_fn(q2.clone(), |y| y[0].exp() * y[1].cos()),
            b(1),
            "γ=e^x₁ cos x₂, (1-|x|²)x₁",
        ),
        (
            ball2,
            KernelConfig::default(),
            BoundaryData::from_fn(q2, |y| y[0].powi(3) + y[1]),
            b(3),
            "γ=x₁³+x₂, (1-|x|²)Re z³",
        ),
    ])
}

fn dirichlet_maps(ctx: &Ctx) -> Result<Outcome> {
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let unit = Domain::Interval { a: 0.0, b: 1.0 };
    let xs: Vec<f64> = (0..10).map(|i| 0.05 + 0.1 * i as f64).collect();

    // interval example: u = γ₀ sinh(√λ(1−x))/sinh√λ + γ₁ sinh(√λx)/sinh√λ, or linear when λ = 0
    let mut worst_closed: f64 = 0.0;
    let mut worst_quad: f64 = 0.0;
    for &lambda in &[0.0, 2.0] {
        let cfg = KernelConfig::with_lambda(lambda);
        let (g0, g1) = (1.5, -0.5);
        let g = BoundaryData::Endpoints { left: g0, right: g1 };
        for &x in &xs {
            let expected = if lambda == 0.0 {
                g0 * (1.0 - x) + g1 * x
            } else {
                let s = lambda.sqrt();
                (g0 * (s * (1.0 - x)).sinh() + g1 * (s * x).sinh()) / s.sinh()
            };
            let v = dirichlet_map_closed_form(&unit, &cfg, &g, &[x])?.unwrap_or(f64::NAN);
            worst_closed = worst_closed.max((v - expected).abs());
            worst_quad = worst_quad.max((dirichlet_map_quadrature(&unit, &cfg, &g, &[x])? - expected).abs());
        }
    }
    // half-line example: u = γ e^{−√λ x}
    let hl = Domain::HalfLine;
    for &lambda in &[0.5, 4.0] {
        let cfg = KernelConfig::with_lambda(lambda);
        for &x in &xs {
            let expected = 2.0 * (-lambda.sqrt() * x).exp();
            let v = dirichlet_map(&hl, &cfg, &BoundaryData::Scalar(2.0), &[x])?;
            worst_closed = worst_closed.max((v - expected).abs());
            let q = dirichlet_map_quadrature(&hl, &cfg, &BoundaryData::Scalar(2.0), &[x])?;
            worst_quad = worst_quad.max((q - expected).abs());
        }
    }
    checks.push(Check::new(
        "closed-forms",
        worst_closed <= 1e-14,
        format!("max error {worst_closed:e} at 10 points per case"),
    ));
    rows.push(CsvRow { bound_rhs: Some(1e-14), ..ctx.row("interval,halfline", None, None, worst_closed) });
    checks.push(Check::new("kernel-pairing-vs-closed-form", worst_quad <= 1e-6, format!("max error {worst_quad:e}")));
    rows.push(CsvRow { bound_rhs: Some(1e-6), ..ctx.row("interval,halfline", None, None, worst_quad) });

    // constant extension through the calibrated Poisson kernel
    let mut worst_const: f64 = 0.0;
    for d in [2usize, 3] {
        let ball = Domain::UnitBall { d };
        let q = ball.boundary_quadrature(if d == 2 { 512 } else { 48 }, None)?;
        let g = BoundaryData::from_fn(q, |_| 1.0);
        for x in [vec![0.0; d], {
            let mut v = vec![0.0; d];
            v[0] = 0.5;
            v
        }] {
            worst_const =
                worst_const.max((dirichlet_map_quadrature(&ball, &KernelConfig::default(), &g, &x)? - 1.0).abs());
        }
    }
    checks.push(Check::new("ball-constant-extension", worst_const <= 1e-10, format!("max |D1 - 1| = {worst_const:e}")));
    rows.push(CsvRow { bound_rhs: Some(1e-10), ..ctx.row("ball2,ball3", None, None, worst_const) });

    let mut details = Vec::new();
    for (dom, kcfg, g, psi, label) in weak_pairs()? {
        let r = weak_residual(&dom, &kcfg, &g, &psi)?;
        checks.push(Check::new(format!("weak-residual {} {label}", dom.tag()), r < 1e-6, format!("{r:e}")));
        rows.push(CsvRow { bound_rhs: Some(1e-6), ratio: Some(r / 1e-6), ..ctx.row(&dom.tag(), None, None, r) });
        details.push(json!({ "domain": dom.tag(), "pair": label, "residual": r }));
    }
    Ok(Outcome {
        domain: "interval,halfline,ball1,ball2".into(),
        rows,
        checks,
        detail: json!({ "weak_residuals": details }),
    })
}

/// Reference values of `(ψ, φ″)` for the three Laplacian cases.
pub fn laplacian_oracles() -> [(LaplacianCase, f64); 3] {
    use std::f64::consts::PI;
    [(LaplacianCase::IntervalPsi1, -2.0 * PI), (LaplacianCase::IntervalPsi2, -PI), (LaplacianCase::HalflineExp, 1.25)]
}

fn laplacian_identities(ctx: &Ctx) -> Result<Outcome> {
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut detail = Vec::new();
    for (case, oracle) in laplacian_oracles() {
        let phi = match case {
            LaplacianCase::HalflineExp => Phi::x_exp(),
            _ => Phi::sine(),
        };
        let (lhs, rhs) = distributional_laplacian_check(case, &phi)?;
        let gap = (lhs - rhs).abs();
        checks.push(Check::new(
            format!("{} lhs = rhs", case.name()),
            gap <= 1e-8,
            format!("lhs = (ψ, φ'') = {lhs:.12}, rhs = {rhs:.12}"),
        ));
        checks.push(Check::new(
            format!("{} rhs = reference", case.name()),
            (rhs - oracle).abs() <= 1e-8,
            format!("rhs = {rhs:.12}, reference {oracle:.12}"),
        ));
        let dom = if case == LaplacianCase::HalflineExp { "halfline" } else { "interval" };
        rows.push(CsvRow { bound_rhs: Some(rhs), ratio: Some(lhs / rhs), ..ctx.row(dom, None, None, lhs) });
        detail.push(json!({ "case": case.name(), "lhs": lhs, "rhs": rhs, "reference": oracle }));
    }
    Ok(Outcome { domain: "interval,halfline".into(), rows, checks, detail: json!(detail) })
}

/// Draws one realization with paths on `grid` for an `H = 1/2` Gaussian family.
fn sample_paths(spec: &BoundaryNoiseSpec, grid: &TimeGrid, seed: u64) -> Result<NoiseRealization> {
    match spec {
        BoundaryNoiseSpec::HomogeneousWiener { .. } => sample_homogeneous_coeffs(spec, grid, seed),
        _ => {
            let paths = sample_fbm_paths(spec.hurst(), grid, spec.mode_count(), seed)?;
            Ok(NoiseRealization { paths: Some(paths), ..Default::default() })
        }
    }
}

fn points_in(dom: &Domain, pts: &[Vec<f64>]) -> Result<()> {
    for p in pts {
        dom.require_interior(p).map_err(|e| Error::Config(format!("probe.points: {e}")))?;
    }
    Ok(())
}

fn elliptic_ito(ctx: &Ctx) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let dom = cfg.domain()?;
    let pts = cfg.probe.points.clone().unwrap_or_default();
    points_in(&dom, &pts)?;
    let anchor = dom.default_anchor();
    let spec = cfg.noise()?.build(&dom, &anchor, 1.0, &ctx.base)?;
    let plan = EllipticPlan::new(&dom, &cfg.kernel, &spec, &pts)?;
    let est = mc_second_moments(
        |s| {
            let r = sample_elliptic_white(&spec, s)?;
            Ok(plan.evaluate(&r))
        },
        cfg.mc.n,
        ctx.seed,
        ctx.workers,
    )?;
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for ((x, e), trunc) in pts.iter().zip(&est).zip(plan.truncated_variance()) {
        let exact = analytic_variance_elliptic(&dom, &cfg.kernel, &spec, x)?;
        let z = (e.second_moment - exact) / e.stderr;
        let dist = dom.dist_to_boundary(x)?;
        checks.push(Check::new(
            format!("x = {x:?}"),
            z.abs() <= 4.0,
            format!(
                "MC {:.6} ± {:.6}, analytic {exact:.6}, truncated {trunc:.6}, z = {z:.3}",
                e.second_moment, e.stderr
            ),
        ));
        rows.push(CsvRow {
            stderr: Some(e.stderr),
            bound_rhs: Some(exact),
            ratio: Some(e.second_moment / exact),
            n: e.n,
            ..ctx.row(&dom.tag(), Some(dist), None, e.second_moment)
        });
    }
    Ok(Outcome { domain: dom.tag(), rows, checks, detail: json!({ "estimates": est }) })
}

fn parabolic_ito(ctx: &Ctx) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let dom = cfg.domain()?;
    let pts = cfg.probe.points.clone().unwrap_or_default();
    points_in(&dom, &pts)?;
    let t = cfg.probe.t.unwrap_or(1.0);
    let steps = cfg.probe.steps.unwrap_or(512);
    let spec = cfg.noise()?.build(&dom, &dom.default_anchor(), 1.0, &ctx.base)?;
    let rule = ConvolutionRule::for_hurst(spec.hurst()).map_err(|e| Error::Config(format!("noise.hurst: {e}")))?;
    if rule != ConvolutionRule::ItoLeftPoint {
        return config("noise.hurst: the Itô check needs H = 1/2");
    }
    let plan = ConvolutionPlan::new(&dom, &cfg.kernel, &spec, &TimeGrid::uniform(t, steps)?, rule, &pts)?;
    let est = mc_second_moments(
        |s| {
            let xi = sample_paths(&spec, plan.grid(), s)?;
            mild_solution(&plan, &spec, &xi, None)
        },
        cfg.mc.n,
        ctx.seed,
        ctx.workers,
    )?;
    let discrete = plan.discrete_variance();
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for ((x, e), disc) in pts.iter().zip(&est).zip(&discrete) {
        let exact = analytic_variance_parabolic(&dom, &cfg.kernel, &spec, t, x)?;
        let z = (e.second_moment - exact) / e.stderr;
        let dist = dom.dist_to_boundary(x)?;
        checks.push(Check::new(
            format!("x = {x:?}"),
            z.abs() <= 4.0,
            format!("MC {:.6} ± {:.6}, analytic {exact:.6}, discrete {disc:.6}, z = {z:.3}", e.second_moment, e.stderr),
        ));
        rows.push(CsvRow {
            stderr: Some(e.stderr),
            bound_rhs: Some(exact),
            ratio: Some(e.second_moment / exact),
            n: e.n,
            ..ctx.row(&dom.tag(), Some(dist), Some(t), e.second_moment)
        });
    }
    Ok(Outcome {
        domain: dom.tag(),
        rows,
        checks,
        detail: json!({
            "estimates": est,
            "discrete_variance": discrete,
            "refinements": plan.refinements(),
            "tail_fraction": plan.tail_fraction(),
            "steps": plan.grid().len(),
        }),
    })
}

fn probe_setup(cfg: &ExperimentConfig, dom: &Domain) -> Result<(Vec<f64>, Vec<f64>, Vec<Vec<f64>>)> {
    let distances = cfg.probe.distances.clone().unwrap_or_else(|| DEFAULT_DISTANCES.to_vec());
    let anchor = cfg.probe.anchor.clone().unwrap_or_else(|| dom.default_anchor());
    dom.require_boundary(&anchor).map_err(|e| Error::Config(format!("probe.anchor: {e}")))?;
    let probes =
        dom.normal_probe_line(&anchor, &distances).map_err(|e| Error::Config(format!("probe.distances: {e}")))?;
    Ok((distances, anchor, probes))
}

fn rate(ctx: &Ctx, parabolic: bool) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let dom = cfg.domain()?;
    let noise = cfg.noise()?;
    let (distances, anchor, probes) = probe_setup(cfg, &dom)?;
    let min_dist = distances.iter().cloned().fold(f64::INFINITY, f64::min);
    let spec = noise.build(&dom, &anchor, min_dist, &ctx.base)?;
    let kind = bound_for(&cfg.experiment.name, noise.family, &dom)?;
    let t = if parabolic { cfg.probe.t } else { None };
    let kcfg = &cfg.kernel;
    let analytic: Vec<f64> = probes
        .par_iter()
        .map(|x| match (&spec, t) {
            (BoundaryNoiseSpec::PoissonMeasure { .. }, _) => levy_second_moment(&dom, kcfg, &spec, x, t),
            (_, None) => analytic_variance_elliptic(&dom, kcfg, &spec, x),
            (_, Some(t)) => analytic_variance_parabolic(&dom, kcfg, &spec, t, x),
        })
        .collect::<Result<_>>()?;
    let mut checks = Vec::new();
    let (values, stderrs, n) = if cfg.mc.n > 0 {
        let est = if parabolic {
            let t = t.unwrap_or(1.0);
            let rule = ConvolutionRule::for_hurst(spec.hurst())?;
            let grid = TimeGrid::uniform(t, cfg.probe.steps.unwrap_or(512))?;
            let plan = ConvolutionPlan::new(&dom, kcfg, &spec, &grid, rule, &probes)?;
            mc_second_moments(
                |s| {
                    let xi = if spec.is_gaussian() {
                        sample_paths(&spec, plan.grid(), s)?
                    } else {
                        sample_poisson_measure(&spec, t, s)?
                    };
                    mild_solution(&plan, &spec, &xi, None)
                },
                cfg.mc.n,
                ctx.seed,
                ctx.workers,
            )?
        } else if spec.is_gaussian() {
            let plan = EllipticPlan::new(&dom, kcfg, &spec, &probes)?;
            mc_second_moments(
                |s| Ok(plan.evaluate(&sample_elliptic_white(&spec, s)?)),
                cfg.mc.n,
                ctx.seed,
                ctx.workers,
            )?
        } else {
            mc_second_moments(
                |s| {
                    let r = sample_poisson_measure(&spec, 1.0, s)?;
                    probes.iter().map(|x| elliptic_field(&dom, kcfg, &spec, &r, x)).collect()
                },
                cfg.mc.n,
                ctx.seed,
                ctx.workers,
            )?
        };
        for ((d, e), a) in distances.iter().zip(&est).zip(&analytic) {
            let z = (e.second_moment - a) / e.stderr;
            checks.push(Check::new(
                format!("mc-vs-analytic dist {d}"),
                z.abs() <= 4.0 || (e.stderr == 0.0 && e.second_moment == *a),
                format!("MC {:.6e} ± {:.2e}, analytic {a:.6e}", e.second_moment, e.stderr),
            ));
        }
        (
            est.iter().map(|e| e.second_moment).collect::<Vec<_>>(),
            est.iter().map(|e| Some(e.stderr)).collect::<Vec<_>>(),
            cfg.mc.n,
        )
    } else {
        (analytic.clone(), vec![None; analytic.len()], 0)
    };
    let bctx = BoundContext { domain: &dom, spec: &spec, t, alpha: None };
    let rhs: Vec<f64> = probes.iter().map(|x| bound_rhs(kind, &bctx, x)).collect::<Result<_>>()?;
    let mut report = fit_blowup(&distances, &values, kind.fit_kind(&dom))?;
    check_bound(&mut report, kind, &rhs)?;
    checks.push(Check::new(
        format!("{} stability", kind.name()),
        report.stable,
        format!("bound constant {:.6e}, tail growth {:.4}", report.bound_constant, report.tail_growth),
    ));
    let rows = distances
        .iter()
        .zip(&values)
        .zip(&stderrs)
        .zip(&report.bound_rhs)
        .zip(&report.ratios)
        .map(|((((d, v), se), r), q)| CsvRow {
            stderr: *se,
            bound_rhs: Some(*r),
            ratio: Some(*q),
            n,
            ..ctx.row(&dom.tag(), Some(*d), t, *v)
        })
        .collect();
    Ok(Outcome {
        domain: dom.tag(),
        rows,
        checks,
        detail: json!({
            "report": report,
            "statement": kind.statement(),
            "analytic": analytic,
            "noise_modes": spec.mode_count(),
        }),
    })
}

fn young(ctx: &Ctx) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let dom = cfg.domain()?;
    let noise = cfg.noise()?;
    let ycfg = cfg.young.as_ref().ok_or_else(|| Error::Config("young section is required".into()))?;
    let hurst = noise.hurst.unwrap_or(0.5);
    let alpha = ycfg.alpha;
    let t = cfg.probe.t.unwrap_or(1.0);
    let (distances, anchor, probes) = probe_setup(cfg, &dom)?;
    let spec = noise.build(&dom, &anchor, 1.0, &ctx.base)?;
    let BoundaryNoiseSpec::SignedMeasureSeries { measures, .. } = &spec else {
        return config("noise.family: young-bound needs signed-series noise");
    };
    let terms = cfg.kernel.series_terms;
    // f(s) = (ν_k, ∂G/∂n(t − s, x, ·)), continuous on [0, t] with f(t) = 0
    let integrand = |m: &DiscreteMeasure, x: &[f64], s: f64| -> f64 {
        let lag = t - s;
        if lag <= 0.0 {
            return 0.0;
        }
        m.atoms.iter().map(|a| a.mass * heat_normal_unchecked(&dom, terms, lag, x, &a.point).unwrap_or(f64::NAN)).sum()
    };
    let grid = TimeGrid::uniform(t, ycfg.steps)?;
    let generator = FbmGenerator::new(hurst, &grid)?;
    let pairs = ycfg.pairs;
    let results: Vec<(usize, f64, f64, f64, f64)> = (0..pairs)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(ctx.seed.wrapping_add(i as u64));
            let mut path = vec![0.0; grid.len()];
            generator.sample_into(&mut rng, &mut path);
            let p = i % probes.len();
            let m = &measures[i % measures.len()];
            let f = |s: f64| integrand(m, &probes[p], s);
            let sum = young_sum(&f, grid.nodes(), &path);
            let b = young_bound(&f, grid.nodes(), &path, alpha, hurst)?;
            Ok((p, sum, b.integral_bound, b.lambda_alpha, b.i_alpha))
        })
        .collect::<Result<_>>()?;
    let held = results.iter().filter(|r| r.1.abs() <= 1.05 * r.2).count();
    let needed = (pairs * 99).div_ceil(100);
    let mut checks = vec![Check::new(
        "young-inequality",
        held >= needed,
        format!("|Σ f ΔW| <= 1.05 Λ_α I_α in {held} of {pairs} pairs (need {needed})"),
    )];
    let i1 = i_alpha(&|_| 1.0, 1.0, alpha);
    checks.push(Check::new(
        "i-alpha-of-one",
        (i1 - 1.0 / (1.0 - alpha)).abs() <= 1e-8,
        format!("I_α(1) = {i1:.12}, expected {:.12}", 1.0 / (1.0 - alpha)),
    ));
    let rows = results
        .iter()
        .map(|&(p, sum, b, _, _)| CsvRow {
            bound_rhs: Some(b),
            ratio: Some(sum.abs() / b),
            n: 1,
            ..ctx.row(&dom.tag(), Some(distances[p]), Some(t), sum.abs())
        })
        .collect();

    // boundary behaviour of the deterministic factor I_α(f_x)
    let rate_d: Vec<f64> = DEFAULT_DISTANCES.to_vec();
    let rate_x = dom.normal_probe_line(&anchor, &rate_d)?;
    let i_vals: Vec<f64> = rate_x.par_iter().map(|x| i_alpha(&|s| integrand(&measures[0], x, s), t, alpha)).collect();
    let bctx = BoundContext { domain: &dom, spec: &spec, t: Some(t), alpha: Some(alpha) };
    let rhs: Vec<f64> =
        rate_x.iter().map(|x| bound_rhs(BoundKind::FractionalYoung, &bctx, x)).collect::<Result<_>>()?;
    let mut report = fit_blowup(&rate_d, &i_vals, FitKind::PowerLaw)?;
    check_bound(&mut report, BoundKind::FractionalYoung, &rhs)?;
    Ok(Outcome {
        domain: dom.tag(),
        rows,
        checks,
        detail: json!({
            "pairs": results.iter().map(|r| json!({"probe": r.0, "sum": r.1, "bound": r.2, "lambda_alpha": r.3, "i_alpha": r.4})).collect::<Vec<_>>(),
            "i_alpha_rate": report,
            "statement": BoundKind::FractionalYoung.statement(),
        }),
    })
}

fn time_integral(ctx: &Ctx) -> Result<Outcome> {
    let t = ctx.cfg.probe.t.unwrap_or(1.0);
    let r_grid: Vec<f64> = (0..=40).map(|i| 10f64.powf(-3.0 + 0.1 * i as f64)).collect();
    // K₂ from the fitted bound on the normal derivative's kernel, plus K₂ = 1
    let unit = Domain::Interval { a: 0.0, b: 1.0 };
    let fit = check_gaussian_bound(
        &unit,
        Derivative { time_order: 0, space_axis: Some(0) },
        1.0,
        &BoundProbe::default_for(&unit, 1.0)?,
    )?;
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut reports = Vec::new();
    for k2 in [1.0, fit.k2] {
        for d in 1..=3 {
            let rep = check_time_integral(d, k2, t, &r_grid)?;
            checks.push(Check::new(
                format!("d={d} K2={k2:.4} quadrature"),
                rep.max_relative_error <= 1e-10,
                format!("max relative error {:.3e}", rep.max_relative_error),
            ));
            checks.push(Check::new(
                format!("d={d} K2={k2:.4} bound"),
                rep.holds,
                format!("sup r^(2d) LHS = {:.6e} <= Γ(d)(2K2)^d = {:.6e}", rep.max_scaled, rep.bound),
            ));
            rows.push(CsvRow {
                bound_rhs: Some(rep.bound),
                ratio: Some(rep.max_scaled / rep.bound),
                ..ctx.row(&format!("d{d}"), None, Some(t), rep.max_scaled)
            });
            reports.push(rep);
        }
    }
    Ok(Outcome { domain: "-".into(), rows, checks, detail: json!({ "fitted_k2": fit.k2, "reports": reports }) })
}

fn fbm_covariance_check(ctx: &Ctx) -> Result<Outcome> {
    let fcfg = ctx.cfg.fbm.as_ref().ok_or_else(|| Error::Config("fbm section is required".into()))?;
    let grid = TimeGrid::from_nodes(fcfg.grid.clone()).map_err(|e| Error::Config(format!("fbm.grid: {e}")))?;
    let n = grid.len();
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut detail = Vec::new();
    for &h in &fcfg.hurst {
        let generator = FbmGenerator::new(h, &grid)?;
        let est = mc_second_moments(
            |s| {
                let mut rng = rng_for(s);
                let mut w = vec![0.0; n];
                generator.sample_into(&mut rng, &mut w);
                let mut prods = Vec::with_capacity(n * (n + 1) / 2);
                for i in 0..n {
                    for j in 0..=i {
                        prods.push(w[i] * w[j]);
                    }
                }
                Ok(prods)
            },
            ctx.cfg.mc.n,
            ctx.seed,
            ctx.workers,
        )?;
        let nodes = grid.nodes();
        let mut k = 0;
        let mut worst_z: f64 = 0.0;
        for i in 0..n {
            for j in 0..=i {
                let exact = fbm_covariance(h, nodes[i], nodes[j]);
                let e = &est[k];
                let z = (e.mean - exact) / e.mean_stderr;
                worst_z = worst_z.max(z.abs());
                rows.push(CsvRow {
                    stderr: Some(e.mean_stderr),
                    bound_rhs: Some(exact),
                    ratio: Some(e.mean / exact),
                    n: e.n,
                    ..ctx.row(&format!("H={h}"), Some(nodes[i]), Some(nodes[j]), e.mean)
                });
                k += 1;
            }
        }
        checks.push(Check::new(format!("H={h}"), worst_z <= 4.0, format!("max |z| = {worst_z:.3}")));
        detail.push(json!({ "hurst": h, "max_z": worst_z, "jitter": generator.jitter() }));
    }
    Ok(Outcome { domain: "-".into(), rows, checks, detail: json!(detail) })
}
