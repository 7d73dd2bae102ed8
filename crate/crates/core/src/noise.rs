//! Boundary noise families as finite truncations, and their samplers.
//!
//! Every sampler is a pure function of `(spec, seed)`: the generator is a
//! ChaCha8 stream seeded from the `u64`, so identical inputs give
//! bit-identical realizations on every platform.

use nalgebra::{Cholesky, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::domains::{BoundaryQuadrature, TimeGrid};
use crate::error::{config, usage, Error, Result};

pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Orthonormal family in `L²(∂O, ν)` used to expand white noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryBasis {
    /// Normalized indicators of the quadrature cells, `e_i = 1_{y_i} / √w_i`.
    /// On the two-point interval boundary this is the indicator basis.
    Nodal,
    /// `1/√(2π), cos(nθ)/√π, sin(nθ)/√π` on the unit circle with arc length.
    Fourier,
}

/// Signed measure with finitely many atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub atoms: Vec<Atom>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub point: Vec<f64>,
    pub mass: f64,
}

impl DiscreteMeasure {
    pub fn total_variation(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass.abs()).sum()
    }

    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.atoms.iter().map(|a| a.mass * f(&a.point)).sum()
    }
}

/// One atom of a discretized spectral measure on `R^m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralAtom {
    pub frequency: Vec<f64>,
    pub weight: f64,
}

/// Mark function `ρ(y) = Σ_k c_k |y|^k` (polynomial growth in the boundary point).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mark {
    pub coeffs: Vec<f64>,
}

impl Mark {
    pub fn constant(c: f64) -> Self {
        Self { coeffs: vec![c] }
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c)
    }
}

/// How a spectral atom enters the real field: a cosine/sine pair for `±η`,
/// or a lone constant mode for `η = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpectralMode {
    Constant { atom: usize },
    Pair { cos_atom: usize, sin_atom: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum BoundaryNoiseSpec {
    /// Gaussian white noise on the boundary with intensity `ν`.
    WhiteNoise { nu: BoundaryQuadrature, basis: BoundaryBasis, order: usize },
    /// `Σ_k W_k^H(t) e_k ν` with independent fractional Brownian motions.
    CylFractionalWiener { nu: BoundaryQuadrature, basis: BoundaryBasis, order: usize, hurst: f64 },
    /// `Σ_k γ_k ν_k` (elliptic) or `Σ_k W_k^H ν_k` (parabolic).
    SignedMeasureSeries { measures: Vec<DiscreteMeasure>, hurst: f64, tail_mass: Option<f64> },
    /// Spatially homogeneous Wiener process on the half-space boundary.
    HomogeneousWiener { atoms: Vec<SpectralAtom>, modes: Vec<SpectralMode> },
    /// Poisson random measure with intensity `ν` (times `dt` in the parabolic case)
    /// and marks `ρ(y)`.
    PoissonMeasure { intensity: Vec<Atom>, mark: Mark },
}

impl BoundaryNoiseSpec {
    pub fn white_noise(nu: BoundaryQuadrature, basis: BoundaryBasis, order: usize) -> Result<Self> {
        let order = check_basis(&nu, basis, order)?;
        Ok(Self::WhiteNoise { nu, basis, order })
    }

    pub fn cylindrical_fbm(nu: BoundaryQuadrature, basis: BoundaryBasis, order: usize, hurst: f64) -> Result<Self> {
        check_hurst(hurst)?;
        let order = check_basis(&nu, basis, order)?;
        Ok(Self::CylFractionalWiener { nu, basis, order, hurst })
    }

    pub fn signed_series(measures: Vec<DiscreteMeasure>, hurst: f64, tail_mass: Option<f64>) -> Result<Self> {
        check_hurst(hurst)?;
        let s: f64 = measures.iter().map(|m| m.total_variation().powi(2)).sum();
        if !s.is_finite() {
            return config("signed measure series needs a finite sum of squared total variations");
        }
        if let Some(t) = tail_mass {
            if !(t >= 0.0) || !t.is_finite() {
                return config(format!("tail mass must be finite and nonnegative, got {t}"));
            }
        }
        Ok(Self::SignedMeasureSeries { measures, hurst, tail_mass })
    }

    pub fn homogeneous(atoms: Vec<SpectralAtom>) -> Result<Self> {
        let modes = pair_spectral_atoms(&atoms)?;
        Ok(Self::HomogeneousWiener { atoms, modes })
    }

    pub fn poisson(intensity: Vec<Atom>, mark: Mark) -> Result<Self> {
        if intensity.iter().any(|a| !(a.mass >= 0.0)) {
            return config("Poisson intensity masses must be nonnegative");
        }
        let total: f64 = intensity.iter().map(|a| a.mass).sum();
        if !total.is_finite() {
            return config("Poisson intensity has infinite total mass; truncate it first");
        }
        Ok(Self::PoissonMeasure { intensity, mark })
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            Self::WhiteNoise { .. } => "white",
            Self::CylFractionalWiener { .. } => "cylindrical-fbm",
            Self::SignedMeasureSeries { .. } => "signed-series",
            Self::HomogeneousWiener { .. } => "homogeneous",
            Self::PoissonMeasure { .. } => "poisson",
        }
    }

    /// Number of independent Gaussian modes (`K`); zero for Poisson noise.
    pub fn mode_count(&self) -> usize {
        match self {
            Self::WhiteNoise { order, .. } | Self::CylFractionalWiener { order, .. } => *order,
            Self::SignedMeasureSeries { measures, .. } => measures.len(),
            Self::HomogeneousWiener { atoms, .. } => atoms.len(),
            Self::PoissonMeasure { .. } => 0,
        }
    }

    pub fn hurst(&self) -> f64 {
        match self {
            Self::CylFractionalWiener { hurst, .. } | Self::SignedMeasureSeries { hurst, .. } => *hurst,
            _ => 0.5,
        }
    }

    pub fn is_gaussian(&self) -> bool {
        !matches!(self, Self::PoissonMeasure { .. })
    }

    /// `Σ_k ‖ν_k‖²_Var` over the stored truncation, for signed series.
    pub fn variation_square_sum(&self) -> Option<f64> {
        match self {
            Self::SignedMeasureSeries { measures, .. } => {
                Some(measures.iter().map(|m| m.total_variation().powi(2)).sum())
            }
            _ => None,
        }
    }

    pub fn total_intensity(&self) -> Option<f64> {
        match self {
            Self::PoissonMeasure { intensity, .. } => Some(intensity.iter().map(|a| a.mass).sum()),
            _ => None,
        }
    }
}

fn check_hurst(h: f64) -> Result<()> {
    if h > 0.0 && h < 1.0 {
        Ok(())
    } else {
        config(format!("Hurst index must lie in (0, 1), got {h}"))
    }
}

fn check_basis(nu: &BoundaryQuadrature, basis: BoundaryBasis, order: usize) -> Result<usize> {
    if nu.is_empty() {
        return config("white noise needs a nonempty boundary quadrature");
    }
    if nu.weights.iter().any(|&w| !(w > 0.0)) {
        return config("white noise intensity weights must be positive");
    }
    match basis {
        BoundaryBasis::Nodal => Ok(nu.len()),
        BoundaryBasis::Fourier => {
            let n = nu.len();
            let on_circle =
                nu.nodes.iter().all(|y| y.len() == 2 && ((y[0] * y[0] + y[1] * y[1]).sqrt() - 1.0).abs() < 1e-12);
            let w0 = nu.weights[0];
            if !on_circle || nu.weights.iter().any(|&w| (w - w0).abs() > 1e-12 * w0) {
                return config("Fourier basis requires the uniform unit-circle quadrature");
            }
            if order == 0 || order >= n {
                return config(format!("Fourier order must be in [1, {n}) for {n} nodes, got {order}"));
            }
            Ok(order)
        }
    }
}

/// Group a symmetric atom set into real modes; rejects asymmetric sets.
pub fn pair_spectral_atoms(atoms: &[SpectralAtom]) -> Result<Vec<SpectralMode>> {
    let mut used = vec![false; atoms.len()];
    let mut modes = Vec::new();
    for i in 0..atoms.len() {
        if used[i] {
            continue;
        }
        let a = &atoms[i];
        if !(a.weight >= 0.0) {
            return config("spectral atom weights must be nonnegative");
        }
        if a.frequency.iter().all(|&v| v == 0.0) {
            used[i] = true;
            modes.push(SpectralMode::Constant { atom: i });
            continue;
        }
        let partner = (0..atoms.len()).find(|&j| {
            !used[j]
                && j != i
                && atoms[j].frequency.len() == a.frequency.len()
                && atoms[j].frequency.iter().zip(&a.frequency).all(|(p, q)| (p + q).abs() <= 1e-12)
                && (atoms[j].weight - a.weight).abs() <= 1e-12 * a.weight.abs().max(1.0)
        });
        match partner {
            Some(j) => {
                used[i] = true;
                used[j] = true;
                modes.push(SpectralMode::Pair { cos_atom: i, sin_atom: j });
            }
            None => {
                return config(format!("spectral measure is not symmetric: atom at {:?} has no mirror", a.frequency))
            }
        }
    }
    Ok(modes)
}

/// Symmetric midpoint discretization of a density on `R` over `[-cutoff, cutoff]`.
pub fn spectral_atoms_1d(density: impl Fn(f64) -> f64, cutoff: f64, half_count: usize) -> Vec<SpectralAtom> {
    let h = cutoff / half_count as f64;
    let mut atoms = Vec::with_capacity(2 * half_count);
    for j in 0..half_count {
        let eta = (j as f64 + 0.5) * h;
        let w = density(eta) * h;
        atoms.push(SpectralAtom { frequency: vec![eta], weight: w });
        atoms.push(SpectralAtom { frequency: vec![-eta], weight: w });
    }
    atoms
}

/// Flat spectral density `(2π)^{-m/2}` of boundary white noise, on `R^1`.
pub fn white_spectral_density(m: usize) -> f64 {
    (2.0 * PI).powf(-(m as f64) / 2.0)
}

/// Paths sampled on a time grid, row-major `K × |grid|`, all starting at 0
/// at the grid origin.
#[derive(Debug, Clone, PartialEq)]
pub struct PathMatrix {
    pub grid: TimeGrid,
    pub rows: usize,
    pub values: Vec<f64>,
}

impl PathMatrix {
    pub fn row(&self, k: usize) -> &[f64] {
        let n = self.grid.len();
        &self.values[k * n..(k + 1) * n]
    }

    /// Increments `W(s_{j+1}) − W(s_j)` of row `k`, with `W(0) = 0`.
    pub fn increments(&self, k: usize) -> Vec<f64> {
        let row = self.row(k);
        let mut prev = 0.0;
        row.iter()
            .map(|&v| {
                let d = v - prev;
                prev = v;
                d
            })
            .collect()
    }

    /// Multiplies every path by `a`.
    pub fn scaled(&self, a: f64) -> Self {
        Self { grid: self.grid.clone(), rows: self.rows, values: self.values.iter().map(|v| a * v).collect() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonPoint {
    pub time: f64,
    pub location: Vec<f64>,
    pub mark: f64,
}

/// One sampled draw of a boundary noise.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NoiseRealization {
    pub coefficients: Vec<f64>,
    pub paths: Option<PathMatrix>,
    pub points: Vec<PoissonPoint>,
}

impl NoiseRealization {
    pub fn zero_coefficients(k: usize) -> Self {
        Self { coefficients: vec![0.0; k], ..Default::default() }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            coefficients: self.coefficients.iter().map(|c| a * c).collect(),
            paths: self.paths.as_ref().map(|p| p.scaled(a)),
            points: self.points.iter().map(|p| PoissonPoint { mark: a * p.mark, ..p.clone() }).collect(),
        }
    }
}

/// `K` independent standard normal coefficients for an elliptic Gaussian draw.
///
/// Accepts every Gaussian family: for a process-valued family the draw is the
/// time-one value, whose coefficients are again i.i.d. `N(0, 1)`.
pub fn sample_elliptic_white(spec: &BoundaryNoiseSpec, seed: u64) -> Result<NoiseRealization> {
    if !spec.is_gaussian() {
        return usage("elliptic Gaussian sampler called with Poisson noise; use sample_poisson_measure");
    }
    let mut rng = rng_for(seed);
    let coefficients = (0..spec.mode_count()).map(|_| rng.sample(StandardNormal)).collect();
    Ok(NoiseRealization { coefficients, ..Default::default() })
}

/// Exact Gaussian sampler for fractional Brownian motion on a fixed grid.
///
/// Factorizes the covariance `R(t,s) = ½(t^{2H} + s^{2H} − |t−s|^{2H})` once
/// (Cholesky, with diagonal jitter up to `1e-12` if rounding breaks positive
/// definiteness); for `H = 1/2` it uses independent increments directly.
#[derive(Debug, Clone)]
pub struct FbmGenerator {
    hurst: f64,
    grid: TimeGrid,
    factor: Option<DMatrix<f64>>,
    step_scale: Vec<f64>,
    jitter: f64,
}

pub fn fbm_covariance(hurst: f64, t: f64, s: f64) -> f64 {
    let h2 = 2.0 * hurst;
    0.5 * (t.powf(h2) + s.powf(h2) - (t - s).abs().powf(h2))
}

impl FbmGenerator {
    pub fn new(hurst: f64, grid: &TimeGrid) -> Result<Self> {
        check_hurst(hurst)?;
        if grid.is_empty() {
            return config("fBM sampler needs a nonempty grid");
        }
        if hurst == 0.5 {
            let step_scale = grid.cells().map(|(a, b)| (b - a).sqrt()).collect();
            return Ok(Self { hurst, grid: grid.clone(), factor: None, step_scale, jitter: 0.0 });
        }
        let n = grid.len();
        let nodes = grid.nodes();
        let cov = DMatrix::from_fn(n, n, |i, j| fbm_covariance(hurst, nodes[i], nodes[j]));
        let mut jitter = 0.0;
        let mut last_diag = String::new();
        for attempt in 0..5 {
            let mut m = cov.clone();
            if attempt > 0 {
                jitter = 10f64.powi(attempt - 16);
                for i in 0..n {
                    m[(i, i)] += jitter;
                }
            }
            match Cholesky::new(m) {
                Some(ch) => {
                    return Ok(Self {
                        hurst,
                        grid: grid.clone(),
                        factor: Some(ch.unpack()),
                        step_scale: Vec::new(),
                        jitter,
                    })
                }
                None => {
                    let min_diag = (0..n).map(|i| cov[(i, i)]).fold(f64::INFINITY, f64::min);
                    last_diag = format!("{n}x{n} covariance, H={hurst}, min diagonal {min_diag:e}");
                }
            }
        }
        Err(Error::Factorization { jitter, diagnostic: last_diag })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Diagonal jitter that was needed for the factorization (0 if none).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Writes one path (values at the grid nodes) into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let n = self.grid.len();
        debug_assert_eq!(out.len(), n);
        match &self.factor {
            None => {
                let mut acc = 0.0;
                for (o, s) in out.iter_mut().zip(&self.step_scale) {
                    let z: f64 = rng.sample(StandardNormal);
                    acc += s * z;
                    *o = acc;
                }
            }
            Some(l) => {
                let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                for i in 0..n {
                    let mut s = 0.0;
                    for j in 0..=i {
                        s += l[(i, j)] * z[j];
                    }
                    out[i] = s;
                }
            }
        }
    }

    pub fn sample_paths<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> PathMatrix {
        let n = self.grid.len();
        let mut values = vec![0.0; count * n];
        for row in values.chunks_mut(n) {
            self.sample_into(rng, row);
        }
        PathMatrix { grid: self.grid.clone(), rows: count, values }
    }
}

/// `count` independent fBM paths with Hurst index `hurst` on `grid`.
pub fn sample_fbm_paths(hurst: f64, grid: &TimeGrid, count: usize, seed: u64) -> Result<PathMatrix> {
    let generator = FbmGenerator::new(hurst, grid)?;
    let mut rng = rng_for(seed);
    Ok(generator.sample_paths(&mut rng, count))
}

/// Independent standard Brownian paths, one per spectral atom, for a
/// homogeneous Wiener noise.
pub fn sample_homogeneous_coeffs(spec: &BoundaryNoiseSpec, grid: &TimeGrid, seed: u64) -> Result<NoiseRealization> {
    let BoundaryNoiseSpec::HomogeneousWiener { atoms, .. } = spec else {
        return usage(format!("homogeneous sampler called with {} noise", spec.family_name()));
    };
    pair_spectral_atoms(atoms)?;
    let paths = sample_fbm_paths(0.5, grid, atoms.len(), seed)?;
    Ok(NoiseRealization { paths: Some(paths), ..Default::default() })
}

/// Poisson random measure on `(0, T] × ∂O` with intensity `dt ⊗ ν`.
///
/// Point count is `Poisson(T·Λ)`, times uniform on `(0, T]`, locations i.i.d.
/// proportional to the intensity atoms, marks `ρ(y)`.
pub fn sample_poisson_measure(spec: &BoundaryNoiseSpec, horizon: f64, seed: u64) -> Result<NoiseRealization> {
    let BoundaryNoiseSpec::PoissonMeasure { intensity, mark } = spec else {
        return usage(format!("Poisson sampler called with {} noise", spec.family_name()));
    };
    if !(horizon > 0.0) {
        return config(format!("Poisson horizon must be positive, got {horizon}"));
    }
    let total: f64 = intensity.iter().map(|a| a.mass).sum();
    if !total.is_finite() {
        return config("Poisson intensity has infinite total mass; truncate it first");
    }
    let mut rng = rng_for(seed);
    let mean = total * horizon;
    if mean <= 0.0 {
        return Ok(NoiseRealization::default());
    }
    let count = Poisson::new(mean).map_err(|e| Error::Config(format!("Poisson law: {e}")))?.sample(&mut rng) as usize;
    let mut cumulative = Vec::with_capacity(intensity.len());
    let mut acc = 0.0;
    for a in intensity {
        acc += a.mass;
        cumulative.push(acc);
    }
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let u: f64 = rng.random::<f64>();
        let time = horizon * (1.0 - u);
        let target = rng.random::<f64>() * total;
        let idx = cumulative.partition_point(|&c| c <= target).min(intensity.len() - 1);
        let location = intensity[idx].point.clone();
        let m = mark.eval(&location);
        points.push(PoissonPoint { time, location, mark: m });
    }
    Ok(NoiseRealization { points, ..Default::default() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::Domain;

    fn circle(n: usize) -> BoundaryQuadrature {
        Domain::unit_ball(2).unwrap().boundary_quadrature(n, None).unwrap()
    }

    #[test]
    fn elliptic_white_is_deterministic() {
        let spec = BoundaryNoiseSpec::white_noise(circle(16), BoundaryBasis::Fourier, 3).unwrap();
        let a = sample_elliptic_white(&spec, 42).unwrap();
        let b = sample_elliptic_white(&spec, 42).unwrap();
        assert_eq!(a.coefficients.len(), 3);
        assert_eq!(a, b);
        assert_ne!(a, sample_elliptic_white(&spec, 43).unwrap());
    }

    #[test]
    fn elliptic_white_first_moments() {
        let spec = BoundaryNoiseSpec::white_noise(circle(16), BoundaryBasis::Fourier, 3).unwrap();
        let n = 100_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for seed in 0..n {
            let g = sample_elliptic_white(&spec, seed).unwrap().coefficients[0];
            s1 += g;
            s2 += g * g;
        }
        let mean = s1 / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!(mean.abs() < 3.0 / (n as f64).sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn wrong_family_is_usage_error() {
        let spec = BoundaryNoiseSpec::poisson(vec![], Mark::constant(1.0)).unwrap();
        assert!(matches!(sample_elliptic_white(&spec, 0), Err(Error::Usage(_))));
        let white = BoundaryNoiseSpec::white_noise(circle(8), BoundaryBasis::Nodal, 0).unwrap();
        assert!(matches!(sample_poisson_measure(&white, 1.0, 0), Err(Error::Usage(_))));
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        assert!(matches!(sample_homogeneous_coeffs(&white, &grid, 0), Err(Error::Usage(_))));
    }

    #[test]
    fn fourier_basis_needs_circle() {
        let q = Domain::interval(0.0, 1.0).unwrap().boundary_quadrature(2, None).unwrap();
        assert!(BoundaryNoiseSpec::white_noise(q.clone(), BoundaryBasis::Fourier, 1).is_err());
        let spec = BoundaryNoiseSpec::white_noise(q, BoundaryBasis::Nodal, 99).unwrap();
        assert_eq!(spec.mode_count(), 2);
        assert!(BoundaryNoiseSpec::white_noise(circle(8), BoundaryBasis::Fourier, 8).is_err());
    }

    #[test]
    fn hurst_range_is_enforced() {
        assert!(BoundaryNoiseSpec::signed_series(vec![], 1.0, None).is_err());
        assert!(BoundaryNoiseSpec::signed_series(vec![], 0.0, None).is_err());
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        assert!(FbmGenerator::new(1.2, &grid).is_err());
    }

    #[test]
    fn standard_bm_variance() {
        let grid = TimeGrid::uniform(2.0, 4).unwrap();
        let paths = sample_fbm_paths(0.5, &grid, 40_000, 7).unwrap();
        for (j, &t) in grid.nodes().iter().enumerate() {
            let v: f64 = (0..paths.rows).map(|k| paths.row(k)[j].powi(2)).sum::<f64>() / paths.rows as f64;
            // stderr of a chi-square(1) mean is t √(2/N)
            assert!((v - t).abs() < 4.0 * t * (2.0 / paths.rows as f64).sqrt(), "t={t} v={v}");
        }
    }

    #[test]
    fn fbm_cross_moment_and_long_range_dependence() {
        let grid = TimeGrid::from_nodes(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let n = 100_000;
        let paths = sample_fbm_paths(0.75, &grid, n, 11).unwrap();
        let (mut c12, mut c12sq, mut inc) = (0.0, 0.0, 0.0);
        for k in 0..n {
            let r = paths.row(k);
            let p = r[0] * r[1];
            c12 += p;
            c12sq += p * p;
            inc += (r[1] - r[0]) * (r[3] - r[2]);
        }
        let mean = c12 / n as f64;
        let se = ((c12sq / n as f64 - mean * mean) / n as f64).sqrt();
        let exact = 0.5 * (1.0 + 2f64.powf(1.5) - 1.0);
        assert!((exact - 2f64.sqrt()).abs() < 1e-15);
        assert!((mean - exact).abs() < 4.0 * se, "{mean} vs {exact} (se {se})");
        // E[(W2−W1)(W4−W3)] = ½(3^{1.5} − 2·2^{1.5} + 1) > 0 for H > 1/2
        let exact_inc = 0.5 * (3f64.powf(1.5) - 2.0 * 2f64.powf(1.5) + 1.0);
        assert!(exact_inc > 0.0);
        assert!(inc / n as f64 > 0.0);
    }

    #[test]
    fn poisson_counts() {
        let spec = BoundaryNoiseSpec::poisson(
            vec![Atom { point: vec![1.0, 0.0], mass: 1.5 }, Atom { point: vec![0.0, 1.0], mass: 0.5 }],
            Mark::constant(1.0),
        )
        .unwrap();
        let n = 100_000u64;
        let total: usize = (0..n).map(|s| sample_poisson_measure(&spec, 1.0, s).unwrap().points.len()).sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 2.0).abs() < 0.04, "{mean}");
    }

    #[test]
    fn poisson_degenerate_cases() {
        let empty =
            BoundaryNoiseSpec::poisson(vec![Atom { point: vec![0.0], mass: 0.0 }], Mark::constant(1.0)).unwrap();
        for s in 0..100 {
            assert!(sample_poisson_measure(&empty, 1.0, s).unwrap().points.is_empty());
        }
        let atom =
            BoundaryNoiseSpec::poisson(vec![Atom { point: vec![0.0, 3.0], mass: 4.0 }], Mark::constant(2.0)).unwrap();
        for s in 0..50 {
            let r = sample_poisson_measure(&atom, 2.0, s).unwrap();
            for p in &r.points {
                assert_eq!(p.location, vec![0.0, 3.0]);
                assert_eq!(p.mark, 2.0);
                assert!(p.time > 0.0 && p.time <= 2.0);
            }
        }
        assert!(BoundaryNoiseSpec::poisson(vec![Atom { point: vec![0.0], mass: f64::INFINITY }], Mark::constant(1.0))
            .is_err());
    }

    #[test]
    fn spectral_atoms_must_be_symmetric() {
        let atoms = spectral_atoms_1d(|_| white_spectral_density(1), 4.0, 8);
        assert_eq!(pair_spectral_atoms(&atoms).unwrap().len(), 8);
        let h = 4.0 / 8.0;
        assert!((atoms[0].weight - (2.0 * PI).powf(-0.5) * h).abs() < 1e-15);
        let bad = vec![SpectralAtom { frequency: vec![1.0], weight: 1.0 }];
        assert!(matches!(BoundaryNoiseSpec::homogeneous(bad), Err(Error::Config(_))));
        let zero = vec![SpectralAtom { frequency: vec![0.0], weight: 1.0 }];
        assert_eq!(pair_spectral_atoms(&zero).unwrap(), vec![SpectralMode::Constant { atom: 0 }]);
    }

    #[test]
    fn homogeneous_paths_have_uncorrelated_increments() {
        let atoms = spectral_atoms_1d(|e| (-e * e).exp(), 3.0, 2);
        let spec = BoundaryNoiseSpec::homogeneous(atoms).unwrap();
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        let n = 20_000;
        let mut acc = 0.0;
        for s in 0..n {
            let r = sample_homogeneous_coeffs(&spec, &grid, s).unwrap();
            let p = r.paths.unwrap();
            assert_eq!(p.rows, 4);
            let inc = p.increments(0);
            acc += inc[0] * inc[2];
        }
        // each increment has variance 1/4, product sd 1/16
        assert!((acc / n as f64).abs() < 4.0 / 16.0 / (n as f64).sqrt());
    }

    #[test]
    fn variation_sum_recorded() {
        let m = DiscreteMeasure {
            atoms: vec![Atom { point: vec![0.0], mass: 0.5 }, Atom { point: vec![1.0], mass: -0.25 }],
        };
        let spec = BoundaryNoiseSpec::signed_series(vec![m.clone(), m], 0.5, Some(0.0)).unwrap();
        assert!((spec.variation_square_sum().unwrap() - 2.0 * 0.75f64.powi(2)).abs() < 1e-15);
    }
}
