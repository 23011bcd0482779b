//! Array geometry, subcarrier plan, near-field steering vectors, channels and
//! the polar-domain codebook.
//!
//! Antennas sit on a uniform linear array centred at the origin. Element
//! offsets are `n = i - (N_t - 1) / 2`, which is the familiar `-N..=N` for odd
//! `N_t = 2N + 1` and a half-integer grid for even `N_t`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Propagation speed used throughout (m/s).
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Array, carrier and service-region parameters. Units are SI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub n_antennas: usize,
    /// Centre carrier `f_c` in Hz.
    pub carrier_freq: f64,
    /// Total bandwidth `B` in Hz.
    pub bandwidth: f64,
    pub n_subcarriers: usize,
    /// Element spacing in metres; half the centre wavelength when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub antenna_spacing: Option<f64>,
    /// Service sector as sine-angles `[lo, hi]`.
    #[serde(default = "default_angle_range")]
    pub angle_range: [f64; 2],
    /// Service distances `[r_min, r_max]` in metres.
    #[serde(default = "default_distance_range")]
    pub distance_range: [f64; 2],
}

fn default_angle_range() -> [f64; 2] {
    let s = (PI / 3.0).sin();
    [-s, s]
}

fn default_distance_range() -> [f64; 2] {
    [5.0, 200.0]
}

impl SystemConfig {
    /// Builds a configuration with half-wavelength spacing, users within
    /// +-60 degrees and 5..200 m, then validates it.
    pub fn new(n_antennas: usize, carrier_freq: f64, bandwidth: f64, n_subcarriers: usize) -> Result<Self> {
        let cfg = Self {
            n_antennas,
            carrier_freq,
            bandwidth,
            n_subcarriers,
            antenna_spacing: None,
            angle_range: default_angle_range(),
            distance_range: default_distance_range(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// 128 antennas, 10 GHz carrier, 2 GHz bandwidth, 512 subcarriers.
    pub fn demo() -> Self {
        Self::new(128, 10e9, 2e9, 512).expect("valid preset")
    }

    /// 256 antennas, 30 GHz carrier, 5 GHz bandwidth, 1024 subcarriers.
    pub fn full_scale() -> Self {
        Self::new(256, 30e9, 5e9, 1024).expect("valid preset")
    }

    /// Reduced configuration for quick Monte Carlo runs: 64 antennas and 256
    /// subcarriers at 1.875 GHz / 312.5 MHz. Rayleigh distance, fractional
    /// bandwidth and the subcarrier-to-antenna ratio match
    /// [`SystemConfig::full_scale`], so the split beams cover the service
    /// region with the same number of distance rings.
    pub fn desk() -> Self {
        Self::new(64, 1.875e9, 312.5e6, 256).expect("valid preset")
    }

    pub fn with_spacing(mut self, spacing: f64) -> Result<Self> {
        self.antenna_spacing = Some(spacing);
        self.validate()?;
        Ok(self)
    }

    pub fn with_angle_range(mut self, lo: f64, hi: f64) -> Result<Self> {
        self.angle_range = [lo, hi];
        self.validate()?;
        Ok(self)
    }

    pub fn with_distance_range(mut self, r_min: f64, r_max: f64) -> Result<Self> {
        self.distance_range = [r_min, r_max];
        self.validate()?;
        Ok(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_antennas == 0 {
            return bad("n_antennas must be at least 1".into());
        }
        if !(self.carrier_freq.is_finite() && self.carrier_freq > 0.0) {
            return bad(format!("carrier_freq must be positive, got {}", self.carrier_freq));
        }
        if !(self.bandwidth.is_finite() && self.bandwidth > 0.0 && self.bandwidth < self.carrier_freq) {
            return bad(format!(
                "bandwidth must lie in (0, carrier_freq), got {}",
                self.bandwidth
            ));
        }
        if self.n_subcarriers < 2 {
            return bad("n_subcarriers must be at least 2".into());
        }
        if let Some(d) = self.antenna_spacing {
            if !(d.is_finite() && d > 0.0) {
                return bad(format!("antenna_spacing must be positive, got {d}"));
            }
        }
        let [lo, hi] = self.angle_range;
        if !(-1.0..=1.0).contains(&lo) || !(-1.0..=1.0).contains(&hi) || lo >= hi {
            return bad(format!("angle_range must satisfy -1 <= lo < hi <= 1, got [{lo}, {hi}]"));
        }
        let [r_min, r_max] = self.distance_range;
        if !(r_min > 0.0 && r_max > r_min && r_max.is_finite()) {
            return bad(format!(
                "distance_range must satisfy 0 < r_min < r_max, got [{r_min}, {r_max}]"
            ));
        }
        Ok(())
    }

    pub fn wavelength_c(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq
    }

    /// Element spacing `d`.
    pub fn spacing(&self) -> f64 {
        self.antenna_spacing
            .unwrap_or_else(|| SPEED_OF_LIGHT / (2.0 * self.carrier_freq))
    }

    pub fn f_low(&self) -> f64 {
        self.carrier_freq - self.bandwidth / 2.0
    }

    pub fn f_high(&self) -> f64 {
        self.carrier_freq + self.bandwidth / 2.0
    }

    /// Frequency of the 1-based subcarrier `m`.
    pub fn subcarrier_freq(&self, m: usize) -> Result<f64> {
        subcarrier_frequency(self.carrier_freq, self.bandwidth, self.n_subcarriers, m)
    }

    /// All subcarrier frequencies, `f_1 .. f_M`.
    pub fn subcarrier_freqs(&self) -> Vec<f64> {
        (1..=self.n_subcarriers)
            .map(|m| self.subcarrier_freq(m).expect("index in range"))
            .collect()
    }

    pub fn wavenumber(&self, f: f64) -> f64 {
        2.0 * PI * f / SPEED_OF_LIGHT
    }

    /// Element offsets `n` in units of `d`, ordered from the most negative.
    pub fn element_offsets(&self) -> impl Iterator<Item = f64> + Clone {
        let half = (self.n_antennas as f64 - 1.0) / 2.0;
        (0..self.n_antennas).map(move |i| i as f64 - half)
    }

    /// Smallest distance-ring curvature, `1 / (2 r_max)`.
    pub fn alpha_min(&self) -> f64 {
        1.0 / (2.0 * self.distance_range[1])
    }

    /// Largest distance-ring curvature, `1 / (2 r_min)`.
    pub fn alpha_max(&self) -> f64 {
        1.0 / (2.0 * self.distance_range[0])
    }

    /// Aperture `N_t d`.
    pub fn aperture(&self) -> f64 {
        self.n_antennas as f64 * self.spacing()
    }

    /// Rayleigh distance `2 D^2 / lambda_c`.
    pub fn rayleigh_distance(&self) -> f64 {
        2.0 * self.aperture().powi(2) / self.wavelength_c()
    }
}

/// Subcarrier frequency `f_c + (B/M)(m - 1 - (M-1)/2)` for a 1-based index.
pub fn subcarrier_frequency(fc: f64, bandwidth: f64, count: usize, m: usize) -> Result<f64> {
    if m == 0 || m > count {
        return Err(Error::SubcarrierOutOfRange { index: m, count });
    }
    let offset = (m as f64 - 1.0) - (count as f64 - 1.0) / 2.0;
    Ok(fc + bandwidth / count as f64 * offset)
}

/// A location in sine-angle / distance-ring coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarLocation {
    pub theta: f64,
    pub alpha: f64,
}

impl PolarLocation {
    pub fn new(theta: f64, alpha: f64) -> Self {
        Self { theta, alpha }
    }

    /// `alpha = (1 - theta^2) / (2 r)`.
    pub fn from_distance(theta: f64, r: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::NonPositiveDistance(r));
        }
        Ok(Self {
            theta,
            alpha: (1.0 - theta * theta) / (2.0 * r),
        })
    }

    /// Distance back from the ring curvature; infinite on the far-field ring.
    pub fn distance(&self) -> f64 {
        if self.alpha > 0.0 {
            (1.0 - self.theta * self.theta) / (2.0 * self.alpha)
        } else {
            f64::INFINITY
        }
    }
}

/// A complex array weight or response vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector(pub Vec<Complex64>);

impl SteeringVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn elements(&self) -> &[Complex64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Unconjugated product `self^T other`.
    pub fn dot(&self, other: &SteeringVector) -> Complex64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    /// Hermitian product `self^H other`.
    pub fn hdot(&self, other: &SteeringVector) -> Complex64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn conj(&self) -> SteeringVector {
        SteeringVector(self.0.iter().map(|z| z.conj()).collect())
    }

    pub fn hadamard(&self, other: &SteeringVector) -> SteeringVector {
        SteeringVector(self.0.iter().zip(&other.0).map(|(a, b)| a * b).collect())
    }

    pub fn scaled(&self, s: f64) -> SteeringVector {
        SteeringVector(self.0.iter().map(|z| z * s).collect())
    }

    pub fn normalized(&self) -> SteeringVector {
        let n = self.norm();
        if n > 0.0 {
            self.scaled(1.0 / n)
        } else {
            self.clone()
        }
    }
}

/// Exact spherical-wave response `a(theta, r)` at frequency `f`.
pub fn exact_steering(cfg: &SystemConfig, theta: f64, r: f64, f: f64) -> Result<SteeringVector> {
    if !(r > 0.0) {
        return Err(Error::NonPositiveDistance(r));
    }
    let k = cfg.wavenumber(f);
    let d = cfg.spacing();
    let amp = 1.0 / (cfg.n_antennas as f64).sqrt();
    Ok(SteeringVector(
        cfg.element_offsets()
            .map(|n| {
                let rn = (r * r + n * n * d * d - 2.0 * r * theta * n * d).sqrt();
                Complex64::from_polar(amp, -k * (rn - r))
            })
            .collect(),
    ))
}

/// Second-order (Fresnel) response `b(theta, alpha)` at frequency `f`.
pub fn approx_steering(cfg: &SystemConfig, loc: PolarLocation, f: f64) -> SteeringVector {
    let k = cfg.wavenumber(f);
    let d = cfg.spacing();
    let amp = 1.0 / (cfg.n_antennas as f64).sqrt();
    SteeringVector(
        cfg.element_offsets()
            .map(|n| Complex64::from_polar(amp, k * (n * d * loc.theta - n * n * d * d * loc.alpha)))
            .collect(),
    )
}

/// Which response model a synthesized channel uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SteeringModel {
    Exact,
    Fresnel,
}

/// One propagation path: centre-frequency gain, delay (s), sine-angle and distance (m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub gain: f64,
    pub delay: f64,
    pub theta: f64,
    pub distance: f64,
}

/// Per-subcarrier downlink channel vectors.
#[derive(Debug, Clone)]
pub struct Channel {
    pub per_subcarrier: Vec<SteeringVector>,
    /// Reference path gain at each subcarrier, `beta_m = (f_c / f_m) beta_c`.
    pub path_gains: Vec<f64>,
    /// Reference gain at the centre carrier.
    pub beta_c: f64,
    pub paths: Vec<Path>,
}

impl Channel {
    pub fn n_subcarriers(&self) -> usize {
        self.per_subcarrier.len()
    }

    /// Channel with every entry zero, for noise-only experiments.
    pub fn zero(cfg: &SystemConfig, beta_c: f64) -> Self {
        let fc = cfg.carrier_freq;
        let per_subcarrier = vec![SteeringVector(vec![Complex64::new(0.0, 0.0); cfg.n_antennas]); cfg.n_subcarriers];
        let path_gains = cfg.subcarrier_freqs().iter().map(|f| fc / f * beta_c).collect();
        Self {
            per_subcarrier,
            path_gains,
            beta_c,
            paths: Vec::new(),
        }
    }
}

/// Free-space gain `lambda / (4 pi r)`.
pub fn free_space_gain(f: f64, r: f64) -> f64 {
    SPEED_OF_LIGHT / f / (4.0 * PI * r)
}

/// Line-of-sight channel `h_m = sqrt(N_t) beta_m e^{-j k_m r} a_m(theta, r)`.
pub fn los_channel(cfg: &SystemConfig, theta: f64, r: f64) -> Result<Channel> {
    los_channel_with(cfg, theta, r, SteeringModel::Exact)
}

/// As [`los_channel`], optionally with the Fresnel response in place of the
/// exact one.
pub fn los_channel_with(cfg: &SystemConfig, theta: f64, r: f64, model: SteeringModel) -> Result<Channel> {
    if !(r > 0.0) {
        return Err(Error::NonPositiveDistance(r));
    }
    let sqrt_n = (cfg.n_antennas as f64).sqrt();
    let beta_c = free_space_gain(cfg.carrier_freq, r);
    let loc = PolarLocation::from_distance(theta, r)?;
    let mut per_subcarrier = Vec::with_capacity(cfg.n_subcarriers);
    let mut path_gains = Vec::with_capacity(cfg.n_subcarriers);
    for f in cfg.subcarrier_freqs() {
        let beta = free_space_gain(f, r);
        let a = match model {
            SteeringModel::Exact => exact_steering(cfg, theta, r, f)?,
            SteeringModel::Fresnel => approx_steering(cfg, loc, f),
        };
        let common = Complex64::from_polar(sqrt_n * beta, -cfg.wavenumber(f) * r);
        per_subcarrier.push(SteeringVector(a.0.iter().map(|z| z * common).collect()));
        path_gains.push(beta);
    }
    Ok(Channel {
        per_subcarrier,
        path_gains,
        beta_c,
        paths: vec![Path {
            gain: beta_c,
            delay: r / SPEED_OF_LIGHT,
            theta,
            distance: r,
        }],
    })
}

/// Multipath channel `h_m = sqrt(N_t / L) sum_l beta_{m,l} e^{-j 2 pi f_m tau_l} a_m(theta_l, r_l)`
/// with `beta_{m,l} = (f_c / f_m) beta_l`.
pub fn multipath_channel(cfg: &SystemConfig, paths: &[Path]) -> Result<Channel> {
    if paths.is_empty() {
        return Err(Error::EmptyPaths);
    }
    let l = paths.len() as f64;
    let scale = (cfg.n_antennas as f64 / l).sqrt();
    let fc = cfg.carrier_freq;
    let beta_c = (paths.iter().map(|p| p.gain * p.gain).sum::<f64>() / l).sqrt();
    let mut per_subcarrier = Vec::with_capacity(cfg.n_subcarriers);
    let mut path_gains = Vec::with_capacity(cfg.n_subcarriers);
    for f in cfg.subcarrier_freqs() {
        let mut h = vec![Complex64::new(0.0, 0.0); cfg.n_antennas];
        for p in paths {
            let a = exact_steering(cfg, p.theta, p.distance, f)?;
            let coef = Complex64::from_polar(scale * fc / f * p.gain, -2.0 * PI * f * p.delay);
            for (hn, an) in h.iter_mut().zip(&a.0) {
                *hn += coef * an;
            }
        }
        per_subcarrier.push(SteeringVector(h));
        path_gains.push(fc / f * beta_c);
    }
    Ok(Channel {
        per_subcarrier,
        path_gains,
        beta_c,
        paths: paths.to_vec(),
    })
}

/// Cell-centred uniform samples of `[lo, hi]`.
pub fn cell_centres(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let step = (hi - lo) / count as f64;
    (0..count).map(|i| lo + (i as f64 + 0.5) * step).collect()
}

/// Polar-domain codebook: angle samples across the service sector and, per
/// angle, distance-ring samples uniform in `alpha` over `[alpha_min, alpha_max]`.
///
/// Grid order is angle-major: all rings of the first angle, then the next.
#[derive(Debug, Clone)]
pub struct PolarCodebook {
    pub grid: Vec<PolarLocation>,
    pub angle_step: f64,
    pub distance_counts: Vec<usize>,
}

impl PolarCodebook {
    /// `angle_samples` angles with `distance_samples` rings each.
    pub fn uniform(cfg: &SystemConfig, angle_samples: usize, distance_samples: usize) -> Self {
        Self::with_counts(cfg, &vec![distance_samples; angle_samples])
    }

    /// One angle per entry of `counts`, with `counts[i]` rings at angle `i`.
    pub fn with_counts(cfg: &SystemConfig, counts: &[usize]) -> Self {
        let [lo, hi] = cfg.angle_range;
        let thetas = cell_centres(lo, hi, counts.len());
        let mut grid = Vec::with_capacity(counts.iter().sum());
        for (&theta, &s) in thetas.iter().zip(counts) {
            for alpha in cell_centres(cfg.alpha_min(), cfg.alpha_max(), s) {
                grid.push(PolarLocation::new(theta, alpha));
            }
        }
        Self {
            grid,
            angle_step: (hi - lo) / counts.len() as f64,
            distance_counts: counts.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Codeword `b_m(theta_g, alpha_g)` at frequency `f`.
    pub fn codeword(&self, cfg: &SystemConfig, g: usize, f: f64) -> SteeringVector {
        approx_steering(cfg, self.grid[g], f)
    }

    /// Whether every ring count is the same, so ring `s` shares one `alpha`
    /// across all angles.
    pub fn is_rectangular(&self) -> bool {
        self.distance_counts.windows(2).all(|w| w[0] == w[1])
    }
}
