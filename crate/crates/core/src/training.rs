//! Pilot reception and beam-training estimators.
//!
//! Received signals follow `y_m = sqrt(P_t) h_m^T w_m + n_m` with `P_t = 1`.
//! Noise power is set from a scalar SNR anchored at the centre carrier,
//! `sigma^2 = N_t beta_c^2 / snr`; an infinite SNR switches noise off.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array::{
    approx_steering, cell_centres, free_space_gain, Channel, PolarCodebook, PolarLocation, SteeringVector, SystemConfig,
};
use crate::beamsplit::{
    angle_beamwidth, combined_beamformer, ellipse_coefficients, resolve_focus, BeamFocus, TdPsParams,
};
use crate::design::PilotPlan;
use crate::numeric::{newton2, NewtonOptions};

/// Beam-training scheme tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    PerfectCsi,
    Exhaustive,
    MatchFilter,
    AuxPair,
    OnGrid,
    NearFieldRainbow,
    FarFieldRainbow,
}

impl Scheme {
    pub const ALL: [Scheme; 7] = [
        Scheme::PerfectCsi,
        Scheme::Exhaustive,
        Scheme::MatchFilter,
        Scheme::AuxPair,
        Scheme::OnGrid,
        Scheme::NearFieldRainbow,
        Scheme::FarFieldRainbow,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::PerfectCsi => "perfect_csi",
            Scheme::Exhaustive => "exhaustive",
            Scheme::MatchFilter => "match_filter",
            Scheme::AuxPair => "aux_pair",
            Scheme::OnGrid => "on_grid",
            Scheme::NearFieldRainbow => "near_field_rainbow",
            Scheme::FarFieldRainbow => "far_field_rainbow",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s || x.name().replace('_', "-") == s)
            .ok_or_else(|| crate::error::Error::Parse(format!("unknown scheme `{s}`")))
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Result of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingEstimate {
    pub theta_hat: f64,
    pub alpha_hat: f64,
    /// `(subcarrier, pilot)` for split-beam schemes, `(angle, ring)` for
    /// grid-based ones. Zero-based.
    pub selected: (usize, usize),
    pub scheme: Scheme,
    pub pilots_used: usize,
    /// Set when the estimate had to be clamped into `theta in [-1, 1]`, `alpha >= 0`.
    pub clamped: bool,
    /// Set when an off-grid refinement gave up and returned the on-grid estimate.
    pub fallback: bool,
}

impl TrainingEstimate {
    fn new(theta: f64, alpha: f64, selected: (usize, usize), scheme: Scheme, pilots_used: usize) -> Self {
        let t = theta.clamp(-1.0, 1.0);
        let a = alpha.max(0.0);
        Self {
            theta_hat: t,
            alpha_hat: a,
            selected,
            scheme,
            pilots_used,
            clamped: t != theta || a != alpha,
            fallback: false,
        }
    }

    pub fn location(&self) -> PolarLocation {
        PolarLocation::new(self.theta_hat, self.alpha_hat)
    }
}

/// Received magnitudes `g(m, k)` of a multi-pilot training round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationGrid {
    pub n_subcarriers: usize,
    pub n_pilots: usize,
    /// Pilot-major: entry `k * M + m`.
    pub magnitudes: Vec<f64>,
    pub snr: f64,
    pub seed: u64,
}

impl ObservationGrid {
    pub fn get(&self, m: usize, k: usize) -> f64 {
        self.magnitudes[k * self.n_subcarriers + m]
    }

    pub fn column(&self, k: usize) -> &[f64] {
        &self.magnitudes[k * self.n_subcarriers..(k + 1) * self.n_subcarriers]
    }

    /// Strongest entry; ties go to the smaller subcarrier, then the smaller pilot.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = (0, 0);
        let mut best_val = f64::NEG_INFINITY;
        for m in 0..self.n_subcarriers {
            for k in 0..self.n_pilots {
                let v = self.get(m, k);
                if v > best_val {
                    best_val = v;
                    best = (m, k);
                }
            }
        }
        best
    }
}

/// Noise standard deviation for a linear SNR anchored at `beta_c`.
pub fn noise_sigma(cfg: &SystemConfig, beta_c: f64, snr: f64) -> f64 {
    if snr.is_infinite() {
        0.0
    } else {
        (cfg.n_antennas as f64 * beta_c * beta_c / snr).sqrt()
    }
}

/// Unit-variance circular complex Gaussian samples.
pub fn unit_noise<R: Rng + ?Sized>(rng: &mut R, count: usize) -> Vec<Complex64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (0..count)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * s, im * s)
        })
        .collect()
}

/// A set of TD-PS pilots with their per-subcarrier beamformers precomputed.
#[derive(Debug, Clone)]
pub struct PilotSet {
    pub params: Vec<TdPsParams>,
    pub q: i64,
    /// `beams[k][m]`.
    pub beams: Vec<Vec<SteeringVector>>,
}

impl PilotSet {
    pub fn new(cfg: &SystemConfig, params: Vec<TdPsParams>, q: i64) -> Self {
        let freqs = cfg.subcarrier_freqs();
        let beams = params
            .iter()
            .map(|p| freqs.iter().map(|&f| combined_beamformer(p, cfg, f)).collect())
            .collect();
        Self { params, q, beams }
    }

    pub fn from_plan(plan: &PilotPlan) -> Self {
        let params = (0..plan.n_pilots()).map(|k| plan.pilot_params(k)).collect();
        Self::new(&plan.cfg, params, plan.q)
    }

    /// The first `count` pilots.
    pub fn truncated(&self, count: usize) -> Self {
        let count = count.min(self.len());
        Self {
            params: self.params[..count].to_vec(),
            q: self.q,
            beams: self.beams[..count].to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Noiseless received signals `h_m^T w_{m,k}`, pilot-major.
    pub fn signals(&self, channel: &Channel) -> Vec<Complex64> {
        self.beams
            .iter()
            .flat_map(|col| col.iter().zip(&channel.per_subcarrier).map(|(w, h)| h.dot(w)))
            .collect()
    }

    /// Focus of pilot `k` at `f`, choosing the alias inside the service sector.
    pub fn focus(&self, cfg: &SystemConfig, k: usize, f: f64) -> (BeamFocus, bool) {
        let r = resolve_focus(&self.params[k], self.q, cfg, f);
        (r.focus, r.clamped)
    }
}

/// Magnitudes of `signals + sigma * noise`.
pub fn noisy_magnitudes(signals: &[Complex64], noise: &[Complex64], sigma: f64) -> Vec<f64> {
    signals.iter().zip(noise).map(|(s, n)| (s + n * sigma).norm()).collect()
}

/// Receives pilot `k` of `plan` on every subcarrier.
pub fn simulate_pilot<R: Rng + ?Sized>(
    channel: &Channel,
    plan: &PilotPlan,
    k: usize,
    snr: f64,
    rng: &mut R,
) -> Vec<f64> {
    let cfg = &plan.cfg;
    let params = plan.pilot_params(k);
    let sigma = noise_sigma(cfg, channel.beta_c, snr);
    let noise = unit_noise(rng, cfg.n_subcarriers);
    cfg.subcarrier_freqs()
        .iter()
        .zip(&channel.per_subcarrier)
        .zip(&noise)
        .map(|((&f, h), n)| (h.dot(&combined_beamformer(&params, cfg, f)) + n * sigma).norm())
        .collect()
}

/// Receives every pilot of `pilots`, drawing noise from `rng`.
pub fn observe<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    channel: &Channel,
    pilots: &PilotSet,
    snr: f64,
    seed: u64,
    rng: &mut R,
) -> ObservationGrid {
    let signals = pilots.signals(channel);
    let noise = unit_noise(rng, signals.len());
    let sigma = noise_sigma(cfg, channel.beta_c, snr);
    ObservationGrid {
        n_subcarriers: cfg.n_subcarriers,
        n_pilots: pilots.len(),
        magnitudes: noisy_magnitudes(&signals, &noise, sigma),
        snr,
        seed,
    }
}

fn split_beam_estimate(
    obs: &ObservationGrid,
    pilots: &PilotSet,
    cfg: &SystemConfig,
    scheme: Scheme,
) -> TrainingEstimate {
    let (m, k) = obs.argmax();
    let f = cfg.subcarrier_freq(m + 1).expect("subcarrier in range");
    let (focus, clamped) = pilots.focus(cfg, k, f);
    let mut est = TrainingEstimate::new(focus.theta, focus.alpha, (m, k), scheme, obs.n_pilots);
    est.clamped |= clamped;
    est
}

/// Location of the strongest `(subcarrier, pilot)` beam.
pub fn ongrid_train(obs: &ObservationGrid, pilots: &PilotSet, cfg: &SystemConfig) -> TrainingEstimate {
    split_beam_estimate(obs, pilots, cfg, Scheme::OnGrid)
}

/// Refines the on-grid estimate by intersecting the equal-gain ellipses of
/// the strongest beam and its stronger neighbour in the same pilot.
///
/// Gains are normalised with the path loss at the on-grid distance. The two
/// ellipses share their axis ratio, so their intersections mirror each other
/// across the line through the foci; the estimate is the foot point of a
/// Newton root on that line. When the ellipses do not meet, the point on the
/// foci line with equal residuals is used instead.
pub fn aux_pair_train(obs: &ObservationGrid, pilots: &PilotSet, cfg: &SystemConfig) -> TrainingEstimate {
    let base = ongrid_train(obs, pilots, cfg);
    let fallback = |mut e: TrainingEstimate| {
        e.scheme = Scheme::AuxPair;
        e.fallback = true;
        e
    };
    let (ma, k) = base.selected;
    let big_m = obs.n_subcarriers;
    if big_m < 2 {
        return fallback(base);
    }
    let mb = match (ma.checked_sub(1), (ma + 1 < big_m).then_some(ma + 1)) {
        (Some(l), Some(r)) => {
            if obs.get(r, k) > obs.get(l, k) {
                r
            } else {
                l
            }
        }
        (Some(l), None) => l,
        (None, Some(r)) => r,
        (None, None) => return fallback(base),
    };
    let fa = cfg.subcarrier_freq(ma + 1).expect("in range");
    let fb = cfg.subcarrier_freq(mb + 1).expect("in range");
    let (a, ca) = pilots.focus(cfg, k, fa);
    let (b, cb) = pilots.focus(cfg, k, fb);
    let r_hat = base.location().distance();
    if ca || cb || a.p != b.p || !r_hat.is_finite() || (a.theta - b.theta).abs() > 4.0 * angle_beamwidth(cfg, fa) {
        return fallback(base);
    }
    let sqrt_n = (cfg.n_antennas as f64).sqrt();
    let gain = |m: usize, f: f64| {
        let g = obs.get(m, k) / (sqrt_n * free_space_gain(f, r_hat));
        g.clamp(1e-12, 1.0)
    };
    let (ga, gb) = (gain(ma, fa), gain(mb, fb));
    if ga >= 1.0 - 1e-9 {
        return TrainingEstimate::new(a.theta, a.alpha, (ma, k), Scheme::AuxPair, obs.n_pilots);
    }
    let (s1a, s2a) = ellipse_coefficients(cfg, fa);
    let (s1b, s2b) = ellipse_coefficients(cfg, fb);
    // Scaled coordinates u = sqrt(s1a) theta, v = sqrt(s2a) alpha make ellipse a a circle.
    let (ku, kv) = (s1a.sqrt(), s2a.sqrt());
    let system = |x: [f64; 2]| {
        let (dta, daa) = (a.theta - x[0], a.alpha - x[1]);
        let (dtb, dab) = (b.theta - x[0], b.alpha - x[1]);
        (
            [
                s1a * dta * dta + s2a * daa * daa - (1.0 - ga),
                s1b * dtb * dtb + s2b * dab * dab - (1.0 - gb),
            ],
            [
                [-2.0 * s1a * dta, -2.0 * s2a * daa],
                [-2.0 * s1b * dtb, -2.0 * s2b * dab],
            ],
        )
    };
    let feasible = |x: [f64; 2]| (-1.0..=1.0).contains(&x[0]) && x[1] >= 0.0;
    let (au, av) = (ku * a.theta, kv * a.alpha);
    let (bu, bv) = (ku * b.theta, kv * b.alpha);
    let (du, dv) = (bu - au, bv - av);
    let sep = du.hypot(dv);
    if sep == 0.0 {
        return fallback(base);
    }
    let (nu, nv) = (-dv / sep, du / sep);
    let offset = (1.0 - ga).sqrt().max(sep / 2.0);
    let (mu, mv) = (0.5 * (au + bu), 0.5 * (av + bv));
    let opts = NewtonOptions::default();
    let root = [1.0, -1.0].iter().find_map(|&side| {
        let x0 = [(mu + side * offset * nu) / ku, (mv + side * offset * nv) / kv];
        if !feasible(x0) {
            return None;
        }
        newton2(system, feasible, x0, opts).ok()
    });
    let t = match root {
        Some(root) => {
            // Foot point of the root on the foci line, in scaled coordinates.
            let (ru, rv) = (ku * root.x[0], kv * root.x[1]);
            ((ru - au) * du + (rv - av) * dv) / (sep * sep)
        }
        None => {
            // The ellipses do not meet. Use the point of the foci line where
            // both residuals agree, which is where the roots would project.
            let ra2 = 1.0 - ga;
            let rb2 = (1.0 - gb) * s1a / s1b;
            (sep * sep + ra2 - rb2) / (2.0 * sep * sep)
        }
    };
    let t = t.clamp(0.0, 1.0);
    let (fu, fv) = (au + t * du, av + t * dv);
    TrainingEstimate::new(fu / ku, fv / kv, (ma, k), Scheme::AuxPair, obs.n_pilots)
}

/// Offline table of noiseless gain signatures over a polar grid.
#[derive(Debug, Clone)]
pub struct MatchFilterBank {
    pub grid: PolarCodebook,
    pub angle_samples: usize,
    pub distance_samples: usize,
    pub n_subcarriers: usize,
    pub n_pilots: usize,
    /// Signature of grid point `g` occupies `[g * M * K, (g + 1) * M * K)`,
    /// pilot-major inside.
    pub signatures: Vec<f64>,
    /// Per-signature `(mean, norm of the mean-removed signature)`.
    pub stats: Vec<(f64, f64)>,
}

fn signature_stats(signatures: &[f64], width: usize) -> Vec<(f64, f64)> {
    if width == 0 {
        return Vec::new();
    }
    signatures
        .chunks(width)
        .map(|s| {
            let mean = s.iter().sum::<f64>() / width as f64;
            let ss = s.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
            (mean, ss.sqrt())
        })
        .collect()
}

impl MatchFilterBank {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn signature(&self, g: usize) -> &[f64] {
        let w = self.n_subcarriers * self.n_pilots;
        &self.signatures[g * w..(g + 1) * w]
    }

    /// Copy restricted to the first `count` pilots.
    pub fn truncated(&self, count: usize) -> Self {
        let count = count.min(self.n_pilots);
        let m = self.n_subcarriers;
        let w = m * self.n_pilots;
        let signatures: Vec<f64> = (0..self.len())
            .flat_map(|g| self.signatures[g * w..g * w + count * m].iter().copied())
            .collect();
        Self {
            stats: signature_stats(&signatures, count * m),
            grid: self.grid.clone(),
            angle_samples: self.angle_samples,
            distance_samples: self.distance_samples,
            n_subcarriers: m,
            n_pilots: count,
            signatures,
        }
    }
}

/// Signature vector `|w_{m,k}^T b_m(loc)|` of one location.
pub fn gain_signature(cfg: &SystemConfig, pilots: &PilotSet, loc: PolarLocation) -> Vec<f64> {
    let responses: Vec<SteeringVector> = cfg
        .subcarrier_freqs()
        .iter()
        .map(|&f| approx_steering(cfg, loc, f))
        .collect();
    pilots
        .beams
        .iter()
        .flat_map(|col| col.iter().zip(&responses).map(|(w, b)| w.dot(b).norm()))
        .collect()
}

/// Builds the bank on a uniform `angle_samples x distance_samples` grid.
pub fn build_match_filter_bank(
    cfg: &SystemConfig,
    pilots: &PilotSet,
    angle_samples: usize,
    distance_samples: usize,
) -> MatchFilterBank {
    let grid = PolarCodebook::uniform(cfg, angle_samples, distance_samples);
    build_bank_on(cfg, pilots, grid, angle_samples, distance_samples)
}

fn build_bank_on(
    cfg: &SystemConfig,
    pilots: &PilotSet,
    grid: PolarCodebook,
    angle_samples: usize,
    distance_samples: usize,
) -> MatchFilterBank {
    let signatures: Vec<f64> = grid
        .grid
        .par_iter()
        .flat_map_iter(|&loc| gain_signature(cfg, pilots, loc))
        .collect();
    MatchFilterBank {
        stats: signature_stats(&signatures, cfg.n_subcarriers * pilots.len()),
        grid,
        angle_samples,
        distance_samples,
        n_subcarriers: cfg.n_subcarriers,
        n_pilots: pilots.len(),
        signatures,
    }
}

/// Bank over explicit grid locations (one angle per entry, one ring each).
pub fn bank_from_locations(cfg: &SystemConfig, pilots: &PilotSet, locations: &[PolarLocation]) -> MatchFilterBank {
    let grid = PolarCodebook {
        grid: locations.to_vec(),
        angle_step: 0.0,
        distance_counts: vec![1; locations.len()],
    };
    build_bank_on(cfg, pilots, grid, locations.len(), 1)
}

/// Grid point whose signature correlates best with the observation. Both
/// sides are mean-removed and normalised, so a flat noise floor on the
/// observation does not favour grid points with large overall gain.
/// Ties go to the smaller angle index, then the smaller ring index.
pub fn match_filter_train(obs: &ObservationGrid, bank: &MatchFilterBank) -> TrainingEstimate {
    let total: f64 = obs.magnitudes.iter().sum();
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for g in 0..bank.len() {
        let (mean, spread) = bank.stats[g];
        let dot: f64 = bank.signature(g).iter().zip(&obs.magnitudes).map(|(s, o)| s * o).sum();
        let r = if spread > 0.0 {
            (dot - mean * total) / spread
        } else {
            0.0
        };
        if r > best_val {
            best_val = r;
            best = g;
        }
    }
    let loc = bank.grid.grid[best];
    let s = bank.distance_samples.max(1);
    TrainingEstimate::new(
        loc.theta,
        loc.alpha,
        (best / s, best % s),
        Scheme::MatchFilter,
        obs.n_pilots,
    )
}

/// Noiseless per-subcarrier codeword responses `h_m^T conj(b_m(g))`, codeword-major.
pub fn codebook_signals(cfg: &SystemConfig, channel: &Channel, codebook: &PolarCodebook) -> Vec<Complex64> {
    let big_m = cfg.n_subcarriers;
    let d = cfg.spacing();
    let offsets: Vec<f64> = cfg.element_offsets().collect();
    let n0 = offsets[0];
    let amp = 1.0 / (cfg.n_antennas as f64).sqrt();
    let freqs = cfg.subcarrier_freqs();
    let mut out = vec![Complex64::new(0.0, 0.0); codebook.len() * big_m];
    // y = amp * sum_n h_n e^{j k n^2 d^2 alpha} z^n with z = e^{-j k d theta};
    // the quadratic factor depends only on the ring, the sum is evaluated by Horner.
    let mut rings: Vec<f64> = codebook.grid.iter().map(|l| l.alpha).collect();
    rings.sort_by(f64::total_cmp);
    rings.dedup();
    let ring_of: Vec<usize> = codebook
        .grid
        .iter()
        .map(|l| rings.partition_point(|&a| a < l.alpha))
        .collect();
    let rows: Vec<(usize, Vec<Complex64>)> = (0..big_m)
        .into_par_iter()
        .map(|m| {
            let k = cfg.wavenumber(freqs[m]);
            let h = &channel.per_subcarrier[m].0;
            let u: Vec<Vec<Complex64>> = rings
                .iter()
                .map(|&alpha| {
                    offsets
                        .iter()
                        .zip(h)
                        .map(|(&n, hn)| hn * Complex64::from_polar(1.0, k * n * n * d * d * alpha))
                        .collect()
                })
                .collect();
            let col = codebook
                .grid
                .iter()
                .zip(&ring_of)
                .map(|(loc, &ri)| {
                    let z = Complex64::from_polar(1.0, -k * d * loc.theta);
                    let mut acc = Complex64::new(0.0, 0.0);
                    for un in u[ri].iter().rev() {
                        acc = acc * z + un;
                    }
                    acc * Complex64::from_polar(amp, -k * d * loc.theta * n0)
                })
                .collect();
            (m, col)
        })
        .collect();
    for (m, col) in rows {
        for (g, v) in col.into_iter().enumerate() {
            out[g * big_m + m] = v;
        }
    }
    out
}

/// Exhaustive search given precomputed codeword responses and unit noise,
/// restricted to the first `budget` codewords.
pub fn exhaustive_select(
    codebook: &PolarCodebook,
    n_subcarriers: usize,
    signals: &[Complex64],
    noise: &[Complex64],
    sigma: f64,
    budget: usize,
) -> TrainingEstimate {
    let used = budget.min(codebook.len());
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for g in 0..used {
        let range = g * n_subcarriers..(g + 1) * n_subcarriers;
        let p: f64 = signals[range.clone()]
            .iter()
            .zip(&noise[range])
            .map(|(s, n)| (s + n * sigma).norm_sqr())
            .sum();
        if p > best_val {
            best_val = p;
            best = g;
        }
    }
    let loc = codebook.grid[best];
    let (a, s) = codebook_index(codebook, best);
    TrainingEstimate::new(loc.theta, loc.alpha, (a, s), Scheme::Exhaustive, used)
}

fn codebook_index(codebook: &PolarCodebook, g: usize) -> (usize, usize) {
    let mut start = 0;
    for (a, &c) in codebook.distance_counts.iter().enumerate() {
        if g < start + c {
            return (a, g - start);
        }
        start += c;
    }
    (codebook.distance_counts.len(), 0)
}

/// One noisy observation per codeword, power summed over subcarriers; the
/// strongest codeword wins.
pub fn exhaustive_polar_train<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    channel: &Channel,
    codebook: &PolarCodebook,
    snr: f64,
    rng: &mut R,
) -> TrainingEstimate {
    let signals = codebook_signals(cfg, channel, codebook);
    let noise = unit_noise(rng, signals.len());
    let sigma = noise_sigma(cfg, channel.beta_c, snr);
    exhaustive_select(codebook, cfg.n_subcarriers, &signals, &noise, sigma, codebook.len())
}

/// Angle sweep `(theta_t', theta_p')` whose subcarrier beams cover `[-1, 1]`
/// exactly once, from `+1` at the lowest subcarrier to `-1` at the highest.
pub fn rainbow_sweep(cfg: &SystemConfig) -> (f64, f64) {
    let fc = cfg.carrier_freq;
    let f1 = cfg.subcarrier_freq(1).expect("in range");
    let fm = cfg.subcarrier_freq(cfg.n_subcarriers).expect("in range");
    let theta_p = 2.0 / (fc / f1 - fc / fm);
    (1.0 - theta_p * fc / f1, theta_p)
}

/// Near-field rainbow pilots: one angle sweep per sampled distance ring.
pub fn nearfield_rainbow_pilots(cfg: &SystemConfig, rings: usize) -> PilotSet {
    let (theta_t, theta_p) = rainbow_sweep(cfg);
    let params = cell_centres(cfg.alpha_min(), cfg.alpha_max(), rings)
        .into_iter()
        .map(|alpha| TdPsParams {
            theta_t,
            theta_p,
            alpha_t: alpha,
            alpha_p: 0.0,
        })
        .collect();
    PilotSet::new(cfg, params, 0)
}

/// Far-field rainbow pilot: a single sweep on the far-field ring.
pub fn farfield_rainbow_pilots(cfg: &SystemConfig) -> PilotSet {
    let (theta_t, theta_p) = rainbow_sweep(cfg);
    PilotSet::new(
        cfg,
        vec![TdPsParams {
            theta_t,
            theta_p,
            alpha_t: 0.0,
            alpha_p: 0.0,
        }],
        0,
    )
}

/// Strongest `(subcarrier, ring)` of a near-field rainbow round.
pub fn nearfield_rainbow_estimate(obs: &ObservationGrid, pilots: &PilotSet, cfg: &SystemConfig) -> TrainingEstimate {
    split_beam_estimate(obs, pilots, cfg, Scheme::NearFieldRainbow)
}

/// Strongest subcarrier of a far-field rainbow round; the ring is always zero.
pub fn farfield_rainbow_estimate(obs: &ObservationGrid, pilots: &PilotSet, cfg: &SystemConfig) -> TrainingEstimate {
    let mut est = split_beam_estimate(obs, pilots, cfg, Scheme::FarFieldRainbow);
    est.alpha_hat = 0.0;
    est
}

pub fn nearfield_rainbow_train<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    channel: &Channel,
    rings: usize,
    snr: f64,
    seed: u64,
    rng: &mut R,
) -> TrainingEstimate {
    let pilots = nearfield_rainbow_pilots(cfg, rings);
    let obs = observe(cfg, channel, &pilots, snr, seed, rng);
    nearfield_rainbow_estimate(&obs, &pilots, cfg)
}

pub fn farfield_rainbow_train<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    channel: &Channel,
    snr: f64,
    seed: u64,
    rng: &mut R,
) -> TrainingEstimate {
    let pilots = farfield_rainbow_pilots(cfg);
    let obs = observe(cfg, channel, &pilots, snr, seed, rng);
    farfield_rainbow_estimate(&obs, &pilots, cfg)
}

/// Serving beamformer `conj(b_m(theta_hat, alpha_hat))`, unit norm.
///
/// The conjugate appears because signals are formed as `h^T w`.
pub fn serve_beamformer(estimate: &TrainingEstimate, cfg: &SystemConfig, m: usize) -> SteeringVector {
    let f = cfg.subcarrier_freq(m + 1).expect("subcarrier in range");
    approx_steering(cfg, estimate.location(), f).conj()
}

/// Matched beamformer `conj(h_m) / |h_m|`.
pub fn perfect_csi_beamformer(channel: &Channel, m: usize) -> SteeringVector {
    channel.per_subcarrier[m].conj().normalized()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{los_channel, los_channel_with, SteeringModel};
    use crate::design::{design, DesignInputs};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn desk_plan() -> PilotPlan {
        design(&DesignInputs::new(SystemConfig::desk(), 1.0).with_k(2)).unwrap()
    }

    fn small_cfg() -> SystemConfig {
        SystemConfig::new(16, 10e9, 1e9, 32).unwrap()
    }

    #[test]
    fn noiseless_pilot_matches_kernel_gain() {
        let plan = desk_plan();
        let cfg = &plan.cfg;
        let ch = los_channel_with(cfg, 0.2, 15.0, SteeringModel::Fresnel).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = simulate_pilot(&ch, &plan, 1, f64::INFINITY, &mut rng);
        let loc = PolarLocation::from_distance(0.2, 15.0).unwrap();
        let sqrt_n = (cfg.n_antennas as f64).sqrt();
        for (m, f) in cfg.subcarrier_freqs().into_iter().enumerate().step_by(17) {
            let want = sqrt_n * ch.path_gains[m] * crate::beamsplit::tdps_gain(&plan.pilot_params(1), cfg, loc, f);
            assert!((g[m] - want).abs() < 1e-9 * sqrt_n * ch.path_gains[m], "m={m}");
        }
    }

    #[test]
    fn noise_calibration() {
        let cfg = small_cfg();
        let ch = Channel::zero(&cfg, 1e-3);
        let snr = 10.0;
        let sigma2 = noise_sigma(&cfg, 1e-3, snr).powi(2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let z = unit_noise(&mut rng, 10_000);
        let sigma = sigma2.sqrt();
        let mean = z.iter().map(|n| (n * sigma).norm_sqr()).sum::<f64>() / 10_000.0;
        assert!((mean / sigma2 - 1.0).abs() < 0.05, "{}", mean / sigma2);
        let pilots = PilotSet::new(&cfg, vec![TdPsParams::zero()], 0);
        let obs = observe(&cfg, &ch, &pilots, snr, 0, &mut rng);
        assert!(obs.magnitudes.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn observation_is_deterministic() {
        let plan = desk_plan();
        let ch = los_channel(&plan.cfg, -0.1, 30.0).unwrap();
        let pilots = PilotSet::from_plan(&plan);
        let a = observe(&plan.cfg, &ch, &pilots, 10.0, 5, &mut ChaCha8Rng::seed_from_u64(5));
        let b = observe(&plan.cfg, &ch, &pilots, 10.0, 5, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
    }

    #[test]
    fn tie_rule_picks_first() {
        let obs = ObservationGrid {
            n_subcarriers: 4,
            n_pilots: 3,
            magnitudes: vec![1.0; 12],
            snr: 1.0,
            seed: 0,
        };
        assert_eq!(obs.argmax(), (0, 0));
    }

    fn focus_user(plan: &PilotPlan, m: usize, k: usize) -> (BeamFocus, Channel) {
        let cfg = &plan.cfg;
        let pilots = PilotSet::from_plan(plan);
        let f = cfg.subcarrier_freq(m + 1).unwrap();
        let (focus, clamped) = pilots.focus(cfg, k, f);
        assert!(!clamped);
        let r = focus.location().distance();
        (
            focus,
            los_channel_with(cfg, focus.theta, r, SteeringModel::Fresnel).unwrap(),
        )
    }

    #[test]
    fn noiseless_focus_user_recovered() {
        let plan = desk_plan();
        let cfg = &plan.cfg;
        let pilots = PilotSet::from_plan(&plan);
        let (focus, ch) = focus_user(&plan, 200, 1);
        let obs = observe(cfg, &ch, &pilots, f64::INFINITY, 0, &mut ChaCha8Rng::seed_from_u64(0));
        let e = ongrid_train(&obs, &pilots, cfg);
        assert!((e.theta_hat - focus.theta).abs() < 1e-6 && (e.alpha_hat - focus.alpha).abs() < 1e-6);
        let e = aux_pair_train(&obs, &pilots, cfg);
        assert!(
            (e.theta_hat - focus.theta).abs() < 1e-6 && (e.alpha_hat - focus.alpha).abs() < 1e-6,
            "{e:?}"
        );
        let bank = bank_from_locations(cfg, &pilots, &[PolarLocation::new(0.1, 0.02), focus.location()]);
        let e = match_filter_train(&obs, &bank);
        assert_eq!(e.selected, (1, 0));
        assert!((e.theta_hat - focus.theta).abs() < 1e-12);
    }

    #[test]
    fn aux_pair_beats_grid_between_foci() {
        let cfg = SystemConfig::new(64, 7.5e9, 1.25e9, 256).unwrap();
        let plan = design(&DesignInputs::new(cfg, 1.0)).unwrap();
        assert_eq!(plan.k, 1);
        let cfg = &plan.cfg;
        let pilots = PilotSet::from_plan(&plan);
        let (fa, _) = pilots.focus(cfg, 0, cfg.subcarrier_freq(121).unwrap());
        let (fb, _) = pilots.focus(cfg, 0, cfg.subcarrier_freq(122).unwrap());
        assert_eq!(fa.p, fb.p);
        // Slightly off the midpoint so one beam is strictly strongest.
        let t = 0.4;
        let user = PolarLocation::new(
            fa.theta + t * (fb.theta - fa.theta),
            fa.alpha + t * (fb.alpha - fa.alpha),
        );
        let ch = los_channel_with(cfg, user.theta, user.distance(), SteeringModel::Fresnel).unwrap();
        let obs = observe(cfg, &ch, &pilots, f64::INFINITY, 0, &mut ChaCha8Rng::seed_from_u64(0));
        let grid = ongrid_train(&obs, &pilots, cfg);
        let aux = aux_pair_train(&obs, &pilots, cfg);
        assert!(!aux.fallback);
        assert_eq!(grid.selected, (120, 0));
        let err = |e: &TrainingEstimate| (e.theta_hat - user.theta).abs();
        assert!(err(&aux) < 0.5 * err(&grid), "aux {} grid {}", err(&aux), err(&grid));
    }

    #[test]
    fn bank_signature_recomputes() {
        let plan = desk_plan();
        let cfg = &plan.cfg;
        let pilots = PilotSet::from_plan(&plan);
        let bank = build_match_filter_bank(cfg, &pilots, 8, 3);
        assert_eq!(bank.signatures.len(), 8 * 3 * cfg.n_subcarriers * plan.k);
        let g = 13;
        let loc = bank.grid.grid[g];
        let sig = bank.signature(g);
        for k in 0..plan.k {
            for m in [0, 77, cfg.n_subcarriers - 1] {
                let f = cfg.subcarrier_freq(m + 1).unwrap();
                let want = crate::beamsplit::tdps_gain(&plan.pilot_params(k), cfg, loc, f);
                assert!((sig[k * cfg.n_subcarriers + m] - want).abs() < 1e-12);
            }
        }
        let t = bank.truncated(1);
        assert_eq!(t.signature(g), &sig[..cfg.n_subcarriers]);
    }

    #[test]
    fn single_point_bank_peaks_at_focus() {
        let plan = desk_plan();
        let cfg = &plan.cfg;
        let pilots = PilotSet::from_plan(&plan);
        let (focus, _) = focus_user(&plan, 90, 0);
        let bank = bank_from_locations(cfg, &pilots, &[focus.location()]);
        let peak = bank.signature(0).iter().cloned().fold(0.0, f64::max);
        assert!((peak - 1.0).abs() < 1e-9);
        assert!((bank.signature(0)[90] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn permuted_bank_swaps_winner() {
        let plan = desk_plan();
        let cfg = &plan.cfg;
        let pilots = PilotSet::from_plan(&plan);
        let (a, ch) = focus_user(&plan, 40, 0);
        let (b, _) = focus_user(&plan, 180, 1);
        let obs = observe(cfg, &ch, &pilots, f64::INFINITY, 0, &mut ChaCha8Rng::seed_from_u64(0));
        let ab = bank_from_locations(cfg, &pilots, &[a.location(), b.location()]);
        let ba = bank_from_locations(cfg, &pilots, &[b.location(), a.location()]);
        assert_eq!(match_filter_train(&obs, &ab).selected.0, 0);
        assert_eq!(match_filter_train(&obs, &ba).selected.0, 1);
    }

    #[test]
    fn exhaustive_matches_brute_force() {
        let cfg = small_cfg();
        let cb = PolarCodebook::uniform(&cfg, 8, 2);
        let user = cb.grid[11];
        let ch = los_channel_with(&cfg, user.theta, user.distance(), SteeringModel::Fresnel).unwrap();
        let e = exhaustive_polar_train(&cfg, &ch, &cb, f64::INFINITY, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(e.pilots_used, 16);
        assert_eq!(e.selected, (5, 1));
        assert_eq!(e.location(), user);
        // Brute force over codewords with explicit vectors.
        let ch = los_channel(&cfg, 0.33, 12.0).unwrap();
        let signals = codebook_signals(&cfg, &ch, &cb);
        let mut best = (0, f64::NEG_INFINITY);
        for g in 0..cb.len() {
            let mut p = 0.0;
            for (m, f) in cfg.subcarrier_freqs().into_iter().enumerate() {
                let y = ch.per_subcarrier[m].dot(&cb.codeword(&cfg, g, f).conj());
                assert!((y - signals[g * cfg.n_subcarriers + m]).norm() < 1e-12 * ch.beta_c.max(1e-300) * 10.0);
                p += y.norm_sqr();
            }
            if p > best.1 {
                best = (g, p);
            }
        }
        let e = exhaustive_polar_train(&cfg, &ch, &cb, f64::INFINITY, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(e.location(), cb.grid[best.0]);
    }

    #[test]
    fn rainbow_pilots() {
        let cfg = SystemConfig::desk();
        let nf = nearfield_rainbow_pilots(&cfg, 10);
        assert_eq!(nf.len(), 10);
        let rings = cell_centres(cfg.alpha_min(), cfg.alpha_max(), 10);
        for (s, ring) in rings.iter().enumerate() {
            for m in [1, 100, 256] {
                let f = cfg.subcarrier_freq(m).unwrap();
                let focus = crate::beamsplit::predicted_focus(&nf.params[s], 0, &cfg, f).unwrap();
                assert_eq!(focus.alpha, *ring);
            }
        }
        let f1 = cfg.subcarrier_freq(1).unwrap();
        let fm = cfg.subcarrier_freq(256).unwrap();
        let t1 = crate::beamsplit::predicted_focus(&nf.params[0], 0, &cfg, f1)
            .unwrap()
            .theta;
        assert!((t1 - 1.0).abs() < 1e-9);
        // Above the carrier a grating alias is also visible; the sweep itself ends at -1.
        let ends = crate::beamsplit::focus_aliases(&nf.params[0], 0, &cfg, fm);
        assert!(ends.iter().any(|a| a.p == 0 && (a.theta + 1.0).abs() < 1e-9));
    }

    #[test]
    fn rainbow_recovers_ring_user() {
        let cfg = SystemConfig::desk();
        let rings = cell_centres(cfg.alpha_min(), cfg.alpha_max(), 10);
        let user = PolarLocation::new(0.21, rings[6]);
        let ch = los_channel_with(&cfg, user.theta, user.distance(), SteeringModel::Fresnel).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let e = nearfield_rainbow_train(&cfg, &ch, 10, f64::INFINITY, 0, &mut rng);
        assert_eq!(e.pilots_used, 10);
        let fc = cfg.carrier_freq;
        assert!((e.theta_hat - user.theta).abs() <= angle_beamwidth(&cfg, fc));
        assert!((e.alpha_hat - user.alpha).abs() <= 0.5 * (rings[1] - rings[0]) + 1e-12);
    }

    #[test]
    fn farfield_rainbow_far_user() {
        let cfg = SystemConfig::desk();
        let r = 50.0 * cfg.rayleigh_distance();
        let ch = los_channel(&cfg, -0.37, r).unwrap();
        let e = farfield_rainbow_train(&cfg, &ch, f64::INFINITY, 0, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(e.pilots_used, 1);
        assert_eq!(e.alpha_hat, 0.0);
        assert!((e.theta_hat + 0.37).abs() <= angle_beamwidth(&cfg, cfg.carrier_freq));
    }

    #[test]
    fn serving_beams() {
        let cfg = SystemConfig::desk();
        let loc = PolarLocation::from_distance(0.4, 12.0).unwrap();
        let est = TrainingEstimate::new(loc.theta, loc.alpha, (0, 0), Scheme::OnGrid, 1);
        let f = cfg.subcarrier_freq(11).unwrap();
        let w = serve_beamformer(&est, &cfg, 10);
        assert!((w.norm() - 1.0).abs() < 1e-12);
        assert!((w.dot(&approx_steering(&cfg, loc, f)).norm() - 1.0).abs() < 1e-12);
        let far = TrainingEstimate::new(0.4, 0.0, (0, 0), Scheme::FarFieldRainbow, 1);
        let w = serve_beamformer(&far, &cfg, 10);
        assert_eq!(w, approx_steering(&cfg, PolarLocation::new(0.4, 0.0), f).conj());
        let ch = los_channel(&cfg, 0.4, 12.0).unwrap();
        let p = perfect_csi_beamformer(&ch, 10);
        let h = &ch.per_subcarrier[10];
        assert!((h.dot(&p).norm() - h.norm()).abs() < 1e-12 * h.norm());
    }

    #[test]
    fn estimates_are_clamped() {
        let e = TrainingEstimate::new(1.2, -0.1, (0, 0), Scheme::OnGrid, 1);
        assert_eq!((e.theta_hat, e.alpha_hat, e.clamped), (1.0, 0.0, true));
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("bogus".parse::<Scheme>().is_err());
    }
}
