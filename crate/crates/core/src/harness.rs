//! Experiment orchestration: rate metrics, seeded Monte Carlo sweeps, beam
//! pattern dumps and pilot bookkeeping.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::{SystemTime, UNIX_EPOCH};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::array::{approx_steering, cell_centres, los_channel, Channel, PolarCodebook, PolarLocation, SystemConfig};
use crate::beamsplit::{gain_kernel, kernel_args, predicted_focus};
use crate::design::{design, DesignInputs, PilotPlan};
use crate::error::{Error, Result};
use crate::training::{
    aux_pair_train, build_match_filter_bank, codebook_signals, exhaustive_select, farfield_rainbow_estimate,
    farfield_rainbow_pilots, match_filter_train, nearfield_rainbow_estimate, nearfield_rainbow_pilots, noise_sigma,
    noisy_magnitudes, ongrid_train, perfect_csi_beamformer, serve_beamformer, unit_noise, MatchFilterBank,
    ObservationGrid, PilotSet, Scheme, TrainingEstimate,
};

/// Average rate under the Fresnel model for a served estimate:
/// `(1/M) sum_m log2(1 + snr |b_m(true)^T conj(b_m(est))|^2)`.
pub fn rate_metric(cfg: &SystemConfig, true_loc: PolarLocation, estimate: PolarLocation, snr: f64) -> f64 {
    let freqs = cfg.subcarrier_freqs();
    let total: f64 = freqs
        .iter()
        .map(|&f| {
            let g = approx_steering(cfg, true_loc, f)
                .hdot(&approx_steering(cfg, estimate, f))
                .norm();
            (1.0 + snr * g * g).log2()
        })
        .sum();
    total / freqs.len() as f64
}

/// Average rate of per-subcarrier beams on a given channel, with the gain
/// normalised by `|h_m|` so that `snr` is the matched-beam SNR.
pub fn channel_rate<F>(channel: &Channel, snr: f64, beam: F) -> f64
where
    F: Fn(usize) -> crate::array::SteeringVector,
{
    let m_count = channel.n_subcarriers();
    let total: f64 = (0..m_count)
        .map(|m| {
            let h = &channel.per_subcarrier[m];
            let nh = h.norm();
            let g = if nh > 0.0 { h.dot(&beam(m)).norm() / nh } else { 0.0 };
            (1.0 + snr * g * g).log2()
        })
        .sum();
    total / m_count as f64
}

/// Rate of matched-filter serving with full channel knowledge.
pub fn perfect_rate(channel: &Channel, snr: f64) -> f64 {
    channel_rate(channel, snr, |m| perfect_csi_beamformer(channel, m))
}

/// Rate of serving an estimate on the channel.
pub fn estimate_rate(cfg: &SystemConfig, channel: &Channel, estimate: &TrainingEstimate, snr: f64) -> f64 {
    channel_rate(channel, snr, |m| serve_beamformer(estimate, cfg, m))
}

/// What a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    SnrDb,
    /// Pilot budget per training round.
    Overhead,
    /// Fixed user distance in metres.
    DistanceM,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::SnrDb => "snr_db",
            SweepAxis::Overhead => "overhead",
            SweepAxis::DistanceM => "distance_m",
        }
    }
}

fn default_snr_db() -> f64 {
    15.0
}

fn default_rings() -> usize {
    10
}

/// A Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub design: DesignInputs,
    pub schemes: Vec<Scheme>,
    pub sweep_axis: SweepAxis,
    pub axis_values: Vec<f64>,
    pub n_trials: usize,
    pub master_seed: u64,
    /// Angle and ring samples of the match-filter bank and exhaustive codebook.
    pub bank_dims: (usize, usize),
    /// SNR used when the axis is not SNR.
    #[serde(default = "default_snr_db")]
    pub snr_db: f64,
    /// Rings swept by the near-field rainbow baseline.
    #[serde(default = "default_rings")]
    pub rainbow_rings: usize,
}

impl ExperimentSpec {
    /// Every scheme over an SNR axis on the given design.
    pub fn snr_sweep(design: DesignInputs, snr_db: Vec<f64>, n_trials: usize, seed: u64) -> Self {
        let l = 4 * design.cfg.n_antennas;
        Self {
            design,
            schemes: Scheme::ALL.to_vec(),
            sweep_axis: SweepAxis::SnrDb,
            axis_values: snr_db,
            n_trials,
            master_seed: seed,
            bank_dims: (l, 10),
            snr_db: default_snr_db(),
            rainbow_rings: default_rings(),
        }
    }

    pub fn cfg(&self) -> &SystemConfig {
        &self.design.cfg
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.design.validate()?;
        if self.n_trials == 0 {
            return Err(Error::InvalidConfig("n_trials must be at least 1".into()));
        }
        if self.axis_values.is_empty() {
            return Err(Error::InvalidConfig("axis_values is empty".into()));
        }
        if self.axis_values.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(Error::InvalidConfig("axis_values must be sorted ascending".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::InvalidConfig("no schemes requested".into()));
        }
        let needs_bank = self
            .schemes
            .iter()
            .any(|s| matches!(s, Scheme::MatchFilter | Scheme::Exhaustive));
        if needs_bank && (self.bank_dims.0 == 0 || self.bank_dims.1 == 0) {
            return Err(Error::Mismatch("bank dimensions must be positive".into()));
        }
        if self.rainbow_rings == 0 {
            return Err(Error::InvalidConfig("rainbow_rings must be at least 1".into()));
        }
        match self.sweep_axis {
            SweepAxis::Overhead => {
                if self.axis_values.iter().any(|v| *v < 0.0 || v.fract() != 0.0) {
                    return Err(Error::InvalidConfig(
                        "overhead values must be non-negative integers".into(),
                    ));
                }
            }
            SweepAxis::DistanceM => {
                if self.axis_values.iter().any(|v| !(*v > 0.0)) {
                    return Err(Error::InvalidConfig("distances must be positive".into()));
                }
            }
            SweepAxis::SnrDb => {}
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serialises");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// Mean rate of one scheme at one axis value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub scheme: Scheme,
    pub axis_value: f64,
    pub mean_rate: f64,
    pub std_error: f64,
    pub pilots_used: usize,
    pub n_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint>,
    pub spec_hash: String,
    pub master_seed: u64,
    /// Seconds since the Unix epoch when the sweep finished.
    pub timestamp: u64,
}

impl SweepResult {
    pub fn point(&self, scheme: Scheme, axis_value: f64) -> Option<&SweepPoint> {
        self.points
            .iter()
            .find(|p| p.scheme == scheme && p.axis_value == axis_value)
    }

    pub fn mean(&self, scheme: Scheme, axis_value: f64) -> f64 {
        self.point(scheme, axis_value).map_or(f64::NAN, |p| p.mean_rate)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("scheme,{},mean_rate,std_error,pilots_used,n_trials\n", self.axis.name());
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                p.scheme, p.axis_value, p.mean_rate, p.std_error, p.pilots_used, p.n_trials
            );
        }
        out
    }
}

/// Mean and standard error `std / sqrt(n)` with the unbiased sample deviation.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Independent RNG stream for one trial and purpose.
pub fn trial_rng(master_seed: u64, trial: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((trial as u64) << 8) | purpose);
    rng
}

const USER_STREAM: u64 = 1;
const PROPOSED_STREAM: u64 = 2;
const NEAR_RAINBOW_STREAM: u64 = 3;
const FAR_RAINBOW_STREAM: u64 = 4;
const EXHAUSTIVE_STREAM: u64 = 5;

/// Draws a user uniformly in physical angle over +-60 degrees and in distance.
pub fn draw_user<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> (f64, f64) {
    let half = std::f64::consts::FRAC_PI_3;
    let phi = rng.random_range(-half..=half);
    let [r_min, r_max] = cfg.distance_range;
    let r = rng.random_range(r_min..=r_max);
    (phi.sin(), r)
}

/// Offline state shared by all trials.
struct SweepSetup {
    cfg: SystemConfig,
    /// Proposed pilots and banks for each distinct budget (index = pilot count).
    proposed: Vec<Option<(PilotSet, Option<MatchFilterBank>)>>,
    near_rainbow: BTreeMap<usize, PilotSet>,
    far_rainbow: PilotSet,
    codebook: Option<PolarCodebook>,
    plan: PilotPlan,
}

fn budgets(spec: &ExperimentSpec, cap: usize) -> Vec<usize> {
    match spec.sweep_axis {
        SweepAxis::Overhead => spec.axis_values.iter().map(|v| (*v as usize).min(cap)).collect(),
        _ => vec![cap; spec.axis_values.len()],
    }
}

fn setup(spec: &ExperimentSpec) -> Result<SweepSetup> {
    let cfg = spec.cfg().clone();
    let plan = design(&spec.design)?;
    let full = PilotSet::from_plan(&plan);
    let wants = |s: Scheme| spec.schemes.contains(&s);
    let needs_proposed = wants(Scheme::OnGrid) || wants(Scheme::AuxPair) || wants(Scheme::MatchFilter);
    let mut proposed: Vec<Option<(PilotSet, Option<MatchFilterBank>)>> = vec![None; plan.k + 1];
    if needs_proposed {
        let full_bank = wants(Scheme::MatchFilter)
            .then(|| build_match_filter_bank(&cfg, &full, spec.bank_dims.0, spec.bank_dims.1));
        for b in budgets(spec, plan.k) {
            if b == 0 || proposed[b].is_some() {
                continue;
            }
            let bank = full_bank.as_ref().map(|bank| bank.truncated(b));
            proposed[b] = Some((full.truncated(b), bank));
        }
    }
    let mut near_rainbow = BTreeMap::new();
    if wants(Scheme::NearFieldRainbow) {
        for b in budgets(spec, spec.rainbow_rings) {
            if b > 0 {
                near_rainbow
                    .entry(b)
                    .or_insert_with(|| nearfield_rainbow_pilots(&cfg, b));
            }
        }
    }
    let codebook = wants(Scheme::Exhaustive).then(|| PolarCodebook::uniform(&cfg, spec.bank_dims.0, spec.bank_dims.1));
    Ok(SweepSetup {
        far_rainbow: farfield_rainbow_pilots(&cfg),
        cfg,
        proposed,
        near_rainbow,
        codebook,
        plan,
    })
}

/// Rates and pilot counts of every scheme at every axis value for one trial.
type TrialOutcome = Vec<Vec<(f64, usize)>>;

fn observation(
    cfg: &SystemConfig,
    signals: &[Complex64],
    noise: &[Complex64],
    sigma: f64,
    pilots: usize,
    snr: f64,
    seed: u64,
) -> ObservationGrid {
    let len = pilots * cfg.n_subcarriers;
    ObservationGrid {
        n_subcarriers: cfg.n_subcarriers,
        n_pilots: pilots,
        magnitudes: noisy_magnitudes(&signals[..len], &noise[..len], sigma),
        snr,
        seed,
    }
}

fn run_trial(spec: &ExperimentSpec, st: &SweepSetup, trial: usize) -> Result<TrialOutcome> {
    let cfg = &st.cfg;
    let seed = spec.master_seed;
    let (theta, r_drawn) = draw_user(cfg, &mut trial_rng(seed, trial, USER_STREAM));
    let n_axis = spec.axis_values.len();
    let proposed_budget = budgets(spec, st.plan.k);
    let rainbow_budget = budgets(spec, spec.rainbow_rings);
    let full = st.proposed.iter().rev().flatten().next();
    let distance_axis = spec.sweep_axis == SweepAxis::DistanceM;

    // Unit noise draws shared across axis values.
    let prop_noise = full.map(|(p, _)| {
        unit_noise(
            &mut trial_rng(seed, trial, PROPOSED_STREAM),
            p.len() * cfg.n_subcarriers,
        )
    });
    let near_noise: BTreeMap<usize, Vec<Complex64>> = st
        .near_rainbow
        .keys()
        .map(|&b| {
            (
                b,
                unit_noise(&mut trial_rng(seed, trial, NEAR_RAINBOW_STREAM), b * cfg.n_subcarriers),
            )
        })
        .collect();
    let far_noise = unit_noise(&mut trial_rng(seed, trial, FAR_RAINBOW_STREAM), cfg.n_subcarriers);
    let exh_noise = st.codebook.as_ref().map(|cb| {
        unit_noise(
            &mut trial_rng(seed, trial, EXHAUSTIVE_STREAM),
            cb.len() * cfg.n_subcarriers,
        )
    });

    let mut cached: Option<(f64, Channel, Signals)> = None;
    let mut out = Vec::with_capacity(n_axis);
    for (ai, &value) in spec.axis_values.iter().enumerate() {
        let r = if distance_axis { value } else { r_drawn };
        let snr_db = if spec.sweep_axis == SweepAxis::SnrDb {
            value
        } else {
            spec.snr_db
        };
        let snr = 10f64.powf(snr_db / 10.0);
        if cached.as_ref().is_none_or(|(cr, _, _)| *cr != r) {
            let ch = los_channel(cfg, theta, r)?;
            let sig = Signals::compute(st, &ch, spec);
            cached = Some((r, ch, sig));
        }
        let (_, ch, sig) = cached.as_ref().expect("channel cached");
        let sigma = noise_sigma(cfg, ch.beta_c, snr);
        let obs_seed = seed ^ trial as u64;
        let mut row = Vec::with_capacity(spec.schemes.len());
        for &scheme in &spec.schemes {
            let outcome = match scheme {
                Scheme::PerfectCsi => (perfect_rate(ch, snr), 0),
                Scheme::OnGrid | Scheme::AuxPair | Scheme::MatchFilter => {
                    let b = proposed_budget[ai];
                    match (b, &st.proposed[b]) {
                        (0, _) | (_, None) => (0.0, 0),
                        (_, Some((pilots, bank))) => {
                            let obs = observation(
                                cfg,
                                sig.proposed.as_ref().expect("proposed signals"),
                                prop_noise.as_ref().expect("proposed noise"),
                                sigma,
                                b,
                                snr,
                                obs_seed,
                            );
                            let est = match scheme {
                                Scheme::OnGrid => ongrid_train(&obs, pilots, cfg),
                                Scheme::AuxPair => aux_pair_train(&obs, pilots, cfg),
                                _ => match_filter_train(
                                    &obs,
                                    bank.as_ref().ok_or_else(|| Error::Mismatch("no bank".into()))?,
                                ),
                            };
                            (estimate_rate(cfg, ch, &est, snr), est.pilots_used)
                        }
                    }
                }
                Scheme::NearFieldRainbow => {
                    let b = rainbow_budget[ai];
                    match st.near_rainbow.get(&b) {
                        None => (0.0, 0),
                        Some(pilots) => {
                            let obs = observation(cfg, &sig.near[&b], &near_noise[&b], sigma, b, snr, obs_seed);
                            let est = nearfield_rainbow_estimate(&obs, pilots, cfg);
                            (estimate_rate(cfg, ch, &est, snr), est.pilots_used)
                        }
                    }
                }
                Scheme::FarFieldRainbow => {
                    if spec.sweep_axis == SweepAxis::Overhead && value < 1.0 {
                        (0.0, 0)
                    } else {
                        let obs = observation(cfg, &sig.far, &far_noise, sigma, 1, snr, obs_seed);
                        let est = farfield_rainbow_estimate(&obs, &st.far_rainbow, cfg);
                        (estimate_rate(cfg, ch, &est, snr), est.pilots_used)
                    }
                }
                Scheme::Exhaustive => {
                    let cb = st.codebook.as_ref().expect("codebook built");
                    let budget = match spec.sweep_axis {
                        SweepAxis::Overhead => (value as usize).min(cb.len()),
                        _ => cb.len(),
                    };
                    if budget == 0 {
                        (0.0, 0)
                    } else {
                        let est = exhaustive_select(
                            cb,
                            cfg.n_subcarriers,
                            sig.exhaustive.as_ref().expect("codebook signals"),
                            exh_noise.as_ref().expect("codebook noise"),
                            sigma,
                            budget,
                        );
                        (estimate_rate(cfg, ch, &est, snr), est.pilots_used)
                    }
                }
            };
            row.push(outcome);
        }
        out.push(row);
    }
    Ok(out)
}

/// Noiseless received signals of every pilot family for one channel.
struct Signals {
    proposed: Option<Vec<Complex64>>,
    near: BTreeMap<usize, Vec<Complex64>>,
    far: Vec<Complex64>,
    exhaustive: Option<Vec<Complex64>>,
}

impl Signals {
    fn compute(st: &SweepSetup, ch: &Channel, spec: &ExperimentSpec) -> Self {
        let wants = |s: Scheme| spec.schemes.contains(&s);
        Self {
            proposed: st.proposed.iter().rev().flatten().next().map(|(p, _)| p.signals(ch)),
            near: st.near_rainbow.iter().map(|(&b, p)| (b, p.signals(ch))).collect(),
            far: if wants(Scheme::FarFieldRainbow) {
                st.far_rainbow.signals(ch)
            } else {
                Vec::new()
            },
            exhaustive: st.codebook.as_ref().map(|cb| codebook_signals(&st.cfg, ch, cb)),
        }
    }
}

/// Runs the Monte Carlo sweep. Results depend only on the spec, not on
/// thread count: trials draw from their own streams and are reduced in order.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<SweepResult> {
    spec.validate()?;
    let st = setup(spec)?;
    let trials: Vec<TrialOutcome> = (0..spec.n_trials)
        .into_par_iter()
        .map(|t| run_trial(spec, &st, t))
        .collect::<Result<_>>()?;
    let mut points = Vec::new();
    for (ai, &value) in spec.axis_values.iter().enumerate() {
        for (si, &scheme) in spec.schemes.iter().enumerate() {
            let rates: Vec<f64> = trials.iter().map(|t| t[ai][si].0).collect();
            let (mean_rate, std_error) = mean_and_se(&rates);
            points.push(SweepPoint {
                scheme,
                axis_value: value,
                mean_rate,
                std_error,
                pilots_used: trials[0][ai][si].1,
                n_trials: spec.n_trials,
            });
        }
    }
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    Ok(SweepResult {
        axis: spec.sweep_axis,
        points,
        spec_hash: spec.hash(),
        master_seed: spec.master_seed,
        timestamp,
    })
}

/// Pilot slots each scheme needs for one training round.
pub fn pilots_required(scheme: Scheme, plan: &PilotPlan, bank_dims: (usize, usize), rainbow_rings: usize) -> usize {
    match scheme {
        Scheme::PerfectCsi => 0,
        Scheme::Exhaustive => bank_dims.0 * bank_dims.1,
        Scheme::MatchFilter | Scheme::AuxPair | Scheme::OnGrid => plan.k,
        Scheme::NearFieldRainbow => rainbow_rings,
        Scheme::FarFieldRainbow => 1,
    }
}

/// One predicted focus of the beam pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternRow {
    /// Pilot, 1-based.
    pub k: usize,
    /// Subcarrier, 1-based.
    pub m: usize,
    pub freq: f64,
    pub theta: f64,
    pub alpha: f64,
    /// Wrap integer of the focus.
    pub p: i64,
    /// Distance in metres; `None` on or beyond the far-field ring.
    pub distance: Option<f64>,
}

const PATTERN_HEADER: &str = "k,m,f_hz,theta,alpha,p,r_m,far_field";

/// Foci of every `(pilot, subcarrier)` beam. Beams with no focus inside
/// `[-1, 1]` are left out.
pub fn dump_beam_pattern(plan: &PilotPlan, cfg: &SystemConfig) -> Vec<PatternRow> {
    let mut rows = Vec::with_capacity(plan.k * cfg.n_subcarriers);
    for k in 0..plan.n_pilots() {
        let params = plan.pilot_params(k);
        for (mi, f) in cfg.subcarrier_freqs().into_iter().enumerate() {
            let Ok(focus) = predicted_focus(&params, plan.q, cfg, f) else {
                continue;
            };
            let distance = (focus.alpha > 0.0).then(|| (1.0 - focus.theta * focus.theta) / (2.0 * focus.alpha));
            rows.push(PatternRow {
                k: k + 1,
                m: mi + 1,
                freq: f,
                theta: focus.theta,
                alpha: focus.alpha,
                p: focus.p,
                distance,
            });
        }
    }
    rows
}

pub fn pattern_to_csv(rows: &[PatternRow]) -> String {
    let mut out = String::with_capacity(rows.len() * 80);
    out.push_str(PATTERN_HEADER);
    out.push('\n');
    for r in rows {
        let (dist, far) = match r.distance {
            Some(d) => (d.to_string(), 0),
            None => (String::new(), 1),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.k, r.m, r.freq, r.theta, r.alpha, r.p, dist, far
        );
    }
    out
}

pub fn pattern_from_csv(text: &str) -> Result<Vec<PatternRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(PATTERN_HEADER) {
        return Err(Error::Parse("unexpected pattern header".into()));
    }
    let bad = |line: &str| Error::Parse(format!("malformed pattern row `{line}`"));
    lines
        .map(|line| {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 8 {
                return Err(bad(line));
            }
            let num = |i: usize| cells[i].parse::<f64>().map_err(|_| bad(line));
            let int = |i: usize| cells[i].parse::<i64>().map_err(|_| bad(line));
            let distance = match cells[7] {
                "1" => None,
                "0" => Some(num(6)?),
                _ => return Err(bad(line)),
            };
            Ok(PatternRow {
                k: int(0)? as usize,
                m: int(1)? as usize,
                freq: num(2)?,
                theta: num(3)?,
                alpha: num(4)?,
                p: int(5)?,
                distance,
            })
        })
        .collect()
}

/// Fraction of a cell-centred `n_theta x n_alpha` grid over the service
/// region where some `(pilot, subcarrier)` beam reaches gain `1/sqrt(2)`.
pub fn coverage_fraction(plan: &PilotPlan, n_theta: usize, n_alpha: usize) -> f64 {
    let cfg = &plan.cfg;
    let [lo, hi] = cfg.angle_range;
    let thetas = cell_centres(lo, hi, n_theta);
    let alphas = cell_centres(plan.alpha_min, plan.alpha_max, n_alpha);
    let freqs = cfg.subcarrier_freqs();
    let d = cfg.spacing();
    let period = 2.0 * std::f64::consts::PI / d;
    // Main lobe of the angle factor; wider candidates cannot reach the threshold.
    let window = 2.0 * period / cfg.n_antennas as f64;
    let threshold = std::f64::consts::FRAC_1_SQRT_2;
    let covered: usize = thetas
        .par_iter()
        .map(|&theta| {
            alphas
                .iter()
                .filter(|&&alpha| {
                    let loc = PolarLocation::new(theta, alpha);
                    (0..plan.n_pilots()).any(|k| {
                        let params = plan.pilot_params(k);
                        freqs.iter().any(|&f| {
                            let (x, y) = kernel_args(&params, cfg, loc, f);
                            let reduced = x - period * (x / period).round();
                            reduced.abs() <= window && gain_kernel(cfg, x, y) >= threshold
                        })
                    })
                })
                .count()
        })
        .sum();
    covered as f64 / (n_theta * n_alpha) as f64
}

/// Design inputs for a named preset.
pub fn preset_inputs(full_scale: bool) -> DesignInputs {
    if full_scale {
        DesignInputs::new(SystemConfig::full_scale(), 0.95).with_k(3)
    } else {
        DesignInputs::new(SystemConfig::desk(), 0.95).with_k(3)
    }
}
