//! TD-PS pilot design: split beams that sweep the angle range while drifting across distance rings.
//!
//! Each pilot is a TD-PS configuration whose subcarrier beams sweep the angle
//! range several times (one sweep per wrap integer `p`) while their focal ring
//! drifts from `alpha_max` at the lowest subcarrier to `alpha_min` at the
//! highest. Pilots differ only in the TD angle intercept, which shifts where
//! the final sweep ends.

use std::fmt::Write as _;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::array::{SystemConfig, SPEED_OF_LIGHT};
use crate::beamsplit::{delay_phase, td_path_length, TdPsParams, FRESNEL_3DB_BETA};
use crate::error::{Error, Result};

/// Slack accepted on the width of the `alpha_t'` feasibility interval.
const INTERVAL_SLACK: f64 = 1e-9;

/// Inputs to [`design`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignInputs {
    pub cfg: SystemConfig,
    /// Angle oversampling factor in `(0, 1]`.
    pub gamma: f64,
    /// Smallest ring curvature to cover (1/m). Defaults to the far edge of the
    /// configured distance range.
    #[serde(default)]
    pub alpha_min: Option<f64>,
    /// Largest ring curvature to cover (1/m). Defaults to the near edge.
    #[serde(default)]
    pub alpha_max: Option<f64>,
    /// Lower bound on the pilot count.
    #[serde(default)]
    pub k_override: Option<usize>,
    /// Distance PS slope to use instead of the minimal one. Must not be below it.
    #[serde(default)]
    pub alpha_p_override: Option<f64>,
}

impl DesignInputs {
    pub fn new(cfg: SystemConfig, gamma: f64) -> Self {
        Self {
            cfg,
            gamma,
            alpha_min: None,
            alpha_max: None,
            k_override: None,
            alpha_p_override: None,
        }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k_override = Some(k);
        self
    }

    pub fn with_alpha_p(mut self, alpha_p: f64) -> Self {
        self.alpha_p_override = Some(alpha_p);
        self
    }

    pub fn alpha_bounds(&self) -> (f64, f64) {
        (
            self.alpha_min.unwrap_or_else(|| self.cfg.alpha_min()),
            self.alpha_max.unwrap_or_else(|| self.cfg.alpha_max()),
        )
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let inputs: Self = serde_json::from_str(text)?;
        inputs.validate()?;
        Ok(inputs)
    }

    pub fn validate(&self) -> Result<()> {
        self.cfg.validate()?;
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "oversampling factor must lie in (0, 1], got {}",
                self.gamma
            )));
        }
        let (lo, hi) = self.alpha_bounds();
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi) {
            return Err(Error::InvalidConfig(format!(
                "ring range [{lo}, {hi}] is not ordered and non-negative"
            )));
        }
        if self.k_override == Some(0) {
            return Err(Error::InvalidConfig("pilot count must be at least 1".into()));
        }
        Ok(())
    }
}

/// Distance-side parameters of a plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceParams {
    pub alpha_p: f64,
    pub q: i64,
    pub alpha_t_interval: [f64; 2],
    pub alpha_t: f64,
    /// Minimal total distance slope `(alpha_max - alpha_min) / (f_c/f_1 - f_c/f_M)`.
    pub ratio: f64,
}

/// Full set of designed pilot parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotPlan {
    pub cfg: SystemConfig,
    pub theta_p: f64,
    pub theta_t_list: Vec<f64>,
    pub alpha_p: f64,
    pub alpha_t: f64,
    pub alpha_t_interval: [f64; 2],
    pub p1: i64,
    #[serde(rename = "pM")]
    pub p_m: i64,
    pub q: i64,
    pub k: usize,
    /// Angle reached by the highest subcarrier under each pilot.
    pub ending_directions: Vec<f64>,
    pub ratio: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
}

impl PilotPlan {
    /// TD-PS parameters of pilot `k` (0-based).
    pub fn pilot_params(&self, k: usize) -> TdPsParams {
        TdPsParams {
            theta_t: self.theta_t_list[k],
            theta_p: self.theta_p,
            alpha_t: self.alpha_t,
            alpha_p: self.alpha_p,
        }
    }

    pub fn n_pilots(&self) -> usize {
        self.theta_t_list.len()
    }

    /// Short human-readable description.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "pilots K          = {}", self.k);
        let _ = writeln!(s, "theta_p'          = {:.6}", self.theta_p);
        let _ = writeln!(s, "p_1 .. p_M        = {} .. {}", self.p1, self.p_m);
        let list: Vec<String> = self.theta_t_list.iter().map(|t| format!("{t:.4}")).collect();
        let _ = writeln!(s, "theta_t' per pilot = [{}]", list.join(", "));
        let _ = writeln!(s, "alpha_p'          = {:.6} (q = {})", self.alpha_p, self.q);
        let _ = writeln!(
            s,
            "alpha_t'          = {:.6} in [{:.6}, {:.6}]",
            self.alpha_t, self.alpha_t_interval[0], self.alpha_t_interval[1]
        );
        s
    }
}

fn sweep_bound(inputs: &DesignInputs) -> f64 {
    let c = &inputs.cfg;
    1.76 * inputs.gamma * c.f_low() * c.n_subcarriers as f64 / (c.n_antennas as f64 * c.bandwidth)
}

/// Angle PS slope `theta_p'` and top wrap integer `p_M`.
pub fn design_angle_params(inputs: &DesignInputs) -> Result<(f64, i64)> {
    if !(inputs.gamma > 0.0 && inputs.gamma <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "oversampling factor must lie in (0, 1], got {}",
            inputs.gamma
        )));
    }
    let bound = sweep_bound(inputs);
    let p_m = (bound / 2.0).floor() as i64;
    let theta_p = bound - 2.0 * p_m as f64;
    if p_m == 0 && theta_p < 1e-6 {
        warn!("angle sweep slope {theta_p:e} is degenerate");
    }
    Ok((theta_p, p_m))
}

/// Angle TD intercept of the first pilot: the highest subcarrier ends at `theta = 1`.
pub fn first_intercept(inputs: &DesignInputs, theta_p: f64, p_m: i64) -> f64 {
    ending_intercept(&inputs.cfg, 1.0, theta_p, p_m)
}

fn ending_intercept(cfg: &SystemConfig, ending: f64, theta_p: f64, p_m: i64) -> f64 {
    let f_m = highest_subcarrier(cfg);
    ending - cfg.carrier_freq / f_m * (theta_p + 2.0 * p_m as f64)
}

fn lowest_subcarrier(cfg: &SystemConfig) -> f64 {
    cfg.subcarrier_freq(1).expect("at least one subcarrier")
}

fn highest_subcarrier(cfg: &SystemConfig) -> f64 {
    cfg.subcarrier_freq(cfg.n_subcarriers).expect("at least one subcarrier")
}

/// Wrap integer of the lowest subcarrier, rounded half away from zero.
pub fn compute_p1(inputs: &DesignInputs, theta_t_1: f64, theta_p: f64) -> i64 {
    let c = &inputs.cfg;
    ((-theta_t_1 * c.f_low() / c.carrier_freq - theta_p) / 2.0).round() as i64
}

/// Distance PS slope, wrap integer and TD intercept.
///
/// The ring sweep is pinned to the outermost subcarriers: the first one
/// reaches `alpha_max` and the last reaches `alpha_min`.
pub fn design_distance_params(inputs: &DesignInputs) -> Result<DistanceParams> {
    let c = &inputs.cfg;
    let (a_min, a_max) = inputs.alpha_bounds();
    if a_min > a_max {
        return Err(Error::InvalidConfig(format!(
            "alpha_min {a_min} exceeds alpha_max {a_max}"
        )));
    }
    let fc = c.carrier_freq;
    let (lo_ratio, hi_ratio) = (fc / lowest_subcarrier(c), fc / highest_subcarrier(c));
    let ratio = (a_max - a_min) / (lo_ratio - hi_ratio);
    let d = c.spacing();
    let (alpha_p, q) = match inputs.alpha_p_override {
        None => {
            let q = (ratio * d / 2.0).floor() as i64;
            (ratio - 2.0 * q as f64 / d, q)
        }
        Some(v) => {
            if v < ratio - INTERVAL_SLACK {
                let total = v;
                return Err(Error::EmptyInterval {
                    lo: a_max - lo_ratio * total,
                    hi: a_min - hi_ratio * total,
                });
            }
            let q = (v * d / 2.0).floor() as i64;
            (v - 2.0 * q as f64 / d, q)
        }
    };
    let total = alpha_p + 2.0 * q as f64 / d;
    let lo = a_max - lo_ratio * total;
    let hi = a_min - hi_ratio * total;
    if hi - lo < -INTERVAL_SLACK {
        return Err(Error::EmptyInterval { lo, hi });
    }
    let alpha_t = 0.5 * (lo + hi);
    Ok(DistanceParams {
        alpha_p,
        q,
        alpha_t_interval: [lo, hi],
        alpha_t,
        ratio,
    })
}

/// Real-valued pilot count before rounding.
pub fn pilot_count_raw(cfg: &SystemConfig, theta_p: f64, p1: i64, dist: &DistanceParams) -> Result<f64> {
    let slope = theta_p + 2.0 * p1 as f64;
    if slope <= 0.0 {
        return Err(Error::DegenerateDesign(format!(
            "lowest-subcarrier angle slope {slope} is not positive"
        )));
    }
    let n = cfg.n_antennas as f64;
    let total = dist.alpha_p + 2.0 * dist.q as f64 / cfg.spacing();
    Ok(total * n * n * SPEED_OF_LIGHT * cfg.f_high()
        / (4.0 * slope * FRESNEL_3DB_BETA.powi(2) * cfg.carrier_freq.powi(2)))
}

/// Number of pilots so that consecutive strips overlap in distance.
pub fn pilot_count(inputs: &DesignInputs, theta_p: f64, p1: i64, dist: &DistanceParams) -> Result<usize> {
    let raw = pilot_count_raw(&inputs.cfg, theta_p, p1, dist)?;
    let formula = (raw - 1e-12).ceil().max(1.0) as usize;
    Ok(formula.max(inputs.k_override.unwrap_or(1)))
}

/// Ending directions `1 - 2(k-1)/K` and the TD intercepts that realise them.
pub fn intercepts_for_pilots(inputs: &DesignInputs, k: usize, theta_p: f64, p_m: i64) -> (Vec<f64>, Vec<f64>) {
    let endings: Vec<f64> = (0..k).map(|i| 1.0 - 2.0 * i as f64 / k as f64).collect();
    let intercepts = endings
        .iter()
        .map(|&e| ending_intercept(&inputs.cfg, e, theta_p, p_m))
        .collect();
    (endings, intercepts)
}

/// Runs the full design.
pub fn design(inputs: &DesignInputs) -> Result<PilotPlan> {
    inputs.validate()?;
    let (theta_p, p_m) = design_angle_params(inputs)?;
    let theta_t_1 = first_intercept(inputs, theta_p, p_m);
    let p1 = compute_p1(inputs, theta_t_1, theta_p);
    let dist = design_distance_params(inputs)?;
    let k = pilot_count(inputs, theta_p, p1, &dist)?;
    let (ending_directions, theta_t_list) = intercepts_for_pilots(inputs, k, theta_p, p_m);
    let (alpha_min, alpha_max) = inputs.alpha_bounds();
    Ok(PilotPlan {
        cfg: inputs.cfg.clone(),
        theta_p,
        theta_t_list,
        alpha_p: dist.alpha_p,
        alpha_t: dist.alpha_t,
        alpha_t_interval: dist.alpha_t_interval,
        p1,
        p_m,
        q: dist.q,
        k,
        ending_directions,
        ratio: dist.ratio,
        alpha_min,
        alpha_max,
    })
}

/// Delays realising each pilot's TD vector with a switchable bank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedTdNetwork {
    /// Element offsets in units of the spacing, one per row of `delays`.
    pub offsets: Vec<f64>,
    /// `delays[n][k]` in seconds.
    pub delays: Vec<Vec<f64>>,
    pub selection_bits: u32,
}

impl FixedTdNetwork {
    /// Rebuilds the TD vector of pilot `k` at frequency `f` from the stored delays.
    pub fn td_vector(&self, k: usize, f: f64) -> crate::array::SteeringVector {
        let amp = 1.0 / (self.delays.len() as f64).sqrt();
        crate::array::SteeringVector(
            self.delays
                .iter()
                .map(|row| num_complex::Complex64::from_polar(amp, delay_phase(f, row[k])))
                .collect(),
        )
    }

    /// CSV with one row per antenna and one column per pilot.
    pub fn to_csv(&self) -> String {
        let k = self.delays.first().map_or(0, |r| r.len());
        let mut out = String::new();
        let header: Vec<String> = (1..=k).map(|i| format!("pilot_{i}")).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for row in &self.delays {
            let cells: Vec<String> = row.iter().map(|t| format!("{t:.16e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Per-element delays of every pilot, plus the bits needed to select one.
pub fn fixed_td_network(plan: &PilotPlan, cfg: &SystemConfig) -> FixedTdNetwork {
    let d = cfg.spacing();
    let offsets: Vec<f64> = cfg.element_offsets().collect();
    let delays = offsets
        .iter()
        .map(|&n| {
            plan.theta_t_list
                .iter()
                .map(|&t| td_path_length(n, d, t, plan.alpha_t) / SPEED_OF_LIGHT)
                .collect()
        })
        .collect();
    let selection_bits = (plan.k.max(1) as f64).log2().ceil() as u32;
    FixedTdNetwork {
        offsets,
        delays,
        selection_bits,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamsplit::{predicted_focus, td_vector};

    fn config_a() -> DesignInputs {
        DesignInputs::new(SystemConfig::demo(), 1.0)
    }

    fn main_config() -> DesignInputs {
        DesignInputs::new(SystemConfig::full_scale(), 0.95)
    }

    #[test]
    fn angle_params() {
        let (tp, pm) = design_angle_params(&config_a()).unwrap();
        assert!((tp - 1.68).abs() < 1e-9);
        assert_eq!(pm, 15);
        let (tp, pm) = design_angle_params(&main_config()).unwrap();
        assert!((tp - 0.784).abs() < 1e-9);
        assert_eq!(pm, 18);
        let tiny = DesignInputs::new(SystemConfig::demo(), 1e-9);
        let (tp, pm) = design_angle_params(&tiny).unwrap();
        assert_eq!(pm, 0);
        assert!(tp < 1e-6);
    }

    #[test]
    fn intercept_and_p1() {
        let a = config_a();
        let t1 = first_intercept(&a, 1.68, 15);
        assert!((t1 + 27.8).abs() < 0.05, "{t1}");
        assert_eq!(compute_p1(&a, t1, 1.68), 12);
        assert_eq!(first_intercept(&a, 0.0, 0), 1.0);
        let fc_fl = a.cfg.carrier_freq / a.cfg.f_low();
        assert_eq!(compute_p1(&a, -fc_fl * 0.3, 0.3), 0);
        let m = main_config();
        let t1 = first_intercept(&m, 0.784, 18);
        assert!((t1 + 32.95).abs() < 0.02, "{t1}");
        assert_eq!(compute_p1(&m, t1, 0.784), 15);
    }

    #[test]
    fn distance_params() {
        let d = design_distance_params(&config_a()).unwrap();
        assert!((d.ratio - 0.483).abs() < 1e-3);
        assert_eq!(d.q, 0);
        let d = design_distance_params(&config_a().with_alpha_p(0.5)).unwrap();
        assert!((d.alpha_t_interval[0] + 0.456).abs() < 2e-3);
        assert!((d.alpha_t_interval[1] + 0.452).abs() < 2e-3);
        assert!(d.alpha_t_interval[0] <= d.alpha_t && d.alpha_t <= d.alpha_t_interval[1]);
        let d = design_distance_params(&main_config()).unwrap();
        assert!((d.alpha_p - 0.58).abs() < 5e-3);
        assert!((d.alpha_t + 0.53).abs() < 5e-3);
        assert!(design_distance_params(&config_a().with_alpha_p(0.3)).is_err());
    }

    #[test]
    fn collapsed_ring_range() {
        let mut a = config_a();
        a.alpha_min = Some(0.01);
        a.alpha_max = Some(0.01);
        let d = design_distance_params(&a).unwrap();
        assert_eq!(d.ratio, 0.0);
        assert_eq!(d.alpha_p, 0.0);
        assert_eq!(d.alpha_t_interval, [0.01, 0.01]);
    }

    #[test]
    fn pilot_counts() {
        let plan = design(&config_a().with_alpha_p(0.5)).unwrap();
        assert_eq!(plan.k, 2);
        assert!((plan.theta_t_list[1] + 28.8).abs() < 0.05);
        assert_eq!(plan.ending_directions, vec![1.0, 0.0]);
        let main = design(&main_config()).unwrap();
        assert_eq!(main.k, 2);
        let main3 = design(&main_config().with_k(3)).unwrap();
        let want = [-32.95, -33.62, -34.29];
        for (t, w) in main3.theta_t_list.iter().zip(want) {
            assert!((t - w).abs() < 0.02, "{t} vs {w}");
        }
    }

    #[test]
    fn pilot_count_scales_inversely_with_distance_width() {
        let a = config_a().with_alpha_p(0.5);
        let (tp, _) = design_angle_params(&a).unwrap();
        let dist = design_distance_params(&a).unwrap();
        let raw = pilot_count_raw(&a.cfg, tp, 12, &dist).unwrap();
        // Doubling the distance half-width halves the count.
        let mut wide = a.cfg.clone();
        wide.n_antennas = ((a.cfg.n_antennas as f64) / 2f64.sqrt()).round() as usize;
        let raw_wide = pilot_count_raw(&wide, tp, 12, &dist).unwrap();
        let ratio = raw / raw_wide;
        assert!((ratio - 2.0).abs() < 0.03, "{ratio}");
        assert!(pilot_count_raw(&a.cfg, -0.5, 0, &dist).is_err());
    }

    #[test]
    fn single_pilot_list() {
        let a = config_a();
        let (e, t) = intercepts_for_pilots(&a, 1, 1.68, 15);
        assert_eq!(e, vec![1.0]);
        assert_eq!(t, vec![first_intercept(&a, 1.68, 15)]);
    }

    #[test]
    fn frequency_scaling_leaves_angle_params() {
        let base = config_a();
        let mut scaled = base.clone();
        scaled.cfg.carrier_freq *= 3.0;
        scaled.cfg.bandwidth *= 3.0;
        let a = design_angle_params(&base).unwrap();
        let b = design_angle_params(&scaled).unwrap();
        assert_eq!(a.1, b.1);
        assert!((a.0 - b.0).abs() < 1e-12);
    }

    #[test]
    fn plan_invariants() {
        for inputs in [config_a().with_alpha_p(0.5), main_config().with_k(3), config_a()] {
            let plan = design(&inputs).unwrap();
            let c = &plan.cfg;
            let slope = plan.theta_p + 2.0 * plan.p_m as f64;
            assert!(slope > 0.0 && slope <= sweep_bound(&DesignInputs::new(c.clone(), 1.0)) + 1e-12);
            let total = plan.alpha_p + 2.0 * plan.q as f64 / c.spacing();
            assert!(total >= plan.ratio - 1e-9);
            let [lo, hi] = plan.alpha_t_interval;
            assert!(lo - 1e-9 <= plan.alpha_t && plan.alpha_t <= hi + 1e-9);
            for k in 0..plan.k {
                let p = plan.pilot_params(k);
                let end = predicted_focus(&p, plan.q, c, highest_subcarrier(c)).unwrap();
                assert!((end.theta - plan.ending_directions[k]).abs() < 1e-6);
                let first = c.subcarrier_freq(1).unwrap();
                let a1 = plan.alpha_t + c.carrier_freq / first * total;
                let am = plan.alpha_t + c.carrier_freq / highest_subcarrier(c) * total;
                assert!(a1 >= plan.alpha_max - 1e-9);
                assert!(am <= plan.alpha_min + 1e-9);
            }
        }
    }

    #[test]
    fn fixed_network_matches_td_vectors() {
        let plan = design(&config_a().with_alpha_p(0.5)).unwrap();
        let cfg = &plan.cfg;
        let net = fixed_td_network(&plan, cfg);
        assert_eq!(net.selection_bits, 1);
        for k in 0..plan.k {
            for f in [cfg.f_low(), cfg.carrier_freq, cfg.f_high()] {
                let a = net.td_vector(k, f);
                let b = td_vector(&plan.pilot_params(k), cfg, f);
                assert_eq!(a, b);
            }
        }
        let n = *net.offsets.last().unwrap();
        let d = cfg.spacing();
        let tau = (n * d * plan.theta_t_list[0] - n * n * d * d * plan.alpha_t) / 3.0e8;
        assert!((net.delays.last().unwrap()[0] - tau).abs() < 1e-15);
        let odd = SystemConfig::new(5, 10e9, 2e9, 16).unwrap();
        let odd_plan = design(&DesignInputs::new(odd.clone(), 1.0).with_k(4)).unwrap();
        let odd_net = fixed_td_network(&odd_plan, &odd);
        assert!(odd_net.delays[2].iter().all(|&t| t == 0.0));
        assert_eq!(odd_net.selection_bits, 2);
        let csv = odd_net.to_csv();
        assert_eq!(csv.lines().count(), 6);
    }

    #[test]
    fn json_round_trip() {
        let text = serde_json::to_string(&config_a().with_alpha_p(0.5)).unwrap();
        let back = DesignInputs::from_json(&text).unwrap();
        assert_eq!(back.alpha_p_override, Some(0.5));
        assert!(DesignInputs::from_json(r#"{"cfg": 1}"#).is_err());
    }
}
