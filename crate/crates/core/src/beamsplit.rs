//! TD-PS beamformers, the array-gain kernel `G(x, y)`, focused-location
//! prediction with the wrap integers `p` and `q`, and the closed-form 3 dB
//! beamwidth models.
//!
//! A TD-PS beamformer is the element-wise product of a true-time-delay vector
//! (phase proportional to the subcarrier frequency) and a frequency-flat
//! phase-shifter vector. At subcarrier `f_m` it focuses where
//!
//! ```text
//! theta_m = theta_t' + (f_c / f_m) (theta_p' + 2 p_m)
//! alpha_m = alpha_t' + (f_c / f_m) (alpha_p' + 2 q / d)
//! ```
//!
//! for integers `p_m` and `q` that select a period of the kernel.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::array::{approx_steering, PolarLocation, SteeringVector, SystemConfig, SPEED_OF_LIGHT};
use crate::error::{Error, Result};
use crate::numeric::integrate;

/// Normalised angle-domain 3 dB half-width constant.
pub const ANGLE_3DB_FACTOR: f64 = 0.88;

/// Fresnel argument at which `F(beta)` falls to `1/sqrt(2)`.
pub const FRESNEL_3DB_BETA: f64 = 1.318;

const WRAP_EPS: f64 = 1e-9;

/// Adjustable TD and PS parameters of one pilot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TdPsParams {
    pub theta_t: f64,
    pub theta_p: f64,
    pub alpha_t: f64,
    pub alpha_p: f64,
}

impl TdPsParams {
    pub fn zero() -> Self {
        Self {
            theta_t: 0.0,
            theta_p: 0.0,
            alpha_t: 0.0,
            alpha_p: 0.0,
        }
    }
}

/// Predicted focus of one subcarrier beam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamFocus {
    pub freq: f64,
    pub theta: f64,
    pub alpha: f64,
    pub p: i64,
    pub q: i64,
}

impl BeamFocus {
    pub fn location(&self) -> PolarLocation {
        PolarLocation::new(self.theta, self.alpha)
    }
}

/// Delay path length `n d theta - n^2 d^2 alpha` of element offset `n`.
#[inline]
pub fn td_path_length(n: f64, d: f64, theta: f64, alpha: f64) -> f64 {
    n * d * theta - n * n * d * d * alpha
}

/// Phase `-2 pi f tau` imposed by a delay `tau`.
#[inline]
pub fn delay_phase(f: f64, tau: f64) -> f64 {
    -2.0 * PI * f * tau
}

/// True-time-delay vector at frequency `f`.
pub fn td_vector(params: &TdPsParams, cfg: &SystemConfig, f: f64) -> SteeringVector {
    let d = cfg.spacing();
    let amp = 1.0 / (cfg.n_antennas as f64).sqrt();
    SteeringVector(
        cfg.element_offsets()
            .map(|n| {
                let tau = td_path_length(n, d, params.theta_t, params.alpha_t) / SPEED_OF_LIGHT;
                Complex64::from_polar(amp, delay_phase(f, tau))
            })
            .collect(),
    )
}

/// Frequency-flat phase-shifter vector (evaluated at the centre carrier).
pub fn ps_vector(params: &TdPsParams, cfg: &SystemConfig) -> SteeringVector {
    let d = cfg.spacing();
    let kc = cfg.wavenumber(cfg.carrier_freq);
    let amp = 1.0 / (cfg.n_antennas as f64).sqrt();
    SteeringVector(
        cfg.element_offsets()
            .map(|n| Complex64::from_polar(amp, -kc * td_path_length(n, d, params.theta_p, params.alpha_p)))
            .collect(),
    )
}

/// Unit-norm TD-PS beamformer `sqrt(N_t) (w_td .* w_ps)`.
pub fn combined_beamformer(params: &TdPsParams, cfg: &SystemConfig, f: f64) -> SteeringVector {
    let scale = (cfg.n_antennas as f64).sqrt();
    td_vector(params, cfg, f)
        .hadamard(&ps_vector(params, cfg))
        .scaled(scale)
}

/// `G(x, y) = (1/N_t) |sum_n exp(j n d x - j n^2 d^2 y)|`.
pub fn gain_kernel(cfg: &SystemConfig, x: f64, y: f64) -> f64 {
    let d = cfg.spacing();
    let sum: Complex64 = cfg
        .element_offsets()
        .map(|n| Complex64::from_polar(1.0, n * d * x - n * n * d * d * y))
        .sum();
    sum.norm() / cfg.n_antennas as f64
}

/// Kernel arguments of the TD-PS gain toward `loc` at frequency `f`.
pub fn kernel_args(params: &TdPsParams, cfg: &SystemConfig, loc: PolarLocation, f: f64) -> (f64, f64) {
    let k = cfg.wavenumber(f);
    let kc = cfg.wavenumber(cfg.carrier_freq);
    (
        k * loc.theta - k * params.theta_t - kc * params.theta_p,
        k * loc.alpha - k * params.alpha_t - kc * params.alpha_p,
    )
}

/// Closed-form TD-PS array gain through the kernel.
pub fn tdps_gain(params: &TdPsParams, cfg: &SystemConfig, loc: PolarLocation, f: f64) -> f64 {
    let (x, y) = kernel_args(params, cfg, loc, f);
    gain_kernel(cfg, x, y)
}

/// `|w^T b_f(theta, alpha)|` for an arbitrary beamformer.
pub fn array_gain(w: &SteeringVector, cfg: &SystemConfig, loc: PolarLocation, f: f64) -> f64 {
    w.dot(&approx_steering(cfg, loc, f)).norm()
}

fn focus_with_p(params: &TdPsParams, q: i64, cfg: &SystemConfig, f: f64, p: i64) -> BeamFocus {
    let ratio = cfg.carrier_freq / f;
    let d = cfg.spacing();
    BeamFocus {
        freq: f,
        theta: params.theta_t + ratio * (params.theta_p + 2.0 * p as f64),
        alpha: params.alpha_t + ratio * (params.alpha_p + 2.0 * q as f64 / d),
        p,
        q,
    }
}

/// Focus of the beam at `f` following the wrap rule of a sweeping strip.
///
/// When `theta_p' + 2p > 0` the focus moves toward `-1` as frequency grows and
/// re-enters at the top, so `p` is the largest integer keeping `theta <= 1`.
/// The mirrored rule (smallest `p` keeping `theta >= -1`) applies when the
/// slope is the other way.
pub fn predicted_focus(params: &TdPsParams, q: i64, cfg: &SystemConfig, f: f64) -> Result<BeamFocus> {
    let scale = f / cfg.carrier_freq;
    let top = (((1.0 - params.theta_t) * scale - params.theta_p) / 2.0 + WRAP_EPS).floor() as i64;
    let bottom = (((-1.0 - params.theta_t) * scale - params.theta_p) / 2.0 - WRAP_EPS).ceil() as i64;
    let p = if params.theta_p + 2.0 * top as f64 > 0.0 {
        top
    } else if params.theta_p + 2.0 * (bottom as f64) < 0.0 {
        bottom
    } else {
        // Slope crosses zero inside the window: take the alias nearest broadside.
        ((-params.theta_t * scale - params.theta_p) / 2.0).round() as i64
    };
    let focus = focus_with_p(params, q, cfg, f, p);
    if focus.theta < -1.0 - WRAP_EPS || focus.theta > 1.0 + WRAP_EPS {
        return Err(Error::InfeasibleFocus { freq: f });
    }
    Ok(focus)
}

/// Every alias of the beam at `f` whose angle lies in `[-1, 1]`.
pub fn focus_aliases(params: &TdPsParams, q: i64, cfg: &SystemConfig, f: f64) -> Vec<BeamFocus> {
    let scale = f / cfg.carrier_freq;
    let lo = (((-1.0 - params.theta_t) * scale - params.theta_p) / 2.0 - WRAP_EPS).ceil() as i64;
    let hi = (((1.0 - params.theta_t) * scale - params.theta_p) / 2.0 + WRAP_EPS).floor() as i64;
    (lo..=hi).map(|p| focus_with_p(params, q, cfg, f, p)).collect()
}

/// A focus chosen for estimation, with a flag when it had to be clamped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedFocus {
    pub focus: BeamFocus,
    pub clamped: bool,
}

/// Picks the alias of the beam at `f` that lies in the service sector.
///
/// Aliases are `2 f_c / f` apart in sine-angle, so for sectors narrower than
/// that at most one alias falls inside. Otherwise the alias nearest the
/// sector is used, and with no visible alias the angle is clamped to `[-1, 1]`.
pub fn resolve_focus(params: &TdPsParams, q: i64, cfg: &SystemConfig, f: f64) -> ResolvedFocus {
    let [lo, hi] = cfg.angle_range;
    let centre = 0.5 * (lo + hi);
    let outside = |t: f64| (lo - t).max(t - hi).max(0.0);
    let pick = focus_aliases(params, q, cfg, f).into_iter().min_by(|a, b| {
        (outside(a.theta), (a.theta - centre).abs())
            .partial_cmp(&(outside(b.theta), (b.theta - centre).abs()))
            .expect("finite angles")
    });
    if let Some(focus) = pick {
        let clamped = focus.theta.abs() > 1.0;
        let mut focus = focus;
        focus.theta = focus.theta.clamp(-1.0, 1.0);
        return ResolvedFocus { focus, clamped };
    }
    // No alias in [-1, 1]: the beam points into the invisible region.
    let scale = f / cfg.carrier_freq;
    let p = ((-params.theta_t * scale - params.theta_p) / 2.0).round() as i64;
    let mut focus = focus_with_p(params, q, cfg, f, p);
    focus.theta = focus.theta.clamp(-1.0, 1.0);
    ResolvedFocus { focus, clamped: true }
}

/// Dirichlet kernel `sin(N pi x / 2) / (N sin(pi x / 2))`.
pub fn dirichlet_sinc(cfg: &SystemConfig, x: f64) -> f64 {
    let n = cfg.n_antennas as f64;
    let den = (PI * x / 2.0).sin();
    if den.abs() < 1e-12 {
        let j = (x / 2.0).round() as i64;
        return if ((cfg.n_antennas as i64 - 1) * j).rem_euclid(2) == 0 {
            1.0
        } else {
            -1.0
        };
    }
    (n * PI * x / 2.0).sin() / (n * den)
}

/// Fresnel integrals `(C(beta), S(beta))`.
pub fn fresnel(beta: f64) -> (f64, f64) {
    let c = integrate(|t| (PI * t * t / 2.0).cos(), 0.0, beta, 1e-10);
    let s = integrate(|t| (PI * t * t / 2.0).sin(), 0.0, beta, 1e-10);
    (c, s)
}

/// `F(beta) = |C(beta) + j S(beta)| / beta`, with `F(0) = 1`.
pub fn fresnel_gain(beta: f64) -> f64 {
    if beta == 0.0 {
        return 1.0;
    }
    let (c, s) = fresnel(beta);
    c.hypot(s) / beta
}

/// Fresnel argument for a ring mismatch `delta_alpha` at frequency `f`:
/// `beta = N_t d sqrt(|delta_alpha| / lambda)`.
pub fn fresnel_argument(cfg: &SystemConfig, delta_alpha: f64, f: f64) -> f64 {
    let lambda = SPEED_OF_LIGHT / f;
    cfg.n_antennas as f64 * cfg.spacing() * (delta_alpha.abs() / lambda).sqrt()
}

/// Distance-domain gain for a ring mismatch, via the Fresnel model.
pub fn distance_gain(cfg: &SystemConfig, delta_alpha: f64, f: f64) -> f64 {
    fresnel_gain(fresnel_argument(cfg, delta_alpha, f))
}

/// Angle-domain 3 dB half-width `0.88 f_c / (N_t f)`.
pub fn angle_beamwidth(cfg: &SystemConfig, f: f64) -> f64 {
    ANGLE_3DB_FACTOR * cfg.carrier_freq / (cfg.n_antennas as f64 * f)
}

/// Distance-domain 3 dB half-width `4 beta^2 f_c^2 / (N_t^2 c f)`.
pub fn distance_beamwidth(cfg: &SystemConfig, f: f64) -> f64 {
    let n = cfg.n_antennas as f64;
    4.0 * FRESNEL_3DB_BETA.powi(2) * cfg.carrier_freq.powi(2) / (n * n * SPEED_OF_LIGHT * f)
}

/// Quadratic coefficients `(sigma_1, sigma_2)` of the equal-gain ellipse at `f`.
pub fn ellipse_coefficients(cfg: &SystemConfig, f: f64) -> (f64, f64) {
    let n = cfg.n_antennas as f64;
    let d = cfg.spacing();
    let lambda = SPEED_OF_LIGHT / f;
    let sigma1 = n * n * PI * PI * (f / cfg.carrier_freq).powi(2) / 24.0;
    let sigma2 = PI * PI * n.powi(4) * d.powi(4) / (90.0 * lambda * lambda);
    (sigma1, sigma2)
}

/// Gain near a focus from the ellipse model `1 - s1 dtheta^2 - s2 dalpha^2`.
pub fn ellipse_gain(cfg: &SystemConfig, focus: PolarLocation, probe: PolarLocation, f: f64) -> f64 {
    let (s1, s2) = ellipse_coefficients(cfg, f);
    1.0 - s1 * (probe.theta - focus.theta).powi(2) - s2 * (probe.alpha - focus.alpha).powi(2)
}
