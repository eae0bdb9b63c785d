//! Entropy bookkeeping and the spectral-efficiency lower bound.
//!
//! The incoming entropy per symbol is `ln Lambda + ln(D/4) + c0` with
//! `Lambda = 2 pi B t_c`; the noise entropy in the Gaussian approximation is
//! `ln(sqrt(2 pi e) lambda_bar)`. Their difference is the rate in nats.

use std::f64::consts::{E, LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::link::{amplifier_sigma2, LinkParams, NoiseStrength, ShiftCovariance};
use crate::stats::analytic::{eta_entropy_constant, eta_entropy_upto};

pub const REPORT_VERSION: u32 = 1;

/// Slope of the linear fit `lambda_bar = 0.41 sigma^2 D`.
pub const FIT_SLOPE: f64 = 0.41;

/// Two-decimal value quoted for the entropy constant.
pub const STATED_ENTROPY_CONSTANT: f64 = 0.08;

/// Choice of `c0` in the incoming entropy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyConstant {
    /// `c0 = 0`: the closed-form lower bound as printed, which drops the
    /// constant.
    Printed,
    /// `c0 = 0.08`.
    Stated,
    /// `c0 = -∫ P ln P - ln(D/4)` by quadrature (about 1.663).
    Quadrature,
}

impl EntropyConstant {
    pub fn value(self) -> f64 {
        match self {
            EntropyConstant::Printed => 0.0,
            EntropyConstant::Stated => STATED_ENTROPY_CONSTANT,
            EntropyConstant::Quadrature => eta_entropy_constant(1.0),
        }
    }
}

impl std::str::FromStr for EntropyConstant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "printed" => Ok(EntropyConstant::Printed),
            "stated" => Ok(EntropyConstant::Stated),
            "quadrature" => Ok(EntropyConstant::Quadrature),
            other => validation(format!("unknown entropy constant '{other}' (printed, stated, quadrature)")),
        }
    }
}

/// `ln Lambda + ln(D/4) + c0`, nats per symbol.
pub fn incoming_entropy(d: f64, lambda: f64, c0: f64) -> Result<f64> {
    if !(d > 0.0 && lambda > 0.0) || !d.is_finite() || !lambda.is_finite() {
        return validation(format!("incoming entropy needs D > 0 and Lambda > 0, got D={d}, Lambda={lambda}"));
    }
    Ok(lambda.ln() + (d / 4.0).ln() + c0)
}

/// `ln Lambda - ∫_0^eta_max P ln P`, with the eta entropy integrated
/// directly over the positive modes.
pub fn incoming_entropy_quadrature(d: f64, lambda: f64, eta_max: f64) -> Result<f64> {
    if !(d > 0.0 && lambda > 0.0 && eta_max > 0.0) {
        return validation("incoming entropy needs positive D, Lambda and eta range");
    }
    Ok(lambda.ln() + eta_entropy_upto(d, eta_max))
}

/// `ln(sqrt(2 pi e) lambda_bar)`, nats per symbol.
pub fn noise_entropy(lambda_bar: f64) -> Result<f64> {
    if !(lambda_bar > 0.0 && lambda_bar.is_finite()) {
        return validation(format!("noise entropy needs lambda_bar > 0, got {lambda_bar}"));
    }
    Ok(((2.0 * PI * E).sqrt() * lambda_bar).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaBarMode {
    Fitted,
    Measured,
}

impl std::str::FromStr for LambdaBarMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fitted" => Ok(LambdaBarMode::Fitted),
            "measured" => Ok(LambdaBarMode::Measured),
            other => validation(format!("unknown lambda_bar mode '{other}' (fitted, measured)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LambdaBarSource {
    Fitted {
        slope: f64,
    },
    Measured {
        /// Geometric mean at the noise strength the covariance was computed with.
        lambda_bar_raw: f64,
        sigma2_raw: f64,
        modes: usize,
        /// `lambda_bar_raw / (sigma2_raw D)`.
        slope: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Input,
    Derived,
    Fitted,
    Measured,
    Analytic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceEntry {
    pub name: String,
    pub value: f64,
    pub origin: Origin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateStatus {
    Defined,
    /// Noise entropy exceeds the incoming entropy.
    Undefined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    pub version: u32,
    pub d: f64,
    /// `2 pi B t_c`.
    pub lambda: f64,
    pub h_in: f64,
    pub h_noise: f64,
    pub r_nats: f64,
    pub r_bits_per_s_per_hz: f64,
    pub status: RateStatus,
    pub diagnostic: Option<String>,
    /// `exp(R_nats) / B`, 1/Hz.
    pub coefficient_per_hz: f64,
    pub link: LinkParams,
    pub noise: NoiseStrength,
    pub lambda_bar: f64,
    pub lambda_bar_source: LambdaBarSource,
    pub entropy_constant: EntropyConstant,
    pub c0: f64,
    /// Quadrature value of the entropy constant, always recorded.
    pub c0_quadrature: f64,
    pub provenance: Vec<ProvenanceEntry>,
    /// Non-binding supplementary data (for example ln b statistics); not used
    /// in the rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supplementary: Option<serde_json::Value>,
}

impl CapacityReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("capacity report serializes")
    }
}

/// Rate lower bound for the link. `d` is the normalized signal power; in
/// Fitted mode it cancels. Measured mode rescales the covariance's
/// `lambda_bar` to the chain noise strength and requires `cov.d == d`.
pub fn spectral_efficiency(
    link: &LinkParams,
    d: f64,
    mode: LambdaBarMode,
    cov: Option<&ShiftCovariance>,
    constant: EntropyConstant,
) -> Result<CapacityReport> {
    link.validate()?;
    if !(d > 0.0 && d.is_finite()) {
        return validation(format!("signal power D must be positive, got {d}"));
    }
    let noise = amplifier_sigma2(link)?;
    let sigma2 = noise.chain_normalized;
    let (lambda_bar, source, origin) = match mode {
        LambdaBarMode::Fitted => (FIT_SLOPE * sigma2 * d, LambdaBarSource::Fitted { slope: FIT_SLOPE }, Origin::Fitted),
        LambdaBarMode::Measured => {
            let c = cov.ok_or_else(|| Error::Validation("Measured mode needs a shift covariance".into()))?;
            if ((c.d - d) / d).abs() > 1e-12 {
                return validation(format!("covariance was computed at D={} but the report asks for D={d}", c.d));
            }
            let lb = c.lambda_bar * sigma2 / c.sigma2;
            (
                lb,
                LambdaBarSource::Measured {
                    lambda_bar_raw: c.lambda_bar,
                    sigma2_raw: c.sigma2,
                    modes: c.eigenvalues.len(),
                    slope: c.lambda_bar / (c.sigma2 * d),
                },
                Origin::Measured,
            )
        }
    };
    let lambda = link.lambda_normalized();
    let c0 = constant.value();
    let h_in = incoming_entropy(d, lambda, c0)?;
    let h_noise = noise_entropy(lambda_bar)?;
    let r_nats = h_in - h_noise;
    let (status, diagnostic) = if r_nats < 0.0 {
        (
            RateStatus::Undefined,
            Some(format!("noise entropy {h_noise:.6} nats exceeds incoming entropy {h_in:.6} nats")),
        )
    } else {
        (RateStatus::Defined, None)
    };
    let c0_quadrature = eta_entropy_constant(1.0);
    let mut provenance = vec![
        entry("span_km", link.span_km, Origin::Input),
        entry("spacing_km", link.spacing_km, Origin::Input),
        entry("amplifiers", link.amplifiers as f64, Origin::Input),
        entry("loss_db_per_km", link.loss_db_per_km, Origin::Input),
        entry("gain", link.gain, Origin::Derived),
        entry("carrier_hz", link.carrier_hz, Origin::Input),
        entry("eta_sp", link.eta_sp, Origin::Input),
        entry("planck", link.planck, Origin::Input),
        entry("power_w", link.power_w, Origin::Input),
        entry("time_s", link.time_s, Origin::Input),
        entry("bandwidth_hz", link.bandwidth_hz, Origin::Input),
        entry("d", d, Origin::Input),
        entry("sigma2_si", noise.si, Origin::Derived),
        entry("sigma2_normalized", noise.normalized, Origin::Derived),
        entry("sigma2_chain_normalized", sigma2, Origin::Derived),
        entry("lambda", lambda, Origin::Derived),
        entry("lambda_bar", lambda_bar, origin),
        entry("c0", c0, if constant == EntropyConstant::Quadrature { Origin::Analytic } else { Origin::Input }),
        entry("c0_quadrature", c0_quadrature, Origin::Analytic),
        entry("h_in", h_in, Origin::Derived),
        entry("h_noise", h_noise, Origin::Derived),
        entry("r_nats", r_nats, Origin::Derived),
    ];
    if mode == LambdaBarMode::Fitted {
        provenance.push(entry("fit_slope", FIT_SLOPE, Origin::Fitted));
    }
    Ok(CapacityReport {
        version: REPORT_VERSION,
        d,
        lambda,
        h_in,
        h_noise,
        r_nats,
        r_bits_per_s_per_hz: r_nats / LN_2,
        status,
        diagnostic,
        coefficient_per_hz: r_nats.exp() / link.bandwidth_hz,
        link: link.clone(),
        noise,
        lambda_bar,
        lambda_bar_source: source,
        entropy_constant: constant,
        c0,
        c0_quadrature,
        provenance,
        supplementary: None,
    })
}

fn entry(name: &str, value: f64, origin: Origin) -> ProvenanceEntry {
    ProvenanceEntry { name: name.to_string(), value, origin }
}

/// The closed-form bound evaluated directly in SI units:
/// `ln(sqrt(pi/8e) B G ln G P_c t_c^2 / (slope h nu0 eta_sp (G-1)^2 N_a)) + c0`.
pub fn rate_si(link: &LinkParams, slope: f64, c0: f64) -> Result<f64> {
    link.validate()?;
    let g = link.gain;
    let arg = (PI / (8.0 * E)).sqrt() * link.bandwidth_hz * g * g.ln() * link.power_w * link.time_s.powi(2)
        / (slope * link.planck * link.carrier_hz * link.eta_sp * (g - 1.0).powi(2) * link.amplifiers as f64);
    Ok(arg.ln() + c0)
}

/// `|R(D=1) - R(D=4)|` in Fitted mode.
pub fn d_cancellation_defect(link: &LinkParams, constant: EntropyConstant) -> Result<f64> {
    let a = spectral_efficiency(link, 1.0, LambdaBarMode::Fitted, None, constant)?;
    let b = spectral_efficiency(link, 4.0, LambdaBarMode::Fitted, None, constant)?;
    Ok((a.r_nats - b.r_nats).abs())
}

/// Everything a report can be built from; absent pieces are listed in the
/// error.
#[derive(Debug, Clone, Default)]
pub struct CapacityInputs {
    pub link: Option<LinkParams>,
    pub d: Option<f64>,
    pub mode: Option<LambdaBarMode>,
    pub covariance: Option<ShiftCovariance>,
    pub constant: Option<EntropyConstant>,
    pub supplementary: Option<serde_json::Value>,
}

pub fn capacity_report(inputs: &CapacityInputs) -> Result<CapacityReport> {
    let mut missing = Vec::new();
    if inputs.link.is_none() {
        missing.push("link");
    }
    if inputs.d.is_none() {
        missing.push("d");
    }
    if inputs.mode.is_none() {
        missing.push("mode");
    }
    if inputs.mode == Some(LambdaBarMode::Measured) && inputs.covariance.is_none() {
        missing.push("covariance");
    }
    if !missing.is_empty() {
        return validation(format!("capacity report is missing inputs: {}", missing.join(", ")));
    }
    let mut r = spectral_efficiency(
        inputs.link.as_ref().unwrap(),
        inputs.d.unwrap(),
        inputs.mode.unwrap(),
        inputs.covariance.as_ref(),
        inputs.constant.unwrap_or(EntropyConstant::Printed),
    )?;
    r.supplementary = inputs.supplementary.clone();
    Ok(r)
}
