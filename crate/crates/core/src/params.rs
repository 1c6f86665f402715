//! Simulation parameters. Defaults reproduce the reference operating point of
//! a 28 GHz / sub-6 GHz heterogeneous cell.
//!
//! Values are stored in the units a configuration file would use (dB, dBm,
//! dBi, Hz); the accessor methods return linear quantities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{db_to_linear, dbm_to_watts, noise_power};

/// Number of RIS panels in the fixed two-row layout.
pub const PANEL_COUNT: usize = 8;

/// How the discrete phase alphabet is laid out on `[0, 2π]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CodebookKind {
    /// `2π·m / (2^e − 1)`, `m = 0..2^e`: endpoints 0 and 2π coincide.
    #[default]
    Inclusive,
    /// `2π·m / 2^e`: 2^e distinct phases.
    Uniform,
}

/// Where the cellular-band reflection coefficient is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ReflectionMode {
    /// Only in the effective-gain composition.
    #[default]
    Once,
    /// Also inside the sampled cellular reflected coefficient.
    Twice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    /// mm-wave bandwidth, Hz.
    #[serde(rename = "W_m")]
    pub w_m: f64,
    /// Cellular bandwidth, Hz.
    #[serde(rename = "W_c")]
    pub w_c: f64,
    /// mm-wave noise density, dBm/MHz.
    #[serde(rename = "N0m")]
    pub n0m: f64,
    /// Cellular noise density, dBm/MHz.
    #[serde(rename = "N0c")]
    pub n0c: f64,
    /// mm-wave transmit power cap, dBm.
    #[serde(rename = "P_m")]
    pub p_m: f64,
    /// Cellular transmit power cap, dBm.
    #[serde(rename = "P_c")]
    pub p_c: f64,
    /// Cellular path-loss exponent.
    #[serde(rename = "n")]
    pub path_loss_exp: f64,
    pub alpha_los: f64,
    pub alpha_nlos: f64,
    /// mm-wave reference gain at 1 m, dB.
    pub beta0: f64,
    /// Device antenna gain, dBi.
    #[serde(rename = "G0")]
    pub g0: f64,
    /// BS antenna gain, dBi.
    #[serde(rename = "Gb")]
    pub gb: f64,
    /// SINR floor, dB.
    pub gamma_min: f64,
    /// Maximum D2D separation, m.
    pub r_max: f64,
    /// Obstacle density, 1/m.
    pub beta1: f64,
    /// Rician factor of the mm-wave reflected path. `inf` gives pure LoS.
    pub rice_beta: f64,
    pub nakagami_m: f64,
    pub nakagami_omega: f64,
    pub alpha_refl_c: f64,
    pub alpha_refl_m: f64,
    /// RIS elements per side.
    #[serde(rename = "N")]
    pub ris_side: usize,
    /// Phase quantization bits.
    #[serde(rename = "e")]
    pub quant_bits: u32,
    /// RIS panel count. Only the fixed 8-panel layout is supported.
    #[serde(rename = "M")]
    pub panels: usize,
    /// Outer (block-coordinate) convergence threshold, bit/s.
    pub epsilon_outer: f64,
    /// Power-allocation convergence threshold, bit/s.
    pub epsilon_inner: f64,
    pub codebook: CodebookKind,
    pub cellular_reflection: ReflectionMode,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            w_m: 2160e6,
            w_c: 22e6,
            n0m: -134.0,
            n0c: -174.0,
            p_m: 23.0,
            p_c: 20.0,
            path_loss_exp: 2.0,
            alpha_los: 2.5,
            alpha_nlos: 3.6,
            beta0: -61.3849,
            g0: 0.5,
            gb: 14.0,
            gamma_min: 5.0,
            r_max: 10.0 * std::f64::consts::SQRT_2,
            beta1: 0.01,
            rice_beta: 4.0,
            nakagami_m: 3.0,
            nakagami_omega: 1.0 / 3.0,
            alpha_refl_c: 1.0,
            alpha_refl_m: 0.8,
            ris_side: 4,
            quant_bits: 3,
            panels: PANEL_COUNT,
            epsilon_outer: 1e3,
            epsilon_inner: 1.0,
            codebook: CodebookKind::Inclusive,
            cellular_reflection: ReflectionMode::Once,
        }
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite and > 0, got {v}")))
    }
}

fn finite(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite, got {v}")))
    }
}

impl SimParams {
    /// Applies a partial JSON object on top of `self`. Unknown keys are rejected.
    pub fn with_overrides(&self, overrides: &serde_json::Value) -> Result<Self> {
        let mut merged = serde_json::to_value(self)?;
        match (merged.as_object_mut(), overrides.as_object()) {
            (Some(base), Some(patch)) => {
                for (k, v) in patch {
                    base.insert(k.clone(), v.clone());
                }
            }
            (_, None) => {
                return Err(Error::param("params", "override must be a JSON object"));
            }
            _ => unreachable!("SimParams serializes to an object"),
        }
        let p: SimParams = serde_json::from_value(merged)?;
        p.validate()?;
        Ok(p)
    }

    /// Parses a JSON config; any subset of fields overrides the defaults.
    pub fn from_json(text: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        SimParams::default().with_overrides(&v)
    }

    pub fn validate(&self) -> Result<()> {
        positive("W_m", self.w_m)?;
        positive("W_c", self.w_c)?;
        finite("N0m", self.n0m)?;
        finite("N0c", self.n0c)?;
        finite("P_m", self.p_m)?;
        finite("P_c", self.p_c)?;
        positive("n", self.path_loss_exp)?;
        positive("alpha_los", self.alpha_los)?;
        positive("alpha_nlos", self.alpha_nlos)?;
        finite("beta0", self.beta0)?;
        finite("G0", self.g0)?;
        finite("Gb", self.gb)?;
        finite("gamma_min", self.gamma_min)?;
        positive("r_max", self.r_max)?;
        if !(self.beta1.is_finite() && self.beta1 >= 0.0) {
            return Err(Error::param("beta1", "must be finite and >= 0"));
        }
        if self.rice_beta.is_nan() || self.rice_beta < 0.0 {
            return Err(Error::param("rice_beta", "must be >= 0"));
        }
        if !(self.nakagami_m >= 0.5 && self.nakagami_m.is_finite()) {
            return Err(Error::param("nakagami_m", "must be >= 0.5"));
        }
        positive("nakagami_omega", self.nakagami_omega)?;
        for (name, a) in [
            ("alpha_refl_c", self.alpha_refl_c),
            ("alpha_refl_m", self.alpha_refl_m),
        ] {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::param(name, format!("must lie in [0, 1], got {a}")));
            }
        }
        if self.ris_side == 0 {
            return Err(Error::param("N", "must be >= 1"));
        }
        if self.quant_bits == 0 || self.quant_bits > 16 {
            return Err(Error::param("e", "must lie in 1..=16"));
        }
        if self.panels != PANEL_COUNT {
            return Err(Error::param(
                "M",
                format!("only the fixed {PANEL_COUNT}-panel layout is supported"),
            ));
        }
        if !(self.epsilon_outer.is_finite() && self.epsilon_outer >= 0.0) {
            return Err(Error::param("epsilon_outer", "must be finite and >= 0"));
        }
        if !(self.epsilon_inner.is_finite() && self.epsilon_inner >= 0.0) {
            return Err(Error::param("epsilon_inner", "must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn p_max_mmwave_w(&self) -> f64 {
        dbm_to_watts(self.p_m)
    }

    pub fn p_max_cellular_w(&self) -> f64 {
        dbm_to_watts(self.p_c)
    }

    pub fn sigma2_mmwave(&self) -> f64 {
        noise_power(self.n0m, self.w_m)
    }

    pub fn sigma2_cellular(&self) -> f64 {
        noise_power(self.n0c, self.w_c)
    }

    pub fn gamma_min_linear(&self) -> f64 {
        db_to_linear(self.gamma_min)
    }

    pub fn beta0_linear(&self) -> f64 {
        db_to_linear(self.beta0)
    }

    pub fn g0_linear(&self) -> f64 {
        db_to_linear(self.g0)
    }

    pub fn gb_linear(&self) -> f64 {
        db_to_linear(self.gb)
    }

    pub fn codebook_len(&self) -> usize {
        1usize << self.quant_bits
    }
}
