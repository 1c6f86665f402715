//! Discrete RIS phase configuration and the composition of direct and
//! reflected paths into one effective gain per (receiver, transmitter).
//!
//! The reflected path from transmitter `t` always goes through the panel
//! serving `t`'s own link (`assist[t]`), for desired and interfering signals
//! alike.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{Band, ChannelRealization};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::params::{CodebookKind, SimParams};
use crate::scenario::Scenario;

/// Ordered phase alphabet for `bits` quantization bits.
pub fn phase_codebook(bits: u32, kind: CodebookKind) -> Result<Vec<f64>> {
    if bits == 0 || bits > 16 {
        return Err(Error::param("e", format!("must lie in 1..=16, got {bits}")));
    }
    let len = 1usize << bits;
    let denom = match kind {
        CodebookKind::Inclusive => (len - 1) as f64,
        CodebookKind::Uniform => len as f64,
    };
    Ok((0..len)
        .map(|m| std::f64::consts::TAU * m as f64 / denom)
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    angles: Vec<f64>,
    phasors: Vec<Complex64>,
}

impl Codebook {
    pub fn new(bits: u32, kind: CodebookKind) -> Result<Self> {
        let angles = phase_codebook(bits, kind)?;
        let phasors = angles.iter().map(|&a| Complex64::from_polar(1.0, a)).collect();
        Ok(Self { angles, phasors })
    }

    pub fn from_params(params: &SimParams) -> Result<Self> {
        Self::new(params.quant_bits, params.codebook)
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn angle(&self, index: u16) -> f64 {
        self.angles[index as usize]
    }

    pub fn phasor(&self, index: u16) -> Complex64 {
        self.phasors[index as usize]
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }
}

/// `direct + alpha · Σ reflected[k] · e^{jθ[k]}` with explicit angles.
pub fn effective_gain_radians(
    direct: Complex64,
    reflected: &[Complex64],
    thetas: &[f64],
    alpha_refl: f64,
) -> Complex64 {
    assert_eq!(reflected.len(), thetas.len(), "grids must be congruent");
    let sum: Complex64 = reflected
        .iter()
        .zip(thetas)
        .map(|(h, &t)| h * Complex64::from_polar(1.0, t))
        .sum();
    direct + sum * alpha_refl
}

/// Same as [`effective_gain_radians`] with phases given as codebook indices.
pub fn effective_gain(
    direct: Complex64,
    reflected: &[Complex64],
    phases: &[u16],
    codebook: &Codebook,
    alpha_refl: f64,
) -> Complex64 {
    assert_eq!(reflected.len(), phases.len(), "grids must be congruent");
    let sum: Complex64 = reflected
        .iter()
        .zip(phases)
        .map(|(h, &m)| h * codebook.phasor(m))
        .sum();
    direct + sum * alpha_refl
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseConfig {
    /// Quantization bits.
    pub e: u32,
    pub codebook: CodebookKind,
    /// Serving panel of each link.
    pub assist: Vec<usize>,
    /// Codebook index grid per panel.
    pub indices: Vec<Grid<u16>>,
}

impl PhaseConfig {
    pub fn uniform(scenario: &Scenario, index: u16) -> Self {
        let p = &scenario.params;
        Self {
            e: p.quant_bits,
            codebook: p.codebook,
            assist: scenario.nearest_panel_assist(),
            indices: vec![Grid::filled(p.ris_side, index); scenario.ris_panels.len()],
        }
    }

    /// Uniform codeword per element, drawn as `floor(u * len)` so the same
    /// stream picks nearby angles for every `e`.
    pub fn random<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Self {
        let p = &scenario.params;
        let len = p.codebook_len();
        let indices = (0..scenario.ris_panels.len())
            .map(|_| {
                Grid::from_fn(p.ris_side, |_, _| {
                    ((rng.random::<f64>() * len as f64) as usize).min(len - 1) as u16
                })
            })
            .collect();
        Self {
            e: p.quant_bits,
            codebook: p.codebook,
            assist: scenario.nearest_panel_assist(),
            indices,
        }
    }

    pub fn codebook(&self) -> Result<Codebook> {
        Codebook::new(self.e, self.codebook)
    }

    pub fn side(&self) -> usize {
        self.indices.first().map_or(0, Grid::side)
    }

    pub fn validate(&self, scenario: &Scenario) -> Result<()> {
        let len = 1usize << self.e;
        if self.assist.len() != scenario.num_links() {
            return Err(Error::InconsistentState(format!(
                "assist map has {} entries for {} links",
                self.assist.len(),
                scenario.num_links()
            )));
        }
        if self.assist.iter().any(|&p| p >= scenario.ris_panels.len()) {
            return Err(Error::InconsistentState("assist map names an unknown panel".into()));
        }
        if self.indices.len() != scenario.ris_panels.len()
            || self.indices.iter().any(|g| g.side() != scenario.params.ris_side)
        {
            return Err(Error::InconsistentState("phase grid shape mismatch".into()));
        }
        if self.indices.iter().flat_map(|g| g.iter()).any(|&m| m as usize >= len) {
            return Err(Error::InconsistentState("phase index outside the codebook".into()));
        }
        Ok(())
    }
}

/// Squared effective gains `|G_{r,t}|²` for both bands, `[rx_slot][tx_link]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveGains {
    pub rx_slots: usize,
    pub tx_links: usize,
    pub cellular: Vec<f64>,
    pub mmwave: Vec<f64>,
}

impl EffectiveGains {
    pub fn compose(
        scenario: &Scenario,
        channels: &ChannelRealization,
        phases: &PhaseConfig,
    ) -> Result<Self> {
        let (c, m) = compose_complex(scenario, channels, phases)?;
        Ok(Self {
            rx_slots: channels.rx_slots,
            tx_links: channels.tx_links,
            cellular: c.iter().map(|g| g.norm_sqr()).collect(),
            mmwave: m.iter().map(|g| g.norm_sqr()).collect(),
        })
    }

    #[inline]
    pub fn get(&self, band: Band, rx: usize, tx: usize) -> f64 {
        let i = rx * self.tx_links + tx;
        match band {
            Band::Cellular => self.cellular[i],
            Band::MmWave => self.mmwave[i],
        }
    }

    #[inline]
    pub fn set(&mut self, band: Band, rx: usize, tx: usize, value: f64) {
        let i = rx * self.tx_links + tx;
        match band {
            Band::Cellular => self.cellular[i] = value,
            Band::MmWave => self.mmwave[i] = value,
        }
    }
}

pub fn reflection_coefficient(params: &SimParams, band: Band) -> f64 {
    match band {
        Band::Cellular => params.alpha_refl_c,
        Band::MmWave => params.alpha_refl_m,
    }
}

/// Complex effective gains for both bands, `[rx_slot][tx_link]`.
pub fn compose_complex(
    scenario: &Scenario,
    channels: &ChannelRealization,
    phases: &PhaseConfig,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    phases.validate(scenario)?;
    let codebook = phases.codebook()?;
    let mut out = [Vec::new(), Vec::new()];
    for (slot, band) in [Band::Cellular, Band::MmWave].into_iter().enumerate() {
        let alpha = reflection_coefficient(&scenario.params, band);
        let mut v = Vec::with_capacity(channels.rx_slots * channels.tx_links);
        for r in 0..channels.rx_slots {
            for t in 0..channels.tx_links {
                let panel = phases.assist[t];
                v.push(effective_gain(
                    channels.direct(band, r, t),
                    channels.reflected(band, r, t, panel),
                    phases.indices[panel].as_slice(),
                    &codebook,
                    alpha,
                ));
            }
        }
        out[slot] = v;
    }
    let [c, m] = out;
    Ok((c, m))
}
