//! Stochastic channel draws for both bands.
//!
//! * cellular direct: `h0 · sqrt(Gt·Gr·l^-n)`, `h0 ~ CN(0,1)`
//! * cellular reflected: `h0 · sqrt(a·Gt·Gr·(D1 + D2)^-n)` per element, with one
//!   `h0` shared by all elements of a (tx, rx, panel) triple
//! * mm-wave direct: Nakagami-m amplitude, uniform phase, `sqrt(β0·d^-α)`
//! * mm-wave reflected: Rician mix of a LoS term `sqrt(β0·(D1·D2)^-α)·e^{-jθ'}`
//!   and an NLoS term `sqrt(β0·(D1·D2)^-α')·CN(0,1)`

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::params::{ReflectionMode, SimParams};
use crate::scenario::{reflect_path_lengths, Node, RisPanel, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Cellular,
    MmWave,
}

/// Circularly-symmetric complex normal with unit variance.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

fn antenna_gain(node: &Node, params: &SimParams) -> f64 {
    if node.is_bs() {
        params.gb_linear()
    } else {
        params.g0_linear()
    }
}

fn nonzero(what: &str, d: f64) -> Result<()> {
    if d > 0.0 && d.is_finite() {
        Ok(())
    } else {
        Err(Error::DegenerateGeometry(format!("{what} distance is {d}")))
    }
}

pub fn sample_direct_cellular<R: Rng + ?Sized>(
    tx: &Node,
    rx: &Node,
    params: &SimParams,
    rng: &mut R,
) -> Result<Complex64> {
    let l = tx.position.distance(&rx.position);
    nonzero("cellular direct", l)?;
    let gain = antenna_gain(tx, params) * antenna_gain(rx, params) * l.powf(-params.path_loss_exp);
    Ok(complex_normal(rng) * gain.sqrt())
}

/// Nakagami-m amplitude (`sqrt` of a Gamma(m, ω/m) draw).
pub fn nakagami_amplitude<R: Rng + ?Sized>(m: f64, omega: f64, rng: &mut R) -> f64 {
    let g = Gamma::new(m, omega / m).expect("validated Nakagami parameters");
    g.sample(rng).sqrt()
}

pub fn sample_direct_mmwave<R: Rng + ?Sized>(
    tx: &Node,
    rx: &Node,
    params: &SimParams,
    rng: &mut R,
) -> Result<Complex64> {
    let d = tx.position.distance(&rx.position);
    nonzero("mm-wave direct", d)?;
    let amp = nakagami_amplitude(params.nakagami_m, params.nakagami_omega, rng);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let scale = (params.beta0_linear() * d.powf(-params.alpha_los)).sqrt();
    Ok(Complex64::from_polar(amp * scale, phase))
}

/// LoS / NLoS weights `(sqrt(β/(1+β)), sqrt(1/(1+β)))`; `β = ∞` is pure LoS.
pub fn rician_weights(beta: f64) -> (f64, f64) {
    if beta.is_infinite() {
        (1.0, 0.0)
    } else {
        ((beta / (1.0 + beta)).sqrt(), (1.0 / (1.0 + beta)).sqrt())
    }
}

pub fn sample_reflected_mmwave<R: Rng + ?Sized>(
    tx: &Node,
    rx: &Node,
    panel: &RisPanel,
    params: &SimParams,
    rng: &mut R,
) -> Result<Grid<Complex64>> {
    let lengths = reflect_path_lengths(tx.position, rx.position, panel);
    let (w_los, w_nlos) = rician_weights(params.rice_beta);
    let beta0 = params.beta0_linear();
    let mut out = Vec::with_capacity(lengths.len());
    for &(d1, d2) in lengths.iter() {
        nonzero("tx-element", d1)?;
        nonzero("element-rx", d2)?;
        let prod = d1 * d2;
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let los = Complex64::from_polar((beta0 * prod.powf(-params.alpha_los)).sqrt(), -theta);
        let nlos = complex_normal(rng) * (beta0 * prod.powf(-params.alpha_nlos)).sqrt();
        out.push(los * w_los + nlos * w_nlos);
    }
    Ok(Grid::from_vec(panel.side, out).expect("grid shape"))
}

/// `alpha_refl` is applied inside the square root; pass `1.0` when the
/// reflection coefficient is applied later in the effective-gain composition.
pub fn sample_reflected_cellular<R: Rng + ?Sized>(
    tx: &Node,
    rx: &Node,
    panel: &RisPanel,
    alpha_refl: f64,
    params: &SimParams,
    rng: &mut R,
) -> Result<Grid<Complex64>> {
    let lengths = reflect_path_lengths(tx.position, rx.position, panel);
    let h0 = complex_normal(rng);
    let g = alpha_refl * antenna_gain(tx, params) * antenna_gain(rx, params);
    let mut out = Vec::with_capacity(lengths.len());
    for &(d1, d2) in lengths.iter() {
        let sum = d1 + d2;
        nonzero("reflected path", sum)?;
        out.push(h0 * (g * sum.powf(-params.path_loss_exp)).sqrt());
    }
    Ok(Grid::from_vec(panel.side, out).expect("grid shape"))
}

/// Probability that an mm-wave link of the given length is blocked.
pub fn outage_probability(distance: f64, beta1: f64) -> Result<f64> {
    if distance < 0.0 {
        return Err(Error::Negative {
            what: "distance",
            value: distance,
        });
    }
    if beta1 < 0.0 {
        return Err(Error::Negative {
            what: "obstacle density",
            value: beta1,
        });
    }
    Ok(-(-beta1 * distance).exp_m1())
}

/// One Monte-Carlo draw of every coefficient.
///
/// Direct tensors are indexed `[rx_slot][tx_link]`, reflected tensors
/// `[rx_slot][tx_link][panel][lz][ly]`. mm-wave entries exist only between
/// D2D endpoints; the BS row and cellular-user columns are zero there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub rx_slots: usize,
    pub tx_links: usize,
    pub panels: usize,
    pub side: usize,
    pub cellular_direct: Vec<Complex64>,
    pub mmwave_direct: Vec<Complex64>,
    pub cellular_reflected: Vec<Complex64>,
    pub mmwave_reflected: Vec<Complex64>,
    pub sigma2_c: f64,
    pub sigma2_m: f64,
    /// Outage probability per link; zero for cellular uplinks.
    pub p_out: Vec<f64>,
}

fn rx_key(slot: usize, d: usize) -> u64 {
    if slot < d {
        slot as u64
    } else {
        u32::MAX as u64
    }
}

fn tx_key(link: usize, d: usize) -> u64 {
    if link < d {
        link as u64
    } else {
        (1 << 31) | (link - d) as u64
    }
}

fn link_rng(seed: u64, rx: u64, tx: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((rx << 32) | tx);
    rng
}

impl ChannelRealization {
    /// Every (receiver, transmitter) pair draws from its own stream keyed by
    /// the endpoints, so a link's coefficients do not depend on `C` or `D`.
    pub fn draw(scenario: &Scenario, seed: u64) -> Result<Self> {
        let params = &scenario.params;
        let rx_slots = scenario.num_rx_slots();
        let tx_links = scenario.num_links();
        let panels = scenario.ris_panels.len();
        let side = params.ris_side;
        let elems = side * side;
        let d = scenario.num_d2d();

        let refl_alpha_c = match params.cellular_reflection {
            ReflectionMode::Once => 1.0,
            ReflectionMode::Twice => params.alpha_refl_c,
        };

        let zero = Complex64::new(0.0, 0.0);
        let mut cellular_direct = vec![zero; rx_slots * tx_links];
        let mut mmwave_direct = vec![zero; rx_slots * tx_links];
        let mut cellular_reflected = vec![zero; rx_slots * tx_links * panels * elems];
        let mut mmwave_reflected = vec![zero; rx_slots * tx_links * panels * elems];

        for r in 0..rx_slots {
            let rx = scenario.rx_slot_node(r);
            for t in 0..tx_links {
                let tx = scenario.tx_node(t);
                let di = r * tx_links + t;
                let rng = &mut link_rng(seed, rx_key(r, d), tx_key(t, d));
                cellular_direct[di] = sample_direct_cellular(tx, rx, params, rng)?;
                for panel in &scenario.ris_panels {
                    let g = sample_reflected_cellular(tx, rx, panel, refl_alpha_c, params, rng)?;
                    let base = (di * panels + panel.id) * elems;
                    cellular_reflected[base..base + elems].copy_from_slice(g.as_slice());
                }
                if r < d && t < d {
                    mmwave_direct[di] = sample_direct_mmwave(tx, rx, params, rng)?;
                    for panel in &scenario.ris_panels {
                        let h = sample_reflected_mmwave(tx, rx, panel, params, rng)?;
                        let base = (di * panels + panel.id) * elems;
                        mmwave_reflected[base..base + elems].copy_from_slice(h.as_slice());
                    }
                }
            }
        }

        let p_out = (0..tx_links)
            .map(|l| {
                if scenario.is_d2d(l) {
                    outage_probability(scenario.link_length(l), params.beta1)
                } else {
                    Ok(0.0)
                }
            })
            .collect::<Result<_>>()?;

        Ok(Self {
            rx_slots,
            tx_links,
            panels,
            side,
            cellular_direct,
            mmwave_direct,
            cellular_reflected,
            mmwave_reflected,
            sigma2_c: params.sigma2_cellular(),
            sigma2_m: params.sigma2_mmwave(),
            p_out,
        })
    }

    pub fn elements(&self) -> usize {
        self.side * self.side
    }

    pub fn sigma2(&self, band: Band) -> f64 {
        match band {
            Band::Cellular => self.sigma2_c,
            Band::MmWave => self.sigma2_m,
        }
    }

    pub fn direct(&self, band: Band, rx: usize, tx: usize) -> Complex64 {
        let i = rx * self.tx_links + tx;
        match band {
            Band::Cellular => self.cellular_direct[i],
            Band::MmWave => self.mmwave_direct[i],
        }
    }

    /// Row-major `[lz][ly]` slice of reflected coefficients via `panel`.
    pub fn reflected(&self, band: Band, rx: usize, tx: usize, panel: usize) -> &[Complex64] {
        let e = self.elements();
        let base = ((rx * self.tx_links + tx) * self.panels + panel) * e;
        match band {
            Band::Cellular => &self.cellular_reflected[base..base + e],
            Band::MmWave => &self.mmwave_reflected[base..base + e],
        }
    }

    /// Whether a coefficient was drawn for `(band, rx, tx)`.
    pub fn is_housed(&self, band: Band, rx: usize, tx: usize) -> bool {
        let d = self.rx_slots - 1;
        rx < self.rx_slots
            && tx < self.tx_links
            && match band {
                Band::Cellular => true,
                Band::MmWave => rx < d && tx < d,
            }
    }

    /// Copy with every reflected coefficient set to zero.
    pub fn without_reflections(&self) -> Self {
        let mut out = self.clone();
        out.cellular_reflected.fill(Complex64::new(0.0, 0.0));
        out.mmwave_reflected.fill(Complex64::new(0.0, 0.0));
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
