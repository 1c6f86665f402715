//! SINR, Shannon rates, coalition utilities and the system sum rate.
//!
//! Interference sets follow the coalition structure: a cellular-mode D2D
//! receiver hears the other D2D transmitters of its coalition plus the owning
//! cellular user; the BS decoding cellular user `c` hears every D2D
//! transmitter in `F_c`; an mm-wave D2D receiver hears every other mm-wave
//! D2D transmitter. In all three cases this is "every other member of the
//! coalition", with the owner counted as a member.

use serde::{Deserialize, Serialize};

pub use crate::scenario::{Link, LinkKind};

use crate::channel::{Band, ChannelRealization};
use crate::error::{Error, Result};
use crate::params::SimParams;
use crate::ris::{EffectiveGains, PhaseConfig};
use crate::scenario::Scenario;

/// Slack on the SINR floor, in `lg(1 + SINR)` units.
pub const SINR_SLACK_LG: f64 = 1e-9;

/// Coalition structure. `assignment[d] = c` puts D2D pair `d` on cellular
/// user `c`'s uplink band; `assignment[d] = C` puts it in the shared mm-wave
/// coalition.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    cellular_users: usize,
    assignment: Vec<usize>,
}

impl Partition {
    pub fn all_mmwave(cellular_users: usize, d2d: usize) -> Self {
        Self {
            cellular_users,
            assignment: vec![cellular_users; d2d],
        }
    }

    pub fn from_assignment(cellular_users: usize, assignment: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = assignment.iter().find(|&&k| k > cellular_users) {
            return Err(Error::InconsistentState(format!(
                "coalition {bad} does not exist with {cellular_users} cellular users"
            )));
        }
        Ok(Self {
            cellular_users,
            assignment,
        })
    }

    pub fn num_cellular(&self) -> usize {
        self.cellular_users
    }

    pub fn num_d2d(&self) -> usize {
        self.assignment.len()
    }

    /// `C + 1`.
    pub fn num_coalitions(&self) -> usize {
        self.cellular_users + 1
    }

    /// Index of the mm-wave coalition.
    pub fn mmwave(&self) -> usize {
        self.cellular_users
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn coalition_of(&self, d2d: usize) -> usize {
        self.assignment[d2d]
    }

    pub fn members(&self, coalition: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&d| self.assignment[d] == coalition)
            .collect()
    }

    pub fn coalitions(&self) -> Vec<Vec<usize>> {
        (0..self.num_coalitions()).map(|k| self.members(k)).collect()
    }

    /// Owning cellular user; `None` for the mm-wave coalition.
    pub fn owner(&self, coalition: usize) -> Option<usize> {
        (coalition < self.cellular_users).then_some(coalition)
    }

    pub fn band(&self, coalition: usize) -> Band {
        if coalition == self.cellular_users {
            Band::MmWave
        } else {
            Band::Cellular
        }
    }

    /// Binary mode indicator `X_{c,d}`.
    pub fn x(&self, cellular_user: usize, d2d: usize) -> bool {
        self.assignment[d2d] == cellular_user
    }

    /// Moves `d2d` into `to`.
    pub fn switch(&mut self, d2d: usize, to: usize) {
        assert!(to <= self.cellular_users, "unknown coalition {to}");
        self.assignment[d2d] = to;
    }

    pub fn check(&self, scenario: &Scenario) -> Result<()> {
        if self.cellular_users != scenario.num_cellular() || self.num_d2d() != scenario.num_d2d() {
            return Err(Error::InconsistentState(
                "partition does not match the scenario's user counts".into(),
            ));
        }
        Ok(())
    }
}

/// Transmit power per link, W.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerVector(pub Vec<f64>);

impl PowerVector {
    /// Every link at the cap of the band it currently uses.
    pub fn at_caps(scenario: &Scenario, partition: &Partition) -> Self {
        Self(
            (0..scenario.num_links())
                .map(|l| power_cap(&scenario.params, link_band(scenario, partition, l)))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn within_caps(&self, scenario: &Scenario, partition: &Partition) -> bool {
        self.0.iter().enumerate().all(|(l, &p)| {
            p >= 0.0 && p <= power_cap(&scenario.params, link_band(scenario, partition, l))
        })
    }
}

impl std::ops::Index<usize> for PowerVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl std::ops::IndexMut<usize> for PowerVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

pub fn power_cap(params: &SimParams, band: Band) -> f64 {
    match band {
        Band::Cellular => params.p_max_cellular_w(),
        Band::MmWave => params.p_max_mmwave_w(),
    }
}

pub fn bandwidth(params: &SimParams, band: Band) -> f64 {
    match band {
        Band::Cellular => params.w_c,
        Band::MmWave => params.w_m,
    }
}

pub fn link_band(scenario: &Scenario, partition: &Partition, link: usize) -> Band {
    if scenario.is_d2d(link) {
        partition.band(partition.coalition_of(link))
    } else {
        Band::Cellular
    }
}

/// Coalition a link belongs to: its own for D2D, its coalition for uplinks.
pub fn link_coalition(scenario: &Scenario, partition: &Partition, link: usize) -> usize {
    if scenario.is_d2d(link) {
        partition.coalition_of(link)
    } else {
        link - scenario.num_d2d()
    }
}

/// Links of coalition `k`: D2D members ascending, then the owner's uplink.
pub fn coalition_links(scenario: &Scenario, partition: &Partition, k: usize) -> Vec<usize> {
    let mut v = partition.members(k);
    if let Some(c) = partition.owner(k) {
        v.push(scenario.uplink_of(c));
    }
    v
}

/// `W · log2(1 + sinr)`.
pub fn link_rate(band: Band, sinr: f64, params: &SimParams) -> Result<f64> {
    if sinr < 0.0 || sinr.is_nan() {
        return Err(Error::Negative {
            what: "SINR",
            value: sinr,
        });
    }
    Ok(bandwidth(params, band) * (1.0 + sinr).log2())
}

pub fn meets_sinr_floor(sinr: f64, gamma_min_linear: f64) -> bool {
    (1.0 + sinr).log10() >= (1.0 + gamma_min_linear).log10() - SINR_SLACK_LG
}

/// Admissibility of a move for one link: a link meeting the floor must keep
/// meeting it, and a link below the floor must not lose SINR.
pub fn qos_not_worse(before: f64, after: f64, gamma_min_linear: f64) -> bool {
    if meets_sinr_floor(before, gamma_min_linear) {
        meets_sinr_floor(after, gamma_min_linear)
    } else {
        after >= before
    }
}

/// Admissibility of a coalition switch for one link: a link meeting the floor
/// must keep meeting it.
pub fn no_new_violation(before: f64, after: f64, gamma_min_linear: f64) -> bool {
    !meets_sinr_floor(before, gamma_min_linear) || meets_sinr_floor(after, gamma_min_linear)
}

/// Per-link band, receiver slot and interference set for one partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub band: Vec<Band>,
    pub rx: Vec<usize>,
    pub coalition: Vec<usize>,
    pub interferers: Vec<Vec<usize>>,
}

impl Topology {
    pub fn new(scenario: &Scenario, partition: &Partition) -> Result<Self> {
        partition.check(scenario)?;
        let n = scenario.num_links();
        let groups: Vec<Vec<usize>> = (0..partition.num_coalitions())
            .map(|k| coalition_links(scenario, partition, k))
            .collect();
        let mut band = Vec::with_capacity(n);
        let mut coalition = Vec::with_capacity(n);
        let mut interferers = Vec::with_capacity(n);
        for l in 0..n {
            let k = link_coalition(scenario, partition, l);
            band.push(link_band(scenario, partition, l));
            coalition.push(k);
            interferers.push(groups[k].iter().copied().filter(|&j| j != l).collect());
        }
        Ok(Self {
            band,
            rx: (0..n).map(|l| scenario.rx_slot(l)).collect(),
            coalition,
            interferers,
        })
    }

    pub fn num_links(&self) -> usize {
        self.band.len()
    }
}

/// Rate evaluation over one scenario and channel draw.
#[derive(Debug, Clone, Copy)]
pub struct RateModel<'a> {
    pub scenario: &'a Scenario,
    pub channels: &'a ChannelRealization,
}

impl<'a> RateModel<'a> {
    pub fn new(scenario: &'a Scenario, channels: &'a ChannelRealization) -> Self {
        Self { scenario, channels }
    }

    pub fn params(&self) -> &SimParams {
        &self.scenario.params
    }

    pub fn gamma_min(&self) -> f64 {
        self.params().gamma_min_linear()
    }

    /// Interference-plus-noise power at the receiver of `link`.
    pub fn interference(
        &self,
        topo: &Topology,
        gains: &EffectiveGains,
        power: &PowerVector,
        link: usize,
    ) -> f64 {
        let band = topo.band[link];
        let rx = topo.rx[link];
        let mut acc = self.channels.sigma2(band);
        for &j in &topo.interferers[link] {
            acc += gains.get(band, rx, j) * power[j];
        }
        acc
    }

    pub fn sinr(
        &self,
        topo: &Topology,
        gains: &EffectiveGains,
        power: &PowerVector,
        link: usize,
    ) -> f64 {
        let band = topo.band[link];
        let signal = gains.get(band, topo.rx[link], link) * power[link];
        signal / self.interference(topo, gains, power, link)
    }

    /// Shannon rate before outage, bit/s.
    pub fn raw_rate(&self, topo: &Topology, sinr: f64, link: usize) -> f64 {
        bandwidth(self.params(), topo.band[link]) * (1.0 + sinr).log2()
    }

    /// Weight applied to a link's rate in the sum: `1 − P_out` for mm-wave D2D.
    pub fn rate_weight(&self, topo: &Topology, link: usize) -> f64 {
        if topo.band[link] == Band::MmWave {
            1.0 - self.channels.p_out[link]
        } else {
            1.0
        }
    }

    /// Contribution of `link` to the system sum rate, bit/s.
    pub fn contribution(
        &self,
        topo: &Topology,
        gains: &EffectiveGains,
        power: &PowerVector,
        link: usize,
    ) -> f64 {
        let s = self.sinr(topo, gains, power, link);
        self.rate_weight(topo, link) * self.raw_rate(topo, s, link)
    }

    pub fn system_sum_rate(
        &self,
        topo: &Topology,
        gains: &EffectiveGains,
        power: &PowerVector,
    ) -> f64 {
        (0..topo.num_links())
            .map(|l| self.contribution(topo, gains, power, l))
            .sum()
    }

    /// `R(F_k)`: member rates plus the owner's uplink rate (cellular), or the
    /// outage-weighted member rates (mm-wave).
    pub fn coalition_utility(
        &self,
        partition: &Partition,
        topo: &Topology,
        gains: &EffectiveGains,
        power: &PowerVector,
        coalition: usize,
    ) -> f64 {
        coalition_links(self.scenario, partition, coalition)
            .into_iter()
            .map(|l| self.contribution(topo, gains, power, l))
            .sum()
    }

    pub fn is_feasible(
        &self,
        topo: &Topology,
        gains: &EffectiveGains,
        power: &PowerVector,
        link: usize,
    ) -> bool {
        meets_sinr_floor(self.sinr(topo, gains, power, link), self.gamma_min())
    }

    /// Links below the SINR floor.
    pub fn violations(
        &self,
        topo: &Topology,
        gains: &EffectiveGains,
        power: &PowerVector,
    ) -> Vec<usize> {
        (0..topo.num_links())
            .filter(|&l| !self.is_feasible(topo, gains, power, l))
            .collect()
    }
}

/// Self-contained evaluation of one link's SINR from raw inputs.
pub fn compute_sinr(
    scenario: &Scenario,
    channels: &ChannelRealization,
    partition: &Partition,
    power: &PowerVector,
    phases: &PhaseConfig,
    link: usize,
) -> Result<f64> {
    if link >= scenario.num_links() {
        return Err(Error::InconsistentState(format!("link {link} does not exist")));
    }
    let topo = Topology::new(scenario, partition)?;
    let gains = EffectiveGains::compose(scenario, channels, phases)?;
    Ok(RateModel::new(scenario, channels).sinr(&topo, &gains, power, link))
}

/// Self-contained system sum rate from raw inputs, bit/s.
pub fn system_sum_rate(
    scenario: &Scenario,
    channels: &ChannelRealization,
    partition: &Partition,
    power: &PowerVector,
    phases: &PhaseConfig,
) -> Result<f64> {
    let topo = Topology::new(scenario, partition)?;
    let gains = EffectiveGains::compose(scenario, channels, phases)?;
    Ok(RateModel::new(scenario, channels).system_sum_rate(&topo, &gains, power))
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::scenario::Point3;
    use num_complex::Complex64;

    /// Scenario plus a channel realization with hand-set direct gains and no
    /// reflections. `cell[r][t]` and `mm[r][t]` are squared magnitudes.
    pub fn hand_channels(
        params: SimParams,
        cus: usize,
        d2d: usize,
        cell: impl Fn(usize, usize) -> f64,
        mm: impl Fn(usize, usize) -> f64,
        sigma2: f64,
    ) -> (Scenario, ChannelRealization) {
        let cu_pos: Vec<Point3> = (0..cus)
            .map(|i| Point3::new(10.0 + 5.0 * i as f64, 50.0, 0.0))
            .collect();
        let pairs: Vec<(Point3, Point3)> = (0..d2d)
            .map(|i| {
                (
                    Point3::new(20.0, 10.0 + 10.0 * i as f64, 0.0),
                    Point3::new(25.0, 10.0 + 10.0 * i as f64, 0.0),
                )
            })
            .collect();
        let s = Scenario::from_positions(params, &cu_pos, &pairs).unwrap();
        let mut ch = ChannelRealization::draw(&s, 0).unwrap().without_reflections();
        for r in 0..ch.rx_slots {
            for t in 0..ch.tx_links {
                let i = r * ch.tx_links + t;
                ch.cellular_direct[i] = Complex64::new(cell(r, t).sqrt(), 0.0);
                ch.mmwave_direct[i] = if r < d2d && t < d2d {
                    Complex64::new(mm(r, t).sqrt(), 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                };
            }
        }
        ch.sigma2_c = sigma2;
        ch.sigma2_m = sigma2;
        ch.p_out = vec![0.0; s.num_links()];
        (s, ch)
    }
}
