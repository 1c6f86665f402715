//! Element-wise exhaustive search over the discrete RIS phase codebook.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::Band;
use crate::coalition::strictly_better;
use crate::error::Result;
use crate::rate::{qos_not_worse, PowerVector, RateModel, Topology};
use crate::ris::{reflection_coefficient, EffectiveGains, PhaseConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSearchConfig {
    /// Upper bound on full sweeps; the search also stops after a sweep with no change.
    pub max_sweeps: usize,
}

impl Default for PhaseSearchConfig {
    fn default() -> Self {
        Self { max_sweeps: 100 }
    }
}

#[derive(Debug, Clone)]
pub struct PhaseOutcome {
    pub phases: PhaseConfig,
    /// Gains recomposed from scratch for the returned phases.
    pub gains: EffectiveGains,
    pub changes: usize,
    pub sweeps: usize,
    /// Largest relative gap between the incrementally tracked gains in use and
    /// a full recomposition.
    pub max_drift: f64,
}

/// Links whose SINR depends on `panel`: those it serves, and those with an
/// interferer it serves.
pub fn affected_links(topo: &Topology, assist: &[usize], panel: usize) -> Vec<usize> {
    (0..topo.num_links())
        .filter(|&l| assist[l] == panel || topo.interferers[l].iter().any(|&j| assist[j] == panel))
        .collect()
}

fn objective(model: &RateModel<'_>, topo: &Topology, gains: &EffectiveGains, power: &PowerVector, links: &[usize]) -> f64 {
    links.iter().map(|&l| model.contribution(topo, gains, power, l)).sum()
}

/// One `(band, rx, tx)` coefficient routed through the panel being tuned.
struct Entry {
    band: Band,
    rx: usize,
    tx: usize,
    direct: Complex64,
    alpha: f64,
    sum: Complex64,
}

pub fn optimize_phases(
    model: &RateModel<'_>,
    topo: &Topology,
    power: &PowerVector,
    phases: PhaseConfig,
    config: &PhaseSearchConfig,
) -> Result<PhaseOutcome> {
    let scenario = model.scenario;
    let channels = model.channels;
    let codebook = phases.codebook()?;
    let mut phases = phases;
    let mut gains = EffectiveGains::compose(scenario, channels, &phases)?;
    let mut out_changes = 0;
    let mut sweeps = 0;
    let mut max_drift: f64 = 0.0;
    let gamma = model.gamma_min();

    for _ in 0..config.max_sweeps {
        sweeps += 1;
        let mut changes = 0;
        for panel in 0..phases.indices.len() {
            let links = affected_links(topo, &phases.assist, panel);
            if links.is_empty() {
                continue;
            }
            let mut entries: Vec<Entry> = Vec::new();
            for &l in &links {
                let band = topo.band[l];
                let rx = topo.rx[l];
                for t in std::iter::once(l).chain(topo.interferers[l].iter().copied()) {
                    if phases.assist[t] != panel || entries.iter().any(|e| e.band == band && e.rx == rx && e.tx == t) {
                        continue;
                    }
                    let h = channels.reflected(band, rx, t, panel);
                    let sum = h
                        .iter()
                        .zip(phases.indices[panel].iter())
                        .map(|(h, &m)| h * codebook.phasor(m))
                        .sum();
                    entries.push(Entry {
                        band,
                        rx,
                        tx: t,
                        direct: channels.direct(band, rx, t),
                        alpha: reflection_coefficient(&scenario.params, band),
                        sum,
                    });
                }
            }

            for elem in 0..phases.indices[panel].len() {
                let cur = phases.indices[panel].as_slice()[elem];
                let saved: Vec<f64> = entries.iter().map(|e| gains.get(e.band, e.rx, e.tx)).collect();
                let was: Vec<f64> = links.iter().map(|&l| model.sinr(topo, &gains, power, l)).collect();
                let mut best = (cur, objective(model, topo, &gains, power, &links));
                for m in 0..codebook.len() as u16 {
                    if m == cur {
                        continue;
                    }
                    let delta = codebook.phasor(m) - codebook.phasor(cur);
                    for e in &entries {
                        let h = channels.reflected(e.band, e.rx, e.tx, panel)[elem];
                        let g = e.direct + (e.sum + h * delta) * e.alpha;
                        gains.set(e.band, e.rx, e.tx, g.norm_sqr());
                    }
                    let admissible = links
                        .iter()
                        .zip(&was)
                        .all(|(&l, &b)| qos_not_worse(b, model.sinr(topo, &gains, power, l), gamma));
                    if admissible {
                        let v = objective(model, topo, &gains, power, &links);
                        if strictly_better(v, best.1) {
                            best = (m, v);
                        }
                    }
                }
                if best.0 == cur {
                    for (e, g) in entries.iter().zip(saved) {
                        gains.set(e.band, e.rx, e.tx, g);
                    }
                    continue;
                }
                let delta = codebook.phasor(best.0) - codebook.phasor(cur);
                for e in entries.iter_mut() {
                    let h = channels.reflected(e.band, e.rx, e.tx, panel)[elem];
                    e.sum += h * delta;
                    let g = e.direct + e.sum * e.alpha;
                    gains.set(e.band, e.rx, e.tx, g.norm_sqr());
                }
                phases.indices[panel].as_mut_slice()[elem] = best.0;
                changes += 1;
            }
        }
        let fresh = EffectiveGains::compose(scenario, channels, &phases)?;
        max_drift = max_drift.max(relative_gap(topo, &gains, &fresh));
        gains = fresh;
        out_changes += changes;
        if changes == 0 {
            break;
        }
    }

    Ok(PhaseOutcome {
        phases,
        gains,
        changes: out_changes,
        sweeps,
        max_drift,
    })
}

/// Relative gap over the gains the rate model reads under `topo`.
fn relative_gap(topo: &Topology, a: &EffectiveGains, b: &EffectiveGains) -> f64 {
    let mut worst: f64 = 0.0;
    for l in 0..topo.num_links() {
        let (band, rx) = (topo.band[l], topo.rx[l]);
        for t in std::iter::once(l).chain(topo.interferers[l].iter().copied()) {
            let (x, y) = (a.get(band, rx, t), b.get(band, rx, t));
            let scale = x.abs().max(y.abs());
            if scale > 0.0 {
                worst = worst.max((x - y).abs() / scale);
            }
        }
    }
    worst
}

/// A single-element change that the search should have taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub panel: usize,
    pub element: usize,
    pub codeword: u16,
    pub gain_bps: f64,
}

/// Every admissible single-element change that strictly raises the system
/// sum rate, each scored by full recomposition.
pub fn single_deviation_audit(
    model: &RateModel<'_>,
    topo: &Topology,
    power: &PowerVector,
    phases: &PhaseConfig,
) -> Result<Vec<Deviation>> {
    let base_gains = EffectiveGains::compose(model.scenario, model.channels, phases)?;
    let base = model.system_sum_rate(topo, &base_gains, power);
    let was: Vec<f64> = (0..topo.num_links()).map(|l| model.sinr(topo, &base_gains, power, l)).collect();
    let gamma = model.gamma_min();
    let len = phases.codebook()?.len() as u16;
    let mut out = Vec::new();
    for panel in 0..phases.indices.len() {
        for element in 0..phases.indices[panel].len() {
            for m in 0..len {
                if m == phases.indices[panel].as_slice()[element] {
                    continue;
                }
                let mut trial = phases.clone();
                trial.indices[panel].as_mut_slice()[element] = m;
                let g = EffectiveGains::compose(model.scenario, model.channels, &trial)?;
                let admissible = (0..topo.num_links()).all(|l| qos_not_worse(was[l], model.sinr(topo, &g, power, l), gamma));
                let v = model.system_sum_rate(topo, &g, power);
                if admissible && strictly_better(v, base) {
                    out.push(Deviation {
                        panel,
                        element,
                        codeword: m,
                        gain_bps: v - base,
                    });
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelRealization;
    use crate::params::SimParams;
    use crate::rate::Partition;
    use crate::scenario::generate_scenario;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn instance(seed: u64, side: usize, c: usize, d: usize) -> (crate::Scenario, ChannelRealization, Partition) {
        let params = SimParams { ris_side: side, ..SimParams::default() };
        let s = generate_scenario(&params, c, d, seed).unwrap();
        let ch = ChannelRealization::draw(&s, seed ^ 0x55).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let assignment = (0..d).map(|_| rng.random_range(0..=c)).collect();
        (s, ch, Partition::from_assignment(c, assignment).unwrap())
    }

    #[test]
    fn search_is_monotone_drift_free_and_one_opt() {
        for seed in 0..4 {
            let (s, ch, part) = instance(seed, 2, 2, 4);
            let topo = Topology::new(&s, &part).unwrap();
            let p = PowerVector::at_caps(&s, &part);
            let m = RateModel::new(&s, &ch);
            let start = PhaseConfig::random(&s, &mut ChaCha8Rng::seed_from_u64(seed));
            let before = m.system_sum_rate(&topo, &EffectiveGains::compose(&s, &ch, &start).unwrap(), &p);
            let out = optimize_phases(&m, &topo, &p, start, &PhaseSearchConfig::default()).unwrap();
            let after = m.system_sum_rate(&topo, &out.gains, &p);
            assert!(after >= before);
            assert!(out.max_drift <= 1e-12, "drift {}", out.max_drift);
            assert!(single_deviation_audit(&m, &topo, &p, &out.phases).unwrap().is_empty());
            let again = optimize_phases(&m, &topo, &p, out.phases.clone(), &PhaseSearchConfig { max_sweeps: 1 }).unwrap();
            assert_eq!(again.changes, 0);
        }
    }

    #[test]
    fn zero_reflection_keeps_incumbent() {
        let (s, ch, part) = instance(7, 2, 1, 3);
        let ch = ch.without_reflections();
        let topo = Topology::new(&s, &part).unwrap();
        let p = PowerVector::at_caps(&s, &part);
        let m = RateModel::new(&s, &ch);
        let start = PhaseConfig::random(&s, &mut ChaCha8Rng::seed_from_u64(1));
        let out = optimize_phases(&m, &topo, &p, start.clone(), &PhaseSearchConfig::default()).unwrap();
        assert_eq!(out.phases, start);
        assert_eq!(out.changes, 0);
    }

    #[test]
    fn single_sweep_is_deterministic() {
        let (s, ch, part) = instance(3, 2, 2, 5);
        let topo = Topology::new(&s, &part).unwrap();
        let p = PowerVector::at_caps(&s, &part);
        let m = RateModel::new(&s, &ch);
        let start = PhaseConfig::uniform(&s, 0);
        let cfg = PhaseSearchConfig { max_sweeps: 1 };
        let a = optimize_phases(&m, &topo, &p, start.clone(), &cfg).unwrap();
        let b = optimize_phases(&m, &topo, &p, start, &cfg).unwrap();
        assert_eq!(a.phases, b.phases);
        assert_eq!(a.sweeps, 1);
    }
}
