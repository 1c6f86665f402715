//! Switch-operation dynamics over coalition structures.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rate::{coalition_links, no_new_violation, power_cap, Partition, PowerVector, RateModel, Topology};
use crate::ris::EffectiveGains;

/// Relative margin a switch must clear to count as a strict improvement.
pub const SWITCH_REL_TOL: f64 = 1e-12;

/// Transmit power a pair takes into its new coalition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchPower {
    /// Current power, clipped to the new band's cap.
    #[default]
    Keep,
    /// The new band's cap.
    Cap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoalitionConfig {
    /// Stop after `patience_factor · D` consecutive rejected attempts.
    pub patience_factor: usize,
    /// Finish with an exhaustive pass that applies any remaining preferred switch.
    pub audit: bool,
    pub max_switches: usize,
    pub switch_power: SwitchPower,
}

impl Default for CoalitionConfig {
    fn default() -> Self {
        Self {
            patience_factor: 10,
            audit: true,
            max_switches: 100_000,
            switch_power: SwitchPower::Keep,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchEvent {
    pub d2d: usize,
    pub from: usize,
    pub to: usize,
    /// `R(F_from) + R(F_to)` before and after.
    pub utility_before: f64,
    pub utility_after: f64,
    /// System sum rate after the switch.
    pub total_after: f64,
}

/// Evaluation of one candidate switch.
#[derive(Debug, Clone)]
pub struct SwitchCandidate {
    pub partition: Partition,
    pub power: PowerVector,
    pub utility_before: f64,
    pub utility_after: f64,
    /// No link of either coalition falls below the SINR floor it met before.
    pub admissible: bool,
}

impl SwitchCandidate {
    pub fn preferred(&self) -> bool {
        self.admissible && strictly_better(self.utility_after, self.utility_before)
    }
}

pub fn strictly_better(after: f64, before: f64) -> bool {
    after > before + SWITCH_REL_TOL * before.abs().max(1.0)
}

/// Moves `d2d` into `to` and scores both sides of the preference inequality.
pub fn evaluate_switch(
    model: &RateModel<'_>,
    gains: &EffectiveGains,
    partition: &Partition,
    power: &PowerVector,
    d2d: usize,
    to: usize,
    rule: SwitchPower,
) -> Result<SwitchCandidate> {
    let scenario = model.scenario;
    let from = partition.coalition_of(d2d);
    assert_ne!(from, to, "switch target equals the current coalition");
    let topo = Topology::new(scenario, partition)?;

    let mut next = partition.clone();
    next.switch(d2d, to);
    let next_topo = Topology::new(scenario, &next)?;
    let mut next_power = power.clone();
    let cap = power_cap(&scenario.params, next.band(to));
    next_power[d2d] = match rule {
        SwitchPower::Keep => power[d2d].min(cap),
        SwitchPower::Cap => cap,
    };

    let before = model.coalition_utility(partition, &topo, gains, power, from)
        + model.coalition_utility(partition, &topo, gains, power, to);
    let after = model.coalition_utility(&next, &next_topo, gains, &next_power, from)
        + model.coalition_utility(&next, &next_topo, gains, &next_power, to);

    let mut affected = coalition_links(scenario, partition, from);
    affected.extend(coalition_links(scenario, partition, to));
    let gamma = model.gamma_min();
    let admissible = affected.iter().all(|&l| {
        no_new_violation(
            model.sinr(&topo, gains, power, l),
            model.sinr(&next_topo, gains, &next_power, l),
            gamma,
        )
    });

    Ok(SwitchCandidate {
        partition: next,
        power: next_power,
        utility_before: before,
        utility_after: after,
        admissible,
    })
}

pub fn prefers_switch(
    model: &RateModel<'_>,
    gains: &EffectiveGains,
    partition: &Partition,
    power: &PowerVector,
    d2d: usize,
    to: usize,
    rule: SwitchPower,
) -> Result<bool> {
    Ok(evaluate_switch(model, gains, partition, power, d2d, to, rule)?.preferred())
}

/// Every `(d2d, to)` switch that is currently preferred. Empty iff Nash-stable.
pub fn stability_audit(
    model: &RateModel<'_>,
    gains: &EffectiveGains,
    partition: &Partition,
    power: &PowerVector,
    rule: SwitchPower,
) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for d in 0..partition.num_d2d() {
        for to in 0..partition.num_coalitions() {
            if to != partition.coalition_of(d)
                && prefers_switch(model, gains, partition, power, d, to, rule)?
            {
                out.push((d, to));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct CoalitionOutcome {
    pub partition: Partition,
    pub power: PowerVector,
    pub trace: Vec<SwitchEvent>,
    pub attempts: usize,
}

/// Runs switch operations until `patience_factor · D` consecutive attempts fail.
pub fn form_coalitions<R: Rng + ?Sized>(
    model: &RateModel<'_>,
    gains: &EffectiveGains,
    partition: Partition,
    power: PowerVector,
    rng: &mut R,
    config: &CoalitionConfig,
) -> Result<CoalitionOutcome> {
    let d = partition.num_d2d();
    let others = partition.num_coalitions() - 1;
    let mut out = CoalitionOutcome {
        partition,
        power,
        trace: Vec::new(),
        attempts: 0,
    };
    if d == 0 || others == 0 {
        return Ok(out);
    }
    let patience = (config.patience_factor * d).max(1);

    let apply = |out: &mut CoalitionOutcome, pair: usize, to: usize, cand: SwitchCandidate| -> Result<()> {
        let from = out.partition.coalition_of(pair);
        out.partition = cand.partition;
        out.power = cand.power;
        let topo = Topology::new(model.scenario, &out.partition)?;
        out.trace.push(SwitchEvent {
            d2d: pair,
            from,
            to,
            utility_before: cand.utility_before,
            utility_after: cand.utility_after,
            total_after: model.system_sum_rate(&topo, gains, &out.power),
        });
        Ok(())
    };

    loop {
        let mut failures = 0;
        'dynamics: while out.trace.len() < config.max_switches {
            for pair in 0..d {
                if failures >= patience {
                    break 'dynamics;
                }
                out.attempts += 1;
                let from = out.partition.coalition_of(pair);
                let r = rng.random_range(0..others);
                let to = if r >= from { r + 1 } else { r };
                let cand = evaluate_switch(model, gains, &out.partition, &out.power, pair, to, config.switch_power)?;
                if cand.preferred() {
                    apply(&mut out, pair, to, cand)?;
                    failures = 0;
                } else {
                    failures += 1;
                }
            }
        }
        if !config.audit || out.trace.len() >= config.max_switches {
            return Ok(out);
        }
        match stability_audit(model, gains, &out.partition, &out.power, config.switch_power)?.first() {
            None => return Ok(out),
            Some(&(pair, to)) => {
                let cand = evaluate_switch(model, gains, &out.partition, &out.power, pair, to, config.switch_power)?;
                apply(&mut out, pair, to, cand)?;
            }
        }
    }
}
