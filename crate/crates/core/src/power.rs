//! Per-coalition power control: DC decomposition of the log-domain sum rate,
//! first-order linearization of the concave minuend, and projected gradient
//! descent on the Lagrangian.
//!
//! Powers are handled internally in units of `power_unit_w` watts (mW by
//! default) so that the step sizes are on the scale of the powers they move.

use std::f64::consts::LN_10;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rate::{bandwidth, coalition_links, meets_sinr_floor, power_cap, qos_not_worse, Partition, PowerVector, RateModel, Topology};
use crate::ris::EffectiveGains;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DualUpdate {
    /// `λ ← (λ − μ·(∂L/∂λ)⁺)⁺`
    #[default]
    Clamped,
    /// `λ ← (λ + μ·∂L/∂λ)⁺`
    Ascent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerConfig {
    pub delta0: f64,
    pub mu0: f64,
    pub lambda0: f64,
    /// Stop once the coalition rate moves by less than this, bit/s.
    pub eps_inner: f64,
    pub max_iter: usize,
    pub dual_update: DualUpdate,
    /// Positive factor applied to the objective and constraints.
    pub objective_scale: f64,
    pub power_unit_w: f64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self {
            delta0: 50.0,
            mu0: 100.0,
            lambda0: 100.0,
            eps_inner: 1.0,
            max_iter: 100_000,
            dual_update: DualUpdate::Clamped,
            objective_scale: 1.0,
            power_unit_w: 1e-3,
        }
    }
}

/// The `g_i`/`φ_i` pair of every coalition member over the coalition's
/// power sub-vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DcTerms {
    /// Global link ids of the members.
    pub links: Vec<usize>,
    /// `a[i·K + j]`: squared gain from member `j`'s transmitter to member
    /// `i`'s receiver, per power unit.
    pub a: Vec<f64>,
    pub sigma2: f64,
    /// Caps in power units.
    pub caps: Vec<f64>,
    pub gamma_linear: f64,
    /// `lg(1 + γ_min)`.
    pub gamma_lg: f64,
    /// Rate weights (outage factors) and the shared bandwidth.
    pub weights: Vec<f64>,
    pub bandwidth: f64,
    pub scale: f64,
}

impl DcTerms {
    pub fn from_matrix(a: Vec<f64>, sigma2: f64, caps: Vec<f64>, gamma_linear: f64) -> Self {
        let k = caps.len();
        assert_eq!(a.len(), k * k, "gain matrix must be K×K");
        Self {
            links: (0..k).collect(),
            a,
            sigma2,
            caps,
            gamma_linear,
            gamma_lg: (1.0 + gamma_linear).log10(),
            weights: vec![1.0; k],
            bandwidth: 1.0,
            scale: 1.0,
        }
    }

    pub fn for_coalition(
        model: &RateModel<'_>,
        partition: &Partition,
        topo: &Topology,
        gains: &EffectiveGains,
        coalition: usize,
        unit_w: f64,
    ) -> Self {
        let links = coalition_links(model.scenario, partition, coalition);
        let band = partition.band(coalition);
        let k = links.len();
        let mut a = vec![0.0; k * k];
        for (i, &li) in links.iter().enumerate() {
            for (j, &lj) in links.iter().enumerate() {
                a[i * k + j] = gains.get(band, topo.rx[li], lj) * unit_w;
            }
        }
        let params = model.params();
        Self {
            caps: links.iter().map(|&l| power_cap(params, topo.band[l]) / unit_w).collect(),
            weights: links.iter().map(|&l| model.rate_weight(topo, l)).collect(),
            links,
            a,
            sigma2: model.channels.sigma2(band),
            gamma_linear: model.gamma_min(),
            gamma_lg: (1.0 + model.gamma_min()).log10(),
            bandwidth: bandwidth(params, band),
            scale: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.caps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.caps.is_empty()
    }

    fn gain(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.len() + j]
    }

    /// `Σ_{j≠i} a_ij p_j + σ²`.
    pub fn interference(&self, i: usize, p: &[f64]) -> f64 {
        let mut acc = self.sigma2;
        for (j, &pj) in p.iter().enumerate() {
            if j != i {
                acc += self.gain(i, j) * pj;
            }
        }
        acc
    }

    pub fn sinr(&self, i: usize, p: &[f64]) -> f64 {
        self.gain(i, i) * p[i] / self.interference(i, p)
    }

    pub fn g(&self, i: usize, p: &[f64]) -> f64 {
        self.interference(i, p).log10()
    }

    pub fn phi(&self, i: usize, p: &[f64]) -> f64 {
        (self.interference(i, p) + self.gain(i, i) * p[i]).log10()
    }

    pub fn grad_g(&self, i: usize, p: &[f64]) -> Vec<f64> {
        let den = LN_10 * self.interference(i, p);
        (0..self.len())
            .map(|k| if k == i { 0.0 } else { self.gain(i, k) / den })
            .collect()
    }

    pub fn grad_phi(&self, i: usize, p: &[f64]) -> Vec<f64> {
        let den = LN_10 * (self.interference(i, p) + self.gain(i, i) * p[i]);
        (0..self.len()).map(|k| self.gain(i, k) / den).collect()
    }

    /// `Σ_i [g_i(P) − φ_i(P)]`, scaled.
    pub fn dc_objective(&self, p: &[f64]) -> f64 {
        self.scale * (0..self.len()).map(|i| self.g(i, p) - self.phi(i, p)).sum::<f64>()
    }

    /// Outage-weighted coalition rate, bit/s.
    pub fn utility(&self, p: &[f64]) -> f64 {
        (0..self.len())
            .map(|i| self.weights[i] * self.bandwidth * (1.0 + self.sinr(i, p)).log2())
            .sum()
    }

    pub fn feasible(&self, i: usize, p: &[f64]) -> bool {
        meets_sinr_floor(self.sinr(i, p), self.gamma_linear)
    }

    pub fn linearize(&self, anchor: &[f64]) -> Linearized<'_> {
        Linearized {
            terms: self,
            anchor: anchor.to_vec(),
            g0: (0..self.len()).map(|i| self.g(i, anchor)).collect(),
            grad_g: (0..self.len()).map(|i| self.grad_g(i, anchor)).collect(),
        }
    }
}

/// `f^(n)`: each `g_i` replaced by its tangent at the anchor.
#[derive(Debug, Clone)]
pub struct Linearized<'a> {
    pub terms: &'a DcTerms,
    pub anchor: Vec<f64>,
    g0: Vec<f64>,
    grad_g: Vec<Vec<f64>>,
}

impl Linearized<'_> {
    /// Member term `f_i^(n)(P)`, scaled.
    pub fn member_value(&self, i: usize, p: &[f64]) -> f64 {
        let tangent: f64 = self.g0[i]
            + self.grad_g[i]
                .iter()
                .zip(p.iter().zip(&self.anchor))
                .map(|(g, (x, x0))| g * (x - x0))
                .sum::<f64>();
        self.terms.scale * (tangent - self.terms.phi(i, p))
    }

    pub fn value(&self, p: &[f64]) -> f64 {
        (0..self.terms.len()).map(|i| self.member_value(i, p)).sum()
    }

    pub fn lagrangian(&self, p: &[f64], lambda: &[f64]) -> f64 {
        self.value(p)
            + lambda
                .iter()
                .enumerate()
                .map(|(i, l)| l * (self.member_value(i, p) + self.terms.scale * self.terms.gamma_lg))
                .sum::<f64>()
    }

    /// `∂L/∂p_k = Σ_i (1 + λ_i)(∂g_i/∂p_k|anchor − ∂φ_i/∂p_k|P)`.
    pub fn grad_p(&self, p: &[f64], lambda: &[f64]) -> Vec<f64> {
        let k = self.terms.len();
        let mut out = vec![0.0; k];
        for i in 0..k {
            let w = self.terms.scale * (1.0 + lambda[i]);
            let dphi = self.terms.grad_phi(i, p);
            for (o, (gg, gp)) in out.iter_mut().zip(self.grad_g[i].iter().zip(dphi)) {
                *o += w * (gg - gp);
            }
        }
        out
    }

    /// `∂L/∂λ_i = f_i^(n)(P) + lg(1 + γ_min)`, scaled.
    pub fn grad_lambda(&self, p: &[f64]) -> Vec<f64> {
        (0..self.terms.len())
            .map(|i| self.member_value(i, p) + self.terms.scale * self.terms.gamma_lg)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerTraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub rate: f64,
    pub max_violation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerSolution {
    /// Member powers in power units, `None` if the start was kept.
    pub best: Option<Vec<f64>>,
    pub best_utility: f64,
    pub start_utility: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<PowerTraceRow>,
}

/// Runs the descent on one coalition. Only iterates that leave every
/// member's QoS standing no worse than at the start are eligible; the best
/// eligible iterate by utility is reported.
pub fn solve_dc(terms: &DcTerms, start: &[f64], config: &PowerConfig) -> PowerSolution {
    let k = terms.len();
    let start_sinr: Vec<f64> = (0..k).map(|i| terms.sinr(i, start)).collect();
    let start_utility = terms.utility(start);
    let mut sol = PowerSolution {
        best: None,
        best_utility: start_utility,
        start_utility,
        iterations: 0,
        converged: false,
        trace: Vec::new(),
    };
    if k == 0 {
        sol.converged = true;
        return sol;
    }

    let mut p: Vec<f64> = start.to_vec();
    let mut lambda = vec![config.lambda0; k];
    let (mut delta, mut mu) = (config.delta0, config.mu0);
    let mut rate = start_utility;
    let record = |it: usize, p: &[f64], rate: f64| PowerTraceRow {
        iteration: it,
        objective: terms.dc_objective(p),
        rate,
        max_violation: (0..k)
            .map(|i| (terms.gamma_lg - (1.0 + terms.sinr(i, p)).log10()).max(0.0))
            .fold(0.0, f64::max),
    };
    sol.trace.push(record(0, &p, rate));

    for n in 1..=config.max_iter {
        let lin = terms.linearize(&p);
        let grad = lin.grad_p(&p, &lambda);
        let next: Vec<f64> = p
            .iter()
            .zip(&grad)
            .zip(&terms.caps)
            .map(|((x, g), cap)| (x - delta * g).clamp(0.0, *cap))
            .collect();
        if delta > 1.0 {
            delta /= 2.0;
        }
        let dl = lin.grad_lambda(&next);
        for (l, d) in lambda.iter_mut().zip(dl) {
            *l = match config.dual_update {
                DualUpdate::Clamped => (*l - mu * d.max(0.0)).max(0.0),
                DualUpdate::Ascent => (*l + mu * d).max(0.0),
            };
        }
        if mu > 1.0 {
            mu /= 2.0;
        }
        let next_rate = terms.utility(&next);
        sol.iterations = n;
        sol.trace.push(record(n, &next, next_rate));
        let eligible = (0..k).all(|i| qos_not_worse(start_sinr[i], terms.sinr(i, &next), terms.gamma_linear));
        if eligible && next_rate > sol.best_utility {
            sol.best_utility = next_rate;
            sol.best = Some(next.clone());
        }
        let done = (next_rate - rate).abs() < config.eps_inner;
        p = next;
        rate = next_rate;
        if done {
            sol.converged = true;
            break;
        }
    }
    sol
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerOutcome {
    pub power: PowerVector,
    /// Every member meets the SINR floor at the returned power.
    pub feasible: bool,
    pub solution: PowerSolution,
}

/// Optimizes the powers of coalition `k`'s links; other entries are untouched.
pub fn allocate_power(
    model: &RateModel<'_>,
    partition: &Partition,
    topo: &Topology,
    gains: &EffectiveGains,
    power: &PowerVector,
    coalition: usize,
    config: &PowerConfig,
) -> Result<PowerOutcome> {
    let unit = config.power_unit_w;
    let mut terms = DcTerms::for_coalition(model, partition, topo, gains, coalition, unit);
    terms.scale = config.objective_scale;
    let start: Vec<f64> = terms.links.iter().map(|&l| power[l] / unit).collect();
    let solution = solve_dc(&terms, &start, config);
    let mut out = power.clone();
    if let Some(best) = &solution.best {
        for (&l, &x) in terms.links.iter().zip(best) {
            out[l] = (x * unit).min(power_cap(model.params(), topo.band[l]));
        }
    }
    let feasible = terms.links.iter().all(|&l| model.is_feasible(topo, gains, &out, l));
    Ok(PowerOutcome {
        power: out,
        feasible,
        solution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_terms(rng: &mut ChaCha8Rng, k: usize) -> DcTerms {
        let a = (0..k * k)
            .map(|idx| {
                let diag = idx % (k + 1) == 0;
                10f64.powf(if diag { rng.random_range(-9.0..-6.0) } else { rng.random_range(-13.0..-9.0) })
            })
            .collect();
        DcTerms::from_matrix(a, 1e-12, vec![199.5; k], 10f64.powf(0.5))
    }

    #[test]
    fn zero_power_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = random_terms(&mut rng, 3);
        let zero = vec![0.0; 3];
        for i in 0..3 {
            assert_eq!(t.g(i, &zero), t.sigma2.log10());
            assert_eq!(t.phi(i, &zero), t.sigma2.log10());
        }
        assert_eq!(t.dc_objective(&zero), 0.0);
    }

    #[test]
    fn single_link_objective_decreases_in_power() {
        let t = DcTerms::from_matrix(vec![1e-8], 1e-12, vec![100.0], 1.0);
        let mut last = f64::INFINITY;
        for p in [0.0, 1.0, 10.0, 100.0] {
            let v = t.dc_objective(&[p]);
            assert!(v < last);
            assert_eq!(t.g(0, &[p]), 1e-12f64.log10());
            last = v;
        }
    }

    #[test]
    fn dc_objective_matches_negated_log_rates() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let t = random_terms(&mut rng, 2);
            let p: Vec<f64> = (0..2).map(|_| rng.random_range(0.0..199.5)).collect();
            // −Σ lg(1 + SINR_i) evaluated from the 2×2 matrix directly
            let s0 = t.a[0] * p[0] / (t.a[1] * p[1] + t.sigma2);
            let s1 = t.a[3] * p[1] / (t.a[2] * p[0] + t.sigma2);
            let direct = -((1.0 + s0).log10() + (1.0 + s1).log10());
            let v = t.dc_objective(&p);
            assert!((v - direct).abs() <= 1e-10 * direct.abs());
        }
    }

    #[test]
    fn phi_dominates_g_and_both_are_concave() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let t = random_terms(&mut rng, 3);
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..199.5)).collect();
            let y: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..199.5)).collect();
            let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
            for i in 0..3 {
                assert!(t.phi(i, &x) >= t.g(i, &x));
                let tol = 1e-12;
                assert!(t.g(i, &mid) + tol >= 0.5 * (t.g(i, &x) + t.g(i, &y)));
                assert!(t.phi(i, &mid) + tol >= 0.5 * (t.phi(i, &x) + t.phi(i, &y)));
            }
        }
    }

    #[test]
    fn linearization_is_tangent_upper_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let t = random_terms(&mut rng, 3);
            let anchor: Vec<f64> = (0..3).map(|_| rng.random_range(1.0..199.5)).collect();
            let lin = t.linearize(&anchor);
            assert!((lin.value(&anchor) - t.dc_objective(&anchor)).abs() < 1e-12);
            let p: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..199.5)).collect();
            assert!(lin.value(&p) >= t.dc_objective(&p) - 1e-12);
        }
    }

    #[test]
    fn tangent_slope_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t = random_terms(&mut rng, 3);
        let anchor: Vec<f64> = vec![50.0, 80.0, 120.0];
        for i in 0..3 {
            let grad = t.grad_g(i, &anchor);
            for (k, gk) in grad.iter().enumerate() {
                let h = 1e-3;
                let mut hi = anchor.clone();
                let mut lo = anchor.clone();
                hi[k] += h;
                lo[k] -= h;
                let fd = (t.g(i, &hi) - t.g(i, &lo)) / (2.0 * h);
                assert!((fd - gk).abs() <= 1e-6 * gk.abs().max(1e-9), "{fd} vs {gk}");
            }
        }
    }

    #[test]
    fn lone_link_goes_to_cap() {
        let mut t = DcTerms::from_matrix(vec![1e-9], 1e-12, vec![199.5], 10f64.powf(0.5));
        t.bandwidth = 2.16e9;
        let sol = solve_dc(&t, &[100.0], &PowerConfig::default());
        assert_eq!(sol.best.unwrap()[0], 199.5);
        let sol = solve_dc(&t, &[199.5], &PowerConfig::default());
        assert!(sol.best.is_none());
    }

    #[test]
    fn best_iterate_never_loses_utility() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for dual in [DualUpdate::Clamped, DualUpdate::Ascent] {
            for _ in 0..30 {
                let t = random_terms(&mut rng, 3);
                let start = t.caps.clone();
                let cfg = PowerConfig { dual_update: dual, ..PowerConfig::default() };
                let sol = solve_dc(&t, &start, &cfg);
                assert!(sol.best_utility >= sol.start_utility);
                let p = sol.best.clone().unwrap_or(start.clone());
                for (x, cap) in p.iter().zip(&t.caps) {
                    assert!((0.0..=*cap).contains(x));
                }
                for i in 0..3 {
                    if t.feasible(i, &start) {
                        assert!(t.feasible(i, &p));
                    } else {
                        assert!(t.sinr(i, &p) >= t.sinr(i, &start));
                    }
                }
                assert!(sol.iterations <= cfg.max_iter);
            }
        }
    }

    #[test]
    fn objective_scale_does_not_move_the_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let c = LN_10 / std::f64::consts::LN_2;
        for _ in 0..20 {
            let t = random_terms(&mut rng, 2);
            let start = vec![120.0, 150.0];
            // unit steps stay below the halving threshold in both runs
            let base = PowerConfig { delta0: 1.0, mu0: 1.0, lambda0: 1.0, ..PowerConfig::default() };
            let mut scaled = t.clone();
            scaled.scale = c;
            let cfg = PowerConfig { delta0: 1.0 / c, mu0: 1.0 / c, ..base };
            let a2 = solve_dc(&t, &start, &base);
            let b = solve_dc(&scaled, &start, &cfg);
            let pa = a2.best.unwrap_or(start.clone());
            let pb = b.best.unwrap_or(start.clone());
            for (x, y) in pa.iter().zip(&pb) {
                assert!((x - y).abs() <= 1e-6 * x.abs().max(1.0), "{x} vs {y}");
            }
        }
    }
}
