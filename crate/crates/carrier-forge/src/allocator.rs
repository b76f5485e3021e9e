//! Exhaustive carrier placement: enumerate slot permutations, evaluate every
//! victim's total CIR per permutation, and maximize the minimum.
//!
//! Slots are contiguous (plus an optional guard band), stacked left to right
//! in permutation order and centered so the stack midpoint sits at the
//! filter's frequency origin. Ties on the objective resolve to the lowest
//! permutation index, so results are reproducible.

use crate::cir::{cir_total, CirBreakdown, PlacedCarrier};
use crate::error::{Error, Result};
use crate::omux::fit_slopes;
use crate::scenario::Scenario;
use crate::simchain::{
    simulate_cir, simulate_combination, HpaMode, LinearMode, SimConfig,
};
use serde::Serialize;
use std::time::Instant;

/// How a combination's per-carrier CIRs are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// analytic formula, kernels rebuilt on every call
    Th1,
    /// analytic formula with kernel and interference caches
    Th2,
    /// Monte Carlo chain
    Sim,
}

/// One slot assignment: `order[j]` is the carrier occupying slot j, whose
/// center is `centers_mhz[j]`.
#[derive(Debug, Clone, Serialize)]
pub struct Placement {
    pub order: Vec<usize>,
    pub centers_mhz: Vec<f64>,
    pub label: String,
}

impl Placement {
    /// Center frequency of the given carrier in this placement.
    pub fn center_of(&self, carrier: usize) -> f64 {
        let j = self.order.iter().position(|&k| k == carrier).unwrap();
        self.centers_mhz[j]
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, pool: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if pool.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..pool.len() {
            let v = pool.remove(i);
            prefix.push(v);
            rec(prefix, pool, out);
            prefix.pop();
            pool.insert(i, v);
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut (0..n).collect(), &mut out);
    out
}

/// All Nc! contiguous centered placements, in lexicographic carrier order.
pub fn enumerate_allocations(scenario: &Scenario) -> Result<Vec<Placement>> {
    let n = scenario.carriers.len();
    if n > 8 {
        return Err(Error::Config(format!(
            "{n} carriers would need {n}! placements; 8 is the limit"
        )));
    }
    let guard = scenario.numerics.guard_band_mhz;
    let widths: Vec<f64> = scenario.carriers.iter().map(|c| c.bandwidth_mhz()).collect();
    let total: f64 = widths.iter().sum::<f64>() + guard * (n - 1) as f64;
    if total > scenario.omux.usable_bandwidth() {
        return Err(Error::Config(format!(
            "stack of {total:.1} MHz exceeds the usable filter width"
        )));
    }
    Ok(permutations(n)
        .into_iter()
        .map(|order| {
            let mut edge = -total / 2.0;
            let mut centers = Vec::with_capacity(n);
            let mut label = String::new();
            for &k in &order {
                centers.push(edge + widths[k] / 2.0);
                edge += widths[k] + guard;
                label.push_str(&format!("C{}", k + 1));
            }
            Placement {
                order,
                centers_mhz: centers,
                label,
            }
        })
        .collect())
}

/// Carriers of a placement with slopes fitted over each occupied band,
/// indexed by carrier (not slot).
pub fn place(scenario: &Scenario, placement: &Placement) -> Result<Vec<PlacedCarrier>> {
    scenario
        .carriers
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let center = placement.center_of(k);
            let slopes = fit_slopes(&scenario.omux, center, c.bandwidth_mhz())?
                .with_symbol_rate(c.rs_mbauds);
            Ok(PlacedCarrier {
                symbol_rate: c.rs_mbauds,
                rolloff: c.rolloff,
                power_fraction: c.power_fraction,
                center_mhz: center,
                slopes,
            })
        })
        .collect()
}

/// Monte Carlo settings implied by a scenario (matched modeling
/// assumptions: truncated amplifier, slope-based linear stage).
pub fn scenario_sim_config(scenario: &Scenario) -> SimConfig {
    SimConfig {
        n_symbols: scenario.numerics.n_symbols,
        seed: scenario.numerics.seed,
        hpa_mode: HpaMode::TruncatedN1,
        linear_mode: LinearMode::SlopeBased,
        constellation: scenario.constellation,
        oversampling: scenario.numerics.sim_oversampling,
        guard: scenario.numerics.guard_symbols,
        span: scenario.numerics.span,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CarrierOutcome {
    pub cir_db: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub breakdown: Option<CirBreakdown>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CombinationReport {
    pub label: String,
    pub order: Vec<usize>,
    pub centers_mhz: Vec<f64>,
    /// outcomes indexed by carrier
    pub per_carrier: Vec<CarrierOutcome>,
    pub min_cir_db: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AllocationResult {
    pub per_combination: Vec<CombinationReport>,
    pub best_index: usize,
    pub worst_index: usize,
    pub best_min_cir_db: f64,
    pub worst_min_cir_db: f64,
    pub gain_db: f64,
}

impl AllocationResult {
    pub fn best(&self) -> &CombinationReport {
        &self.per_combination[self.best_index]
    }

    pub fn worst(&self) -> &CombinationReport {
        &self.per_combination[self.worst_index]
    }
}

fn evaluate_placement(
    scenario: &Scenario,
    placement: &Placement,
    mode: EvalMode,
) -> Result<Vec<CarrierOutcome>> {
    let placed = place(scenario, placement)?;
    let p = scenario.total_power_linear();
    match mode {
        EvalMode::Th1 | EvalMode::Th2 => {
            let config = scenario.eval_config(mode == EvalMode::Th2)?;
            (0..placed.len())
                .map(|v| {
                    let b = cir_total(v, &placed, p, &config)?;
                    Ok(CarrierOutcome {
                        cir_db: b.cir_total_db,
                        stderr_db: None,
                        breakdown: Some(b),
                    })
                })
                .collect()
        }
        EvalMode::Sim => {
            let config = scenario_sim_config(scenario);
            let estimates = simulate_combination(
                &placed,
                p,
                &scenario.hpa,
                scenario.expansion_point,
                &config,
            )?;
            Ok(estimates
                .into_iter()
                .map(|e| CarrierOutcome {
                    cir_db: e.cir_db,
                    stderr_db: Some(e.stderr_db),
                    breakdown: None,
                })
                .collect())
        }
    }
}

/// Exhaustive max-min search over all placements.
pub fn solve_maxmin(scenario: &Scenario, mode: EvalMode) -> Result<AllocationResult> {
    let placements = enumerate_allocations(scenario)?;
    let mut per_combination = Vec::with_capacity(placements.len());
    for placement in &placements {
        let per_carrier = evaluate_placement(scenario, placement, mode)?;
        let min_cir_db = per_carrier
            .iter()
            .map(|o| o.cir_db)
            .fold(f64::INFINITY, f64::min);
        per_combination.push(CombinationReport {
            label: placement.label.clone(),
            order: placement.order.clone(),
            centers_mhz: placement.centers_mhz.clone(),
            per_carrier,
            min_cir_db,
        });
    }
    let mut best = 0;
    let mut worst = 0;
    for (i, report) in per_combination.iter().enumerate() {
        if report.min_cir_db > per_combination[best].min_cir_db {
            best = i;
        }
        if report.min_cir_db < per_combination[worst].min_cir_db {
            worst = i;
        }
    }
    let best_min = per_combination[best].min_cir_db;
    let worst_min = per_combination[worst].min_cir_db;
    Ok(AllocationResult {
        best_index: best,
        worst_index: worst,
        best_min_cir_db: best_min,
        worst_min_cir_db: worst_min,
        gain_db: best_min - worst_min,
        per_combination,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ModeTiming {
    pub calls: usize,
    pub seconds_per_call: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BenchReport {
    pub sim: ModeTiming,
    pub th1: ModeTiming,
    pub th2: ModeTiming,
    pub ratio_sim_th1: f64,
    pub ratio_th1_th2: f64,
}

/// Wall time per single-victim CIR computation for each mode, on the
/// identity placement. The cached mode is warmed by one untimed call.
pub fn bench_runtimes(scenario: &Scenario, repetitions: usize) -> Result<BenchReport> {
    if repetitions == 0 {
        return Err(Error::Config("benchmark needs at least one repetition".into()));
    }
    let placements = enumerate_allocations(scenario)?;
    let placed = place(scenario, &placements[0])?;
    let p = scenario.total_power_linear();

    let fresh = scenario.eval_config(false)?;
    let start = Instant::now();
    for _ in 0..repetitions {
        cir_total(0, &placed, p, &fresh)?;
    }
    let th1 = start.elapsed().as_secs_f64() / repetitions as f64;

    let cached = scenario.eval_config(true)?;
    cir_total(0, &placed, p, &cached)?; // warm the caches untimed
    let start = Instant::now();
    for _ in 0..repetitions {
        cir_total(0, &placed, p, &cached)?;
    }
    let th2 = start.elapsed().as_secs_f64() / repetitions as f64;

    let base = scenario_sim_config(scenario);
    let start = Instant::now();
    for call in 0..repetitions {
        let mut config = base.clone();
        config.seed = base.seed.wrapping_add(call as u64);
        simulate_cir(&placed, 0, p, &scenario.hpa, scenario.expansion_point, &config)?;
    }
    let sim = start.elapsed().as_secs_f64() / repetitions as f64;

    Ok(BenchReport {
        sim: ModeTiming {
            calls: repetitions,
            seconds_per_call: sim,
        },
        th1: ModeTiming {
            calls: repetitions,
            seconds_per_call: th1,
        },
        th2: ModeTiming {
            calls: repetitions,
            seconds_per_call: th2,
        },
        ratio_sim_th1: sim / th1,
        ratio_th1_th2: th1 / th2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::Constellation;
    use crate::omux::FilterCharacteristic;
    use crate::scenario::{CarrierSpec, Numerics};
    use std::path::Path;

    fn wideband() -> FilterCharacteristic {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/omux_wideband_v1.csv");
        FilterCharacteristic::load(&path).unwrap()
    }

    fn scenario(carriers: Vec<CarrierSpec>) -> Scenario {
        Scenario {
            carriers,
            total_power_db: -15.0,
            omux: wideband(),
            omux_path: Path::new("assets/omux_wideband_v1.csv").into(),
            hpa: Default::default(),
            expansion_point: 0.0,
            constellation: Constellation::Qpsk,
            numerics: Numerics {
                l: 3,
                span: 16,
                oversampling: 8,
                seed: 3,
                n_symbols: 10_000,
                sim_oversampling: 4,
                guard_symbols: 16,
                guard_band_mhz: 0.0,
            },
        }
    }

    fn table1_carriers() -> Vec<CarrierSpec> {
        vec![
            CarrierSpec {
                rs_mbauds: 120.48,
                rolloff: 0.3,
                power_fraction: 0.25,
            },
            CarrierSpec {
                rs_mbauds: 120.48,
                rolloff: 0.2,
                power_fraction: 0.375,
            },
            CarrierSpec {
                rs_mbauds: 180.72,
                rolloff: 0.1,
                power_fraction: 0.375,
            },
        ]
    }

    #[test]
    fn contiguous_centered_slot_arithmetic() {
        let sc = scenario(table1_carriers());
        let placements = enumerate_allocations(&sc).unwrap();
        assert_eq!(placements.len(), 6);
        assert_eq!(placements[0].order, vec![0, 1, 2]);
        assert_eq!(placements[0].label, "C1C2C3");
        let c = &placements[0].centers_mhz;
        assert!((c[0] + 171.684).abs() < 1e-9, "{c:?}");
        assert!((c[1] + 21.084).abs() < 1e-9, "{c:?}");
        assert!((c[2] - 150.6).abs() < 1e-9, "{c:?}");
        // stack midpoint at the origin: edges symmetric
        let b: Vec<f64> = sc.carriers.iter().map(|x| x.bandwidth_mhz()).collect();
        assert!((c[0] - b[0] / 2.0 + (c[2] + b[2] / 2.0)).abs() < 1e-9);
        // every permutation appears exactly once
        let mut orders: Vec<_> = placements.iter().map(|p| p.order.clone()).collect();
        orders.dedup();
        assert_eq!(orders.len(), 6);
    }

    #[test]
    fn single_carrier_sits_at_the_origin() {
        let sc = scenario(vec![CarrierSpec {
            rs_mbauds: 180.72,
            rolloff: 0.1,
            power_fraction: 1.0,
        }]);
        let placements = enumerate_allocations(&sc).unwrap();
        assert_eq!(placements.len(), 1);
        assert_eq!(placements[0].centers_mhz, vec![0.0]);
    }

    #[test]
    fn factorial_guard_rejects_large_sets() {
        let carriers: Vec<CarrierSpec> = (0..9)
            .map(|_| CarrierSpec {
                rs_mbauds: 20.0,
                rolloff: 0.2,
                power_fraction: 1.0 / 9.0,
            })
            .collect();
        let sc = scenario(carriers);
        assert!(enumerate_allocations(&sc).is_err());
    }

    #[test]
    fn identical_carriers_have_a_flat_objective() {
        let sc = scenario(vec![
            CarrierSpec {
                rs_mbauds: 120.48,
                rolloff: 0.2,
                power_fraction: 0.5,
            },
            CarrierSpec {
                rs_mbauds: 120.48,
                rolloff: 0.2,
                power_fraction: 0.5,
            },
        ]);
        let result = solve_maxmin(&sc, EvalMode::Th1).unwrap();
        assert_eq!(result.per_combination.len(), 2);
        assert!(result.gain_db.abs() < 1e-9, "gain {}", result.gain_db);
        let d = result.per_combination[0].min_cir_db - result.per_combination[1].min_cir_db;
        assert!(d.abs() < 1e-9, "{d}");
        assert!(result.gain_db >= 0.0);
    }

    #[test]
    fn cached_mode_reproduces_fresh_values() {
        let sc = scenario(vec![
            CarrierSpec {
                rs_mbauds: 120.48,
                rolloff: 0.3,
                power_fraction: 0.25,
            },
            CarrierSpec {
                rs_mbauds: 180.72,
                rolloff: 0.1,
                power_fraction: 0.75,
            },
        ]);
        let th1 = solve_maxmin(&sc, EvalMode::Th1).unwrap();
        let th2 = solve_maxmin(&sc, EvalMode::Th2).unwrap();
        assert_eq!(th1.best_index, th2.best_index);
        assert_eq!(th1.worst_index, th2.worst_index);
        for (a, b) in th1.per_combination.iter().zip(&th2.per_combination) {
            assert!(
                (a.min_cir_db - b.min_cir_db).abs() < 1e-12,
                "{} vs {}",
                a.min_cir_db,
                b.min_cir_db
            );
        }
    }

    #[test]
    fn bench_rejects_zero_repetitions() {
        let sc = scenario(table1_carriers());
        assert!(bench_runtimes(&sc, 0).is_err());
    }
}
