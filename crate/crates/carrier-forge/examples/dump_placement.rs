//! Scratch: print the bundled scenario's first placement and fresh sim
//! references for offline model checks.

use carrier_forge::allocator::{enumerate_allocations, place, scenario_sim_config};
use carrier_forge::hpa::SalehParams;
use carrier_forge::scenario::Scenario;
use carrier_forge::simchain::simulate_combination;

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/assets/table1.toml");
    let scenario = Scenario::load(std::path::Path::new(path)).unwrap();
    let placements = enumerate_allocations(&scenario).unwrap();
    let carriers = place(&scenario, &placements[0]).unwrap();
    for (i, c) in carriers.iter().enumerate() {
        println!(
            "carrier {i}: rate {} rolloff {} frac {} center {} xg {:.12e} yd {:.12e}",
            c.symbol_rate,
            c.rolloff,
            c.power_fraction,
            c.center_mhz,
            c.slopes.x_g,
            c.slopes.y_d,
        );
    }
    let mut config = scenario_sim_config(&scenario);
    config.n_symbols = 30_000;
    let p = scenario.total_power_linear();
    println!("p = {p}");
    let est = simulate_combination(&carriers, p, &SalehParams::default(), 0.0, &config).unwrap();
    for (i, e) in est.iter().enumerate() {
        println!(
            "sim victim {i}: cir_db {:.4} (c {:.6e}, i {:.6e}, se {:.3})",
            e.cir_db, e.c_hat, e.i_hat, e.stderr_db
        );
    }

    use carrier_forge::cir::PlacedCarrier;
    use carrier_forge::moments::Constellation;
    use carrier_forge::omux::SlopePair;
    use carrier_forge::simchain::{HpaMode, LinearMode, SimConfig};
    let pair = |spacing: f64| -> Vec<PlacedCarrier> {
        [0.0, spacing]
            .iter()
            .map(|&center| PlacedCarrier {
                symbol_rate: 1.0,
                rolloff: 0.2,
                power_fraction: 0.5,
                center_mhz: center,
                slopes: SlopePair::from_normalized(1.0, 0.0),
            })
            .collect()
    };
    let pcfg = |seed: u64| SimConfig {
        n_symbols: 30_000,
        seed,
        hpa_mode: HpaMode::TruncatedN1,
        linear_mode: LinearMode::SlopeBased,
        constellation: Constellation::Qpsk,
        oversampling: 8,
        guard: 32,
        span: 32,
    };
    let p2 = 10f64.powf(-1.2);
    for (tag, spacing) in [("near", 1.1), ("far", 3.6)] {
        let mut vals = Vec::new();
        for seed in 41..53u64 {
            let est =
                simulate_combination(&pair(spacing), p2, &SalehParams::default(), 0.0, &pcfg(seed))
                    .unwrap();
            vals.push(est[0].cir_db);
            print!("{:.3} ", est[0].cir_db);
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        println!("\npair {tag}: mean {mean:.4} range [{lo:.3}, {hi:.3}] over 12 seeds");
    }
}
