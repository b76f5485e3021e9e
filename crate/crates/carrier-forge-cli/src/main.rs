//! Command-line front end: sweeps, slope fitting, allocation search,
//! formula-vs-simulation validation and the runtime benchmark.
//!
//! Machine output goes to stdout (CSV for tabular data, JSON for structured
//! results, all versioned with `schema_version`); human summaries go to
//! stderr. Exit codes: 0 success, 2 configuration or usage error,
//! 3 numerical failure.

use carrier_forge::allocator::{
    bench_runtimes, enumerate_allocations, place, scenario_sim_config, solve_maxmin,
    AllocationResult, EvalMode,
};
use carrier_forge::cir::{accuracy_percent, cir_total, EvalConfig, PlacedCarrier};
use carrier_forge::hpa::{taylor_coeffs, SalehParams};
use carrier_forge::kernels::cache::set_cache_dir;
use carrier_forge::moments::Constellation;
use carrier_forge::omux::{fit_slopes, FilterCharacteristic, SlopePair};
use carrier_forge::scenario::Scenario;
use carrier_forge::simchain::{simulate_cir, simulate_combination, HpaMode, LinearMode, SimConfig};
use carrier_forge::Error;
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "carrier-forge",
    about = "Multicarrier CIR analysis for a nonlinear satellite transponder",
    version
)]
struct Cli {
    /// Kernel cache directory (otherwise CARRIER_FORGE_CACHE_DIR or the
    /// system temp dir)
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// closed form, kernels computed per call
    Th1,
    /// closed form with the kernel cache
    Th2,
    /// Monte Carlo waveform chain
    Sim,
}

impl Mode {
    fn eval(self) -> EvalMode {
        match self {
            Mode::Th1 => EvalMode::Th1,
            Mode::Th2 => EvalMode::Th2,
            Mode::Sim => EvalMode::Sim,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Mode::Th1 => "th1",
            Mode::Th2 => "th2",
            Mode::Sim => "sim",
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sweep total input power for one carrier and print CIR rows as CSV
    CirSweep {
        /// normalized gain slope x_g = g * Rs
        #[arg(long, default_value_t = 0.0)]
        xg: f64,
        /// normalized group-delay slope y_d = d * Rs^2
        #[arg(long, default_value_t = 0.0)]
        yd: f64,
        #[arg(long, default_value_t = 0.2)]
        rolloff: f64,
        /// sweep start in dB
        #[arg(long, allow_hyphen_values = true)]
        pmin: f64,
        /// sweep end in dB (inclusive)
        #[arg(long, allow_hyphen_values = true)]
        pmax: f64,
        /// sweep step in dB, must be positive
        #[arg(long, allow_hyphen_values = true)]
        pstep: f64,
        #[arg(long, value_enum, default_value_t = Mode::Th1)]
        mode: Mode,
        /// kernel truncation limit
        #[arg(long, default_value_t = 10)]
        l: usize,
        /// pulse truncation span in symbols
        #[arg(long, default_value_t = 32)]
        k: u32,
        /// kernel integration oversampling
        #[arg(long, default_value_t = 16)]
        osf: u32,
        /// Monte Carlo symbols (sim mode)
        #[arg(long, default_value_t = 100_000)]
        n_symbols: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Fit gain and group-delay slopes over a band of an OMUX dataset
    Fit {
        /// OMUX CSV path
        #[arg(long)]
        omux: PathBuf,
        /// band center in MHz
        #[arg(long, allow_hyphen_values = true)]
        f0: f64,
        /// fit bandwidth in MHz
        #[arg(long)]
        bandwidth: f64,
        /// also print slopes normalized to this symbol rate
        #[arg(long)]
        rs_mbauds: Option<f64>,
    },
    /// Exhaustive max-min CIR search over carrier placements
    Allocate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Th2)]
        mode: Mode,
    },
    /// Compare the closed form against the Monte Carlo chain per placement
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Per-call wall time of each evaluation mode
    Bench {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 10)]
        reps: usize,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Some(dir) = cli.cache_dir {
        set_cache_dir(Some(dir));
    }
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e}");
        std::process::exit(match e {
            Error::Numerical(_) => 3,
            _ => 2,
        });
    }
}

fn run(command: Command) -> carrier_forge::Result<()> {
    match command {
        Command::CirSweep {
            xg,
            yd,
            rolloff,
            pmin,
            pmax,
            pstep,
            mode,
            l,
            k,
            osf,
            n_symbols,
            seed,
        } => cmd_cir_sweep(xg, yd, rolloff, pmin, pmax, pstep, mode, l, k, osf, n_symbols, seed),
        Command::Fit {
            omux,
            f0,
            bandwidth,
            rs_mbauds,
        } => cmd_fit(&omux, f0, bandwidth, rs_mbauds),
        Command::Allocate { scenario, mode } => cmd_allocate(&scenario, mode),
        Command::Validate { scenario } => cmd_validate(&scenario),
        Command::Bench { scenario, reps } => cmd_bench(&scenario, reps),
    }
}

fn sweep_points(pmin: f64, pmax: f64, pstep: f64) -> carrier_forge::Result<Vec<f64>> {
    if !(pstep > 0.0) {
        return Err(Error::Config(format!("pstep {pstep} must be positive")));
    }
    if pmax < pmin {
        return Err(Error::Config(format!("pmax {pmax} below pmin {pmin}")));
    }
    let count = ((pmax - pmin) / pstep + 1e-9).floor() as usize + 1;
    if count > 10_000 {
        return Err(Error::Config(format!("sweep would emit {count} rows")));
    }
    Ok((0..count).map(|i| pmin + pstep * i as f64).collect())
}

#[allow(clippy::too_many_arguments)]
fn cmd_cir_sweep(
    xg: f64,
    yd: f64,
    rolloff: f64,
    pmin: f64,
    pmax: f64,
    pstep: f64,
    mode: Mode,
    l: usize,
    k: u32,
    osf: u32,
    n_symbols: usize,
    seed: u64,
) -> carrier_forge::Result<()> {
    let points = sweep_points(pmin, pmax, pstep)?;
    let carrier = vec![PlacedCarrier {
        symbol_rate: 1.0,
        rolloff,
        power_fraction: 1.0,
        center_mhz: 0.0,
        slopes: SlopePair::from_normalized(xg, yd),
    }];
    let saleh = SalehParams::default();
    println!("# schema_version=1");
    match mode {
        Mode::Th1 | Mode::Th2 => {
            let config = EvalConfig {
                moments: Constellation::Qpsk.moments()?,
                coeffs: taylor_coeffs(&saleh, 0.0)?,
                l,
                span: k as usize,
                oversampling: osf as usize,
                use_cache: mode == Mode::Th2,
            };
            println!("p_db,cir_db,mode");
            for p_db in points {
                let p = 10f64.powf(p_db / 10.0);
                let breakdown = cir_total(0, &carrier, p, &config)?;
                println!("{p_db:.8e},{:.8e},{}", breakdown.cir_total_db, mode.name());
            }
        }
        Mode::Sim => {
            let config = SimConfig {
                n_symbols,
                seed,
                hpa_mode: HpaMode::TruncatedN1,
                linear_mode: LinearMode::SlopeBased,
                constellation: Constellation::Qpsk,
                oversampling: 8,
                guard: k,
                span: k,
            };
            println!("p_db,cir_db,mode,stderr_db");
            for p_db in points {
                let p = 10f64.powf(p_db / 10.0);
                let estimate = simulate_cir(&carrier, 0, p, &saleh, 0.0, &config)?;
                println!(
                    "{p_db:.8e},{:.8e},sim,{:.8e}",
                    estimate.cir_db, estimate.stderr_db
                );
            }
        }
    }
    Ok(())
}

fn cmd_fit(
    omux: &std::path::Path,
    f0: f64,
    bandwidth: f64,
    rs_mbauds: Option<f64>,
) -> carrier_forge::Result<()> {
    let characteristic = FilterCharacteristic::load(omux)?;
    let slopes = fit_slopes(&characteristic, f0, bandwidth)?;
    println!("g_db_per_mhz = {:.8e}", slopes.g);
    println!("d_ns_per_mhz = {:.8e}", slopes.d);
    if let Some(rs) = rs_mbauds {
        let normalized = slopes.with_symbol_rate(rs);
        println!("x_g = {:.8e}", normalized.x_g);
        println!("y_d = {:.8e}", normalized.y_d);
    }
    Ok(())
}

#[derive(Serialize)]
struct AllocateOutput<'a> {
    schema_version: u32,
    mode: &'a str,
    #[serde(flatten)]
    result: &'a AllocationResult,
}

fn cmd_allocate(path: &std::path::Path, mode: Mode) -> carrier_forge::Result<()> {
    let scenario = Scenario::load(path)?;
    let result = solve_maxmin(&scenario, mode.eval())?;
    let output = AllocateOutput {
        schema_version: 1,
        mode: mode.name(),
        result: &result,
    };
    let json = serde_json::to_string_pretty(&output)
        .map_err(|e| Error::Config(format!("serialize result: {e}")))?;
    println!("{json}");

    eprintln!("{:<10} {:>12}  per-carrier CIR (dB)", "placement", "min (dB)");
    for report in &result.per_combination {
        let carriers: Vec<String> = report
            .per_carrier
            .iter()
            .map(|o| format!("{:.2}", o.cir_db))
            .collect();
        eprintln!(
            "{:<10} {:>12.2}  [{}]",
            report.label,
            report.min_cir_db,
            carriers.join(", ")
        );
    }
    eprintln!(
        "best {} at {:.2} dB, worst {} at {:.2} dB, gain {:.2} dB",
        result.best().label,
        result.best_min_cir_db,
        result.worst().label,
        result.worst_min_cir_db,
        result.gain_db
    );
    Ok(())
}

fn cmd_validate(path: &std::path::Path) -> carrier_forge::Result<()> {
    let scenario = Scenario::load(path)?;
    let placements = enumerate_allocations(&scenario)?;
    let config = scenario.eval_config(true)?;
    let sim_config = scenario_sim_config(&scenario);
    let p = scenario.total_power_linear();
    println!("# schema_version=1");
    println!("combination,carrier,theory_db,sim_db,stderr_db,accuracy_pct");
    let mut accuracies = Vec::new();
    for placement in &placements {
        let placed = place(&scenario, placement)?;
        let estimates = simulate_combination(
            &placed,
            p,
            &scenario.hpa,
            scenario.expansion_point,
            &sim_config,
        )?;
        for (v, estimate) in estimates.iter().enumerate() {
            let theory = cir_total(v, &placed, p, &config)?;
            let accuracy = accuracy_percent(theory.cir_total_db, estimate.cir_db);
            accuracies.push(accuracy);
            println!(
                "{},C{},{:.8e},{:.8e},{:.8e},{:.8e}",
                placement.label,
                v + 1,
                theory.cir_total_db,
                estimate.cir_db,
                estimate.stderr_db,
                accuracy
            );
        }
    }
    let min = accuracies.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = accuracies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mean = accuracies.iter().sum::<f64>() / accuracies.len() as f64;
    eprintln!("accuracy min/mean/max = {min:.2}% / {mean:.2}% / {max:.2}%");
    Ok(())
}

fn cmd_bench(path: &std::path::Path, reps: usize) -> carrier_forge::Result<()> {
    let scenario = Scenario::load(path)?;
    let report = bench_runtimes(&scenario, reps)?;
    println!("# schema_version=1");
    println!("mode,calls,seconds_per_call");
    println!("sim,{},{:.8e}", report.sim.calls, report.sim.seconds_per_call);
    println!("th1,{},{:.8e}", report.th1.calls, report.th1.seconds_per_call);
    println!("th2,{},{:.8e}", report.th2.calls, report.th2.seconds_per_call);
    println!("# ratio_sim_th1={:.8e}", report.ratio_sim_th1);
    println!("# ratio_th1_th2={:.8e}", report.ratio_th1_th2);
    Ok(())
}
