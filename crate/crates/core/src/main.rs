use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mcf_qkd::engine::{
    calibrate_baseline, emulate_session, fit_raman_coefficient, plan_bandwidth, simulate_point, sweep_power,
    CalibrationTargets, Scale, Scenario, SessionSpec, SweepSpec,
};
use mcf_qkd::io::{config_hash, parse_config, session_table, simulation_rows, sweep_table, write_config, ResultsTable};
use mcf_qkd::Error;

const USAGE_EXIT: u8 = 2;

#[derive(Parser)]
#[command(
    name = "mcf-qkd",
    version,
    about = "Decoy-state QKD coexisting with classical data in a multicore fiber"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one operating point.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep the combined data-channel launch power.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        min_mw: f64,
        #[arg(long)]
        max_mw: f64,
        #[arg(long, default_value_t = 41)]
        points: usize,
        /// Space the grid logarithmically.
        #[arg(long)]
        log: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit detector efficiency, e_opt and f_ec to the target operating point.
    Calibrate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2.7e6)]
        sifted_bps: f64,
        #[arg(long, default_value_t = 0.0336)]
        qber: f64,
        #[arg(long, default_value_t = 627e3)]
        secure_bps: f64,
        /// Skip the secure-rate stage and keep the configured f_ec.
        #[arg(long)]
        no_secure_target: bool,
    },
    /// Emulate a long key-distribution session block by block.
    Session {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        hours: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0.0336)]
        qber_mean: f64,
        #[arg(long, default_value_t = 0.0054)]
        qber_std: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bracket the Raman coefficient between the low- and high-power constraints.
    FitRaman {
        #[arg(long)]
        config: PathBuf,
    },
    /// Launch power and capacity of fully loaded DWDM data cores.
    Plan {
        #[arg(long)]
        cores: u32,
        #[arg(long)]
        channels: u32,
        #[arg(long)]
        power_mw: f64,
        #[arg(long)]
        gbps: f64,
        /// Also evaluate the key rate at the planned combined power.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Model(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Model(e)
    }
}

fn usage(e: Error) -> Failure {
    Failure::Usage(e.to_string())
}

struct Loaded {
    scenario: Scenario,
    hash: String,
}

fn load(path: &Path) -> Result<Loaded, Failure> {
    let bytes = std::fs::read(path).map_err(Error::from)?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| {
        Failure::Model(Error::Parse {
            line: None,
            message: format!("config is not UTF-8: {e}"),
        })
    })?;
    let scenario = parse_config(&text, path.parent().unwrap_or(Path::new(".")))?;
    Ok(Loaded {
        scenario,
        hash: config_hash(&bytes),
    })
}

fn provenance(hash: &str, seed: Option<u64>) -> String {
    let seed = seed.map_or_else(|| "none".to_string(), |s| s.to_string());
    format!("# config_sha256={hash}\n# seed={seed}")
}

fn emit(table: ResultsTable, out: Option<&Path>) -> Result<(), Failure> {
    let csv = table.to_csv();
    match out {
        Some(path) => std::fs::write(path, csv).map_err(Error::from)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate { config, out } => {
            let cfg = load(&config)?;
            let r = simulate_point(&cfg.scenario)?;
            println!("{}", provenance(&cfg.hash, None));
            for (name, v) in simulation_rows(&r) {
                if name.ends_with("_db") {
                    println!("{name},{v:.2}");
                } else {
                    println!("{name},{v:.9e}");
                }
            }
            if let Some(reason) = &r.rates.diagnostic {
                println!("# diagnostic={reason}");
            }
            if let Some(path) = out {
                let rows = simulation_rows(&r);
                let names: Vec<&str> = rows.iter().map(|(n, _)| *n).collect();
                let mut table = ResultsTable::new(&names)
                    .with_meta("config_sha256", &cfg.hash)
                    .with_meta("seed", "none");
                table.rows.push(rows.iter().map(|(_, v)| *v).collect());
                emit(table, Some(&path))?;
            }
        }
        Command::Sweep {
            config,
            min_mw,
            max_mw,
            points,
            log,
            out,
        } => {
            let spec = SweepSpec {
                power_min_mw: min_mw,
                power_max_mw: max_mw,
                points,
                scale: if log { Scale::Log } else { Scale::Linear },
            };
            spec.validate().map_err(usage)?;
            let cfg = load(&config)?;
            let points = sweep_power(&cfg.scenario, &spec)?;
            let table = sweep_table(&points)
                .with_meta("config_sha256", &cfg.hash)
                .with_meta("seed", "none");
            emit(table, out.as_deref())?;
        }
        Command::Calibrate {
            config,
            out,
            sifted_bps,
            qber,
            secure_bps,
            no_secure_target,
        } => {
            let cfg = load(&config)?;
            let targets = CalibrationTargets {
                sifted_rate_bps: sifted_bps,
                qber,
                secure_finite_bps: (!no_secure_target).then_some(secure_bps),
            };
            let (calibrated, report) = calibrate_baseline(&cfg.scenario, &targets)?;
            let text = write_config(&calibrated)?;
            let header = format!(
                "# Calibrated from config sha256 {}\n# efficiency={:.9e} e_opt={:.9e} f_ec={:.9e}\n\n",
                cfg.hash, report.efficiency, report.e_opt, report.f_ec
            );
            std::fs::write(&out, format!("{header}{text}")).map_err(Error::from)?;
            println!("{}", provenance(&cfg.hash, None));
            println!("efficiency,{:.9e}", report.efficiency);
            println!("e_opt,{:.9e}", report.e_opt);
            println!("f_ec,{:.9e}", report.f_ec);
            println!("efficiency_iterations,{}", report.efficiency_iterations);
            println!("f_ec_iterations,{}", report.f_ec_iterations);
            for r in &report.residuals {
                println!(
                    "residual_{},{:.9e} (target {:.9e}, achieved {:.9e})",
                    r.target, r.relative_error, r.target_value, r.achieved
                );
            }
        }
        Command::Session {
            config,
            hours,
            seed,
            qber_mean,
            qber_std,
            out,
        } => {
            let spec = SessionSpec {
                duration_hours: hours,
                qber_mean,
                qber_std,
                seed,
            };
            spec.validate().map_err(usage)?;
            let cfg = load(&config)?;
            let session = emulate_session(&cfg.scenario, &spec)?;
            let s = &session.summary;
            eprintln!(
                "{} blocks of {:.2} s: QBER {:.4} +/- {:.4}, secure {:.4e} +/- {:.4e} b/s",
                s.blocks, s.block_duration_s, s.qber_mean, s.qber_std, s.secure_mean_bps, s.secure_std_bps
            );
            let mut table = session_table(&session);
            table.preamble.insert(0, ("seed".into(), seed.to_string()));
            table.preamble.insert(0, ("config_sha256".into(), cfg.hash));
            emit(table, out.as_deref())?;
        }
        Command::FitRaman { config } => {
            let cfg = load(&config)?;
            let fit = fit_raman_coefficient(&cfg.scenario)?;
            println!("{}", provenance(&cfg.hash, None));
            println!("kappa_lo,{:.9e}", fit.kappa_lo);
            println!("kappa_hi,{:.9e}", fit.kappa_hi);
            println!("recommended,{:.9e}", fit.recommended);
            if fit.hi_unbounded {
                println!("# kappa_hi reached the top of the search range");
            }
            let configured = cfg.scenario.raman_coefficient;
            println!(
                "configured,{configured:.9e} ({})",
                if fit.contains(configured) { "inside" } else { "outside" }
            );
        }
        Command::Plan {
            cores,
            channels,
            power_mw,
            gbps,
            config,
        } => {
            let plan = plan_bandwidth(cores, channels, power_mw, gbps).map_err(usage)?;
            println!(
                "{} mW/direction, {} Tb/s",
                plan.power_per_direction_mw, plan.aggregate_bidirectional_tbps
            );
            if let Some(path) = config {
                let cfg = load(&path)?;
                let combined = plan.combined_power_mw();
                let r = simulate_point(&cfg.scenario.with_combined_data_power(combined)?)?;
                println!("{}", provenance(&cfg.hash, None));
                println!("combined_mw,{combined:.9e}");
                println!("qber,{:.9e}", r.qber());
                println!("secure_finite_bps,{:.9e}", r.secure_finite_bps());
            }
        }
    }
    Ok(())
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("SIM_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| Failure::Usage(format!("SIM_THREADS must be an integer >= 1, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Usage(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|()| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(USAGE_EXIT)
        }
        Err(Failure::Model(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
