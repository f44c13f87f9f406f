use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use fleetcharge::bundle::{read_bundle, write_bundle};
use fleetcharge::heuristic::{write_logs_jsonl, HeuristicConfig};
use fleetcharge::ingest::{
    build_instance, read_gps_csv, read_temperature_csv, synthesize_fleet, synthetic_temperatures, write_gps_csv,
    write_temperature_csv, FuelEconomyModel, IngestConfig, TraceProfile,
};
use fleetcharge::planner::{month_lengths, month_windows, plan_ds, plan_ips, verify_ips, PlanConfig, WindowSolve};
use fleetcharge::replay::{replay, PpRealization, ReplayOptions, Schedule};
use fleetcharge::report::{emit_report, write_soc_trajectories, write_violations, ReportFormat};
use fleetcharge::synth::{synthetic_instance, FleetProfile};
use fleetcharge::uncertainty::{compute_moments, observations_from_instance, sample_pp, UncertaintyMoments};
use fleetcharge::{build_model, CaseProfile, Installation, ModelConfig, PowerSource, SolveSettings};

#[derive(Parser)]
#[command(name = "fleetcharge", version, about = "Charger planning and opportunity-charging schedules for truck fleets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic data.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Turn GPS traces into an instance bundle.
    Ingest(IngestArgs),
    /// Per (truck, hour, zone) duration moments of a bundle.
    Moments {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Plan installations and schedules.
    Plan {
        #[arg(value_enum)]
        mode: PlanMode,
        #[command(flatten)]
        args: PlanArgs,
    },
    /// Replay a schedule against an installation.
    Simulate(SimulateArgs),
    /// Write the planning model in LP format.
    ExportLp {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value = "benchmark")]
        case: CaseProfile,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum SynthCommand {
    /// GPS traces plus an hourly temperature table.
    Gps {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        trucks: usize,
        #[arg(long, default_value_t = 7)]
        days: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Routine-based instance bundle.
    Instance {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        trucks: usize,
        #[arg(long, default_value_t = 5)]
        days: usize,
        #[arg(long, default_value_t = 3)]
        work_zones: usize,
        #[arg(long, default_value_t = 0.3)]
        double_shift_share: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    gps: PathBuf,
    /// Hourly temperatures (°F); 70 °F throughout without it.
    #[arg(long)]
    temperature: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    zones: usize,
    /// Comma-separated 0-based zone ranks treated as special.
    #[arg(long, value_delimiter = ',')]
    special: Vec<usize>,
    #[arg(long, default_value_t = 100.0)]
    cell_size: f64,
    #[arg(long, default_value_t = 100.0)]
    battery_kwh: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlanMode {
    Ds,
    Ips,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value = "benchmark")]
    case: CaseProfile,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, value_enum, default_value_t = Toggle::Off)]
    heuristic: Toggle,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    gap: f64,
    #[arg(long, default_value_t = 3600.0)]
    time_limit: f64,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// IPS month length in days; calendar months for a 365-day horizon otherwise.
    #[arg(long)]
    month_days: Option<usize>,
    #[arg(long, default_value_t = 3)]
    overlap: usize,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    installation: PathBuf,
    #[arg(long)]
    schedule: PathBuf,
    /// planning, sampled:<seed> or lower
    #[arg(long, default_value = "planning")]
    pp: String,
    /// Moments table for sampled/lower; computed from the instance otherwise.
    #[arg(long)]
    moments: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value = "benchmark")]
    case: CaseProfile,
    #[arg(long, default_value = "csv")]
    format: ReportFormat,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Synth(cmd) => synth(cmd),
        Command::Ingest(args) => ingest(args),
        Command::Moments { instance, out } => {
            let inst = read_bundle(&instance)?;
            compute_moments(observations_from_instance(&inst))?.write_csv(&out)?;
            Ok(())
        }
        Command::Plan { mode, args } => plan(mode, args),
        Command::Simulate(args) => simulate(args),
        Command::ExportLp {
            instance,
            case,
            sigma,
            gamma,
            out,
        } => {
            let inst = read_bundle(&instance)?;
            let config = ModelConfig::default().with_case(case);
            let moments = compute_moments(observations_from_instance(&inst))?
                .with_gamma(gamma, gamma)
                .with_multiplier(sigma);
            let source = if sigma > 0.0 { PowerSource::Robust(&moments) } else { PowerSource::Deterministic };
            build_model(&inst, source, &config)?.write_lp(&out)?;
            Ok(())
        }
    }
}

fn synth(cmd: SynthCommand) -> Result<()> {
    match cmd {
        SynthCommand::Gps { seed, trucks, days, out } => {
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let fleet = synthesize_fleet(seed, trucks, days, &TraceProfile::default())?;
            write_gps_csv(&fleet, &out.join("gps.csv"))?;
            write_temperature_csv(&synthetic_temperatures(days * 24, seed), &out.join("temperature.csv"))?;
            info!("{trucks} trucks over {days} days written to {}", out.display());
        }
        SynthCommand::Instance {
            seed,
            trucks,
            days,
            work_zones,
            double_shift_share,
            out,
        } => {
            let profile = FleetProfile {
                trucks,
                days,
                work_zones,
                double_shift_share,
                ..FleetProfile::default()
            };
            write_bundle(&synthetic_instance(&profile, seed)?, &out)?;
        }
    }
    Ok(())
}

fn ingest(args: IngestArgs) -> Result<()> {
    let fleet = read_gps_csv(&args.gps)?;
    let economy = match &args.temperature {
        Some(p) => FuelEconomyModel::with_temperatures(read_temperature_csv(p)?),
        None => FuelEconomyModel::with_temperatures(Vec::new()),
    };
    let config = IngestConfig {
        zones: args.zones,
        special_ranks: args.special,
        cell_size: args.cell_size,
        battery_kwh: args.battery_kwh,
        ..IngestConfig::default()
    };
    let out = build_instance(&fleet, &economy, &config)?;
    if out.ranking.short {
        log::warn!("only {} zones had stops", out.ranking.zones.len());
    }
    write_bundle(&out.instance, &args.out)?;
    let mut w = csv::Writer::from_path(args.out.join("zone_ranking.csv"))?;
    w.write_record(["rank", "cell_x", "cell_y", "stops", "stopped_minutes"])?;
    for (r, z) in out.ranking.zones.iter().enumerate() {
        w.write_record([
            r.to_string(),
            z.cell.0.to_string(),
            z.cell.1.to_string(),
            z.stops.to_string(),
            z.stopped_minutes.to_string(),
        ])?;
    }
    w.flush()?;
    info!("{} stops, {} zones", out.stops, out.ranking.zones.len());
    Ok(())
}

fn plan_config(args: &PlanArgs) -> Result<PlanConfig> {
    let settings = SolveSettings {
        rel_gap: args.gap,
        time_limit: args.time_limit,
        threads: args.threads,
        seed: args.seed,
        warm_start: None,
    };
    settings.validate()?;
    if args.heuristic == Toggle::On && args.sigma <= 0.0 {
        bail!("--heuristic on needs --sigma > 0");
    }
    Ok(PlanConfig {
        case: args.case,
        sigma_multiplier: args.sigma,
        gamma: [args.gamma, args.gamma],
        heuristic: (args.heuristic == Toggle::On).then(|| HeuristicConfig {
            sample_seed: args.seed,
            ..HeuristicConfig::default()
        }),
        settings,
        hcv_seed: args.seed,
        ..PlanConfig::default()
    })
}

fn write_solve(out: &Path, solve: &WindowSolve) -> Result<()> {
    let s = &solve.solution;
    let record = serde_json::json!({
        "status": s.status.as_str(),
        "objective": s.objective,
        "gap": s.gap,
        "wall_time": s.wall_time,
        "backend": s.backend,
        "installation_cost": s.breakdown.installation,
        "low_soc_penalty": s.breakdown.low_soc_penalty,
        "charging_penalty": s.breakdown.charging_penalty,
        "degraded": solve.degraded,
    });
    fs::write(out.join("solve.json"), serde_json::to_string_pretty(&record)?)?;
    if !solve.logs.is_empty() {
        write_logs_jsonl(&solve.logs, fs::File::create(out.join("iterations.jsonl"))?)?;
    }
    Ok(())
}

fn plan(mode: PlanMode, args: PlanArgs) -> Result<()> {
    let config = plan_config(&args)?;
    let year = read_bundle(&args.instance)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    match mode {
        PlanMode::Ds => {
            let ds = plan_ds(&year, &config)?;
            ds.hcv.write_csv(&args.out.join("hcv.csv"))?;
            ds.result.installation.write_csv(&args.out.join("installation.csv"))?;
            let days: Vec<String> = ds.days.iter().map(ToString::to_string).collect();
            fs::write(args.out.join("days.txt"), days.join("\n") + "\n")?;
            write_bundle(&ds.instance, &args.out.join("plan_instance"))?;
            Schedule::from_solution(&ds.result.solution).write_csv(&ds.instance, &args.out.join("schedule.csv"))?;
            write_solve(&args.out, &ds.result)?;
            info!(
                "{} days, {} HCVs, installation cost {}",
                ds.days.len(),
                ds.hcv.hcv.len(),
                ds.result.installation.cost(&ds.instance.chargers)
            );
        }
        PlanMode::Ips => {
            let lengths = month_lengths(year.grid.days, args.month_days);
            let windows = month_windows(&lengths, args.overlap);
            let ips = plan_ips(&year, &windows, &config)?;
            ips.hcv.write_csv(&args.out.join("hcv.csv"))?;
            ips.final_installation.write_csv(&args.out.join("installation.csv"))?;
            ips.write_trajectory(&args.out.join("trajectory.csv"))?;
            write_bundle(&ips.instance, &args.out.join("plan_instance"))?;
            let mut w = csv::Writer::from_path(args.out.join("months.csv"))?;
            w.write_record(["month", "mode", "objective", "penalty", "wall_time"])?;
            for m in &ips.months {
                w.write_record([
                    m.window.month.to_string(),
                    m.mode.as_str().to_string(),
                    m.objective.to_string(),
                    m.penalty.to_string(),
                    m.wall_time.to_string(),
                ])?;
            }
            w.flush()?;
            let checks = verify_ips(&ips, &config)?;
            let mut w = csv::Writer::from_path(args.out.join("verification.csv"))?;
            w.write_record(["month", "feasible", "violations"])?;
            for (month, r) in &checks {
                let (ok, n) = r.as_ref().map_or((false, 0), |r| (r.feasible, r.violations.len()));
                w.write_record([month.to_string(), ok.to_string(), n.to_string()])?;
            }
            w.flush()?;
            info!(
                "{} months, {} HCVs, final installation cost {}",
                ips.months.len(),
                ips.hcv.hcv.len(),
                ips.final_installation.cost(&ips.instance.chargers)
            );
        }
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let inst = read_bundle(&args.instance)?;
    let installation = Installation::read_csv(&args.installation, inst.zones.len())?;
    let schedule = Schedule::read_csv(&inst, &args.schedule)?;
    let moments = || -> Result<UncertaintyMoments> {
        let m = match &args.moments {
            Some(p) => UncertaintyMoments::read_csv(p)?,
            None => compute_moments(observations_from_instance(&inst))?,
        };
        Ok(m.with_gamma(args.gamma, args.gamma).with_multiplier(args.sigma))
    };
    let opts = ReplayOptions {
        anxiety: args.case != CaseProfile::NoAnxiety,
    };
    let result = match args.pp.as_str() {
        "planning" => replay(&inst, &installation, &schedule, PpRealization::Planning, opts)?,
        "lower" => {
            let m = moments()?;
            replay(&inst, &installation, &schedule, PpRealization::Lower(&m), opts)?
        }
        other => {
            let Some(seed) = other.strip_prefix("sampled:") else {
                bail!("--pp must be planning, lower or sampled:<seed>");
            };
            let seed: u64 = seed.parse().with_context(|| format!("bad seed in `{other}`"))?;
            let m = moments()?;
            let sample = sample_pp(&m, &inst, seed);
            replay(&inst, &installation, &schedule, PpRealization::Sampled(&sample), opts)?
        }
    };
    emit_report(&result.metrics, args.format, &args.out)?;
    write_violations(&result.violations, &args.out.join("violations.csv"))?;
    write_soc_trajectories(&inst, &result.metrics, &result.soc, &args.out.join("soc_trajectories.csv"))?;
    if result.feasible {
        info!("schedule replays feasibly");
    } else {
        log::warn!("{} violations", result.violations.len());
    }
    Ok(())
}
