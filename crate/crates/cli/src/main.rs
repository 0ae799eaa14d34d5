use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;
use serde::de::DeserializeOwned;

use pupload::arrivals::HourlyProfile;
use pupload::calendar::Slot;
use pupload::engine::{ForecastConfig, ForecastRecord};
use pupload::estimation::SelectionModel;
use pupload::evaluate::{evaluate, EvalConfig, Method};
use pupload::io::{
    read_daily_volumes, read_event_log, read_load_series, write_daily_volumes, write_event_log,
    write_load_series,
};
use pupload::kernel::TransitionKernel;
use pupload::oracle::{closed_form, enumerate_contribution_prob, mc_contribution_prob, random_instances};
use pupload::parcel::EventLog;
use pupload::pipeline::{fit_models, forecast_at, FitConfig, FittedModels};
use pupload::sim::{child_seed, simulate, ScenarioConfig};
use pupload::{Error, Result};

#[derive(Parser)]
#[command(name = "pupload", version, about = "Pick-up point load forecasting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit kernels, hourly profile, daily volumes and selection shares from an event log.
    Fit {
        #[arg(long)]
        log: PathBuf,
        /// Fit configuration (JSON).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Only use events visible at this slot.
        #[arg(long)]
        k: Option<Slot>,
        /// Output directory.
        #[arg(long, default_value = "models")]
        out: PathBuf,
    },
    /// Forecast the load pmf at `k + j` for every horizon.
    Forecast {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory written by `fit`; models are refitted at `k` when absent.
        #[arg(long)]
        models: Option<PathBuf>,
        #[arg(long)]
        k: Slot,
        #[arg(long, value_delimiter = ',', default_value = "13,37,61,85")]
        horizons: Vec<Slot>,
        /// Poisson coverage used when truncating future-order mixtures.
        #[arg(long, default_value_t = 0.99)]
        coverage: f64,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate a synthetic pick-up point and write its event log and true load.
    Simulate {
        /// Scenario (JSON); the default synthetic scenario when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 182)]
        days: u32,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "trace")]
        out: PathBuf,
    },
    /// Rolling-origin evaluation at every midnight anchor.
    Evaluate {
        #[arg(long)]
        log: PathBuf,
        /// True load series (`k,L`).
        #[arg(long)]
        load: PathBuf,
        /// Evaluation configuration (JSON).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        horizons: Option<Vec<Slot>>,
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<Method>>,
        /// Accepted for symmetry with `simulate`; evaluation draws no random numbers.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "report.csv")]
        out: PathBuf,
        /// Also write every scored forecast here.
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Check closed forms against path enumeration and Monte Carlo on random instances.
    OracleCheck {
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long, default_value_t = 6)]
        max_support: usize,
        /// Instances also checked by Monte Carlo.
        #[arg(long, default_value_t = 0)]
        mc: usize,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

fn read_json_or_default<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    path.map_or_else(|| Ok(T::default()), read_json)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn load_log(path: &Path, fit: &FitConfig) -> Result<EventLog> {
    let log = read_event_log(BufReader::new(File::open(path)?), &fit.calendar()?)?;
    info!("read {} parcels from {}", log.len(), path.display());
    Ok(log)
}

fn load_models(dir: &Path) -> Result<FittedModels> {
    let kernel = TransitionKernel::from_json(&fs::read_to_string(dir.join("kernel.json"))?)?;
    let profile: HourlyProfile = read_json(&dir.join("profile.json"))?;
    profile.validate()?;
    let volumes = read_daily_volumes(BufReader::new(File::open(dir.join("volumes.csv"))?))?;
    let selection: SelectionModel = read_json(&dir.join("selection.json"))?;
    Ok(FittedModels {
        kernel,
        profile,
        volumes,
        selection,
    })
}

fn cmd_fit(log: &Path, config: Option<&Path>, k: Option<Slot>, out: &Path) -> Result<()> {
    let cfg: FitConfig = read_json_or_default(config)?;
    let mut log = load_log(log, &cfg)?;
    if let Some(k) = k {
        log = log.visible_at(k);
    }
    let models = fit_models(&log, &cfg)?;
    fs::create_dir_all(out)?;
    fs::write(out.join("kernel.json"), models.kernel.to_json()?)?;
    write_json(&out.join("profile.json"), &models.profile)?;
    write_daily_volumes(BufWriter::new(File::create(out.join("volumes.csv"))?), &models.volumes)?;
    write_json(&out.join("selection.json"), &models.selection)?;

    let stdout = io::stdout();
    let mut o = stdout.lock();
    writeln!(o, "parcels\t{}", log.for_pup(&cfg.pup).len())?;
    writeln!(o, "cutoff\t{}", log.cutoff())?;
    for (s, sk) in models.kernel.statuses() {
        writeln!(o, "status {s}\tkeys {}", sk.entries().len())?;
    }
    writeln!(o, "volume days\t{}", models.volumes.days())?;
    writeln!(o, "carriers\t{}", models.profile.carriers().count())?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_forecast(
    log: &Path,
    config: Option<&Path>,
    models: Option<&Path>,
    k: Slot,
    horizons: &[Slot],
    coverage: f64,
    out: Option<&Path>,
) -> Result<()> {
    if horizons.is_empty() || horizons.iter().any(|&j| j < 1) {
        return Err(Error::InvalidQuery("horizons must be positive".into()));
    }
    let fit: FitConfig = read_json_or_default(config)?;
    let log = load_log(log, &fit)?;
    let models = match models {
        Some(dir) => load_models(dir)?,
        None => fit_models(&log.visible_at(k), &fit)?,
    };
    let cfg = ForecastConfig {
        coverage,
        pup: Some(fit.pup.clone()),
    };
    let records: Vec<ForecastRecord> =
        forecast_at(&models, &log, k, horizons, &fit.volume_forecaster, &cfg)?
            .into_iter()
            .zip(horizons)
            .map(|(f, &j)| ForecastRecord::new(fit.pup.clone(), k, j, f))
            .collect::<Result<_>>()?;
    for r in &records {
        info!("k={} j={} mean={:.3} [{}, {}]", r.k, r.j, r.mean, r.q05, r.q95);
        for d in &r.diagnostics {
            log::warn!("k={} j={}: {d}", r.k, r.j);
        }
    }
    match out {
        Some(path) => write_json(path, &records),
        None => {
            let stdout = io::stdout();
            let mut o = stdout.lock();
            serde_json::to_writer_pretty(&mut o, &records)?;
            writeln!(o)?;
            Ok(())
        }
    }
}

fn cmd_simulate(config: Option<&Path>, days: u32, seed: Option<u64>, out: &Path) -> Result<()> {
    let mut scenario = match config {
        Some(path) => ScenarioConfig::from_json(&fs::read_to_string(path)?)?,
        None => ScenarioConfig::default_synthetic(days, seed.unwrap_or(1))?,
    };
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    scenario.validate()?;
    let trace = simulate(&scenario)?;
    fs::create_dir_all(out)?;
    write_event_log(
        BufWriter::new(File::create(out.join("events.csv"))?),
        &trace.events,
        scenario.calendar(),
    )?;
    write_load_series(BufWriter::new(File::create(out.join("load_true.csv"))?), &trace.load)?;
    fs::write(out.join("scenario.json"), scenario.to_json()?)?;
    println!(
        "simulated {} parcels over {} slots into {}",
        trace.events.len(),
        trace.load.len(),
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_evaluate(
    log: &Path,
    load: &Path,
    config: Option<&Path>,
    horizons: Option<Vec<Slot>>,
    methods: Option<Vec<Method>>,
    out: &Path,
    predictions: Option<&Path>,
) -> Result<()> {
    let mut cfg: EvalConfig = read_json_or_default(config)?;
    if let Some(h) = horizons {
        cfg.horizons = h;
    }
    if let Some(m) = methods {
        cfg.methods = m;
    }
    if cfg.horizons.is_empty() || cfg.horizons.iter().any(|&j| j < 1) {
        return Err(Error::InvalidQuery("horizons must be positive".into()));
    }
    if cfg.methods.is_empty() {
        return Err(Error::InvalidQuery("no methods selected".into()));
    }
    let events = load_log(log, &cfg.fit)?;
    let truth = read_load_series(BufReader::new(File::open(load)?))?;
    let report = evaluate(&events, &truth, &cfg)?;
    info!("scored {} anchors", report.anchors.len());
    report.write_csv(BufWriter::new(File::create(out)?))?;
    if let Some(path) = predictions {
        report.write_predictions_csv(BufWriter::new(File::create(path)?))?;
    }
    let stdout = io::stdout();
    let mut o = stdout.lock();
    writeln!(o, "{:<16}{:>5}{:>6}{:>10}{:>10}", "method", "j", "n", "MAE", "MAPE%")?;
    for r in &report.rows {
        writeln!(
            o,
            "{:<16}{:>5}{:>6}{:>10.3}{:>10.2}",
            r.method.name(),
            r.j,
            r.n,
            r.mae,
            r.mape
        )?;
    }
    Ok(())
}

#[derive(serde::Serialize)]
struct OracleSummary {
    instances: usize,
    max_abs_error: f64,
    mc_checked: usize,
    mc_bracketed: usize,
}

fn cmd_oracle_check(
    count: usize,
    max_support: usize,
    mc: usize,
    samples: u64,
    seed: u64,
    out: Option<&Path>,
) -> Result<bool> {
    let instances = random_instances(count, max_support, seed);
    let mut max_err = 0.0f64;
    for inst in &instances {
        let exact = enumerate_contribution_prob(&inst.kernels, inst.evidence, inst.k, inst.j)?;
        let closed = closed_form(&inst.kernels, inst.evidence, inst.k, inst.j)?;
        max_err = max_err.max((exact - closed).abs());
    }
    let mut bracketed = 0;
    for (i, inst) in instances.iter().take(mc).enumerate() {
        let closed = closed_form(&inst.kernels, inst.evidence, inst.k, inst.j)?;
        let est = mc_contribution_prob(
            &inst.kernels,
            inst.evidence,
            inst.k,
            inst.j,
            samples,
            child_seed(seed, i as u64),
        )?;
        if est.brackets(closed, 3.0) {
            bracketed += 1;
        }
    }
    let summary = OracleSummary {
        instances: instances.len(),
        max_abs_error: max_err,
        mc_checked: mc.min(instances.len()),
        mc_bracketed: bracketed,
    };
    println!(
        "{} instances, max |closed - enumerated| = {:.3e}",
        summary.instances, summary.max_abs_error
    );
    if summary.mc_checked > 0 {
        println!(
            "Monte Carlo within 3 standard errors: {}/{}",
            summary.mc_bracketed, summary.mc_checked
        );
    }
    if let Some(path) = out {
        write_json(path, &summary)?;
    }
    Ok(max_err <= 1e-12)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Fit { log, config, k, out } => cmd_fit(&log, config.as_deref(), k, &out)?,
        Command::Forecast {
            log,
            config,
            models,
            k,
            horizons,
            coverage,
            out,
        } => cmd_forecast(
            &log,
            config.as_deref(),
            models.as_deref(),
            k,
            &horizons,
            coverage,
            out.as_deref(),
        )?,
        Command::Simulate {
            config,
            days,
            seed,
            out,
        } => cmd_simulate(config.as_deref(), days, seed, &out)?,
        Command::Evaluate {
            log,
            load,
            config,
            horizons,
            methods,
            seed: _,
            out,
            predictions,
        } => cmd_evaluate(
            &log,
            &load,
            config.as_deref(),
            horizons,
            methods,
            &out,
            predictions.as_deref(),
        )?,
        Command::OracleCheck {
            count,
            max_support,
            mc,
            samples,
            seed,
            out,
        } => return cmd_oracle_check(count, max_support, mc, samples, seed, out.as_deref()),
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
