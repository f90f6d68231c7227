//! Command-line front end.
//!
//! Exit codes: 0 ok, 1 usage or input error, 2 estimation failure,
//! 3 invariant violation.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use wholepage::dml::{estimate_dvwpx, PanelDataset, Stage2};
use wholepage::domain::{ContextFeatures, PageLayout, TemplateId};
use wholepage::harness::{daily_csv, render_table, report_from_json, report_to_json, run_experiment_with_bundles, ExperimentConfig};
use wholepage::ranker::{select_template, CandidateScore, RankerBundle};
use wholepage::rng::{stream, Purpose};
use wholepage::sim::{emit_panel, generate_world, simulate_randomized, SURROGATE_NAMES};
use wholepage::{Error, Result};

#[derive(Parser)]
#[command(name = "wholepage", version, about = "Whole-page template optimization lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (JSON). Missing fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory for inputs and outputs.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Comma-separated arm names to keep.
    #[arg(long, global = true, value_delimiter = ',')]
    arms: Option<Vec<String>>,

    #[arg(long, global = true)]
    days: Option<u32>,

    /// Second-stage estimator.
    #[arg(long, global = true)]
    stage2: Option<Stage2>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a world and write a randomized panel to `<out>/panel.csv`.
    Simulate,
    /// Fit the downstream-value model on `<out>/panel.csv`.
    Estimate,
    /// Pick a template for one request file.
    Rank {
        /// JSON with `bundle_path`, `context` and `candidates`.
        request: PathBuf,
    },
    /// Run the multi-arm experiment.
    Experiment,
    /// Re-render `<out>/report.json`.
    Report,
}

#[derive(Deserialize)]
struct RankRequest {
    bundle_path: PathBuf,
    context: ContextFeatures,
    candidates: Vec<PageLayout>,
    #[serde(default)]
    event_id: u64,
}

#[derive(Serialize)]
struct RankResponse {
    template_id: TemplateId,
    chosen: usize,
    trace: Vec<CandidateScore>,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config: ExperimentConfig = match &cli.config {
        Some(path) => serde_json::from_str(&read(path)?)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(days) = cli.days {
        config.days = days;
    }
    if let Some(arms) = &cli.arms {
        config.select_arms(arms)?;
    }
    if let Some(stage2) = cli.stage2 {
        config.dml.stage2 = stage2;
    }
    config.validate()?;
    Ok(config)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

fn simulate(cli: &Cli) -> Result<()> {
    let config = load_config(cli)?;
    let mut world_config = config.world.clone();
    world_config.seed = config.seed;
    let world = generate_world(&world_config)?;
    let n = match cli.days {
        Some(days) => days as usize * config.sessions_per_day,
        None => config.weights_panel_events,
    };
    let events = simulate_randomized(&world, 0, n, 0)?;
    let panel = emit_panel(&world, &events)?;
    let mut csv = Vec::new();
    panel.write_csv(&mut csv)?;
    fs::create_dir_all(&cli.out)?;
    let path = cli.out.join("panel.csv");
    fs::write(&path, csv)?;
    write(&cli.out, "world_config.json", &serde_json::to_string_pretty(&world_config)?)?;
    println!("wrote {} rows to {}", panel.len(), path.display());
    Ok(())
}

fn estimate(cli: &Cli) -> Result<()> {
    let config = load_config(cli)?;
    let path = cli.out.join("panel.csv");
    let file = fs::File::open(&path).map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    let panel = PanelDataset::read_csv(file)?;
    let mut dml = config.dml.clone();
    dml.seed = config.seed;
    let model = estimate_dvwpx(&panel, &dml, config.horizon).map_err(|e| {
        if e.is_estimation_failure() {
            e
        } else {
            Error::Stage { stage: "estimate", source: Box::new(e) }
        }
    })?;
    let est = &model.estimate;
    println!("{:<16} {:>10} {:>10}", "surrogate", "beta", "stderr");
    for (name, (b, se)) in model.schema.surrogates.iter().zip(est.beta.iter().zip(&est.stderr_beta)) {
        println!("{name:<16} {b:>10.4} {se:>10.4}");
    }
    if model.schema.surrogates.iter().map(String::as_str).eq(SURROGATE_NAMES) {
        let w = model.derive_region_weights(SURROGATE_NAMES)?;
        println!("region weights: top {:.3}  middle {:.3}  bottom {:.3}", w.top, w.middle, w.bottom);
    }
    println!(
        "held-out rmse {:.4} (zero predictor {:.4})",
        est.diagnostics.test_rmse, est.diagnostics.test_rmse_null
    );
    let out = write(&cli.out, "model.json", &model.to_json()?)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn rank(cli: &Cli, request: &Path) -> Result<()> {
    let request: RankRequest = serde_json::from_str(&read(request)?)?;
    let bundle = RankerBundle::from_json(&read(&request.bundle_path)?)?;
    let mut rng = stream(cli.seed.unwrap_or(0), Purpose::Thompson(0), request.event_id);
    let selection = select_template(&request.context, &request.candidates, &bundle.snapshot()?, &mut rng)?;
    let response = RankResponse {
        template_id: selection.trace[selection.chosen].template_id,
        chosen: selection.chosen,
        trace: selection.trace,
    };
    println!("{}", serde_json::to_string_pretty(&response)?);
    Ok(())
}

fn experiment(cli: &Cli) -> Result<()> {
    let config = load_config(cli)?;
    let (report, bundles) = run_experiment_with_bundles(&config)?;
    print!("{}", render_table(&report));
    write(&cli.out, "report.json", &report_to_json(&report)?)?;
    write(&cli.out, "daily.csv", &daily_csv(&report)?)?;
    for (name, bundle) in &bundles {
        write(&cli.out, &format!("bundle_{name}.json"), &bundle.to_json()?)?;
    }
    println!("wrote report, daily metrics and {} bundles to {}", bundles.len(), cli.out.display());
    Ok(())
}

fn report(cli: &Cli) -> Result<()> {
    let report = report_from_json(&read(&cli.out.join("report.json"))?)?;
    print!("{}", render_table(&report));
    Ok(())
}

fn exit_code(error: &Error) -> u8 {
    match error {
        Error::Invariant(_) => 3,
        e if e.is_estimation_failure() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Simulate => simulate(&cli),
        Command::Estimate => estimate(&cli),
        Command::Rank { request } => rank(&cli, request),
        Command::Experiment => experiment(&cli),
        Command::Report => report(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
