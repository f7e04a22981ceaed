//! Batch front-end: parse scenario files, run simulations and fits, emit
//! plot-ready CSV/JSON with a hashed manifest per run.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use grasp_statics_cli::commands;
use grasp_statics_cli::doc::{self, Resolved};
use grasp_statics_cli::error::CliError;
use grasp_statics_cli::outputs::RunWriter;

#[derive(Parser)]
#[command(
    name = "grasp-statics",
    version,
    about = "Quasi-static simulation and analysis of underactuated tendon-driven fingers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Scenario (or fit config) file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory for artifacts and the manifest.
    #[arg(long)]
    out: PathBuf,
    /// Override document fields: `--set object.width=70`. Comma-separated
    /// values sweep the cross product of all overrides.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Seed for synthetic data generation.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Parallel workers for sweep expansion.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Close a grasp (or a free finger) along its excursion schedule and
    /// write the force–excursion curve or trajectory.
    Simulate(RunArgs),
    /// Sample in-plane compliance ellipses along the distal link.
    ComplianceField(RunArgs),
    /// Angle between fingertip motion and the principal compliance
    /// direction along a free closing trajectory.
    Alignment(RunArgs),
    /// Fit a symmetric stiffness matrix to cyclic displacement–force data.
    Fit(RunArgs),
    /// Probe the elastic energy well of a pinch grasp.
    Well(RunArgs),
    /// Run the built-in reproduction suite into the output directory.
    Repro {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.kind.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate(args) => run_scenario_command("simulate", &args),
        Command::ComplianceField(args) => run_scenario_command("compliance-field", &args),
        Command::Alignment(args) => run_scenario_command("alignment", &args),
        Command::Well(args) => run_scenario_command("well", &args),
        Command::Fit(args) => run_fit_command(&args),
        Command::Repro { out, seed } => {
            let mut writer = RunWriter::create(&out)?;
            let summary = commands::run_repro(seed, &mut writer)?;
            writer.finish("repro", seed)?;
            println!("repro: {summary}");
            println!("manifest: {}", out.join("manifest.json").display());
            Ok(())
        }
    }
}

/// Splits `--set` overrides into (key, alternatives) pairs; commas sweep.
fn parse_overrides(set: &[String]) -> Result<Vec<(String, Vec<String>)>, CliError> {
    set.iter()
        .map(|kv| {
            let (key, value) = kv.split_once('=').ok_or_else(|| {
                CliError::validation(format!("override {kv:?}: expected KEY=VALUE"))
            })?;
            let alternatives: Vec<String> =
                value.split(',').map(|s| s.trim().to_string()).collect();
            if alternatives.is_empty() || alternatives.iter().any(String::is_empty) {
                return Err(CliError::validation(format!(
                    "override {kv:?}: empty value"
                )));
            }
            Ok((key.trim().to_string(), alternatives))
        })
        .collect()
}

/// Expands the cross product of all override alternatives.
fn expand_combos(overrides: &[(String, Vec<String>)]) -> Vec<Vec<(String, String)>> {
    let mut combos: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for (key, alternatives) in overrides {
        let mut next = Vec::with_capacity(combos.len() * alternatives.len());
        for combo in &combos {
            for alt in alternatives {
                let mut extended = combo.clone();
                extended.push((key.clone(), alt.clone()));
                next.push(extended);
            }
        }
        combos = next;
    }
    combos
}

fn load_document(path: &Path) -> Result<serde_json::Value, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::parse(format!("invalid JSON: {e}")))
}

fn run_scenario_command(verb: &'static str, args: &RunArgs) -> Result<(), CliError> {
    let base = load_document(&args.scenario)?;
    let overrides = parse_overrides(&args.set)?;
    let combos = expand_combos(&overrides);
    let sweep = combos.len() > 1;

    let run_one = |combo: &[(String, String)], dir: &Path| -> Result<(), CliError> {
        let mut value = base.clone();
        for (key, raw) in combo {
            doc::apply_override(&mut value, key, raw)?;
        }
        let resolved = doc::resolve_value(value)?;
        let mut writer = RunWriter::create(dir)?;
        let summary = match verb {
            "simulate" => commands::run_simulate(&resolved, &mut writer)?,
            "compliance-field" => commands::run_compliance_field(&resolved, &mut writer)?,
            "alignment" => commands::run_alignment(&resolved, &mut writer)?,
            "well" => {
                let excursion = analysis_excursion(&resolved);
                let cap = probe_cap(&resolved);
                commands::run_well(&resolved, excursion, cap, &mut writer)?
            }
            _ => unreachable!(),
        };
        writer.finish(verb, args.seed)?;
        println!("{}: {summary}", dir.display());
        Ok(())
    };

    if !sweep {
        return run_one(&combos[0], &args.out);
    }

    // Sweep: one subdirectory per combination, executed by a worker pool.
    let jobs = args.jobs.max(1);
    let errors = std::sync::Mutex::new(Vec::<CliError>::new());
    let next = std::sync::atomic::AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(combos.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= combos.len() {
                    break;
                }
                let dir = args.out.join(format!("run-{i:03}"));
                if let Err(e) = run_one(&combos[i], &dir) {
                    errors.lock().unwrap().push(e);
                }
            });
        }
    });
    let errors = errors.into_inner().unwrap();
    if let Some(first) = errors.into_iter().next() {
        return Err(first);
    }
    // Top-level manifest indexes the runs.
    let runs: Vec<serde_json::Value> = combos
        .iter()
        .enumerate()
        .map(|(i, combo)| {
            let assignment: Vec<String> =
                combo.iter().map(|(k, v)| format!("{k}={v}")).collect();
            serde_json::json!({ "dir": format!("run-{i:03}"), "overrides": assignment })
        })
        .collect();
    let sweep_manifest = serde_json::json!({ "command": verb, "runs": runs });
    std::fs::write(
        args.out.join("manifest.json"),
        format!("{}\n", serde_json::to_string_pretty(&sweep_manifest).unwrap()),
    )?;
    Ok(())
}

fn analysis_excursion(resolved: &Resolved) -> Option<f64> {
    match resolved {
        Resolved::Grasp(_, doc) => doc.analysis_excursion,
        Resolved::FreeFinger(_) => None,
    }
}

fn probe_cap(resolved: &Resolved) -> f64 {
    match resolved {
        Resolved::Grasp(_, doc) => doc.probe.clone().unwrap_or_default().displacement_cap,
        Resolved::FreeFinger(_) => 8.0,
    }
}

fn run_fit_command(args: &RunArgs) -> Result<(), CliError> {
    if !args.set.is_empty() {
        return Err(CliError::validation(
            "fit does not take --set overrides; edit the config file",
        ));
    }
    let text = std::fs::read_to_string(&args.scenario)
        .map_err(|e| CliError::io(format!("cannot read {}: {e}", args.scenario.display())))?;
    let fit_doc = doc::parse_fit_doc(&text)?;
    let config_dir = args
        .scenario
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let mut writer = RunWriter::create(&args.out)?;
    let summary = commands::run_fit(&fit_doc, &config_dir, args.seed, &mut writer)?;
    writer.finish("fit", args.seed)?;
    println!("{}: {summary}", args.out.display());
    Ok(())
}
