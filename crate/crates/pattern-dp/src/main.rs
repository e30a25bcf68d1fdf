use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pattern_dp::adaptive::{optimize, OptimizerConfig, TraceRecord};
use pattern_dp::datasets::{
    area_queries, assign_areas, ingest_tdrive_dir, load_dataset, save_dataset, synthesize,
    visited_cells, GridSpec, SynthConfig, AREAS_FILE, EVENTS_FILE, QUERIES_FILE,
};
use pattern_dp::error::{Error, Result};
use pattern_dp::eval::{run_experiment, write_reports_csv, ExperimentPlan};
use pattern_dp::manifest::{fingerprint_files, RunManifest};
use pattern_dp::ppm::{composed_epsilon, uniform_allocate, BudgetAllocation};

#[derive(Parser)]
#[command(name = "pattern-dp", version, about = "Pattern-level differential privacy toolkit")]
struct Cli {
    /// Cap on worker threads; results do not depend on it.
    #[arg(long, global = true, env = "PATTERN_DP_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

fn non_negative_f64(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("must be a finite non-negative number, got {s}"))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset and its queries.
    Synth {
        #[arg(long)]
        seed: u64,
        /// Output dataset directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        windows: usize,
        #[arg(long, default_value_t = 20)]
        kinds: usize,
    },
    /// Ingest taxi trace files onto a metric grid and assign areas.
    Ingest {
        /// Directory of trace files (id,datetime,longitude,latitude lines).
        #[arg(long)]
        tdrive_dir: PathBuf,
        /// Grid cell size in meters.
        #[arg(long, default_value_t = 623.0)]
        cell_size: f64,
        #[arg(long)]
        seed: u64,
        /// Output dataset directory.
        #[arg(long)]
        out: PathBuf,
        /// Query window length in seconds.
        #[arg(long, default_value_t = 3540)]
        window: i64,
        #[arg(long)]
        lon_min: Option<f64>,
        #[arg(long)]
        lon_max: Option<f64>,
        #[arg(long)]
        lat_min: Option<f64>,
        #[arg(long)]
        lat_max: Option<f64>,
    },
    /// Compute a budget allocation for one private pattern.
    Allocate {
        /// Dataset directory.
        #[arg(long)]
        dataset: PathBuf,
        /// Id of the private pattern query.
        #[arg(long)]
        private_query: String,
        /// Total pattern-level budget.
        #[arg(long, value_parser = non_negative_f64)]
        eps: f64,
        #[arg(long, value_enum)]
        mode: AllocMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Monte-Carlo trials per quality evaluation (adaptive mode).
        #[arg(long, default_value_t = 200)]
        trials: u64,
        #[arg(long, default_value_t = 40)]
        max_iters: u64,
        /// Write the allocation JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment plan and write the results CSV.
    Run {
        /// Plan file (JSON). A relative dataset path inside the plan is
        /// resolved against the plan's directory.
        #[arg(long)]
        plan: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AllocMode {
    Uniform,
    Adaptive,
}

#[derive(serde::Serialize)]
struct AllocateOutput<'a> {
    query_id: &'a str,
    mode: &'a str,
    requested_eps: f64,
    composed_epsilon: f64,
    allocation: &'a BudgetAllocation,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace: Option<&'a [TraceRecord]>,
}

fn dataset_fingerprint(dir: &Path) -> Result<String> {
    fingerprint_files(&[dir.join(EVENTS_FILE), dir.join(QUERIES_FILE)])
}

fn cmd_synth(seed: u64, out: &Path, windows: usize, kinds: usize) -> Result<()> {
    let cfg = SynthConfig {
        seed,
        n_windows: windows,
        n_event_kinds: kinds,
        window_ticks: (kinds as i64).max(20),
        ..SynthConfig::default()
    };
    let ds = synthesize(&cfg)?;
    save_dataset(out, &ds.stream, &ds.queries)?;
    let manifest = RunManifest::new("synth")
        .arg("seed", seed)
        .arg("windows", windows)
        .arg("kinds", kinds)
        .output(out.join(EVENTS_FILE))
        .output(out.join(QUERIES_FILE));
    let mut manifest = manifest;
    manifest.output_fingerprint = Some(dataset_fingerprint(out)?);
    manifest.write(out.join("manifest.json"))?;
    println!(
        "wrote {} events and {} queries to {}",
        ds.stream.len(),
        ds.queries.len(),
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_ingest(
    tdrive_dir: &Path,
    cell_size: f64,
    seed: u64,
    out: &Path,
    window: i64,
    bbox: (Option<f64>, Option<f64>, Option<f64>, Option<f64>),
) -> Result<()> {
    let mut grid = GridSpec {
        cell_size_m: cell_size,
        seed,
        ..GridSpec::default()
    };
    if let Some(v) = bbox.0 {
        grid.lon_min = v;
    }
    if let Some(v) = bbox.1 {
        grid.lon_max = v;
    }
    if let Some(v) = bbox.2 {
        grid.lat_min = v;
    }
    if let Some(v) = bbox.3 {
        grid.lat_max = v;
    }
    let (stream, stats) = ingest_tdrive_dir(tdrive_dir, &grid)?;
    let mut input_files = Vec::new();
    for (path, s) in &stats {
        if s.malformed > 0 {
            eprintln!(
                "{}: {} parsed, {} malformed, {} out of bounds",
                path.display(),
                s.parsed,
                s.malformed,
                s.out_of_bounds
            );
        }
        input_files.push(path.clone());
    }
    let cells = visited_cells(&stream);
    let areas = assign_areas(&cells, &grid)?;
    let queries = area_queries(&areas, window);
    save_dataset(out, &stream, &queries)?;
    let areas_path = out.join(AREAS_FILE);
    let mut areas_text = serde_json::to_string_pretty(&areas)?;
    areas_text.push('\n');
    std::fs::write(&areas_path, areas_text).map_err(|e| Error::io(&areas_path, e))?;
    let mut manifest = RunManifest::new("ingest")
        .arg("seed", seed)
        .arg("cell_size", cell_size)
        .arg("window", window)
        .arg("tdrive_dir", tdrive_dir.display())
        .arg("cells", cells.len())
        .output(out.join(EVENTS_FILE))
        .output(out.join(QUERIES_FILE))
        .output(&areas_path);
    manifest.input_fingerprint = Some(fingerprint_files(&input_files)?);
    manifest.output_fingerprint = Some(dataset_fingerprint(out)?);
    manifest.write(out.join("manifest.json"))?;
    println!(
        "ingested {} fixes over {} cells ({} private, {} target) into {}",
        stream.len(),
        cells.len(),
        areas.private.len(),
        areas.target.len(),
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_allocate(
    dataset: &Path,
    private_query: &str,
    eps: f64,
    mode: AllocMode,
    seed: u64,
    trials: u64,
    max_iters: u64,
    out: Option<&Path>,
) -> Result<()> {
    let (stream, queries) = load_dataset(dataset)?;
    let query = queries
        .iter()
        .find(|q| q.id == private_query)
        .ok_or_else(|| Error::UnknownQuery(private_query.to_string()))?;
    let (allocation, trace) = match mode {
        AllocMode::Uniform => (uniform_allocate(query.id.clone(), eps, query.len())?, None),
        AllocMode::Adaptive => {
            let cfg = OptimizerConfig {
                trials,
                max_iters,
                seed,
                ..OptimizerConfig::default()
            };
            let outcome = optimize(&stream, &queries, private_query, eps, &cfg)?;
            (outcome.allocation, Some(outcome.trace))
        }
    };
    let output = AllocateOutput {
        query_id: private_query,
        mode: match mode {
            AllocMode::Uniform => "uniform",
            AllocMode::Adaptive => "adaptive",
        },
        requested_eps: eps,
        composed_epsilon: composed_epsilon(&allocation),
        allocation: &allocation,
        trace: trace.as_deref(),
    };
    let mut text = serde_json::to_string_pretty(&output)?;
    text.push('\n');
    match out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
            let mut manifest = RunManifest::new("allocate")
                .arg("dataset", dataset.display())
                .arg("private_query", private_query)
                .arg("eps", eps)
                .arg("mode", output.mode)
                .arg("seed", seed)
                .arg("trials", trials)
                .output(path);
            manifest.input_fingerprint = Some(dataset_fingerprint(dataset)?);
            manifest.write(manifest_path(path))?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn cmd_run(plan_path: &Path, out: &Path) -> Result<i32> {
    let text = std::fs::read_to_string(plan_path).map_err(|e| Error::io(plan_path, e))?;
    let mut plan: ExperimentPlan =
        serde_json::from_str(&text).map_err(|e| Error::InvalidPlan(e.to_string()))?;
    plan.validate()?;
    if plan.dataset.is_relative() {
        if let Some(parent) = plan_path.parent() {
            plan.dataset = parent.join(&plan.dataset);
        }
    }
    let (stream, queries) = load_dataset(&plan.dataset)?;
    let outcome = run_experiment(&stream, &queries, &plan)?;
    let file = std::fs::File::create(out).map_err(|e| Error::io(out, e))?;
    write_reports_csv(&outcome.rows, std::io::BufWriter::new(file))?;
    let mut manifest = RunManifest::new("run")
        .arg("plan", plan_path.display())
        .arg("seed", plan.seed)
        .arg("trials", plan.trials)
        .arg("rows", outcome.rows.len())
        .arg("failed_cells", outcome.failures.len())
        .output(out);
    manifest.input_fingerprint = Some(dataset_fingerprint(&plan.dataset)?);
    manifest.output_fingerprint = Some(fingerprint_files(&[out.to_path_buf()])?);
    manifest.write(manifest_path(out))?;
    if outcome.failures.is_empty() {
        println!("wrote {} rows to {}", outcome.rows.len(), out.display());
        Ok(0)
    } else {
        for f in &outcome.failures {
            eprintln!("failed cell: {} eps={}: {}", f.mechanism, f.eps, f.error);
        }
        eprintln!(
            "{} rows written, {} cells failed",
            outcome.rows.len(),
            outcome.failures.len()
        );
        Ok(1)
    }
}

fn real_main(cli: Cli) -> Result<i32> {
    if let Some(jobs) = cli.jobs {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global();
    }
    match cli.command {
        Command::Synth {
            seed,
            out,
            windows,
            kinds,
        } => {
            cmd_synth(seed, &out, windows, kinds)?;
            Ok(0)
        }
        Command::Ingest {
            tdrive_dir,
            cell_size,
            seed,
            out,
            window,
            lon_min,
            lon_max,
            lat_min,
            lat_max,
        } => {
            cmd_ingest(
                &tdrive_dir,
                cell_size,
                seed,
                &out,
                window,
                (lon_min, lon_max, lat_min, lat_max),
            )?;
            Ok(0)
        }
        Command::Allocate {
            dataset,
            private_query,
            eps,
            mode,
            seed,
            trials,
            max_iters,
            out,
        } => {
            cmd_allocate(
                &dataset,
                &private_query,
                eps,
                mode,
                seed,
                trials,
                max_iters,
                out.as_deref(),
            )?;
            Ok(0)
        }
        Command::Run { plan, out } => cmd_run(&plan, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
