use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use qgst::bench::{baseline_fit, bootstrap, ptm_distance_heatmap, FitReport};
use qgst::config::Config;
use qgst::experiment::{default_design, load_dataset, save_dataset, simulate_counts};
use qgst::models::Model;
use qgst::ptm::{ideal_gate_ptm, noisy_gate_ptm};
use qgst::training::{estimate, train, transfer_learn};
use qgst::{Circuit, ErrorParams, GateLabel};

/// Gate set tomography with transformer estimators.
#[derive(Parser)]
#[command(name = "qgst", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML config with experiment/model/training/report sections.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the experiment design's circuit list.
    Gen {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n_qubits: Option<usize>,
        #[arg(long)]
        max_length: Option<usize>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample counts for the design under the planted parameters.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n_qubits: Option<usize>,
        #[arg(long)]
        max_length: Option<usize>,
        #[arg(long)]
        shots: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on a dataset and write a checkpoint plus its training log.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// Checkpoint manifest path; parameters go to `<out>.bin`.
        #[arg(long)]
        out: PathBuf,
        /// Training log CSV; defaults to `<out>.log.csv`.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Train on the whole dataset as a single part for the summed epochs.
        #[arg(long)]
        no_curriculum: bool,
        /// Start from this checkpoint instead of a fresh model.
        #[arg(long)]
        init: Option<PathBuf>,
        /// Comma-separated epochs per curriculum part, e.g. `30,30,60`.
        #[arg(long, value_delimiter = ',')]
        epochs: Option<Vec<usize>>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit the error parameters directly and write a report.
    FitBaseline {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Number of bootstrap resamples for confidence intervals; 0 disables.
        #[arg(long)]
        bootstrap: Option<usize>,
    },
    /// Evaluate a checkpoint: report JSON plus PTM distance heatmaps.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Directory for `report.json` and `heatmap_*.csv`.
        #[arg(long)]
        out_dir: PathBuf,
        /// Checkpoint of a run without curriculum, added as a metrics row.
        #[arg(long)]
        compare: Option<PathBuf>,
    },
}

fn load_config(common: &Common) -> Result<Config> {
    match &common.config {
        Some(p) => Ok(Config::load(p)?),
        None => Ok(Config::default()),
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn label_file_name(label: &GateLabel) -> String {
    label.to_string().replace(['@', ','], "_")
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { common, n_qubits, max_length, out } => {
            let mut cfg = load_config(&common)?;
            cfg.experiment.n_qubits = n_qubits.or(cfg.experiment.n_qubits);
            cfg.experiment.max_length = max_length.or(cfg.experiment.max_length);
            let design = default_design(cfg.n_qubits(), cfg.max_length())?;
            match out {
                Some(p) => write(&p, &design.to_text())?,
                None => print!("{}", design.to_text()),
            }
        }
        Command::Simulate { common, n_qubits, max_length, shots, seed, out } => {
            let mut cfg = load_config(&common)?;
            let e = &mut cfg.experiment;
            e.n_qubits = n_qubits.or(e.n_qubits);
            e.max_length = max_length.or(e.max_length);
            e.shots = shots.or(e.shots);
            e.seed = seed.or(e.seed);
            let design = default_design(cfg.n_qubits(), cfg.max_length())?;
            let ds = simulate_counts(&design, &cfg.truth()?, cfg.shots(), cfg.seed())?;
            save_dataset(&ds, &out)?;
            eprintln!("wrote {} circuits to {}", ds.len(), out.display());
        }
        Command::Train { common, data, out, log, no_curriculum, init, epochs, seed } => {
            let cfg = load_config(&common)?;
            let ds = load_dataset(&data)?;
            let mut tc = cfg.train_config(ds.n_qubits);
            if no_curriculum {
                tc.curriculum = false;
            }
            if let Some(e) = epochs {
                tc.epochs_per_part = e;
            }
            tc.seed = seed.unwrap_or(tc.seed);
            let (model, trace) = match init {
                Some(ckpt) => transfer_learn(&ckpt, &ds, &tc)?,
                None => {
                    let max_len = ds.circuits.iter().map(Circuit::len).max().unwrap_or(0);
                    let mc = cfg.model_config(ds.n_qubits, max_len);
                    let mut model = Model::new(mc, cfg.model.init_seed.unwrap_or(0))?;
                    let trace = train(&mut model, &ds, &tc)?;
                    (model, trace)
                }
            };
            model.save(&out)?;
            let log = log.unwrap_or_else(|| with_suffix(&out, ".log.csv"));
            write(&log, &trace.to_csv())?;
            eprintln!("wrote checkpoint {} and log {}", out.display(), log.display());
        }
        Command::FitBaseline { common, data, out, bootstrap: resamples } => {
            let cfg = load_config(&common)?;
            let ds = load_dataset(&data)?;
            let bc = cfg.baseline_config(ds.n_qubits);
            let fit = baseline_fit(&ds, None, &bc)?;
            let mut report = FitReport::new("baseline", &fit.params, &ds)?;
            let n = resamples.or(cfg.report.bootstrap_resamples).unwrap_or(0);
            if n > 0 {
                let seed = cfg.report.bootstrap_seed.unwrap_or(0);
                report.bootstrap = Some(bootstrap(&ds, &fit.params, &bc, n, seed)?);
            }
            write(&out, &report.to_json())?;
            eprintln!("wrote {}", out.display());
        }
        Command::Report { common, checkpoint, data, out_dir, compare } => {
            let _cfg = load_config(&common)?;
            let ds = load_dataset(&data)?;
            let model = Model::load(&checkpoint)?;
            let predicted = estimate(&model, &ds)?;
            let mut report = FitReport::new("transformer", &predicted, &ds)?;
            if let Some(other) = compare {
                let no_cl = estimate(&Model::load(&other)?, &ds)?;
                report.metrics.insert("no_cl_fit".into(), qgst::bench::evaluate_metrics(&no_cl, &ds)?);
            }
            fs::create_dir_all(&out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
            write(&out_dir.join("report.json"), &report.to_json())?;
            write_heatmaps(&out_dir, &ds.circuits, &predicted, ds.ground_truth.as_ref(), ds.n_qubits)?;
            eprintln!("wrote report and heatmaps to {}", out_dir.display());
        }
    }
    Ok(())
}

fn write_heatmaps(
    dir: &Path,
    circuits: &[Circuit],
    fit: &ErrorParams,
    truth: Option<&ErrorParams>,
    n_qubits: usize,
) -> Result<()> {
    let mut labels: Vec<GateLabel> = circuits.iter().flat_map(|c| c.labels().iter().cloned()).collect();
    labels.sort();
    labels.dedup();
    if labels.is_empty() {
        bail!("dataset has no gates to compare");
    }
    for label in &labels {
        let name = label_file_name(label);
        let ideal = ideal_gate_ptm(label, n_qubits)?;
        let model = noisy_gate_ptm(label, fit, n_qubits)?;
        match truth {
            Some(t) => {
                let actual = noisy_gate_ptm(label, t, n_qubits)?;
                let h = ptm_distance_heatmap(&actual, &ideal, ("truth", "ideal"))?;
                write(&dir.join(format!("heatmap_{name}_truth_vs_ideal.csv")), &h.to_csv())?;
                let h = ptm_distance_heatmap(&model, &actual, ("fit", "truth"))?;
                write(&dir.join(format!("heatmap_{name}_fit_vs_truth.csv")), &h.to_csv())?;
            }
            None => {
                let h = ptm_distance_heatmap(&model, &ideal, ("fit", "ideal"))?;
                write(&dir.join(format!("heatmap_{name}_fit_vs_ideal.csv")), &h.to_csv())?;
            }
        }
    }
    Ok(())
}
