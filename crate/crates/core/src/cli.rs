//! Command-line front end. Every subcommand writes its outputs plus a
//! `manifest.txt` into the output directory; feeding that manifest back via
//! `--config` reproduces the run byte for byte.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Arg, ArgAction, Command};

use crate::config::{params_for, parse_config, Settings, COMMANDS, VERSION};
use crate::error::{Error, Result};
use crate::experiments::{
    boundary_records, fit_boundary, run_contamination, run_grid, run_loo_instability, run_pca_null, run_sensitivity,
    run_spatial, write_records_csv, ExperimentRecord,
};
use crate::gpa::{gpa, GpaOptions};
use crate::io::{numbered, read_landmark_file, write_alignment, write_landmark_file, Specimen};
use crate::nn::{ConvSpec, TrainSpec};
use crate::render::{render_boxplot, render_heatmap, GroupKey};
use crate::sim::{default_config, sensitivity_presets, simulate, SimConfig};
use crate::split::{align_clean, split};

fn about(command: &str) -> &'static str {
    match command {
        "simulate" => "Simulate a landmark sample and its ground truth",
        "gpa" => "Superimpose a landmark file",
        "align" => "Split a landmark file and align the test part onto the training reference",
        "loo" => "Leave-one-out alignment instability across sample sizes",
        "contamination" => "Test RMSE of contaminated versus clean alignment",
        "grid" => "Contamination study over a sample-size by landmark-count grid, with boundary fit",
        "sensitivity" => "Grid and boundary fit under each simulation preset",
        "spatial" => "Linear versus convolutional regressors on clean-aligned data",
        "pca-null" => "Cumulative PCA variance under the isotropic null",
        _ => "",
    }
}

pub fn command() -> Result<Command> {
    let mut root = Command::new("morpho-leakage")
        .version(VERSION)
        .about("Procrustes alignment without train/test leakage, and the simulation studies around it")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for name in COMMANDS {
        let mut sub = Command::new(name).about(about(name)).arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .help("config file (`key = value`, optional [subcommand] sections)"),
        );
        for p in params_for(name)? {
            let shown = if p.default.is_empty() { "required".to_string() } else { p.default.clone() };
            sub = sub.arg(
                Arg::new(p.key)
                    .long(p.key.replace('_', "-"))
                    .value_name("VALUE")
                    .action(ArgAction::Set)
                    .allow_hyphen_values(true)
                    .help(format!("{} [default: {shown}; {}]", p.help, p.source)),
            );
        }
        root = root.subcommand(sub);
    }
    Ok(root)
}

/// Parses `args` (program name first) into resolved settings.
pub fn parse_cli<I, T>(args: I) -> std::result::Result<Settings, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = command().map_err(CliError::Run)?.try_get_matches_from(args).map_err(CliError::Usage)?;
    let (name, sub) = matches.subcommand().ok_or_else(|| CliError::Run(Error::Config("missing subcommand".into())))?;
    let file = match sub.get_one::<String>("config") {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Run(Error::Config(format!("cannot read {path}: {e}"))))?;
            Some(parse_config(&text).map_err(CliError::Run)?)
        }
        None => None,
    };
    let mut flags = BTreeMap::new();
    for p in params_for(name).map_err(CliError::Run)? {
        if let Some(v) = sub.get_one::<String>(p.key) {
            flags.insert(p.key.to_string(), v.clone());
        }
    }
    Settings::resolve(name, file.as_ref(), &flags).map_err(CliError::Run)
}

#[derive(Debug)]
pub enum CliError {
    Usage(clap::Error),
    Run(Error),
}

/// Full entry point: parse, run, report; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let settings = match parse_cli(args) {
        Ok(s) => s,
        Err(CliError::Usage(e)) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    match run(&settings) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs on a pool of `threads` workers (0 = rayon's default).
pub fn run(settings: &Settings) -> Result<String> {
    let threads = settings.usize("threads")?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| execute(settings))
}

fn out_dir(s: &Settings) -> Result<PathBuf> {
    let dir = PathBuf::from(s.get("out")?);
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn sim_config(s: &Settings, n: usize, p: usize) -> Result<SimConfig> {
    let cfg = SimConfig {
        sigma: s.f64("sigma")?,
        shear_range: s.pair("shear_range")?,
        shear_noise_sd: s.f64("shear_noise_sd")?,
        rho: s.f64("rho")?,
        size_noise_sd: s.f64("size_noise_sd")?,
        z_range: s.pair("z_range")?,
        seed: s.u64("seed")?,
        ..default_config(n, p, s.usize("k")?)
    };
    cfg.validate()?;
    Ok(cfg)
}

fn gpa_options(s: &Settings) -> Result<GpaOptions> {
    Ok(GpaOptions {
        robust: s.bool("robust")?,
        scale: s.bool("scale")?,
        tol: s.f64("tol")?,
        max_iter: s.usize("max_iter")?,
    })
}

fn input(s: &Settings) -> Result<Vec<Specimen>> {
    let path = s.get("input")?;
    if path.is_empty() {
        return Err(Error::Config("`input` is required".into()));
    }
    read_landmark_file(Path::new(path))
}

fn write_records(dir: &Path, records: &mut [ExperimentRecord]) -> Result<()> {
    let mut buf = Vec::new();
    write_records_csv(&mut buf, records)?;
    fs::write(dir.join("records.csv"), buf)?;
    Ok(())
}

fn summary_value(records: &[ExperimentRecord], condition: Option<&str>, metric: &str) -> Option<f64> {
    records
        .iter()
        .find(|r| r.metric == metric && r.replicate.is_none() && condition.map_or(true, |c| r.condition == c))
        .map(|r| r.value)
}

fn execute(s: &Settings) -> Result<String> {
    let dir = out_dir(s)?;
    fs::write(dir.join("manifest.txt"), s.manifest())?;
    let seed = s.u64("seed")?;
    match s.command.as_str() {
        "simulate" => {
            let cfg = sim_config(s, s.usize("n")?, s.usize("p")?)?;
            let sample = simulate(&cfg)?;
            write_landmark_file(&dir.join("landmarks.txt"), &numbered(&sample.configs))?;
            let mut truth = Vec::new();
            sample.write_truth_csv(&mut truth)?;
            fs::write(dir.join("truth.csv"), truth)?;
            Ok(format!("simulated {} specimens into {}", sample.len(), dir.display()))
        }
        "gpa" => {
            let specimens = input(s)?;
            let configs: Vec<_> = specimens.iter().map(|sp| sp.config.clone()).collect();
            let ids: Vec<String> = specimens.iter().map(|sp| sp.id.clone()).collect();
            let result = gpa(&configs, &gpa_options(s)?)?;
            write_alignment(&dir, &result, &ids)?;
            Ok(format!(
                "aligned {} specimens in {} iterations (converged: {}), Q = {:e}",
                configs.len(),
                result.iterations,
                result.converged,
                result.final_objective()
            ))
        }
        "align" => {
            let specimens = input(s)?;
            let idx = split(specimens.len(), s.f64("train_frac")?, seed)?;
            let (train, test) = idx.select(&specimens);
            let configs = |v: &[Specimen]| v.iter().map(|sp| sp.config.clone()).collect::<Vec<_>>();
            let aligned = align_clean(&configs(&train), &configs(&test), &gpa_options(s)?)?;
            let relabel = |src: &[Specimen], out: Vec<crate::shape::LandmarkConfig>| {
                src.iter().zip(out).map(|(sp, config)| Specimen { id: sp.id.clone(), config }).collect::<Vec<_>>()
            };
            write_landmark_file(&dir.join("train_aligned.txt"), &relabel(&train, aligned.train.clone()))?;
            write_landmark_file(&dir.join("test_aligned.txt"), &relabel(&test, aligned.test.clone()))?;
            write_landmark_file(
                &dir.join("reference.txt"),
                &[Specimen { id: "reference".into(), config: aligned.reference.clone() }],
            )?;
            Ok(format!("aligned {} training and {} test specimens into {}", train.len(), test.len(), dir.display()))
        }
        "loo" => {
            let cfg = sim_config(s, 3, s.usize("p")?)?;
            let mut records = run_loo_instability(&cfg, &s.usize_list("sizes")?, s.usize("replicates")?, s.usize("boot_reps")?, seed)?;
            write_records(&dir, &mut records)?;
            render_boxplot(&records, "mean_displacement", GroupKey::N, &dir.join("loo.svg"))?;
            let means: Vec<String> = records
                .iter()
                .filter(|r| r.metric == "mean_displacement_mean")
                .map(|r| format!("n={}: {:.5}", r.n, r.value))
                .collect();
            Ok(format!("mean leave-one-out displacement {}", means.join(", ")))
        }
        "contamination" => {
            let cfg = sim_config(s, s.usize("n")?, s.usize("p")?)?;
            let mut records = run_contamination(&cfg, s.usize("replicates")?, s.usize("boot_reps")?, seed)?;
            write_records(&dir, &mut records)?;
            render_boxplot(&records, "delta_rmse", GroupKey::Condition, &dir.join("delta_rmse.svg"))?;
            Ok(format!(
                "mean delta RMSE {:.5} [{:.5}, {:.5}]",
                summary_value(&records, None, "delta_rmse_mean").unwrap_or(f64::NAN),
                summary_value(&records, None, "delta_rmse_ci_lower").unwrap_or(f64::NAN),
                summary_value(&records, None, "delta_rmse_ci_upper").unwrap_or(f64::NAN)
            ))
        }
        "grid" => {
            let ns = s.usize_list("n_values")?;
            let ps = s.usize_list("p_values")?;
            let base = sim_config(s, ns[0], ps[0])?;
            let mut records = run_grid(&ns, &ps, &base, "default", s.usize("replicates")?, seed)?;
            render_heatmap(&records, "delta_rmse", None, &dir.join("heatmap_delta_rmse.svg"))?;
            let fit = fit_boundary(&records, s.f64("threshold_quantile")?);
            render_heatmap(&records, "rmse_clean", fit.as_ref().ok(), &dir.join("heatmap_rmse.svg"))?;
            if let Ok(f) = &fit {
                records.extend(boundary_records(f, base.k, "default", seed));
            }
            write_records(&dir, &mut records)?;
            let f = fit?;
            Ok(format!("boundary p = {:.4} n + {:.4} through {} columns", f.slope, f.intercept, f.cells_used))
        }
        "sensitivity" => {
            let ns = s.usize_list("n_values")?;
            let ps = s.usize_list("p_values")?;
            let presets = sensitivity_presets(ns[0], ps[0], s.usize("k")?);
            let mut result =
                run_sensitivity(&presets, &ns, &ps, s.usize("replicates")?, s.f64("threshold_quantile")?, seed)?;
            for (name, fit) in &result.fits {
                let subset: Vec<ExperimentRecord> = result.records.iter().filter(|r| &r.condition == name).cloned().collect();
                render_heatmap(&subset, "rmse_clean", Some(fit), &dir.join(format!("heatmap_{name}.svg")))?;
            }
            write_records(&dir, &mut result.records)?;
            let slopes: Vec<String> = result.fits.iter().map(|(n, f)| format!("{n}: {:.4}", f.slope)).collect();
            Ok(format!("boundary slopes {} (spread {:.4})", slopes.join(", "), result.max_slope_spread()))
        }
        "spatial" => {
            let cfg = sim_config(s, s.usize("n")?, s.usize("p")?)?;
            let train = TrainSpec {
                epochs: s.usize("epochs")?,
                batch_size: s.usize("batch_size")?,
                learning_rate: s.f64("learning_rate")?,
                adam_beta1: s.f64("adam_beta1")?,
                adam_beta2: s.f64("adam_beta2")?,
                adam_eps: s.f64("adam_eps")?,
                seed,
            };
            let span = s.usize("kernel_span")?;
            let conv = ConvSpec { channels: s.usize("channels")?, kernel_span: if span == 0 { None } else { Some(span) } };
            let mut records = run_spatial(&cfg, s.usize("replicates")?, &train, &conv, s.usize("boot_reps")?, seed)?;
            write_records(&dir, &mut records)?;
            render_boxplot(&records, "rmse", GroupKey::Condition, &dir.join("spatial.svg"))?;
            Ok(format!(
                "mean test RMSE linear {:.4}, conv {:.4}; conv better in {:.1}% of pairs",
                summary_value(&records, Some("linear"), "rmse_mean").unwrap_or(f64::NAN),
                summary_value(&records, Some("conv"), "rmse_mean").unwrap_or(f64::NAN),
                100.0 * summary_value(&records, Some("paired"), "conv_win_fraction").unwrap_or(f64::NAN)
            ))
        }
        "pca-null" => {
            let mut records = run_pca_null(
                &s.usize_list("p_values")?,
                &s.usize_list("k_values")?,
                s.usize("n_multiplier")?,
                &s.f64_list("alpha_values")?,
                seed,
            )?;
            write_records(&dir, &mut records)?;
            let lines: Vec<String> = records
                .iter()
                .filter(|r| r.metric == "empirical_slope")
                .map(|r| format!("p={} k={} {}: {:.4}", r.p, r.k, r.condition, r.value))
                .collect();
            Ok(format!("empirical cumulative variance {}", lines.join("; ")))
        }
        other => Err(Error::Config(format!("unknown subcommand `{other}`"))),
    }
}
