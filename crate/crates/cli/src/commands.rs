//! Subcommand implementations. Every command that produces artifacts writes
//! them atomically into `--out-dir` together with a digest manifest, and is
//! byte-reproducible given the same inputs, config, and seed.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};

use throughcast::hmm::{evaluate_sessions, fit_hmm, sweep_model_size, HmmModel, TrainOptions};
use throughcast::persist::{load_model, StoredModel};
use throughcast::predictors::{
    aggregate_errors, fit_ar, fit_arma, records_to_csv, ArithmeticMean, HarmonicMean, LastSample,
    Predictor,
};
use throughcast::sim::{evaluate_qoe, qoe_rows_to_csv, Policy};
use throughcast::stats;
use throughcast::trace::{
    bin_normalized_stddev, compute_stability, filter_by_duration, read_traces_csv,
    serialize_traces_csv, generate_synthetic, SessionTrace,
};

use crate::args::{
    AnalyzeArgs, EvalArgs, ModelKind, PredictArgs, ReportArgs, SimulateArgs, SynthArgs, TrainArgs,
};
use crate::config::AppConfig;
use crate::output::{ArtifactWriter, RunManifest};
use crate::split::{select_split, split_sessions, SplitChoice};

/// Reads the trace CSV, drops sessions at or below the configured minimum
/// length, and records the input digest.
fn load_sessions(
    trace: &Path,
    config: &AppConfig,
    manifest: &mut RunManifest,
) -> Result<Vec<SessionTrace>> {
    manifest.record_input(trace)?;
    let parsed = read_traces_csv(trace, config.epoch_seconds)
        .with_context(|| format!("reading traces from {}", trace.display()))?;
    let total = parsed.len();
    let kept = filter_by_duration(parsed, config.min_epochs);
    ensure!(
        !kept.is_empty(),
        "no session in {} is longer than {} epochs ({} parsed)",
        trace.display(),
        config.min_epochs,
        total
    );
    Ok(kept)
}

fn load_stored_model(path: &Path, manifest: &mut RunManifest) -> Result<StoredModel> {
    manifest.record_input(path)?;
    load_model(path).with_context(|| format!("loading model {}", path.display()))
}

/// Built-in reference mixture used by `synth` when no model file is given:
/// four regimes spanning sub-megabit to multi-megabit rates with mildly
/// sticky transitions.
fn reference_model() -> HmmModel {
    let means = [800.0, 1800.0, 3200.0, 5600.0];
    let num_states = means.len();
    let stay = 0.88;
    let leave = (1.0 - stay) / (num_states - 1) as f64;
    let mut transition = vec![leave; num_states * num_states];
    for i in 0..num_states {
        transition[i * num_states + i] = stay;
    }
    let variances = means.map(|m| (0.2 * m) * (0.2 * m));
    HmmModel::new(
        num_states,
        vec![1.0 / num_states as f64; num_states],
        transition,
        means.to_vec(),
        variances.to_vec(),
    )
    .expect("reference model parameters are valid")
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let _config = AppConfig::load(args.config.as_deref())?;
    let mut manifest = RunManifest::new("synth", Some(args.seed));
    let model = match &args.model {
        Some(path) => load_stored_model(path, &mut manifest)?.to_hmm()?,
        None => reference_model(),
    };
    let traces = generate_synthetic(&model, args.sessions, args.length, args.seed)?;
    let csv = serialize_traces_csv(&traces);
    let mut writer = ArtifactWriter::new(&args.out_dir, manifest)?;
    let path = writer.write("traces.csv", &csv)?;
    writer.finish()?;
    println!(
        "generated {} sessions x {} epochs -> {}",
        args.sessions,
        args.length,
        path.display()
    );
    Ok(())
}

pub fn analyze(args: &AnalyzeArgs) -> Result<()> {
    let config = AppConfig::load(args.config.as_deref())?;
    let mut manifest = RunManifest::new("analyze", None);
    let mut sessions = load_sessions(&args.trace, &config, &mut manifest)?;
    sessions.sort_by(|a, b| a.session_id().cmp(b.session_id()));

    let reports = sessions
        .iter()
        .map(|s| compute_stability(s, config.max_autocorr_lag))
        .collect::<throughcast::Result<Vec<_>>>()?;

    let mut stability = String::from("session_id,mean_kbps,stddev_kbps,coeff_variation,iqr_spread_kbps,degenerate");
    for lag in 1..=config.max_autocorr_lag {
        write!(stability, ",autocorr_{lag}").unwrap();
    }
    stability.push('\n');
    for r in &reports {
        write!(
            stability,
            "{},{},{},{},{},{}",
            r.session_id, r.mean_kbps, r.stddev_kbps, r.coeff_variation, r.iqr_spread_kbps,
            r.degenerate
        )
        .unwrap();
        for v in &r.autocorr {
            write!(stability, ",{v}").unwrap();
        }
        stability.push('\n');
    }

    let bins = bin_normalized_stddev(&sessions, config.bin_width_kbps)?;
    let mut bins_csv =
        String::from("bin_low_kbps,bin_width_kbps,session_count,mean_coeff_variation\n");
    for b in &bins {
        writeln!(
            bins_csv,
            "{},{},{},{}",
            b.bin_low_kbps, b.bin_width_kbps, b.session_count, b.mean_coeff_variation
        )
        .unwrap();
    }

    // Autocorrelation quartiles across sessions, excluding degenerate
    // (constant) sessions for which the statistic is undefined.
    let mut quantiles_csv = String::from("lag,p25,p50,p75,session_count\n");
    let live: Vec<&throughcast::trace::StabilityReport> =
        reports.iter().filter(|r| !r.degenerate).collect();
    if !live.is_empty() {
        for lag in 1..=config.max_autocorr_lag {
            let values: Vec<f64> = live.iter().map(|r| r.autocorr[lag - 1]).collect();
            writeln!(
                quantiles_csv,
                "{lag},{},{},{},{}",
                stats::percentile(&values, 25.0)?,
                stats::percentile(&values, 50.0)?,
                stats::percentile(&values, 75.0)?,
                values.len()
            )
            .unwrap();
        }
    }

    let mut writer = ArtifactWriter::new(&args.out_dir, manifest)?;
    writer.write("stability.csv", &stability)?;
    writer.write("bins.csv", &bins_csv)?;
    writer.write("autocorr_quantiles.csv", &quantiles_csv)?;
    writer.finish()?;
    println!(
        "analyzed {} sessions ({} degenerate) -> {}",
        reports.len(),
        reports.iter().filter(|r| r.degenerate).count(),
        args.out_dir.display()
    );
    Ok(())
}

fn effective_train_options(config: &AppConfig, seed: Option<u64>) -> TrainOptions {
    let mut options = config.train.clone();
    if let Some(seed) = seed {
        options.seed = seed;
    }
    options
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let config = AppConfig::load(args.config.as_deref())?;
    let mut manifest = RunManifest::new("train", args.seed);
    let sessions = load_sessions(&args.trace, &config, &mut manifest)?;
    let selected = select_split(
        sessions,
        args.split,
        config.split_fraction,
        args.seed.unwrap_or(0),
    );
    ensure!(!selected.is_empty(), "selected split contains no sessions");

    let mut writer = ArtifactWriter::new(&args.out_dir, manifest)?;
    let (stored, extra): (StoredModel, Option<String>) = match args.kind {
        ModelKind::Hmm => {
            let options = effective_train_options(&config, args.seed);
            let (model, loglik) = fit_hmm(&selected, config.num_states, &options)?;
            let mut log_csv = String::from("iteration,log_likelihood\n");
            for (i, ll) in loglik.iter().enumerate() {
                writeln!(log_csv, "{i},{ll}").unwrap();
            }
            (StoredModel::from(&model), Some(log_csv))
        }
        ModelKind::Ar => {
            let model = fit_ar(&selected, config.ar_order)?;
            (StoredModel::from(&model), None)
        }
        ModelKind::Arma => {
            let model = fit_arma(&selected, config.ar_order, config.ma_order)?;
            (StoredModel::from(&model), None)
        }
    };

    let mut model_json = serde_json::to_string_pretty(&stored)?;
    model_json.push('\n');
    let model_path = writer.write("model.json", &model_json)?;
    if let Some(log_csv) = extra {
        writer.write("training_log.csv", &log_csv)?;
    }
    writer.finish()?;
    println!(
        "fitted {} model on {} sessions -> {}",
        stored.kind(),
        selected.len(),
        model_path.display()
    );
    Ok(())
}

pub fn predict(args: &PredictArgs) -> Result<()> {
    let config = AppConfig::load(args.config.as_deref())?;
    let mut manifest = RunManifest::new("predict", args.seed);
    let sessions = load_sessions(&args.trace, &config, &mut manifest)?;
    let stored = load_stored_model(&args.model, &mut manifest)?;
    let predictor = stored.to_predictor()?;
    let selected = select_split(
        sessions,
        args.split,
        config.split_fraction,
        args.seed.unwrap_or(0),
    );
    ensure!(!selected.is_empty(), "selected split contains no sessions");

    let records = evaluate_sessions(
        predictor.as_ref(),
        &selected,
        config.eval.warmup,
        config.eval.horizon,
    )?;
    let error = aggregate_errors(
        &records,
        config.eval.within_percentile,
        config.eval.across_percentile,
    )?;

    let mut writer = ArtifactWriter::new(&args.out_dir, manifest)?;
    let path = writer.write("predictions.csv", &records_to_csv(&records))?;
    writer.finish()?;
    println!(
        "{} predictions over {} sessions (aggregated error {error:.4}) -> {}",
        records.len(),
        selected.len(),
        path.display()
    );
    Ok(())
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let config = AppConfig::load(args.config.as_deref())?;
    let mut manifest = RunManifest::new("eval", args.seed);
    let sessions = load_sessions(&args.trace, &config, &mut manifest)?;

    let mut named: Vec<(String, Box<dyn Predictor>)> = vec![
        ("last_sample".into(), Box::new(LastSample)),
        ("arithmetic_mean".into(), Box::new(ArithmeticMean::default())),
        ("harmonic_mean".into(), Box::new(HarmonicMean::default())),
    ];
    for path in &args.models {
        let stored = load_stored_model(path, &mut manifest)?;
        let base = stored.kind().to_string();
        let clashes = named
            .iter()
            .filter(|(n, _)| {
                *n == base
                    || n.strip_prefix(&format!("{base}-"))
                        .is_some_and(|s| s.chars().all(|c| c.is_ascii_digit()))
            })
            .count();
        let name = if clashes > 0 { format!("{base}-{}", clashes + 1) } else { base };
        named.push((name, stored.to_predictor()?));
    }

    let (train_side, test_side) = split_sessions(
        sessions,
        config.split_fraction,
        args.seed.unwrap_or(0),
    );
    let selected = match args.split {
        SplitChoice::Train => train_side.clone(),
        SplitChoice::Test => test_side.clone(),
        SplitChoice::All => {
            let mut all = train_side.clone();
            all.extend(test_side.iter().cloned());
            all.sort_by(|a, b| a.session_id().cmp(b.session_id()));
            all
        }
    };
    ensure!(!selected.is_empty(), "selected split contains no sessions");

    let mut errors_csv = String::from("predictor,error\n");
    for (name, predictor) in &named {
        let records = evaluate_sessions(
            predictor.as_ref(),
            &selected,
            config.eval.warmup,
            config.eval.horizon,
        )?;
        let error = aggregate_errors(
            &records,
            config.eval.within_percentile,
            config.eval.across_percentile,
        )?;
        writeln!(errors_csv, "{name},{error}").unwrap();
    }

    let sweep_csv = if args.sweep {
        ensure!(
            !train_side.is_empty() && !test_side.is_empty(),
            "the model-size sweep needs nonempty train and test splits"
        );
        let options = effective_train_options(&config, args.seed);
        let sweep = sweep_model_size(
            &train_side,
            &test_side,
            &config.sweep_states,
            &config.eval,
            &options,
        )?;
        let mut csv = String::from("num_states,error\n");
        for (m, err) in &sweep {
            writeln!(csv, "{m},{err}").unwrap();
        }
        Some(csv)
    } else {
        None
    };

    let mut writer = ArtifactWriter::new(&args.out_dir, manifest)?;
    writer.write("errors.csv", &errors_csv)?;
    if let Some(csv) = sweep_csv {
        writer.write("sweep.csv", &csv)?;
    }
    writer.finish()?;
    println!(
        "evaluated {} predictors on {} sessions -> {}",
        named.len(),
        selected.len(),
        args.out_dir.display()
    );
    Ok(())
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let config = AppConfig::load(args.config.as_deref())?;
    let mut manifest = RunManifest::new("simulate", args.seed);
    let sessions = load_sessions(&args.trace, &config, &mut manifest)?;
    let model_predictor: Option<(String, Box<dyn Predictor>)> = match &args.model {
        Some(path) => {
            let stored = load_stored_model(path, &mut manifest)?;
            Some((stored.kind().to_string(), stored.to_predictor()?))
        }
        None => None,
    };
    let selected = select_split(
        sessions,
        args.split,
        config.split_fraction,
        args.seed.unwrap_or(0),
    );
    ensure!(!selected.is_empty(), "selected split contains no sessions");

    let last_sample = LastSample;
    let mut policies: Vec<(String, Policy<'_>)> = vec![
        ("bb".into(), Policy::BufferBased),
        ("mpc-last-sample".into(), Policy::Mpc(&last_sample)),
    ];
    if let Some((kind, predictor)) = &model_predictor {
        policies.push((format!("mpc-{kind}"), Policy::Mpc(predictor.as_ref())));
    }
    policies.push(("optimal".into(), Policy::Optimal));

    let rows = evaluate_qoe(&selected, &policies, &config.sim)?;
    let mut writer = ArtifactWriter::new(&args.out_dir, manifest)?;
    let path = writer.write("qoe.csv", &qoe_rows_to_csv(&rows))?;
    writer.finish()?;
    println!(
        "simulated {} policies x {} sessions -> {}",
        policies.len(),
        selected.len(),
        path.display()
    );
    Ok(())
}

/// Splits a CSV artifact into (header fields, row fields).
fn read_csv_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .with_context(|| format!("{} is empty", path.display()))?
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    Ok((header, rows))
}

fn column(header: &[String], name: &str) -> Result<usize> {
    header
        .iter()
        .position(|h| h == name)
        .with_context(|| format!("column {name} not found"))
}

pub fn report(args: &ReportArgs) -> Result<()> {
    let dir = &args.dir;
    // No paths or timestamps in the artifact: identical inputs must yield an
    // identical report regardless of where they sit.
    let mut out = String::new();
    writeln!(out, "run summary").unwrap();

    let stability_path = dir.join("stability.csv");
    if stability_path.exists() {
        let (header, rows) = read_csv_table(&stability_path)?;
        let cov_idx = column(&header, "coeff_variation")?;
        let degenerate_idx = column(&header, "degenerate")?;
        let covs: Vec<f64> = rows
            .iter()
            .map(|r| r[cov_idx].parse::<f64>().context("bad coeff_variation"))
            .collect::<Result<_>>()?;
        let degenerate = rows.iter().filter(|r| r[degenerate_idx] == "true").count();
        if !covs.is_empty() {
            writeln!(
                out,
                "stability: {} sessions ({degenerate} constant), median coefficient of variation {:.4}",
                rows.len(),
                stats::percentile(&covs, 50.0)?
            )
            .unwrap();
        }
    }

    let errors_path = dir.join("errors.csv");
    if errors_path.exists() {
        let (_, rows) = read_csv_table(&errors_path)?;
        let mut best: Option<(&str, f64)> = None;
        let mut listing = Vec::new();
        for row in &rows {
            let err: f64 = row[1].parse().context("bad error value")?;
            listing.push(format!("{}={:.4}", row[0], err));
            if best.is_none_or(|(_, b)| err < b) {
                best = Some((&row[0], err));
            }
        }
        writeln!(out, "prediction error: {}", listing.join(", ")).unwrap();
        if let Some((name, err)) = best {
            writeln!(out, "best predictor: {name} ({err:.4})").unwrap();
        }
    }

    let sweep_path = dir.join("sweep.csv");
    if sweep_path.exists() {
        let (_, rows) = read_csv_table(&sweep_path)?;
        let mut best: Option<(&str, f64)> = None;
        for row in &rows {
            let err: f64 = row[1].parse().context("bad sweep error")?;
            if best.is_none_or(|(_, b)| err < b) {
                best = Some((&row[0], err));
            }
        }
        if let Some((m, err)) = best {
            writeln!(out, "model-size sweep: best at {m} states ({err:.4})").unwrap();
        }
    }

    let qoe_path = dir.join("qoe.csv");
    if qoe_path.exists() {
        let (header, rows) = read_csv_table(&qoe_path)?;
        let policy_idx = column(&header, "policy")?;
        let qoe_idx = column(&header, "qoe_value")?;
        let norm_idx = column(&header, "normalized_qoe")?;
        let mut order: Vec<String> = Vec::new();
        let mut sums: std::collections::BTreeMap<String, (f64, usize, f64, usize)> =
            std::collections::BTreeMap::new();
        for row in &rows {
            let name = row[policy_idx].clone();
            if !order.contains(&name) {
                order.push(name.clone());
            }
            let entry = sums.entry(name).or_insert((0.0, 0, 0.0, 0));
            entry.0 += row[qoe_idx].parse::<f64>().context("bad qoe value")?;
            entry.1 += 1;
            if !row[norm_idx].is_empty() {
                entry.2 += row[norm_idx].parse::<f64>().context("bad normalized qoe")?;
                entry.3 += 1;
            }
        }
        for name in &order {
            let (qoe_sum, n, norm_sum, norm_n) = sums[name];
            let mut line = format!("policy {name}: mean qoe {:.3}", qoe_sum / n as f64);
            if norm_n > 0 {
                write!(line, ", mean normalized {:.4} (over {norm_n} sessions)", norm_sum / norm_n as f64)
                    .unwrap();
            }
            writeln!(out, "{line}").unwrap();
        }
    }

    if out.lines().count() == 1 {
        bail!("no artifacts found in {}", dir.display());
    }
    crate::output::write_atomic(&dir.join("report.txt"), out.as_bytes())?;
    print!("{out}");
    Ok(())
}
