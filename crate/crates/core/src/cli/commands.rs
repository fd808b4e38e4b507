use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::manifest::{self, digest_file, InputDigest, ManifestEntry};
use super::settings::Settings;
use super::{timestamp, Cli, Command, DataArgs};
use crate::data_ingest::{
    align_dataset, composite_average, model_inputs, normalize_table, parse_price_table,
    NormStats, PriceTable,
};
use crate::error::{Error, Result};
use crate::eval::{
    cv_csv, holdout_split, mean_std, read_cv_csv, roc_csv, run_baseline_cv, run_cv, score_holdout,
    summary_json, verify_fold_pca, CvReport, HoldoutReport, CV_HEADER,
};
use crate::model::{load_checkpoint, make_windows, predict, save_checkpoint, train, Variant, WindowedSample};
use crate::news_agent::{
    atomic_write, embed_summaries, orchestrate, read_embeddings, read_summaries, write_embeddings,
    Clock, FixedClock, HttpBackend, MockBackend, SummaryStore, SystemClock, TextBackend,
};
use crate::reduce::fit_pca;

/// Outputs a command may write, used to detect reruns.
fn declared_outputs(cmd: &Command) -> &'static [&'static str] {
    match cmd {
        Command::Ingest { .. } => &["normalized.csv", "composite.csv", "norm_stats.json"],
        Command::Label { .. } => &["labels.csv"],
        // The summary store is resumable, so reruns extend it in place.
        Command::Distill { .. } => &[],
        Command::Embed { .. } => &["embeddings.jsonl"],
        Command::Reduce { .. } => &["pca.json", "reduced.jsonl"],
        Command::Train { .. } => &["checkpoint.json", "history.csv", "train_summary.json"],
        Command::Eval { .. } => &["holdout_metrics.json", "roc.csv", "predictions.csv"],
        Command::Ablate { .. } => &["cv_report.csv", "cv_summary.json", "cv_folds.json"],
        Command::Report { .. } => &["cv_report.csv", "auc_summary.csv", "holdout_summary.csv", "series.csv"],
    }
}

/// The requested directory, or a fresh `run-<timestamp>` inside it when an
/// earlier run's outputs are present and `--force` is not given.
fn resolve_out_dir(out: &Path, outputs: &[&str], force: bool) -> Result<PathBuf> {
    let clash = outputs.iter().any(|f| out.join(f).exists());
    let dir = if clash && !force {
        let stamp = super::now().format("%Y%m%dT%H%M%SZ").to_string();
        let mut candidate = out.join(format!("run-{stamp}"));
        let mut n = 2;
        while candidate.exists() {
            candidate = out.join(format!("run-{stamp}-{n}"));
            n += 1;
        }
        log::info!("outputs exist in {}; writing to {}", out.display(), candidate.display());
        candidate
    } else {
        out.to_path_buf()
    };
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

struct Run {
    dir: PathBuf,
    settings: Settings,
    inputs: Vec<InputDigest>,
    outputs: Vec<String>,
}

impl Run {
    fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(digest_file(path)?);
        Ok(())
    }

    fn write(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        atomic_write(&self.dir.join(name), contents)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }
}

fn apply_common(settings: &mut Settings, cli: &Cli) {
    if let Some(seed) = cli.common.seed {
        settings.seed = seed;
    }
}

fn apply_data(settings: &mut Settings, data: &DataArgs) {
    if let Some(t) = data.threshold {
        settings.spike_threshold_pct = t;
    }
    if let Some(k) = data.window {
        settings.window = k;
    }
}

pub(super) fn execute(cli: &Cli, args: Vec<String>) -> Result<PathBuf> {
    let started_at = timestamp();
    let mut settings = Settings::load(cli.common.config.as_deref())?;
    apply_common(&mut settings, cli);
    let dir = resolve_out_dir(&cli.common.out, declared_outputs(&cli.command), cli.common.force)?;
    let mut run = Run { dir, settings, inputs: Vec::new(), outputs: Vec::new() };
    if let Some(c) = &cli.common.config {
        run.input(c)?;
    }

    match &cli.command {
        Command::Ingest { input } => ingest(&mut run, input)?,
        Command::Label { input, threshold, commodity } => {
            if let Some(t) = threshold {
                run.settings.spike_threshold_pct = *t;
            }
            label(&mut run, input, commodity.as_deref())?
        }
        Command::Distill { backend, years, commodities, max_retries, fallback, in_flight } => {
            if let Some(y) = years {
                let (a, b) = parse_years(y)?;
                run.settings.year_start = a;
                run.settings.year_end = b;
            }
            if let Some(c) = commodities {
                run.settings.commodities = c.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
            }
            if let Some(m) = max_retries {
                run.settings.max_retries = *m;
            }
            if let Some(f) = fallback {
                run.settings.fallback_policy = f.parse()?;
            }
            if let Some(n) = in_flight {
                run.settings.in_flight_limit = *n;
            }
            distill(&mut run, backend)?
        }
        Command::Embed { summaries, backend, dim } => {
            if let Some(d) = dim {
                run.settings.embedding_dim = *d;
            }
            embed(&mut run, summaries, backend)?
        }
        Command::Reduce { embeddings, d_prime, fit_until } => {
            if let Some(d) = d_prime {
                run.settings.d_prime = *d;
            }
            reduce(&mut run, embeddings, *fit_until)?
        }
        Command::Train { data, variant } => {
            apply_data(&mut run.settings, data);
            if let Some(v) = variant {
                run.settings.variant = v.parse()?;
            }
            train_cmd(&mut run, data)?
        }
        Command::Eval { data, checkpoint } => {
            apply_data(&mut run.settings, data);
            eval_cmd(&mut run, data, checkpoint)?
        }
        Command::Ablate { data, variants, folds, baseline } => {
            apply_data(&mut run.settings, data);
            if let Some(f) = folds {
                run.settings.n_folds = *f;
            }
            let variants = variants
                .split(',')
                .map(|s| s.trim().parse::<Variant>())
                .collect::<Result<Vec<_>>>()?;
            ablate(&mut run, data, &variants, *baseline)?
        }
        Command::Report { inputs } => report(&mut run, inputs)?,
    }

    let entry = ManifestEntry {
        command: cli.command.name().to_string(),
        args,
        seed: run.settings.seed,
        config: run.settings.clone(),
        inputs: run.inputs,
        outputs: run.outputs,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        started_at,
        finished_at: timestamp(),
    };
    manifest::record(&run.dir, entry)?;
    Ok(run.dir)
}

fn parse_years(s: &str) -> Result<(i32, i32)> {
    let bad = || Error::Config(format!("year range `{s}` is not START:END"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let a: i32 = a.trim().parse().map_err(|_| bad())?;
    let b: i32 = b.trim().parse().map_err(|_| bad())?;
    if a > b {
        return Err(Error::Config(format!("year range `{s}` is empty")));
    }
    Ok((a, b))
}

fn read_table(run: &mut Run, path: &Path) -> Result<PriceTable> {
    run.input(path)?;
    parse_price_table(&std::fs::read_to_string(path)?)
}

fn series_csv(years: &[i32], values: &[Option<f64>], column: &str) -> String {
    let mut s = format!("year,{column}\n");
    for (y, v) in years.iter().zip(values) {
        if let Some(v) = v {
            s.push_str(&format!("{y},{v}\n"));
        }
    }
    s
}

fn ingest(run: &mut Run, input: &Path) -> Result<()> {
    let table = read_table(run, input)?;
    let (normalized, stats) = normalize_table(&table)?;
    let composite = composite_average(&normalized)?;
    run.write("normalized.csv", normalized.to_csv()?.as_bytes())?;
    run.write("composite.csv", series_csv(&composite.years, &composite.values, "composite").as_bytes())?;
    run.write_json("norm_stats.json", &stats)
}

fn label(run: &mut Run, input: &Path, commodity: Option<&str>) -> Result<()> {
    let table = read_table(run, input)?;
    let inputs = model_inputs(&table, run.settings.spike_threshold_pct, commodity)?;
    log::info!("{} of {} labelled years are spikes", inputs.labels.positives(), inputs.labels.labels.len());
    run.write("labels.csv", inputs.labels.to_csv()?.as_bytes())
}

fn backend(name: &str, settings: &Settings) -> Result<Box<dyn TextBackend>> {
    match name {
        "mock" => Ok(Box::new(MockBackend::new(settings.seed).with_dim(settings.embedding_dim))),
        "openai" => Ok(Box::new(HttpBackend::from_env(settings.http())?)),
        other => Err(Error::Config(format!("unknown backend `{other}` (expected mock or openai)"))),
    }
}

fn distill(run: &mut Run, backend_name: &str) -> Result<()> {
    let backend = backend(backend_name, &run.settings)?;
    // Mock runs get a fixed timestamp so their stores are reproducible.
    let clock: Box<dyn Clock> = if backend_name == "mock" {
        Box::new(FixedClock::epoch())
    } else if std::env::var_os("SOURCE_DATE_EPOCH").is_some() {
        Box::new(FixedClock(super::now()))
    } else {
        Box::new(SystemClock)
    };
    let path = run.dir.join("summaries.jsonl");
    let store = SummaryStore::open(&path)?;
    let report = orchestrate(&run.settings.agent(), backend.as_ref(), &store, clock.as_ref())?;
    let exhausted = report.exhausted_years();
    if !exhausted.is_empty() {
        log::warn!("{} year(s) exhausted their retries: {:?}", exhausted.len(), exhausted);
    }
    run.outputs.push("summaries.jsonl".into());
    Ok(())
}

fn embed(run: &mut Run, summaries: &Path, backend_name: &str) -> Result<()> {
    run.input(summaries)?;
    let backend = backend(backend_name, &run.settings)?;
    let all = read_summaries(summaries)?;
    let verified: Vec<_> = all.iter().filter(|s| s.verified).collect();
    if verified.len() < all.len() {
        log::warn!("skipping {} unverified summaries", all.len() - verified.len());
    }
    let vectors = embed_summaries(verified, backend.as_ref())?;
    write_embeddings(&run.dir.join("embeddings.jsonl"), &vectors)?;
    run.outputs.push("embeddings.jsonl".into());
    Ok(())
}

fn reduce(run: &mut Run, embeddings: &Path, fit_until: Option<i32>) -> Result<()> {
    run.input(embeddings)?;
    let all = read_embeddings(embeddings)?;
    let fit_rows: Vec<_> = all
        .iter()
        .filter(|e| fit_until.is_none_or(|y| e.year <= y))
        .cloned()
        .collect();
    if fit_until.is_none() {
        log::warn!("fitting PCA on every year; pass --fit-until to keep evaluation years out");
    }
    let basis = fit_pca(&fit_rows, run.settings.d_prime)?;
    let reduced = all
        .iter()
        .map(|e| {
            let values = basis.transform_embedding(e)?;
            Ok(crate::news_agent::EmbeddingVector { year: e.year, dim: values.len(), values })
        })
        .collect::<Result<Vec<_>>>()?;
    run.write_json("pca.json", &basis)?;
    write_embeddings(&run.dir.join("reduced.jsonl"), &reduced)?;
    run.outputs.push("reduced.jsonl".into());
    Ok(())
}

fn load_samples(run: &mut Run, data: &DataArgs, window: usize) -> Result<(Vec<WindowedSample>, Vec<NormStats>)> {
    let table = read_table(run, &data.prices)?;
    run.input(&data.embeddings)?;
    let embeddings = read_embeddings(&data.embeddings)?;
    let inputs = model_inputs(&table, run.settings.spike_threshold_pct, data.commodity.as_deref())?;
    let dataset = align_dataset(&inputs.feature, &inputs.labels, &embeddings)?;
    Ok((make_windows(&dataset, window)?, inputs.norm_stats))
}

#[derive(Serialize)]
struct TrainSummary {
    variant: Variant,
    best_epoch: usize,
    best_val_loss: f64,
    stopped_epoch: usize,
    train_count: usize,
    val_count: usize,
    holdout_count: usize,
    last_train_anchor: i32,
}

fn train_cmd(run: &mut Run, data: &DataArgs) -> Result<()> {
    let (samples, norm_stats) = load_samples(run, data, run.settings.window)?;
    let (train_part, holdout) = holdout_split(&samples, run.settings.holdout_fraction)?;
    let mut outcome = train(train_part, &run.settings.model(), &run.settings.train())?;
    outcome.params.norm_stats = norm_stats;
    save_checkpoint(&outcome.params, &run.dir.join("checkpoint.json"))?;
    run.outputs.push("checkpoint.json".into());
    run.write("history.csv", outcome.history_csv().as_bytes())?;
    let summary = TrainSummary {
        variant: run.settings.variant,
        best_epoch: outcome.best_epoch,
        best_val_loss: outcome.best_val_loss,
        stopped_epoch: outcome.stopped_epoch,
        train_count: outcome.train_count,
        val_count: outcome.val_count,
        holdout_count: holdout.len(),
        last_train_anchor: train_part[train_part.len() - 1].anchor_year,
    };
    run.write_json("train_summary.json", &summary)
}

fn eval_cmd(run: &mut Run, data: &DataArgs, checkpoint: &Path) -> Result<()> {
    run.input(checkpoint)?;
    let params = load_checkpoint(checkpoint)?;
    let (samples, _) = load_samples(run, data, params.config.window)?;
    let (train_part, test) = holdout_split(&samples, run.settings.holdout_fraction)?;
    let scores = predict(&params, test)?;
    let report = score_holdout(
        params.config.variant.as_str(),
        train_part.len(),
        test,
        scores,
        run.settings.decision_threshold,
    )?;
    let mut preds = String::from("anchor_year,target,score\n");
    for (s, p) in test.iter().zip(&report.scores) {
        preds.push_str(&format!("{},{},{}\n", s.anchor_year, s.target, p));
    }
    run.write("predictions.csv", preds.as_bytes())?;
    run.write("roc.csv", roc_csv(&report.roc).as_bytes())?;
    run.write_json("holdout_metrics.json", &report)
}

fn ablate(run: &mut Run, data: &DataArgs, variants: &[Variant], baseline: bool) -> Result<()> {
    let (samples, _) = load_samples(run, data, run.settings.window)?;
    let cv = run.settings.cv();
    let mut reports: Vec<CvReport> = Vec::new();
    for &v in variants {
        log::info!("cross-validating {v}");
        let r = run_cv(&samples, v, &cv)?;
        verify_fold_pca(&samples, &r, run.settings.d_prime)?;
        reports.push(r);
    }
    if baseline {
        let r = run_baseline_cv(&samples, &run.settings.baseline())?;
        verify_fold_pca(&samples, &r, run.settings.d_prime)?;
        reports.push(r);
    }
    run.write("cv_report.csv", cv_csv(&reports).as_bytes())?;
    run.write("cv_summary.json", summary_json(&reports)?.as_bytes())?;
    run.write_json("cv_folds.json", &reports)
}

fn report(run: &mut Run, inputs: &[PathBuf]) -> Result<()> {
    let mut cv_rows = String::new();
    let mut holdout = String::from("run,variant,auc,accuracy,precision_w,recall_w,f1_w,tp,fp,fn,tn\n");
    let mut have_holdout = false;
    let mut by_variant: BTreeMap<String, (Vec<f64>, usize)> = BTreeMap::new();
    let mut series: Option<String> = None;

    for (i, dir) in inputs.iter().enumerate() {
        if !dir.is_dir() {
            return Err(Error::Validation(format!("{} is not a directory", dir.display())));
        }
        let run_name = dir.file_name().map_or_else(|| format!("run{i}"), |n| n.to_string_lossy().into_owned());

        let cv_path = dir.join("cv_report.csv");
        if cv_path.exists() {
            run.input(&cv_path)?;
            let text = std::fs::read_to_string(&cv_path)?;
            if text.lines().next() != Some(CV_HEADER) {
                return Err(Error::Validation(format!("{} has an unexpected header", cv_path.display())));
            }
            for (variant, _, auc) in read_cv_csv(&text)? {
                let e = by_variant.entry(variant).or_default();
                match auc {
                    Some(a) => e.0.push(a),
                    None => e.1 += 1,
                }
            }
            for line in text.lines().skip(1) {
                cv_rows.push_str(line);
                cv_rows.push('\n');
            }
        }

        let hold_path = dir.join("holdout_metrics.json");
        if hold_path.exists() {
            run.input(&hold_path)?;
            let h: HoldoutReport = serde_json::from_str(&std::fs::read_to_string(&hold_path)?)?;
            let m = &h.metrics;
            let c = &m.confusion;
            holdout.push_str(&format!(
                "{run_name},{},{},{},{},{},{},{},{},{},{}\n",
                h.label,
                h.auc.map(|a| a.to_string()).unwrap_or_default(),
                m.accuracy,
                m.precision_weighted,
                m.recall_weighted,
                m.f1_weighted,
                c.tp,
                c.fp,
                c.fn_,
                c.tn
            ));
            have_holdout = true;
            if !h.roc.is_empty() {
                run.write(&format!("roc_{run_name}.csv"), roc_csv(&h.roc).as_bytes())?;
            }
        }

        let (comp, labels) = (dir.join("composite.csv"), dir.join("labels.csv"));
        if series.is_none() && comp.exists() && labels.exists() {
            run.input(&comp)?;
            run.input(&labels)?;
            series = Some(merge_series(&comp, &labels)?);
        }
    }

    if !cv_rows.is_empty() {
        run.write("cv_report.csv", format!("{CV_HEADER}\n{cv_rows}").as_bytes())?;
        let mut s = String::from("variant,auc_mean,auc_std,folds_used,folds_undefined\n");
        for (variant, (aucs, undefined)) in &by_variant {
            let (m, sd) = mean_std(aucs).map_or((String::new(), String::new()), |(m, s)| (m.to_string(), s.to_string()));
            s.push_str(&format!("{variant},{m},{sd},{},{undefined}\n", aucs.len()));
        }
        run.write("auc_summary.csv", s.as_bytes())?;
    }
    if have_holdout {
        run.write("holdout_summary.csv", holdout.as_bytes())?;
    }
    if let Some(s) = series {
        run.write("series.csv", s.as_bytes())?;
    }
    if run.outputs.is_empty() {
        return Err(Error::Validation("no report inputs found in the given directories".into()));
    }
    Ok(())
}

/// `year,composite,avg_price,pct_change,spike` for spike-overlay plots.
fn merge_series(composite: &Path, labels: &Path) -> Result<String> {
    let mut comp: BTreeMap<i32, String> = BTreeMap::new();
    let mut rdr = csv::Reader::from_path(composite)?;
    for rec in rdr.records() {
        let rec = rec?;
        let year = rec[0].parse().map_err(|e| Error::Parse { line: 0, message: format!("{e}") })?;
        comp.insert(year, rec[1].to_string());
    }
    let mut lab: BTreeMap<i32, (String, String, String)> = BTreeMap::new();
    let mut rdr = csv::Reader::from_path(labels)?;
    for rec in rdr.records() {
        let rec = rec?;
        let year = rec[0].parse().map_err(|e| Error::Parse { line: 0, message: format!("{e}") })?;
        lab.insert(year, (rec[1].to_string(), rec[2].to_string(), rec[3].to_string()));
    }
    let mut s = String::from("year,composite,avg_price,pct_change,spike\n");
    for (year, c) in &comp {
        let (a, p, y) = lab.get(year).cloned().unwrap_or_default();
        s.push_str(&format!("{year},{c},{a},{p},{y}\n"));
    }
    Ok(s)
}
