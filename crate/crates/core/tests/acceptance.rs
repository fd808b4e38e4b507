//! Acceptance suite. Each test prints one PASS/FAIL line before asserting.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spikecast::data_ingest::{label_spikes, PriceSeries};
use spikecast::eval::{roc_auc, run_baseline_cv, run_cv, verify_fold_pca, CvReport};
use spikecast::linalg::Matrix;
use spikecast::model::{
    evaluate_loss, fit_window_pca, loss_and_gradient, train, validation_count, ModelConfig, ModelParams, Network,
    TrainConfig, Variant,
};
use spikecast::news_agent::{orchestrate, AgentConfig, FixedClock, MockBackend, SummaryStore, VerdictScript};
use spikecast::nn::{attention_forward, grad_check, softmax_rows, AttentionParams, GradCheckOptions};
use spikecast::reduce::fit_pca_rows;
use spikecast::synthetic::generate;

fn report(name: &str, pass: bool, detail: String) {
    println!("[{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
}

#[test]
fn gradient_correctness() {
    let start = Instant::now();
    let cfg = ModelConfig { window: 3, d_prime: 2, hidden: 4, attn: 4, head_hidden: 4, dropout: 0.0, variant: Variant::Full };
    let d = 6;
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let samples = common::random_samples(seed, 8, 3, d);
        let pca = fit_window_pca(&samples, 2).unwrap();
        let mut params = ModelParams::zeroed(cfg, d, Some(pca));
        params.net = Network::init(&cfg, d, &mut ChaCha8Rng::seed_from_u64(1000 + seed));
        let inputs: Vec<_> = samples.iter().map(|s| params.prepare(s).unwrap()).collect();
        let (_, grads) = loss_and_gradient(&params.net, &cfg, &inputs, None).unwrap();
        let mut probe = params.net.clone();
        let rep = grad_check(
            &params.net.to_flat(),
            &grads.to_flat(),
            |t| {
                probe.set_flat(t);
                evaluate_loss(&probe, &cfg, &inputs, None)
            },
            GradCheckOptions { seed, ..GradCheckOptions::default() },
        )
        .unwrap();
        worst = worst.max(rep.max_relative_error);
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst <= 1e-4 && secs < 30.0;
    report("gradient correctness", pass, format!("max relative error {worst:.2e} (≤ 1e-4) over 20 seeds in {secs:.1}s (< 30s)"));
    assert!(pass);
}

#[test]
fn attention_softmax_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (k, h, a) = (5, 4, 3);
    let mut row_err = 0.0f64;
    let mut shift_err = 0.0f64;
    for _ in 0..50 {
        let states = Matrix::from_vec(k, h, (0..k * h).map(|_| rng.gen_range(-2.0..2.0)).collect());
        let params = AttentionParams::init(h, a, &mut rng);
        let cache = attention_forward(&states, &params).unwrap();
        for i in 0..k {
            row_err = row_err.max((cache.weights().row(i).iter().sum::<f64>() - 1.0).abs());
        }
        let logits = Matrix::from_vec(k, k, (0..k * k).map(|_| rng.gen_range(-5.0..5.0)).collect());
        let mut shifted = logits.clone();
        for i in 0..k {
            let c = rng.gen_range(-50.0..50.0);
            shifted.row_mut(i).iter_mut().for_each(|v| *v += c);
        }
        shift_err = shift_err.max(softmax_rows(&logits).max_abs_diff(&softmax_rows(&shifted)));
    }
    let mut params = AttentionParams::init(h, a, &mut rng);
    params.w_query.fill(0.0);
    params.w_key.fill(0.0);
    let states = Matrix::from_vec(k, h, (0..k * h).map(|_| rng.gen_range(-2.0..2.0)).collect());
    let cache = attention_forward(&states, &params).unwrap();
    let uniform = cache.weights().as_slice().iter().all(|&w| w == 1.0 / k as f64);
    let pass = row_err <= 1e-6 && shift_err <= 1e-6 && uniform;
    report(
        "attention/softmax invariants",
        pass,
        format!("row-sum error {row_err:.1e}, shift error {shift_err:.1e} (≤ 1e-6), zero Q/K uniform rows: {uniform}"),
    );
    assert!(pass);
}

/// Top-`d_prime` eigenvectors of the sample covariance, computed with nalgebra.
fn oracle_projector(rows: &[Vec<f64>], d_prime: usize) -> DMatrix<f64> {
    let n = rows.len();
    let d = rows[0].len();
    let x = DMatrix::from_fn(n, d, |i, j| rows[i][j]);
    let mean = x.row_mean();
    let mut centered = x.clone();
    for mut r in centered.row_iter_mut() {
        r -= &mean;
    }
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let w = DMatrix::from_fn(d, d_prime, |i, j| eig.eigenvectors[(i, order[j])]);
    &w * w.transpose()
}

#[test]
fn pca_matches_covariance_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (d, d_prime) = (8, 3);
    let mut proj_err = 0.0f64;
    let mut ortho_err = 0.0f64;
    for _ in 0..50 {
        let n = rng.gen_range(12..40);
        let scales: Vec<f64> = (0..d).map(|_| rng.gen_range(0.2..3.0)).collect();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| scales.iter().map(|s| s * rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let basis = fit_pca_rows(&rows, d_prime).unwrap();
        let w = DMatrix::from_fn(d, d_prime, |i, j| basis.components[(i, j)]);
        let p = &w * w.transpose();
        proj_err = proj_err.max((p - oracle_projector(&rows, d_prime)).abs().max());
        let wtw = w.transpose() * &w;
        ortho_err = ortho_err.max((wtw - DMatrix::<f64>::identity(d_prime, d_prime)).abs().max());
    }
    let pass = proj_err <= 1e-6 && ortho_err <= 1e-8;
    report(
        "PCA correctness",
        pass,
        format!("projector difference {proj_err:.1e} (≤ 1e-6), WᵀW − I {ortho_err:.1e} (≤ 1e-8) on 50 datasets"),
    );
    assert!(pass);
}

#[test]
fn auc_equals_pairwise_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0;
    for case in 0..100 {
        let n = rng.gen_range(2..=200);
        let tie_heavy = case % 2 == 0;
        let mut labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        labels[0] = 0;
        labels[1] = 1;
        let scores: Vec<f64> = (0..n)
            .map(|_| if tie_heavy { f64::from(rng.gen_range(0..4)) / 4.0 } else { rng.gen() })
            .collect();
        if roc_auc(&scores, &labels).unwrap() != common::pairwise_auc(&scores, &labels) {
            mismatches += 1;
        }
    }
    let pass = mismatches == 0;
    report("AUC oracle equivalence", pass, format!("{mismatches} mismatches over 100 instances (n ≤ 200, half tie-heavy)"));
    assert!(pass);
}

#[test]
fn spike_labels_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut mismatches = 0;
    for _ in 0..100 {
        let n = rng.gen_range(2..60);
        let values: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..200.0)).collect();
        let series = PriceSeries::raw("x", (0..n).collect(), values.clone());
        let got: Vec<u8> = label_spikes(&series, 25.0).unwrap().labels.iter().map(|l| l.spike).collect();
        if got != common::brute_force_labels(&values, 25.0) {
            mismatches += 1;
        }
    }
    let boundary = label_spikes(&PriceSeries::raw("x", vec![2000, 2001], vec![100.0, 125.0]), 25.0).unwrap();
    let boundary_ok = boundary.labels.len() == 1 && boundary.labels[0].spike == 0;
    let pass = mismatches == 0 && boundary_ok;
    report(
        "spike-label oracle",
        pass,
        format!("{mismatches} mismatches over 100 series; [100, 125] labelled 0: {boundary_ok}"),
    );
    assert!(pass);
}

fn check_leakage(samples: &[spikecast::model::WindowedSample], r: &CvReport, d_prime: usize) -> bool {
    r.folds.iter().all(|f| {
        let train_max = samples[f.train_range.0..f.train_range.1].iter().map(|s| s.anchor_year).max().unwrap();
        let test_min = samples[f.test_range.0..f.test_range.1].iter().map(|s| s.anchor_year).min().unwrap();
        train_max < test_min
    }) && verify_fold_pca(samples, r, d_prime).is_ok()
}

#[test]
fn ablation_direction_on_planted_news() {
    let start = Instant::now();
    let samples = generate(&common::planted_single()).unwrap().samples(3).unwrap();
    let cfg = common::small_cv(8);
    let full = run_cv(&samples, Variant::Full, &cfg).unwrap();
    let no_news = run_cv(&samples, Variant::NoNews, &cfg).unwrap();
    let (a_full, a_none) = (full.mean_auc().unwrap(), no_news.mean_auc().unwrap());
    let secs = start.elapsed().as_secs_f64();
    let pass = a_full >= a_none + 0.20 && a_full >= 0.85 && secs < 300.0;
    report(
        "directional ablation",
        pass,
        format!("mean CV AUC full {a_full:.3} vs no_news {a_none:.3} (need ≥ +0.20 and full ≥ 0.85) in {secs:.1}s"),
    );
    assert!(pass);
}

#[test]
fn early_stopping_contract() {
    let samples = common::random_samples(21, 40, 3, 6);
    let model = ModelConfig { window: 3, d_prime: 2, hidden: 6, attn: 6, head_hidden: 6, dropout: 0.2, variant: Variant::Full };
    let mut ok = true;
    let mut details = Vec::new();
    for (patience, lr) in [(1, 0.3), (3, 0.05), (5, 0.01)] {
        let cfg = TrainConfig { learning_rate: lr, epochs: 80, patience, batch_size: 4, ..TrainConfig::default() };
        let out = train(&samples, &model, &cfg).unwrap();
        let val_start = samples.len() - validation_count(samples.len(), cfg.validation_fraction);
        let val: Vec<_> = samples[val_start..].iter().map(|s| out.params.prepare(s).unwrap()).collect();
        let replay = evaluate_loss(&out.params.net, &model, &val, None).unwrap();
        let recorded = out.history[out.best_epoch - 1].val_loss;
        let min_recorded = out.history.iter().map(|r| r.val_loss).fold(f64::INFINITY, f64::min);
        let halted = out.stopped_epoch == cfg.epochs || out.stopped_epoch - out.best_epoch == patience;
        let this = out.stopped_epoch - out.best_epoch <= patience
            && halted
            && replay == out.best_val_loss
            && recorded == out.best_val_loss
            && min_recorded == out.best_val_loss;
        ok &= this;
        details.push(format!("p={patience}: best {} stop {}", out.best_epoch, out.stopped_epoch));
    }
    report("early-stopping contract", ok, format!("{}; best Θ replays its validation loss exactly", details.join(", ")));
    assert!(ok);
}

#[test]
fn leakage_guards() {
    let samples = generate(&common::planted_single()).unwrap().samples(3).unwrap();
    let cfg = common::small_cv(8);
    let mut checked = 0;
    let mut ok = true;
    for v in Variant::ALL {
        let r = run_cv(&samples, v, &cfg).unwrap();
        ok &= check_leakage(&samples, &r, cfg.model.d_prime);
        checked += r.folds.len();
    }
    let base = run_baseline_cv(&samples, &common::small_baseline()).unwrap();
    ok &= check_leakage(&samples, &base, 2);
    checked += base.folds.len();
    report(
        "leakage guards",
        ok,
        format!("{checked} folds across 5 reports: train anchors precede test anchors, PCA bases refit bit-for-bit"),
    );
    assert!(ok);
}

#[test]
fn agent_loop_bounds() {
    let years = 1990..=1994;
    let cfg = AgentConfig { years: years.clone(), ..AgentConfig::default() };
    let clock = FixedClock::epoch();

    let reject = MockBackend::new(1).with_script(VerdictScript::AlwaysReject);
    let store = SummaryStore::in_memory();
    let rep = orchestrate(&cfg, &reject, &store, &clock).unwrap();
    let five_each = years.clone().all(|y| reject.calls(y).generate == 5);
    let empty = rep.summaries.is_empty() && store.snapshot().values().all(|s| !s.verified);

    let third = MockBackend::new(1).with_script(VerdictScript::AcceptOnAttempt(3));
    let store = SummaryStore::in_memory();
    orchestrate(&cfg, &third, &store, &clock).unwrap();
    let retries_two = years.clone().all(|y| store.get(y).is_some_and(|s| s.verified && s.retries == 2));

    let run = |seed| {
        let b = MockBackend::new(seed).with_script(VerdictScript::Seeded { accept_probability: 0.5 });
        let s = SummaryStore::in_memory();
        orchestrate(&cfg, &b, &s, &clock).unwrap();
        s.snapshot()
    };
    let deterministic = run(4) == run(4);

    let pass = five_each && empty && retries_two && deterministic;
    report(
        "agent-loop bounds",
        pass,
        format!(
            "always-reject: 5 generate calls per year {five_each}, empty verified store {empty}; \
             accept-on-3: retries = 2 {retries_two}; deterministic {deterministic}"
        ),
    );
    assert!(pass);
}

fn cli(args: &[&str], dir: &Path) {
    let status = Command::new(env!("CARGO_BIN_EXE_spikecast"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "error")
        .status()
        .unwrap();
    assert!(status.success(), "spikecast {args:?} failed with {status}");
}

fn pipeline(root: &Path, prices: &Path) {
    std::fs::create_dir_all(root).unwrap();
    std::fs::write(
        root.join("run.toml"),
        "window = 3\nd_prime = 2\nhidden = 6\nattn = 6\nhead_hidden = 6\nepochs = 20\npatience = 5\nn_folds = 3\n",
    )
    .unwrap();
    let p = prices.to_str().unwrap();
    let common = ["--seed", "7", "--config", "run.toml", "--out", "out"];
    let with = |extra: &[&'static str]| -> Vec<&str> { extra.iter().copied().chain(common.iter().copied()).collect() };
    cli(&with(&["distill", "--backend", "mock", "--years", "1960:2024"]), root);
    cli(&with(&["embed", "--summaries", "out/summaries.jsonl", "--backend", "mock", "--dim", "16"]), root);
    let mut train = vec!["train", "--prices", p, "--embeddings", "out/embeddings.jsonl"];
    train.extend(common);
    cli(&train, root);
    let mut ablate = vec!["ablate", "--prices", p, "--embeddings", "out/embeddings.jsonl", "--variants", "full,no_news", "--baseline"];
    ablate.extend(common);
    cli(&ablate, root);
}

#[test]
fn end_to_end_reproducibility() {
    let tmp = tempfile::tempdir().unwrap();
    let prices = tmp.path().join("prices.csv");
    let data = generate(&spikecast::synthetic::PlantedConfig { first_year: 1960, ..common::planted_single() }).unwrap();
    std::fs::write(&prices, data.table.to_csv().unwrap()).unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    pipeline(&a, &prices);
    pipeline(&b, &prices);
    let files = ["summaries.jsonl", "embeddings.jsonl", "checkpoint.json", "history.csv", "cv_report.csv", "cv_summary.json", "cv_folds.json"];
    let differing: Vec<&str> = files
        .iter()
        .copied()
        .filter(|f| std::fs::read(a.join("out").join(f)).unwrap() != std::fs::read(b.join("out").join(f)).unwrap())
        .collect();
    let pass = differing.is_empty();
    report(
        "end-to-end reproducibility",
        pass,
        format!("{} artifacts compared across two distill→ablate runs; differing: {differing:?}", files.len()),
    );
    assert!(pass);
}

#[test]
fn baseline_sanity_on_xor() {
    let samples = generate(&common::planted_xor()).unwrap().samples(3).unwrap();
    let model = run_cv(&samples, Variant::Full, &common::small_cv(16)).unwrap().mean_auc().unwrap();
    let logreg = run_baseline_cv(&samples, &common::small_baseline()).unwrap().mean_auc().unwrap();
    let pass = model >= logreg + 0.15;
    report("baseline sanity", pass, format!("XOR rule: dual-stream {model:.3} vs logistic regression {logreg:.3} (need ≥ +0.15)"));
    assert!(pass);
}
