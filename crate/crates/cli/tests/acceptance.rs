//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use clap::Parser;
use fpclass_cli::{run, Cli};
use fpclass_core::fuzzy;
use fpclass_core::infogain::{empirical_entropy, information_gain};
use fpclass_core::orientation::{block_orientation, write_pgm};
use fpclass_core::sae::{gradient_check, kl_divergence, LayerParams, SaeHyper};
use fpclass_core::softmax::{self, SoftmaxModel};
use fpclass_core::synthgen::{self, SynthSpec};
use fpclass_core::{ClassLabel, GrayImage};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn cli(args: &[&str]) -> Result<String, String> {
    let argv = std::iter::once("fpclass").chain(args.iter().copied());
    let parsed = Cli::try_parse_from(argv).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    run(&parsed, &mut out).map_err(|e| format!("{e:#}"))?;
    Ok(String::from_utf8(out).expect("utf-8 report"))
}

/// Value of a `key\tvalue` report line.
fn report_value(report: &str, key: &str) -> Option<f64> {
    report.lines().find_map(|l| {
        let (k, v) = l.split_once('\t')?;
        (k == key).then(|| v.parse().ok()).flatten()
    })
}

fn random_batch(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(lo..hi))
}

fn random_labels(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<ClassLabel> {
    (0..n)
        .map(|i| {
            // Every class appears at least once.
            let idx = if i < k { i } else { rng.random_range(0..k) };
            ClassLabel::ALL[idx]
        })
        .collect()
}

fn softmax_check(m: &SoftmaxModel, x: &Array2<f64>, y: &[ClassLabel], lambda: f64, eps: f64) -> f64 {
    let (_, grad) = softmax::cost_grad(m, x.view(), y, lambda).unwrap();
    let mut theta = m.theta.clone();
    let mut worst: f64 = 0.0;
    for idx in ndarray::indices(theta.dim()) {
        let orig = theta[idx];
        theta[idx] = orig + eps;
        let plus = softmax::cost_grad(&SoftmaxModel::new(theta.clone(), lambda).unwrap(), x.view(), y, lambda)
            .unwrap()
            .0;
        theta[idx] = orig - eps;
        let minus = softmax::cost_grad(&SoftmaxModel::new(theta.clone(), lambda).unwrap(), x.view(), y, lambda)
            .unwrap()
            .0;
        theta[idx] = orig;
        let numeric = (plus - minus) / (2.0 * eps);
        let a = grad[idx];
        worst = worst.max((a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8));
    }
    worst
}

fn gradient_fidelity() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_sae: f64 = 0.0;
    let mut sae_runs = 0;
    for lambda in [0.0, 0.003] {
        for beta in [0.0, 3.0] {
            for rho in [0.05, 0.1] {
                for _ in 0..3 {
                    let (v, h, m) = (rng.random_range(4..12), rng.random_range(2..8), rng.random_range(4..12));
                    let p = LayerParams::random(v, h, &mut rng);
                    let batch = random_batch(&mut rng, m, v, 0.1, 0.9);
                    let hyper = SaeHyper {
                        lambda,
                        beta,
                        rho,
                        ..SaeHyper::default()
                    };
                    worst_sae = worst_sae.max(gradient_check(&p, batch.view(), &hyper, 1e-5).unwrap());
                    sae_runs += 1;
                }
            }
        }
    }
    let mut worst_sm: f64 = 0.0;
    let mut sm_runs = 0;
    for lambda in [0.0, 1e-4, 1e-2, 1.0] {
        for _ in 0..5 {
            let (k, n, m) = (rng.random_range(2..=4), rng.random_range(2..8), rng.random_range(6..16));
            let theta = random_batch(&mut rng, k, n + 1, -0.5, 0.5);
            let model = SoftmaxModel::new(theta, lambda).unwrap();
            let x = random_batch(&mut rng, m, n, -1.0, 1.0);
            let y = random_labels(&mut rng, m, k);
            worst_sm = worst_sm.max(softmax_check(&model, &x, &y, lambda, 1e-5));
            sm_runs += 1;
        }
    }
    let elapsed = start.elapsed();
    let pass = worst_sae < 1e-6 && worst_sm < 1e-6 && sae_runs >= 20 && sm_runs >= 20 && elapsed < Duration::from_secs(10);
    Outcome::new(
        pass,
        format!(
            "sae {sae_runs} instances max rel err {worst_sae:.2e}, softmax {sm_runs} instances max rel err {worst_sm:.2e} (< 1e-6), {:.2}s (< 10s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn softmax_laws() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut norm, mut shift, mut uniform): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut convex_violation: f64 = f64::NEG_INFINITY;
    for _ in 0..100 {
        let (k, n, m) = (rng.random_range(2..=4), rng.random_range(1..10), rng.random_range(4..20));
        let theta = random_batch(&mut rng, k, n + 1, -5.0, 5.0);
        let x = random_batch(&mut rng, m, n, -3.0, 3.0);
        let y = random_labels(&mut rng, m, k);
        let model = SoftmaxModel::new(theta.clone(), 0.0).unwrap();
        let p = softmax::predict_proba_batch(&model, x.view()).unwrap();
        for row in p.rows() {
            norm = norm.max((row.sum() - 1.0).abs());
        }

        let offset: Vec<f64> = (0..=n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let mut shifted = theta.clone();
        for mut r in shifted.rows_mut() {
            r.iter_mut().zip(&offset).for_each(|(t, o)| *t += o);
        }
        let q = softmax::predict_proba_batch(&SoftmaxModel::new(shifted, 0.0).unwrap(), x.view()).unwrap();
        shift = shift.max((&p - &q).iter().fold(0.0, |a: f64, v| a.max(v.abs())));

        let zero = SoftmaxModel::zeros(k, n, 0.0).unwrap();
        let u = softmax::predict_proba_batch(&zero, x.view()).unwrap();
        uniform = uniform.max(u.iter().fold(0.0, |a: f64, v| a.max((v - 1.0 / k as f64).abs())));

        let lambda = rng.random_range(0.0..0.1);
        let other = random_batch(&mut rng, k, n + 1, -5.0, 5.0);
        let mid = (&theta + &other) * 0.5;
        let cost = |t: &Array2<f64>| {
            softmax::cost_grad(&SoftmaxModel::new(t.clone(), lambda).unwrap(), x.view(), &y, lambda)
                .unwrap()
                .0
        };
        let gap = cost(&mid) - 0.5 * (cost(&theta) + cost(&other));
        convex_violation = convex_violation.max(gap);
    }
    let pass = norm <= 1e-12 && shift <= 1e-12 && uniform <= 1e-12 && convex_violation <= 1e-10;
    Outcome::new(
        pass,
        format!(
            "|sum p - 1| {norm:.1e}, shift {shift:.1e}, zero-theta {uniform:.1e} (<= 1e-12); midpoint gap {convex_violation:.2e} (<= 1e-10)"
        ),
    )
}

fn kl_laws() -> Outcome {
    let mut min_kl = f64::INFINITY;
    let mut at_rho: f64 = 0.0;
    let mut positive_off = true;
    for rho in [0.01, 0.05, 0.1, 0.3, 0.5, 0.9] {
        at_rho = at_rho.max(kl_divergence(rho, rho).abs());
        for i in 1..1000 {
            let q = i as f64 / 1000.0;
            let d = kl_divergence(rho, q);
            min_kl = min_kl.min(d);
            if (q - rho).abs() > 1e-9 && d <= 0.0 {
                positive_off = false;
            }
        }
    }
    let oracle = 0.05 * (0.05f64 / 0.5).ln() + 0.95 * (0.95f64 / 0.5).ln();
    let spot = kl_divergence(0.05, 0.5);
    let pass = min_kl >= 0.0 && at_rho <= 1e-12 && positive_off && (spot - 0.4947).abs() <= 1e-4 && (spot - oracle).abs() <= 1e-12;
    Outcome::new(
        pass,
        format!("min KL {min_kl:.2e} (>= 0), KL(rho||rho) {at_rho:.1e} (<= 1e-12), KL(0.05||0.5) = {spot:.6} (0.4947 +- 1e-4)"),
    )
}

fn fuzzy_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut exact = true;
    let mut monotone = true;
    for _ in 0..50 {
        let n = rng.random_range(1..300);
        let mut decisions = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let raw: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..1.0f64).powi(3)).collect();
            let total: f64 = raw.iter().sum::<f64>().max(1e-12);
            let probs: Vec<f64> = raw.iter().map(|p| p / total).collect();
            decisions.push(fuzzy::fuzzy_classify(&softmax::rank(&probs), 0.5).unwrap());
            labels.push(ClassLabel::ALL[rng.random_range(0..4)]);
        }
        let mut grid: Vec<f64> = (0..20).map(|_| rng.random_range(0.0..=1.0)).collect();
        grid.extend([0.0, 1.0]);
        grid.sort_by(f64::total_cmp);
        let rows = fuzzy::sweep(&decisions, &labels, &grid).unwrap();
        let top1 = fuzzy::top_k_accuracy(&decisions, &labels, 1);
        let top2 = fuzzy::top_k_accuracy(&decisions, &labels, 2);
        exact &= rows[0].acc_fuzzy == top1 && rows[rows.len() - 1].acc_fuzzy == top2;
        monotone &= rows.windows(2).all(|w| w[0].acc_fuzzy <= w[1].acc_fuzzy);
    }
    Outcome::new(
        exact && monotone,
        format!("acc(0) == top-1 and acc(1) == top-2 exactly: {exact}; monotone over random grids: {monotone}"),
    )
}

fn infogain_bounds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let (mut bounded, mut refines, mut identity) = (true, true, true);
    let mut worst_refine: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(1..200);
        let k = rng.random_range(1..=4);
        let labels: Vec<ClassLabel> = (0..n).map(|_| ClassLabel::ALL[rng.random_range(0..k)]).collect();
        let noise = rng.random_range(0.0..2.0);
        let features: Vec<f64> = labels
            .iter()
            .map(|l| l.index() as f64 + noise * rng.random_range(-1.0..1.0))
            .collect();
        let h = empirical_entropy(&labels).unwrap();
        let bins = rng.random_range(1..16);
        let g = information_gain(&features, &labels, bins).unwrap().gain;
        bounded &= (0.0..=h).contains(&g);
        let fine = information_gain(&features, &labels, 2 * bins).unwrap().gain;
        worst_refine = worst_refine.max(g - fine);
        refines &= fine >= g - 1e-12;

        let exact: Vec<f64> = labels.iter().map(|l| l.index() as f64).collect();
        let stats = information_gain(&exact, &labels, 4).unwrap();
        identity &= stats.gain == h;
    }
    Outcome::new(
        bounded && refines && identity,
        format!(
            "0 <= g <= H(T) on 100 datasets: {bounded}; feature = label gives g = H(T) exactly: {identity}; refinement (max loss {worst_refine:.1e}): {refines}"
        ),
    )
}

struct Experiment {
    model: Vec<u8>,
    reports: String,
    train_report: String,
    infogain: String,
    elapsed: Duration,
}

fn experiment(dir: &Path) -> Result<Experiment, String> {
    let data = dir.join("data");
    let model = dir.join("model.txt");
    let (data_s, model_s) = (data.to_str().unwrap(), model.to_str().unwrap());
    let start = Instant::now();
    let gen = cli(&["gen", "--out", data_s, "--per-class", "250", "--noise", "0.15"])?;
    let train = cli(&["--scale", "0.25", "train", "--data", data_s, "--model", model_s])?;
    let elapsed = start.elapsed();
    let eval = cli(&["eval", "--model", model_s, "--data", data_s])?;
    let infogain = cli(&["infogain", "--data", data_s])?;
    let model_bytes = fs::read(&model).map_err(|e| e.to_string())?;
    Ok(Experiment {
        model: model_bytes,
        reports: [gen, train.clone(), eval, infogain.clone()].concat(),
        train_report: train,
        infogain,
        elapsed,
    })
}

fn end_to_end(run: &Experiment) -> Outcome {
    let top1 = report_value(&run.train_report, "accuracy").unwrap_or(f64::NAN);
    let top2 = report_value(&run.train_report, "top2_accuracy").unwrap_or(f64::NAN);
    let pass = top1 >= 0.90 && top2 >= 0.97 && run.elapsed < Duration::from_secs(300);
    Outcome::new(
        pass,
        format!(
            "held-out top-1 {top1:.4} (>= 0.90), top-2 {top2:.4} (>= 0.97), gen+train {:.1}s (< 300s)",
            run.elapsed.as_secs_f64()
        ),
    )
}

fn encoding_order(run: &Experiment) -> Outcome {
    let gain = |scheme: &str| {
        run.infogain.lines().find_map(|l| {
            let mut cols = l.split('\t');
            (cols.next() == Some(scheme)).then(|| cols.next()?.parse::<f64>().ok()).flatten()
        })
    };
    match (gain("f2"), gain("f3"), gain("f6")) {
        (Some(f2), Some(f3), Some(f6)) => Outcome::new(
            f6 >= f2 && f6 >= f3,
            format!("mean gain f6 {f6:.4} vs f2 {f2:.4}, f3 {f3:.4}"),
        ),
        _ => Outcome::new(false, "infogain report is missing a scheme"),
    }
}

fn determinism(a: &Experiment, b: &Experiment) -> Outcome {
    let same_model = a.model == b.model;
    let same_reports = a.reports == b.reports;
    Outcome::new(
        same_model && same_reports,
        format!(
            "model files identical: {same_model} ({} bytes); reports identical: {same_reports}",
            a.model.len()
        ),
    )
}

/// Renders sinusoidal ridges following `field`, one block per cell, with a
/// margin so the orientation crop lands on the rendered blocks.
fn render(field: &fpclass_core::OrientationField, block: usize, size: usize) -> GrayImage {
    let margin = (size - field.cols() * block) / 2;
    GrayImage::from_fn(size, size, |x, y| {
        let c = (x.saturating_sub(margin) / block).min(field.cols() - 1);
        let r = (y.saturating_sub(margin) / block).min(field.rows() - 1);
        let (s, co) = field.angle(r, c).sin_cos();
        let t = -(x as f64) * s + y as f64 * co;
        127.5 + 120.0 * (std::f64::consts::TAU * t / 8.0).sin()
    })
}

fn pgm_pipeline(dir: &Path) -> Result<Outcome, String> {
    let data = dir.join("pgm");
    fs::create_dir_all(&data).map_err(|e| e.to_string())?;
    let spec = SynthSpec {
        rows: 25,
        cols: 25,
        counts: [12; 4],
        noise_sigma: 0.0,
        rng_seed: 3,
    };
    let mut index = String::new();
    let mut recovered_err = 0.0;
    for i in 0..spec.total() {
        let (field, label) = synthgen::generate_sample(&spec, i).map_err(|e| e.to_string())?;
        let img = render(&field, 20, 512);
        let name = format!("{label}_{i:04}.pgm");
        fs::write(data.join(&name), write_pgm(&img)).map_err(|e| e.to_string())?;
        let estimate = block_orientation(&img, 20).map_err(|e| e.to_string())?;
        recovered_err += estimate.mean_angular_error(&field).unwrap_or(f64::NAN);
        let _ = writeln!(index, "{name}\t{label}");
    }
    fs::write(data.join("labels.tsv"), index).map_err(|e| e.to_string())?;
    let model = dir.join("pgm-model.txt");
    let (data_s, model_s) = (data.to_str().unwrap(), model.to_str().unwrap());
    let small = ["--scale", "0.1", "--sae-max-iters", "100"];
    let train = cli(&[&small[..], &["train", "--data", data_s, "--model", model_s]].concat())?;
    let eval = cli(&["eval", "--model", model_s, "--data", data_s, "--reject", "0.018"])?;
    let layout_ok = eval.starts_with("true\\assigned\tA\tL\tR\tW\n")
        && eval.contains(fuzzy::SweepRow::TSV_HEADER)
        && eval.contains("sum_threshold\tmisclassified\tnum_below\trecall")
        && report_value(&train, "accuracy").is_some();
    let acc = report_value(&eval, "accuracy").unwrap_or(f64::NAN);
    Ok(Outcome::new(
        layout_ok,
        format!(
            "512x512 PGM images -> 25x25 fields (mean angle error {:.4} rad); confusion, sweep and recall tables reported; accuracy {acc:.4} (informational)",
            recovered_err / spec.total() as f64
        ),
    ))
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = vec![
        ("gradient fidelity", gradient_fidelity()),
        ("softmax laws", softmax_laws()),
        ("kl sparsity laws", kl_laws()),
        ("fuzzy boundary identities", fuzzy_identities()),
        ("information gain bounds", infogain_bounds()),
    ];

    let tmp = tempfile::tempdir().expect("temp dir");
    // Both runs use the same path since reports echo the data directory.
    let run_dir = tmp.path().join("run");
    let first = experiment(&run_dir);
    let _ = fs::remove_dir_all(&run_dir);
    let second = experiment(&run_dir);
    match (&first, &second) {
        (Ok(a), Ok(b)) => {
            results.push(("end-to-end synthetic experiment", end_to_end(a)));
            results.push(("encoding comparison ordering", encoding_order(a)));
            results.push(("determinism", determinism(a, b)));
        }
        (Err(e), _) | (_, Err(e)) => {
            for name in ["end-to-end synthetic experiment", "encoding comparison ordering", "determinism"] {
                results.push((name, Outcome::new(false, format!("pipeline failed: {e}"))));
            }
        }
    }
    results.push((
        "image dataset pipeline",
        pgm_pipeline(tmp.path()).unwrap_or_else(|e| Outcome::new(false, format!("pipeline failed: {e}"))),
    ));

    let mut failed = 0;
    for (name, outcome) in &results {
        println!("{} {name}: {}", if outcome.pass { "PASS" } else { "FAIL" }, outcome.detail);
        failed += usize::from(!outcome.pass);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
