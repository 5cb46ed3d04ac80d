use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use fpclass_core::eval::confusion;
use fpclass_core::fuzzy::{self, FuzzyDecision};
use fpclass_core::infogain::{compare_encodings, gains_to_tsv};
use fpclass_core::orientation::{encode_features, write_field};
use fpclass_core::sae::{self, StackedEncoder};
use fpclass_core::softmax::{self, SoftmaxError};
use fpclass_core::synthgen::SynthSpec;
use fpclass_core::{ClassLabel, Encoding, Model};

use crate::data::{self, Sample};
use crate::{Command, RunConfig, Subset};

pub fn dispatch(command: &Command, cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let report = match command {
        Command::Gen {
            out: dir,
            per_class,
            noise,
            rows,
            cols,
        } => gen(dir, *per_class, *noise, *rows, *cols, cfg)?,
        Command::Train { data, model } => train(data, model, cfg)?,
        Command::Classify { model, input } => classify(model, input, cfg)?,
        Command::Eval { model, data, subset } => eval(model, data, *subset, cfg)?,
        Command::Reconstruct { model, input, out: dest } => reconstruct(model, input, dest, cfg)?,
        Command::Infogain { data, schemes } => infogain(data, schemes, cfg)?,
    };
    out.write_all(report.as_bytes())?;
    Ok(())
}

fn gen(dir: &Path, per_class: usize, noise: f64, rows: usize, cols: usize, cfg: &RunConfig) -> Result<String> {
    let spec = SynthSpec {
        rows,
        cols,
        counts: [per_class; 4],
        noise_sigma: noise,
        rng_seed: cfg.seed,
    };
    if per_class == 0 {
        eprintln!("warning: --per-class 0 writes an empty dataset");
    }
    let n = data::write_synthetic(dir, &spec)?;
    Ok(format!("wrote {n} samples to {}\n", dir.display()))
}

fn load_model(path: &Path) -> Result<Model> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading model {}", path.display()))?;
    text.parse()
        .with_context(|| format!("parsing model {}", path.display()))
}

fn grid_of(samples: &[Sample]) -> (usize, usize) {
    samples
        .first()
        .map_or((0, 0), |s| (s.field.rows(), s.field.cols()))
}

/// Ranked class probabilities for every sample.
fn rank_all(model: &Model, samples: &[Sample]) -> Result<Vec<Vec<(ClassLabel, f64)>>> {
    for s in samples {
        model.check_field(&s.field).with_context(|| s.name.clone())?;
    }
    let x = data::feature_matrix(samples);
    let codes = model.encoder.encode_batch(x.view())?;
    let probs = softmax::predict_proba_batch(&model.softmax, codes.view())?;
    Ok(probs
        .rows()
        .into_iter()
        .map(|r| softmax::rank(r.as_slice().expect("row-major")))
        .collect())
}

fn decide(model: &Model, samples: &[Sample], cfg: &RunConfig) -> Result<Vec<FuzzyDecision>> {
    rank_all(model, samples)?
        .iter()
        .map(|r| {
            let mut d = fuzzy::fuzzy_classify(r, cfg.threshold)?;
            d.flag_rescue(cfg.sum_threshold);
            Ok(d)
        })
        .collect()
}

fn accuracy_block(decisions: &[FuzzyDecision], labels: &[ClassLabel]) -> Result<String> {
    let preds: Vec<ClassLabel> = decisions.iter().map(|d| d.primary).collect();
    let rejects: Vec<bool> = decisions.iter().map(|d| d.rejected).collect();
    let cm = confusion(&preds, labels, &rejects)?;
    let mut s = cm.to_tsv();
    let _ = writeln!(s, "samples\t{}", labels.len());
    let _ = writeln!(s, "rejected\t{}", cm.n_rejected);
    let _ = writeln!(s, "accuracy\t{:.6}", cm.accuracy()?);
    let _ = writeln!(s, "top2_accuracy\t{:.6}", fuzzy::top_k_accuracy(decisions, labels, 2));
    Ok(s)
}

fn train(dir: &Path, model_path: &Path, cfg: &RunConfig) -> Result<String> {
    let samples = data::load_dataset(dir, cfg.block)?;
    ensure!(!samples.is_empty(), "dataset {} is empty", dir.display());
    let grid = grid_of(&samples);
    let (train_set, test_set) = data::split(samples, cfg.split, cfg.seed);
    ensure!(!train_set.is_empty(), "training split is empty");
    let sizes = cfg.layer_sizes()?;
    let x = data::feature_matrix(&train_set);
    let y = data::labels(&train_set);

    let encoder = if sizes.is_empty() {
        StackedEncoder::empty()
    } else {
        eprintln!("training autoencoder layers {sizes:?} on {} samples", x.nrows());
        sae::train_stack(x.view(), &sizes, &cfg.sae_hypers(sizes.len()), cfg.seed)?
    };
    let codes = encoder.encode_batch(x.view())?;
    eprintln!("training softmax on {} features", codes.ncols());
    let (sm, _) = softmax::train(codes.view(), &y, ClassLabel::COUNT, &cfg.softmax_training(), cfg.seed)
        .map_err(|e| match e {
            SoftmaxError::MissingClass(c) => anyhow::anyhow!("class {c} is missing from the training split"),
            other => other.into(),
        })?;
    let model = Model::new(encoder, sm, grid)?;
    data::write(&model_path.to_path_buf(), &model.to_text())?;

    let mut s = String::new();
    let _ = writeln!(s, "train_samples\t{}", train_set.len());
    let _ = writeln!(s, "test_samples\t{}", test_set.len());
    let _ = writeln!(
        s,
        "layers\t{}",
        if sizes.is_empty() {
            "none".into()
        } else {
            sizes.iter().map(usize::to_string).collect::<Vec<_>>().join("-")
        }
    );
    if test_set.is_empty() {
        s.push_str("no held-out samples\n");
    } else {
        let decisions = decide(&model, &test_set, cfg)?;
        s.push_str(&accuracy_block(&decisions, &data::labels(&test_set))?);
    }
    Ok(s)
}

fn classify(model_path: &Path, input: &Path, cfg: &RunConfig) -> Result<String> {
    let model = load_model(model_path)?;
    let field = data::load_field(input, cfg.block)?;
    model.check_field(&field)?;
    let ranked = model.rank_features(encode_features(&field).as_slice())?;
    let mut d = fuzzy::fuzzy_classify(&ranked, cfg.threshold)?;
    d.flag_rescue(cfg.sum_threshold);
    let probs: Vec<String> = d.ranked.iter().map(|(c, p)| format!("{c}:{p:.6}")).collect();
    Ok(format!(
        "{}\tprimary={}\tsecondary={}\trescue={}\tranked={}\n",
        input.display(),
        d.primary,
        d.secondary.map_or("-".into(), |c| c.to_string()),
        if d.rescued { "yes" } else { "no" },
        probs.join(",")
    ))
}

fn eval(model_path: &Path, dir: &Path, subset: Subset, cfg: &RunConfig) -> Result<String> {
    let model = load_model(model_path)?;
    let samples = data::load_dataset(dir, cfg.block)?;
    let samples = match subset {
        Subset::All => samples,
        Subset::Train => data::split(samples, cfg.split, cfg.seed).0,
        Subset::Test => data::split(samples, cfg.split, cfg.seed).1,
    };
    ensure!(!samples.is_empty(), "no samples to evaluate");
    let labels = data::labels(&samples);
    let mut decisions = decide(&model, &samples, cfg)?;
    fuzzy::reject_lowest(&mut decisions, cfg.reject)?;

    let mut s = accuracy_block(&decisions, &labels)?;
    if cfg.thresholds.is_empty() {
        return Ok(s);
    }
    s.push('\n');
    s.push_str(fuzzy::SweepRow::TSV_HEADER);
    s.push('\n');
    for row in fuzzy::sweep(&decisions, &labels, &cfg.thresholds)? {
        s.push_str(&row.to_tsv());
        s.push('\n');
    }
    let misclassified: Vec<(FuzzyDecision, ClassLabel)> = decisions
        .iter()
        .zip(&labels)
        .filter(|(d, l)| !d.rejected && d.primary != **l)
        .map(|(d, l)| (d.clone(), *l))
        .collect();
    let (num, recall) = fuzzy::recall_rate(&misclassified, cfg.sum_threshold);
    let _ = write!(
        s,
        "\nsum_threshold\tmisclassified\tnum_below\trecall\n{:.2}\t{}\t{}\t{:.6}\n",
        cfg.sum_threshold,
        misclassified.len(),
        num,
        recall
    );
    Ok(s)
}

fn reconstruct(model_path: &Path, input: &Path, dest: &Path, cfg: &RunConfig) -> Result<String> {
    let model = load_model(model_path)?;
    let field = data::load_field(input, cfg.block)?;
    model.check_field(&field)?;
    let (_, decoded) = sae::reconstruct(
        &model.encoder,
        encode_features(&field).as_slice(),
        field.rows(),
        field.cols(),
    )?;
    data::write(&dest.to_path_buf(), &write_field(&decoded))?;
    let err = field.mean_angular_error(&decoded);
    Ok(match err {
        Some(e) => format!("mean_angular_error\t{e:.6}\n"),
        None => "mean_angular_error\tnan\n".into(),
    })
}

fn infogain(dir: &Path, schemes: &str, cfg: &RunConfig) -> Result<String> {
    let schemes: Vec<Encoding> = schemes
        .split(',')
        .map(|s| s.parse::<Encoding>())
        .collect::<Result<_, _>>()?;
    let samples = data::load_dataset(dir, cfg.block)?;
    if samples.is_empty() {
        bail!("dataset {} is empty", dir.display());
    }
    let fields: Vec<_> = samples.iter().map(|s| s.field.clone()).collect();
    let gains = compare_encodings(&fields, &data::labels(&samples), &schemes, cfg.bins)?;
    Ok(gains_to_tsv(&gains))
}
