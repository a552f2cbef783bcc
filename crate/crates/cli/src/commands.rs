use std::path::Path;

use neuroprint::data::{load_dataset, load_recording, save_dataset, save_recording, Condition, Dataset};
use neuroprint::eval::{ablation_compare, channel_sweep, cross_validate, shuffled_label_control, EvalReport};
use neuroprint::neurofeat::{envelope_summary, plv_contrast, plv_matrix, Direction, EnvelopeSummary};
use neuroprint::pipeline::preprocess;
use neuroprint::stats::{kruskal_wallis, permutation_ttest, TestResult};
use neuroprint::synth::{generate, make_profiles};
use serde::Serialize;

use crate::args::{AblateArgs, Command, Common, CvArgs, EnvelopeArgs, PlvArgs, PreprocessArgs, SweepArgs, SynthArgs, TrainArgs};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{ensure_dir, num, write_csv, write_json, write_text};
use crate::plots::{confusion_svg, envelope_svg, plv_svg};

pub fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Preprocess(a) => preprocess_cmd(a),
        Command::Train(a) => train(a),
        Command::Sweep(a) => sweep(a),
        Command::Plv(a) => plv(a),
        Command::Envelope(a) => envelope(a),
        Command::Ablate(a) => ablate(a),
    }
}

/// Every `report.json` carries the command and the effective configuration.
#[derive(Serialize)]
struct Report<'a, T> {
    command: &'a str,
    config: &'a RunConfig,
    result: T,
}

fn write_report<T: Serialize>(out: &Path, command: &str, config: &RunConfig, result: T) -> CliResult<()> {
    write_json(&out.join("report.json"), &Report { command, config, result })
}

fn base_config(common: &Common) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    ensure_dir(&common.out)?;
    Ok(cfg)
}

fn apply_cv(cfg: &mut RunConfig, cv: &CvArgs) -> CliResult<()> {
    if let Some(k) = cv.folds {
        cfg.folds = k;
    }
    if let Some(e) = cv.epochs {
        cfg.train.epochs = e;
    }
    if let Some(lr) = cv.lr {
        cfg.train.lr = lr;
    }
    if let Some(b) = cv.batch {
        cfg.train.batch_size = b;
    }
    if cv.no_spectral_block {
        cfg.arch.use_spectral_block = false;
    }
    cfg.validate_cv()
}

fn condition_data(path: &Path, condition: Condition) -> CliResult<Dataset> {
    let ds = load_dataset(path)?.filter_condition(condition);
    if ds.is_empty() {
        return Err(CliError::data(format!("no {condition} epochs in {}", path.display())));
    }
    Ok(ds)
}

fn with_channels(ds: Dataset, channels: &Option<Vec<String>>) -> CliResult<Dataset> {
    match channels {
        Some(list) => Ok(ds.select_channels(list)?),
        None => Ok(ds),
    }
}

#[derive(Serialize)]
struct DatasetSummary {
    format: &'static str,
    subjects: usize,
    channels: Vec<String>,
    fs: f64,
    epochs: usize,
}

fn synth(a: SynthArgs) -> CliResult<()> {
    let mut cfg = base_config(&a.common)?;
    if let Some(n) = a.subjects {
        cfg.synth.subjects = n;
    }
    if let Some(n) = a.trials {
        cfg.synth.trials = n;
    }
    if let Some(fs) = a.fs {
        cfg.synth.fs = fs;
    }
    let sc = cfg.synth();
    sc.validate()?;
    let out = &a.common.out;
    let profiles = make_profiles(sc.n_subjects, sc.seed)?;
    let recording = generate(&sc)?;
    let summary = if a.raw {
        save_recording(&recording, out)?;
        DatasetSummary {
            format: "recording",
            subjects: sc.n_subjects,
            channels: recording.montage.iter().map(|c| c.label.clone()).collect(),
            fs: recording.fs,
            epochs: recording.events.len(),
        }
    } else {
        let ds = preprocess(&recording, &cfg.preprocess)?;
        save_dataset(&ds, out)?;
        DatasetSummary {
            format: "dataset",
            subjects: ds.n_subjects,
            channels: ds.channel_labels(),
            fs: ds.fs,
            epochs: ds.len(),
        }
    };
    write_json(&out.join("profiles.json"), &profiles)?;
    println!(
        "{} subjects x {} trials x {} conditions -> {} ({})",
        sc.n_subjects,
        sc.trials,
        Condition::ALL.len(),
        out.display(),
        summary.format
    );
    write_report(out, "synth", &cfg, summary)
}

fn preprocess_cmd(a: PreprocessArgs) -> CliResult<()> {
    let cfg = base_config(&a.common)?;
    let recording = load_recording(&a.data)?;
    let ds = preprocess(&recording, &cfg.preprocess)?;
    let out = &a.common.out;
    save_dataset(&ds, out)?;
    println!("{} epochs at {} Hz -> {}", ds.len(), ds.fs, out.display());
    write_report(
        out,
        "preprocess",
        &cfg,
        DatasetSummary {
            format: "dataset",
            subjects: ds.n_subjects,
            channels: ds.channel_labels(),
            fs: ds.fs,
            epochs: ds.len(),
        },
    )
}

fn print_accuracy(label: &str, r: &EvalReport) {
    println!(
        "{label}: {:.2} ± {:.2} % over {} folds (chance {:.2} %)",
        r.mean_accuracy,
        r.std_accuracy,
        r.fold_accuracy.len(),
        r.chance
    );
}

fn train(a: TrainArgs) -> CliResult<()> {
    let mut cfg = base_config(&a.common)?;
    apply_cv(&mut cfg, &a.cv)?;
    let ds = with_channels(condition_data(&a.cv.data, a.cv.condition)?, &a.channels)?;
    let cv = cfg.cv();
    let report = if a.shuffle_labels {
        shuffled_label_control(&ds, &cv, cfg.seed)?
    } else {
        cross_validate(&ds, &cv)?
    };
    let out = &a.common.out;

    let folds: Vec<Vec<String>> = report
        .fold_accuracy
        .iter()
        .enumerate()
        .map(|(i, &acc)| vec![i.to_string(), num(acc)])
        .collect();
    write_csv(&out.join("folds.csv"), &["fold", "accuracy"], &folds)?;

    let n = report.confusion.len();
    let mut header = vec!["true".to_string()];
    header.extend((0..n).map(|j| format!("S{j}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = report
        .confusion
        .iter()
        .enumerate()
        .map(|(i, row)| std::iter::once(format!("S{i}")).chain(row.iter().map(u64::to_string)).collect())
        .collect();
    write_csv(&out.join("confusion.csv"), &header, &rows)?;

    let label = if a.shuffle_labels {
        format!("{} (shuffled labels)", a.cv.condition)
    } else {
        a.cv.condition.to_string()
    };
    let title = format!("{label}: {:.2} ± {:.2} %", report.mean_accuracy, report.std_accuracy);
    write_text(&out.join("confusion.svg"), &confusion_svg(&report, &title))?;
    print_accuracy(&label, &report);
    write_report(out, "train", &cfg, &report)
}

#[derive(Serialize)]
struct SweepEntry {
    rank: usize,
    channel: String,
    mean_accuracy: f64,
    std_accuracy: f64,
    fold_accuracy: Vec<f64>,
    /// Paired permutation test against the top channel over shared folds.
    vs_best: Option<TestResult>,
    significant: bool,
}

#[derive(Serialize)]
struct SweepResult {
    condition: Condition,
    kruskal_wallis: TestResult,
    alpha: f64,
    rows: Vec<SweepEntry>,
}

fn sweep(a: SweepArgs) -> CliResult<()> {
    let mut cfg = base_config(&a.common)?;
    apply_cv(&mut cfg, &a.cv)?;
    if let Some(alpha) = a.alpha {
        cfg.alpha = alpha;
    }
    if let Some(n) = a.n_perm {
        cfg.n_perm = n;
    }
    cfg.validate_alpha()?;
    let ds = condition_data(&a.cv.data, a.cv.condition)?;
    let labels = a.channels.clone().unwrap_or_else(|| ds.channel_labels());
    if labels.len() < 2 {
        return Err(CliError::config("channels: a sweep needs at least 2 channels"));
    }
    let mut rows = channel_sweep(&ds, &labels, &cfg.cv())?;
    // stable: ties keep the requested channel order
    rows.sort_by(|x, y| y.mean_accuracy.total_cmp(&x.mean_accuracy));

    let groups: Vec<&[f64]> = rows.iter().map(|r| r.report.fold_accuracy.as_slice()).collect();
    let kw = kruskal_wallis(&groups)?;
    let best = rows[0].report.fold_accuracy.clone();
    let mut entries = Vec::with_capacity(rows.len());
    for (rank, row) in rows.into_iter().enumerate() {
        let vs_best = if rank == 0 {
            None
        } else {
            Some(permutation_ttest(&best, &row.report.fold_accuracy, cfg.n_perm, cfg.seed, true)?)
        };
        let significant = vs_best.as_ref().is_some_and(|t| t.p < cfg.alpha);
        entries.push(SweepEntry {
            rank: rank + 1,
            channel: row.label,
            mean_accuracy: row.mean_accuracy,
            std_accuracy: row.std_accuracy,
            fold_accuracy: row.report.fold_accuracy,
            vs_best,
            significant,
        });
    }

    let out = &a.common.out;
    let csv_rows: Vec<Vec<String>> = entries
        .iter()
        .map(|e| {
            let (t, p) = e.vs_best.as_ref().map_or((String::new(), String::new()), |r| (num(r.statistic), num(r.p)));
            vec![
                e.rank.to_string(),
                e.channel.clone(),
                num(e.mean_accuracy),
                num(e.std_accuracy),
                t,
                p,
                e.significant.to_string(),
            ]
        })
        .collect();
    write_csv(
        &out.join("sweep.csv"),
        &["rank", "channel", "mean_accuracy", "std_accuracy", "t_vs_best", "p_vs_best", "significant"],
        &csv_rows,
    )?;

    println!("{} single-channel sweep:", a.cv.condition);
    for e in &entries {
        let p = e.vs_best.as_ref().map_or(String::new(), |r| format!("  p={:.4}", r.p));
        println!("  {:>2}. {:<5} {:6.2} ± {:5.2} %{p}", e.rank, e.channel, e.mean_accuracy, e.std_accuracy);
    }
    println!("Kruskal-Wallis H = {:.3}, p = {:.4}", kw.statistic, kw.p);
    write_report(
        out,
        "sweep",
        &cfg,
        SweepResult {
            condition: a.cv.condition,
            kruskal_wallis: kw,
            alpha: cfg.alpha,
            rows: entries,
        },
    )
}

fn direction_str(d: Direction) -> &'static str {
    match d {
        Direction::Increase => "increase",
        Direction::Decrease => "decrease",
        Direction::None => "none",
    }
}

#[derive(Serialize)]
struct PlvPairOut {
    a: String,
    b: String,
    plv_condition: f64,
    plv_baseline: f64,
    mean_difference: f64,
    t: f64,
    p: f64,
    significant: bool,
    direction: Direction,
}

#[derive(Serialize)]
struct PlvOut {
    condition: Condition,
    baseline: Condition,
    subject: Option<usize>,
    alpha: f64,
    n_pairs: usize,
    n_significant: usize,
    pairs: Vec<PlvPairOut>,
}

fn plv(a: PlvArgs) -> CliResult<()> {
    let mut cfg = base_config(&a.common)?;
    if let Some(alpha) = a.alpha {
        cfg.alpha = alpha;
    }
    cfg.validate_alpha()?;
    if a.condition == a.baseline {
        return Err(CliError::config("baseline: must differ from condition"));
    }
    let ds = load_dataset(&a.data)?;
    let labels = match &a.channels {
        Some(list) => ds.select_channels(list)?.channel_labels(),
        None => ds.channel_labels(),
    };
    if labels.len() < 2 {
        return Err(CliError::config("channels: PLV needs at least 2 channels"));
    }
    let contrast = plv_contrast(&ds, a.condition, a.baseline, cfg.alpha, &labels, a.subject)?;
    let ma = plv_matrix(&ds, a.condition, &labels, a.subject)?;
    let mb = plv_matrix(&ds, a.baseline, &labels, a.subject)?;

    let pairs: Vec<PlvPairOut> = contrast
        .pairs
        .iter()
        .zip(ma.pairs.iter().zip(&mb.pairs))
        .map(|(c, (pa, pb))| PlvPairOut {
            a: c.a.clone(),
            b: c.b.clone(),
            plv_condition: pa.mean,
            plv_baseline: pb.mean,
            mean_difference: c.mean_difference,
            t: c.t,
            p: c.p,
            significant: c.significant,
            direction: c.direction,
        })
        .collect();

    let out = &a.common.out;
    let rows: Vec<Vec<String>> = pairs
        .iter()
        .map(|p| {
            vec![
                p.a.clone(),
                p.b.clone(),
                num(p.plv_condition),
                num(p.plv_baseline),
                num(p.mean_difference),
                num(p.t),
                num(p.p),
                p.significant.to_string(),
                direction_str(p.direction).to_string(),
            ]
        })
        .collect();
    write_csv(
        &out.join("plv.csv"),
        &["a", "b", "plv_condition", "plv_baseline", "mean_difference", "t", "p", "significant", "direction"],
        &rows,
    )?;
    let scope = a.subject.map_or("all subjects".to_string(), |s| format!("subject {s}"));
    let title = format!("PLV {} vs {} ({scope})", a.condition, a.baseline);
    write_text(&out.join("plv.svg"), &plv_svg(&contrast, &labels, &title))?;

    println!(
        "{} vs {} ({scope}): {} of {} channel pairs differ at p < {} over {} paired trials",
        a.condition,
        a.baseline,
        contrast.n_significant(),
        contrast.pairs.len(),
        cfg.alpha,
        contrast.n_pairs
    );
    for p in pairs.iter().filter(|p| p.significant) {
        println!(
            "  {}-{}: {:.3} vs {:.3}, t = {:.2}, p = {:.2e}",
            p.a, p.b, p.plv_condition, p.plv_baseline, p.t, p.p
        );
    }
    write_report(
        out,
        "plv",
        &cfg,
        PlvOut {
            condition: a.condition,
            baseline: a.baseline,
            subject: a.subject,
            alpha: cfg.alpha,
            n_pairs: contrast.n_pairs,
            n_significant: contrast.n_significant(),
            pairs,
        },
    )
}

fn envelope(a: EnvelopeArgs) -> CliResult<()> {
    let cfg = base_config(&a.common)?;
    let ds = with_channels(condition_data(&a.data, a.condition)?, &a.channels)?;
    let subjects: Vec<usize> = match a.subject {
        Some(s) => vec![s],
        None => {
            let set: std::collections::BTreeSet<usize> = ds.epochs.iter().map(|e| e.subject).collect();
            set.into_iter().collect()
        }
    };
    let summaries: Vec<EnvelopeSummary> = subjects
        .iter()
        .map(|&s| envelope_summary(&ds, a.condition, s))
        .collect::<Result<_, _>>()?;

    let out = &a.common.out;
    let mut rows = Vec::new();
    for s in &summaries {
        for i in 0..s.times_ms.len() {
            rows.push(vec![
                s.subject.to_string(),
                num(s.times_ms[i]),
                num(s.mean[i]),
                num(s.lower[i]),
                num(s.upper[i]),
            ]);
        }
    }
    write_csv(&out.join("envelope.csv"), &["subject", "time_ms", "mean", "lower", "upper"], &rows)?;
    let title = format!("High-gamma envelope, {}", a.condition);
    write_text(&out.join("envelope.svg"), &envelope_svg(&summaries, &title))?;

    println!("{} envelope peaks:", a.condition);
    for s in &summaries {
        let (i, peak) = s
            .mean
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        println!("  S{}: {:.3} uV at {:.0} ms ({} trials)", s.subject, peak, s.times_ms[i], s.n_trials);
    }
    write_report(out, "envelope", &cfg, &summaries)
}

fn ablate(a: AblateArgs) -> CliResult<()> {
    let mut cfg = base_config(&a.common)?;
    apply_cv(&mut cfg, &a.cv)?;
    let ds = condition_data(&a.cv.data, a.cv.condition)?;
    let arms = ablation_compare(&ds, &a.channel, &cfg.cv())?;
    let out = &a.common.out;
    let rows: Vec<Vec<String>> = arms
        .iter()
        .map(|arm| {
            vec![
                arm.channels.clone(),
                arm.spectral_block.to_string(),
                num(arm.report.mean_accuracy),
                num(arm.report.std_accuracy),
            ]
        })
        .collect();
    write_csv(
        &out.join("ablation.csv"),
        &["channels", "spectral_block", "mean_accuracy", "std_accuracy"],
        &rows,
    )?;
    for arm in &arms {
        let block = if arm.spectral_block { "with" } else { "without" };
        let chans = if arm.channels == "all" {
            "all channels".to_string()
        } else {
            format!("{} only", arm.channels)
        };
        print_accuracy(&format!("{chans}, {block} spectral block"), &arm.report);
    }
    write_report(out, "ablate", &cfg, &arms)
}
