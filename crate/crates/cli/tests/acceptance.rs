//! Acceptance suite. Each criterion prints one `[PASS]` or `[FAIL]` line; the
//! binary exits non-zero if any fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use neuroprint::data::{Condition, Dataset};
use neuroprint::dsp::design_butterworth_bandpass;
use neuroprint::eval::{channel_sweep, cross_validate, shuffled_label_control, stratified_kfold_labels, CvConfig};
use neuroprint::neurofeat::{plv, plv_contrast, speech_labels};
use neuroprint::nn::{gradient_check, squared_hinge_loss, tiny_spec, Tensor, TrainConfig};
use neuroprint::pipeline::{preprocess, PreprocessConfig};
use neuroprint::stats::{chi2_sf, kruskal_wallis, permutation_ttest, t_sf};
use neuroprint::synth::{generate, make_profiles, SynthConfig, INFORMATIVE_CHANNEL};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

type Outcome = Result<String, String>;

fn check(ok: bool, what: String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what)
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    check(elapsed < limit, format!("took {elapsed:.2?}, limit {limit:?}"))
}

fn desk_cv() -> CvConfig {
    CvConfig {
        train: TrainConfig::desk(),
        ..CvConfig::default()
    }
}

fn filter_correctness() -> Outcome {
    let t0 = Instant::now();
    let f = design_butterworth_bandpass(5, 30.0, 120.0, 250.0).map_err(|e| e.to_string())?;
    let lo = f.magnitude_db(30.0, 250.0);
    let hi = f.magnitude_db(120.0, 250.0);
    let stop = f.magnitude_db(15.0, 250.0);
    let max_pole = f.poles().iter().map(|p| p.norm()).fold(0.0, f64::max);
    check((lo + 3.01).abs() <= 0.1, format!("30 Hz edge at {lo:.4} dB"))?;
    check((hi + 3.01).abs() <= 0.1, format!("120 Hz edge at {hi:.4} dB"))?;
    check(stop <= -25.0, format!("15 Hz attenuation only {stop:.2} dB"))?;
    check(max_pole < 1.0, format!("pole radius {max_pole}"))?;
    within(t0.elapsed(), Duration::from_secs(1))?;
    Ok(format!(
        "edges {lo:.3}/{hi:.3} dB, 15 Hz {stop:.1} dB, max |pole| {max_pole:.4}"
    ))
}

fn gradient_fidelity() -> Outcome {
    let t0 = Instant::now();
    let mut parts = Vec::new();
    for spectral in [true, false] {
        let res = gradient_check(&tiny_spec(spectral), 11).map_err(|e| e.to_string())?;
        let err = res.max_rel_error().ok_or("gradient check skipped")?;
        check(err < 1e-4, format!("spectral={spectral}: max relative error {err:.3e}"))?;
        parts.push(format!("spectral={spectral} {err:.2e}"));
    }
    within(t0.elapsed(), Duration::from_secs(30))?;
    Ok(parts.join(", "))
}

fn loss_sanity() -> Outcome {
    let zeros = Tensor::zeros(&[4, 9]);
    let (l0, _) = squared_hinge_loss(&zeros, &[0, 3, 5, 8]).map_err(|e| e.to_string())?;
    check(l0 == 1.0, format!("zero scores give {l0}"))?;

    let mut met = vec![-1.5; 2 * 9];
    met[2] = 1.2;
    met[9 + 7] = 3.0;
    let met = Tensor::from_vec(&[2, 9], met).map_err(|e| e.to_string())?;
    let (lm, gm) = squared_hinge_loss(&met, &[2, 7]).map_err(|e| e.to_string())?;
    check(lm == 0.0 && gm.data().iter().all(|&g| g == 0.0), format!("met margins give {lm}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let labels = [1, 0, 4, 4, 2];
    let vals: Vec<f64> = (0..25).map(|_| StandardNormal.sample(&mut rng)).collect();
    let scores = Tensor::from_vec(&[5, 5], vals.clone()).map_err(|e| e.to_string())?;
    let (_, grad) = squared_hinge_loss(&scores, &labels).map_err(|e| e.to_string())?;
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..vals.len() {
        let mut up = vals.clone();
        let mut dn = vals.clone();
        up[i] += h;
        dn[i] -= h;
        let lu = squared_hinge_loss(&Tensor::from_vec(&[5, 5], up).unwrap(), &labels).unwrap().0;
        let ld = squared_hinge_loss(&Tensor::from_vec(&[5, 5], dn).unwrap(), &labels).unwrap().0;
        worst = worst.max(((lu - ld) / (2.0 * h) - grad.data()[i]).abs());
    }
    check(worst < 1e-6, format!("finite-difference gap {worst:.3e}"))?;
    Ok(format!("zero-score loss {l0}, met-margin loss {lm}, FD gap {worst:.1e}"))
}

fn plv_properties() -> Outcome {
    let x: Vec<f64> = (0..1000).map(|i| (2.0 * PI * 0.07 * i as f64).sin() + 0.3 * (0.011 * i as f64).cos()).collect();
    let same = plv(&x, &x).map_err(|e| e.to_string())?;
    check((same - 1.0).abs() <= 1e-9, format!("identical channels give {same}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut below = 0;
    let mut largest: f64 = 0.0;
    for _ in 0..100 {
        let a: Vec<f64> = (0..1000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..1000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let v = plv(&a, &b).map_err(|e| e.to_string())?;
        largest = largest.max(v);
        below += (v < 0.2) as usize;
    }
    check(below >= 99, format!("only {below}/100 noise pairs below 0.2"))?;

    let mut runner = TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    });
    let strategy = (2usize..200).prop_flat_map(|n| {
        (
            prop::collection::vec(-100.0f64..100.0, n),
            prop::collection::vec(-100.0f64..100.0, n),
        )
    });
    runner
        .run(&strategy, |(a, b)| {
            let ab = plv(&a, &b).unwrap();
            let ba = plv(&b, &a).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&ab), "out of bounds: {}", ab);
            prop_assert!((ab - ba).abs() <= 1e-12, "asymmetric: {} vs {}", ab, ba);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!(
        "self-PLV {same:.12}, noise < 0.2 in {below}/100 (max {largest:.3}), 1000 property cases"
    ))
}

fn statistics_oracle() -> Outcome {
    let kw = kruskal_wallis(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0], vec![7.0, 8.0, 9.0]])
        .map_err(|e| e.to_string())?;
    check((kw.statistic - 7.2).abs() <= 1e-9, format!("H = {}", kw.statistic))?;
    check((kw.p - (-3.6f64).exp()).abs() <= 1e-6, format!("p = {}", kw.p))?;
    for nu in [1, 2, 5, 30, 200] {
        let v = t_sf(0.0, nu).map_err(|e| e.to_string())?;
        check(v == 0.5, format!("t_sf(0, {nu}) = {v}"))?;
    }
    let closed = chi2_sf(4.60517, 2).map_err(|e| e.to_string())?;
    check((closed - (-4.60517f64 / 2.0).exp()).abs() <= 1e-6 && (closed - 0.1).abs() <= 1e-6, format!("chi2_sf(4.60517, 2) = {closed}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut lo: f64 = 1.0;
    let mut hi: f64 = 0.0;
    for (trial, n_perm) in [100usize, 999, 5000].into_iter().enumerate() {
        let a: Vec<f64> = (0..12).map(|_| StandardNormal.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..12).map(|_| 3.0 + Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
        for (x, y, paired) in [(&a, &b, false), (&a, &b, true), (&a, &a, true)] {
            let r = permutation_ttest(x, y, n_perm, trial as u64, paired).map_err(|e| e.to_string())?;
            let floor = 1.0 / (1 + n_perm) as f64;
            check(r.p >= floor && r.p <= 1.0, format!("p = {} with {n_perm} permutations", r.p))?;
            lo = lo.min(r.p);
            hi = hi.max(r.p);
        }
    }
    Ok(format!("H = {:.9}, p = {:.9}, permutation p in [{lo:.2e}, {hi}]", kw.statistic, kw.p))
}

fn cv_laws(imagined: &Dataset) -> Outcome {
    let mut runner = TestRunner::new(Config {
        cases: 10_000,
        failure_persistence: None,
        ..Config::default()
    });
    // every subject needs at least k epochs; fewer is a documented error
    let strategy = (2usize..10, 2usize..8, 0usize..30, any::<u64>()).prop_flat_map(|(s, k, extra, seed)| {
        (prop::collection::vec(k..=k + extra, s), Just(k), Just(seed))
    });
    runner
        .run(&strategy, |(counts, k, seed)| {
            let labels: Vec<usize> = counts.iter().enumerate().flat_map(|(s, &c)| std::iter::repeat_n(s, c)).collect();
            let folds = stratified_kfold_labels(&labels, k, seed).unwrap();
            prop_assert_eq!(folds.folds.len(), labels.len());
            let mut seen = vec![0usize; labels.len()];
            for f in 0..k {
                for i in folds.test_indices(f) {
                    seen[i] += 1;
                }
                let train = folds.train_indices(f);
                let test = folds.test_indices(f);
                prop_assert_eq!(train.len() + test.len(), labels.len());
                prop_assert!(train.iter().all(|i| !test.contains(i)));
            }
            prop_assert!(seen.iter().all(|&c| c == 1), "not a partition");
            for (s, _) in counts.iter().enumerate() {
                let per: Vec<usize> = (0..k)
                    .map(|f| folds.test_indices(f).iter().filter(|&&i| labels[i] == s).count())
                    .collect();
                let (mn, mx) = (per.iter().min().unwrap(), per.iter().max().unwrap());
                prop_assert!(mx - mn <= 1, "subject {} spread {:?}", s, per);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;

    let single = imagined.select_channels(&[INFORMATIVE_CHANNEL]).map_err(|e| e.to_string())?;
    let report = shuffled_label_control(&single, &desk_cv(), 99).map_err(|e| e.to_string())?;
    let chance = 100.0 / 9.0;
    check(
        (report.mean_accuracy - chance).abs() <= 5.0,
        format!("shuffled-label accuracy {:.2} %", report.mean_accuracy),
    )?;
    Ok(format!(
        "10000 property cases, shuffled-label accuracy {:.2} ± {:.2} % (chance {chance:.2} %)",
        report.mean_accuracy, report.std_accuracy
    ))
}

fn end_to_end(ds: &Dataset, t_synth: Duration) -> Outcome {
    let t0 = Instant::now();
    let cv = desk_cv();
    let imagined = cross_validate(&ds.filter_condition(Condition::ImaginedSpeech), &cv).map_err(|e| e.to_string())?;
    let rest = cross_validate(&ds.filter_condition(Condition::RestingState), &cv).map_err(|e| e.to_string())?;
    check(imagined.mean_accuracy >= 85.0, format!("imagined accuracy {:.2} %", imagined.mean_accuracy))?;
    check(
        rest.mean_accuracy < imagined.mean_accuracy,
        format!("rest {:.2} % not below imagined {:.2} %", rest.mean_accuracy, imagined.mean_accuracy),
    )?;

    let rows = channel_sweep(&ds.filter_condition(Condition::ImaginedSpeech), &speech_labels(), &cv)
        .map_err(|e| e.to_string())?;
    let best = rows
        .iter()
        .max_by(|a, b| a.mean_accuracy.total_cmp(&b.mean_accuracy))
        .ok_or("empty sweep")?;
    let runner_up = rows
        .iter()
        .filter(|r| r.label != best.label)
        .map(|r| r.mean_accuracy)
        .fold(f64::NEG_INFINITY, f64::max);
    check(best.label == INFORMATIVE_CHANNEL, format!("sweep ranks {} first", best.label))?;

    let (mut hits, mut injected) = (0usize, 0usize);
    for seed in 0..20 {
        let cfg = SynthConfig {
            seed,
            ..SynthConfig::default()
        };
        let d = preprocess(&generate(&cfg).map_err(|e| e.to_string())?, &PreprocessConfig::default())
            .map_err(|e| e.to_string())?;
        for profile in make_profiles(cfg.n_subjects, seed).map_err(|e| e.to_string())? {
            let r = plv_contrast(
                &d,
                Condition::ImaginedSpeech,
                Condition::RestingState,
                0.01,
                &speech_labels(),
                Some(profile.subject),
            )
            .map_err(|e| e.to_string())?;
            for lp in &profile.locked_pairs {
                injected += 1;
                hits += r.get(&lp.a, &lp.b).is_some_and(|p| p.significant) as usize;
            }
        }
    }
    let sensitivity = hits as f64 / injected as f64;
    check(sensitivity >= 0.9, format!("PLV sensitivity {hits}/{injected}"))?;

    let total = t_synth + t0.elapsed();
    within(total, Duration::from_secs(600))?;
    Ok(format!(
        "imagined {:.2} %, rest {:.2} %, sweep {} {:.2} % (next {:.2} %), PLV sensitivity {hits}/{injected}, {total:.0?}",
        imagined.mean_accuracy, rest.mean_accuracy, best.label, best.mean_accuracy, runner_up
    ))
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn cli(args: &[&str], threads: &str) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_neuroprint"))
        .args(args)
        .env("NEUROPRINT_THREADS", threads)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{:?} failed: {}", args, String::from_utf8_lossy(&out.stderr)))
    }
}

fn run_all_commands(root: &Path, threads: &str) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let p = |name: &str| root.join(name).to_string_lossy().into_owned();
    let (data, raw) = (p("data"), p("raw"));
    let train = ["--epochs", "2", "--lr", "3e-3", "--seed", "5"];
    let jobs: Vec<Vec<String>> = vec![
        vec!["synth", "--out", &data, "--subjects", "9", "--trials", "10", "--seed", "7"],
        vec!["synth", "--out", &raw, "--subjects", "3", "--trials", "4", "--seed", "7", "--raw"],
        vec!["preprocess", "--data", &raw, "--out", &p("pre")],
        [&["train", "--data", &data, "--out", &p("train")][..], &train].concat(),
        [&["train", "--data", &data, "--out", &p("shuffled"), "--shuffle-labels", "--channels", "T7"][..], &train].concat(),
        [
            &["sweep", "--data", &data, "--out", &p("sweep"), "--channels", "T7,C5,F3", "--n-perm", "200"][..],
            &train,
        ]
        .concat(),
        vec!["plv", "--data", &data, "--out", &p("plv"), "--alpha", "0.01"],
        vec!["envelope", "--data", &data, "--out", &p("envelope")],
        [&["ablate", "--data", &data, "--out", &p("ablate"), "--folds", "3"][..], &train].concat(),
    ]
    .into_iter()
    .map(|v| v.into_iter().map(str::to_string).collect())
    .collect();
    for job in &jobs {
        let args: Vec<&str> = job.iter().map(String::as_str).collect();
        cli(&args, threads)?;
    }
    Ok(read_tree(root))
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = run_all_commands(a.path(), "1")?;
    let second = run_all_commands(b.path(), "3")?;
    check(
        first.keys().eq(second.keys()),
        format!("file sets differ: {:?} vs {:?}", first.keys().collect::<Vec<_>>(), second.keys().collect::<Vec<_>>()),
    )?;
    let differing: Vec<&String> = first.iter().filter(|(k, v)| second[*k] != **v).map(|(k, _)| k).collect();
    check(differing.is_empty(), format!("bytes differ in {differing:?}"))?;
    let svgs = first.keys().filter(|k| k.ends_with(".svg")).count();
    Ok(format!(
        "7 commands, {} files ({svgs} SVG) identical across runs with 1 and 3 threads",
        first.len()
    ))
}

fn run(name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let t0 = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into()))
    });
    let secs = t0.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) => {
            println!("[PASS] {name}: {detail} ({secs:.1} s)");
            true
        }
        Err(why) => {
            println!("[FAIL] {name}: {why} ({secs:.1} s)");
            false
        }
    }
}

fn main() {
    // `cargo test` passes harness flags such as `--list`; nothing to enumerate
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let t0 = Instant::now();
    let ds = preprocess(
        &generate(&SynthConfig::default()).expect("synthesis"),
        &PreprocessConfig::default(),
    )
    .expect("preprocessing");
    let t_synth = t0.elapsed();
    let imagined = ds.filter_condition(Condition::ImaginedSpeech);

    let results = [
        run("filter correctness", filter_correctness),
        run("gradient fidelity", gradient_fidelity),
        run("loss sanity", loss_sanity),
        run("PLV properties", plv_properties),
        run("statistics oracle", statistics_oracle),
        run("CV laws", || cv_laws(&imagined)),
        run("end-to-end synthetic", || end_to_end(&ds, t_synth)),
        run("CLI determinism", determinism),
    ];
    let passed = results.iter().filter(|&&r| r).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
