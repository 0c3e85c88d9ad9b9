//! Acceptance suite. Runs every criterion in order and prints one
//! `criterion N: PASS|FAIL` line each. Pass numbers or substrings of the
//! criterion titles as arguments to run a subset.

use std::io::Write;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use flightphase::corpus::{gen_synthetic_corpus, label_inventory, write_csv, Document, SplitSpec, SyntheticSpec};
use flightphase::dataset::{encode_documents, prepare, PrepConfig};
use flightphase::evaluator::{
    aggregate, confusion, per_class_metrics, render_report, Averages, ClassMetrics, ClassReport,
};
use flightphase::model::{
    build, gradient_check, load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint,
    ArchSpec, NAMED_VARIANTS,
};
use flightphase::tensor::Rng;
use flightphase::textprep::{
    build_vocab, encode_sequence, normalize, Truncate, DEFAULT_MAX_TERMS, OOV_ID, PAD_ID,
};
use flightphase::trainer::{evaluate_pass, fit, TrainConfig};
use flightphase::Error;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

type Outcome = Result<String, String>;

struct Criterion {
    number: u32,
    title: &'static str,
    run: fn() -> Outcome,
}

const CRITERIA: [Criterion; 9] = [
    Criterion { number: 1, title: "gradient verification", run: gradient_verification },
    Criterion { number: 2, title: "metric oracle equivalence", run: metric_oracle },
    Criterion { number: 3, title: "preprocessing contract", run: preprocessing_contract },
    Criterion { number: 4, title: "random-guess baseline", run: random_guess_baseline },
    Criterion { number: 5, title: "overfit smoke", run: overfit_smoke },
    Criterion { number: 6, title: "determinism", run: determinism },
    Criterion { number: 7, title: "report fidelity", run: report_fidelity },
    Criterion { number: 8, title: "checkpoint round trip", run: checkpoint_round_trip },
    Criterion { number: 9, title: "end-to-end at paper scale", run: paper_scale_pipeline },
];

fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let selected = |c: &Criterion| {
        filters.is_empty()
            || filters
                .iter()
                .any(|f| *f == c.number.to_string() || c.title.contains(f.as_str()))
    };
    let mut failed = 0;
    let mut out = std::io::stdout();
    for c in CRITERIA.iter().filter(|c| selected(c)) {
        let start = Instant::now();
        let outcome = (c.run)();
        let secs = start.elapsed().as_secs_f64();
        let (status, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        failed += usize::from(outcome.is_err());
        writeln!(out, "criterion {}: {status} [{secs:.1}s] {}: {detail}", c.number, c.title).unwrap();
        out.flush().unwrap();
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, budget: Duration, what: &str) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took < budget, || format!("{what} took {took:.1?}, budget {budget:?}"))
}

fn synth(n: usize, classes: usize, vocab_size: usize, len_range: (usize, usize), signal: f64, seed: u64) -> Vec<Document> {
    gen_synthetic_corpus(&SyntheticSpec {
        n,
        num_classes: classes,
        vocab_size,
        len_range,
        signal,
        seed,
    })
    .expect("valid synthetic spec")
}

fn gradient_verification() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for name in NAMED_VARIANTS {
        let spec = ArchSpec {
            cells: name.parse().map_err(|e: Error| e.to_string())?,
            embed_dim: 2,
            hidden: 2,
            dense_hidden: 3,
            num_classes: 3,
            max_len: 4,
            vocab_size: 6,
        };
        for seed in 0..5 {
            let err = gradient_check(&spec, seed).map_err(|e| e.to_string())?;
            ensure(err < 1e-4, || format!("{name} seed {seed}: relative error {err:e}"))?;
            worst = worst.max(err);
        }
    }
    within(start, Duration::from_secs(60), "gradient checks")?;
    Ok(format!("7 variants x 5 seeds, worst relative error {worst:.2e}"))
}

/// One-vs-rest counts obtained by scanning the (truth, prediction) pairs.
fn pair_count_oracle(pairs: &[(usize, usize)], classes: usize) -> (Vec<[f64; 4]>, f64, [f64; 3], [f64; 3]) {
    let n = pairs.len() as f64;
    let div = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let mut rows = Vec::new();
    for c in 0..classes {
        let tp = pairs.iter().filter(|&&(t, p)| t == c && p == c).count();
        let fp = pairs.iter().filter(|&&(t, p)| t != c && p == c).count();
        let fn_ = pairs.iter().filter(|&&(t, p)| t == c && p != c).count();
        let precision = div(tp, tp + fp);
        let recall = div(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        rows.push([precision, recall, f1, (tp + fn_) as f64]);
    }
    let accuracy = pairs.iter().filter(|&&(t, p)| t == p).count() as f64 / n;
    let mut macro_avg = [0.0; 3];
    let mut weighted = [0.0; 3];
    for r in &rows {
        for j in 0..3 {
            macro_avg[j] += r[j] / classes as f64;
            weighted[j] += r[j] * r[3] / n;
        }
    }
    (rows, accuracy, macro_avg, weighted)
}

fn metric_oracle() -> Outcome {
    let start = Instant::now();
    let strategy = (2usize..=10).prop_flat_map(|c| {
        (
            Just(c),
            prop::collection::vec((0..c, 0..c), 1..=200),
        )
    });
    let mut runner = TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    });
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    runner
        .run(&strategy, |(classes, pairs)| {
            let y_true: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let y_pred: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            let cm = confusion(&y_true, &y_pred, classes).unwrap();
            for i in 0..classes {
                for j in 0..classes {
                    let naive = pairs.iter().filter(|&&p| p == (i, j)).count() as u64;
                    prop_assert_eq!(cm.get(i, j), naive);
                }
            }
            let per_class = per_class_metrics(&cm);
            let agg = aggregate(&per_class, &cm).unwrap();
            let (rows, accuracy, macro_avg, weighted) = pair_count_oracle(&pairs, classes);
            for (m, r) in per_class.iter().zip(&rows) {
                prop_assert!(close(m.precision, r[0]) && close(m.recall, r[1]) && close(m.f1, r[2]));
                prop_assert_eq!(m.support as f64, r[3]);
            }
            let got = |a: &Averages| [a.precision, a.recall, a.f1];
            prop_assert!(close(agg.accuracy, accuracy));
            for j in 0..3 {
                prop_assert!(close(got(&agg.macro_avg)[j], macro_avg[j]));
                prop_assert!(close(got(&agg.weighted_avg)[j], weighted[j]));
            }
            prop_assert_eq!(agg.weighted_avg.recall.to_bits(), agg.accuracy.to_bits());
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    within(start, Duration::from_secs(10), "metric oracle")?;
    Ok("1000 instances agree to 1e-12; weighted recall == accuracy bitwise".into())
}

const LEXICON: [&str; 24] = [
    "aircraft", "landing", "runway", "approach", "the", "and", "was", "taxiing",
    "takeoff", "engine", "failure", "pilot", "climbed", "descended", "gear", "collapsed",
    "fl350", "1500", "ft", "crew", "reported", "bird", "strike", "on",
];

fn narrative() -> impl Strategy<Value = String> {
    let word = prop_oneof![
        prop::sample::select(LEXICON.to_vec()).prop_map(str::to_string),
        "[a-zA-Z0-9]{1,10}",
        "[ -~]{1,6}",
    ];
    prop_oneof![
        "[ -~]{0,300}",
        "\\PC{0,200}",
        prop::collection::vec(word, 0..150).prop_map(|w| w.join(" ")),
    ]
}

fn preprocessing_contract() -> Outcome {
    let strategy = (
        narrative(),
        prop::collection::vec(narrative(), 0..4),
        1usize..80,
        1usize..40,
        any::<bool>(),
    );
    let mut runner = TestRunner::new(Config {
        cases: 10_000,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&strategy, |(text, others, max_len, cap, tail)| {
            let tokens = normalize(&text);
            let mut lists: Vec<Vec<String>> = others.iter().map(|o| normalize(o)).collect();
            lists.push(tokens.clone());
            let vocab = build_vocab(&lists, cap).unwrap();
            prop_assert!(vocab.len() <= cap);
            let truncate = if tail { Truncate::Tail } else { Truncate::Head };
            let ids = encode_sequence(&tokens, &vocab, max_len, truncate);
            prop_assert_eq!(ids.len(), max_len);

            let n = tokens.len();
            let kept: &[String] = if n <= max_len {
                &tokens
            } else if tail {
                &tokens[n - max_len..]
            } else {
                &tokens[..max_len]
            };
            let pad = max_len - kept.len();
            prop_assert!(ids[..pad].iter().all(|&i| i == PAD_ID));
            for (id, tok) in ids[pad..].iter().zip(kept) {
                prop_assert_ne!(*id, PAD_ID);
                prop_assert!((*id as usize) < vocab.num_ids());
                match vocab.id(tok) {
                    Some(expected) => prop_assert_eq!(*id, expected),
                    None => prop_assert_eq!(*id, OOV_ID),
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    ensure(DEFAULT_MAX_TERMS == 100_000, || format!("default cap {DEFAULT_MAX_TERMS}"))?;
    Ok("10000 random narratives: exact length, front padding, truncation, vocabulary cap".into())
}

fn random_guess_baseline() -> Outcome {
    let start = Instant::now();
    let docs = synth(2000, 7, 500, (20, 50), 0.9, 7);
    let data = prepare(
        &docs,
        &PrepConfig {
            max_len: 64,
            split: SplitSpec {
                seed: 7,
                ..SplitSpec::default()
            },
            ..PrepConfig::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        epochs: 20,
        ..TrainConfig::default()
    };
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for name in NAMED_VARIANTS {
        let mut spec = ArchSpec::new(name, data.vocab.len(), data.labels.len(), 64)
            .map_err(|e| e.to_string())?;
        spec.embed_dim = 32;
        spec.hidden = 32;
        let (params, _) = fit(&spec, &data.train, &data.val, &cfg, |_| {}).map_err(|e| e.to_string())?;
        let acc = evaluate_pass(&params, &spec, &data.test)
            .map_err(|e| e.to_string())?
            .accuracy;
        let floor = if name == "lstm" { 0.90 } else { 0.50 };
        if acc < floor {
            failures.push(format!("{name} {acc:.4} < {floor}"));
        }
        lines.push(format!("{name}={acc:.4}"));
    }
    let summary = lines.join(" ");
    ensure(failures.is_empty(), || format!("{} ({summary})", failures.join(", ")))?;
    within(start, Duration::from_secs(600), "seven 20-epoch runs")?;
    Ok(format!("test accuracy {summary}"))
}

fn overfit_smoke() -> Outcome {
    let docs = synth(32, 4, 200, (20, 50), 0.9, 11);
    let labels = label_inventory(&docs);
    let tokens: Vec<Vec<String>> = docs.iter().map(|d| normalize(&d.narrative)).collect();
    let vocab = build_vocab(&tokens, 200).map_err(|e| e.to_string())?;
    let train_set = encode_documents(&docs, &vocab, &labels, 32, Truncate::Head).map_err(|e| e.to_string())?;
    let empty = flightphase::dataset::Dataset::new(32, labels.len(), vec![]).map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        epochs: 200,
        batch_size: 4,
        seed: 3,
        ..TrainConfig::default()
    };
    let mut lines = Vec::new();
    for name in ["lstm", "gru", "bilstm"] {
        let start = Instant::now();
        let mut spec = ArchSpec::new(name, vocab.len(), labels.len(), 32).map_err(|e| e.to_string())?;
        spec.embed_dim = 16;
        spec.hidden = 16;
        spec.dense_hidden = 16;
        let (_, records) = fit(&spec, &train_set, &empty, &cfg, |_| {}).map_err(|e| e.to_string())?;
        let hit = records.iter().find(|r| r.train_accuracy == 1.0).map(|r| r.epoch);
        let best = records.iter().map(|r| r.train_accuracy).fold(0.0, f64::max);
        let epoch = hit.ok_or_else(|| format!("{name} peaked at train accuracy {best:.4}"))?;
        within(start, Duration::from_secs(120), name)?;
        lines.push(format!("{name}@{epoch}"));
    }
    Ok(format!("train accuracy 1.0 reached at epoch {}", lines.join(" ")))
}

fn run_cli(args: &[&str], cwd: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_flightphase"))
        .args(args)
        .current_dir(cwd)
        .env_remove("FPNN_SEED")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(status.status.success(), || {
        format!(
            "flightphase {} failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&status.stderr)
        )
    })
}

fn determinism() -> Outcome {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let produced = ["data/train.bin", "data/val.bin", "data/test.bin", "data/vocab.tsv", "data/labels.txt", "run/model.fpnn", "run/curves.csv"];
    let mut runs = Vec::new();
    for run in ["a", "b"] {
        let dir = root.path().join(run);
        std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
        run_cli(&["synth", "--out", "corpus.csv", "--n", "140", "--classes", "7", "--vocab-size", "120", "--signal", "0.8", "--seed", "5"], &dir)?;
        run_cli(&["prepare", "--input", "corpus.csv", "--out", "data", "--max-len", "24", "--seed", "5"], &dir)?;
        run_cli(&["train", "--data", "data", "--arch", "gru+lstm", "--epochs", "2", "--embed-dim", "8", "--hidden", "8", "--dense", "8", "--seed", "5", "--out", "run/model.fpnn", "--curves", "run/curves.csv"], &dir)?;
        let bytes = produced
            .iter()
            .map(|f| std::fs::read(dir.join(f)).map_err(|e| format!("{f}: {e}")))
            .collect::<Result<Vec<_>, _>>()?;
        runs.push(bytes);
    }
    for (i, f) in produced.iter().enumerate() {
        ensure(runs[0][i] == runs[1][i], || format!("{f} differs between runs"))?;
    }
    Ok(format!("{} artifacts byte-identical across two runs", produced.len()))
}

fn fig7_report() -> ClassReport {
    let rows = [
        ("Approach", 0.45, 0.47, 0.46, 89),
        ("Enroute", 0.59, 0.47, 0.52, 149),
        ("Landing", 0.82, 0.85, 0.84, 338),
        ("Standing", 0.65, 0.64, 0.65, 81),
        ("Takeoff", 0.53, 0.70, 0.60, 87),
        ("Taxi", 0.46, 0.41, 0.44, 41),
        ("Unknown", 0.24, 0.21, 0.22, 72),
    ];
    ClassReport {
        labels: rows.iter().map(|r| r.0.to_string()).collect(),
        classes: rows
            .iter()
            .map(|&(_, precision, recall, f1, support)| ClassMetrics {
                precision,
                recall,
                f1,
                support,
            })
            .collect(),
        accuracy: 0.67,
        macro_avg: Averages {
            precision: 0.56,
            recall: 0.57,
            f1: 0.56,
        },
        weighted_avg: Averages {
            precision: 0.66,
            recall: 0.67,
            f1: 0.66,
        },
        total_support: 857,
    }
}

fn report_fidelity() -> Outcome {
    let rendered = render_report(&fig7_report());
    let landing = rendered
        .lines()
        .find(|l| l.trim_start().starts_with("Landing"))
        .ok_or("no Landing line")?;
    let fields: Vec<&str> = landing.split_whitespace().collect();
    ensure(fields == ["Landing", "0.82", "0.85", "0.84", "338"], || format!("Landing line {landing:?}"))?;
    let golden = include_str!("golden/fig7_report.txt");
    ensure(rendered == golden, || format!("layout differs from golden file:\n{rendered}"))?;
    Ok(format!("{:?} and full layout match the golden file", landing.trim()))
}

fn checkpoint_round_trip() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for (i, name) in NAMED_VARIANTS.iter().enumerate() {
        let mut spec = ArchSpec::new(name, 23, 5, 7).map_err(|e| e.to_string())?;
        spec.embed_dim = 6;
        spec.hidden = 5;
        spec.dense_hidden = 4;
        let params = build(&spec, &mut Rng::new(i as u64)).map_err(|e| e.to_string())?;
        let path = dir.path().join(format!("{i}.fpnn"));
        save_checkpoint(&params, &spec, Some("vocab.tsv"), &path).map_err(|e| e.to_string())?;
        let back = load_checkpoint(&path).map_err(|e| e.to_string())?;
        let bits = |v: Vec<f64>| v.into_iter().map(f64::to_bits).collect::<Vec<_>>();
        ensure(bits(back.params.flatten()) == bits(params.flatten()), || format!("{name}: parameters changed"))?;
        ensure(back.spec == spec && back.vocab.as_deref() == Some("vocab.tsv"), || format!("{name}: header changed"))?;

        let bytes = write_checkpoint(&params, &spec, None).map_err(|e| e.to_string())?;
        let mut bad_magic = bytes.clone();
        bad_magic[0] ^= 0xff;
        ensure(matches!(read_checkpoint(&bad_magic), Err(Error::Format { .. })), || format!("{name}: corrupted magic accepted"))?;
        for cut in [bytes.len() - 1, bytes.len() - 8, bytes.len() / 2, 10] {
            ensure(matches!(read_checkpoint(&bytes[..cut]), Err(Error::Format { .. })), || {
                format!("{name}: file truncated to {cut} bytes accepted")
            })?;
        }
    }
    Ok("7 variants bitwise lossless; bad magic and truncation rejected as format errors".into())
}

const PHASES: [&str; 7] = ["Approach", "Enroute", "Landing", "Standing", "Takeoff", "Taxi", "Unknown"];

fn peak_rss_kib() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}

fn paper_scale_pipeline() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut docs = synth(4000, 7, 3000, (30, 400), 0.3, 21);
    for d in &mut docs {
        let class: usize = d.label.trim_start_matches("class_").parse().unwrap();
        d.label = PHASES[class].to_string();
    }
    let csv = dir.path().join("asn.csv");
    write_csv(&docs, std::fs::File::create(&csv).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;

    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let cli = |args: &[&str]| {
        let mut argv = vec!["flightphase"];
        argv.extend_from_slice(args);
        match flightphase::cli::run(argv) {
            0 => Ok(()),
            code => Err(format!("{} exited with {code}", args[0])),
        }
    };
    cli(&["prepare", "--input", &p("asn.csv"), "--out", &p("data"), "--max-len", "2000", "--vocab-size", "100000", "--seed", "1"])?;
    cli(&["train", "--data", &p("data"), "--arch", "lstm", "--epochs", "1", "--embed-dim", "16", "--hidden", "16", "--dense", "16", "--seed", "1", "--out", &p("model.fpnn")])?;
    cli(&["evaluate", "--model", &p("model.fpnn"), "--data", &p("data"), "--report", &p("report.txt"), "--json", &p("report.json")])?;

    let report = std::fs::read_to_string(p("report.txt")).map_err(|e| e.to_string())?;
    for row in PHASES.iter().chain(&["accuracy", "macro avg", "weighted avg"]) {
        ensure(report.lines().any(|l| l.trim_start().starts_with(row)), || format!("report lacks a {row} row"))?;
    }
    let peak = peak_rss_kib().ok_or("VmHWM unavailable")?;
    let limit = 8 * 1024 * 1024;
    ensure(peak < limit, || format!("peak resident memory {peak} KiB exceeds 8 GiB"))?;
    Ok(format!("4000 records, max_len 2000, full report written; peak RSS {} MiB", peak / 1024))
}
