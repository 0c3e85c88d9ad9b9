//! Train a stacked model (LSTM feeding a BiLSTM by default) and print its classification report.

use flightphase::corpus::{gen_synthetic_corpus, SyntheticSpec};
use flightphase::dataset::{prepare, PrepConfig};
use flightphase::evaluator::{render_report, ClassReport};
use flightphase::model::ArchSpec;
use flightphase::trainer::{evaluate_pass, fit, TrainConfig};

fn main() -> flightphase::Result<()> {
    let arch = std::env::args().nth(1).unwrap_or_else(|| "lstm+bilstm".into());
    let docs = gen_synthetic_corpus(&SyntheticSpec {
        n: 700,
        num_classes: 7,
        vocab_size: 300,
        len_range: (20, 40),
        signal: 0.7,
        seed: 3,
    })?;
    let data = prepare(
        &docs,
        &PrepConfig {
            max_len: 40,
            ..PrepConfig::default()
        },
    )?;

    let mut spec = ArchSpec::new(&arch, data.vocab.len(), data.labels.len(), 40)?;
    spec.embed_dim = 16;
    spec.hidden = 16;
    spec.dense_hidden = 32;
    println!("{} parameters in {arch}", spec.param_count());
    let cfg = TrainConfig {
        epochs: 6,
        ..TrainConfig::default()
    };
    let (params, _) = fit(&spec, &data.train, &data.val, &cfg, |r| {
        eprintln!("{}", r.progress_line(cfg.epochs))
    })?;

    let test = evaluate_pass(&params, &spec, &data.test)?;
    let truth: Vec<usize> = data.test.examples.iter().map(|e| e.label).collect();
    let report = ClassReport::from_predictions(&truth, &test.predictions, &data.labels)?;
    print!("{}", render_report(&report));
    Ok(())
}
