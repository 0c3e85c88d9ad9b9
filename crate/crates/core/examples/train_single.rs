//! Train a single-cell model and print the per-epoch curves as CSV.

use flightphase::corpus::{gen_synthetic_corpus, SyntheticSpec};
use flightphase::dataset::{prepare, PrepConfig};
use flightphase::model::ArchSpec;
use flightphase::trainer::{evaluate_pass, fit, write_curves_to, TrainConfig};

fn main() -> flightphase::Result<()> {
    let arch = std::env::args().nth(1).unwrap_or_else(|| "lstm".into());
    let docs = gen_synthetic_corpus(&SyntheticSpec {
        n: 600,
        num_classes: 4,
        vocab_size: 200,
        len_range: (20, 40),
        signal: 0.8,
        seed: 2,
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
    spec.dense_hidden = 16;
    let cfg = TrainConfig {
        epochs: 8,
        ..TrainConfig::default()
    };
    let (params, records) = fit(&spec, &data.train, &data.val, &cfg, |r| {
        eprintln!("{}", r.progress_line(cfg.epochs))
    })?;
    write_curves_to(&records, std::io::stdout())?;

    let test = evaluate_pass(&params, &spec, &data.test)?;
    println!("{arch}: test loss {:.4}, accuracy {:.4}", test.loss, test.accuracy);
    Ok(())
}
