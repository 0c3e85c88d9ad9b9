//! Generate a synthetic labelled corpus and turn it into encoded train/val/test splits.

use flightphase::corpus::{gen_synthetic_corpus, SplitSpec, SyntheticSpec};
use flightphase::dataset::{prepare, PrepConfig};

fn main() -> flightphase::Result<()> {
    let docs = gen_synthetic_corpus(&SyntheticSpec {
        n: 700,
        num_classes: 7,
        vocab_size: 300,
        len_range: (20, 50),
        signal: 0.8,
        seed: 1,
    })?;
    println!("{} | {}", docs[0].label, docs[0].narrative);

    let data = prepare(
        &docs,
        &PrepConfig {
            max_len: 64,
            split: SplitSpec {
                seed: 1,
                ..SplitSpec::default()
            },
            ..PrepConfig::default()
        },
    )?;
    println!("labels: {:?}", data.labels.labels());
    println!("vocabulary: {} terms", data.vocab.len());
    println!(
        "train {} / val {} / test {}",
        data.train.len(),
        data.val.len(),
        data.test.len()
    );
    println!("first encoded example: {:?}", data.train.examples[0]);
    Ok(())
}
