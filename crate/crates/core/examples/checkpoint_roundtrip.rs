//! Save a model checkpoint, load it back and check that predictions are unchanged.

use flightphase::model::{build, load_checkpoint, predict, save_checkpoint, ArchSpec};
use flightphase::tensor::Rng;

fn main() -> flightphase::Result<()> {
    let mut spec = ArchSpec::new("gru+bilstm+lstm", 50, 7, 12)?;
    spec.embed_dim = 8;
    spec.hidden = 8;
    spec.dense_hidden = 8;
    let params = build(&spec, &mut Rng::new(42))?;

    let path = std::env::temp_dir().join("flightphase-example.fpnn");
    save_checkpoint(&params, &spec, Some("vocab.tsv"), &path)?;
    let loaded = load_checkpoint(&path)?;
    println!(
        "{}: {} bytes, {} parameters, vocab {:?}",
        path.display(),
        std::fs::metadata(&path)?.len(),
        loaded.params.param_count(),
        loaded.vocab
    );

    let ids: Vec<u32> = (0..12).map(|i| (i * 7 % 52) as u32).collect();
    let before = predict(&params, &spec, &ids)?;
    let after = predict(&loaded.params, &loaded.spec, &ids)?;
    assert_eq!(before, after);
    println!("class {} with probabilities {:.4?}", after.0, after.1);
    std::fs::remove_file(&path)?;
    Ok(())
}
