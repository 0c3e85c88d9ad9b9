//! Compare analytic gradients with central finite differences for every architecture.

use flightphase::model::{gradient_check, ArchSpec, NAMED_VARIANTS};

fn main() -> flightphase::Result<()> {
    for name in NAMED_VARIANTS {
        let mut spec = ArchSpec::new(name, 6, 3, 4)?;
        spec.embed_dim = 2;
        spec.hidden = 2;
        spec.dense_hidden = 3;
        let worst = (0..5)
            .map(|seed| gradient_check(&spec, seed))
            .collect::<flightphase::Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        println!("{name:<16} {:>5} params  max relative error {worst:.2e}", spec.param_count());
    }
    Ok(())
}
