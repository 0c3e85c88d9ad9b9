//! Build a confusion matrix and classification report from label predictions.

use flightphase::corpus::LabelSet;
use flightphase::evaluator::{confusion, render_report, ClassReport};

fn main() -> flightphase::Result<()> {
    let labels = LabelSet::from_ordered(
        ["Approach", "Landing", "Takeoff", "Taxi"]
            .map(String::from)
            .to_vec(),
    )?;
    let y_true = [0, 0, 1, 1, 1, 1, 2, 2, 3, 3, 1, 0];
    let y_pred = [0, 1, 1, 1, 1, 2, 2, 2, 3, 0, 1, 0];

    let cm = confusion(&y_true, &y_pred, labels.len())?;
    for (i, name) in labels.labels().iter().enumerate() {
        println!("{name:>10} {:?}", cm.row(i));
    }
    println!();

    let report = ClassReport::from_confusion(&cm, &labels)?;
    print!("{}", render_report(&report));
    println!();
    println!("{}", serde_json::to_string_pretty(&report.to_json()).unwrap());
    Ok(())
}
