//! Normalize narratives, build a capped vocabulary and encode fixed-length id sequences.

use flightphase::textprep::{build_vocab, encode_sequence, normalize, Truncate};

fn main() -> flightphase::Result<()> {
    let narratives = [
        "During the takeoff roll the crew reported a bird strike on engine #2.",
        "Aircraft landed long and overran the runway in heavy rain.",
        "While taxiing to the gate the wingtip struck a parked vehicle.",
    ];
    let tokens: Vec<Vec<String>> = narratives.iter().map(|n| normalize(n)).collect();
    for t in &tokens {
        println!("{t:?}");
    }

    let vocab = build_vocab(&tokens, 12)?;
    println!("kept {} terms (ids 0 and 1 are PAD and OOV)", vocab.len());

    for mode in [Truncate::Head, Truncate::Tail] {
        println!("{mode:?} max_len 4: {:?}", encode_sequence(&tokens[0], &vocab, 4, mode));
    }
    println!("padded to 16: {:?}", encode_sequence(&tokens[2], &vocab, 16, Truncate::Head));
    Ok(())
}
