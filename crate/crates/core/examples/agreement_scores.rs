//! Agreement between a reference partition and a few candidates, showing how
//! homogeneity and completeness pull in opposite directions.
//!
//! Usage: `cargo run --example agreement_scores`

use brainmask::analysis::{agreement_scores, Partition};

fn main() -> brainmask::Result<()> {
    let truth = Partition::from_labels(&[0, 0, 0, 1, 1, 1, 2, 2, 2]);
    let candidates: [(&str, Vec<usize>); 5] = [
        ("identical, relabeled", vec![5, 5, 5, 3, 3, 3, 9, 9, 9]),
        ("split every class", vec![0, 0, 1, 2, 2, 3, 4, 4, 5]),
        ("merge two classes", vec![0, 0, 0, 0, 0, 0, 1, 1, 1]),
        ("one community", vec![0; 9]),
        ("all singletons", (0..9).collect()),
    ];
    println!(
        "{:<22} {:>6} {:>6} {:>6} {:>6} {:>6}",
        "candidate", "homog", "compl", "v", "fm", "mi"
    );
    for (name, labels) in candidates {
        let s = agreement_scores(&Partition::from_labels(&labels), &truth)?;
        println!(
            "{name:<22} {:>6.3} {:>6.3} {:>6.3} {:>6.3} {:>6.3}",
            s.homogeneity, s.completeness, s.v_measure, s.fowlkes_mallows, s.mutual_information
        );
    }
    Ok(())
}
