//! Overlap between the published circuits. Needs no model.

use sva_circuits::circuits::{compare_circuits, Circuit};
use sva_circuits::reference::CIRCUITS;

fn main() -> sva_circuits::Result<()> {
    let circuits: Vec<Circuit> = CIRCUITS
        .iter()
        .map(|(name, _)| Circuit::reference(name))
        .collect::<sva_circuits::Result<_>>()?;
    let base = &circuits[0];
    print!("{:<16}", "");
    for c in &circuits {
        print!("{:>11}", c.setting);
    }
    println!();
    for a in &circuits {
        print!("{:<16}", format!("{} ({})", a.setting, a.len()));
        for b in &circuits {
            print!("{:>11.2}", compare_circuits(a, b).jaccard);
        }
        println!();
    }
    for c in &circuits[1..] {
        let cmp = compare_circuits(base, c);
        println!("base heads missing from {}: {}", c.setting, cmp.only_a.len());
    }
    Ok(())
}
