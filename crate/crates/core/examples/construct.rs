//! Build a bounded matrix deterministically and match two of them by
//! back-and-forth.
use umet::universality::{back_and_forth, construct_universal};

fn main() -> umet::Result<()> {
    let a = construct_universal(512, 1.0 / 16.0, Some(1.0), 1)?;
    let b = construct_universal(512, 1.0 / 16.0, Some(1.0), 2)?;
    println!("constructed {} points, max entry {:.3}", a.n(), a.max_entry());
    let m = back_and_forth(&a, &b, 6, 0.1)?;
    println!("complete {} depth {} distortion {:.4}", m.complete, m.depth_reached, m.distortion);
    println!("pairs {:?}", m.pairs);
    Ok(())
}
