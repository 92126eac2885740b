//! Sample growth chains, unbounded and bounded, and replay one.
use umet::growth::{sample_bounded, sample_chain, GammaSpec};
use umet::DEFAULT_TOL;

fn main() -> umet::Result<()> {
    let chain = sample_chain(8, GammaSpec::default(), None, 42, 0)?;
    let m = &chain.matrix;
    println!("n = {}, max entry {:.3}, valid {}", m.n(), m.max_entry(), m.is_valid(DEFAULT_TOL));
    for (k, step) in chain.steps().take(4).enumerate() {
        println!("column {}: {step:.3?}", k + 1);
    }
    assert_eq!(&chain.replay(DEFAULT_TOL)?, m);

    let bounded = sample_bounded(200, 1.0, 7)?;
    println!("bounded chain: max entry {:.4}", bounded.matrix.max_entry());
    Ok(())
}
