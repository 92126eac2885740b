//! How well a long sampled chain covers admissible vectors over its prefix.
use umet::growth::{sample_chain, GammaSpec};
use umet::universality::{defect_curve, Targets};

fn main() -> umet::Result<()> {
    let r = sample_chain(2000, GammaSpec::uniform(1.0), Some(1.0), 3, 0)?.matrix;
    let targets = Targets::Sampled { count: 100, bound: Some(1.0) };
    for rep in defect_curve(&r, 2, &targets, &[50, 200, 2000], 4)? {
        println!("N = {:>5}  defect {:.4}", rep.columns_used, rep.defect);
    }
    Ok(())
}
