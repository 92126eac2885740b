//! p-metrics: sampling, validation and the shrinking amalgamation fiber.
use umet::growth::GammaSpec;
use umet::pmetric::{amalgamation_interval_p, sample_p_metric, ultrametric_fiber, validate_p, PExponent};
use umet::{DistanceMatrix, DEFAULT_TOL};

fn main() -> umet::Result<()> {
    let p = PExponent::finite(2.0)?;
    let chain = sample_p_metric(10, p, GammaSpec::default(), None, 8, 0)?;
    println!("2-metric valid: {}", validate_p(&chain.matrix, p, DEFAULT_TOL).ok);

    let r = DistanceMatrix::from_upper(2, vec![2.0])?;
    for p in [1.0, 2.0, 4.0] {
        let f = amalgamation_interval_p(&r, &[1.0, 2.0], &[2.0, 1.0], PExponent::finite(p)?, DEFAULT_TOL)?;
        println!("p = {p}: {f:?}");
    }
    println!("ultrametric: {:?}", ultrametric_fiber(&[1.0, 1.0], &[0.5, 1.0], DEFAULT_TOL));
    Ok(())
}
