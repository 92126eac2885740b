//! Shift-invariance of the rows of a sampled ensemble.
use umet::growth::{sample_ensemble, stationarity_report, GammaSpec, StationarityConfig};
use umet::DistanceMatrix;

fn main() -> umet::Result<()> {
    let gamma = GammaSpec::default();
    let chains: Vec<DistanceMatrix> = sample_ensemble(12, 2000, gamma, None, 6)?.into_iter().map(|c| c.matrix).collect();
    let rep = stationarity_report(&chains, 3, StationarityConfig::default(), Some(gamma))?;
    for row in &rep.rows {
        println!("row {}: shifted p = {:.3}, stationary {}", row.row, row.shifted.p_value, row.stationary);
    }
    println!("all stationary: {}", rep.all_stationary());
    Ok(())
}
