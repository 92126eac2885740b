//! Eigenvalue statistics of sampled matrices against a Wigner control.
use umet::growth::GammaSpec;
use umet::spectra::{ensemble_spectrum_stats, SpectrumSource};

fn main() -> umet::Result<()> {
    for source in [SpectrumSource::Wigner, SpectrumSource::Growth { gamma: GammaSpec::default(), bound: None }] {
        let rep = ensemble_spectrum_stats(&source, 100, 30, 30, 1)?;
        let mean_perron = rep.perron.iter().sum::<f64>() / rep.perron.len() as f64;
        println!("{source:?}: mean top eigenvalue {mean_perron:.2}, bulk moment ratio {:?}", rep.moment_ratio);
    }
    Ok(())
}
