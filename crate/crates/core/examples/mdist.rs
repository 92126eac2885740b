//! Matrix distributions of metric measure spaces: sampling, exact laws,
//! reconstruction and the compactness check.
use umet::growth::EntryLaw;
use umet::mdist::{
    condition4_check, exact_matrix_distribution, reconstruct_finite, sample_matrix_distribution, total_variation,
    ColumnSource, MetricTriple,
};
use umet::DistanceMatrix;

fn main() -> umet::Result<()> {
    let t = MetricTriple::finite(DistanceMatrix::from_upper(3, vec![1.0, 2.0, 2.5])?, vec![0.2, 0.3, 0.5])?;
    let exact = exact_matrix_distribution(&t, 3)?;
    let sampled = sample_matrix_distribution(&t, 3, 20_000, 9)?;
    println!("TV(sampled, exact) = {:.4}", total_variation(&sampled, &exact));

    let rec = reconstruct_finite(&exact, 1e-9)?;
    println!("reconstructed {:?}", rec.triple);

    let circle = ColumnSource::Triple { triple: MetricTriple::Circle { circumference: 1.0 }, seed: 5 };
    let rep = condition4_check(&circle, 0.1, 100, 1000)?;
    println!("circle passes at N = {:?}", rep.passing_n);

    let product = ColumnSource::Product { law: EntryLaw::Uniform { low: 0.5, high: 1.0 }, seed: 5 };
    let rep = condition4_check(&product, 0.25, 100, 1000)?;
    println!("product law passes at N = {:?}", rep.passing_n);
    Ok(())
}
