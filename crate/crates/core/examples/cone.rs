//! Validate a distance matrix, attach a point and look at the feasible
//! distance between two attached points.
use umet::{DistanceMatrix, DEFAULT_TOL};

fn main() -> umet::Result<()> {
    let r = DistanceMatrix::from_upper(3, vec![3.0, 4.0, 5.0])?;
    println!("valid: {}", r.is_valid(DEFAULT_TOL));

    let bad = DistanceMatrix::from_upper(3, vec![1.0, 1.0, 3.0])?;
    for v in bad.validate(DEFAULT_TOL).violations {
        println!("violation d({},{}) via {}: slack {}", v.i, v.j, v.via, v.slack);
    }

    let a = [2.0, 4.0, 3.0];
    let b = [3.0, 2.0, 4.0];
    println!("a admissible: {}", r.is_admissible(&a, DEFAULT_TOL)?);
    let iv = r.amalgamation_interval(&a, &b, DEFAULT_TOL)?;
    println!("d(a,b) in [{}, {:?}]", iv.lo, iv.hi);

    let r4 = r.extend(&a, DEFAULT_TOL)?;
    println!("extended to {} points, still valid: {}", r4.n(), r4.is_valid(DEFAULT_TOL));
    Ok(())
}
