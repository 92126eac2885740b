//! Vertices and recession rays of the admissible polyhedron over a triangle.
use umet::polytope::{extreme_points, triangle_vertices_closed_form};
use umet::DistanceMatrix;

fn main() -> umet::Result<()> {
    let r = DistanceMatrix::from_upper(3, vec![3.0, 4.0, 5.0])?;
    let vs = extreme_points(&r)?;
    println!("{} vertices", vs.vertices.len());
    for v in &vs.vertices {
        println!("  {v:?}");
    }
    println!("rays: {:?}", vs.rays);

    let closed = triangle_vertices_closed_form(3.0, 4.0, 5.0)?;
    println!("closed form: {closed:?}");

    // the rows of r are admissible themselves
    for j in 0..3 {
        println!("row {j} in polyhedron: {}", vs.contains(&r.row(j), 1e-9));
    }
    Ok(())
}
