//! Random and explicit graphs, word universality and the distance bridge.
use umet::graph::{
    construct_universal_graph, er_universality_bound, extension_scan, graph_to_distance, sample_er,
    word_universality_depth,
};

fn main() -> umet::Result<()> {
    let g = sample_er(60, 0.5, 11)?;
    let rep = word_universality_depth(&g, 4)?;
    println!("ER(60, 1/2): {} edges, depth-4 universal {} (bound {:.3})", g.edge_count(), rep.universal, er_universality_bound(60, 4));

    let u = construct_universal_graph(128)?;
    println!("bit graph depth 6: {}", word_universality_depth(&u, 6)?.universal);
    let scan = extension_scan(&u, 6, 3)?;
    println!("extension scan: {} pairs, {} failures", scan.checked, scan.failure_count);

    let m = graph_to_distance(&u.with_apex())?;
    println!("bridged metric on {} points, max entry {}", m.n(), m.max_entry());
    Ok(())
}
