//! Laplacian spectra of standard topologies and the stability bound `N_L = d_max + 1`.
//!
//! Run with `cargo run --example graph_spectra`.

use distlqr::graphs::{build_graph, complete_graph, cycle_spectrum, cyclic_graph, max_degree_bound, path_graph, star_graph};

fn main() -> distlqr::Result<()> {
    let graphs = [
        ("cycle C6", cyclic_graph(6)?),
        ("path P6", path_graph(6)?),
        ("star S6", star_graph(6)?),
        ("complete K6", complete_graph(6)?),
        ("two triangles", build_graph(6, &[(1, 2), (2, 3), (3, 1), (4, 5), (5, 6), (6, 4)])?),
    ];
    for (name, g) in &graphs {
        let eigs: Vec<String> = g.eigvals().iter().map(|l| format!("{l:.4}")).collect();
        println!(
            "{name:<14} connected={:<5} zero eigenvalues={} d_max={} N_L={}  λ = [{}]",
            g.is_connected(),
            g.zero_eigenvalue_count(1e-10),
            g.max_degree(),
            max_degree_bound(g),
            eigs.join(", ")
        );
    }
    let closed: Vec<String> = cycle_spectrum(6).iter().map(|l| format!("{l:.4}")).collect();
    println!("closed-form cycle spectrum 2 − 2cos(2πk/N): [{}]", closed.join(", "));
    println!("Laplacian of C6:\n{}", graphs[0].1.laplacian());
    Ok(())
}
