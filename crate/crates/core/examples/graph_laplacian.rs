// Graphs, Laplacians and the consensus penalty `Q = L ⊗ I_d`.

use dsgd::graph::{consensus_penalty, laplacian, Graph};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let g = Graph::parse_edge_list("4\n1 2\n2 3\n3 4\n4 1\n")?;
    assert!(g.is_connected());
    let l = laplacian(&g);
    println!("cycle on {} vertices, Laplacian:{l}", g.vertex_count());

    let q = consensus_penalty(&l, 2)?;
    println!("Q is {0}x{0}, consensus subspace has dimension {1}", q.dim(), q.constraint_dim());
    // off-constraint spectrum: the nonzero Laplacian eigenvalues, each d times
    println!("eigenvalues of Q restricted to the complement of C: {:?}", q.qhat_eigenvalues());
    println!("smallest positive eigenvalue: {:?}", q.min_positive_eigenvalue());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
