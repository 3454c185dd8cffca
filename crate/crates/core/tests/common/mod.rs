#![allow(dead_code)]

use distlqr::graphs::build_graph;
use distlqr::{AgentModel, GraphTopology, Mat};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn randn(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    Mat::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

/// `MMᵀ + εI`, well away from singular.
pub fn rand_spd(rng: &mut ChaCha8Rng, n: usize) -> Mat {
    let m = randn(rng, n, n);
    &m * m.transpose() + Mat::identity(n, n) * 0.5
}

/// Connected graph: random spanning tree plus each remaining edge with probability `p`.
pub fn random_connected_graph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> GraphTopology {
    let mut edges = Vec::new();
    for v in 2..=n {
        edges.push((rng.random_range(1..v), v));
    }
    for i in 1..=n {
        for j in i + 1..=n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    build_graph(n, &edges).expect("valid graph")
}

/// Random estimation model `(A, B̄, C)` with `C` of full row rank (generic).
pub fn random_estimation_model(rng: &mut ChaCha8Rng, n: usize, m: usize, q: usize) -> AgentModel {
    loop {
        let a = randn(rng, n, n);
        let bd = randn(rng, n, q);
        let c = randn(rng, m, n);
        if let Ok(model) = AgentModel::estimation(a, bd, c) {
            return model;
        }
    }
}

/// Eigenvalues sorted by (re, im) for multiset comparison.
pub fn sorted_eigs(m: &Mat) -> Vec<num_complex::Complex64> {
    let mut e = distlqr::matops::eigenvalues(m).unwrap();
    e.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    e
}

/// `vec(FS + SFᵀ) = (I⊗F + F⊗I) vec(S)`: dense Kronecker solve of the Lyapunov equation.
pub fn lyapunov_kron(f: &Mat, w: &Mat) -> Mat {
    let n = f.nrows();
    let eye = Mat::identity(n, n);
    let k = distlqr::matops::kron(&eye, f) + distlqr::matops::kron(f, &eye);
    let rhs = -nalgebra::DVector::from_column_slice(w.as_slice());
    let x = k.lu().solve(&rhs).expect("nonsingular Kronecker sum");
    Mat::from_column_slice(n, n, x.as_slice())
}
