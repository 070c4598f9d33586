//! Seeded random systems on five-point grids, for oracle fuzzing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dense::C64;
use crate::error::Result;
use crate::partition::Graph;
use crate::sparse::SparseCoo;

/// Random complex-symmetric A with dense blocks on the first and last grid
/// rows, and a lesser self-energy that is skew-Hermitian and dense on those
/// rows and diagonal elsewhere.
#[derive(Clone, Debug)]
pub struct RandomGridSystem {
    pub nx: usize,
    pub ny: usize,
    pub a: SparseCoo,
    pub sigma_lesser: SparseCoo,
    /// Grid rows, dof = y * nx + x.
    pub layers: Vec<Vec<usize>>,
    pub graph: Graph,
    /// The dense contact rows.
    pub atomic_groups: Vec<Vec<usize>>,
}

fn unit(r: &mut ChaCha8Rng) -> C64 {
    C64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))
}

/// Build a random system on an nx-by-ny grid.
pub fn random_grid_system(nx: usize, ny: usize, seed: u64) -> Result<RandomGridSystem> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let n = nx * ny;
    let id = |x: usize, y: usize| y * nx + x;
    let mut a = Vec::new();
    let mut s = Vec::new();
    let mut edges = Vec::new();
    for y in 0..ny {
        for x in 0..nx {
            a.push((id(x, y), id(x, y), C64::new(6.0, 0.5) + unit(&mut r)));
            for (x2, y2) in [(x + 1, y), (x, y + 1)] {
                if x2 < nx && y2 < ny {
                    let v = unit(&mut r);
                    a.push((id(x, y), id(x2, y2), v));
                    a.push((id(x2, y2), id(x, y), v));
                    edges.push((id(x, y), id(x2, y2)));
                }
            }
            if y != 0 && y + 1 != ny {
                s.push((id(x, y), id(x, y), C64::new(0.0, r.gen_range(-1.0..1.0))));
            }
        }
    }
    let mut contacts: Vec<usize> = vec![0];
    if ny > 1 {
        contacts.push(ny - 1);
    }
    let scale = 1.0 / nx as f64;
    for &y in &contacts {
        for i in 0..nx {
            for j in i..nx {
                let v = unit(&mut r) * scale;
                a.push((id(i, y), id(j, y), v));
                if i != j {
                    a.push((id(j, y), id(i, y), v));
                }
                let w = unit(&mut r) * scale;
                // Skew-Hermitian: S_ij = w, S_ji = -conj(w), purely imaginary diagonal.
                if i == j {
                    s.push((id(i, y), id(i, y), C64::new(0.0, w.im)));
                } else {
                    s.push((id(i, y), id(j, y), w));
                    s.push((id(j, y), id(i, y), -w.conj()));
                }
                if i != j {
                    edges.push((id(i, y), id(j, y)));
                }
            }
        }
    }
    let coords = (0..n).map(|d| [(d % nx) as f64, (d / nx) as f64]).collect();
    Ok(RandomGridSystem {
        nx,
        ny,
        a: SparseCoo::from_triplets(n, a)?,
        sigma_lesser: SparseCoo::from_triplets(n, s)?,
        layers: (0..ny).map(|y| (y * nx..(y + 1) * nx).collect()).collect(),
        graph: Graph::from_edges(n, edges)?.with_coords(coords)?,
        atomic_groups: contacts.iter().map(|&y| (y * nx..(y + 1) * nx).collect()).collect(),
    })
}
