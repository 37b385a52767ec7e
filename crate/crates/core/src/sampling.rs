//! Seeded, reproducible sampling of base points and directions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::manifold::Coords;

const HALTON_BASES: [u32; 3] = [2, 3, 5];

/// Radical inverse of `index` in `base`.
pub fn halton(mut index: u64, base: u32) -> f64 {
    let b = base as f64;
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= b;
        r += f * (index % base as u64) as f64;
        index /= base as u64;
    }
    r
}

/// Independent generator for sample `index`, so results do not depend on
/// how samples are split across workers.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Halton points in a box with a seeded Cranley–Patterson rotation.
#[derive(Clone, Debug)]
pub struct BoxSampler {
    bounds: Vec<(f64, f64)>,
    shift: [f64; 3],
}

impl BoxSampler {
    pub fn new(bounds: &[(f64, f64)], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            bounds: bounds.to_vec(),
            shift: [rng.gen(), rng.gen(), rng.gen()],
        }
    }

    pub fn point(&self, index: usize) -> Coords {
        let mut out = Coords::zeros();
        for (i, &(lo, hi)) in self.bounds.iter().enumerate() {
            let u = (halton(index as u64 + 1, HALTON_BASES[i]) + self.shift[i]).fract();
            out[i] = lo + u * (hi - lo);
        }
        out
    }
}

/// `n` chart directions: `±1` in 1D, equally spaced angles in 2D, a
/// Fibonacci sphere in 3D.
pub fn directions(dim: usize, n: usize) -> Vec<Coords> {
    match dim {
        1 => (0..n)
            .map(|i| Coords::new(if i % 2 == 0 { 1.0 } else { -1.0 }, 0.0, 0.0))
            .collect(),
        2 => (0..n)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / n as f64;
                Coords::new(a.cos(), a.sin(), 0.0)
            })
            .collect(),
        _ => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|i| {
                    let z = 1.0 - (2 * i + 1) as f64 / n as f64;
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    let phi = golden * i as f64;
                    Coords::new(r * phi.cos(), r * phi.sin(), z)
                })
                .collect()
        }
    }
}

/// Uniformly random chart direction of unit Euclidean length.
pub fn random_direction<R: Rng>(dim: usize, rng: &mut R) -> Coords {
    match dim {
        1 => Coords::new(if rng.gen::<bool>() { 1.0 } else { -1.0 }, 0.0, 0.0),
        2 => {
            let a = rng.gen::<f64>() * std::f64::consts::TAU;
            Coords::new(a.cos(), a.sin(), 0.0)
        }
        _ => {
            let z: f64 = rng.gen_range(-1.0..1.0);
            let a = rng.gen::<f64>() * std::f64::consts::TAU;
            let r = (1.0 - z * z).sqrt();
            Coords::new(r * a.cos(), r * a.sin(), z)
        }
    }
}

/// Uniform point in a box.
pub fn random_point<R: Rng>(bounds: &[(f64, f64)], rng: &mut R) -> Coords {
    let mut out = Coords::zeros();
    for (i, &(lo, hi)) in bounds.iter().enumerate() {
        out[i] = rng.gen_range(lo..hi);
    }
    out
}
