//! Smooth random functions vanishing on the boundary.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::mesh::{DiscreteFunction, Mesh};

/// Deterministic generator for stream `stream` of base seed `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn bounding_box(mesh: &Mesh) -> ([f64; 2], [f64; 2]) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for n in mesh.nodes() {
        for k in 0..2 {
            lo[k] = lo[k].min(n[k]);
            hi[k] = hi[k].max(n[k]);
        }
    }
    (lo, hi)
}

/// Random sine series with `modes` terms per direction and coefficients
/// decaying like `1/k`; signs are mixed. Boundary values are zero up to the
/// forced truncation.
pub fn random_smooth<R: Rng>(mesh: &Arc<Mesh>, rng: &mut R, modes: usize) -> DiscreteFunction {
    let (lo, hi) = bounding_box(mesh);
    let len = [hi[0] - lo[0], (hi[1] - lo[1]).max(f64::MIN_POSITIVE)];
    let modes = modes.max(1);
    if mesh.dimension() == 1 {
        let coef: Vec<(f64, f64)> = (1..=modes)
            .map(|k| (rng.gen_range(-1.0..1.0) / k as f64, rng.gen_range(0.8..1.25) * k as f64))
            .collect();
        DiscreteFunction::interpolate(mesh, |x| {
            let s = (x[0] - lo[0]) / len[0];
            coef.iter().map(|&(c, _)| c).zip(1..).map(|(c, k)| c * (k as f64 * PI * s).sin()).sum::<f64>()
                + 0.05 * coef.iter().map(|&(c, w)| c * (w * PI * s).sin() * (PI * s).sin()).sum::<f64>()
        })
        .expect("sine series is finite")
    } else {
        let coef: Vec<f64> = (0..modes * modes)
            .map(|i| rng.gen_range(-1.0..1.0) / ((i / modes + 1) * (i % modes + 1)) as f64)
            .collect();
        DiscreteFunction::interpolate(mesh, |x| {
            let s = (x[0] - lo[0]) / len[0];
            let t = (x[1] - lo[1]) / len[1];
            coef.iter()
                .enumerate()
                .map(|(i, c)| {
                    let (k, l) = ((i / modes + 1) as f64, (i % modes + 1) as f64);
                    c * (k * PI * s).sin() * (l * PI * t).sin()
                })
                .sum()
        })
        .expect("sine series is finite")
    }
}

/// Positive bump: the lowest sine mode of the bounding box.
pub fn bump(mesh: &Arc<Mesh>) -> DiscreteFunction {
    let (lo, hi) = bounding_box(mesh);
    let dim = mesh.dimension();
    DiscreteFunction::interpolate(mesh, |x| {
        let s = (PI * (x[0] - lo[0]) / (hi[0] - lo[0])).sin();
        if dim == 1 {
            s
        } else {
            s * (PI * (x[1] - lo[1]) / (hi[1] - lo[1])).sin()
        }
    })
    .expect("bump is finite")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_boundary_free() {
        let m = Arc::new(Mesh::rectangle((0.0, 2.0), (0.0, 1.0), 8, 5).unwrap());
        let a = random_smooth(&m, &mut stream_rng(7, 3), 4);
        let b = random_smooth(&m, &mut stream_rng(7, 3), 4);
        let c = random_smooth(&m, &mut stream_rng(7, 4), 4);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(m.boundary_nodes().iter().all(|&n| a.values()[n] == 0.0));
        assert!(!a.is_zero());
        let bm = bump(&m);
        assert!(m.free_nodes().iter().all(|&n| bm.values()[n] > 0.0));
    }
}
