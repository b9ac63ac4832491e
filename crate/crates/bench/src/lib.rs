//! Fixed-seed inputs shared by the benchmarks.

use air_core::data::{gen_lowrank, generate_mask};
use air_core::dmf::initialize;
use air_core::rng::gaussian_matrix;
use air_core::train::observations;
use air_core::{
    GroundTruth, InitScheme, MaskKind, Matrix, ModelState, Parameterization, SamplingMask,
    SeededRng,
};

pub fn square(n: usize, seed: u64) -> Matrix {
    gaussian_matrix(&mut SeededRng::new(seed), n, n, 0.0, 1.0).expect("positive size")
}

/// Completion problem of size `m×n` with 80% of a rank-5 matrix missing.
pub struct Problem {
    pub truth: GroundTruth,
    pub mask: SamplingMask,
    pub y_obs: Vec<f64>,
    pub state: ModelState,
}

pub fn problem(m: usize, n: usize, depth: usize, seed: u64) -> Problem {
    let mut rng = SeededRng::new(seed);
    let truth = gen_lowrank(&mut rng, m, n, 5).expect("rank fits");
    let mask = generate_mask(&mut rng, m, n, &MaskKind::Random { p: 0.8 }).expect("valid rate");
    let y_obs = observations(&truth.full, &mask).expect("shapes agree");
    let chain = initialize(
        m,
        n,
        depth,
        m.min(n),
        InitScheme::Gaussian { variance: 1e-3 },
        &mut rng,
    )
    .expect("valid depth");
    let state = ModelState::with_gaussian_reg(chain, Parameterization::Product, 1e-3, &mut rng)
        .expect("valid variance");
    Problem {
        truth,
        mask,
        y_obs,
        state,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_deterministic() {
        assert_eq!(square(5, 1), square(5, 1));
        let a = problem(12, 10, 3, 2);
        let b = problem(12, 10, 3, 2);
        assert_eq!(a.state, b.state);
        assert_eq!(a.y_obs, b.y_obs);
    }
}
