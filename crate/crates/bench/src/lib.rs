//! Fixtures shared by the benchmarks.

use qic_core::povm::Sampler;
use qic_core::rng::rng_from_seed;
use qic_core::{DensityMatrix, ExperimentConfig, OutcomeCounts, QhbmModel};

pub struct Fixture {
    pub truth: QhbmModel,
    pub theta: Vec<f64>,
    pub rho: DensityMatrix,
    pub counts: OutcomeCounts,
}

/// The three-qubit M1 true state and one batch of `shots` outcomes.
pub fn standard_fixture(shots: usize) -> Fixture {
    let cfg = ExperimentConfig::standard(0);
    let truth = QhbmModel::m1();
    let theta = cfg.true_params().expect("standard config");
    let rho = truth.model_state(&theta).expect("finite parameters");
    let counts = Sampler::new(&rho).sample_counts(shots, &mut rng_from_seed(1));
    Fixture { truth, theta, rho, counts }
}
