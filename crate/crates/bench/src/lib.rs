//! Shared instance builders for the benchmark suite.

use nestnorm_core::metric::MetricInstance;
use nestnorm_core::synth::{generate, ClusterSpec, FacilityMode, GeneratorSpec};

/// A deterministic two-blob planar instance of the given size.
pub fn blob_instance(seed: u64, per_cluster: usize, step: f64) -> MetricInstance {
    let spec = GeneratorSpec {
        seed,
        clusters: vec![
            ClusterSpec {
                center: [0.0, 0.0],
                stddev: 0.5,
                count: per_cluster,
            },
            ClusterSpec {
                center: [8.0, 0.0],
                stddev: 2.0,
                count: per_cluster,
            },
        ],
        facility_mode: FacilityMode::Grid { step },
    };
    generate(&spec)
        .expect("valid spec")
        .to_metric()
        .expect("valid instance")
}
