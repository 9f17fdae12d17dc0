//! Synthetic planar instances: Gaussian cluster generation with ground-truth
//! labels, the on-disk instance format, and cluster-recovery scoring.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::{FacilityId, MetricError, MetricInstance};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("generator spec invalid: {what}")]
    BadSpec { what: &'static str },
    #[error("instance file must contain exactly one of `planar` or `matrix`")]
    AmbiguousSource,
    #[error("labels length {got} does not match point count {expected}")]
    LabelLength { expected: usize, got: usize },
    #[error("recovery scoring supports up to {max} clusters, got {got}")]
    TooManyClusters { max: usize, got: usize },
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// One Gaussian blob: points drawn i.i.d. per axis around `center`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub center: [f64; 2],
    pub stddev: f64,
    pub count: usize,
}

/// Where candidate facilities come from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FacilityMode {
    /// Every generated point doubles as a candidate facility.
    OnPoints,
    /// Axis-aligned grid of the given step covering the points' bounding box.
    Grid { step: f64 },
}

/// Deterministic generator description; the same spec always produces the
/// byte-identical instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub seed: u64,
    pub clusters: Vec<ClusterSpec>,
    pub facility_mode: FacilityMode,
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.clusters.is_empty() {
            return Err(SynthError::BadSpec {
                what: "at least one cluster required",
            });
        }
        for c in &self.clusters {
            if c.count == 0 {
                return Err(SynthError::BadSpec {
                    what: "cluster counts must be positive",
                });
            }
            if !c.stddev.is_finite() || c.stddev <= 0.0 {
                return Err(SynthError::BadSpec {
                    what: "cluster stddev must be a finite positive number",
                });
            }
            if c.center.iter().any(|v| !v.is_finite()) {
                return Err(SynthError::BadSpec {
                    what: "cluster centers must be finite",
                });
            }
        }
        if let FacilityMode::Grid { step } = self.facility_mode {
            if !step.is_finite() || step <= 0.0 {
                return Err(SynthError::BadSpec {
                    what: "grid step must be a finite positive number",
                });
            }
        }
        Ok(())
    }
}

/// Planar coordinates of an instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanarData {
    pub points: Vec<[f64; 2]>,
    pub facilities: Vec<[f64; 2]>,
}

/// Explicit distance matrix over points followed by facilities.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixData {
    pub n_points: usize,
    pub n_facilities: usize,
    pub matrix: Vec<Vec<f64>>,
}

/// The on-disk instance format: planar coordinates or an explicit matrix
/// (exactly one), optional ground-truth labels, and — for generated files —
/// the spec that produced them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planar: Option<PlanarData>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<MatrixData>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
}

impl InstanceFile {
    /// Builds the metric, enforcing the planar-XOR-matrix rule and label
    /// length.
    pub fn to_metric(&self) -> Result<MetricInstance, SynthError> {
        let metric = match (&self.planar, &self.matrix) {
            (Some(planar), None) => {
                MetricInstance::from_planar(&planar.points, &planar.facilities)?
            }
            (None, Some(m)) => {
                MetricInstance::from_matrix(m.n_points, m.n_facilities, &m.matrix)?
            }
            _ => return Err(SynthError::AmbiguousSource),
        };
        if let Some(labels) = &self.labels {
            if labels.len() != metric.n_points() {
                return Err(SynthError::LabelLength {
                    expected: metric.n_points(),
                    got: labels.len(),
                });
            }
        }
        Ok(metric)
    }
}

/// Draws the instance described by `spec`: clusters in order, each point's
/// coordinates sampled axis-wise, labels recording the originating cluster.
pub fn generate(spec: &GeneratorSpec) -> Result<InstanceFile, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (idx, cluster) in spec.clusters.iter().enumerate() {
        let dx = Normal::new(cluster.center[0], cluster.stddev)
            .expect("validated stddev");
        let dy = Normal::new(cluster.center[1], cluster.stddev)
            .expect("validated stddev");
        for _ in 0..cluster.count {
            points.push([dx.sample(&mut rng), dy.sample(&mut rng)]);
            labels.push(idx);
        }
    }
    let facilities = match spec.facility_mode {
        FacilityMode::OnPoints => points.clone(),
        FacilityMode::Grid { step } => {
            let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for p in &points {
                for a in 0..2 {
                    lo[a] = lo[a].min(p[a]);
                    hi[a] = hi[a].max(p[a]);
                }
            }
            let mut grid = Vec::new();
            let steps = |a: usize| ((hi[a] - lo[a]) / step).floor() as usize + 1;
            for i in 0..steps(0) {
                for j in 0..steps(1) {
                    grid.push([lo[0] + i as f64 * step, lo[1] + j as f64 * step]);
                }
            }
            grid
        }
    };
    Ok(InstanceFile {
        planar: Some(PlanarData { points, facilities }),
        matrix: None,
        labels: Some(labels),
        generator: Some(spec.clone()),
    })
}

/// Fraction of points whose solution cluster matches the ground truth under
/// the best one-to-one relabeling (exhaustive over injections, exact up to
/// 8 clusters on either side).
pub fn recovery_score(
    labels: &[usize],
    assignment: &[FacilityId],
) -> Result<f64, SynthError> {
    if labels.len() != assignment.len() {
        return Err(SynthError::LabelLength {
            expected: labels.len(),
            got: assignment.len(),
        });
    }
    if labels.is_empty() {
        return Ok(1.0);
    }
    let label_ids: Vec<usize> = labels
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let cluster_ids: Vec<FacilityId> = assignment
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    const MAX: usize = 8;
    if label_ids.len() > MAX || cluster_ids.len() > MAX {
        return Err(SynthError::TooManyClusters {
            max: MAX,
            got: label_ids.len().max(cluster_ids.len()),
        });
    }

    // matches[c][l] = points in solution cluster c with true label l
    let matches: Vec<Vec<usize>> = cluster_ids
        .iter()
        .map(|&c| {
            label_ids
                .iter()
                .map(|&l| {
                    labels
                        .iter()
                        .zip(assignment)
                        .filter(|&(&lab, &asg)| lab == l && asg == c)
                        .count()
                })
                .collect()
        })
        .collect();

    // best injective map from solution clusters to labels (or vice versa)
    fn best(
        matches: &[Vec<usize>],
        row: usize,
        used: &mut Vec<bool>,
    ) -> usize {
        if row == matches.len() {
            return 0;
        }
        // a cluster may also match no label at all
        let mut top = best(matches, row + 1, used);
        for l in 0..used.len() {
            if !used[l] {
                used[l] = true;
                top = top.max(matches[row][l] + best(matches, row + 1, used));
                used[l] = false;
            }
        }
        top
    }
    let mut used = vec![false; label_ids.len()];
    let hits = best(&matches, 0, &mut used);
    Ok(hits as f64 / labels.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_blob_spec() -> GeneratorSpec {
        GeneratorSpec {
            seed: 7,
            clusters: vec![
                ClusterSpec {
                    center: [0.0, 0.0],
                    stddev: 0.5,
                    count: 6,
                },
                ClusterSpec {
                    center: [10.0, 0.0],
                    stddev: 0.5,
                    count: 4,
                },
            ],
            facility_mode: FacilityMode::OnPoints,
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate(&two_blob_spec()).unwrap();
        let b = generate(&two_blob_spec()).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        assert_eq!(a.labels.as_ref().unwrap().len(), 10);
        a.to_metric().unwrap().validate_metric().unwrap();
    }

    #[test]
    fn single_cluster_labels_are_zero() {
        let spec = GeneratorSpec {
            seed: 1,
            clusters: vec![ClusterSpec {
                center: [2.0, -1.0],
                stddev: 1.0,
                count: 5,
            }],
            facility_mode: FacilityMode::OnPoints,
        };
        let inst = generate(&spec).unwrap();
        assert_eq!(inst.labels, Some(vec![0; 5]));
        assert_eq!(inst.planar.as_ref().unwrap().points.len(), 5);
    }

    #[test]
    fn grid_facilities_cover_the_bounding_box() {
        let spec = GeneratorSpec {
            facility_mode: FacilityMode::Grid { step: 5.0 },
            ..two_blob_spec()
        };
        let inst = generate(&spec).unwrap();
        let planar = inst.planar.as_ref().unwrap();
        assert!(!planar.facilities.is_empty());
        inst.to_metric().unwrap();
    }

    #[test]
    fn instance_file_requires_exactly_one_source() {
        let inst = InstanceFile {
            planar: None,
            matrix: None,
            labels: None,
            generator: None,
        };
        assert!(matches!(inst.to_metric(), Err(SynthError::AmbiguousSource)));
    }

    #[test]
    fn recovery_score_handles_relabeling() {
        let labels = vec![0, 0, 1, 1];
        let ids = |v: &[usize]| v.iter().map(|&x| FacilityId(x)).collect::<Vec<_>>();
        // perfect recovery under swapped names
        assert_eq!(
            recovery_score(&labels, &ids(&[9, 9, 4, 4])).unwrap(),
            1.0
        );
        // one point on the wrong side
        assert_eq!(
            recovery_score(&labels, &ids(&[9, 4, 4, 4])).unwrap(),
            0.75
        );
        // everything in one cluster: the bigger class survives
        assert_eq!(
            recovery_score(&labels, &ids(&[5, 5, 5, 5])).unwrap(),
            0.5
        );
    }

    #[test]
    fn bad_specs_are_rejected() {
        let mut spec = two_blob_spec();
        spec.clusters[0].stddev = 0.0;
        assert!(matches!(
            generate(&spec),
            Err(SynthError::BadSpec { .. })
        ));
        let mut spec2 = two_blob_spec();
        spec2.clusters.clear();
        assert!(matches!(
            generate(&spec2),
            Err(SynthError::BadSpec { .. })
        ));
    }
}
