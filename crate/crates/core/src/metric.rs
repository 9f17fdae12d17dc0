//! Finite metric spaces over clients and candidate centers, plus the
//! truncated-distance algebra every solver in this crate is built on.
//!
//! The central operation is truncated subtraction `a ∸ b = max(0, a - b)`,
//! written [`dotdiv`] here. Distances to a center holding a ball of radius
//! `r` are measured as `δ(p, x) ∸ r`: points inside the ball are free, points
//! outside pay only the overshoot. [`MetricInstance::dstar`] and
//! [`MetricInstance::dstarstar`] iterate the same idea with two radii.
//!
//! Distances are stored as `f64`. Solvers never test float equality to decide
//! "constraint tight"; tightness is resolved by the discrete event engine
//! (see `engine`). The comparison helpers here, with tolerance
//! [`VALIDATION_TOL`], are for validation and tests only.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used by validation helpers (never by solver control flow).
pub const VALIDATION_TOL: f64 = 1e-9;

/// Identifier of a client point (index into the instance's point list).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PointId(pub usize);

/// Identifier of a candidate center (index into the facility list).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FacilityId(pub usize);

impl std::fmt::Display for PointId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "p{}", self.0)
    }
}

impl std::fmt::Display for FacilityId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "f{}", self.0)
    }
}

/// Either kind of site in the instance; used by operations that accept
/// facility-or-point arguments (e.g. `δ*(x1, ·)` over `X2 ∪ P`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Site {
    Point(PointId),
    Facility(FacilityId),
}

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("distance matrix must be square over points+facilities: expected {expected}x{expected}, got {rows} rows (row {row} has {cols} columns)")]
    ShapeMismatch {
        expected: usize,
        rows: usize,
        row: usize,
        cols: usize,
    },
    #[error("distance d({i},{j}) = {value} is not a finite nonnegative number")]
    BadDistance { i: usize, j: usize, value: f64 },
    #[error("unknown {kind} id {id} (instance has {count})")]
    UnknownId {
        kind: &'static str,
        id: usize,
        count: usize,
    },
    #[error("instance must have at least one point and one facility (points={points}, facilities={facilities})")]
    Empty { points: usize, facilities: usize },
    #[error("self-distance d({i},{i}) = {value} must be 0")]
    NonzeroSelfDistance { i: usize, value: f64 },
    #[error("asymmetry: d({i},{j}) = {dij} but d({j},{i}) = {dji}")]
    Asymmetric { i: usize, j: usize, dij: f64, dji: f64 },
    #[error("triangle inequality violated: d({i},{k}) = {dik} > d({i},{j}) + d({j},{k}) = {via}")]
    TriangleViolation {
        i: usize,
        j: usize,
        k: usize,
        dik: f64,
        via: f64,
    },
}

/// Truncated subtraction `a ∸ b = max(0, a - b)`.
///
/// Identities relied on throughout (and property-tested below):
/// `(a ∸ b) ∸ c = a ∸ (b + c)` and
/// `(a + b) ∸ (c + d) ≤ (a ∸ c) + (b ∸ d)`.
#[inline]
pub fn dotdiv(a: f64, b: f64) -> f64 {
    (a - b).max(0.0)
}

/// A finite metric over `n_points` clients and `n_facilities` candidate
/// centers. Internally one square matrix over all sites, points first.
#[derive(Debug, Clone)]
pub struct MetricInstance {
    n_points: usize,
    n_facilities: usize,
    dist: Vec<f64>,
}

impl MetricInstance {
    /// Builds an instance from an explicit square matrix over points followed
    /// by facilities. Checks shape and that entries are finite and
    /// nonnegative; metric axioms are checked separately by
    /// [`MetricInstance::validate_metric`].
    pub fn from_matrix(
        n_points: usize,
        n_facilities: usize,
        matrix: &[Vec<f64>],
    ) -> Result<Self, MetricError> {
        if n_points == 0 || n_facilities == 0 {
            return Err(MetricError::Empty {
                points: n_points,
                facilities: n_facilities,
            });
        }
        let n = n_points + n_facilities;
        if matrix.len() != n {
            return Err(MetricError::ShapeMismatch {
                expected: n,
                rows: matrix.len(),
                row: 0,
                cols: matrix.first().map_or(0, Vec::len),
            });
        }
        let mut dist = Vec::with_capacity(n * n);
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != n {
                return Err(MetricError::ShapeMismatch {
                    expected: n,
                    rows: matrix.len(),
                    row: i,
                    cols: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(MetricError::BadDistance { i, j, value: v });
                }
                dist.push(v);
            }
        }
        Ok(Self {
            n_points,
            n_facilities,
            dist,
        })
    }

    /// Builds a Euclidean instance from planar coordinates. The result always
    /// satisfies the metric axioms.
    pub fn from_planar(points: &[[f64; 2]], facilities: &[[f64; 2]]) -> Result<Self, MetricError> {
        if points.is_empty() || facilities.is_empty() {
            return Err(MetricError::Empty {
                points: points.len(),
                facilities: facilities.len(),
            });
        }
        let all: Vec<[f64; 2]> = points.iter().chain(facilities.iter()).copied().collect();
        let n = all.len();
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let dx = all[i][0] - all[j][0];
                let dy = all[i][1] - all[j][1];
                dist[i * n + j] = (dx * dx + dy * dy).sqrt();
            }
        }
        Ok(Self {
            n_points: points.len(),
            n_facilities: facilities.len(),
            dist,
        })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn n_facilities(&self) -> usize {
        self.n_facilities
    }

    #[inline]
    fn n_sites(&self) -> usize {
        self.n_points + self.n_facilities
    }

    #[inline]
    fn site_index(&self, s: Site) -> usize {
        match s {
            Site::Point(PointId(p)) => p,
            Site::Facility(FacilityId(x)) => self.n_points + x,
        }
    }

    /// Raw distance between two sites. Panics on out-of-range ids (the typed
    /// entry points below return errors instead).
    #[inline]
    pub fn dist_sites(&self, a: Site, b: Site) -> f64 {
        let (i, j) = (self.site_index(a), self.site_index(b));
        self.dist[i * self.n_sites() + j]
    }

    /// Distance from client `p` to facility `x`.
    #[inline]
    pub fn dist_pf(&self, p: PointId, x: FacilityId) -> f64 {
        self.dist_sites(Site::Point(p), Site::Facility(x))
    }

    /// Distance between two facilities.
    #[inline]
    pub fn dist_ff(&self, a: FacilityId, b: FacilityId) -> f64 {
        self.dist_sites(Site::Facility(a), Site::Facility(b))
    }

    /// Distance between two clients.
    #[inline]
    pub fn dist_pp(&self, a: PointId, b: PointId) -> f64 {
        self.dist_sites(Site::Point(a), Site::Point(b))
    }

    fn check_point(&self, p: PointId) -> Result<(), MetricError> {
        if p.0 >= self.n_points {
            return Err(MetricError::UnknownId {
                kind: "point",
                id: p.0,
                count: self.n_points,
            });
        }
        Ok(())
    }

    fn check_facility(&self, x: FacilityId) -> Result<(), MetricError> {
        if x.0 >= self.n_facilities {
            return Err(MetricError::UnknownId {
                kind: "facility",
                id: x.0,
                count: self.n_facilities,
            });
        }
        Ok(())
    }

    /// Truncated distance `δ^r(p, x) = δ(p, x) ∸ r`: how far `p` is from the
    /// boundary of the ball of radius `r` around `x` (zero inside it).
    pub fn truncated_dist(&self, p: PointId, x: FacilityId, r: f64) -> Result<f64, MetricError> {
        self.check_point(p)?;
        self.check_facility(x)?;
        Ok(dotdiv(self.dist_pf(p, x), r))
    }

    /// `δ*(x1, y) = (δ(x1, y) ∸ r1) ∸ r2`: gap between the radius-`r1` ball
    /// around `x1` and the radius-`r2` ball around `y` (a facility or, with
    /// `r2 = 0`, a client).
    pub fn dstar(&self, x1: FacilityId, r1: f64, y: Site, r2: f64) -> Result<f64, MetricError> {
        self.check_facility(x1)?;
        match y {
            Site::Point(p) => self.check_point(p)?,
            Site::Facility(x) => self.check_facility(x)?,
        }
        Ok(dotdiv(dotdiv(self.dist_sites(Site::Facility(x1), y), r1), r2))
    }

    /// `δ**(x1, y) = (δ(x1, y) ∸ r1') ∸ r2` with a caller-supplied enlarged
    /// radius `r1'` (used after a center inherits part of another solution's
    /// radii).
    pub fn dstarstar(
        &self,
        x1: FacilityId,
        r1_prime: f64,
        y: Site,
        r2: f64,
    ) -> Result<f64, MetricError> {
        self.dstar(x1, r1_prime, y, r2)
    }

    /// Checks the metric axioms (symmetry, zero diagonal, triangle
    /// inequality) with tolerance [`VALIDATION_TOL`].
    pub fn validate_metric(&self) -> Result<(), MetricError> {
        let n = self.n_sites();
        for i in 0..n {
            let dii = self.dist[i * n + i];
            if dii.abs() > VALIDATION_TOL {
                return Err(MetricError::NonzeroSelfDistance { i, value: dii });
            }
            for j in (i + 1)..n {
                let dij = self.dist[i * n + j];
                let dji = self.dist[j * n + i];
                if (dij - dji).abs() > VALIDATION_TOL * (1.0 + dij.abs()) {
                    return Err(MetricError::Asymmetric { i, j, dij, dji });
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let dik = self.dist[i * n + k];
                    let via = self.dist[i * n + j] + self.dist[j * n + k];
                    if dik > via + VALIDATION_TOL * (1.0 + dik.abs()) {
                        return Err(MetricError::TriangleViolation { i, j, k, dik, via });
                    }
                }
            }
        }
        Ok(())
    }

    /// All facility-to-client distances, ascending and deduplicated.
    pub fn facility_client_distances(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_points * self.n_facilities);
        for x in 0..self.n_facilities {
            for p in 0..self.n_points {
                out.push(self.dist_pf(PointId(p), FacilityId(x)));
            }
        }
        sort_dedup(&mut out);
        out
    }

    /// Distances from one facility to every client, ascending, deduplicated.
    pub fn facility_distances(&self, x: FacilityId) -> Vec<f64> {
        let mut out: Vec<f64> = (0..self.n_points)
            .map(|p| self.dist_pf(PointId(p), x))
            .collect();
        sort_dedup(&mut out);
        out
    }

    /// Largest facility-to-client distance.
    pub fn max_facility_client_distance(&self) -> f64 {
        let mut m: f64 = 0.0;
        for x in 0..self.n_facilities {
            for p in 0..self.n_points {
                m = m.max(self.dist_pf(PointId(p), FacilityId(x)));
            }
        }
        m
    }

    /// Smallest strictly positive facility-to-client distance, if any.
    pub fn min_nonzero_facility_client_distance(&self) -> Option<f64> {
        let mut m: Option<f64> = None;
        for x in 0..self.n_facilities {
            for p in 0..self.n_points {
                let d = self.dist_pf(PointId(p), FacilityId(x));
                if d > 0.0 && m.map_or(true, |cur| d < cur) {
                    m = Some(d);
                }
            }
        }
        m
    }
}

fn sort_dedup(v: &mut Vec<f64>) {
    v.sort_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
    v.dedup();
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dotdiv_basics() {
        assert_eq!(dotdiv(5.0, 2.0), 3.0);
        assert_eq!(dotdiv(2.0, 5.0), 0.0);
        assert_eq!(dotdiv(0.0, 0.0), 0.0);
    }

    #[test]
    fn truncated_dist_inside_ball_is_zero() {
        let inst =
            MetricInstance::from_planar(&[[0.0, 0.0], [3.0, 0.0]], &[[1.0, 0.0]]).unwrap();
        // point 0 at distance 1, point 1 at distance 2
        assert_eq!(inst.truncated_dist(PointId(0), FacilityId(0), 1.5).unwrap(), 0.0);
        assert!(
            (inst.truncated_dist(PointId(1), FacilityId(0), 0.5).unwrap() - 1.5).abs() < 1e-12
        );
    }

    #[test]
    fn unknown_ids_are_lookup_errors() {
        let inst = MetricInstance::from_planar(&[[0.0, 0.0]], &[[1.0, 0.0]]).unwrap();
        assert!(matches!(
            inst.truncated_dist(PointId(7), FacilityId(0), 0.0),
            Err(MetricError::UnknownId { kind: "point", .. })
        ));
        assert!(matches!(
            inst.dstar(FacilityId(3), 0.0, Site::Point(PointId(0)), 0.0),
            Err(MetricError::UnknownId { kind: "facility", .. })
        ));
    }

    #[test]
    fn matrix_validation_rejects_junk() {
        // Wrong shape.
        assert!(MetricInstance::from_matrix(1, 1, &[vec![0.0, 1.0]]).is_err());
        // Negative entry.
        let m = vec![vec![0.0, -1.0], vec![-1.0, 0.0]];
        assert!(matches!(
            MetricInstance::from_matrix(1, 1, &m),
            Err(MetricError::BadDistance { .. })
        ));
        // Triangle violation: d(0,2)=10 but d(0,1)+d(1,2)=2.
        let m = vec![
            vec![0.0, 1.0, 10.0],
            vec![1.0, 0.0, 1.0],
            vec![10.0, 1.0, 0.0],
        ];
        let inst = MetricInstance::from_matrix(2, 1, &m).unwrap();
        assert!(matches!(
            inst.validate_metric(),
            Err(MetricError::TriangleViolation { .. })
        ));
    }

    #[test]
    fn planar_instances_validate() {
        let inst = MetricInstance::from_planar(
            &[[0.0, 0.0], [1.0, 2.0], [-3.0, 0.5]],
            &[[0.5, 0.5], [2.0, -1.0]],
        )
        .unwrap();
        inst.validate_metric().unwrap();
        // line metric 0 -- 1 -- 2 with facilities at the ends
        let line = MetricInstance::from_planar(
            &[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]],
            &[[0.0, 0.0], [2.0, 0.0]],
        )
        .unwrap();
        line.validate_metric().unwrap();
        assert_eq!(line.dist_pf(PointId(1), FacilityId(1)), 1.0);
    }

    #[test]
    fn distance_pools() {
        let inst = MetricInstance::from_planar(
            &[[0.0, 0.0], [2.0, 0.0]],
            &[[0.0, 0.0], [1.0, 0.0]],
        )
        .unwrap();
        assert_eq!(inst.facility_client_distances(), vec![0.0, 1.0, 2.0]);
        assert_eq!(inst.facility_distances(FacilityId(1)), vec![1.0]);
        assert_eq!(inst.max_facility_client_distance(), 2.0);
        assert_eq!(inst.min_nonzero_facility_client_distance(), Some(1.0));
    }

    proptest! {
        // (a ∸ b) ∸ c = a ∸ (b + c)
        #[test]
        fn chained_truncation_collapses(a in 0.0..100.0f64, b in 0.0..100.0f64, c in 0.0..100.0f64) {
            let lhs = dotdiv(dotdiv(a, b), c);
            let rhs = dotdiv(a, b + c);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
        }

        // (a + b) ∸ (c + d) ≤ (a ∸ c) + (b ∸ d)
        #[test]
        fn truncation_subadditive(
            a in 0.0..100.0f64, b in 0.0..100.0f64,
            c in 0.0..100.0f64, d in 0.0..100.0f64,
        ) {
            prop_assert!(dotdiv(a + b, c + d) <= dotdiv(a, c) + dotdiv(b, d) + 1e-9);
        }

        // r ↦ δ^r is non-increasing and 1-Lipschitz in the distance argument.
        #[test]
        fn truncated_dist_monotone_lipschitz(
            d1 in 0.0..50.0f64, d2 in 0.0..50.0f64,
            r1 in 0.0..50.0f64, r2 in 0.0..50.0f64,
        ) {
            let (rlo, rhi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
            prop_assert!(dotdiv(d1, rhi) <= dotdiv(d1, rlo) + 1e-12);
            prop_assert!((dotdiv(d1, r1) - dotdiv(d2, r1)).abs() <= (d1 - d2).abs() + 1e-12);
        }
    }
}
