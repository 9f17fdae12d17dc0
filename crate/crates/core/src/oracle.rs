//! Exact reference solvers ("oracles") for desk-size instances.
//!
//! Everything here is deliberately independent of the approximation
//! pipelines: plain enumeration over center subsets and radius/assignment
//! choices, with an explicit state budget so a typo in a test can't spin
//! forever. The approximation suites compare their outputs against these.
//!
//! Two independently coded strategies exist for the ball objective —
//! radius-vector enumeration ([`exact_ball_kmedian`]) and assignment
//! enumeration with per-cluster optimal radii ([`exact_ball_kmedian_assign`])
//! — and are cross-validated on every oracle instance used by the test suite.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::ball_kmedian::{BallKMInstance, BallSolution};
use crate::metric::{dotdiv, FacilityId, MetricInstance, PointId};
use crate::msrdc::{CoverSolution, HFunction};
use crate::norms::{ordered_norm_padded, NormError, Objective};
use crate::reductions::nested_cost;

/// Size limits for oracle calls. The defaults match what the acceptance
/// suite uses; `max_states` can be raised via the `NESTNORM_MAX_STATES`
/// environment variable (see [`OracleBudget::from_env`]).
#[derive(Debug, Clone, Copy)]
pub struct OracleBudget {
    pub max_points: usize,
    pub max_facilities: usize,
    pub max_k: usize,
    pub max_states: u64,
}

impl Default for OracleBudget {
    fn default() -> Self {
        Self {
            max_points: 8,
            max_facilities: 5,
            max_k: 3,
            max_states: 10_000_000,
        }
    }
}

impl OracleBudget {
    /// Default budget with `max_states` overridden by `NESTNORM_MAX_STATES`
    /// when that variable holds a positive integer.
    pub fn from_env() -> Self {
        Self::with_env_value(std::env::var("NESTNORM_MAX_STATES").ok().as_deref())
    }

    fn with_env_value(value: Option<&str>) -> Self {
        let mut b = Self::default();
        if let Some(v) = value {
            if let Ok(states) = v.trim().parse::<u64>() {
                if states > 0 {
                    b.max_states = states;
                }
            }
        }
        b
    }
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("instance exceeds oracle budget: {what} = {value} > {max}")]
    TooLarge {
        what: &'static str,
        value: usize,
        max: usize,
    },
    #[error("enumeration needs about {states} states, above the budget of {max}")]
    BudgetExceeded { states: u64, max: u64 },
    #[error("knapsack oracle needs nonnegative weights and budget (got {what} = {value})")]
    BadKnapsack { what: &'static str, value: f64 },
    #[error(transparent)]
    Norm(#[from] NormError),
}

fn check_dims(inst: &MetricInstance, k: usize, budget: &OracleBudget) -> Result<(), OracleError> {
    if inst.n_points() > budget.max_points {
        return Err(OracleError::TooLarge {
            what: "points",
            value: inst.n_points(),
            max: budget.max_points,
        });
    }
    if inst.n_facilities() > budget.max_facilities {
        return Err(OracleError::TooLarge {
            what: "facilities",
            value: inst.n_facilities(),
            max: budget.max_facilities,
        });
    }
    if k > budget.max_k {
        return Err(OracleError::TooLarge {
            what: "k",
            value: k,
            max: budget.max_k,
        });
    }
    Ok(())
}

/// All facility subsets of size 1..=k, as sorted index vectors.
fn subsets_up_to(n_fac: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let k = k.min(n_fac);
    for mask in 1u32..(1u32 << n_fac) {
        if (mask.count_ones() as usize) <= k {
            out.push((0..n_fac).filter(|i| mask >> i & 1 == 1).collect());
        }
    }
    out.sort_by_key(|s: &Vec<usize>| (s.len(), s.clone()));
    out
}

/// Radius candidates for a facility: 0 plus every distance to a client.
fn radius_pool(inst: &MetricInstance, x: usize) -> Vec<f64> {
    let mut pool = inst.facility_distances(FacilityId(x));
    if pool.first() != Some(&0.0) {
        pool.insert(0, 0.0);
    }
    pool
}

fn count_radius_states(inst: &MetricInstance, subsets: &[Vec<usize>]) -> u64 {
    let pool_sizes: Vec<u64> = (0..inst.n_facilities())
        .map(|x| radius_pool(inst, x).len() as u64)
        .collect();
    subsets
        .iter()
        .map(|s| s.iter().map(|&x| pool_sizes[x]).product::<u64>())
        .fold(0u64, u64::saturating_add)
}

/// Enumerates every (subset, radius vector) pair and folds a cost over them.
/// `eval` returns `None` to reject infeasible configurations.
fn enumerate_placements(
    inst: &MetricInstance,
    k: usize,
    budget: &OracleBudget,
    mut eval: impl FnMut(&[usize], &[f64]) -> Option<f64>,
) -> Result<Option<(Vec<usize>, Vec<f64>, f64)>, OracleError> {
    check_dims(inst, k, budget)?;
    let subsets = subsets_up_to(inst.n_facilities(), k);
    let states = count_radius_states(inst, &subsets);
    if states > budget.max_states {
        return Err(OracleError::BudgetExceeded {
            states,
            max: budget.max_states,
        });
    }
    let pools: Vec<Vec<f64>> = (0..inst.n_facilities())
        .map(|x| radius_pool(inst, x))
        .collect();
    let mut best: Option<(Vec<usize>, Vec<f64>, f64)> = None;
    for subset in &subsets {
        let sizes: Vec<usize> = subset.iter().map(|&x| pools[x].len()).collect();
        let mut idx = vec![0usize; subset.len()];
        loop {
            let radii: Vec<f64> = subset
                .iter()
                .zip(&idx)
                .map(|(&x, &i)| pools[x][i])
                .collect();
            if let Some(cost) = eval(subset, &radii) {
                if best.as_ref().map_or(true, |(_, _, b)| cost < *b) {
                    best = Some((subset.clone(), radii, cost));
                }
            }
            // mixed-radix increment
            let mut pos = idx.len();
            loop {
                if pos == 0 {
                    break;
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < sizes[pos] {
                    break;
                }
                idx[pos] = 0;
            }
            if idx.iter().all(|&i| i == 0) {
                break;
            }
        }
    }
    Ok(best)
}

fn to_ball_solution(subset: &[usize], radii: &[f64]) -> BallSolution {
    let mut map = BTreeMap::new();
    for (&x, &r) in subset.iter().zip(radii) {
        map.insert(FacilityId(x), r);
    }
    BallSolution {
        facilities: subset.iter().map(|&x| FacilityId(x)).collect(),
        radii: map,
    }
}

/// Exact ball objective optimum by enumerating radius vectors; clients
/// connect to the cheapest truncated distance.
pub fn exact_ball_kmedian(
    inst: &BallKMInstance,
    budget: &OracleBudget,
) -> Result<(BallSolution, f64), OracleError> {
    let m = &inst.metric;
    let best = enumerate_placements(m, inst.k, budget, |subset, radii| {
        let mut cost = 0.0;
        for p in 0..m.n_points() {
            let conn = subset
                .iter()
                .zip(radii)
                .map(|(&x, &r)| dotdiv(m.dist_pf(PointId(p), FacilityId(x)), r))
                .fold(f64::INFINITY, f64::min);
            cost += conn;
        }
        cost += inst.rho_f() * radii.iter().sum::<f64>();
        Some(cost)
    })?
    .expect("nonempty enumeration");
    Ok((to_ball_solution(&best.0, &best.1), best.2))
}

/// Exact ball objective optimum by the dual strategy: enumerate assignments,
/// then give each cluster its one-dimensional optimal radius (the ball cost
/// of a cluster is convex piecewise-linear in the radius, so the optimum sits
/// on a distance value or at zero).
pub fn exact_ball_kmedian_assign(
    inst: &BallKMInstance,
    budget: &OracleBudget,
) -> Result<(BallSolution, f64), OracleError> {
    let m = &inst.metric;
    check_dims(m, inst.k, budget)?;
    let subsets = subsets_up_to(m.n_facilities(), inst.k);
    let states: u64 = subsets
        .iter()
        .map(|s| (s.len() as u64).saturating_pow(m.n_points() as u32))
        .fold(0u64, u64::saturating_add);
    if states > budget.max_states {
        return Err(OracleError::BudgetExceeded {
            states,
            max: budget.max_states,
        });
    }

    let cluster_cost = |dists: &[f64]| -> (f64, f64) {
        // min_r Σ (d ∸ r) + ρ·r over r in {0} ∪ dists
        let mut best = (dists.iter().sum::<f64>(), 0.0);
        for &r in dists {
            let c = dists.iter().map(|&d| dotdiv(d, r)).sum::<f64>() + inst.rho_f() * r;
            if c < best.0 {
                best = (c, r);
            }
        }
        best
    };

    let mut best: Option<(Vec<usize>, Vec<f64>, f64)> = None;
    for subset in &subsets {
        let s = subset.len();
        let mut assign = vec![0usize; m.n_points()];
        loop {
            let mut cost = 0.0;
            let mut radii = vec![0.0; s];
            for (ci, _) in subset.iter().enumerate() {
                let dists: Vec<f64> = (0..m.n_points())
                    .filter(|&p| assign[p] == ci)
                    .map(|p| m.dist_pf(PointId(p), FacilityId(subset[ci])))
                    .collect();
                let (c, r) = cluster_cost(&dists);
                cost += c;
                radii[ci] = r;
            }
            if best.as_ref().map_or(true, |(_, _, b)| cost < *b) {
                best = Some((subset.clone(), radii, cost));
            }
            // next assignment
            let mut pos = assign.len();
            loop {
                if pos == 0 {
                    break;
                }
                pos -= 1;
                assign[pos] += 1;
                if assign[pos] < s {
                    break;
                }
                assign[pos] = 0;
            }
            if assign.iter().all(|&a| a == 0) {
                break;
            }
        }
    }
    let best = best.expect("nonempty enumeration");
    Ok((to_ball_solution(&best.0, &best.1), best.2))
}

/// Exact optimum for covering all clients with at most `k` balls, minimizing
/// the ordered norm of the radius vector (padded to length `k`).
pub fn exact_cover_ord(
    inst: &MetricInstance,
    k: usize,
    w: &[f64],
    budget: &OracleBudget,
) -> Result<(CoverSolution, f64), OracleError> {
    let best = enumerate_placements(inst, k, budget, |subset, radii| {
        if !covers_all(inst, subset, radii) {
            return None;
        }
        Some(ordered_norm_padded(radii, w).expect("validated weights"))
    })?;
    let best = best.expect("the all-max-radius placement always covers");
    Ok((to_cover_solution(&best.0, &best.1), best.2))
}

/// Exact optimum for covering all clients with at most `k` balls, minimizing
/// the sum of radius-dependent costs `Σ h(r(x))`.
pub fn exact_msrdc(
    inst: &MetricInstance,
    k: usize,
    h: &HFunction,
    budget: &OracleBudget,
) -> Result<(CoverSolution, f64), OracleError> {
    let best = enumerate_placements(inst, k, budget, |subset, radii| {
        if !covers_all(inst, subset, radii) {
            return None;
        }
        Some(radii.iter().map(|&r| h.eval(r)).sum())
    })?;
    let best = best.expect("the all-max-radius placement always covers");
    Ok((to_cover_solution(&best.0, &best.1), best.2))
}

fn covers_all(inst: &MetricInstance, subset: &[usize], radii: &[f64]) -> bool {
    (0..inst.n_points()).all(|p| {
        subset
            .iter()
            .zip(radii)
            .any(|(&x, &r)| inst.dist_pf(PointId(p), FacilityId(x)) <= r)
    })
}

fn to_cover_solution(subset: &[usize], radii: &[f64]) -> CoverSolution {
    let mut map = BTreeMap::new();
    for (&x, &r) in subset.iter().zip(radii) {
        map.insert(FacilityId(x), r);
    }
    CoverSolution {
        facilities: subset.iter().map(|&x| FacilityId(x)).collect(),
        radii: map,
    }
}

/// Exact nested-norm optimum by enumerating center subsets and assignments.
/// Per-cluster vectors are full length-`n` (zero for unassigned clients);
/// the outer norm sees the per-cluster values padded to length `k`.
pub fn exact_nested(
    inst: &MetricInstance,
    k: usize,
    inner: &Objective,
    outer: &Objective,
    budget: &OracleBudget,
) -> Result<(Vec<FacilityId>, Vec<FacilityId>, f64), OracleError> {
    check_dims(inst, k, budget)?;
    let subsets = subsets_up_to(inst.n_facilities(), k);
    let states: u64 = subsets
        .iter()
        .map(|s| (s.len() as u64).saturating_pow(inst.n_points() as u32))
        .fold(0u64, u64::saturating_add);
    if states > budget.max_states {
        return Err(OracleError::BudgetExceeded {
            states,
            max: budget.max_states,
        });
    }
    let mut best: Option<(Vec<usize>, Vec<usize>, f64)> = None;
    for subset in &subsets {
        let s = subset.len();
        let mut assign = vec![0usize; inst.n_points()];
        loop {
            let centers: Vec<FacilityId> = assign.iter().map(|&ci| FacilityId(subset[ci])).collect();
            let cost = nested_cost(inst, k, &centers, inner, outer)?;
            if best.as_ref().map_or(true, |(_, _, b)| cost < *b) {
                best = Some((subset.clone(), assign.clone(), cost));
            }
            let mut pos = assign.len();
            loop {
                if pos == 0 {
                    break;
                }
                pos -= 1;
                assign[pos] += 1;
                if assign[pos] < s {
                    break;
                }
                assign[pos] = 0;
            }
            if assign.iter().all(|&a| a == 0) {
                break;
            }
        }
    }
    let (subset, assign, cost) = best.expect("nonempty enumeration");
    Ok((
        subset.iter().map(|&x| FacilityId(x)).collect(),
        assign.iter().map(|&ci| FacilityId(subset[ci])).collect(),
        cost,
    ))
}

/// Exact optimum of `max Σ v_i u_i` over `u ∈ [0,1]^m` with
/// `Σ w_i u_i ≤ budget`, by enumerating vertices: integral subsets plus one
/// fractional coordinate that makes the constraint tight.
pub fn exact_knapsack_vertices(
    values: &[f64],
    weights: &[f64],
    budget: f64,
) -> Result<(f64, Vec<f64>), OracleError> {
    if budget < 0.0 || !budget.is_finite() {
        return Err(OracleError::BadKnapsack {
            what: "budget",
            value: budget,
        });
    }
    for &w in weights {
        if w < 0.0 || !w.is_finite() {
            return Err(OracleError::BadKnapsack {
                what: "weight",
                value: w,
            });
        }
    }
    let m = values.len();
    assert_eq!(m, weights.len());
    if m > 24 {
        return Err(OracleError::TooLarge {
            what: "knapsack items",
            value: m,
            max: 24,
        });
    }
    let mut best_val = f64::NEG_INFINITY;
    let mut best_u = vec![0.0; m];
    for mask in 0u32..(1u32 << m) {
        let mut wsum = 0.0;
        let mut vsum = 0.0;
        for i in 0..m {
            if mask >> i & 1 == 1 {
                wsum += weights[i];
                vsum += values[i];
            }
        }
        if wsum > budget + 1e-12 {
            continue;
        }
        if vsum > best_val {
            best_val = vsum;
            best_u = (0..m).map(|i| (mask >> i & 1) as f64).collect();
        }
        // One fractional completion per remaining positive-weight item.
        for j in 0..m {
            if mask >> j & 1 == 0 && weights[j] > 0.0 {
                let frac = ((budget - wsum) / weights[j]).clamp(0.0, 1.0);
                if frac > 0.0 && frac < 1.0 {
                    let v = vsum + frac * values[j];
                    if v > best_val {
                        best_val = v;
                        let mut u: Vec<f64> = (0..m).map(|i| (mask >> i & 1) as f64).collect();
                        u[j] = frac;
                        best_u = u;
                    }
                }
            }
        }
    }
    Ok((best_val.max(0.0), best_u))
}
