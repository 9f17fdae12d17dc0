//! Solver for the ball objective: open at most `k` balls (a center with a
//! radius) minimizing `Σ_p min_x (δ(p,x) ∸ r(x)) + ρ·Σ_x r(x)`.
//!
//! The top-ℓ clustering objective reduces to this problem with `ρ = ℓ`
//! ([`reduce_topl_solution`] / [`lift_ball_solution`] translate solutions in
//! both directions without increasing cost). The solver itself is a pipeline:
//!
//! 1. guess the largest balls of an optimal solution
//!    ([`enumerate_guesses`]),
//! 2. for a fixed guess, solve the Lagrangian relaxation (every open ball
//!    pays a fixed cost `λ` on top of `ρr`) with a primal-dual subroutine
//!    ([`lmp_primal_dual`]); its output cost is within factor 3 of
//!    `OPT + λk` minus three times its own opening charge,
//! 3. binary-search `λ` until two adjacent runs sandwich the budget `k`
//!    ([`binary_search_bipoint`]),
//! 4. round the sandwiching pair into a single solution with at most `k`
//!    balls via a knapsack LP over groups of nearby balls
//!    ([`build_groups`], [`solve_knapsack_lp`], [`round_bipoint`]).
//!
//! Every primal-dual run re-verifies its own dual certificate (feasibility,
//! the contributing-clients payment identity, and the tripled-radius
//! connection bound) and panics on violation; approximation-ratio checks
//! against exact oracles live in the test suites.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::engine::{dual_ascent, greedy_prune, AscentResult, Tier};
use crate::metric::{dotdiv, FacilityId, MetricError, MetricInstance, PointId};

/// Relative tolerance for the always-on dual-certificate checks.
const CHECK_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum BallError {
    #[error("k = {k} must satisfy 1 <= k <= number of facilities ({facilities})")]
    BadK { k: usize, facilities: usize },
    #[error("rho must be a positive integer")]
    BadRho,
    #[error("epsilon must be a finite positive number, got {value}")]
    BadEpsilon { value: f64 },
    #[error("lambda must be a finite nonnegative number, got {value}")]
    BadLambda { value: f64 },
    #[error("solution opens no facilities")]
    EmptySolution,
    #[error("radius {value} at {facility} must be finite and nonnegative")]
    BadRadius { facility: FacilityId, value: f64 },
    #[error("assignment must name a facility for each of {expected} points, got {got}")]
    AssignmentLength { expected: usize, got: usize },
    #[error("prefix length ell must be at least 1")]
    BadEll,
    #[error("knapsack {what} must be finite ({detail}), got {value}")]
    BadKnapsackInput {
        what: &'static str,
        detail: &'static str,
        value: f64,
    },
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// A ball-clustering instance: the metric plus the budget `k` and the
/// integer radius-scaling factor `ρ ≥ 1`.
#[derive(Debug, Clone)]
pub struct BallKMInstance {
    pub metric: MetricInstance,
    pub k: usize,
    pub rho: u32,
}

impl BallKMInstance {
    /// Checks the instance invariants `1 ≤ k ≤ |F|` and `ρ ≥ 1`.
    pub fn validate(&self) -> Result<(), BallError> {
        if self.k == 0 || self.k > self.metric.n_facilities() {
            return Err(BallError::BadK {
                k: self.k,
                facilities: self.metric.n_facilities(),
            });
        }
        if self.rho == 0 {
            return Err(BallError::BadRho);
        }
        Ok(())
    }

    /// The scaling factor as a float (it is stored as an integer).
    #[inline]
    pub fn rho_f(&self) -> f64 {
        f64::from(self.rho)
    }
}

/// A set of open balls: facilities with their radii.
#[derive(Debug, Clone, PartialEq)]
pub struct BallSolution {
    /// Open facilities, ascending by id.
    pub facilities: Vec<FacilityId>,
    /// Radius per open facility; keys equal `facilities`.
    pub radii: BTreeMap<FacilityId, f64>,
}

impl BallSolution {
    /// Builds a solution from a radius map; the facility list is its keys.
    pub fn from_radii(radii: BTreeMap<FacilityId, f64>) -> Self {
        BallSolution {
            facilities: radii.keys().copied().collect(),
            radii,
        }
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    fn check(&self, metric: &MetricInstance) -> Result<(), BallError> {
        if self.radii.is_empty() {
            return Err(BallError::EmptySolution);
        }
        for (&x, &r) in &self.radii {
            if x.0 >= metric.n_facilities() {
                return Err(BallError::Metric(MetricError::UnknownId {
                    kind: "facility",
                    id: x.0,
                    count: metric.n_facilities(),
                }));
            }
            if !r.is_finite() || r < 0.0 {
                return Err(BallError::BadRadius {
                    facility: x,
                    value: r,
                });
            }
        }
        Ok(())
    }
}

/// Objective value `Σ_p min_x (δ(p,x) ∸ r(x)) + ρ·Σ_x r(x)`.
pub fn cost(inst: &BallKMInstance, sol: &BallSolution) -> Result<f64, BallError> {
    sol.check(&inst.metric)?;
    let m = &inst.metric;
    let mut total = 0.0;
    for p in 0..m.n_points() {
        let conn = sol
            .radii
            .iter()
            .map(|(&x, &r)| dotdiv(m.dist_pf(PointId(p), x), r))
            .fold(f64::INFINITY, f64::min);
        total += conn;
    }
    total += inst.rho_f() * sol.radii.values().sum::<f64>();
    Ok(total)
}

/// Cheapest-ball assignment: each point goes to the facility minimizing the
/// truncated distance, ties to the smallest facility id.
pub fn assignment(
    metric: &MetricInstance,
    sol: &BallSolution,
) -> Result<Vec<FacilityId>, BallError> {
    sol.check(metric)?;
    let mut out = Vec::with_capacity(metric.n_points());
    for p in 0..metric.n_points() {
        let mut best: Option<(f64, FacilityId)> = None;
        for (&x, &r) in &sol.radii {
            let d = dotdiv(metric.dist_pf(PointId(p), x), r);
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, x));
            }
        }
        out.push(best.expect("solution is nonempty").1);
    }
    Ok(out)
}

fn check_assignment(metric: &MetricInstance, assign: &[FacilityId]) -> Result<(), BallError> {
    if assign.len() != metric.n_points() {
        return Err(BallError::AssignmentLength {
            expected: metric.n_points(),
            got: assign.len(),
        });
    }
    for &x in assign {
        if x.0 >= metric.n_facilities() {
            return Err(BallError::Metric(MetricError::UnknownId {
                kind: "facility",
                id: x.0,
                count: metric.n_facilities(),
            }));
        }
    }
    Ok(())
}

/// Sum over clusters of the top-`ell` distances (the clustering objective
/// the ball objective stands in for, with `ρ = ell`).
fn clusters_topl_cost(metric: &MetricInstance, assign: &[FacilityId], ell: usize) -> f64 {
    let mut clusters: BTreeMap<FacilityId, Vec<f64>> = BTreeMap::new();
    for (p, &x) in assign.iter().enumerate() {
        clusters
            .entry(x)
            .or_default()
            .push(metric.dist_pf(PointId(p), x));
    }
    let mut total = 0.0;
    for dists in clusters.values_mut() {
        dists.sort_by(|a, b| b.partial_cmp(a).expect("distances are finite"));
        total += dists.iter().take(ell).sum::<f64>();
    }
    total
}

/// Ball cost of `sol` evaluated with scaling factor `ell` (used by the
/// translation checks, which hold for `ρ = ell`).
fn ball_cost_at(metric: &MetricInstance, sol: &BallSolution, rho: f64) -> f64 {
    let mut total = 0.0;
    for p in 0..metric.n_points() {
        total += sol
            .radii
            .iter()
            .map(|(&x, &r)| dotdiv(metric.dist_pf(PointId(p), x), r))
            .fold(f64::INFINITY, f64::min);
    }
    total + rho * sol.radii.values().sum::<f64>()
}

/// Turns a clustering (assignment) solution into a ball solution: each used
/// center gets the `ell`-th largest distance in its cluster as radius (zero
/// when the cluster has fewer than `ell` points). With `ρ = ell` the ball
/// cost of the result never exceeds the sum of per-cluster top-`ell` costs.
pub fn reduce_topl_solution(
    metric: &MetricInstance,
    assign: &[FacilityId],
    ell: usize,
) -> Result<BallSolution, BallError> {
    if ell == 0 {
        return Err(BallError::BadEll);
    }
    check_assignment(metric, assign)?;
    let mut clusters: BTreeMap<FacilityId, Vec<f64>> = BTreeMap::new();
    for (p, &x) in assign.iter().enumerate() {
        clusters
            .entry(x)
            .or_default()
            .push(metric.dist_pf(PointId(p), x));
    }
    let mut radii = BTreeMap::new();
    for (x, dists) in clusters.iter_mut() {
        dists.sort_by(|a, b| b.partial_cmp(a).expect("distances are finite"));
        let r = if dists.len() >= ell { dists[ell - 1] } else { 0.0 };
        radii.insert(*x, r);
    }
    let sol = BallSolution::from_radii(radii);
    debug_assert!(
        {
            let ball = ball_cost_at(metric, &sol, ell as f64);
            let nested = clusters_topl_cost(metric, assign, ell);
            ball <= nested + CHECK_TOL * (1.0 + nested.abs())
        },
        "reduction increased the cost"
    );
    Ok(sol)
}

/// Turns a ball solution into a clustering solution by assigning every point
/// to its truncated-distance-closest ball (ties to the smaller facility id).
/// With `ρ = ell` the per-cluster top-`ell` cost of the result never exceeds
/// the ball cost of `sol`.
pub fn lift_ball_solution(
    metric: &MetricInstance,
    sol: &BallSolution,
    ell: usize,
) -> Result<Vec<FacilityId>, BallError> {
    if ell == 0 {
        return Err(BallError::BadEll);
    }
    let assign = assignment(metric, sol)?;
    debug_assert!(
        {
            let ball = ball_cost_at(metric, sol, ell as f64);
            let nested = clusters_topl_cost(metric, &assign, ell);
            nested <= ball + CHECK_TOL * (1.0 + ball.abs())
        },
        "lifting increased the cost"
    );
    Ok(assign)
}

/// A guessed set of "large" balls held open throughout one solver run.
#[derive(Debug, Clone, Default)]
pub struct Guess {
    /// Guessed facilities with their radii, ascending by facility id. Every
    /// radius is one of that facility's client distances.
    pub balls: Vec<(FacilityId, f64)>,
}

impl Guess {
    pub fn empty() -> Self {
        Guess { balls: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    pub fn radius_of(&self, x: FacilityId) -> Option<f64> {
        self.balls.iter().find(|(y, _)| *y == x).map(|(_, r)| *r)
    }

    /// Smallest guessed radius; positive infinity for the empty guess (so
    /// "at most the smallest guessed radius" never constrains anything).
    pub fn min_radius(&self) -> f64 {
        self.balls
            .iter()
            .map(|(_, r)| *r)
            .fold(f64::INFINITY, f64::min)
    }
}

fn subsets_of_size(n: usize, size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(size);
    fn rec(start: usize, n: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < size - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, size, cur, out);
            cur.pop();
        }
    }
    rec(0, n, size, &mut cur, &mut out);
    out
}

/// All guesses with exactly `size` facilities: every size-`size` facility
/// subset combined with every choice of radii from each member's own client
/// distances. Deterministic order: subsets lexicographic, radii ascending by
/// mixed radix.
pub fn enumerate_guesses_of_size(metric: &MetricInstance, size: usize) -> Vec<Guess> {
    let pools: Vec<Vec<f64>> = (0..metric.n_facilities())
        .map(|x| metric.facility_distances(FacilityId(x)))
        .collect();
    let mut out = Vec::new();
    for subset in subsets_of_size(metric.n_facilities(), size) {
        let sizes: Vec<usize> = subset.iter().map(|&x| pools[x].len()).collect();
        let mut idx = vec![0usize; size];
        loop {
            out.push(Guess {
                balls: subset
                    .iter()
                    .zip(&idx)
                    .map(|(&x, &i)| (FacilityId(x), pools[x][i]))
                    .collect(),
            });
            // advance mixed-radix counter
            let mut pos = size;
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
    out
}

/// Guess size used by the solver for accuracy `eps`: `⌈3/eps⌉` capped by the
/// budget and the number of facilities.
pub fn guess_size(inst: &BallKMInstance, eps: f64) -> Result<usize, BallError> {
    if !eps.is_finite() || eps <= 0.0 {
        return Err(BallError::BadEpsilon { value: eps });
    }
    let t = (3.0 / eps).ceil() as usize;
    Ok(t.min(inst.k).min(inst.metric.n_facilities()))
}

/// Guesses at the full size for accuracy `eps` (the solver additionally
/// tries every smaller size, since an optimal solution may open fewer
/// facilities than the target size).
pub fn enumerate_guesses(inst: &BallKMInstance, eps: f64) -> Result<Vec<Guess>, BallError> {
    inst.validate()?;
    Ok(enumerate_guesses_of_size(&inst.metric, guess_size(inst, eps)?))
}

/// Dual certificate produced alongside each primal-dual solution.
#[derive(Debug, Clone)]
pub struct DualState {
    /// Final dual value per point.
    pub alpha: Vec<f64>,
    /// Strictly positive payments `(facility, ball radius, point, value)`
    /// into non-guessed balls.
    pub beta: Vec<(FacilityId, f64, PointId, f64)>,
    /// For every opened non-guessed facility: the points paying strictly
    /// into its final-radius ball.
    pub contributors: BTreeMap<FacilityId, Vec<PointId>>,
}

struct LmpTiers {
    tiers: Vec<Tier>,
    /// Guessed facilities (prefired single-tier entries).
    guessed: BTreeMap<usize, f64>,
}

fn build_lmp_tiers(inst: &BallKMInstance, lambda: f64, guess: &Guess) -> LmpTiers {
    let m = &inst.metric;
    let n = m.n_points();
    let min_rhat = guess.min_radius();
    let guessed: BTreeMap<usize, f64> = guess.balls.iter().map(|(x, r)| (x.0, *r)).collect();
    let mut tiers = Vec::new();
    for x in 0..m.n_facilities() {
        let activation = |r: f64| -> Vec<Option<f64>> {
            (0..n)
                .map(|p| Some(dotdiv(m.dist_pf(PointId(p), FacilityId(x)), r)))
                .collect()
        };
        if let Some(&rhat) = guessed.get(&x) {
            tiers.push(Tier {
                facility: x,
                radius: rhat,
                threshold: 0.0,
                prefired: true,
                activation: activation(rhat),
            });
        } else {
            // Allowed radii: zero plus every client distance no larger than
            // the smallest guessed radius. Zero must be present so that a
            // facility can open as a pure connection point.
            let mut radii = vec![0.0];
            for d in m.facility_distances(FacilityId(x)) {
                if d > 0.0 && d <= min_rhat {
                    radii.push(d);
                }
            }
            for r in radii {
                tiers.push(Tier {
                    facility: x,
                    radius: r,
                    threshold: lambda + inst.rho_f() * r,
                    prefired: false,
                    activation: activation(r),
                });
            }
        }
    }
    LmpTiers { tiers, guessed }
}

/// Verifies the dual certificate; panics with a description on violation.
fn verify_dual(
    inst: &BallKMInstance,
    lambda: f64,
    lt: &LmpTiers,
    asc: &AscentResult,
    sol: &BallSolution,
    kept: &[(usize, f64, usize)], // (facility, r', tier index)
) {
    let m = &inst.metric;
    let n = m.n_points();
    let rel = |x: f64| CHECK_TOL * (1.0 + x.abs());

    for (t, tier) in lt.tiers.iter().enumerate() {
        if tier.prefired {
            // Guessed balls collect nothing: no dual value may exceed the
            // ball-boundary distance.
            for p in 0..n {
                let c = tier.activation[p].expect("ball tiers interact with every client");
                assert!(
                    asc.alpha[p] <= c + rel(c),
                    "dual value {} of p{} exceeds guessed-ball boundary {} at f{}",
                    asc.alpha[p],
                    p,
                    c,
                    tier.facility
                );
            }
            continue;
        }
        let budget = lambda + inst.rho_f() * tier.radius;
        let paid: f64 = (0..n).map(|p| asc.beta(&lt.tiers, t, p)).sum();
        assert!(
            paid <= budget + rel(budget),
            "payments {} into (f{}, r={}) exceed budget {}",
            paid,
            tier.facility,
            tier.radius,
            budget
        );
        if asc.fire_time[t].is_some() {
            assert!(
                (paid - budget).abs() <= rel(budget),
                "opened ball (f{}, r={}) collected {} instead of its budget {}",
                tier.facility,
                tier.radius,
                paid,
                budget
            );
        }
    }

    // Contributor sets of the kept facilities are pairwise disjoint, and the
    // payment identity holds: connection costs at radius r' plus opening
    // charges equal the contributors' total dual value.
    let mut seen = vec![false; n];
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for &(x, r_prime, t) in kept {
        lhs += inst.rho_f() * r_prime + lambda;
        for p in 0..n {
            let b = asc.beta(&lt.tiers, t, p);
            if b > 0.0 {
                assert!(
                    !seen[p],
                    "p{p} contributes to two kept facilities; pruning must prevent this"
                );
                seen[p] = true;
                lhs += dotdiv(m.dist_pf(PointId(p), FacilityId(x)), r_prime);
                rhs += asc.alpha[p];
            }
        }
    }
    assert!(
        (lhs - rhs).abs() <= rel(lhs.max(rhs)),
        "payment identity violated: connection+opening {} vs dual mass {}",
        lhs,
        rhs
    );

    // Every non-contributing point reaches some final ball within three
    // times its dual value.
    for p in 0..n {
        if seen[p] {
            continue;
        }
        let reach = sol
            .radii
            .iter()
            .map(|(&x, &r)| dotdiv(m.dist_pf(PointId(p), x), r))
            .fold(f64::INFINITY, f64::min);
        let bound = 3.0 * asc.alpha[p];
        assert!(
            reach <= bound + rel(bound),
            "p{} reaches the solution at {} but 3x its dual value is only {}",
            p,
            reach,
            bound
        );
    }
}

/// Primal-dual subroutine for the Lagrangian relaxation at opening cost
/// `λ`: returns the opened balls (guessed balls as guessed, others at three
/// times their payment radius) together with the dual certificate. The
/// certificate is re-verified on every call.
pub fn lmp_primal_dual(
    inst: &BallKMInstance,
    lambda: f64,
    guess: &Guess,
) -> Result<(BallSolution, DualState), BallError> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(BallError::BadLambda { value: lambda });
    }
    let m = &inst.metric;
    let n = m.n_points();
    let lt = build_lmp_tiers(inst, lambda, guess);
    let asc = dual_ascent(n, &lt.tiers);

    // Final payment radius per non-guessed facility: the largest opened
    // ball; tiers are sorted ascending so the last opened one wins.
    let mut max_fired: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for (t, tier) in lt.tiers.iter().enumerate() {
        if !tier.prefired && asc.fire_time[t].is_some() {
            max_fired.insert(tier.facility, (tier.radius, t));
        }
    }
    let candidates: Vec<(usize, f64)> = max_fired.iter().map(|(&x, &(r, _))| (x, r)).collect();
    let cand_tier: Vec<usize> = max_fired.values().map(|&(_, t)| t).collect();

    // Strict payers per candidate, for the conflict relation.
    let payers: Vec<Vec<bool>> = cand_tier
        .iter()
        .map(|&t| (0..n).map(|p| asc.beta(&lt.tiers, t, p) > 0.0).collect())
        .collect();
    let (kept_idx, _witness) = greedy_prune(&candidates, |a, b| {
        (0..n).any(|p| payers[a][p] && payers[b][p])
    });

    let mut radii: BTreeMap<FacilityId, f64> = lt
        .guessed
        .iter()
        .map(|(&x, &r)| (FacilityId(x), r))
        .collect();
    let mut kept: Vec<(usize, f64, usize)> = Vec::new();
    let mut contributors = BTreeMap::new();
    for &i in &kept_idx {
        let (x, r_prime) = candidates[i];
        radii.insert(FacilityId(x), 3.0 * r_prime);
        kept.push((x, r_prime, cand_tier[i]));
        contributors.insert(
            FacilityId(x),
            (0..n).filter(|&p| payers[i][p]).map(PointId).collect(),
        );
    }
    let sol = BallSolution::from_radii(radii);

    verify_dual(inst, lambda, &lt, &asc, &sol, &kept);

    let mut beta = Vec::new();
    for (t, tier) in lt.tiers.iter().enumerate() {
        if tier.prefired {
            continue;
        }
        for p in 0..n {
            let b = asc.beta(&lt.tiers, t, p);
            if b > 0.0 {
                beta.push((FacilityId(tier.facility), tier.radius, PointId(p), b));
            }
        }
    }
    Ok((
        sol,
        DualState {
            alpha: asc.alpha,
            beta,
            contributors,
        },
    ))
}

/// A pair of solutions whose sizes sandwich the budget, with the convex
/// weights that hit it exactly.
#[derive(Debug, Clone)]
pub struct BiPointSolution {
    /// The small solution (`|X1| < k`).
    pub sol1: BallSolution,
    /// The large solution (`|X2| > k`).
    pub sol2: BallSolution,
    /// Weight of `sol1`: `(|X2| - k) / (|X2| - |X1|)`.
    pub a: f64,
    /// Weight of `sol2`: `(k - |X1|) / (|X2| - |X1|)`.
    pub b: f64,
    /// Opening cost that produced `sol1`.
    pub lambda1: f64,
    /// Opening cost that produced `sol2`.
    pub lambda2: f64,
}

/// Outcome of the `λ` search: either a single within-budget solution found
/// along the way, or a sandwiching pair for the rounding step.
#[derive(Debug, Clone)]
pub enum SearchOutcome {
    Direct { solution: BallSolution, lambda: f64 },
    BiPoint(BiPointSolution),
}

/// Shrinks an over-budget high-`λ` run to the guessed balls only (the
/// opening charge saved at that `λ` dominates any connection increase). An
/// empty guess keeps the single largest ball instead.
fn shrink_to_guess(guess: &Guess, raw: &BallSolution) -> BallSolution {
    if guess.is_empty() {
        let (&x, &r) = raw
            .radii
            .iter()
            .max_by(|(xa, ra), (xb, rb)| {
                ra.partial_cmp(rb)
                    .expect("radii are finite")
                    .then(xb.0.cmp(&xa.0))
            })
            .expect("primal-dual output is nonempty");
        return BallSolution::from_radii([(x, r)].into());
    }
    BallSolution::from_radii(guess.balls.iter().copied().collect())
}

/// Binary search over the opening cost. Returns a direct solution whenever a
/// probe lands exactly on budget (or below it at `λ = 0`), otherwise a
/// bi-point pair with `|X1| < k < |X2|` and `|λ1 - λ2|` below the
/// `ε`-dependent resolution.
pub fn binary_search_bipoint(
    inst: &BallKMInstance,
    eps: f64,
    guess: &Guess,
) -> Result<SearchOutcome, BallError> {
    if !eps.is_finite() || eps <= 0.0 {
        return Err(BallError::BadEpsilon { value: eps });
    }
    inst.validate()?;
    let m = &inst.metric;
    let dmax = m.max_facility_client_distance();
    if dmax == 0.0 {
        // Degenerate metric: every point sits on every facility. Open the
        // guessed balls (all radii are then 0), or a single facility.
        let solution = if guess.is_empty() {
            BallSolution::from_radii([(FacilityId(0), 0.0)].into())
        } else {
            shrink_to_guess(guess, &BallSolution::from_radii(BTreeMap::new()))
        };
        return Ok(SearchOutcome::Direct {
            solution,
            lambda: 0.0,
        });
    }

    // Zero opening cost: within budget means a direct 3-approximation.
    let (sol_zero, _) = lmp_primal_dual(inst, 0.0, guess)?;
    if sol_zero.len() == inst.k {
        return Ok(SearchOutcome::Direct {
            solution: sol_zero,
            lambda: 0.0,
        });
    }
    if sol_zero.len() < inst.k {
        return Ok(SearchOutcome::Direct {
            solution: sol_zero,
            lambda: 0.0,
        });
    }
    let mut low = (0.0f64, sol_zero);

    // High opening cost: shrink to the guess if the run is over budget.
    let lambda_high = m.n_points() as f64 * dmax;
    let (raw_high, _) = lmp_primal_dual(inst, lambda_high, guess)?;
    let sol_high = if raw_high.len() <= inst.k {
        raw_high
    } else {
        shrink_to_guess(guess, &raw_high)
    };
    if sol_high.len() == inst.k {
        return Ok(SearchOutcome::Direct {
            solution: sol_high,
            lambda: lambda_high,
        });
    }
    let mut high = (lambda_high, sol_high);

    let dmin = m
        .min_nonzero_facility_client_distance()
        .expect("dmax > 0 implies a nonzero distance");
    let resolution = eps * dmin / (3.0 * m.n_facilities() as f64);

    while high.0 - low.0 >= resolution {
        let mid = 0.5 * (high.0 + low.0);
        if mid <= low.0 || mid >= high.0 {
            break; // float resolution exhausted
        }
        let (sol, _) = lmp_primal_dual(inst, mid, guess)?;
        if sol.len() == inst.k {
            return Ok(SearchOutcome::Direct {
                solution: sol,
                lambda: mid,
            });
        }
        if sol.len() < inst.k {
            high = (mid, sol);
        } else {
            low = (mid, sol);
        }
    }

    let n1 = high.1.len();
    let n2 = low.1.len();
    debug_assert!(n1 < inst.k && inst.k < n2);
    let span = (n2 - n1) as f64;
    Ok(SearchOutcome::BiPoint(BiPointSolution {
        a: (n2 - inst.k) as f64 / span,
        b: (inst.k - n1) as f64 / span,
        sol1: high.1,
        sol2: low.1,
        lambda1: high.0,
        lambda2: low.0,
    }))
}

/// Grouping of the large solution's balls around the small solution's.
#[derive(Debug, Clone)]
pub struct GroupStructure {
    /// For each ball of the large solution: the small-solution ball it is
    /// grouped under (gap-minimizing; a facility open in both solutions is
    /// grouped under itself).
    pub cl1_x2: BTreeMap<FacilityId, FacilityId>,
    /// For each point: the gap-minimizing small-solution facility.
    pub cl1_points: Vec<FacilityId>,
    /// For each point: the gap-minimizing large-solution facility.
    pub cl2_points: Vec<FacilityId>,
    /// Members of each group, keyed by the small-solution facility.
    pub groups: BTreeMap<FacilityId, Vec<FacilityId>>,
    /// Sum of member radii per group.
    pub s: BTreeMap<FacilityId, f64>,
    /// Maximum member radius per group (zero for empty groups).
    pub m_max: BTreeMap<FacilityId, f64>,
    /// Enlarged radius `r1 + 2·M` per small-solution facility.
    pub r1_prime: BTreeMap<FacilityId, f64>,
}

/// Builds the group structure of a bi-point pair: every large-solution ball
/// and every point is attached to the small-solution ball minimizing the
/// ball-to-ball gap `(δ ∸ r1) ∸ r2`; ties by raw distance, then facility id.
pub fn build_groups(
    inst: &BallKMInstance,
    bp: &BiPointSolution,
) -> Result<GroupStructure, BallError> {
    let m = &inst.metric;
    bp.sol1.check(m)?;
    bp.sol2.check(m)?;

    // gap-argmin over sol1's balls; `raw` is the untruncated distance used
    // for tie-breaking.
    let attach = |raw_and_r2: &dyn Fn(FacilityId) -> (f64, f64)| -> FacilityId {
        let mut best: Option<(f64, f64, FacilityId)> = None;
        for (&x1, &r1) in &bp.sol1.radii {
            let (raw, r2) = raw_and_r2(x1);
            let gap = dotdiv(dotdiv(raw, r1), r2);
            let better = match best {
                None => true,
                Some((bg, braw, _)) => {
                    gap < bg - 0.0 || (gap == bg && raw < braw) // strict improvements only
                }
            };
            if better {
                best = Some((gap, raw, x1));
            }
        }
        best.expect("small solution is nonempty").2
    };

    let mut cl1_x2 = BTreeMap::new();
    for (&x2, &r2) in &bp.sol2.radii {
        // A facility open in both solutions stays its own anchor (its gap
        // and raw distance to itself are both zero, the joint minimum).
        let owner = if bp.sol1.radii.contains_key(&x2) {
            x2
        } else {
            attach(&|x1| (m.dist_ff(x1, x2), r2))
        };
        cl1_x2.insert(x2, owner);
    }

    let mut cl1_points = Vec::with_capacity(m.n_points());
    for p in 0..m.n_points() {
        cl1_points.push(attach(&|x1| (m.dist_pf(PointId(p), x1), 0.0)));
    }

    let mut cl2_points = Vec::with_capacity(m.n_points());
    for p in 0..m.n_points() {
        let mut best: Option<(f64, f64, FacilityId)> = None;
        for (&x2, &r2) in &bp.sol2.radii {
            let raw = m.dist_pf(PointId(p), x2);
            let gap = dotdiv(raw, r2);
            let better = match best {
                None => true,
                Some((bg, braw, _)) => gap < bg || (gap == bg && raw < braw),
            };
            if better {
                best = Some((gap, raw, x2));
            }
        }
        cl2_points.push(best.expect("large solution is nonempty").2);
    }

    let mut groups: BTreeMap<FacilityId, Vec<FacilityId>> = BTreeMap::new();
    for &x1 in bp.sol1.radii.keys() {
        groups.insert(x1, Vec::new());
    }
    for (&x2, &owner) in &cl1_x2 {
        groups.get_mut(&owner).expect("owner is in sol1").push(x2);
    }
    let mut s = BTreeMap::new();
    let mut m_max = BTreeMap::new();
    let mut r1_prime = BTreeMap::new();
    for (&x1, members) in &groups {
        let radii: Vec<f64> = members.iter().map(|x2| bp.sol2.radii[x2]).collect();
        let sum: f64 = radii.iter().sum();
        let max = radii.iter().fold(0.0f64, |acc, &r| acc.max(r));
        s.insert(x1, sum);
        m_max.insert(x1, max);
        r1_prime.insert(x1, bp.sol1.radii[&x1] + 2.0 * max);
    }
    debug_assert_eq!(
        groups.values().map(Vec::len).sum::<usize>(),
        bp.sol2.len(),
        "groups must partition the large solution"
    );

    let gs = GroupStructure {
        cl1_x2,
        cl1_points,
        cl2_points,
        groups,
        s,
        m_max,
        r1_prime,
    };

    // Detour bound behind the rounding analysis: a point whose nearest
    // large ball is closed can reach that ball's group anchor, enlarged by
    // twice the group's largest radius, within its own two gap costs.
    #[cfg(debug_assertions)]
    for p in 0..m.n_points() {
        let x2 = gs.cl2_points[p];
        let owner = gs.cl1_x2[&x2];
        let via = dotdiv(m.dist_pf(PointId(p), owner), gs.r1_prime[&owner]);
        let gap2 = dotdiv(m.dist_pf(PointId(p), x2), bp.sol2.radii[&x2]);
        let gap1 = dotdiv(
            m.dist_pf(PointId(p), gs.cl1_points[p]),
            bp.sol1.radii[&gs.cl1_points[p]],
        );
        let bound = 2.0 * gap2 + gap1;
        debug_assert!(
            via <= bound + CHECK_TOL * (1.0 + bound.abs()),
            "detour bound violated for p{p}: {via} > {bound}"
        );
    }

    Ok(gs)
}

/// Greedy solver for `max Σ v_i u_i` over `u ∈ [0,1]^m` with
/// `Σ w_i u_i ≤ budget`, `w_i ≥ 0` (values may be negative). Returns an
/// optimal vertex: at most one coordinate fractional, and when one is, the
/// budget is tight.
pub fn solve_knapsack_lp(items: &[(f64, f64)], budget: f64) -> Result<Vec<f64>, BallError> {
    if !budget.is_finite() || budget < 0.0 {
        return Err(BallError::BadKnapsackInput {
            what: "budget",
            detail: "and nonnegative",
            value: budget,
        });
    }
    for &(v, w) in items {
        if !v.is_finite() {
            return Err(BallError::BadKnapsackInput {
                what: "value",
                detail: "",
                value: v,
            });
        }
        if !w.is_finite() || w < 0.0 {
            return Err(BallError::BadKnapsackInput {
                what: "weight",
                detail: "and nonnegative",
                value: w,
            });
        }
    }
    let mut u = vec![0.0; items.len()];
    let mut order: Vec<usize> = Vec::new();
    for (i, &(v, w)) in items.iter().enumerate() {
        if v <= 0.0 {
            continue; // closing is optimal
        }
        if w == 0.0 {
            u[i] = 1.0; // free value
        } else {
            order.push(i);
        }
    }
    order.sort_by(|&a, &b| {
        let ra = items[a].0 / items[a].1;
        let rb = items[b].0 / items[b].1;
        rb.partial_cmp(&ra).expect("finite ratios").then(a.cmp(&b))
    });
    let mut remaining = budget;
    for i in order {
        let w = items[i].1;
        if w <= remaining {
            u[i] = 1.0;
            remaining -= w;
        } else {
            if remaining > 0.0 {
                u[i] = remaining / w;
            }
            break; // budget exhausted; everything after stays closed
        }
    }
    Ok(u)
}

/// Rounds a bi-point pair into one within-budget solution: each group either
/// opens all its large-solution members or its (enlarged) anchor, decided by
/// a knapsack LP; the at-most-one fractional group opens its anchor plus its
/// best members. Shortcut: when the small solution carries enough weight or
/// is outright cheaper, it is returned as-is.
pub fn round_bipoint(
    inst: &BallKMInstance,
    bp: &BiPointSolution,
    guess: &Guess,
    eps: f64,
) -> Result<BallSolution, BallError> {
    if !eps.is_finite() || eps <= 0.0 {
        return Err(BallError::BadEpsilon { value: eps });
    }
    let cost1 = cost(inst, &bp.sol1)?;
    let cost2 = cost(inst, &bp.sol2)?;
    if bp.a > 0.25 || cost1 <= cost2 {
        return Ok(bp.sol1.clone());
    }

    let m = &inst.metric;
    let rho = inst.rho_f();
    let gs = build_groups(inst, bp)?;
    let x1_order: Vec<FacilityId> = bp.sol1.facilities.clone();

    // Per-group client saving: what the group's points stop paying when the
    // group's own balls open instead of the enlarged anchor.
    let mut client_term: BTreeMap<FacilityId, f64> = BTreeMap::new();
    for p in 0..m.n_points() {
        let x2 = gs.cl2_points[p];
        let owner = gs.cl1_x2[&x2];
        let gap1 = dotdiv(
            m.dist_pf(PointId(p), gs.cl1_points[p]),
            bp.sol1.radii[&gs.cl1_points[p]],
        );
        let gap2 = dotdiv(m.dist_pf(PointId(p), x2), bp.sol2.radii[&x2]);
        *client_term.entry(owner).or_insert(0.0) += gap1 + gap2;
    }

    // Knapsack over the groups. Weight |G|-1 is negative exactly for empty
    // groups; those are preset to "open the group" (which opens nothing and
    // drops the anchor — pure saving) and refund one unit of budget each.
    let mut u: Vec<f64> = vec![f64::NAN; x1_order.len()];
    let mut budget = (inst.k - bp.sol1.len()) as f64;
    let mut lp_items: Vec<(f64, f64)> = Vec::new();
    let mut lp_slots: Vec<usize> = Vec::new();
    for (i, &x1) in x1_order.iter().enumerate() {
        let g_len = gs.groups[&x1].len();
        let value =
            rho * bp.sol1.radii[&x1] + rho * gs.s[&x1] + client_term.get(&x1).copied().unwrap_or(0.0);
        if g_len == 0 {
            u[i] = 1.0;
            budget += 1.0;
        } else {
            lp_items.push((value, (g_len - 1) as f64));
            lp_slots.push(i);
        }
    }
    let lp_u = solve_knapsack_lp(&lp_items, budget)?;
    for (slot, val) in lp_slots.iter().zip(&lp_u) {
        u[*slot] = *val;
    }

    let fractional: Vec<usize> = (0..u.len()).filter(|&i| u[i] > 0.0 && u[i] < 1.0).collect();
    assert!(
        fractional.len() <= 1,
        "knapsack LP returned {} fractional coordinates",
        fractional.len()
    );
    let special = fractional.first().map(|&i| x1_order[i]);

    let mut radii: BTreeMap<FacilityId, f64> = BTreeMap::new();
    let open = |radii: &mut BTreeMap<FacilityId, f64>, x: FacilityId, r: f64| {
        let slot = radii.entry(x).or_insert(r);
        if r > *slot {
            *slot = r;
        }
    };

    for (i, &x1) in x1_order.iter().enumerate() {
        if Some(x1) == special {
            continue;
        }
        if u[i] == 1.0 {
            for &x2 in &gs.groups[&x1] {
                open(&mut radii, x2, bp.sol2.radii[&x2]);
            }
        } else {
            open(&mut radii, x1, gs.r1_prime[&x1]);
        }
    }

    if let Some(xt) = special {
        let u_t = u[x1_order.iter().position(|&x| x == xt).expect("special is in sol1")];
        // The guessed ball of the special facility (if any) leaves its own
        // group before the enlargement is computed, so the enlarged radius
        // stays controlled by the small non-guessed radii.
        let members: Vec<FacilityId> = gs.groups[&xt]
            .iter()
            .copied()
            .filter(|&x2| !(x2 == xt && guess.radius_of(xt).is_some()))
            .collect();
        let max_r2 = members
            .iter()
            .map(|x2| bp.sol2.radii[x2])
            .fold(0.0f64, f64::max);
        let r_special = bp.sol1.radii[&xt] + 2.0 * max_r2;
        open(&mut radii, xt, r_special);

        if !members.is_empty() {
            let quota = (u_t * members.len() as f64).ceil() as i64 - 2;
            let quota = quota.max(0) as usize;
            debug_assert!(
                {
                    let p_frac = ((u_t * members.len() as f64).ceil() - 2.0) / members.len() as f64;
                    (1.0 - p_frac) / (1.0 - u_t) <= 3.0 + CHECK_TOL
                },
                "special-group opening fraction drifted above its bound"
            );
            // Open the members with the largest savings: what their points
            // stop paying relative to the enlarged special ball, minus the
            // radius charge.
            let mut saving: Vec<(f64, FacilityId)> = members
                .iter()
                .map(|&x2| {
                    let mut s = -rho * bp.sol2.radii[&x2];
                    for p in 0..m.n_points() {
                        if gs.cl2_points[p] == x2 {
                            let alt = dotdiv(m.dist_pf(PointId(p), xt), r_special);
                            let own = dotdiv(m.dist_pf(PointId(p), x2), bp.sol2.radii[&x2]);
                            s += alt - own;
                        }
                    }
                    (s, x2)
                })
                .collect();
            saving.sort_by(|a, b| {
                b.0.partial_cmp(&a.0)
                    .expect("savings are finite")
                    .then(a.1.cmp(&b.1))
            });
            for &(_, x2) in saving.iter().take(quota.min(members.len())) {
                open(&mut radii, x2, bp.sol2.radii[&x2]);
            }
        }
    }

    assert!(
        radii.len() <= inst.k,
        "rounding opened {} facilities with budget {}",
        radii.len(),
        inst.k
    );
    assert!(!radii.is_empty(), "rounding produced an empty solution");
    Ok(BallSolution::from_radii(radii))
}

/// Run metadata reported by the solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveMeta {
    pub epsilon: f64,
    pub guesses_tried: u64,
    pub lambda_final: f64,
}

/// Full solver: tries every guess up to the `ε`-dependent size and keeps the
/// cheapest rounded solution. The result opens at most `k` balls.
pub fn solve_ball_kmedian(
    inst: &BallKMInstance,
    eps: f64,
) -> Result<(BallSolution, SolveMeta), BallError> {
    inst.validate()?;
    let t_eff = guess_size(inst, eps)?;
    let mut best: Option<(f64, BallSolution, f64)> = None;
    let mut guesses_tried = 0u64;
    for size in 0..=t_eff {
        for guess in enumerate_guesses_of_size(&inst.metric, size) {
            guesses_tried += 1;
            let (sol, lambda) = match binary_search_bipoint(inst, eps, &guess)? {
                SearchOutcome::Direct { solution, lambda } => (solution, lambda),
                SearchOutcome::BiPoint(bp) => {
                    let sol = round_bipoint(inst, &bp, &guess, eps)?;
                    (sol, bp.lambda1)
                }
            };
            debug_assert!(sol.len() <= inst.k);
            let c = cost(inst, &sol)?;
            if best.as_ref().map_or(true, |(bc, _, _)| c < *bc) {
                best = Some((c, sol, lambda));
            }
        }
    }
    let (_, sol, lambda_final) = best.expect("the empty guess always yields a solution");
    Ok((
        sol,
        SolveMeta {
            epsilon: eps,
            guesses_tried,
            lambda_final,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_instance() -> BallKMInstance {
        // clients at 0, 1, 6; facilities at 0 and 6; optimum for k=2, rho=1
        // is cost 1 (the middle client pays 1, or a radius-1 ball does).
        BallKMInstance {
            metric: MetricInstance::from_planar(
                &[[0.0, 0.0], [1.0, 0.0], [6.0, 0.0]],
                &[[0.0, 0.0], [6.0, 0.0]],
            )
            .unwrap(),
            k: 2,
            rho: 1,
        }
    }

    fn sol(balls: &[(usize, f64)]) -> BallSolution {
        BallSolution::from_radii(balls.iter().map(|&(x, r)| (FacilityId(x), r)).collect())
    }

    #[test]
    fn cost_with_zero_radii_is_connection_sum() {
        let inst = line_instance();
        let s = sol(&[(0, 0.0)]);
        // distances 0, 1, 6
        assert!((cost(&inst, &s).unwrap() - 7.0).abs() < 1e-12);
    }

    #[test]
    fn cost_with_covering_radius_is_radius_charge() {
        let inst = line_instance();
        let s = sol(&[(0, 6.0)]);
        assert!((cost(&inst, &s).unwrap() - 6.0).abs() < 1e-12);
        let inst10 = BallKMInstance { rho: 10, ..line_instance() };
        assert!((cost(&inst10, &s).unwrap() - 60.0).abs() < 1e-12);
    }

    #[test]
    fn cost_rejects_empty_and_junk() {
        let inst = line_instance();
        assert!(matches!(
            cost(&inst, &BallSolution::from_radii(BTreeMap::new())),
            Err(BallError::EmptySolution)
        ));
        assert!(matches!(
            cost(&inst, &sol(&[(0, -1.0)])),
            Err(BallError::BadRadius { .. })
        ));
        assert!(matches!(
            cost(&inst, &sol(&[(9, 0.0)])),
            Err(BallError::Metric(MetricError::UnknownId { .. }))
        ));
    }

    #[test]
    fn reduce_uses_ell_largest_distance_or_zero() {
        let inst = line_instance();
        let assign: Vec<FacilityId> = vec![FacilityId(0), FacilityId(0), FacilityId(1)];
        // cluster at f0 has distances {0, 1}: ell=1 -> 1, ell=2 -> 0, ell=3 -> 0
        let r1 = reduce_topl_solution(&inst.metric, &assign, 1).unwrap();
        assert_eq!(r1.radii[&FacilityId(0)], 1.0);
        assert_eq!(r1.radii[&FacilityId(1)], 0.0);
        let r2 = reduce_topl_solution(&inst.metric, &assign, 2).unwrap();
        assert_eq!(r2.radii[&FacilityId(0)], 0.0);
        let r3 = reduce_topl_solution(&inst.metric, &assign, 3).unwrap();
        assert_eq!(r3.radii[&FacilityId(0)], 0.0);
    }

    #[test]
    fn lift_assigns_by_truncated_distance_with_index_ties() {
        let inst = line_instance();
        // radius 5 at f1 puts the middle client (distance 5) on its
        // boundary: truncated distances are 1 (f0) vs 0 (f1).
        let s = sol(&[(0, 0.0), (1, 5.0)]);
        let assign = lift_ball_solution(&inst.metric, &s, 1).unwrap();
        assert_eq!(assign, vec![FacilityId(0), FacilityId(1), FacilityId(1)]);
        // equal truncated distances tie to the smaller facility id
        let s = sol(&[(0, 0.0), (1, 4.0)]);
        let assign = lift_ball_solution(&inst.metric, &s, 1).unwrap();
        assert_eq!(assign[1], FacilityId(0)); // 1 vs 1 -> f0
    }

    #[test]
    fn translation_round_trip_never_increases_cost() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(40213);
        for _ in 0..40 {
            let n = rng.gen_range(2..=6);
            let f = rng.gen_range(1..=3);
            let pts: Vec<[f64; 2]> = (0..n)
                .map(|_| [rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)])
                .collect();
            let fac: Vec<[f64; 2]> = (0..f)
                .map(|_| [rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)])
                .collect();
            let metric = MetricInstance::from_planar(&pts, &fac).unwrap();
            let ell = rng.gen_range(1..=3usize);
            // random assignment -> ball -> assignment chain
            let assign: Vec<FacilityId> =
                (0..n).map(|_| FacilityId(rng.gen_range(0..f))).collect();
            let nested0 = clusters_topl_cost(&metric, &assign, ell);
            let ball = reduce_topl_solution(&metric, &assign, ell).unwrap();
            let ball_cost = ball_cost_at(&metric, &ball, ell as f64);
            assert!(ball_cost <= nested0 + 1e-9 * (1.0 + nested0));
            let lifted = lift_ball_solution(&metric, &ball, ell).unwrap();
            let nested1 = clusters_topl_cost(&metric, &lifted, ell);
            assert!(nested1 <= ball_cost + 1e-9 * (1.0 + ball_cost));
        }
    }

    #[test]
    fn guess_enumeration_counts() {
        // 3 facilities, 2 distinct client distances each, guess size 2:
        // C(3,2) * 2 * 2 = 12.
        let metric = MetricInstance::from_planar(
            &[[1.0, 0.0], [2.0, 0.0]],
            &[[0.0, 0.0], [10.0, 0.0], [20.0, 0.0]],
        )
        .unwrap();
        assert_eq!(enumerate_guesses_of_size(&metric, 2).len(), 12);
        // size 0: exactly the empty guess
        let empty = enumerate_guesses_of_size(&metric, 0);
        assert_eq!(empty.len(), 1);
        assert!(empty[0].is_empty());
        // one facility, one distance value -> exactly one guess
        let single =
            MetricInstance::from_planar(&[[3.0, 0.0]], &[[0.0, 0.0]]).unwrap();
        assert_eq!(enumerate_guesses_of_size(&single, 1).len(), 1);
    }

    #[test]
    fn guess_size_caps_at_budget_and_facility_count() {
        let inst = line_instance(); // k=2, |F|=2
        assert_eq!(guess_size(&inst, 1.5).unwrap(), 2); // ceil(2) = 2
        assert_eq!(guess_size(&inst, 0.1).unwrap(), 2); // 30 capped to k
        assert_eq!(guess_size(&inst, 4.0).unwrap(), 1);
        assert!(matches!(
            guess_size(&inst, 0.0),
            Err(BallError::BadEpsilon { .. })
        ));
    }

    #[test]
    fn lmp_collocated_points_at_zero_lambda_cost_zero() {
        let inst = BallKMInstance {
            metric: MetricInstance::from_planar(
                &[[0.0, 0.0], [5.0, 0.0]],
                &[[0.0, 0.0], [5.0, 0.0]],
            )
            .unwrap(),
            k: 2,
            rho: 1,
        };
        let (sol, dual) = lmp_primal_dual(&inst, 0.0, &Guess::empty()).unwrap();
        assert!((cost(&inst, &sol).unwrap()).abs() < 1e-12);
        assert!(dual.alpha.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn lmp_payments_meet_budgets_exactly() {
        let inst = line_instance();
        let (_, dual) = lmp_primal_dual(&inst, 2.0, &Guess::empty()).unwrap();
        // group payments by (facility, radius): every opened ball's total
        // must equal lambda + rho * r. The internal checks assert this too;
        // here we recompute from the public certificate.
        let mut by_tier: BTreeMap<(usize, u64), f64> = BTreeMap::new();
        for &(x, r, _, b) in &dual.beta {
            *by_tier.entry((x.0, r.to_bits())).or_insert(0.0) += b;
        }
        for ((_, rbits), paid) in by_tier {
            let r = f64::from_bits(rbits);
            assert!(
                paid <= 2.0 + r + 1e-9,
                "payments exceed budget at radius {r}: {paid}"
            );
        }
    }

    #[test]
    fn lmp_respects_guessed_balls() {
        let inst = line_instance();
        let guess = Guess {
            balls: vec![(FacilityId(1), 5.0)],
        };
        let (sol, dual) = lmp_primal_dual(&inst, 3.0, &guess).unwrap();
        assert_eq!(sol.radii[&FacilityId(1)], 5.0);
        // the guessed facility never records payments
        assert!(dual.beta.iter().all(|&(x, _, _, _)| x != FacilityId(1)));
    }

    #[test]
    fn binary_search_line_instance_stays_in_budget() {
        let inst = line_instance();
        for &eps in &[0.5, 1.0] {
            match binary_search_bipoint(&inst, eps, &Guess::empty()).unwrap() {
                SearchOutcome::Direct { solution, .. } => {
                    assert!(solution.len() <= inst.k);
                    // direct returns are 3-approximations; OPT = 1
                    assert!(cost(&inst, &solution).unwrap() <= 3.0 + eps + 1e-9);
                }
                SearchOutcome::BiPoint(bp) => {
                    assert!(bp.sol1.len() < inst.k);
                    assert!(bp.sol2.len() > inst.k);
                    let combo = bp.a * cost(&inst, &bp.sol1).unwrap()
                        + bp.b * cost(&inst, &bp.sol2).unwrap();
                    assert!(combo <= (3.0 + eps) * 1.0 + 1e-9);
                    assert!(
                        (bp.a * bp.sol1.len() as f64 + bp.b * bp.sol2.len() as f64
                            - inst.k as f64)
                            .abs()
                            < 1e-9
                    );
                }
            }
        }
    }

    #[test]
    fn binary_search_all_zero_metric_returns_free_solution() {
        let inst = BallKMInstance {
            metric: MetricInstance::from_planar(&[[0.0, 0.0]], &[[0.0, 0.0], [0.0, 0.0]])
                .unwrap(),
            k: 1,
            rho: 1,
        };
        match binary_search_bipoint(&inst, 1.0, &Guess::empty()).unwrap() {
            SearchOutcome::Direct { solution, .. } => {
                assert_eq!(cost(&inst, &solution).unwrap(), 0.0);
            }
            SearchOutcome::BiPoint(_) => panic!("degenerate metric must return directly"),
        }
    }

    #[test]
    fn knapsack_hand_example() {
        let u = solve_knapsack_lp(&[(6.0, 2.0), (2.0, 2.0)], 3.0).unwrap();
        assert_eq!(u[0], 1.0);
        assert!((u[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn knapsack_zero_budget_and_signs() {
        let u = solve_knapsack_lp(&[(5.0, 0.0), (3.0, 1.0), (-2.0, 0.0)], 0.0).unwrap();
        assert_eq!(u, vec![1.0, 0.0, 0.0]);
        assert!(matches!(
            solve_knapsack_lp(&[(1.0, -1.0)], 1.0),
            Err(BallError::BadKnapsackInput { what: "weight", .. })
        ));
        assert!(matches!(
            solve_knapsack_lp(&[], -1.0),
            Err(BallError::BadKnapsackInput { what: "budget", .. })
        ));
    }

    #[test]
    fn knapsack_at_most_one_fractional_and_tight() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(90125);
        for _ in 0..200 {
            let m = rng.gen_range(1..=8);
            let items: Vec<(f64, f64)> = (0..m)
                .map(|_| (rng.gen_range(-3.0..8.0), rng.gen_range(0..4) as f64))
                .collect();
            let budget = rng.gen_range(0..6) as f64;
            let u = solve_knapsack_lp(&items, budget).unwrap();
            let frac: Vec<usize> =
                (0..m).filter(|&i| u[i] > 0.0 && u[i] < 1.0).collect();
            assert!(frac.len() <= 1);
            let used: f64 = (0..m).map(|i| u[i] * items[i].1).sum();
            assert!(used <= budget + 1e-9);
            if frac.len() == 1 {
                assert!((used - budget).abs() < 1e-9, "fractional but not tight");
            }
        }
    }

    #[test]
    fn solve_line_instance_matches_optimum() {
        let inst = line_instance();
        let (sol, meta) = solve_ball_kmedian(&inst, 0.5).unwrap();
        assert!(sol.len() <= 2);
        let c = cost(&inst, &sol).unwrap();
        // optimum is 1; the guarantee at eps = 0.5 is 17.25, but this tiny
        // instance should be solved exactly through the direct probes.
        assert!((c - 1.0).abs() < 1e-9, "cost {c}");
        assert!(meta.guesses_tried >= 1);
    }

    #[test]
    fn solve_points_on_facilities_is_free() {
        let inst = BallKMInstance {
            metric: MetricInstance::from_planar(
                &[[0.0, 0.0], [3.0, 0.0], [7.0, 0.0]],
                &[[0.0, 0.0], [3.0, 0.0], [7.0, 0.0]],
            )
            .unwrap(),
            k: 3,
            rho: 2,
        };
        let (sol, _) = solve_ball_kmedian(&inst, 1.0).unwrap();
        assert_eq!(cost(&inst, &sol).unwrap(), 0.0);
    }

    #[test]
    fn solve_rejects_bad_instances() {
        let mut inst = line_instance();
        inst.k = 0;
        assert!(matches!(
            solve_ball_kmedian(&inst, 1.0),
            Err(BallError::BadK { .. })
        ));
        let mut inst = line_instance();
        inst.k = 5;
        assert!(matches!(
            solve_ball_kmedian(&inst, 1.0),
            Err(BallError::BadK { .. })
        ));
        let mut inst = line_instance();
        inst.rho = 0;
        assert!(matches!(
            solve_ball_kmedian(&inst, 1.0),
            Err(BallError::BadRho)
        ));
    }

    #[test]
    fn solve_is_deterministic() {
        let inst = line_instance();
        let (s1, m1) = solve_ball_kmedian(&inst, 1.0).unwrap();
        let (s2, m2) = solve_ball_kmedian(&inst, 1.0).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(m1, m2);
    }
}
