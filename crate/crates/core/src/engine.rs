//! Discrete-event simulation of simultaneous dual ascent, shared by the two
//! primal-dual solvers.
//!
//! Every client raises a dual value `α_p` at unit rate from 0. Each candidate
//! ball `(facility, radius)` is a *tier* with a budget (`threshold`) and a
//! per-client *activation time*: once `α_p` passes the activation, the client
//! pays the overshoot into the tier. A tier whose collected payments reach
//! its threshold fires; firing freezes every client at or past its activation
//! (they stop growing), and clients reaching the activation of an
//! already-fired tier freeze on contact. Tiers marked `prefired` are tight
//! from time zero (used for guessed balls, whose budget is exactly zero).
//!
//! The two solvers differ only in how activations are derived: truncated
//! distances `δ(p,x) ∸ r` for the ball objective, and `0`-inside/absent-
//! outside for the coverage objective. No float-equality "is it tight yet"
//! tests happen anywhere: event times are computed in closed form, and
//! simultaneous events are processed in a fixed order (tier build order,
//! which callers keep sorted by facility index then radius ascending).

/// One candidate ball in the ascent.
#[derive(Debug, Clone)]
pub(crate) struct Tier {
    pub facility: usize,
    pub radius: f64,
    /// Dual budget of this ball (`λ + ρr`, `λ + h(r)`, ...). Ignored when
    /// `prefired`.
    pub threshold: f64,
    /// Tight from time zero: never collects payments, freezes clients on
    /// contact.
    pub prefired: bool,
    /// Per client: the `α` value at which the client starts paying into this
    /// tier (`None` = this client never interacts with the ball).
    pub activation: Vec<Option<f64>>,
}

#[derive(Debug, Clone)]
pub(crate) struct AscentResult {
    /// Final frozen dual value per client.
    pub alpha: Vec<f64>,
    /// Fire time per tier (`Some(0.0)` for prefired tiers).
    pub fire_time: Vec<Option<f64>>,
}

impl AscentResult {
    /// Payment of client `p` into tier `t` implied by the final state:
    /// `max(0, min(α_p, fire_time_t) - activation)`.
    pub fn beta(&self, tiers: &[Tier], t: usize, p: usize) -> f64 {
        match tiers[t].activation[p] {
            None => 0.0,
            Some(c) => {
                if tiers[t].prefired {
                    return 0.0;
                }
                let cap = self.fire_time[t].unwrap_or(f64::INFINITY);
                (self.alpha[p].min(cap) - c).max(0.0)
            }
        }
    }
}

/// Runs the ascent until every client is frozen.
///
/// Panics if some client can never freeze (no tier interacts with it); the
/// callers guarantee interaction (the ball solver gives every client an
/// activation in every tier, the coverage solver prechecks reachability).
pub(crate) fn dual_ascent(n_points: usize, tiers: &[Tier]) -> AscentResult {
    let m = tiers.len();
    let mut alpha = vec![0.0f64; n_points];
    let mut frozen = vec![false; n_points];
    let mut n_frozen = 0usize;
    let mut fire_time: Vec<Option<f64>> = tiers
        .iter()
        .map(|t| if t.prefired { Some(0.0) } else { None })
        .collect();

    // Per-tier live accounting: payments = frozen_part + cnt·τ - sum_act.
    let mut frozen_part = vec![0.0f64; m];
    let mut cnt = vec![0usize; m];
    let mut sum_act = vec![0.0f64; m];
    // Whether client p has crossed tier t's activation already.
    let mut crossed = vec![false; m * n_points];

    // All (activation, tier, point) crossings, ascending; ties by tier build
    // order then point index for determinism.
    let mut crossings: Vec<(f64, usize, usize)> = Vec::new();
    for (ti, t) in tiers.iter().enumerate() {
        debug_assert!(t.activation.len() == n_points);
        for (p, c) in t.activation.iter().enumerate() {
            if let Some(c) = c {
                crossings.push((*c, ti, p));
            }
        }
    }
    crossings.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .expect("activations are finite")
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    let mut next_cross = 0usize;

    let mut tau = 0.0f64;

    let freeze =
        |p: usize,
         at: f64,
         alpha: &mut Vec<f64>,
         frozen: &mut Vec<bool>,
         n_frozen: &mut usize,
         frozen_part: &mut Vec<f64>,
         cnt: &mut Vec<usize>,
         sum_act: &mut Vec<f64>,
         crossed: &Vec<bool>,
         fire_time: &Vec<Option<f64>>| {
            if frozen[p] {
                return;
            }
            frozen[p] = true;
            *n_frozen += 1;
            alpha[p] = at;
            for t in 0..m {
                if fire_time[t].is_none() && crossed[t * n_points + p] {
                    // Move this client's live payment into the frozen part.
                    let c = tiers[t].activation[p].expect("crossed implies activation");
                    frozen_part[t] += at - c;
                    cnt[t] -= 1;
                    sum_act[t] -= c;
                }
            }
        };

    while n_frozen < n_points {
        // Next crossing of a live client.
        while next_cross < crossings.len() && frozen[crossings[next_cross].2] {
            next_cross += 1;
        }
        let cross_at = crossings.get(next_cross).map(|c| c.0);

        // Next tier to fire under current rates.
        let mut fire_at: Option<(f64, usize)> = None;
        for (t, tier) in tiers.iter().enumerate() {
            if fire_time[t].is_some() {
                continue;
            }
            let collected = frozen_part[t] + cnt[t] as f64 * tau - sum_act[t];
            let when = if collected >= tier.threshold {
                tau
            } else if cnt[t] > 0 {
                (tier.threshold + sum_act[t] - frozen_part[t]) / cnt[t] as f64
            } else {
                continue;
            };
            let when = when.max(tau);
            if fire_at.map_or(true, |(best, _)| when < best) {
                fire_at = Some((when, t));
            }
        }

        match (cross_at, fire_at) {
            (None, None) => panic!(
                "dual ascent stalled with {} clients unfrozen; every client must interact with some tier",
                n_points - n_frozen
            ),
            (c, f) => {
                let take_cross = match (c, f) {
                    (Some(c), Some((ft, _))) => c <= ft,
                    (Some(_), None) => true,
                    _ => false,
                };
                if take_cross {
                    let (c, t, p) = crossings[next_cross];
                    next_cross += 1;
                    tau = c;
                    if fire_time[t].is_some() {
                        // Contact with a tight ball: freeze on the boundary.
                        freeze(
                            p,
                            c,
                            &mut alpha,
                            &mut frozen,
                            &mut n_frozen,
                            &mut frozen_part,
                            &mut cnt,
                            &mut sum_act,
                            &crossed,
                            &fire_time,
                        );
                    } else {
                        crossed[t * n_points + p] = true;
                        cnt[t] += 1;
                        sum_act[t] += c;
                    }
                } else {
                    let (ft, t) = fire_at.expect("checked above");
                    tau = ft;
                    fire_time[t] = Some(ft);
                    // Everyone at or past the activation freezes; payments of
                    // this tier stop implicitly via fire_time.
                    for p in 0..n_points {
                        if !frozen[p] && crossed[t * n_points + p] {
                            freeze(
                                p,
                                ft,
                                &mut alpha,
                                &mut frozen,
                                &mut n_frozen,
                                &mut frozen_part,
                                &mut cnt,
                                &mut sum_act,
                                &crossed,
                                &fire_time,
                            );
                        }
                    }
                }
            }
        }
    }

    // The loop stops the moment the last client freezes, which can leave
    // tiers that reached their budget at that same instant unfired (the
    // freeze and the fire are simultaneous events). Fire them now; their
    // collected payments no longer grow, so tight-at-τ is final.
    for (t, tier) in tiers.iter().enumerate() {
        if fire_time[t].is_none() {
            let collected = frozen_part[t] + cnt[t] as f64 * tau - sum_act[t];
            if collected >= tier.threshold {
                fire_time[t] = Some(tau);
            }
        }
    }

    AscentResult { alpha, fire_time }
}

/// Largest-radius-first greedy over fired facilities with an arbitrary
/// conflict relation. Returns the kept candidate indices (in pick order) and,
/// for every discarded candidate, the kept candidate that removed it — the
/// witness used by the coverage/conflict invariant tests.
pub(crate) fn greedy_prune(
    candidates: &[(usize, f64)],
    mut conflicts: impl FnMut(usize, usize) -> bool,
) -> (Vec<usize>, Vec<(usize, usize)>) {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        candidates[b]
            .1
            .partial_cmp(&candidates[a].1)
            .expect("radii are finite")
            .then(candidates[a].0.cmp(&candidates[b].0))
    });
    let mut kept: Vec<usize> = Vec::new();
    let mut witness: Vec<(usize, usize)> = Vec::new();
    let mut removed = vec![false; candidates.len()];
    for &i in &order {
        if removed[i] {
            continue;
        }
        kept.push(i);
        removed[i] = true;
        for &j in &order {
            if !removed[j] && conflicts(i, j) {
                removed[j] = true;
                witness.push((j, i));
            }
        }
    }
    (kept, witness)
}
