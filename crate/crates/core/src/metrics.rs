//! Set distances: OSPA, the OSPA track-to-track distance, OSPA-on-OSPA, and
//! the Wasserstein distance with its time-embedded track variant.
//!
//! Point distances between states use positions only.

use serde::{Deserialize, Serialize};

use crate::assignment::{min_cost_transport, optimal_assignment, CostMatrix};
use crate::error::MetricError;
use crate::track::{position_distance, Scan, StateVector, Track, TrackSet};

/// Order `p` and cut-off `c` of the OSPA metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OspaParams {
    pub order: u32,
    pub cutoff: f64,
}

impl Default for OspaParams {
    fn default() -> Self {
        Self {
            order: 1,
            cutoff: 100.0,
        }
    }
}

/// Order `p` and time-embedding weight `alpha` (m per scan).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WassersteinParams {
    pub order: u32,
    pub alpha: f64,
}

impl Default for WassersteinParams {
    fn default() -> Self {
        Self { order: 1, alpha: 20.0 }
    }
}

/// OSPA distance of order `p` with cut-off `c` under the base distance
/// `base`. Returns 0 for two empty sets and `c` if exactly one is empty.
pub fn ospa<T>(x: &[T], y: &[T], params: OspaParams, base: impl Fn(&T, &T) -> f64) -> f64 {
    let c = params.cutoff;
    let p = params.order.max(1) as i32;
    match (x.is_empty(), y.is_empty()) {
        (true, true) => return 0.0,
        (true, false) | (false, true) => return c,
        _ => {}
    }
    let (small, large) = if x.len() <= y.len() { (x, y) } else { (y, x) };
    let (m, n) = (small.len(), large.len());
    let cost = CostMatrix::from_fn(m, n, |i, j| base(&small[i], &large[j]).min(c).powi(p))
        .expect("capped distances are finite");
    let assignment = optimal_assignment(&cost).expect("non-empty cost matrix");
    // Summing in value order makes the result independent of argument order.
    let mut terms: Vec<f64> = assignment.pairs.iter().map(|&(i, j)| cost.get(i, j)).collect();
    terms.sort_by(f64::total_cmp);
    let assigned: f64 = terms.iter().sum();
    let total = assigned + c.powi(p) * (n - m) as f64;
    (total / n as f64).powf(1.0 / p as f64)
}

/// Time-averaged OSPA distance between two tracks.
///
/// Averaged over the union of both domains: a scan where both exist
/// contributes `min(c, |t(k) - u(k)|)`; a scan where only one exists
/// contributes `c`. Two empty tracks are at distance 0.
pub fn ospa_track_distance(t: &Track, u: &Track, cutoff: f64) -> f64 {
    // Merge the two sorted domains.
    let mut ti = t.samples.iter().peekable();
    let mut ui = u.samples.iter().peekable();
    let mut total = 0.0;
    let mut count = 0usize;
    loop {
        let term = match (ti.peek(), ui.peek()) {
            (None, None) => break,
            (Some(_), None) => {
                ti.next();
                cutoff
            }
            (None, Some(_)) => {
                ui.next();
                cutoff
            }
            (Some((kt, xt)), Some((ku, xu))) => {
                if kt == ku {
                    let d = position_distance(xt, xu).min(cutoff);
                    ti.next();
                    ui.next();
                    d
                } else if kt < ku {
                    ti.next();
                    cutoff
                } else {
                    ui.next();
                    cutoff
                }
            }
        };
        total += term;
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

/// OSPA between two track sets with the OSPA track-to-track distance as
/// base distance. Labels do not enter the computation.
pub fn ospa2(a: &TrackSet, b: &TrackSet, params: OspaParams) -> f64 {
    let ta: Vec<&Track> = a.iter().collect();
    let tb: Vec<&Track> = b.iter().collect();
    ospa(&ta, &tb, params, |t, u| ospa_track_distance(t, u, params.cutoff))
}

/// OSPA between two point sets of states using position distance.
pub fn ospa_states(x: &[StateVector], y: &[StateVector], params: OspaParams) -> f64 {
    ospa(x, y, params, position_distance)
}

/// Wasserstein distance of order `p` between two non-empty finite sets with
/// uniform masses.
pub fn wasserstein<T>(
    x: &[T],
    y: &[T],
    params: WassersteinParams,
    base: impl Fn(&T, &T) -> f64,
) -> Result<f64, MetricError> {
    if x.is_empty() || y.is_empty() {
        return Err(MetricError::EmptySet);
    }
    let p = params.order.max(1) as i32;
    let cost = CostMatrix::from_fn(x.len(), y.len(), |i, j| base(&x[i], &y[j]).powi(p))?;
    let plan = min_cost_transport(&cost)?;
    Ok(plan.cost.max(0.0).powf(1.0 / p as f64))
}

/// A track sample embedded with its scan: `(px, py, alpha * k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct TimedPoint {
    px: f64,
    py: f64,
    t: f64,
}

fn embed(track: &Track, alpha: f64) -> Vec<TimedPoint> {
    track
        .samples
        .iter()
        .map(|(k, x): (&Scan, &StateVector)| TimedPoint {
            px: x[0],
            py: x[2],
            t: alpha * *k as f64,
        })
        .collect()
}

/// Wasserstein track-to-track distance: each track becomes the set of its
/// samples with the scan index appended as an extra coordinate scaled by
/// `alpha`, and the two sets are compared with [`wasserstein`].
pub fn wasserstein_track_distance(t: &Track, u: &Track, params: WassersteinParams) -> Result<f64, MetricError> {
    let xt = embed(t, params.alpha);
    let xu = embed(u, params.alpha);
    wasserstein(&xt, &xu, params, |a, b| {
        let (dx, dy, dt) = (a.px - b.px, a.py - b.py, a.t - b.t);
        (dx * dx + dy * dy + dt * dt).sqrt()
    })
}
