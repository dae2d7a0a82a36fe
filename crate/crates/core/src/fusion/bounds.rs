use crate::error::FusionError;
use crate::track::{Scan, Track};

/// Fraction of the window `[j, k]` in which the track exists.
pub fn empirical_existence_probability(track: &Track, j: Scan, k: Scan) -> Result<f64, FusionError> {
    if j > k {
        return Err(FusionError::InvalidInput(format!("window [{j}, {k}] is empty")));
    }
    if let (Some(first), Some(last)) = (track.first_scan(), track.last_scan()) {
        if first < j || last > k {
            return Err(FusionError::InvalidInput(format!(
                "track {} spans [{first}, {last}], outside the window [{j}, {k}]",
                track.label
            )));
        }
    }
    Ok(track.len() as f64 / (k - j + 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyMargin {
    /// Upper bound on the track-to-track distance between two estimates of
    /// the same object.
    pub bound: f64,
    /// Minimum separation between objects that guarantees consistent
    /// matching: four times `bound`.
    pub threshold: f64,
}

/// `bound = epsilon * p + c * (1 - p)` for a per-scan error of at most
/// `epsilon` and an existence probability of at least `p`.
pub fn label_consistency_margin(epsilon: f64, p: f64, cutoff: f64) -> Result<ConsistencyMargin, FusionError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(FusionError::InvalidInput(format!("probability {p} is outside [0, 1]")));
    }
    if !(cutoff > 0.0 && cutoff.is_finite()) {
        return Err(FusionError::InvalidInput(format!("cut-off {cutoff} must be positive")));
    }
    if !(0.0..=cutoff).contains(&epsilon) {
        return Err(FusionError::InvalidInput(format!(
            "per-scan error {epsilon} must lie in [0, {cutoff}]"
        )));
    }
    let bound = epsilon * p + cutoff * (1.0 - p);
    Ok(ConsistencyMargin {
        bound,
        threshold: 4.0 * bound,
    })
}
