use serde::{Deserialize, Serialize};

pub const DEFAULT_TOLERANCE_S: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JaccardResult {
    pub value: f64,
    /// Matched `(a, b)` time pairs in time order.
    pub matches: Vec<(f64, f64)>,
}

/// Agreement between two branching-point time lists: matches divided by the
/// size of the union, where a match pairs one time from each list lying
/// within `tol` seconds. Each time is matched at most once.
///
/// Matching sweeps both sorted lists in time order, pairing the two earliest
/// unmatched times when they are close enough and otherwise discarding the
/// earlier one. On a line with a fixed tolerance this finds a largest
/// one-to-one matching. Two empty lists agree perfectly.
pub fn jaccard_agreement(a: &[f64], b: &[f64], tol: f64) -> JaccardResult {
    if a.is_empty() && b.is_empty() {
        return JaccardResult {
            value: 1.0,
            matches: Vec::new(),
        };
    }
    let mut a_sorted = a.to_vec();
    let mut b_sorted = b.to_vec();
    a_sorted.sort_by(f64::total_cmp);
    b_sorted.sort_by(f64::total_cmp);

    let (mut i, mut j) = (0, 0);
    let mut matches = Vec::new();
    while i < a_sorted.len() && j < b_sorted.len() {
        let (x, y) = (a_sorted[i], b_sorted[j]);
        if (x - y).abs() <= tol {
            matches.push((x, y));
            i += 1;
            j += 1;
        } else if x < y {
            i += 1;
        } else {
            j += 1;
        }
    }
    let m = matches.len() as f64;
    JaccardResult {
        value: m / (a.len() as f64 + b.len() as f64 - m),
        matches,
    }
}
