/// Relative tolerance used for all feasibility comparisons. Shared across
/// the regions and routing modules so containment checks cannot disagree
/// on rounding.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// `lhs <= rhs` up to the shared relative tolerance.
pub fn within_capacity(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs * (1.0 + FEASIBILITY_TOL)
}

/// Pairwise (tree) summation. Keeps the error growth of long cut sums at
/// O(log n) ulps instead of O(n).
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        len => {
            let mid = len / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_sum_matches_naive_on_small_inputs() {
        let v: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 5050.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
        assert_eq!(pairwise_sum(&[1.5]), 1.5);
    }
}
