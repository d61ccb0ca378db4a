use crate::domain::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Per-agent min-max normalization of a raw preference row.
///
/// `p̂_k = (p_k − min) / (max − min + ε)`. A row with `max == min` expresses
/// indifference and maps to the uniform 0.5 row.
pub fn normalize_preferences<T: Scalar>(raw: &[T], eps: T) -> Result<Vec<T>> {
    if raw.is_empty() {
        return Err(Error::ShapeMismatch {
            what: "preference row",
            expected: 1,
            got: 0,
        });
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("preference row"));
    }
    let (lo, hi) = raw
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi == lo {
        return Ok(vec![T::lit(0.5); raw.len()]);
    }
    let denom = hi - lo + eps;
    Ok(raw.iter().map(|&v| (v - lo) / denom).collect())
}

/// Confidence- and concern-weighted matrix entry:
/// `p̂ · κ / (1 + ln(1 + |concerns|))`.
pub fn weight_entry<T: Scalar>(normalized: T, confidence: T, concern_count: usize) -> T {
    let damp = T::one() + (T::one() + T::from_count(concern_count)).ln();
    normalized * confidence / damp
}

/// Build the N×K consensus matrix from raw rows, confidences and concern counts.
pub fn build_matrix<T: Scalar>(
    raw_rows: &[Vec<T>],
    confidences: &[T],
    concern_counts: &[usize],
    eps: T,
) -> Result<Matrix<T>> {
    if confidences.len() != raw_rows.len() || concern_counts.len() != raw_rows.len() {
        return Err(Error::ShapeMismatch {
            what: "per-agent weights",
            expected: raw_rows.len(),
            got: confidences.len().min(concern_counts.len()),
        });
    }
    let rows = raw_rows
        .iter()
        .zip(confidences)
        .zip(concern_counts)
        .map(|((row, &kappa), &z)| {
            Ok(normalize_preferences(row, eps)?
                .into_iter()
                .map(|p| weight_entry(p, kappa, z))
                .collect())
        })
        .collect::<Result<Vec<Vec<T>>>>()?;
    Matrix::from_rows(&rows)
}

/// Ascending ranks `1..=K` (largest value gets `K`); ties share the mid-rank.
pub fn rank_row<T: Scalar>(row: &[T]) -> Vec<T> {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[a].partial_cmp(&row[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut ranks = vec![T::zero(); row.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && row[order[j]] == row[order[i]] {
            j += 1;
        }
        // positions i..j (0-based) share ranks i+1..=j
        let mid = T::from_count(i + 1 + j) / T::lit(2.0);
        for &idx in &order[i..j] {
            ranks[idx] = mid;
        }
        i = j;
    }
    ranks
}

/// Σ (t³ − t) over tie groups of one row.
fn tie_term<T: Scalar>(row: &[T]) -> T {
    let mut sorted = row.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let mut total = T::zero();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = T::from_count(j - i);
        total += t * t * t - t;
        i = j;
    }
    total
}

/// Kendall's coefficient of concordance over the rows (raters) of `m`.
///
/// `W = 12 Σ_k (R_k − R̄)² / (N² (K³ − K))` with `R̄ = N(K+1)/2`. With
/// `tie_correction`, `N Σ_i Σ_g (t_g³ − t_g)` is subtracted from the
/// denominator. The result is clamped to `[0, 1]`; a zero denominator
/// (every row fully tied) yields 0.
pub fn kendall_w<T: Scalar>(m: &Matrix<T>, tie_correction: bool) -> Result<T> {
    let (n, k) = (m.rows(), m.cols());
    if n < 2 || k < 2 {
        return Err(Error::DegenerateShape {
            agents: n,
            treatments: k,
        });
    }
    let mut rank_sums = vec![T::zero(); k];
    let mut ties = T::zero();
    for row in m.iter_rows() {
        for (s, r) in rank_sums.iter_mut().zip(rank_row(row)) {
            *s += r;
        }
        if tie_correction {
            ties += tie_term(row);
        }
    }
    let nf = T::from_count(n);
    let kf = T::from_count(k);
    let mean = nf * (kf + T::one()) / T::lit(2.0);
    let s: T = rank_sums.iter().map(|&r| (r - mean) * (r - mean)).sum();
    let mut denom = nf * nf * (kf * kf * kf - kf);
    if tie_correction {
        denom -= nf * ties;
    }
    if denom <= T::zero() {
        return Ok(T::zero());
    }
    let w = T::lit(12.0) * s / denom;
    Ok(w.max(T::zero()).min(T::one()))
}

/// Per-agent discordance `D_i = Σ_k |M_ik − mean_k|` and the set of agents
/// with `D_i > μ_D + σ_D` (population standard deviation).
pub fn discordance<T: Scalar>(m: &Matrix<T>) -> (Vec<T>, Vec<usize>) {
    let means = m.column_means();
    let scores: Vec<T> = m
        .iter_rows()
        .map(|row| row.iter().zip(&means).map(|(&v, &c)| (v - c).abs()).sum())
        .collect();
    if scores.is_empty() {
        return (scores, Vec::new());
    }
    let n = T::from_count(scores.len());
    let mu = scores.iter().copied().sum::<T>() / n;
    let var = scores.iter().map(|&d| (d - mu) * (d - mu)).sum::<T>() / n;
    let sigma = var.sqrt();
    if sigma == T::zero() {
        return (scores, Vec::new());
    }
    let cut = mu + sigma;
    let flagged = scores
        .iter()
        .enumerate()
        .filter(|(_, &d)| d > cut)
        .map(|(i, _)| i)
        .collect();
    (scores, flagged)
}

/// First column maximizing the column sum.
pub fn argmax_column_sum<T: Scalar>(m: &Matrix<T>) -> usize {
    let sums = m.column_sums();
    let mut best = 0;
    for (k, &s) in sums.iter().enumerate() {
        if s > sums[best] {
            best = k;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn normalize_spot_values() {
        let out = normalize_preferences(&[-1.0, 0.0, 1.0], 1e-6).unwrap();
        // 1 / (2 + 1e-6) and 2 / (2 + 1e-6)
        assert_eq!(out[0], 0.0);
        assert!(close(out[1], 0.499_999_75, 1e-9));
        assert!(close(out[2], 0.999_999_5, 1e-9));
        assert_eq!(normalize_preferences(&[0.3, 0.3, 0.3], 1e-6).unwrap(), vec![0.5; 3]);
    }

    #[test]
    fn normalize_rejects_bad_rows() {
        assert!(matches!(normalize_preferences::<f64>(&[], 1e-6), Err(Error::ShapeMismatch { .. })));
        assert!(matches!(
            normalize_preferences(&[0.1, f64::NAN], 1e-6),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn normalize_in_f32() {
        let out = normalize_preferences(&[-1.0f32, 1.0], 1e-6).unwrap();
        assert_eq!(out[0], 0.0);
        assert!(out[1] <= 1.0);
    }

    #[test]
    fn weight_entry_spot_values() {
        assert!(close(weight_entry(1.0, 0.9, 0), 0.9, 1e-15));
        let expected = 0.72 / (1.0 + 3f64.ln());
        assert!(close(weight_entry(0.8, 0.9, 2), expected, 1e-15));
        assert!(close(expected, 0.34309, 1e-5));
        assert_eq!(weight_entry(0.0, 0.7, 5), 0.0);
    }

    #[test]
    fn rank_row_conventions() {
        assert_eq!(rank_row(&[0.1, 0.5, 0.9]), vec![1.0, 2.0, 3.0]);
        assert_eq!(rank_row(&[0.5, 0.5, 0.1]), vec![2.5, 2.5, 1.0]);
        assert_eq!(rank_row(&[0.2, 0.2, 0.2, 0.2]), vec![2.5; 4]);
    }

    #[test]
    fn kendall_spot_values() {
        let same = Matrix::from_rows(&vec![vec![1.0f64, 2.0, 3.0]; 3]).unwrap();
        assert_eq!(kendall_w(&same, false).unwrap(), 1.0);
        let rev = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![3.0, 2.0, 1.0]]).unwrap();
        assert_eq!(kendall_w(&rev, false).unwrap(), 0.0);
        let mixed =
            Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![2.0, 1.0, 3.0], vec![1.0, 3.0, 2.0]]).unwrap();
        assert!(close(kendall_w(&mixed, false).unwrap(), 96.0 / 216.0, 1e-15));
    }

    #[test]
    fn kendall_degenerate_shapes() {
        let one = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(matches!(kendall_w(&one, false), Err(Error::DegenerateShape { .. })));
        let narrow = Matrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        assert!(matches!(kendall_w(&narrow, false), Err(Error::DegenerateShape { .. })));
    }

    #[test]
    fn tie_correction_raises_w_with_ties() {
        let m = Matrix::from_rows(&[vec![1.0, 1.0, 3.0], vec![1.0, 1.0, 3.0]]).unwrap();
        let plain = kendall_w(&m, false).unwrap();
        let corrected = kendall_w(&m, true).unwrap();
        assert!(plain < 1.0);
        assert!(close(corrected, 1.0, 1e-12));
    }

    #[test]
    fn discordance_example() {
        let m = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let (d, flagged) = discordance(&m);
        assert!(close(d[0], 2.0 / 3.0, 1e-15));
        assert!(close(d[2], 4.0 / 3.0, 1e-15));
        assert_eq!(flagged, vec![2]);
    }

    #[test]
    fn identical_rows_flag_nobody() {
        let m = Matrix::from_rows(&vec![vec![0.1f64, 0.7, 0.3]; 5]).unwrap();
        let (_, flagged) = discordance(&m);
        assert!(flagged.is_empty());
    }

    #[test]
    fn column_sum_argmax_prefers_lowest_index() {
        let m = Matrix::from_rows(&[vec![1.0, 1.0, 0.0]]).unwrap();
        assert_eq!(argmax_column_sum(&m), 0);
    }
}
