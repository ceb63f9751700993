//! Temporal regression (delta) coefficients and cepstral mean normalization.

/// Regression deltas over `±window` frames with edge replication:
/// `d_t = sum_d d (c_{t+d} - c_{t-d}) / (2 sum_d d^2)`.
pub fn delta(seq: &[Vec<f64>], window: usize) -> Vec<Vec<f64>> {
    let t_len = seq.len();
    if t_len == 0 {
        return Vec::new();
    }
    let window = window.max(1);
    let norm = 2.0 * (1..=window).map(|d| (d * d) as f64).sum::<f64>();
    let last = t_len - 1;
    (0..t_len)
        .map(|t| {
            let mut out = vec![0.0; seq[t].len()];
            for d in 1..=window {
                let ahead = &seq[(t + d).min(last)];
                let behind = &seq[t.saturating_sub(d)];
                for ((o, a), b) in out.iter_mut().zip(ahead).zip(behind) {
                    *o += d as f64 * (a - b);
                }
            }
            out.iter_mut().for_each(|v| *v /= norm);
            out
        })
        .collect()
}

/// [`delta`] for a scalar sequence.
pub fn delta_1d(seq: &[f64], window: usize) -> Vec<f64> {
    let rows: Vec<Vec<f64>> = seq.iter().map(|&v| vec![v]).collect();
    delta(&rows, window).into_iter().map(|r| r[0]).collect()
}

/// Subtracts the per-column mean of the utterance from every row.
pub fn cepstral_mean_normalize(seq: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let Some(first) = seq.first() else {
        return Vec::new();
    };
    let mut mean = vec![0.0; first.len()];
    for row in seq {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    let n = seq.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    seq.iter()
        .map(|row| row.iter().zip(&mean).map(|(v, m)| v - m).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn col_means(seq: &[Vec<f64>]) -> Vec<f64> {
        let k = seq[0].len();
        (0..k)
            .map(|j| seq.iter().map(|r| r[j]).sum::<f64>() / seq.len() as f64)
            .collect()
    }

    #[test]
    fn constant_sequence_has_zero_delta() {
        let seq = vec![vec![3.0, -1.0]; 7];
        assert!(delta(&seq, 2).iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn ramp_slope_on_interior() {
        let k = 0.75;
        let seq: Vec<f64> = (0..20).map(|t| k * t as f64).collect();
        let d = delta_1d(&seq, 2);
        for &v in &d[2..18] {
            assert_eq!(v, k);
        }
        // replicated edges shrink the slope estimate
        assert!(d[0] < k && d[19] < k);
    }

    #[test]
    fn single_frame_delta_is_zero() {
        assert_eq!(delta(&[vec![1.0, 2.0, 3.0]], 2), vec![vec![0.0; 3]]);
        assert!(delta(&[], 2).is_empty());
    }

    #[test]
    fn cmn_cases() {
        let out = cepstral_mean_normalize(&[vec![4.0, -2.0]]);
        assert_eq!(out, vec![vec![0.0, 0.0]]);

        let zero_mean = vec![vec![1.0, -3.0], vec![-1.0, 3.0]];
        let out = cepstral_mean_normalize(&zero_mean);
        for (a, b) in out.iter().flatten().zip(zero_mean.iter().flatten()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn delta_is_linear(
            x in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 3), 1..30),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
            w in 1usize..4,
        ) {
            let y: Vec<Vec<f64>> = x.iter().rev().cloned().collect();
            let combo: Vec<Vec<f64>> = x.iter().zip(&y)
                .map(|(r, s)| r.iter().zip(s).map(|(u, v)| a * u + b * v).collect())
                .collect();
            let lhs = delta(&combo, w);
            let (dx, dy) = (delta(&x, w), delta(&y, w));
            for t in 0..x.len() {
                for j in 0..3 {
                    let rhs = a * dx[t][j] + b * dy[t][j];
                    prop_assert!((lhs[t][j] - rhs).abs() < 1e-10);
                }
            }
        }

        #[test]
        fn cmn_zero_means_and_idempotent(
            x in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 4), 1..40),
        ) {
            let once = cepstral_mean_normalize(&x);
            for m in col_means(&once) {
                prop_assert!(m.abs() < 1e-10);
            }
            let twice = cepstral_mean_normalize(&once);
            for (a, b) in once.iter().flatten().zip(twice.iter().flatten()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
