use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Gmm, HmmError, HmmModel, Topology, MIN_VARIANCE, VARIANCE_FLOOR_SCALE};
use crate::features::FeatureMatrix;

const KMEANS_MAX_ITER: usize = 50;

/// Per-dimension variance floor: `VARIANCE_FLOOR_SCALE` times the pooled
/// variance of every frame in `data`, never below `MIN_VARIANCE`.
pub fn variance_floor(data: &[FeatureMatrix]) -> Result<Vec<f64>, HmmError> {
    let dim = data.first().ok_or(HmmError::NoData)?.dim();
    let mut count = 0usize;
    let mut mean = vec![0.0; dim];
    for fm in data {
        if fm.dim() != dim {
            return Err(HmmError::DimensionMismatch {
                expected: dim,
                got: fm.dim(),
            });
        }
        for row in fm.rows() {
            count += 1;
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
    }
    if count == 0 {
        return Err(HmmError::NoData);
    }
    mean.iter_mut().for_each(|m| *m /= count as f64);
    let mut var = vec![0.0; dim];
    for row in data.iter().flat_map(|fm| fm.rows()) {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    Ok(var
        .into_iter()
        .map(|s| (VARIANCE_FLOOR_SCALE * s / count as f64).max(MIN_VARIANCE))
        .collect())
}

/// Clustering of a point set into `k` groups.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub centers: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centers: &[Vec<f64>], x: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, center) in centers.iter().enumerate() {
        let d = sq_dist(center, x);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

/// Lloyd's k-means seeded with `k` distinct random points. Assignment ties go
/// to the lowest centre index; an emptied cluster is re-seeded with the point
/// farthest from its current centre.
pub fn kmeans(points: &[&[f64]], k: usize, seed: u64) -> Result<KMeans, HmmError> {
    if k == 0 || points.len() < k {
        return Err(HmmError::InsufficientData(format!(
            "{} points cannot form {k} clusters",
            points.len()
        )));
    }
    let dim = points[0].len();
    if k == 1 {
        let mut c = vec![0.0; dim];
        for p in points {
            for (a, v) in c.iter_mut().zip(*p) {
                *a += v;
            }
        }
        c.iter_mut().for_each(|a| *a /= points.len() as f64);
        return Ok(KMeans {
            centers: vec![c],
            assignment: vec![0; points.len()],
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = sample(&mut rng, points.len(), k).into_vec();
    picks.sort_unstable();
    let mut centers: Vec<Vec<f64>> = picks.iter().map(|&i| points[i].to_vec()).collect();
    let mut assignment = vec![usize::MAX; points.len()];
    for _ in 0..KMEANS_MAX_ITER {
        let mut changed = false;
        for (a, p) in assignment.iter_mut().zip(points) {
            let c = nearest(&centers, p);
            if *a != c {
                *a = c;
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (&a, p) in assignment.iter().zip(points) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(*p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..points.len())
                    .fold((0, -1.0), |(bi, bd), i| {
                        let d = sq_dist(points[i], &centers[assignment[i]]);
                        if d > bd {
                            (i, d)
                        } else {
                            (bi, bd)
                        }
                    })
                    .0;
                centers[c] = points[far].to_vec();
                assignment[far] = c;
                changed = true;
            } else {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        if !changed {
            break;
        }
    }
    Ok(KMeans { centers, assignment })
}

/// Flat-start model: each sequence is cut into `num_states` equal contiguous
/// segments, segment `j` of every sequence is pooled for state `j`, and a
/// k-means fit of the pool gives that state's mixture. Transition rows are
/// uniform over the transitions the topology allows.
pub fn init_model(
    num_states: usize,
    num_mixtures: usize,
    topology: Topology,
    data: &[FeatureMatrix],
    seed: u64,
) -> Result<HmmModel, HmmError> {
    if num_states == 0 || num_mixtures == 0 {
        return Err(HmmError::InvalidModel("states and mixtures must be >= 1".into()));
    }
    let floor = variance_floor(data)?;
    let dim = floor.len();
    let mut pools: Vec<Vec<&[f64]>> = vec![Vec::new(); num_states];
    for (s, fm) in data.iter().enumerate() {
        let t_len = fm.num_frames();
        if topology == Topology::LeftToRight && t_len < num_states {
            return Err(HmmError::InsufficientData(format!(
                "sequence {s} has {t_len} frames, fewer than {num_states} states"
            )));
        }
        for (t, row) in fm.rows().enumerate() {
            pools[t * num_states / t_len].push(row);
        }
    }
    let emissions = pools
        .iter()
        .enumerate()
        .map(|(j, pool)| {
            if pool.len() < num_mixtures {
                return Err(HmmError::InsufficientData(format!(
                    "state {j} received {} frames for {num_mixtures} mixtures",
                    pool.len()
                )));
            }
            let km = kmeans(pool, num_mixtures, seed.wrapping_add(j as u64))?;
            let mut counts = vec![0usize; num_mixtures];
            let mut sq = vec![vec![0.0; dim]; num_mixtures];
            for (&a, p) in km.assignment.iter().zip(pool) {
                counts[a] += 1;
                for ((s, v), c) in sq[a].iter_mut().zip(*p).zip(&km.centers[a]) {
                    *s += (v - c) * (v - c);
                }
            }
            let weights = counts.iter().map(|&c| c as f64 / pool.len() as f64).collect();
            let variances = sq
                .iter()
                .zip(&counts)
                .map(|(s, &c)| {
                    s.iter()
                        .zip(&floor)
                        .map(|(v, f)| (v / c.max(1) as f64).max(*f))
                        .collect()
                })
                .collect();
            Gmm::new(weights, km.centers, variances)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let allowed = HmmModel::allowed_transitions(topology, num_states);
    let transitions = allowed
        .iter()
        .map(|row| {
            let n = row.iter().filter(|&&a| a).count() as f64;
            row.iter().map(|&a| if a { 1.0 / n } else { 0.0 }).collect()
        })
        .collect();
    let initial = match topology {
        Topology::Ergodic => vec![1.0 / num_states as f64; num_states],
        Topology::LeftToRight => {
            let mut p = vec![0.0; num_states];
            p[0] = 1.0;
            p
        }
    };
    HmmModel::new(initial, transitions, emissions, topology)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureKind;

    fn seq(values: &[f64]) -> FeatureMatrix {
        FeatureMatrix::from_flat(values.to_vec(), 1, 100.0, FeatureKind::Mfcc39).unwrap()
    }

    #[test]
    fn single_mixture_means_are_segment_means() {
        let data = vec![
            seq(&[1.0, 2.0, 3.0, 10.0, 11.0, 12.0]),
            seq(&[0.0, 4.0, 9.0, 13.0]),
        ];
        let m = init_model(2, 1, Topology::LeftToRight, &data, 1).unwrap();
        let s0 = (1.0 + 2.0 + 3.0 + 0.0 + 4.0) / 5.0;
        let s1 = (10.0 + 11.0 + 12.0 + 9.0 + 13.0) / 5.0;
        assert_eq!(m.emissions()[0].means()[0], vec![s0]);
        assert_eq!(m.emissions()[1].means()[0], vec![s1]);
    }

    #[test]
    fn left_to_right_layout() {
        let data = vec![seq(&(0..30).map(f64::from).collect::<Vec<_>>())];
        let m = init_model(3, 2, Topology::LeftToRight, &data, 9).unwrap();
        assert_eq!(m.initial(), &[1.0, 0.0, 0.0]);
        assert_eq!(m.transitions()[0], vec![0.5, 0.5, 0.0]);
        assert_eq!(m.transitions()[1], vec![0.0, 0.5, 0.5]);
        assert_eq!(m.transitions()[2], vec![0.0, 0.0, 1.0]);
        let again = init_model(3, 2, Topology::LeftToRight, &data, 9).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn ergodic_layout() {
        let data = vec![seq(&(0..12).map(f64::from).collect::<Vec<_>>())];
        let m = init_model(3, 1, Topology::Ergodic, &data, 0).unwrap();
        for row in m.transitions() {
            assert!(row.iter().all(|&p| (p - 1.0 / 3.0).abs() < 1e-15));
        }
    }

    #[test]
    fn insufficient_data() {
        assert!(matches!(
            init_model(4, 1, Topology::LeftToRight, &[seq(&[1.0, 2.0])], 0),
            Err(HmmError::InsufficientData(_))
        ));
        assert!(matches!(
            init_model(2, 3, Topology::Ergodic, &[seq(&[1.0, 2.0, 3.0, 4.0])], 0),
            Err(HmmError::InsufficientData(_))
        ));
        assert!(matches!(init_model(2, 1, Topology::Ergodic, &[], 0), Err(HmmError::NoData)));
    }

    #[test]
    fn constant_data_gets_floor() {
        let data = vec![seq(&[2.0; 10])];
        let m = init_model(2, 1, Topology::LeftToRight, &data, 0).unwrap();
        assert_eq!(m.emissions()[0].variances()[0], vec![MIN_VARIANCE]);
    }

    #[test]
    fn kmeans_separates_clusters() {
        let pts: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![if i % 2 == 0 { -5.0 } else { 5.0 } + 0.01 * i as f64])
            .collect();
        let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
        let km = kmeans(&refs, 2, 3).unwrap();
        let mut c: Vec<f64> = km.centers.iter().map(|c| c[0]).collect();
        c.sort_by(f64::total_cmp);
        assert!((c[0] + 4.9).abs() < 0.2 && (c[1] - 5.1).abs() < 0.2, "{c:?}");
        for (i, &a) in km.assignment.iter().enumerate() {
            assert_eq!(a, km.assignment[i % 2]);
        }
    }
}
