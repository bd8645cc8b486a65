use rand::seq::index::sample;

use super::kmeans::kmeans;
use super::knn::NeighborIndex;
use super::over::smote;
use super::{Provenance, Resampled};
use crate::data::Dataset;
use crate::rng::{derive_seed, rng_from, salt};
use crate::{Error, Result};

/// Keeps a random subset of each class, without replacement, of the size of
/// the smallest class.
pub fn random_under(data: &Dataset, seed: u64) -> Resampled {
    let mut rng = rng_from(seed, salt::RESAMPLE);
    let target = data.count(data.minority_class());
    let mut rows = Vec::with_capacity(target * data.n_classes());
    for c in data.present_classes() {
        let idx = data.class_indices(c);
        rows.extend(sample(&mut rng, idx.len(), target).into_iter().map(|j| idx[j]));
    }
    rows.sort_unstable();
    Resampled::subset(data, rows)
}

/// Majority vote over neighbour labels; a tie goes to the tied class whose
/// first occurrence is nearest.
pub(crate) fn knn_vote(labels: &[usize], neighbors: &[usize]) -> usize {
    let mut votes: Vec<(usize, usize)> = Vec::new();
    for &j in neighbors {
        match votes.iter_mut().find(|(c, _)| *c == labels[j]) {
            Some(v) => v.1 += 1,
            None => votes.push((labels[j], 1)),
        }
    }
    // votes is in order of first occurrence, so max_by_key's "last max" rule
    // would pick the farthest; scan for the first max instead
    let best = votes.iter().map(|v| v.1).max().unwrap_or(0);
    votes.iter().find(|v| v.1 == best).map_or(0, |v| v.0)
}

/// Single pass of edited nearest neighbours: every row of a class selected by
/// `clean` whose `k`-NN vote (over the full input) disagrees with its label
/// is removed.
pub(crate) fn enn_filter(data: &Dataset, k: usize, clean: impl Fn(usize) -> bool) -> Result<Resampled> {
    if k == 0 || data.n_rows() <= k {
        return Err(Error::Config(format!("enn with k = {k} on {} rows", data.n_rows())));
    }
    let labels = data.labels();
    let candidates: Vec<usize> = (0..data.n_rows()).filter(|&i| clean(labels[i])).collect();
    let index = NeighborIndex::all(data);
    let nn = index.neighbors_of_rows(&candidates, k);
    let mut remove = vec![false; data.n_rows()];
    for (&i, neighbors) in candidates.iter().zip(&nn) {
        remove[i] = knn_vote(labels, neighbors) != labels[i];
    }
    let keep: Vec<usize> = (0..data.n_rows()).filter(|&i| !remove[i]).collect();
    let out = Resampled::subset(data, keep);
    for c in data.present_classes() {
        if out.dataset.count(c) == 0 {
            return Err(Error::Sampler {
                class: c,
                message: format!("editing with k = {k} would remove every row"),
            });
        }
    }
    Ok(out)
}

/// Edited nearest neighbours over every class except the smallest.
pub fn enn(data: &Dataset, k: usize) -> Result<Resampled> {
    let minority = data.minority_class();
    enn_filter(data, k, |c| c != minority)
}

/// Repeated ENN with `k = 1, 2, ..., max_k`, each pass on the survivors of
/// the previous one. The protected class is fixed from the input.
pub fn all_knn(data: &Dataset, max_k: usize) -> Result<Resampled> {
    let minority = data.minority_class();
    let mut current = Resampled::identity(data);
    for k in 1..=max_k {
        let step = enn_filter(&current.dataset, k, |c| c != minority)?;
        current = current.then(step);
    }
    Ok(current)
}

/// NearMiss-1: from each class larger than the smallest, keep the rows with
/// the smallest mean distance to their `k` nearest rows of the smallest class.
pub fn near_miss(data: &Dataset, k: usize) -> Result<Resampled> {
    let minority = data.minority_class();
    let min_rows = data.class_indices(minority);
    let target = min_rows.len();
    let k = k.min(target);
    let index = NeighborIndex::new(data, min_rows);
    let mut keep = Vec::new();
    for c in data.present_classes() {
        let rows = data.class_indices(c);
        if c == minority || rows.len() <= target {
            keep.extend(rows);
            continue;
        }
        let mut scored: Vec<(f64, usize)> = rows
            .iter()
            .map(|&r| {
                let nn = index.query_with_dist(data.row(r), k, None);
                let mean = nn.iter().map(|(_, d2)| d2.sqrt()).sum::<f64>() / k as f64;
                (mean, r)
            })
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        keep.extend(scored.into_iter().take(target).map(|(_, r)| r));
    }
    keep.sort_unstable();
    Ok(Resampled::subset(data, keep))
}

/// Replaces each class larger than the smallest by the centroids of a
/// k-means clustering with `k` equal to the smallest class size.
pub fn cluster_centroids(data: &Dataset, seed: u64) -> Result<Resampled> {
    let target = data.count(data.minority_class());
    let d = data.n_features();
    let mut keep = Vec::new();
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut members = Vec::new();
    for c in data.present_classes() {
        let rows = data.class_indices(c);
        if rows.len() <= target {
            keep.extend(rows);
            continue;
        }
        let points: Vec<f64> = rows.iter().flat_map(|&r| data.row(r).iter().copied()).collect();
        let km = kmeans(&points, d, target, derive_seed(seed, c as u64)).map_err(|e| Error::Sampler {
            class: c,
            message: e.to_string(),
        })?;
        log::debug!("class {c}: k-means objective history {:?}", km.objective);
        for cluster in 0..target {
            let m: Vec<usize> = rows
                .iter()
                .zip(&km.assignments)
                .filter(|(_, &a)| a == cluster)
                .map(|(&r, _)| r)
                .collect();
            features.extend_from_slice(&km.centroids[cluster * d..(cluster + 1) * d]);
            labels.push(c);
            members.push(m);
        }
    }
    let mut out = Resampled::subset(data, keep);
    out.dataset.extend(&features, &labels)?;
    out.provenance.extend(members.into_iter().map(Provenance::Centroid));
    Ok(out)
}

/// SMOTE followed by a 3-NN ENN pass that may remove rows of any class.
pub fn smote_enn(data: &Dataset, k: usize, seed: u64) -> Result<Resampled> {
    let over = smote(data, k, seed)?;
    let edited = enn_filter(&over.dataset, 3, |_| true)?;
    Ok(over.then(edited))
}

#[cfg(test)]
mod tests {
    use super::super::knn::brute_force;
    use super::super::testutil::blobs;
    use super::*;

    fn enn_oracle(d: &Dataset, k: usize, clean: impl Fn(usize) -> bool) -> Vec<usize> {
        let all: Vec<usize> = (0..d.n_rows()).collect();
        all.iter()
            .copied()
            .filter(|&i| {
                let y = d.labels()[i];
                if !clean(y) {
                    return true;
                }
                let nn = brute_force(d, &all, d.row(i), k, Some(i));
                let mut counts = std::collections::BTreeMap::new();
                for &j in &nn {
                    *counts.entry(d.labels()[j]).or_insert(0) += 1;
                }
                let best = *counts.values().max().unwrap();
                let pred = nn.iter().map(|&j| d.labels()[j]).find(|c| counts[c] == best).unwrap();
                pred == y
            })
            .collect()
    }

    fn kept_rows(r: &Resampled) -> Vec<usize> {
        r.provenance
            .iter()
            .map(|p| match p {
                Provenance::Original(i) => *i,
                other => panic!("unexpected {other:?}"),
            })
            .collect()
    }

    #[test]
    fn random_under_is_a_balanced_subset() {
        let d = blobs(100, 10, 1.0, 0);
        let r = random_under(&d, 3);
        assert_eq!((r.dataset.count(0), r.dataset.count(1)), (10, 10));
        let rows = kept_rows(&r);
        assert!(rows.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(d.select(&rows), r.dataset);
    }

    #[test]
    fn enn_matches_oracle() {
        for seed in 0..4 {
            let d = blobs(200, 60, 1.0, seed);
            for k in [1, 3, 5] {
                let r = enn(&d, k).unwrap();
                assert_eq!(kept_rows(&r), enn_oracle(&d, k, |c| c == 0));
            }
        }
    }

    #[test]
    fn enn_keeps_separated_blobs_and_drops_intruder() {
        let d = blobs(50, 20, 20.0, 1);
        assert_eq!(enn(&d, 3).unwrap().dataset, d);
        let mut rows: Vec<Vec<f64>> = (0..d.n_rows()).map(|i| d.row(i).to_vec()).collect();
        let mut labels = d.labels().to_vec();
        rows.push(vec![20.0, 20.0]);
        labels.push(0);
        let d2 = Dataset::from_rows(&rows, labels, 2).unwrap();
        let kept = kept_rows(&enn(&d2, 3).unwrap());
        assert!(!kept.contains(&70));
        assert_eq!(kept.len(), 70);
    }

    #[test]
    fn enn_refuses_to_empty_a_class() {
        let d = Dataset::from_rows(
            &[vec![0.0], vec![0.1], vec![0.2], vec![0.3], vec![0.15], vec![0.05]],
            vec![1, 1, 1, 1, 0, 0],
            2,
        )
        .unwrap();
        // class 0 is the minority here, so clean class 1 with k=1 must still keep some rows
        assert!(enn(&d, 1).is_ok());
        assert!(matches!(enn_filter(&d, 3, |c| c == 0), Err(Error::Sampler { class: 0, .. })));
    }

    #[test]
    fn all_knn_is_iterated_enn() {
        let d = blobs(150, 40, 1.0, 2);
        let r = all_knn(&d, 3).unwrap();
        let mut cur = d.clone();
        let mut idx: Vec<usize> = (0..d.n_rows()).collect();
        for k in 1..=3 {
            let keep = enn_oracle(&cur, k, |c| c == 0);
            idx = keep.iter().map(|&i| idx[i]).collect();
            cur = cur.select(&keep);
        }
        assert_eq!(kept_rows(&r), idx);
    }

    #[test]
    fn near_miss_matches_oracle() {
        let d = blobs(120, 15, 1.5, 6);
        let r = near_miss(&d, 3).unwrap();
        assert_eq!(r.dataset.count(0), 15);
        let minority = d.class_indices(1);
        let mut scored: Vec<(f64, usize)> = d
            .class_indices(0)
            .into_iter()
            .map(|i| {
                let nn = brute_force(&d, &minority, d.row(i), 3, None);
                let m = nn
                    .iter()
                    .map(|&j| super::super::knn::sq_dist(d.row(i), d.row(j)).sqrt())
                    .sum::<f64>()
                    / 3.0;
                (m, i)
            })
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut expect: Vec<usize> = scored.iter().take(15).map(|s| s.1).collect();
        expect.extend(minority);
        expect.sort_unstable();
        assert_eq!(kept_rows(&r), expect);
    }

    #[test]
    fn cluster_centroids_on_separated_pairs() {
        let d = Dataset::from_rows(
            &[
                vec![0.0, 0.0],
                vec![0.0, 1.0],
                vec![50.0, 50.0],
                vec![50.0, 51.0],
                vec![10.0, 10.0],
                vec![11.0, 10.0],
            ],
            vec![0, 0, 0, 0, 1, 1],
            2,
        )
        .unwrap();
        let r = cluster_centroids(&d, 0).unwrap();
        assert_eq!(r.dataset.count(0), 2);
        let mut cents: Vec<Vec<f64>> = (0..r.dataset.n_rows())
            .filter(|&i| r.dataset.labels()[i] == 0)
            .map(|i| r.dataset.row(i).to_vec())
            .collect();
        cents.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(cents, vec![vec![0.0, 0.5], vec![50.0, 50.5]]);
    }

    #[test]
    fn smote_enn_is_composition() {
        let d = blobs(100, 20, 1.5, 3);
        let r = smote_enn(&d, 5, 8).unwrap();
        let over = smote(&d, 5, 8).unwrap();
        let keep = enn_oracle(&over.dataset, 3, |_| true);
        assert_eq!(r.dataset, over.dataset.select(&keep));
        // every survivor agreed with the 3-NN vote it was judged by
        let all: Vec<usize> = (0..over.dataset.n_rows()).collect();
        for &i in &keep {
            let nn = brute_force(&over.dataset, &all, over.dataset.row(i), 3, Some(i));
            assert_eq!(knn_vote(over.dataset.labels(), &nn), over.dataset.labels()[i]);
        }
    }

    #[test]
    fn smote_enn_on_clean_balanced_data_is_identity() {
        let d = blobs(40, 40, 30.0, 9);
        assert_eq!(smote_enn(&d, 5, 0).unwrap().dataset, d);
    }
}
