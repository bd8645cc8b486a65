use rand::seq::IndexedRandom;
use rand::Rng as _;

use super::knn::NeighborIndex;
use super::svm::{LinearSvm, SvmParams};
use super::{Provenance, Resampled};
use crate::data::Dataset;
use crate::rng::{rng_from, salt, Rng};
use crate::{Error, Result};

/// Duplicates random rows of each non-majority class, with replacement,
/// up to the majority count.
pub fn random_over(data: &Dataset, seed: u64) -> Resampled {
    let mut rng = rng_from(seed, salt::RESAMPLE);
    let target = data.count(data.majority_class());
    let mut rows: Vec<usize> = (0..data.n_rows()).collect();
    for c in data.present_classes() {
        let idx = data.class_indices(c);
        for _ in idx.len()..target {
            rows.push(*idx.choose(&mut rng).unwrap());
        }
    }
    Resampled::subset(data, rows)
}

/// Same-class neighbour lists for the rows of one class.
struct ClassNeighbors {
    rows: Vec<usize>,
    nn: Vec<Vec<usize>>,
}

fn class_neighbors(data: &Dataset, class: usize, k: usize) -> Result<ClassNeighbors> {
    let rows = data.class_indices(class);
    if rows.len() <= k {
        return Err(Error::Sampler {
            class,
            message: format!("{} rows is too few for k = {k} neighbours", rows.len()),
        });
    }
    let first = data.row(rows[0]);
    if rows.iter().all(|&r| data.row(r) == first) {
        log::warn!("class {class}: all rows are identical, synthetic rows will duplicate them");
    }
    let index = NeighborIndex::new(data, rows.clone());
    let nn = index.neighbors_of_rows(&rows, k);
    Ok(ClassNeighbors { rows, nn })
}

fn combine(base: &[f64], neighbor: &[f64], lambda: f64, extrapolate: bool) -> Vec<f64> {
    base.iter()
        .zip(neighbor)
        .map(|(&b, &n)| if extrapolate { b + lambda * (b - n) } else { b + lambda * (n - b) })
        .collect()
}

/// Accumulates synthetic rows on top of the original dataset.
struct Synth<'a> {
    data: &'a Dataset,
    features: Vec<f64>,
    labels: Vec<usize>,
    provenance: Vec<Provenance>,
}

impl<'a> Synth<'a> {
    fn new(data: &'a Dataset) -> Self {
        Synth {
            data,
            features: Vec::new(),
            labels: Vec::new(),
            provenance: (0..data.n_rows()).map(Provenance::Original).collect(),
        }
    }

    /// One synthetic row from base position `pos` of `cn`.
    fn emit(&mut self, cn: &ClassNeighbors, pos: usize, extrapolate: bool, rng: &mut Rng) {
        let base = cn.rows[pos];
        let neighbor = *cn.nn[pos].choose(rng).expect("k >= 1");
        let lambda: f64 = rng.random();
        let x = combine(self.data.row(base), self.data.row(neighbor), lambda, extrapolate);
        self.features.extend(x);
        self.labels.push(self.data.labels()[base]);
        self.provenance.push(Provenance::Synthetic {
            base,
            neighbor,
            lambda,
            extrapolated: extrapolate,
        });
    }

    fn finish(self) -> Result<Resampled> {
        let mut dataset = self.data.clone();
        dataset.extend(&self.features, &self.labels)?;
        Ok(Resampled {
            dataset,
            provenance: self.provenance,
        })
    }
}

/// Classes that need `need > 0` synthetic rows to reach the majority count.
fn deficits(data: &Dataset) -> Vec<(usize, usize)> {
    let target = data.count(data.majority_class());
    data.present_classes()
        .into_iter()
        .filter_map(|c| {
            let need = target - data.count(c);
            (need > 0).then_some((c, need))
        })
        .collect()
}

fn smote_class(s: &mut Synth<'_>, cn: &ClassNeighbors, bases: &[usize], need: usize, rng: &mut Rng) {
    for _ in 0..need {
        let pos = *bases.choose(rng).unwrap();
        s.emit(cn, pos, false, rng);
    }
}

/// SMOTE: `x_b + lambda (x_nn - x_b)` with a uniform base row, a uniform
/// choice among its `k` nearest same-class rows and `lambda ~ U[0, 1)`.
pub fn smote(data: &Dataset, k: usize, seed: u64) -> Result<Resampled> {
    let mut rng = rng_from(seed, salt::RESAMPLE);
    let mut s = Synth::new(data);
    for (c, need) in deficits(data) {
        let cn = class_neighbors(data, c, k)?;
        let bases: Vec<usize> = (0..cn.rows.len()).collect();
        smote_class(&mut s, &cn, &bases, need, &mut rng);
    }
    s.finish()
}

/// Number of other-class rows among each row's `k` nearest neighbours in the
/// whole dataset.
fn other_class_counts(data: &Dataset, index: &NeighborIndex<'_>, rows: &[usize], k: usize) -> Vec<usize> {
    let labels = data.labels();
    index
        .neighbors_of_rows(rows, k)
        .into_iter()
        .zip(rows)
        .map(|(nn, &r)| nn.iter().filter(|&&j| labels[j] != labels[r]).count())
        .collect()
}

/// Rows of `class` whose `k`-neighbourhood holds at least `k/2` but fewer
/// than `k` rows of other classes.
pub fn danger_points(data: &Dataset, class: usize, k: usize) -> Vec<usize> {
    let index = NeighborIndex::all(data);
    let rows = data.class_indices(class);
    other_class_counts(data, &index, &rows, k)
        .into_iter()
        .zip(&rows)
        .filter(|&(m, _)| 2 * m >= k && m < k)
        .map(|(_, &r)| r)
        .collect()
}

/// Borderline-SMOTE: only danger rows serve as bases. A class with no
/// danger rows falls back to plain SMOTE.
pub fn borderline_smote(data: &Dataset, k: usize, seed: u64) -> Result<Resampled> {
    let mut rng = rng_from(seed, salt::RESAMPLE);
    let mut s = Synth::new(data);
    let index = NeighborIndex::all(data);
    for (c, need) in deficits(data) {
        let cn = class_neighbors(data, c, k)?;
        let m = other_class_counts(data, &index, &cn.rows, k);
        let mut bases: Vec<usize> = (0..cn.rows.len()).filter(|&p| 2 * m[p] >= k && m[p] < k).collect();
        if bases.is_empty() {
            log::warn!("class {c}: no borderline rows, falling back to smote");
            bases = (0..cn.rows.len()).collect();
        }
        smote_class(&mut s, &cn, &bases, need, &mut rng);
    }
    s.finish()
}

/// SVM-SMOTE: a one-vs-rest linear SVM picks the class's support vectors
/// (rows with functional margin <= 1) as bases. Bases with fewer than half
/// of their `k` neighbours from other classes extrapolate away from the
/// chosen neighbour; the rest interpolate.
pub fn svm_smote(data: &Dataset, k: usize, params: &SvmParams, seed: u64) -> Result<Resampled> {
    params.validate()?;
    let mut rng = rng_from(seed, salt::RESAMPLE);
    let mut s = Synth::new(data);
    let index = NeighborIndex::all(data);
    for (c, need) in deficits(data) {
        let cn = class_neighbors(data, c, k)?;
        let positive: Vec<bool> = data.labels().iter().map(|&y| y == c).collect();
        let svm = LinearSvm::fit(data.features(), data.n_features(), &positive, params);
        let bases: Vec<usize> = (0..cn.rows.len())
            .filter(|&p| svm.decision(data.row(cn.rows[p])) <= 1.0)
            .collect();
        if bases.is_empty() {
            log::warn!("class {c}: svm found no support vectors, falling back to smote");
            let all: Vec<usize> = (0..cn.rows.len()).collect();
            smote_class(&mut s, &cn, &all, need, &mut rng);
            continue;
        }
        let sv_rows: Vec<usize> = bases.iter().map(|&p| cn.rows[p]).collect();
        let m = other_class_counts(data, &index, &sv_rows, k);
        for _ in 0..need {
            let b = rng.random_range(0..bases.len());
            s.emit(&cn, bases[b], 2 * m[b] < k, &mut rng);
        }
    }
    s.finish()
}

/// Splits `total` in proportion to `weights` using largest remainders, ties
/// to the lower position.
pub(crate) fn allocate(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut alloc: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = alloc.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        alloc[i] += 1;
    }
    alloc
}

/// ADASYN: each row's share of the class deficit is proportional to the
/// fraction of other-class rows among its `k` nearest neighbours.
pub fn adasyn(data: &Dataset, k: usize, seed: u64) -> Result<Resampled> {
    let mut rng = rng_from(seed, salt::RESAMPLE);
    let mut s = Synth::new(data);
    let index = NeighborIndex::all(data);
    for (c, need) in deficits(data) {
        let cn = class_neighbors(data, c, k)?;
        let mut ratio: Vec<f64> = other_class_counts(data, &index, &cn.rows, k)
            .into_iter()
            .map(|m| m as f64 / k as f64)
            .collect();
        if ratio.iter().all(|&r| r == 0.0) {
            log::warn!("class {c}: no rows near other classes, allocating uniformly");
            ratio.iter_mut().for_each(|r| *r = 1.0);
        }
        for (pos, g) in allocate(&ratio, need).into_iter().enumerate() {
            for _ in 0..g {
                s.emit(&cn, pos, false, &mut rng);
            }
        }
    }
    s.finish()
}
