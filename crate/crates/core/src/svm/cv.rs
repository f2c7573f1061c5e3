//! Stratified k-fold cross-validation and hyperparameter grid search.

use super::gram::{DenseGram, SquaredDistances};
use super::{
    compare_samples, solver, train_with, validate_samples, LabeledSample, SvmError, SvmModel,
    SvmParams, TrainOptions,
};
use crate::eval::auroc_from_scores;
use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `c in {0.1, 1, 10, 100, 1000}` x `gamma in {0.001, 0.01, 0.1, 1, 10}`.
pub fn default_grid() -> Vec<SvmParams> {
    let mut grid = Vec::new();
    for c in [0.1, 1.0, 10.0, 100.0, 1000.0] {
        for gamma in [0.001, 0.01, 0.1, 1.0, 10.0] {
            grid.push(SvmParams { c, gamma });
        }
    }
    grid
}

/// Assigns every sample to one of `folds` folds, stratified by class.
///
/// With `groups`, whole groups (e.g. videos) are assigned together so no group
/// straddles a training/validation boundary. Units of each class are shuffled
/// with `seed` and dealt round-robin.
pub fn stratified_folds(
    data: &[LabeledSample],
    groups: Option<&[usize]>,
    folds: usize,
    seed: u64,
) -> Result<Vec<usize>, SvmError> {
    if folds < 2 {
        return Err(SvmError::TooFewFolds(folds));
    }
    let group_of = |i: usize| groups.map_or(i, |g| g[i]);
    let mut assignment = vec![usize::MAX; data.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for fake in [false, true] {
        let members: Vec<usize> = (0..data.len())
            .filter(|&i| data[i].is_fake() == fake)
            .collect();
        let mut units: Vec<usize> = members.iter().map(|&i| group_of(i)).collect();
        units.sort_unstable();
        units.dedup();
        if units.len() < folds {
            return Err(SvmError::FoldConstruction {
                folds,
                available: units.len(),
            });
        }
        units.shuffle(&mut rng);
        let fold_of: BTreeMap<usize, usize> = units
            .iter()
            .enumerate()
            .map(|(k, &u)| (u, k % folds))
            .collect();
        for i in members {
            assignment[i] = fold_of[&group_of(i)];
        }
    }
    Ok(assignment)
}

/// Mean validation AUROC of one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub params: SvmParams,
    pub mean_auroc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchResult {
    pub best: SvmParams,
    pub best_auroc: f64,
    /// All grid points, sorted by `(c, gamma)`.
    pub cells: Vec<GridCell>,
    /// Retrained on all data with `best`.
    pub model: SvmModel,
}

/// Grid search configuration.
#[derive(Debug, Clone)]
pub struct GridSearch {
    pub grid: Vec<SvmParams>,
    pub folds: usize,
    pub seed: u64,
    pub train: TrainOptions,
}

impl GridSearch {
    pub fn new(grid: Vec<SvmParams>, folds: usize, seed: u64) -> Self {
        Self {
            grid,
            folds,
            seed,
            train: TrainOptions::default(),
        }
    }

    /// Runs the search; `groups[i]` identifies the video of sample `i`.
    pub fn run(
        &self,
        data: &[LabeledSample],
        groups: Option<&[usize]>,
    ) -> Result<GridSearchResult, SvmError> {
        if self.grid.is_empty() {
            return Err(SvmError::EmptyGrid);
        }
        for p in &self.grid {
            p.validate()?;
        }
        validate_samples(data)?;
        if let Some(g) = groups {
            if g.len() != data.len() {
                return Err(SvmError::DimensionMismatch {
                    expected: data.len(),
                    got: g.len(),
                });
            }
        }
        let assignment = stratified_folds(data, groups, self.folds, self.seed)?;

        let mut grid = self.grid.clone();
        grid.sort_by(|a, b| a.c.total_cmp(&b.c).then(a.gamma.total_cmp(&b.gamma)));
        grid.dedup();

        let fold_members: Vec<(Vec<usize>, Vec<usize>)> = (0..self.folds)
            .map(|f| {
                // same canonical order as `train`, so a cell's fold models are
                // exactly what training on that fold alone would produce
                let mut train_idx: Vec<usize> =
                    (0..data.len()).filter(|&i| assignment[i] != f).collect();
                train_idx.sort_by(|&a, &b| compare_samples(&data[a], &data[b]).then(a.cmp(&b)));
                (
                    train_idx,
                    (0..data.len()).filter(|&i| assignment[i] == f).collect(),
                )
            })
            .collect();

        let n = data.len();
        let sums = if n.saturating_mul(n).saturating_mul(8) <= self.train.kernel_cache_bytes {
            self.shared_distance_sums(data, &grid, &fold_members)
        } else {
            self.per_fold_sums(data, &grid, &fold_members)?
        };

        let cells: Vec<GridCell> = grid
            .iter()
            .zip(&sums)
            .map(|(p, s)| GridCell {
                params: *p,
                mean_auroc: s / self.folds as f64,
            })
            .collect();
        // strict improvement keeps the smallest (c, gamma) among ties
        let best_cell = cells.iter().fold(cells[0], |best, cell| {
            if cell.mean_auroc > best.mean_auroc {
                *cell
            } else {
                best
            }
        });
        let (model, _) = train_with(data, best_cell.params, &self.train)?;
        Ok(GridSearchResult {
            best: best_cell.params,
            best_auroc: best_cell.mean_auroc,
            cells,
            model,
        })
    }

    /// One distance matrix for all cells; each (gamma, fold) Gram is shared by every `c`.
    fn shared_distance_sums(
        &self,
        data: &[LabeledSample],
        grid: &[SvmParams],
        fold_members: &[(Vec<usize>, Vec<usize>)],
    ) -> Vec<f64> {
        let xs: Vec<&[f64]> = data.iter().map(|s| s.x.as_slice()).collect();
        let dist = SquaredDistances::new(&xs);
        let mut gammas: Vec<f64> = grid.iter().map(|p| p.gamma).collect();
        gammas.sort_by(f64::total_cmp);
        gammas.dedup();

        let mut sums = vec![0.0; grid.len()];
        for &gamma in &gammas {
            for (train_idx, val_idx) in fold_members {
                let mut gram = DenseGram::from_distances(&dist, train_idx, gamma);
                let y: Vec<f64> = train_idx.iter().map(|&i| data[i].y).collect();
                for (cell, params) in grid.iter().enumerate().filter(|(_, p)| p.gamma == gamma) {
                    let c: Vec<f64> = y.iter().map(|&yi| self.train.box_for(params, yi)).collect();
                    let sol = solver::solve(
                        &mut gram,
                        &y,
                        &c,
                        self.train.tolerance,
                        self.train.iteration_cap(y.len()),
                    );
                    sums[cell] += validation_auroc(&dist, data, train_idx, val_idx, &sol, gamma);
                }
            }
        }
        sums
    }

    /// Memory-bounded path: every fold model is trained independently.
    fn per_fold_sums(
        &self,
        data: &[LabeledSample],
        grid: &[SvmParams],
        fold_members: &[(Vec<usize>, Vec<usize>)],
    ) -> Result<Vec<f64>, SvmError> {
        let mut sums = vec![0.0; grid.len()];
        for (cell, params) in grid.iter().enumerate() {
            for (train_idx, val_idx) in fold_members {
                let subset: Vec<LabeledSample> =
                    train_idx.iter().map(|&i| data[i].clone()).collect();
                let (model, _) = train_with(&subset, *params, &self.train)?;
                let mut scored = Vec::with_capacity(val_idx.len());
                for &v in val_idx {
                    scored.push((model.decision_function(&data[v].x)?, data[v].is_fake()));
                }
                sums[cell] += auroc_from_scores(&scored).unwrap_or(0.5);
            }
        }
        Ok(sums)
    }
}

fn validation_auroc(
    dist: &SquaredDistances,
    data: &[LabeledSample],
    train_idx: &[usize],
    val_idx: &[usize],
    sol: &solver::Solution,
    gamma: f64,
) -> f64 {
    let support: Vec<(usize, f64)> = sol
        .alpha
        .iter()
        .enumerate()
        .filter(|(_, &a)| a > super::SUPPORT_THRESHOLD)
        .map(|(k, &a)| (train_idx[k], a * data[train_idx[k]].y))
        .collect();
    let mut scored = Vec::with_capacity(val_idx.len());
    for &v in val_idx {
        let f: f64 = support
            .iter()
            .map(|&(sv, coef)| coef * libm::exp(-gamma * dist.get(sv, v)))
            .sum::<f64>()
            - sol.rho;
        scored.push((f, data[v].is_fake()));
    }
    // stratification guarantees both classes in every validation fold
    auroc_from_scores(&scored).unwrap_or(0.5)
}

/// Grid search with ungrouped stratified folds and default training options.
pub fn grid_search_cv(
    data: &[LabeledSample],
    grid: &[SvmParams],
    folds: usize,
    seed: u64,
) -> Result<(SvmParams, SvmModel), SvmError> {
    let result = GridSearch::new(grid.to_vec(), folds, seed).run(data, None)?;
    Ok((result.best, result.model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::Rng;

    fn blobs(n_per_class: usize, sep: f64, seed: u64) -> Vec<LabeledSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for i in 0..2 * n_per_class {
            let fake = i % 2 == 1;
            let shift = if fake { sep } else { 0.0 };
            out.push(LabeledSample::new(
                vec![rng.random::<f64>() + shift, rng.random::<f64>()],
                fake,
            ));
        }
        out
    }

    #[test]
    fn default_grid_shape() {
        let g = default_grid();
        assert_eq!(g.len(), 25);
        assert!(g.contains(&SvmParams {
            c: 1000.0,
            gamma: 0.001
        }));
    }

    #[test]
    fn five_folds_of_one_hundred() {
        let data = blobs(50, 0.5, 1);
        let a = stratified_folds(&data, None, 5, 42).unwrap();
        for f in 0..5 {
            let members: Vec<&LabeledSample> = data
                .iter()
                .zip(&a)
                .filter(|(_, &k)| k == f)
                .map(|(s, _)| s)
                .collect();
            assert_eq!(members.len(), 20);
            assert_eq!(members.iter().filter(|s| s.is_fake()).count(), 10);
        }
        assert_eq!(a, stratified_folds(&data, None, 5, 42).unwrap());
    }

    #[test]
    fn grouped_folds_keep_groups_together() {
        let data = blobs(30, 0.5, 2);
        let groups: Vec<usize> = (0..data.len()).map(|i| (i % 2) * 100 + i / 6).collect();
        let a = stratified_folds(&data, Some(&groups), 3, 9).unwrap();
        for i in 0..data.len() {
            for j in 0..data.len() {
                if groups[i] == groups[j] {
                    assert_eq!(a[i], a[j]);
                }
            }
        }
    }

    #[test]
    fn fold_errors() {
        let data = blobs(3, 0.5, 3);
        assert_eq!(
            stratified_folds(&data, None, 1, 0),
            Err(SvmError::TooFewFolds(1))
        );
        assert_eq!(
            stratified_folds(&data, None, 4, 0),
            Err(SvmError::FoldConstruction {
                folds: 4,
                available: 3
            })
        );
    }

    #[test]
    fn single_point_grid() {
        let data = blobs(20, 1.0, 4);
        let p = SvmParams {
            c: 10.0,
            gamma: 0.5,
        };
        let (best, model) = grid_search_cv(&data, &[p], 5, 7).unwrap();
        assert_eq!(best, p);
        assert_eq!(model, super::super::train(&data, p).unwrap());
    }

    #[test]
    fn winner_beats_every_cell_when_recomputed() {
        let data = blobs(40, 0.4, 5);
        let grid = vec![
            SvmParams { c: 0.1, gamma: 0.1 },
            SvmParams { c: 1.0, gamma: 1.0 },
            SvmParams {
                c: 10.0,
                gamma: 10.0,
            },
            SvmParams {
                c: 100.0,
                gamma: 0.01,
            },
        ];
        let search = GridSearch::new(grid.clone(), 4, 3);
        let result = search.run(&data, None).unwrap();
        // independent re-evaluation with the public trainer
        let assignment = stratified_folds(&data, None, 4, 3).unwrap();
        let mut recomputed = Vec::new();
        for p in &grid {
            let mut total = 0.0;
            for f in 0..4 {
                let train: Vec<LabeledSample> = data
                    .iter()
                    .zip(&assignment)
                    .filter(|(_, &k)| k != f)
                    .map(|(s, _)| s.clone())
                    .collect();
                let model = super::super::train(&train, *p).unwrap();
                let scored: Vec<(f64, bool)> = data
                    .iter()
                    .zip(&assignment)
                    .filter(|(_, &k)| k == f)
                    .map(|(s, _)| (model.decision_function(&s.x).unwrap(), s.is_fake()))
                    .collect();
                total += auroc_from_scores(&scored).unwrap();
            }
            recomputed.push((*p, total / 4.0));
        }
        let best = recomputed
            .iter()
            .find(|(p, _)| *p == result.best)
            .unwrap()
            .1;
        for (p, score) in &recomputed {
            assert!(best >= *score - 1e-6, "{p:?}: {score} > {best}");
            let cell = result.cells.iter().find(|c| c.params == *p).unwrap();
            assert!((cell.mean_auroc - score).abs() < 1e-12, "{p:?}");
        }
    }

    #[test]
    fn ties_prefer_smaller_c_then_gamma() {
        // perfectly separated classes: every cell scores 1.0
        let data = blobs(15, 10.0, 6);
        let grid = vec![
            SvmParams {
                c: 10.0,
                gamma: 0.1,
            },
            SvmParams { c: 1.0, gamma: 1.0 },
            SvmParams { c: 1.0, gamma: 0.1 },
        ];
        let (best, _) = grid_search_cv(&data, &grid, 3, 1).unwrap();
        assert_eq!(best, SvmParams { c: 1.0, gamma: 0.1 });
    }

    #[test]
    fn memory_bounded_path_matches_shared_distances() {
        let data = blobs(20, 0.6, 9);
        let grid = vec![
            SvmParams { c: 1.0, gamma: 0.5 },
            SvmParams {
                c: 10.0,
                gamma: 2.0,
            },
        ];
        let fast = GridSearch::new(grid.clone(), 4, 3)
            .run(&data, None)
            .unwrap();
        let mut slow = GridSearch::new(grid, 4, 3);
        slow.train.kernel_cache_bytes = 0;
        let slow = slow.run(&data, None).unwrap();
        assert_eq!(fast.best, slow.best);
        for (a, b) in fast.cells.iter().zip(&slow.cells) {
            assert!((a.mean_auroc - b.mean_auroc).abs() < 1e-12);
        }
    }
}
