//! Equal-weight tree ensembles: bagging (`mtry = p`) and random forests
//! (`mtry < p`) differ only in the per-split covariate draw.

use rayon::prelude::*;

use crate::cart::{grow_tree, GrowthParams, Tree};
use crate::dgp::Dataset;
use crate::error::{Error, Result};
use crate::seed::subseed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnsembleKind {
    Bagging,
    Forest,
}

/// `B` trees grown on the same dataset with index-derived seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel {
    trees: Vec<Tree>,
    params: GrowthParams,
    kind: EnsembleKind,
}

/// Trains `num_trees` trees. Tree `b` uses the sub-seed `(seed, "tree", b)`,
/// so the model is identical for any degree of parallelism and growing more
/// trees never reshuffles existing ones.
pub fn train_ensemble(
    data: &Dataset,
    params: &GrowthParams,
    num_trees: usize,
    seed: u64,
) -> Result<EnsembleModel> {
    if num_trees == 0 {
        return Err(Error::invalid("an ensemble needs at least one tree"));
    }
    let trees = (0..num_trees)
        .into_par_iter()
        .map(|b| grow_tree(data, params, subseed(seed, "tree", &[b as u64])))
        .collect::<Result<Vec<Tree>>>()?;
    let kind = if params.mtry == data.p() {
        EnsembleKind::Bagging
    } else {
        EnsembleKind::Forest
    };
    Ok(EnsembleModel {
        trees,
        params: *params,
        kind,
    })
}

impl EnsembleModel {
    /// Arithmetic mean of the tree predictions, accumulated in tree-index
    /// order so results do not depend on scheduling.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let (sum, _) = self.predict_stats(x)?;
        Ok(sum / self.trees.len() as f64)
    }

    /// Individual tree predictions, in tree-index order.
    pub fn predict_per_tree(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.trees.iter().map(|t| t.predict(x)).collect()
    }

    /// `(sum, sum of squares)` of the tree predictions at `x`, in tree-index
    /// order — the streaming sufficient statistics for ensemble mean and
    /// tree-level dispersion.
    pub fn predict_stats(&self, x: &[f64]) -> Result<(f64, f64)> {
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for tree in &self.trees {
            let t = tree.predict(x)?;
            sum += t;
            sum_sq += t * t;
        }
        Ok((sum, sum_sq))
    }

    pub fn num_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn kind(&self) -> EnsembleKind {
        self.kind
    }

    pub fn params(&self) -> &GrowthParams {
        &self.params
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }
}
