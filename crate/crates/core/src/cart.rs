//! CART regression trees with per-split covariate subsampling.
//!
//! Trees are grown by recursive least-squares partitioning on the bootstrap
//! (in-bag) sample. At each splittable node, `mtry` covariates are drawn
//! without replacement; candidate thresholds are midpoints between
//! consecutive distinct in-node values; the split maximizing the decrease in
//! within-node sum of squared deviations wins, with ties broken toward the
//! lowest covariate index and then the lowest threshold. Bootstrap and
//! covariate draws come from separate sub-streams of the tree seed, so
//! changing `mtry` never perturbs the bootstrap sample.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dgp::Dataset;
use crate::error::{Error, Result};
use crate::seed::substream;

/// Growth controls shared by every tree in an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GrowthParams {
    /// Covariates drawn as split candidates at each node; `mtry = p` is
    /// bagging (full greedy CART on the bootstrap sample).
    pub mtry: usize,
    /// Nodes with at most this many in-bag observations are not split.
    pub min_node_size: usize,
    /// Resample `n` observations with replacement before growing.
    pub bootstrap: bool,
}

impl GrowthParams {
    pub fn new(mtry: usize) -> Self {
        GrowthParams {
            mtry,
            min_node_size: 5,
            bootstrap: true,
        }
    }

    fn validate(&self, p: usize) -> Result<()> {
        if self.mtry == 0 || self.mtry > p {
            return Err(Error::invalid(format!(
                "mtry must lie in [1, {p}], got {}",
                self.mtry
            )));
        }
        if self.min_node_size == 0 {
            return Err(Error::invalid("min_node_size must be at least 1"));
        }
        Ok(())
    }
}

/// An axis-aligned split; `x` routes left iff `x[covariate_index] <= threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRule {
    pub covariate_index: usize,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Internal {
        rule: SplitRule,
        left: usize,
        right: usize,
    },
    Leaf {
        /// Arithmetic mean of the in-bag responses in this cell.
        prediction: f64,
        /// In-bag observations (with multiplicity) in this cell.
        count: usize,
    },
}

/// A grown partition with leaf means; immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
    inbag: Vec<usize>,
    p: usize,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        match &self.nodes[self.leaf_index(x)?] {
            Node::Leaf { prediction, .. } => Ok(*prediction),
            Node::Internal { .. } => unreachable!("routing ends at a leaf"),
        }
    }

    /// Index (in `nodes`) of the unique leaf whose cell contains `x`.
    pub fn leaf_index(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.p {
            return Err(Error::invalid(format!(
                "query has {} coordinates, tree was grown on {}",
                x.len(),
                self.p
            )));
        }
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { .. } => return Ok(at),
                Node::Internal { rule, left, right } => {
                    at = if x[rule.covariate_index] <= rule.threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// The bootstrap multiset the tree was grown on.
    pub fn inbag_indices(&self) -> &[usize] {
        &self.inbag
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    /// Split rules in node order — the partition structure without leaf values.
    pub fn partition_signature(&self) -> Vec<(usize, u64, usize)> {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| match n {
                Node::Internal { rule, .. } => {
                    Some((i, rule.threshold.to_bits(), rule.covariate_index))
                }
                Node::Leaf { .. } => None,
            })
            .collect()
    }
}

/// `n` uniform draws with replacement from `0..n`.
pub fn bootstrap_indices(n: usize, seed: u64) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::invalid("bootstrap needs n >= 1"));
    }
    Ok(draw_bootstrap(n, &mut substream(seed, "bootstrap", &[])))
}

fn draw_bootstrap(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}

/// Grows one tree on `data` with the given params and seed.
pub fn grow_tree(data: &Dataset, params: &GrowthParams, seed: u64) -> Result<Tree> {
    if data.n() == 0 {
        return Err(Error::invalid("cannot grow a tree on an empty dataset"));
    }
    params.validate(data.p())?;

    let inbag = if params.bootstrap {
        draw_bootstrap(data.n(), &mut substream(seed, "bootstrap", &[]))
    } else {
        (0..data.n()).collect()
    };

    let mut builder = Builder {
        data,
        params,
        mtry_rng: substream(seed, "mtry", &[]),
        nodes: Vec::new(),
        sorted: Vec::new(),
    };
    builder.build(inbag.clone());

    Ok(Tree {
        nodes: builder.nodes,
        inbag,
        p: data.p(),
    })
}

struct Builder<'a> {
    data: &'a Dataset,
    params: &'a GrowthParams,
    mtry_rng: ChaCha8Rng,
    nodes: Vec<Node>,
    /// scratch: (covariate value, response, arrival order) per in-node point
    sorted: Vec<(f64, f64, u32)>,
}

struct Split {
    rule: SplitRule,
    gain: f64,
}

impl Builder<'_> {
    /// Depth-first: a node draws its candidates before its children are
    /// built, and the left subtree is completed before the right one starts,
    /// which pins the covariate-draw stream to the partition structure.
    fn build(&mut self, rows: Vec<usize>) -> usize {
        let id = self.nodes.len();
        let count = rows.len();
        let sum: f64 = rows.iter().map(|&i| self.data.y[i]).sum();
        self.nodes.push(Node::Leaf {
            prediction: sum / count as f64,
            count,
        });

        if count <= self.params.min_node_size || self.all_equal(&rows) {
            return id;
        }
        let candidates = self.draw_candidates();
        let Some(split) = self.best_split(&rows, &candidates) else {
            return id;
        };
        debug_assert!(split.gain > 0.0);

        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&i| self.data.x.get(i, split.rule.covariate_index) <= split.rule.threshold);
        let left = self.build(left_rows);
        let right = self.build(right_rows);
        self.nodes[id] = Node::Internal {
            rule: split.rule,
            left,
            right,
        };
        id
    }

    fn all_equal(&self, rows: &[usize]) -> bool {
        let first = self.data.y[rows[0]];
        rows.iter().all(|&i| self.data.y[i] == first)
    }

    /// `mtry` covariate indices without replacement, ascending. Candidates
    /// are evaluated in index order so that exact criterion ties resolve to
    /// the lowest index. With `mtry = p` the draw is skipped: the candidate
    /// set is always the full one and the tree depends only on the bootstrap
    /// stream.
    fn draw_candidates(&mut self) -> Vec<usize> {
        let p = self.data.p();
        let m = self.params.mtry;
        if m >= p {
            return (0..p).collect();
        }
        let mut pool: Vec<usize> = (0..p).collect();
        for k in 0..m {
            let j = self.mtry_rng.gen_range(k..p);
            pool.swap(k, j);
        }
        pool.truncate(m);
        pool.sort_unstable();
        pool
    }

    fn best_split(&mut self, rows: &[usize], candidates: &[usize]) -> Option<Split> {
        let count = rows.len() as f64;
        let (mut sum, mut sum2) = (0.0, 0.0);
        for &i in rows {
            let y = self.data.y[i];
            sum += y;
            sum2 += y * y;
        }
        let parent_sse = sum2 - sum * sum / count;

        let mut best: Option<Split> = None;
        for &j in candidates {
            self.sorted.clear();
            for (pos, &i) in rows.iter().enumerate() {
                self.sorted
                    .push((self.data.x.get(i, j), self.data.y[i], pos as u32));
            }
            // total order (value, arrival) keeps prefix sums deterministic
            // under duplicate covariate values
            self.sorted
                .sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));

            let (mut left_sum, mut left_sum2) = (0.0, 0.0);
            for k in 1..self.sorted.len() {
                let (xv, yv, _) = self.sorted[k - 1];
                left_sum += yv;
                left_sum2 += yv * yv;
                let next_x = self.sorted[k].0;
                if xv >= next_x {
                    continue;
                }
                let nl = k as f64;
                let nr = count - nl;
                let sse_left = left_sum2 - left_sum * left_sum / nl;
                let right_sum = sum - left_sum;
                let sse_right = (sum2 - left_sum2) - right_sum * right_sum / nr;
                let gain = parent_sse - sse_left - sse_right;
                if gain > 0.0 && best.as_ref().map_or(true, |b| gain > b.gain) {
                    // if the midpoint of two adjacent floats rounds up to
                    // next_x, fall back to xv so the right child stays
                    // nonempty under `<=` routing
                    let mut threshold = 0.5 * (xv + next_x);
                    if !(threshold < next_x) {
                        threshold = xv;
                    }
                    best = Some(Split {
                        rule: SplitRule {
                            covariate_index: j,
                            threshold,
                        },
                        gain,
                    });
                }
            }
        }
        best
    }
}
