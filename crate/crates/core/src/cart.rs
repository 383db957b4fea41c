//! Regression trees with a pluggable split criterion.
//!
//! Rows carry a pair of statistics `(g, h)`. Variance trees use `g = y`,
//! `h = 1`; gradient trees use the first and second loss derivatives. A
//! criterion turns the summed statistics of a candidate left/right
//! partition into a gain and the statistics of a leaf into its value.
//!
//! Trees grow level by level. Candidates for one node are visited in the
//! order (feature ascending, threshold ascending) and a later candidate only
//! replaces the incumbent on a strictly larger gain, so the lowest feature
//! and the lowest threshold win ties.

use std::fmt::Write as _;
use std::ops::{Add, AddAssign, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GradStats {
    pub g: f64,
    pub h: f64,
}

impl GradStats {
    pub fn new(g: f64, h: f64) -> Self {
        Self { g, h }
    }
}

impl Add for GradStats {
    type Output = GradStats;
    fn add(self, o: GradStats) -> GradStats {
        GradStats::new(self.g + o.g, self.h + o.h)
    }
}

impl AddAssign for GradStats {
    fn add_assign(&mut self, o: GradStats) {
        self.g += o.g;
        self.h += o.h;
    }
}

impl Sub for GradStats {
    type Output = GradStats;
    fn sub(self, o: GradStats) -> GradStats {
        GradStats::new(self.g - o.g, self.h - o.h)
    }
}

pub trait SplitCriterion {
    /// Objective improvement of replacing one leaf by the two children.
    fn gain(&self, left: GradStats, right: GradStats) -> f64;
    fn leaf_value(&self, stats: GradStats) -> f64;
    /// Extra per-child constraint beyond the sample-count minimum.
    fn admissible(&self, _left: GradStats, _right: GradStats) -> bool {
        true
    }
}

/// Squared-error reduction; leaf value is the (weighted) mean.
#[derive(Debug, Clone, Copy, Default)]
pub struct VarianceCriterion;

impl SplitCriterion for VarianceCriterion {
    fn gain(&self, left: GradStats, right: GradStats) -> f64 {
        let n = left.h + right.h;
        let diff = left.g / left.h - right.g / right.h;
        left.h * right.h / n * diff * diff
    }

    fn leaf_value(&self, stats: GradStats) -> f64 {
        stats.g / stats.h
    }
}

/// Per-row statistics for a variance tree.
pub fn variance_stats(y: &[f64]) -> Vec<GradStats> {
    y.iter().map(|&v| GradStats::new(v, 1.0)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features drawn per split; `None` means all of them.
    pub max_features: Option<usize>,
    pub min_gain: f64,
}

impl Default for GrowthParams {
    fn default() -> Self {
        Self {
            max_depth: 8,
            min_samples_leaf: 1,
            max_features: None,
            min_gain: 0.0,
        }
    }
}

impl GrowthParams {
    pub fn check(&self, d: usize) -> Result<()> {
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidParam("min_samples_leaf must be at least 1".into()));
        }
        if let Some(k) = self.max_features {
            if k == 0 || k > d {
                return Err(Error::InvalidParam(format!(
                    "max_features must lie in [1, {d}], got {k}"
                )));
            }
        }
        if !(self.min_gain >= 0.0) {
            return Err(Error::InvalidParam("min_gain must be non-negative".into()));
        }
        Ok(())
    }

    fn samples_features(&self, d: usize) -> bool {
        matches!(self.max_features, Some(k) if k < d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        value: f64,
        n_samples: usize,
        stats: GradStats,
    },
    Split {
        feature: usize,
        threshold: f64,
        gain: f64,
        n_samples: usize,
        stats: GradStats,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn leaf(value: f64) -> TreeNode {
        TreeNode::Leaf {
            value,
            n_samples: 0,
            stats: GradStats::default(),
        }
    }

    pub fn n_samples(&self) -> usize {
        match self {
            TreeNode::Leaf { n_samples, .. } | TreeNode::Split { n_samples, .. } => *n_samples,
        }
    }

    pub fn stats(&self) -> GradStats {
        match self {
            TreeNode::Leaf { stats, .. } | TreeNode::Split { stats, .. } => *stats,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }

    /// Leaf values in left-to-right order.
    pub fn leaf_values(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.visit(&mut |n| {
            if let TreeNode::Leaf { value, .. } = n {
                out.push(*value);
            }
        });
        out
    }

    /// Preorder traversal.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a TreeNode)) {
        f(self);
        if let TreeNode::Split { left, right, .. } = self {
            left.visit(f);
            right.visit(f);
        }
    }

    pub fn max_feature(&self) -> Option<usize> {
        let mut m = None;
        self.visit(&mut |n| {
            if let TreeNode::Split { feature, .. } = n {
                m = Some(m.map_or(*feature, |v: usize| v.max(*feature)));
            }
        });
        m
    }

    pub fn scale_leaves(&mut self, factor: f64) {
        match self {
            TreeNode::Leaf { value, .. } => *value *= factor,
            TreeNode::Split { left, right, .. } => {
                left.scale_leaves(factor);
                right.scale_leaves(factor);
            }
        }
    }

    /// Preorder text, one node per line, floats with 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        self.write_text(&mut s);
        s
    }

    fn write_text(&self, s: &mut String) {
        match self {
            TreeNode::Leaf {
                value,
                n_samples,
                stats,
            } => {
                let _ = writeln!(s, "L {value:.16e} {n_samples} {:.16e} {:.16e}", stats.g, stats.h);
            }
            TreeNode::Split {
                feature,
                threshold,
                gain,
                n_samples,
                stats,
                left,
                right,
            } => {
                let _ = writeln!(
                    s,
                    "S {feature} {threshold:.16e} {gain:.16e} {n_samples} {:.16e} {:.16e}",
                    stats.g, stats.h
                );
                left.write_text(s);
                right.write_text(s);
            }
        }
    }

    pub fn from_text(text: &str) -> Result<TreeNode> {
        let mut lines = text.lines();
        let node = parse_node(&mut lines)?;
        if lines.any(|l| !l.trim().is_empty()) {
            return Err(Error::Corrupt("trailing tree text".into()));
        }
        Ok(node)
    }
}

fn parse_node<'a>(lines: &mut impl Iterator<Item = &'a str>) -> Result<TreeNode> {
    let line = lines.next().ok_or_else(|| Error::Corrupt("truncated tree text".into()))?;
    let tok: Vec<&str> = line.split_ascii_whitespace().collect();
    let f = |s: &str| s.parse::<f64>().map_err(|_| Error::Corrupt(format!("bad number `{s}`")));
    let u = |s: &str| s.parse::<usize>().map_err(|_| Error::Corrupt(format!("bad count `{s}`")));
    match tok.as_slice() {
        ["L", v, n, g, h] => Ok(TreeNode::Leaf {
            value: f(v)?,
            n_samples: u(n)?,
            stats: GradStats::new(f(g)?, f(h)?),
        }),
        ["S", feat, t, gain, n, g, h] => {
            let left = Box::new(parse_node(lines)?);
            let right = Box::new(parse_node(lines)?);
            Ok(TreeNode::Split {
                feature: u(feat)?,
                threshold: f(t)?,
                gain: f(gain)?,
                n_samples: u(n)?,
                stats: GradStats::new(f(g)?, f(h)?),
                left,
                right,
            })
        }
        _ => Err(Error::Corrupt(format!("bad tree line `{line}`"))),
    }
}

/// Routes `x` to a leaf: left iff `x[feature] <= threshold`.
pub fn predict_tree(node: &TreeNode, x: &[f64]) -> Result<f64> {
    let mut cur = node;
    loop {
        match cur {
            TreeNode::Leaf { value, .. } => return Ok(*value),
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } => {
                let v = *x.get(*feature).ok_or(Error::DimensionMismatch {
                    expected: feature + 1,
                    found: x.len(),
                })?;
                cur = if v <= *threshold { left } else { right };
            }
        }
    }
}

/// Midpoint between two consecutive distinct values, kept strictly below `hi`.
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    let mut t = (lo + hi) / 2.0;
    if !t.is_finite() {
        t = lo / 2.0 + hi / 2.0;
    }
    if t >= hi || t < lo {
        lo
    } else {
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
    pub left: GradStats,
    pub right: GradStats,
}

/// Per-feature row orderings by `(value, row)`, reusable across trees grown
/// on the same matrix.
#[derive(Debug, Clone)]
pub struct ColumnOrder {
    order: Vec<Vec<u32>>,
    n_rows: usize,
}

impl ColumnOrder {
    pub fn new(x: &Matrix) -> ColumnOrder {
        let n = x.nrows();
        let order = (0..x.ncols())
            .map(|j| {
                let col = x.column(j);
                let mut idx: Vec<u32> = (0..n as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        ColumnOrder { order, n_rows: n }
    }
}

/// Best split of one node over the given features, or `None` when no
/// admissible candidate beats `params.min_gain`. `rows` may repeat indices.
pub fn best_split<C: SplitCriterion>(
    rows: &[usize],
    x: &Matrix,
    stats: &[GradStats],
    params: &GrowthParams,
    criterion: &C,
    features: &[usize],
) -> Option<SplitCandidate> {
    let positions: Vec<usize> = (0..rows.len()).collect();
    let total = sum_stats(&positions, rows, stats);
    let mut feats = features.to_vec();
    feats.sort_unstable();
    feats.dedup();
    let best = node_best_sorted(&positions, rows, x, stats, params, criterion, &feats, total);
    best.filter(|b| b.gain > params.min_gain)
}

fn sum_stats(positions: &[usize], rows: &[usize], stats: &[GradStats]) -> GradStats {
    let mut s = GradStats::default();
    for &p in positions {
        s += stats[rows[p]];
    }
    s
}

#[allow(clippy::too_many_arguments)]
fn node_best_sorted<C: SplitCriterion>(
    positions: &[usize],
    rows: &[usize],
    x: &Matrix,
    stats: &[GradStats],
    params: &GrowthParams,
    criterion: &C,
    features: &[usize],
    total: GradStats,
) -> Option<SplitCandidate> {
    let m = positions.len();
    let msl = params.min_samples_leaf;
    if m < 2 * msl {
        return None;
    }
    let mut best: Option<SplitCandidate> = None;
    let mut sorted = positions.to_vec();
    for &f in features {
        sorted.sort_by(|&a, &b| {
            x.get(rows[a], f)
                .total_cmp(&x.get(rows[b], f))
                .then(rows[a].cmp(&rows[b]))
                .then(a.cmp(&b))
        });
        let mut acc = GradStats::default();
        let mut last = f64::NAN;
        for (cnt, &p) in sorted.iter().enumerate() {
            let v = x.get(rows[p], f);
            if cnt > 0 && v > last && cnt >= msl && m - cnt >= msl {
                consider(&mut best, f, last, v, acc, total, criterion);
            }
            acc += stats[rows[p]];
            last = v;
        }
    }
    best
}

#[inline]
fn consider<C: SplitCriterion>(
    best: &mut Option<SplitCandidate>,
    feature: usize,
    lo: f64,
    hi: f64,
    left: GradStats,
    total: GradStats,
    criterion: &C,
) {
    let right = total - left;
    if !criterion.admissible(left, right) {
        return;
    }
    let gain = criterion.gain(left, right);
    if best.is_none_or(|b| gain > b.gain) {
        *best = Some(SplitCandidate {
            feature,
            threshold: midpoint(lo, hi),
            gain,
            left,
            right,
        });
    }
}

/// Grows one tree over `rows` (indices into `x`, repeats allowed).
pub fn grow<C: SplitCriterion, R: Rng>(
    x: &Matrix,
    stats: &[GradStats],
    rows: &[usize],
    params: &GrowthParams,
    criterion: &C,
    rng: &mut R,
) -> Result<TreeNode> {
    check_inputs(x, stats, rows, params)?;
    if params.samples_features(x.ncols()) || params.max_depth == 0 {
        Grower::new(x, stats, rows, params, criterion).run(rng, None)
    } else {
        let order = ColumnOrder::new(x);
        Grower::new(x, stats, rows, params, criterion).run(rng, Some(&order))
    }
}

/// As [`grow`], reusing a presorted column order of `x`.
pub fn grow_with_order<C: SplitCriterion, R: Rng>(
    x: &Matrix,
    stats: &[GradStats],
    rows: &[usize],
    params: &GrowthParams,
    criterion: &C,
    rng: &mut R,
    order: &ColumnOrder,
) -> Result<TreeNode> {
    check_inputs(x, stats, rows, params)?;
    if order.n_rows != x.nrows() || order.order.len() != x.ncols() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            found: order.n_rows,
        });
    }
    let presorted = (!params.samples_features(x.ncols())).then_some(order);
    Grower::new(x, stats, rows, params, criterion).run(rng, presorted)
}

fn check_inputs(x: &Matrix, stats: &[GradStats], rows: &[usize], params: &GrowthParams) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("tree training rows"));
    }
    if stats.len() != x.nrows() {
        return Err(Error::LengthMismatch {
            left: x.nrows(),
            right: stats.len(),
        });
    }
    if let Some(&r) = rows.iter().find(|&&r| r >= x.nrows()) {
        return Err(Error::InvalidParam(format!("row index {r} out of range")));
    }
    params.check(x.ncols())
}

const INACTIVE: usize = usize::MAX;

struct Grower<'a, C> {
    x: &'a Matrix,
    stats: &'a [GradStats],
    rows: &'a [usize],
    params: &'a GrowthParams,
    criterion: &'a C,
}

/// Arena node used while growing.
struct Proto {
    stats: GradStats,
    n: usize,
    split: Option<(SplitCandidate, usize, usize)>,
}

impl<'a, C: SplitCriterion> Grower<'a, C> {
    fn new(x: &'a Matrix, stats: &'a [GradStats], rows: &'a [usize], params: &'a GrowthParams, criterion: &'a C) -> Self {
        Self {
            x,
            stats,
            rows,
            params,
            criterion,
        }
    }

    fn run<R: Rng>(&self, rng: &mut R, presorted: Option<&ColumnOrder>) -> Result<TreeNode> {
        let m = self.rows.len();
        let d = self.x.ncols();
        // Positions grouped per feature in canonical order.
        let sorted_positions: Option<Vec<Vec<usize>>> = presorted.map(|order| {
            let mut by_row: Vec<Vec<usize>> = vec![Vec::new(); self.x.nrows()];
            for (p, &r) in self.rows.iter().enumerate() {
                by_row[r].push(p);
            }
            order
                .order
                .iter()
                .map(|col| col.iter().flat_map(|&r| by_row[r as usize].iter().copied()).collect())
                .collect()
        });

        let all_positions: Vec<usize> = (0..m).collect();
        let mut arena = vec![Proto {
            stats: sum_stats(&all_positions, self.rows, self.stats),
            n: m,
            split: None,
        }];
        // node_of[p]: arena id of the current-level node holding position p.
        let mut node_of = vec![0usize; m];
        let mut level = vec![0usize];

        for _depth in 0..self.params.max_depth {
            let splittable: Vec<usize> = level
                .iter()
                .copied()
                .filter(|&id| arena[id].n >= 2 * self.params.min_samples_leaf)
                .collect();
            if splittable.is_empty() {
                break;
            }
            let best: Vec<Option<SplitCandidate>> = match &sorted_positions {
                Some(sp) => self.level_best_presorted(sp, &node_of, &splittable, &arena),
                None => {
                    let mut members: Vec<Vec<usize>> = vec![Vec::new(); splittable.len()];
                    let slot = slot_map(&splittable, arena.len());
                    for (p, &id) in node_of.iter().enumerate() {
                        if id != INACTIVE && slot[id] != INACTIVE {
                            members[slot[id]].push(p);
                        }
                    }
                    splittable
                        .iter()
                        .zip(&members)
                        .map(|(&id, pos)| {
                            let feats = self.draw_features(rng, d);
                            node_best_sorted(
                                pos,
                                self.rows,
                                self.x,
                                self.stats,
                                self.params,
                                self.criterion,
                                &feats,
                                arena[id].stats,
                            )
                        })
                        .collect()
                }
            };

            let mut next = Vec::new();
            let mut child_of = vec![(INACTIVE, INACTIVE); arena.len()];
            for (&id, cand) in splittable.iter().zip(best) {
                let Some(c) = cand.filter(|c| c.gain > self.params.min_gain) else {
                    continue;
                };
                let l = arena.len();
                arena.push(Proto {
                    stats: GradStats::default(),
                    n: 0,
                    split: None,
                });
                arena.push(Proto {
                    stats: GradStats::default(),
                    n: 0,
                    split: None,
                });
                arena[id].split = Some((c, l, l + 1));
                child_of.resize(arena.len(), (INACTIVE, INACTIVE));
                child_of[id] = (l, l + 1);
                next.push(l);
                next.push(l + 1);
            }
            if next.is_empty() {
                break;
            }
            for (p, id) in node_of.iter_mut().enumerate() {
                if *id == INACTIVE {
                    continue;
                }
                let (l, r) = child_of[*id];
                if l == INACTIVE {
                    *id = INACTIVE;
                    continue;
                }
                let (c, _, _) = arena[*id].split.expect("split recorded");
                let child = if self.x.get(self.rows[p], c.feature) <= c.threshold { l } else { r };
                arena[child].stats += self.stats[self.rows[p]];
                arena[child].n += 1;
                *id = child;
            }
            level = next;
        }
        Ok(self.assemble(&arena, 0))
    }

    fn draw_features<R: Rng>(&self, rng: &mut R, d: usize) -> Vec<usize> {
        match self.params.max_features {
            Some(k) if k < d => {
                let mut f = rand::seq::index::sample(rng, d, k).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        }
    }

    /// One sweep per feature over the presorted positions, tracking every
    /// node of the level at once.
    fn level_best_presorted(
        &self,
        sorted_positions: &[Vec<usize>],
        node_of: &[usize],
        splittable: &[usize],
        arena: &[Proto],
    ) -> Vec<Option<SplitCandidate>> {
        let k = splittable.len();
        let slot = slot_map(splittable, arena.len());
        let slot_of: Vec<usize> = node_of
            .iter()
            .map(|&id| if id == INACTIVE { INACTIVE } else { slot[id] })
            .collect();
        let totals: Vec<GradStats> = splittable.iter().map(|&id| arena[id].stats).collect();
        let sizes: Vec<usize> = splittable.iter().map(|&id| arena[id].n).collect();
        let msl = self.params.min_samples_leaf;
        let mut best: Vec<Option<SplitCandidate>> = vec![None; k];
        let mut acc = vec![GradStats::default(); k];
        let mut cnt = vec![0usize; k];
        let mut last = vec![f64::NAN; k];
        for (f, positions) in sorted_positions.iter().enumerate() {
            acc.iter_mut().for_each(|a| *a = GradStats::default());
            cnt.iter_mut().for_each(|c| *c = 0);
            for &p in positions {
                let s = slot_of[p];
                if s == INACTIVE {
                    continue;
                }
                let v = self.x.get(self.rows[p], f);
                let c = cnt[s];
                if c > 0 && v > last[s] && c >= msl && sizes[s] - c >= msl {
                    consider(&mut best[s], f, last[s], v, acc[s], totals[s], self.criterion);
                }
                acc[s] += self.stats[self.rows[p]];
                cnt[s] = c + 1;
                last[s] = v;
            }
        }
        best
    }

    fn assemble(&self, arena: &[Proto], id: usize) -> TreeNode {
        let node = &arena[id];
        match node.split {
            None => TreeNode::Leaf {
                value: self.criterion.leaf_value(node.stats),
                n_samples: node.n,
                stats: node.stats,
            },
            Some((c, l, r)) => TreeNode::Split {
                feature: c.feature,
                threshold: c.threshold,
                gain: c.gain,
                n_samples: node.n,
                stats: node.stats,
                left: Box::new(self.assemble(arena, l)),
                right: Box::new(self.assemble(arena, r)),
            },
        }
    }
}

fn slot_map(ids: &[usize], len: usize) -> Vec<usize> {
    let mut slot = vec![INACTIVE; len];
    for (s, &id) in ids.iter().enumerate() {
        slot[id] = s;
    }
    slot
}
