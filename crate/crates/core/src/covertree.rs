//! Cover trees on finite samples.
//!
//! A cover tree is a sequence of landmark sets `T_i` indexed by integer
//! scales `i`, satisfying
//!
//! * nesting: `T_i ⊆ T_{i+1}`,
//! * covering: every `x ∈ T_{i+1}` has a recorded parent `y ∈ T_i` with
//!   `|x - y| <= 2^-i`,
//! * separation: distinct `x, y ∈ T_i` satisfy `|x - y| > 2^-i`.
//!
//! The construction here is a greedy batch insertion: `T_{i+1}` starts from
//! `T_i` and admits every remaining sample (in input order) that is more than
//! `2^-(i+1)` away from all current members. Each `T_i` is then a maximal
//! `2^-i` packing of the sample, which gives the covering property for free.
//!
//! Landmarks are numbered by insertion order. Since levels nest and new
//! members are appended, `T_i` is always a prefix `0..K_i` of that order.

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::linalg::dist;

/// Radius `2^-scale`.
pub fn scale_radius(scale: i32) -> f64 {
    2f64.powi(-scale)
}

/// Parent links between consecutive levels: `parents[t][k]` is the index at
/// level `t` of the parent of node `k` at level `t + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelLinks {
    widths: Vec<usize>,
    children: Vec<Vec<Vec<u32>>>,
}

impl LevelLinks {
    pub fn new(widths: Vec<usize>, parents: &[Vec<u32>]) -> Result<Self> {
        if widths.is_empty() || parents.len() + 1 != widths.len() {
            return Err(Error::Domain("parent maps must link consecutive levels".into()));
        }
        let mut children = Vec::with_capacity(parents.len());
        for (t, p) in parents.iter().enumerate() {
            if p.len() != widths[t + 1] {
                return Err(Error::Dimension {
                    expected: widths[t + 1],
                    found: p.len(),
                });
            }
            let mut ch = vec![Vec::new(); widths[t]];
            for (k, &parent) in p.iter().enumerate() {
                let parent = parent as usize;
                if parent >= widths[t] {
                    return Err(Error::Index {
                        index: parent,
                        len: widths[t],
                    });
                }
                ch[parent].push(k as u32);
            }
            children.push(ch);
        }
        Ok(Self { widths, children })
    }

    pub fn levels(&self) -> usize {
        self.widths.len()
    }

    pub fn width(&self, level: usize) -> usize {
        self.widths[level]
    }

    pub fn children(&self, level: usize, node: usize) -> &[u32] {
        &self.children[level][node]
    }

    /// Beam search from level `first` down to level `last` (inclusive).
    ///
    /// Every node of `first` is scored; at each following level only the
    /// children of the `k_beam` best nodes are scored. Returns the best node
    /// at `last` and its score. Ties go to the lowest index, so with
    /// `k_beam >= max width` the result is the exhaustive argmin at `last`.
    pub fn beam_descend<F>(&self, first: usize, last: usize, k_beam: usize, mut score: F) -> (usize, f64)
    where
        F: FnMut(usize, usize) -> f64,
    {
        assert!(first <= last && last < self.levels(), "invalid level range");
        let k_beam = k_beam.max(1);
        let mut scored: Vec<(f64, usize)> = (0..self.widths[first])
            .map(|k| (score(first, k), k))
            .collect();
        for level in first..last {
            sort_scored(&mut scored);
            scored.truncate(k_beam);
            let mut next: Vec<usize> = scored
                .iter()
                .flat_map(|&(_, k)| self.children(level, k).iter().map(|&c| c as usize))
                .collect();
            next.sort_unstable();
            scored = next.into_iter().map(|k| (score(level + 1, k), k)).collect();
        }
        sort_scored(&mut scored);
        let (s, k) = scored[0];
        (k, s)
    }
}

fn sort_scored(v: &mut [(f64, usize)]) {
    v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
}

/// Beam width meaning "keep everything".
pub const UNLIMITED_BEAM: usize = usize::MAX;

/// Default beam width for tree-accelerated center search.
pub const DEFAULT_BEAM: usize = 10;

#[derive(Debug, Clone)]
pub struct CoverTree {
    root_scale: i32,
    /// Landmark ordinal -> index in the source cloud.
    order: Vec<usize>,
    /// `K_i` for `i = root_scale..=max_scale`.
    counts: Vec<usize>,
    /// `parents[t]`: parent ordinal (at level `root + t`) of each landmark at
    /// level `root + t + 1`.
    parents: Vec<Vec<u32>>,
    links: LevelLinks,
}

impl CoverTree {
    /// Builds the tree over the distinct points of `points`; exact
    /// duplicates are skipped (keeping the first occurrence).
    pub fn build(points: &PointCloud) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput("cover tree needs at least one point"));
        }
        let candidates = points.distinct_indices();
        let n = candidates.len();
        let p0 = points.point(candidates[0]);

        let mut near_dist: Vec<f64> = candidates.iter().map(|&c| dist(p0, points.point(c))).collect();
        let mut near_ord = vec![0u32; n];
        let max_d = near_dist.iter().cloned().fold(0.0, f64::max);

        // largest scale whose radius still covers everything from the root
        let mut root_scale = if max_d > 0.0 {
            (-max_d.log2()).floor() as i32
        } else {
            0
        };
        while scale_radius(root_scale) < max_d {
            root_scale -= 1;
        }
        while max_d > 0.0 && scale_radius(root_scale + 1) >= max_d {
            root_scale += 1;
        }

        let mut in_tree = vec![false; n];
        in_tree[0] = true;
        let mut order = vec![candidates[0]];
        let mut counts = vec![1usize];
        let mut parents: Vec<Vec<u32>> = Vec::new();
        let mut scale = root_scale;

        while order.len() < n {
            scale += 1;
            let r = scale_radius(scale);
            let prev = order.len();
            let mut level_parents: Vec<u32> = (0..prev as u32).collect();
            let mut added: Vec<usize> = Vec::new();
            for q in 0..n {
                if in_tree[q] || near_dist[q] <= r {
                    continue;
                }
                let qp = points.point(candidates[q]);
                if added.iter().any(|&a| dist(qp, points.point(candidates[a])) <= r) {
                    continue;
                }
                in_tree[q] = true;
                added.push(q);
                order.push(candidates[q]);
                level_parents.push(near_ord[q]);
            }
            for q in 0..n {
                if in_tree[q] {
                    continue;
                }
                let qp = points.point(candidates[q]);
                for (offset, &a) in added.iter().enumerate() {
                    let d = dist(qp, points.point(candidates[a]));
                    if d < near_dist[q] {
                        near_dist[q] = d;
                        near_ord[q] = (prev + offset) as u32;
                    }
                }
            }
            counts.push(order.len());
            parents.push(level_parents);
        }

        let links = LevelLinks::new(counts.clone(), &parents)?;
        let tree = Self {
            root_scale,
            order,
            counts,
            parents,
            links,
        };
        #[cfg(debug_assertions)]
        if n <= 2000 {
            let report = tree.audit(points);
            debug_assert!(report.is_clean(), "cover tree axioms violated: {report:?}");
        }
        Ok(tree)
    }

    pub fn root_scale(&self) -> i32 {
        self.root_scale
    }

    /// Finest scale: `T_i` is the full (deduplicated) sample for `i >= max_scale`.
    pub fn max_scale(&self) -> i32 {
        self.root_scale + self.counts.len() as i32 - 1
    }

    pub fn clamp_scale(&self, scale: i32) -> i32 {
        scale.clamp(self.root_scale, self.max_scale())
    }

    fn level_index(&self, scale: i32) -> usize {
        (self.clamp_scale(scale) - self.root_scale) as usize
    }

    /// `K_i = |T_i|` (scales are clamped into the represented range).
    pub fn level_size(&self, scale: i32) -> usize {
        self.counts[self.level_index(scale)]
    }

    /// Source indices of `T_scale`, in landmark order.
    pub fn level_landmarks(&self, scale: i32) -> &[usize] {
        &self.order[..self.level_size(scale)]
    }

    /// Parent ordinal (in `T_{scale-1}`) of landmark ordinal `k` of `T_scale`,
    /// or `None` at the root level.
    pub fn parent(&self, scale: i32, k: usize) -> Option<usize> {
        let t = self.level_index(scale);
        if t == 0 {
            None
        } else {
            Some(self.parents[t - 1][k] as usize)
        }
    }

    pub fn links(&self) -> &LevelLinks {
        &self.links
    }

    /// Source index of landmark ordinal `k`.
    pub fn landmark(&self, k: usize) -> usize {
        self.order[k]
    }

    /// Beam search over the whole tree, from the root down to `target`
    /// (clamped). `score` receives source point indices. Returns the source
    /// index of the best landmark reached and its score.
    pub fn beam_descend<F>(&self, target: i32, k_beam: usize, mut score: F) -> (usize, f64)
    where
        F: FnMut(usize) -> f64,
    {
        let last = self.level_index(target);
        let (k, s) = self.links.beam_descend(0, last, k_beam, |_, k| score(self.order[k]));
        (self.order[k], s)
    }

    /// Exhaustive check of the three axioms over every represented level.
    pub fn audit(&self, points: &PointCloud) -> CoverTreeAudit {
        let mut report = CoverTreeAudit::default();
        for t in 0..self.counts.len() {
            let scale = self.root_scale + t as i32;
            let r = scale_radius(scale);
            let level = &self.order[..self.counts[t]];
            if t > 0 {
                let prev: std::collections::HashSet<usize> =
                    self.order[..self.counts[t - 1]].iter().copied().collect();
                let here: std::collections::HashSet<usize> = level.iter().copied().collect();
                report.nesting_violations += prev.difference(&here).count();
                let parent_radius = scale_radius(scale - 1);
                for (k, &p) in self.parents[t - 1].iter().enumerate() {
                    let p = p as usize;
                    if p >= self.counts[t - 1]
                        || dist(points.point(level[k]), points.point(self.order[p])) > parent_radius
                    {
                        report.covering_violations += 1;
                    }
                }
            }
            for a in 0..level.len() {
                for b in a + 1..level.len() {
                    if dist(points.point(level[a]), points.point(level[b])) <= r {
                        report.separation_violations += 1;
                    }
                }
            }
            report.levels_checked += 1;
        }
        report
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CoverTreeAudit {
    pub levels_checked: usize,
    pub nesting_violations: usize,
    pub covering_violations: usize,
    pub separation_violations: usize,
}

impl CoverTreeAudit {
    pub fn is_clean(&self) -> bool {
        self.nesting_violations == 0 && self.covering_violations == 0 && self.separation_violations == 0
    }
}
