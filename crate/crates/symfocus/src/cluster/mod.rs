//! Point-symmetry clustering and the symmetry validity index.
//!
//! Clustering runs in two phases. A standard Euclidean K-means pass first
//! settles the coarse geometry, then a refinement pass reassigns each point
//! by point-symmetry distance: the point joins the cluster whose center it
//! is most symmetric about, provided that distance beats the configured
//! threshold, and falls back to the nearest center otherwise. The validity
//! index `d_k / (k * epsilon_k)` rewards partitions whose members pair up
//! across their centers, and `select_k` picks the cluster count maximizing
//! it.
//!
//! Both phases are deterministic for a fixed seed: the only randomness is
//! the choice of the first seeding center, ties everywhere else resolve to
//! the smallest index.

mod kdtree;

use kdtree::KdTree3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::hash_map::DefaultHasher;
use std::collections::HashSet;
use std::hash::{Hash, Hasher};
use thiserror::Error;

/// Sentinel for a perfectly symmetric partition. The index would be
/// infinite there; `f64::MAX` keeps serialized models valid JSON.
pub const MAX_SYM: f64 = f64::MAX;

/// Aggregate symmetry distances below this floor count as exactly zero.
pub const EPSILON_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClusterError {
    /// A symmetry distance was requested against an empty candidate set.
    #[error("empty candidate set for point-symmetry distance")]
    DegenerateCluster,
    #[error("{available} points cannot fill {required} clusters")]
    TooFewPoints { available: usize, required: usize },
    /// Center separation needs at least two centers.
    #[error("center separation is undefined for a single center")]
    SingleCluster,
    #[error("invalid cluster-count range [{lo}, {hi}]; need 2 <= lo <= hi")]
    BadRange { lo: usize, hi: usize },
}

/// How per-cluster symmetry distances aggregate into `epsilon_k`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonNorm {
    /// Plain sum over all points. Favors small K on large inputs.
    #[default]
    Sum,
    /// Mean within each cluster, summed across clusters. Size-invariant.
    ClusterMean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusteringConfig {
    /// Multiplier on the two normalized pixel coordinates.
    pub spatial_weight: f64,
    /// Multiplier on normalized intensity. The default doubles it so
    /// brightness differences dominate mere adjacency.
    pub intensity_weight: f64,
    /// Upper bound a symmetry distance must beat (strictly) for a point to
    /// be assigned by symmetry instead of by Euclidean proximity.
    pub symmetry_threshold: f64,
    /// Iteration cap applied to each phase separately.
    pub max_iter: usize,
    /// Center movement below this ends the Euclidean phase.
    pub tol: f64,
    pub seed: u64,
    pub epsilon_norm: EpsilonNorm,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        ClusteringConfig {
            spatial_weight: 1.0,
            intensity_weight: 2.0,
            symmetry_threshold: 0.18,
            max_iter: 100,
            tol: 1e-6,
            seed: 0,
            epsilon_norm: EpsilonNorm::Sum,
        }
    }
}

/// One pixel embedded in normalized feature space, all coordinates in
/// [0, 1] before weighting.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeaturePoint {
    pub row_norm: f64,
    pub col_norm: f64,
    pub intensity_norm: f64,
}

impl FeaturePoint {
    /// Embeds a pixel of the normalized 256x256 grid: coordinates and
    /// intensity all divide by 255 so the cube is the unit cube.
    pub fn from_pixel(row: usize, col: usize, value: f64) -> FeaturePoint {
        FeaturePoint {
            row_norm: row as f64 / 255.0,
            col_norm: col as f64 / 255.0,
            intensity_norm: value / 255.0,
        }
    }

    pub fn weighted(&self, cfg: &ClusteringConfig) -> [f64; 3] {
        [
            cfg.spatial_weight * self.row_norm,
            cfg.spatial_weight * self.col_norm,
            cfg.intensity_weight * self.intensity_norm,
        ]
    }
}

/// Weighted feature vectors in clustering order. Clustering operates on
/// these vectors directly; the weights are baked in at construction.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureSet {
    vectors: Vec<[f64; 3]>,
}

impl FeatureSet {
    pub fn from_points(points: &[FeaturePoint], cfg: &ClusteringConfig) -> FeatureSet {
        FeatureSet { vectors: points.iter().map(|p| p.weighted(cfg)).collect() }
    }

    /// Wraps pre-weighted vectors, mainly for synthetic inputs in tests.
    pub fn from_vectors(vectors: Vec<[f64; 3]>) -> FeatureSet {
        FeatureSet { vectors }
    }

    pub fn vectors(&self) -> &[[f64; 3]] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// A fitted partition plus the quantities its validity index is built from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub centers: Vec<[f64; 3]>,
    /// Cluster id per input point, in input order.
    pub assignments: Vec<usize>,
    /// Aggregate point-symmetry distance of the partition.
    pub epsilon_k: f64,
    /// Largest pairwise Euclidean distance between centers.
    pub d_k: f64,
    pub sym_index: f64,
    /// True when `epsilon_k` fell below [`EPSILON_FLOOR`] and `sym_index`
    /// holds the [`MAX_SYM`] sentinel. Not serialized; reconstructed state
    /// defaults to false.
    #[serde(skip)]
    pub perfectly_symmetric: bool,
}

/// Symmetry ratio of `x` against candidate partner `y`, both relative to
/// center `c`: `|(x-c)+(y-c)| / (|x-c| + |y-c|)`. Zero iff `y` mirrors `x`
/// exactly across `c`; at most 1 by the triangle inequality (clamped so
/// float overshoot cannot leak past the bound). Requires `x != c`.
pub(crate) fn symmetry_ratio(x: &[f64; 3], c: &[f64; 3], y: &[f64; 3]) -> f64 {
    let dx = [x[0] - c[0], x[1] - c[1], x[2] - c[2]];
    let dy = [y[0] - c[0], y[1] - c[1], y[2] - c[2]];
    let num = norm3(dx[0] + dy[0], dx[1] + dy[1], dx[2] + dy[2]);
    let den = norm3(dx[0], dx[1], dx[2]) + norm3(dy[0], dy[1], dy[2]);
    (num / den).min(1.0)
}

/// Point-symmetry distance of `x` to center `c` over the given candidate
/// partners, by direct scan.
///
/// Candidates equal to `x` componentwise are excluded; if none remain the
/// distance is 1.0 (nothing mirrors a lone point). `x == c` is 0.0 by
/// convention. The result lies in [0, 1].
pub fn point_symmetry_distance(
    x: &[f64; 3],
    c: &[f64; 3],
    candidates: &[[f64; 3]],
) -> Result<f64, ClusterError> {
    if candidates.is_empty() {
        return Err(ClusterError::DegenerateCluster);
    }
    if x == c {
        return Ok(0.0);
    }
    let mut best = f64::INFINITY;
    for y in candidates {
        if y == x {
            continue;
        }
        let r = symmetry_ratio(x, c, y);
        if r < best {
            best = r;
        }
    }
    Ok(if best.is_finite() { best } else { 1.0 })
}

/// Same contract as [`point_symmetry_distance`], served by a kd-tree over
/// the reflected query point. Pruning is strictly conservative and every
/// surviving candidate goes through the same ratio expression, so the
/// result equals the direct scan exactly.
pub fn point_symmetry_distance_accel(
    x: &[f64; 3],
    c: &[f64; 3],
    candidates: &[[f64; 3]],
) -> Result<f64, ClusterError> {
    if candidates.is_empty() {
        return Err(ClusterError::DegenerateCluster);
    }
    if x == c {
        return Ok(0.0);
    }
    let members: Vec<u32> = (0..candidates.len() as u32).collect();
    let tree = KdTree3::build(candidates, &members);
    let best = tree.min_ratio(x, c, f64::INFINITY);
    Ok(if best.is_finite() { best } else { 1.0 })
}

/// Largest pairwise Euclidean distance between centers.
pub fn max_center_separation(centers: &[[f64; 3]]) -> Result<f64, ClusterError> {
    if centers.len() < 2 {
        return Err(ClusterError::SingleCluster);
    }
    let mut best = 0.0;
    for i in 0..centers.len() {
        for j in i + 1..centers.len() {
            let d = dist(&centers[i], &centers[j]);
            if d > best {
                best = d;
            }
        }
    }
    Ok(best)
}

/// Validity index `d_k / (k * epsilon)`, with the perfectly symmetric case
/// mapped to [`MAX_SYM`].
pub fn sym_index(d_k: f64, epsilon: f64, k: usize) -> f64 {
    if epsilon < EPSILON_FLOOR {
        MAX_SYM
    } else {
        d_k / (k as f64 * epsilon)
    }
}

/// Recomputes the aggregate symmetry distance of a fitted model from
/// scratch.
///
/// # Panics
///
/// Panics if the model's assignments do not cover `points` one-to-one or
/// name a cluster id outside `0..model.k`.
pub fn epsilon_k(model: &ClusterModel, points: &FeatureSet, norm: EpsilonNorm) -> f64 {
    assert_eq!(model.assignments.len(), points.len(), "one assignment per point");
    assert!(model.assignments.iter().all(|&a| a < model.k), "cluster ids must lie in 0..k",);
    epsilon_from(points.vectors(), &model.assignments, &model.centers, model.k, norm)
}

/// Two-phase point-symmetry K-means.
///
/// Phase one is plain Euclidean K-means from a maximin seeding (first
/// center drawn from the seeded generator, the rest farthest-point).
/// Phase two reassigns every point per iteration against a synchronous
/// snapshot of the memberships: a point moves to the cluster with the
/// smallest point-symmetry distance strictly below the threshold, or to
/// the Euclidean-nearest center when no cluster qualifies. A point keeps
/// its current cluster unless another strictly improves on it; among
/// strictly better clusters ties go to the smaller id. Clusters emptied
/// by a pass are reseeded with the point farthest from its own center.
/// Iteration stops when fewer than 0.1% of points change cluster (an
/// exactly stable assignment included), on a repeated assignment (cycle),
/// or at `max_iter`.
pub fn sym_kmeans(
    points: &FeatureSet,
    k: usize,
    cfg: &ClusteringConfig,
) -> Result<ClusterModel, ClusterError> {
    if k < 2 {
        return Err(ClusterError::BadRange { lo: k, hi: k });
    }
    let vecs = points.vectors();
    let n = vecs.len();
    if n < k {
        return Err(ClusterError::TooFewPoints { available: n, required: k });
    }
    debug_assert!(n <= u32::MAX as usize);

    let mut centers = seed_centers(vecs, k, cfg.seed);
    let mut assign = vec![0usize; n];

    // Phase one: Euclidean K-means. Each pass reassigns against freshly
    // updated centers, so on exit every point sits with its nearest center.
    assign_euclidean(vecs, &centers, &mut assign);
    repair_empty(vecs, &mut centers, &mut assign, k);
    for _ in 0..cfg.max_iter {
        let moved = update_centers(vecs, &assign, k, &mut centers);
        let changed = assign_euclidean(vecs, &centers, &mut assign);
        repair_empty(vecs, &mut centers, &mut assign, k);
        if !changed || moved <= cfg.tol {
            break;
        }
    }

    // Phase two: symmetry refinement.
    let theta = cfg.symmetry_threshold;
    let mut seen = HashSet::new();
    seen.insert(hash_assign(&assign));
    for _ in 0..cfg.max_iter {
        update_centers(vecs, &assign, k, &mut centers);
        let members = collect_members(&assign, k);
        let trees: Vec<KdTree3> = members.iter().map(|m| KdTree3::build(vecs, m)).collect();
        let mut next = vec![0usize; n];
        for (i, x) in vecs.iter().enumerate() {
            // The own cluster goes first: its distance is usually the
            // smallest on offer and tightens the bound for every other
            // query. A competitor has to beat it strictly, so exact ties
            // keep the point where it is.
            let own = assign[i];
            let mut best_k = None;
            let mut best_r = theta;
            if *x == centers[own] {
                best_r = 0.0;
                best_k = Some(own);
            } else {
                let r = trees[own].min_ratio(x, &centers[own], best_r);
                if r < best_r {
                    best_r = r;
                    best_k = Some(own);
                }
            }
            for (kk, tree) in trees.iter().enumerate() {
                if kk == own {
                    continue;
                }
                if *x == centers[kk] {
                    if best_r > 0.0 {
                        best_r = 0.0;
                        best_k = Some(kk);
                    }
                    continue;
                }
                let r = tree.min_ratio(x, &centers[kk], best_r);
                if r < best_r {
                    best_r = r;
                    best_k = Some(kk);
                }
            }
            next[i] = match best_k {
                Some(kk) => kk,
                None => nearest_center(x, &centers),
            };
        }
        repair_empty(vecs, &mut centers, &mut next, k);
        let changed = next.iter().zip(&assign).filter(|(a, b)| a != b).count();
        assign = next;
        // Below one flip per thousand points the model no longer moves
        // meaningfully; treat the assignment as stable. Exact stability
        // (changed == 0) is the only way out for small inputs.
        if changed * 1000 <= n {
            break;
        }
        if !seen.insert(hash_assign(&assign)) {
            break;
        }
    }

    update_centers(vecs, &assign, k, &mut centers);
    let epsilon = epsilon_from(vecs, &assign, &centers, k, cfg.epsilon_norm);
    let d_k = max_center_separation(&centers).expect("k >= 2 was validated");
    let sym = sym_index(d_k, epsilon, k);
    Ok(ClusterModel {
        k,
        centers,
        assignments: assign,
        epsilon_k: epsilon,
        d_k,
        sym_index: sym,
        perfectly_symmetric: sym == MAX_SYM,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymIndexEntry {
    pub k: usize,
    pub sym_index: f64,
    pub model: ClusterModel,
}

/// Validity sweep over a K range, plus the winning K.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymIndexReport {
    /// One entry per candidate K, ascending.
    pub entries: Vec<SymIndexEntry>,
    pub k_star: usize,
}

impl SymIndexReport {
    pub fn best(&self) -> &SymIndexEntry {
        self.entries.iter().find(|e| e.k == self.k_star).expect("k_star names an entry")
    }
}

/// Fits every K in `k_min..=k_max` with the same config and picks the K
/// with the largest validity index, ties toward smaller K.
pub fn select_k(
    points: &FeatureSet,
    k_min: usize,
    k_max: usize,
    cfg: &ClusteringConfig,
) -> Result<SymIndexReport, ClusterError> {
    if k_min < 2 || k_min > k_max {
        return Err(ClusterError::BadRange { lo: k_min, hi: k_max });
    }
    if points.len() < k_max {
        return Err(ClusterError::TooFewPoints { available: points.len(), required: k_max });
    }
    let mut entries = Vec::with_capacity(k_max - k_min + 1);
    for k in k_min..=k_max {
        let model = sym_kmeans(points, k, cfg)?;
        entries.push(SymIndexEntry { k, sym_index: model.sym_index, model });
    }
    let pairs: Vec<(usize, f64)> = entries.iter().map(|e| (e.k, e.sym_index)).collect();
    let k_star = pairs[argmax_first(&pairs)].0;
    Ok(SymIndexReport { entries, k_star })
}

/// Index of the largest value; the first maximum wins, so ties resolve to
/// the smallest K of an ascending sweep.
fn argmax_first(pairs: &[(usize, f64)]) -> usize {
    let mut best = 0;
    for (i, p) in pairs.iter().enumerate().skip(1) {
        if p.1 > pairs[best].1 {
            best = i;
        }
    }
    best
}

fn epsilon_from(
    vecs: &[[f64; 3]],
    assign: &[usize],
    centers: &[[f64; 3]],
    k: usize,
    norm: EpsilonNorm,
) -> f64 {
    let members = collect_members(assign, k);
    let mut total = 0.0;
    for (kk, m) in members.iter().enumerate() {
        if m.is_empty() {
            continue;
        }
        let tree = KdTree3::build(vecs, m);
        let mut sum = 0.0;
        for &i in m {
            let x = &vecs[i as usize];
            sum += if *x == centers[kk] {
                0.0
            } else {
                let r = tree.min_ratio(x, &centers[kk], f64::INFINITY);
                if r.is_finite() {
                    r
                } else {
                    1.0
                }
            };
        }
        total += match norm {
            EpsilonNorm::Sum => sum,
            EpsilonNorm::ClusterMean => sum / m.len() as f64,
        };
    }
    total
}

/// First center uniform from the seeded generator, the rest by
/// farthest-point. Ties pick the smallest index, so the seed is the only
/// source of randomness.
fn seed_centers(vecs: &[[f64; 3]], k: usize, seed: u64) -> Vec<[f64; 3]> {
    let n = vecs.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rng.random_range(0..n);
    let mut chosen = vec![vecs[first]];
    let mut d2: Vec<f64> = vecs.iter().map(|v| dist2(v, &vecs[first])).collect();
    while chosen.len() < k {
        let mut bi = 0;
        let mut bd = f64::NEG_INFINITY;
        for (i, &d) in d2.iter().enumerate() {
            if d > bd {
                bd = d;
                bi = i;
            }
        }
        chosen.push(vecs[bi]);
        for (i, d) in d2.iter_mut().enumerate() {
            let nd = dist2(&vecs[i], &vecs[bi]);
            if nd < *d {
                *d = nd;
            }
        }
    }
    chosen
}

/// Reassigns every point to its Euclidean-nearest center (ties to the
/// smallest center index). Returns whether anything changed.
fn assign_euclidean(vecs: &[[f64; 3]], centers: &[[f64; 3]], assign: &mut [usize]) -> bool {
    let mut changed = false;
    for (i, x) in vecs.iter().enumerate() {
        let a = nearest_center(x, centers);
        if assign[i] != a {
            assign[i] = a;
            changed = true;
        }
    }
    changed
}

fn nearest_center(x: &[f64; 3], centers: &[[f64; 3]]) -> usize {
    let mut best = 0;
    let mut bd = f64::INFINITY;
    for (kk, c) in centers.iter().enumerate() {
        let d = dist2(x, c);
        if d < bd {
            bd = d;
            best = kk;
        }
    }
    best
}

/// Moves each center to the mean of its members. Returns the largest
/// Euclidean movement; empty clusters keep their center.
fn update_centers(vecs: &[[f64; 3]], assign: &[usize], k: usize, centers: &mut [[f64; 3]]) -> f64 {
    let mut sums = vec![[0.0f64; 3]; k];
    let mut counts = vec![0usize; k];
    for (i, &a) in assign.iter().enumerate() {
        sums[a][0] += vecs[i][0];
        sums[a][1] += vecs[i][1];
        sums[a][2] += vecs[i][2];
        counts[a] += 1;
    }
    let mut moved = 0.0f64;
    for kk in 0..k {
        if counts[kk] == 0 {
            continue;
        }
        let c = counts[kk] as f64;
        let next = [sums[kk][0] / c, sums[kk][1] / c, sums[kk][2] / c];
        let m = dist(&centers[kk], &next);
        if m > moved {
            moved = m;
        }
        centers[kk] = next;
    }
    moved
}

/// Reseeds each empty cluster with the point farthest from its own center,
/// drawn only from clusters that can spare a member. The donated point
/// becomes the empty cluster's center so a later mean update cannot
/// re-empty it.
fn repair_empty(vecs: &[[f64; 3]], centers: &mut [[f64; 3]], assign: &mut [usize], k: usize) {
    let mut counts = vec![0usize; k];
    for &a in assign.iter() {
        counts[a] += 1;
    }
    for e in 0..k {
        if counts[e] != 0 {
            continue;
        }
        let mut best: Option<(f64, usize)> = None;
        for (i, &a) in assign.iter().enumerate() {
            if counts[a] < 2 {
                continue;
            }
            let d = dist2(&vecs[i], &centers[a]);
            if best.is_none_or(|(bd, _)| d > bd) {
                best = Some((d, i));
            }
        }
        if let Some((_, i)) = best {
            counts[assign[i]] -= 1;
            assign[i] = e;
            counts[e] = 1;
            centers[e] = vecs[i];
        }
    }
}

fn collect_members(assign: &[usize], k: usize) -> Vec<Vec<u32>> {
    let mut members: Vec<Vec<u32>> = vec![Vec::new(); k];
    for (i, &a) in assign.iter().enumerate() {
        members[a].push(i as u32);
    }
    members
}

fn hash_assign(assign: &[usize]) -> u64 {
    let mut h = DefaultHasher::new();
    assign.hash(&mut h);
    h.finish()
}

#[inline]
fn norm3(a: f64, b: f64, c: f64) -> f64 {
    (a * a + b * b + c * c).sqrt()
}

#[inline]
fn dist(p: &[f64; 3], q: &[f64; 3]) -> f64 {
    norm3(p[0] - q[0], p[1] - q[1], p[2] - q[2])
}

#[inline]
fn dist2(p: &[f64; 3], q: &[f64; 3]) -> f64 {
    let dx = p[0] - q[0];
    let dy = p[1] - q[1];
    let dz = p[2] - q[2];
    dx * dx + dy * dy + dz * dz
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels_agree(assign: &[usize], group: &[usize]) -> bool {
        group.iter().all(|&i| assign[i] == assign[group[0]])
    }

    #[test]
    fn exact_mirror_partner_gives_zero() {
        let cands = [[-1.0, 0.0, 0.0], [0.3, 0.7, 0.2]];
        let d = point_symmetry_distance(&[1.0, 0.0, 0.0], &[0.0; 3], &cands).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn distance_matches_hand_computation() {
        // x=(2,0,0), c=(1,0,0), sole candidate y=(1.8,0.4,0):
        // num = |(1,0,0)+(0.8,0.4,0)| = sqrt(3.4), den = 1 + sqrt(0.8).
        let d = point_symmetry_distance(&[2.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &[[1.8, 0.4, 0.0]])
            .unwrap();
        let expected = 3.4f64.sqrt() / (1.0 + 0.8f64.sqrt());
        assert!((d - expected).abs() < 1e-15);
        assert!(d > 0.4);
    }

    #[test]
    fn removing_the_partner_raises_the_distance() {
        let x = [2.0, 0.0, 0.0];
        let c = [1.0, 0.0, 0.0];
        let with = point_symmetry_distance(&x, &c, &[[0.0; 3], [1.8, 0.4, 0.0]]).unwrap();
        let without = point_symmetry_distance(&x, &c, &[[1.8, 0.4, 0.0]]).unwrap();
        assert_eq!(with, 0.0);
        assert!(without > 0.4);
    }

    #[test]
    fn lone_point_is_maximally_asymmetric() {
        let x = [1.0, 2.0, 3.0];
        let d = point_symmetry_distance(&x, &[0.0; 3], &[x]).unwrap();
        assert_eq!(d, 1.0);
    }

    #[test]
    fn point_at_center_has_zero_distance() {
        let c = [0.5, 0.5, 0.5];
        let d = point_symmetry_distance(&c, &c, &[[1.0, 0.0, 0.0]]).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn empty_candidate_set_is_degenerate() {
        let err = point_symmetry_distance(&[1.0, 0.0, 0.0], &[0.0; 3], &[]).unwrap_err();
        assert_eq!(err, ClusterError::DegenerateCluster);
        let err = point_symmetry_distance_accel(&[1.0, 0.0, 0.0], &[0.0; 3], &[]).unwrap_err();
        assert_eq!(err, ClusterError::DegenerateCluster);
    }

    #[test]
    fn distance_never_exceeds_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let x = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
            let c = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
            let y = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
            let d = point_symmetry_distance(&x, &c, &[y]).unwrap();
            assert!((0.0..=1.0).contains(&d));
        }
    }

    #[test]
    fn accelerated_distance_equals_direct_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..50 {
            let n = 3 + (trial % 40);
            let cands: Vec<[f64; 3]> = (0..n)
                .map(|_| {
                    [
                        rng.random_range(-2.0..2.0),
                        rng.random_range(-2.0..2.0),
                        rng.random_range(-2.0..2.0),
                    ]
                })
                .collect();
            let x = cands[trial % n];
            let c = [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ];
            let naive = point_symmetry_distance(&x, &c, &cands).unwrap();
            let accel = point_symmetry_distance_accel(&x, &c, &cands).unwrap();
            assert_eq!(naive.to_bits(), accel.to_bits(), "trial {trial}");
        }
    }

    #[test]
    fn separation_requires_two_centers() {
        assert_eq!(max_center_separation(&[[0.0; 3]]).unwrap_err(), ClusterError::SingleCluster,);
        let d = max_center_separation(&[[0.0; 3], [3.0, 4.0, 0.0], [1.0, 1.0, 0.0]]).unwrap();
        assert_eq!(d, 5.0);
    }

    #[test]
    fn sym_index_floors_to_sentinel() {
        assert_eq!(sym_index(2.0, 0.0, 3), MAX_SYM);
        assert_eq!(sym_index(2.0, 1e-13, 3), MAX_SYM);
        assert_eq!(sym_index(2.0, 0.5, 4), 1.0);
    }

    #[test]
    fn rejects_single_cluster_fit() {
        let points = FeatureSet::from_vectors(vec![[0.0; 3]; 8]);
        let err = sym_kmeans(&points, 1, &ClusteringConfig::default()).unwrap_err();
        assert_eq!(err, ClusterError::BadRange { lo: 1, hi: 1 });
    }

    #[test]
    fn rejects_more_clusters_than_points() {
        let points = FeatureSet::from_vectors(vec![[0.0; 3]; 3]);
        let err = sym_kmeans(&points, 4, &ClusteringConfig::default()).unwrap_err();
        assert_eq!(err, ClusterError::TooFewPoints { available: 3, required: 4 });
    }

    fn mirrored_blob(
        center: [f64; 3],
        pairs: usize,
        spread: f64,
        rng: &mut ChaCha8Rng,
    ) -> Vec<[f64; 3]> {
        let mut out = Vec::with_capacity(pairs * 2);
        for _ in 0..pairs {
            let v = [
                rng.random_range(-spread..spread),
                rng.random_range(-spread..spread),
                rng.random_range(-spread..spread),
            ];
            out.push([center[0] + v[0], center[1] + v[1], center[2] + v[2]]);
            out.push([center[0] - v[0], center[1] - v[1], center[2] - v[2]]);
        }
        out
    }

    #[test]
    fn recovers_two_mirrored_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut vecs = mirrored_blob([0.0, 0.0, 0.0], 12, 0.5, &mut rng);
        vecs.extend(mirrored_blob([8.0, 0.0, 0.0], 12, 0.5, &mut rng));
        let points = FeatureSet::from_vectors(vecs);
        let model = sym_kmeans(&points, 2, &ClusteringConfig::default()).unwrap();
        let left: Vec<usize> = (0..24).collect();
        let right: Vec<usize> = (24..48).collect();
        assert!(labels_agree(&model.assignments, &left));
        assert!(labels_agree(&model.assignments, &right));
        assert_ne!(model.assignments[0], model.assignments[24]);
        assert!(model.perfectly_symmetric);
        assert_eq!(model.sym_index, MAX_SYM);
    }

    #[test]
    fn symmetry_pass_overrides_euclidean_proximity() {
        // A cross mirror-balanced about the origin plus a tight symmetric
        // blob to its right. The cross's right arm tip is Euclidean-nearest
        // to the blob, so plain K-means leaves it there, and the vertical
        // arms keep the cross's center close to the origin regardless. The
        // symmetry pass then sees the tip's mirror partner across that
        // center and pulls the tip back.
        let cross = [
            [0.0, 3.0, 0.0],
            [0.0, -3.0, 0.0],
            [0.0, 1.5, 0.0],
            [0.0, -1.5, 0.0],
            [-2.8, 0.0, 0.0],
            [2.8, 0.0, 0.0],
        ];
        let blob_center = [4.5, 0.0, 0.0];
        let offsets = [[0.10, 0.05, 0.0], [0.05, -0.08, 0.0], [0.12, 0.02, 0.0]];
        let mut vecs: Vec<[f64; 3]> = cross.to_vec();
        for o in offsets {
            vecs.push([blob_center[0] + o[0], blob_center[1] + o[1], blob_center[2] + o[2]]);
            vecs.push([blob_center[0] - o[0], blob_center[1] - o[1], blob_center[2] - o[2]]);
        }
        let points = FeatureSet::from_vectors(vecs.clone());
        let cfg = ClusteringConfig { symmetry_threshold: 0.30, ..ClusteringConfig::default() };
        let model = sym_kmeans(&points, 2, &cfg).unwrap();

        let contested = 5;
        let cross_label = model.assignments[0];
        let blob_label = model.assignments[6];
        assert_ne!(cross_label, blob_label);
        let d_blob = dist(&vecs[contested], &model.centers[blob_label]);
        let d_cross = dist(&vecs[contested], &model.centers[cross_label]);
        assert!(d_blob < d_cross, "tip must sit Euclidean-nearer to the blob");
        assert_eq!(model.assignments[contested], cross_label);
        assert!(labels_agree(&model.assignments, &[0, 1, 2, 3, 4, 5]));
        assert!(labels_agree(&model.assignments, &[6, 7, 8, 9, 10, 11]));
    }

    #[test]
    fn zero_threshold_reduces_to_euclidean_kmeans() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let vecs: Vec<[f64; 3]> = (0..60)
            .map(|_| {
                [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]
            })
            .collect();
        let points = FeatureSet::from_vectors(vecs.clone());
        let cfg = ClusteringConfig { symmetry_threshold: 0.0, ..ClusteringConfig::default() };
        let model = sym_kmeans(&points, 3, &cfg).unwrap();
        for (i, v) in vecs.iter().enumerate() {
            assert_eq!(model.assignments[i], nearest_center(v, &model.centers), "point {i}");
        }
    }

    #[test]
    fn fit_is_deterministic_for_a_fixed_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let vecs: Vec<[f64; 3]> = (0..80)
            .map(|_| {
                [rng.random_range(0.0..4.0), rng.random_range(0.0..4.0), rng.random_range(0.0..4.0)]
            })
            .collect();
        let points = FeatureSet::from_vectors(vecs);
        let cfg = ClusteringConfig { seed: 42, ..ClusteringConfig::default() };
        let a = sym_kmeans(&points, 4, &cfg).unwrap();
        let b = sym_kmeans(&points, 4, &cfg).unwrap();
        assert_eq!(a, b);
        let c = sym_kmeans(&points, 4, &ClusteringConfig { seed: 43, ..cfg }).unwrap();
        assert_eq!(c.assignments.len(), 80);
    }

    #[test]
    fn empty_cluster_reseeds_with_farthest_point() {
        let vecs = vec![[0.0, 0.0, 0.0], [0.1, 0.0, 0.0], [9.0, 0.0, 0.0], [0.2, 0.0, 0.0]];
        let mut centers = vec![[0.0, 0.0, 0.0], [50.0, 0.0, 0.0]];
        let mut assign = vec![0, 0, 0, 0];
        repair_empty(&vecs, &mut centers, &mut assign, 2);
        assert_eq!(assign, vec![0, 0, 1, 0]);
        assert_eq!(centers[1], [9.0, 0.0, 0.0]);
    }

    #[test]
    fn epsilon_recomputation_matches_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let mut vecs = mirrored_blob([0.0, 0.0, 0.0], 8, 0.6, &mut rng);
        vecs.extend(mirrored_blob([6.0, 1.0, 0.0], 8, 0.6, &mut rng));
        // Perturb one point so the partition is not perfectly symmetric.
        vecs[0][1] += 0.05;
        let points = FeatureSet::from_vectors(vecs);
        let cfg = ClusteringConfig::default();
        let model = sym_kmeans(&points, 2, &cfg).unwrap();
        let eps = epsilon_k(&model, &points, EpsilonNorm::Sum);
        assert_eq!(eps.to_bits(), model.epsilon_k.to_bits());
        let per_mean = epsilon_k(&model, &points, EpsilonNorm::ClusterMean);
        assert!(per_mean <= eps);
    }

    #[test]
    fn selects_the_mirrored_blob_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut vecs = Vec::new();
        vecs.extend(mirrored_blob([0.0, 0.0, 0.0], 15, 0.5, &mut rng));
        vecs.extend(mirrored_blob([10.0, 0.0, 0.0], 15, 0.5, &mut rng));
        vecs.extend(mirrored_blob([5.0, 9.0, 0.0], 15, 0.5, &mut rng));
        let points = FeatureSet::from_vectors(vecs);
        let report = select_k(&points, 2, 5, &ClusteringConfig::default()).unwrap();
        assert_eq!(report.entries.len(), 4);
        assert_eq!(report.k_star, 3);
        assert_eq!(report.best().k, 3);
        assert!(report.best().model.perfectly_symmetric);
    }

    #[test]
    fn selection_ties_resolve_to_smaller_k() {
        let pairs = [(2, 5.0), (3, 5.0), (4, 1.0)];
        assert_eq!(pairs[argmax_first(&pairs)].0, 2);
        let pairs = [(2, 1.0), (3, 5.0), (4, 5.0)];
        assert_eq!(pairs[argmax_first(&pairs)].0, 3);
    }

    #[test]
    fn selection_validates_its_range() {
        let points = FeatureSet::from_vectors(vec![[0.0; 3]; 10]);
        let cfg = ClusteringConfig::default();
        assert_eq!(
            select_k(&points, 1, 3, &cfg).unwrap_err(),
            ClusterError::BadRange { lo: 1, hi: 3 },
        );
        assert_eq!(
            select_k(&points, 4, 3, &cfg).unwrap_err(),
            ClusterError::BadRange { lo: 4, hi: 3 },
        );
        assert_eq!(
            select_k(&points, 2, 11, &cfg).unwrap_err(),
            ClusterError::TooFewPoints { available: 10, required: 11 },
        );
    }

    #[test]
    fn model_serialization_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let vecs = mirrored_blob([1.0, 2.0, 0.5], 6, 0.4, &mut rng);
        let points = FeatureSet::from_vectors(vecs);
        let cfg = ClusteringConfig::default();
        let model = sym_kmeans(&points, 2, &cfg).unwrap();
        let json = serde_json::to_string(&model).unwrap();
        assert!(!json.contains("perfectly_symmetric"));
        let back: ClusterModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back.k, model.k);
        assert_eq!(back.assignments, model.assignments);
        assert_eq!(back.epsilon_k.to_bits(), model.epsilon_k.to_bits());
        assert_eq!(back.sym_index.to_bits(), model.sym_index.to_bits());
    }

    #[test]
    fn config_defaults_fill_missing_fields() {
        let cfg: ClusteringConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, ClusteringConfig::default());
        let cfg: ClusteringConfig =
            serde_json::from_str(r#"{"symmetry_threshold":0.25,"seed":9}"#).unwrap();
        assert_eq!(cfg.symmetry_threshold, 0.25);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.intensity_weight, 2.0);
        assert_eq!(cfg.epsilon_norm, EpsilonNorm::Sum);
    }

    #[test]
    fn feature_embedding_is_weighted_unit_cube() {
        let p = FeaturePoint::from_pixel(255, 0, 127.5);
        assert_eq!(p.row_norm, 1.0);
        assert_eq!(p.col_norm, 0.0);
        assert_eq!(p.intensity_norm, 0.5);
        let cfg = ClusteringConfig::default();
        assert_eq!(p.weighted(&cfg), [1.0, 0.0, 1.0]);
        let set = FeatureSet::from_points(&[p], &cfg);
        assert_eq!(set.vectors(), &[[1.0, 0.0, 1.0]]);
    }
}
