//! Small 3-D kd-tree used to accelerate the point-symmetry distance.
//!
//! The minimized ratio is `|refl - y| / (|x-c| + |y-c|)` with
//! `refl = 2c - x`. For any candidate, `|y-c| <= |y-refl| + |refl-c|` and
//! `|refl-c| = |x-c| = a`, so `ratio >= num / (num + 2a)`, which grows with
//! `num = |y-refl|`. A candidate with `num >= 2*a*best/(1-best)` therefore
//! cannot beat `best`, which turns the ratio search into a bounded
//! nearest-neighbor query around the reflected point. The pruning radius
//! carries a relative slack so that kd pruning (plane distances to `refl`)
//! can never drop a candidate that the shared ratio evaluation would have
//! kept; every surviving candidate is scored with exactly the same
//! expression the naive loop uses.

use super::symmetry_ratio;

/// Extra pruning margin covering the few-ulp difference between
/// `|y - refl|` and the numerator as the ratio expression computes it.
const PRUNE_SLACK: f64 = 1.0 + 1e-9;

pub(crate) struct KdTree3<'a> {
    points: &'a [[f64; 3]],
    /// Permutation of member indices; the middle of each segment is the
    /// node, split on axis `depth % 3`.
    idx: Vec<u32>,
}

impl<'a> KdTree3<'a> {
    pub fn build(points: &'a [[f64; 3]], members: &[u32]) -> Self {
        let mut idx = members.to_vec();
        let n = idx.len();
        let mut tree = KdTree3 { points, idx: Vec::new() };
        std::mem::swap(&mut tree.idx, &mut idx);
        tree.split(0, n, 0);
        tree
    }

    fn split(&mut self, lo: usize, hi: usize, axis: usize) {
        if hi - lo < 2 {
            return;
        }
        let mid = (lo + hi) / 2;
        let points = self.points;
        self.idx[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
            let ka = (points[a as usize][axis], a);
            let kb = (points[b as usize][axis], b);
            ka.partial_cmp(&kb).expect("finite coordinates")
        });
        let next = (axis + 1) % 3;
        self.split(lo, mid, next);
        self.split(mid + 1, hi, next);
    }

    /// Exact minimum symmetry ratio over the member set, excluding
    /// candidates equal to `x` componentwise. Returns the minimum if it is
    /// strictly below `bound`, otherwise returns `bound` unchanged; a set
    /// with no eligible candidate never improves on `bound`.
    pub fn min_ratio(&self, x: &[f64; 3], c: &[f64; 3], bound: f64) -> f64 {
        if self.idx.is_empty() {
            return bound;
        }
        let refl = [2.0 * c[0] - x[0], 2.0 * c[1] - x[1], 2.0 * c[2] - x[2]];
        let a = dist(x, c);
        let mut best = bound;
        self.search(0, self.idx.len(), 0, x, c, &refl, a, &mut best);
        best
    }

    #[allow(clippy::too_many_arguments)]
    fn search(
        &self,
        lo: usize,
        hi: usize,
        axis: usize,
        x: &[f64; 3],
        c: &[f64; 3],
        refl: &[f64; 3],
        a: f64,
        best: &mut f64,
    ) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let y = &self.points[self.idx[mid] as usize];
        if y != x {
            let r = symmetry_ratio(x, c, y);
            if r < *best {
                *best = r;
            }
        }
        if hi - lo == 1 {
            return;
        }
        let gap = refl[axis] - y[axis];
        let next = (axis + 1) % 3;
        let (near, far) =
            if gap < 0.0 { ((lo, mid), (mid + 1, hi)) } else { ((mid + 1, hi), (lo, mid)) };
        self.search(near.0, near.1, next, x, c, refl, a, best);
        if gap.abs() < prune_radius(*best, a) {
            self.search(far.0, far.1, next, x, c, refl, a, best);
        }
    }
}

/// Largest numerator a candidate may have and still beat `best`.
fn prune_radius(best: f64, a: f64) -> f64 {
    if best >= 1.0 {
        f64::INFINITY
    } else {
        2.0 * a * best / (1.0 - best) * PRUNE_SLACK
    }
}

#[inline]
fn dist(p: &[f64; 3], q: &[f64; 3]) -> f64 {
    let dx = p[0] - q[0];
    let dy = p[1] - q[1];
    let dz = p[2] - q[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}
