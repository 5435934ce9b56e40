//! Binned-SAH BVH builder shared by both acceleration levels.

use super::Aabb;

pub const SAH_BINS: usize = 16;
pub const MAX_LEAF_SIZE: usize = 4;
const TRAVERSAL_COST: f64 = 1.0;
const INTERSECT_COST: f64 = 1.0;

/// Node as produced by the builder: explicit child links, children stored
/// in pairs after their parent's subtree has been scheduled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildNode {
    pub bounds: Aabb,
    pub left: u32,
    pub right: u32,
    pub first: u32,
    /// 0 for interior nodes.
    pub count: u32,
}

/// Depth-first node: the left child is the next node; `offset` holds the
/// right child for interior nodes and the first primitive for leaves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BvhNode {
    pub bounds: Aabb,
    pub offset: u32,
    /// 0 for interior nodes.
    pub count: u32,
}

/// Read access shared by the two node layouts.
pub(crate) trait NodeLayout {
    fn bounds(&self, i: usize) -> &Aabb;
    /// `Ok((first, count))` for leaves, `Err((left, right))` for interior nodes.
    fn kind(&self, i: usize) -> Result<(usize, usize), (usize, usize)>;
    fn len(&self) -> usize;
}

impl NodeLayout for Vec<BuildNode> {
    fn bounds(&self, i: usize) -> &Aabb {
        &self[i].bounds
    }
    fn kind(&self, i: usize) -> Result<(usize, usize), (usize, usize)> {
        let n = &self[i];
        if n.count > 0 {
            Ok((n.first as usize, n.count as usize))
        } else {
            Err((n.left as usize, n.right as usize))
        }
    }
    fn len(&self) -> usize {
        Vec::len(self)
    }
}

impl NodeLayout for Vec<BvhNode> {
    fn bounds(&self, i: usize) -> &Aabb {
        &self[i].bounds
    }
    fn kind(&self, i: usize) -> Result<(usize, usize), (usize, usize)> {
        let n = &self[i];
        if n.count > 0 {
            Ok((n.offset as usize, n.count as usize))
        } else {
            Err((i + 1, n.offset as usize))
        }
    }
    fn len(&self) -> usize {
        Vec::len(self)
    }
}

/// Result of a build: nodes plus the primitive permutation referenced by leaves.
pub(crate) struct Built {
    pub nodes: Vec<BuildNode>,
    pub order: Vec<u32>,
}

#[derive(Clone, Copy)]
struct Bin {
    bounds: Aabb,
    count: usize,
}

/// Builds over per-primitive bounds and centroids.
pub(crate) fn build(bounds: &[Aabb], centroids: &[crate::math::Vec3]) -> Built {
    let mut order: Vec<u32> = (0..bounds.len() as u32).collect();
    let mut nodes = Vec::with_capacity(bounds.len().max(1) * 2);
    if bounds.is_empty() {
        return Built { nodes, order };
    }
    let root_bounds = bounds.iter().fold(Aabb::EMPTY, |b, x| b.union(*x));
    nodes.push(BuildNode { bounds: root_bounds, left: 0, right: 0, first: 0, count: bounds.len() as u32 });
    let mut stack = vec![0usize];
    while let Some(ni) = stack.pop() {
        let (first, count) = (nodes[ni].first as usize, nodes[ni].count as usize);
        let Some(mid) = choose_split(&mut order[first..first + count], bounds, centroids, &nodes[ni].bounds) else {
            continue;
        };
        let (l_first, l_count) = (first, mid);
        let (r_first, r_count) = (first + mid, count - mid);
        let span_bounds = |s: usize, c: usize| order[s..s + c].iter().fold(Aabb::EMPTY, |b, &p| b.union(bounds[p as usize]));
        let left = nodes.len();
        nodes.push(BuildNode { bounds: span_bounds(l_first, l_count), left: 0, right: 0, first: l_first as u32, count: l_count as u32 });
        nodes.push(BuildNode { bounds: span_bounds(r_first, r_count), left: 0, right: 0, first: r_first as u32, count: r_count as u32 });
        let n = &mut nodes[ni];
        n.left = left as u32;
        n.right = left as u32 + 1;
        n.first = 0;
        n.count = 0;
        stack.push(left + 1);
        stack.push(left);
    }
    Built { nodes, order }
}

/// Partitions `prims` in place and returns the size of the left part, or
/// `None` when the range should stay a leaf.
fn choose_split(prims: &mut [u32], bounds: &[Aabb], centroids: &[crate::math::Vec3], node_bounds: &Aabb) -> Option<usize> {
    let count = prims.len();
    if count <= 1 {
        return None;
    }
    let cb = prims.iter().fold(Aabb::EMPTY, |b, &p| b.grow_point(centroids[p as usize]));
    let mut best: Option<(f64, usize, usize)> = None; // (cost, axis, split bin)
    #[allow(clippy::needless_range_loop)]
    for axis in 0..3 {
        let lo = cb.min[axis];
        let extent = cb.max[axis] - lo;
        if extent.is_nan() || extent <= 0.0 {
            continue;
        }
        let scale = SAH_BINS as f64 / extent;
        let mut bins = [Bin { bounds: Aabb::EMPTY, count: 0 }; SAH_BINS];
        for &p in prims.iter() {
            let b = bin_index(centroids[p as usize][axis], lo, scale);
            bins[b].count += 1;
            bins[b].bounds = bins[b].bounds.union(bounds[p as usize]);
        }
        // Sweep from the right to get suffix areas and counts.
        let mut right_area = [0.0; SAH_BINS];
        let mut right_count = [0usize; SAH_BINS];
        let mut acc = Aabb::EMPTY;
        let mut n = 0;
        for i in (1..SAH_BINS).rev() {
            acc = acc.union(bins[i].bounds);
            n += bins[i].count;
            right_area[i] = acc.surface_area();
            right_count[i] = n;
        }
        let mut acc = Aabb::EMPTY;
        let mut n = 0;
        for split in 1..SAH_BINS {
            acc = acc.union(bins[split - 1].bounds);
            n += bins[split - 1].count;
            if n == 0 || right_count[split] == 0 {
                continue;
            }
            let cost = acc.surface_area() * n as f64 + right_area[split] * right_count[split] as f64;
            if best.is_none_or(|(c, _, _)| cost < c) {
                best = Some((cost, axis, split));
            }
        }
    }
    let parent_area = node_bounds.surface_area();
    let leaf_cost = INTERSECT_COST * count as f64;
    match best {
        Some((cost, axis, split)) => {
            let split_cost = if parent_area > 0.0 {
                TRAVERSAL_COST + INTERSECT_COST * cost / parent_area
            } else {
                TRAVERSAL_COST + INTERSECT_COST * count as f64
            };
            if count <= MAX_LEAF_SIZE && split_cost >= leaf_cost {
                return None;
            }
            let lo = cb.min[axis];
            let scale = SAH_BINS as f64 / (cb.max[axis] - lo);
            Some(partition(prims, |p| bin_index(centroids[p as usize][axis], lo, scale) < split))
        }
        None if count > MAX_LEAF_SIZE => Some(count / 2),
        None => None,
    }
}

fn bin_index(c: f64, lo: f64, scale: f64) -> usize {
    (((c - lo) * scale) as usize).min(SAH_BINS - 1)
}

/// Stable partition: keeps relative order on both sides for reproducibility.
fn partition(prims: &mut [u32], pred: impl Fn(u32) -> bool) -> usize {
    let (mut left, right): (Vec<u32>, Vec<u32>) = prims.iter().partition(|&&p| pred(p));
    let mid = left.len();
    left.extend(right);
    prims.copy_from_slice(&left);
    mid
}

/// Re-lays a built tree depth-first (left child adjacent to its parent).
pub(crate) fn flatten_depth_first(nodes: &[BuildNode]) -> Vec<BvhNode> {
    let mut out = Vec::with_capacity(nodes.len());
    if nodes.is_empty() {
        return out;
    }
    // (build index, index of the parent whose right link awaits this node)
    let mut stack = vec![(0usize, None::<usize>)];
    while let Some((bi, patch)) = stack.pop() {
        let at = out.len();
        if let Some(parent) = patch {
            out[parent].offset = at as u32;
        }
        let n = &nodes[bi];
        if n.count > 0 {
            out.push(BvhNode { bounds: n.bounds, offset: n.first, count: n.count });
        } else {
            out.push(BvhNode { bounds: n.bounds, offset: 0, count: 0 });
            stack.push((n.right as usize, Some(at)));
            stack.push((n.left as usize, None));
        }
    }
    out
}

/// Shape summary used by the text dump and tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BvhStats {
    pub nodes: usize,
    pub leaves: usize,
    pub depth: usize,
    /// Expected traversal cost relative to the root's surface area.
    pub sah_cost: f64,
}

impl BvhStats {
    pub fn dump(&self) -> String {
        format!("nodes {}\nleaves {}\ndepth {}\nsah_cost {:.4}\n", self.nodes, self.leaves, self.depth, self.sah_cost)
    }
}

pub(crate) fn stats<L: NodeLayout + ?Sized>(nodes: &L) -> BvhStats {
    if nodes.len() == 0 {
        return BvhStats { nodes: 0, leaves: 0, depth: 0, sah_cost: 0.0 };
    }
    let root_area = nodes.bounds(0).surface_area();
    let mut leaves = 0;
    let mut depth = 0;
    let mut cost = 0.0;
    let mut stack = vec![(0usize, 1usize)];
    while let Some((i, d)) = stack.pop() {
        depth = depth.max(d);
        let rel = if root_area > 0.0 { nodes.bounds(i).surface_area() / root_area } else { 1.0 };
        match nodes.kind(i) {
            Ok((_, count)) => {
                leaves += 1;
                cost += rel * INTERSECT_COST * count as f64;
            }
            Err((l, r)) => {
                cost += rel * TRAVERSAL_COST;
                stack.push((l, d + 1));
                stack.push((r, d + 1));
            }
        }
    }
    BvhStats { nodes: nodes.len(), leaves, depth, sah_cost: cost }
}

/// Verifies every node bounds its children and its primitives.
pub(crate) fn check_containment<L: NodeLayout + ?Sized>(nodes: &L, prim_bounds: impl Fn(usize) -> Aabb) -> Result<(), String> {
    for i in 0..nodes.len() {
        let b = nodes.bounds(i);
        match nodes.kind(i) {
            Ok((first, count)) => {
                for k in first..first + count {
                    if !b.contains(&prim_bounds(k)) {
                        return Err(format!("leaf {i} does not contain primitive slot {k}"));
                    }
                }
            }
            Err((l, r)) => {
                if !b.contains(nodes.bounds(l)) || !b.contains(nodes.bounds(r)) {
                    return Err(format!("node {i} does not contain its children"));
                }
            }
        }
    }
    Ok(())
}
