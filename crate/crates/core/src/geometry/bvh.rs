//! Axis-aligned bounding volume hierarchy for nearest-hit ray casting.
//!
//! Built by median split along the longest axis of the centroid bounds, with
//! at most [`MAX_LEAF_SIZE`] triangles per leaf. Nodes are stored depth-first:
//! the left child of an interior node directly follows it.

use nalgebra::Vector3;

use super::{GeometryError, Ray, TriangleMesh};

pub const MAX_LEAF_SIZE: usize = 4;

/// Hits closer than this along the ray are ignored.
pub const MIN_HIT_DISTANCE: f64 = 1e-6;

/// Hits whose distances differ by no more than this are ties; the lower id wins.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub point: Vector3<f64>,
    pub triangle_id: usize,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Aabb {
    fn empty() -> Self {
        Self { min: Vector3::repeat(f64::INFINITY), max: Vector3::repeat(f64::NEG_INFINITY) }
    }

    fn grow(&mut self, p: &Vector3<f64>) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    fn longest_axis(&self) -> usize {
        let e = self.max - self.min;
        if e.x >= e.y && e.x >= e.z {
            0
        } else if e.y >= e.z {
            1
        } else {
            2
        }
    }

    /// Entry distance of the ray into the box, if it enters before `t_max`.
    #[inline]
    fn entry(&self, origin: &Vector3<f64>, inv_dir: &Vector3<f64>, t_max: f64) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for k in 0..3 {
            let a = (self.min[k] - origin[k]) * inv_dir[k];
            let b = (self.max[k] - origin[k]) * inv_dir[k];
            // f64::min/max discard a NaN operand (0 * inf on a slab plane)
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
        (t0 <= t1).then_some(t0)
    }
}

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    /// Leaf: first slot in `order`. Interior: index of the right child.
    offset: u32,
    /// Zero for interior nodes.
    count: u32,
}

/// Bounding volume hierarchy over the triangle ids of one mesh.
#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<u32>,
    triangle_count: usize,
}

impl Bvh {
    pub fn build(mesh: &TriangleMesh) -> Result<Self, GeometryError> {
        if mesh.is_empty() {
            return Err(GeometryError::EmptyMesh);
        }
        let centroids: Vec<Vector3<f64>> = (0..mesh.len())
            .map(|i| {
                let [a, b, c] = mesh.triangle(i);
                (a + b + c) / 3.0
            })
            .collect();
        let mut order: Vec<u32> = (0..mesh.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * mesh.len() / MAX_LEAF_SIZE + 1);
        build_node(mesh, &centroids, &mut order, 0, &mut nodes);
        Ok(Self { nodes, order, triangle_count: mesh.len() })
    }

    pub fn triangle_count(&self) -> usize {
        self.triangle_count
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Leaf bounds with the triangle ids stored in each leaf.
    pub fn leaves(&self) -> impl Iterator<Item = (Aabb, &[u32])> + '_ {
        self.nodes.iter().filter(|n| n.count > 0).map(move |n| {
            let start = n.offset as usize;
            (n.bounds, &self.order[start..start + n.count as usize])
        })
    }

    /// Nearest hit of `ray` against `mesh`, which must be the mesh this tree was built from.
    pub fn intersect(&self, mesh: &TriangleMesh, ray: &Ray) -> Option<Hit> {
        debug_assert_eq!(mesh.len(), self.triangle_count);
        let inv_dir = ray.direction.map(|d| 1.0 / d);
        let mut best: Option<(f64, usize)> = None;
        let mut stack: Vec<u32> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(idx) = stack.pop() {
            let node = &self.nodes[idx as usize];
            let limit = best.map_or(f64::INFINITY, |(t, _)| t + TIE_TOLERANCE);
            if node.bounds.entry(&ray.origin, &inv_dir, limit).is_none() {
                continue;
            }
            if node.count > 0 {
                let start = node.offset as usize;
                for &id in &self.order[start..start + node.count as usize] {
                    let id = id as usize;
                    if let Some(t) = intersect_triangle(ray, &mesh.triangle(id)) {
                        best = Some(pick_nearest(best, (t, id)));
                    }
                }
            } else {
                let left = idx + 1;
                let right = node.offset;
                let dl = self.nodes[left as usize].bounds.entry(&ray.origin, &inv_dir, limit);
                let dr = self.nodes[right as usize].bounds.entry(&ray.origin, &inv_dir, limit);
                match (dl, dr) {
                    (Some(a), Some(b)) if a <= b => {
                        stack.push(right);
                        stack.push(left);
                    }
                    (Some(_), Some(_)) => {
                        stack.push(left);
                        stack.push(right);
                    }
                    (Some(_), None) => stack.push(left),
                    (None, Some(_)) => stack.push(right),
                    (None, None) => {}
                }
            }
        }
        best.map(|(t, triangle_id)| Hit { point: ray.at(t), triangle_id, t })
    }
}

pub fn build_bvh(mesh: &TriangleMesh) -> Result<Bvh, GeometryError> {
    Bvh::build(mesh)
}

pub fn ray_mesh_intersect(bvh: &Bvh, mesh: &TriangleMesh, ray: &Ray) -> Option<Hit> {
    bvh.intersect(mesh, ray)
}

fn pick_nearest(best: Option<(f64, usize)>, cand: (f64, usize)) -> (f64, usize) {
    match best {
        None => cand,
        Some(b) => {
            if cand.0 < b.0 - TIE_TOLERANCE || ((cand.0 - b.0).abs() <= TIE_TOLERANCE && cand.1 < b.1) {
                cand
            } else {
                b
            }
        }
    }
}

fn build_node(
    mesh: &TriangleMesh,
    centroids: &[Vector3<f64>],
    order: &mut [u32],
    first: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let mut bounds = Aabb::empty();
    let mut cbounds = Aabb::empty();
    for &id in order.iter() {
        for v in mesh.triangle(id as usize) {
            bounds.grow(&v);
        }
        cbounds.grow(&centroids[id as usize]);
    }
    let pad = 1e-9 * (1.0 + bounds.max.abs().max().max(bounds.min.abs().max()));
    bounds.min.add_scalar_mut(-pad);
    bounds.max.add_scalar_mut(pad);

    let index = nodes.len();
    if order.len() <= MAX_LEAF_SIZE {
        nodes.push(Node { bounds, offset: first as u32, count: order.len() as u32 });
        return index;
    }
    nodes.push(Node { bounds, offset: 0, count: 0 });

    let axis = cbounds.longest_axis();
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        centroids[a as usize][axis].total_cmp(&centroids[b as usize][axis]).then(a.cmp(&b))
    });
    let (left, right) = order.split_at_mut(mid);
    build_node(mesh, centroids, left, first, nodes);
    let right_index = build_node(mesh, centroids, right, first + mid, nodes);
    nodes[index].offset = right_index as u32;
    index
}

/// Barycentric slack so rays through a shared edge hit at least one of its triangles.
const EDGE_TOLERANCE: f64 = 1e-9;

/// Möller–Trumbore ray/triangle test, two-sided. Returns the hit distance.
#[inline]
pub fn intersect_triangle(ray: &Ray, tri: &[Vector3<f64>; 3]) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = ray.direction.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-300 {
        return None;
    }
    let inv = 1.0 / det;
    let s = ray.origin - tri[0];
    let u = s.dot(&p) * inv;
    if !(-EDGE_TOLERANCE..=1.0 + EDGE_TOLERANCE).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = ray.direction.dot(&q) * inv;
    if v < -EDGE_TOLERANCE || u + v > 1.0 + EDGE_TOLERANCE {
        return None;
    }
    let t = e2.dot(&q) * inv;
    (t >= MIN_HIT_DISTANCE).then_some(t)
}
