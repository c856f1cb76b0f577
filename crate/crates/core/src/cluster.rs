//! DBSCAN and the condensation of agent paths onto centroids.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::agent::{AgentPath, InputChoice, WaypointKind};
use crate::math::{floor, sqrt};
use crate::pheromone::{PheromoneSpace, PointId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Noise,
    Cluster(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    /// Indices into the input slice, ascending.
    pub members: Vec<usize>,
    pub centroid: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    pub labels: Vec<Label>,
    pub clusters: Vec<Cluster>,
}

/// Bucket index over arbitrary 2D points with cell side `eps`.
struct NeighborIndex<'a> {
    points: &'a [(f64, f64)],
    eps: f64,
    cells: BTreeMap<(i64, i64), Vec<usize>>,
}

impl<'a> NeighborIndex<'a> {
    fn new(points: &'a [(f64, f64)], eps: f64) -> Self {
        let mut cells: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
        for (i, &(x, y)) in points.iter().enumerate() {
            cells.entry(Self::cell(x, y, eps)).or_default().push(i);
        }
        NeighborIndex { points, eps, cells }
    }

    fn cell(x: f64, y: f64, eps: f64) -> (i64, i64) {
        (floor(x / eps) as i64, floor(y / eps) as i64)
    }

    /// Indices within `eps` of point `i`, itself included, ascending.
    fn neighbors(&self, i: usize) -> Vec<usize> {
        let (x, y) = self.points[i];
        let (cx, cy) = Self::cell(x, y, self.eps);
        let mut out = Vec::new();
        for gy in cy - 1..=cy + 1 {
            for gx in cx - 1..=cx + 1 {
                if let Some(bucket) = self.cells.get(&(gx, gy)) {
                    for &j in bucket {
                        let (px, py) = self.points[j];
                        let (dx, dy) = (px - x, py - y);
                        if sqrt(dx * dx + dy * dy) <= self.eps {
                            out.push(j);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// Density-based clustering.
///
/// A point is core when at least `min_pts` points (itself included) lie
/// within Euclidean distance `eps`. Points are visited in slice order, so
/// cluster ids follow the smallest core index of each cluster and a border
/// point reachable from several clusters joins the earliest one.
pub fn dbscan(points: &[(f64, f64)], eps: f64, min_pts: usize) -> ClusterResult {
    assert!(eps > 0.0, "eps must be positive");
    assert!(min_pts >= 1, "min_pts must be at least 1");

    #[derive(Clone, Copy, PartialEq)]
    enum State {
        Unvisited,
        Noise,
        In(usize),
    }

    let index = NeighborIndex::new(points, eps);
    let mut state = vec![State::Unvisited; points.len()];
    let mut n_clusters = 0;
    for i in 0..points.len() {
        if state[i] != State::Unvisited {
            continue;
        }
        let nb = index.neighbors(i);
        if nb.len() < min_pts {
            state[i] = State::Noise;
            continue;
        }
        let c = n_clusters;
        n_clusters += 1;
        state[i] = State::In(c);
        let mut queue: VecDeque<usize> = nb.into_iter().collect();
        while let Some(j) = queue.pop_front() {
            match state[j] {
                State::Noise => state[j] = State::In(c),
                State::Unvisited => {
                    state[j] = State::In(c);
                    let nbj = index.neighbors(j);
                    if nbj.len() >= min_pts {
                        queue.extend(nbj);
                    }
                }
                State::In(_) => {}
            }
        }
    }

    let mut members = vec![Vec::new(); n_clusters];
    let labels = state
        .iter()
        .enumerate()
        .map(|(i, s)| match *s {
            State::In(c) => {
                members[c].push(i);
                Label::Cluster(c)
            }
            _ => Label::Noise,
        })
        .collect();
    let clusters = members
        .into_iter()
        .map(|m| {
            let n = m.len() as f64;
            let (sx, sy) = m.iter().fold((0.0, 0.0), |(sx, sy), &i| (sx + points[i].0, sy + points[i].1));
            Cluster { members: m, centroid: (sx / n, sy / n) }
        })
        .collect();
    ClusterResult { labels, clusters }
}

/// A path after condensation: its hidden nodes are centroid point ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondensedPath {
    pub input: InputChoice,
    /// Centroids visited in order; consecutive repeats collapsed.
    pub nodes: Vec<PointId>,
    pub output: usize,
    /// Points the agent sensed while exploiting.
    pub followed: Vec<PointId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Centroid {
    pub id: PointId,
    pub level: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Condensed {
    pub paths: Vec<CondensedPath>,
    /// Every centroid referenced by a path, ascending by `(level, id)`.
    pub centroids: Vec<Centroid>,
    /// Number of point merges performed in the space.
    pub merges: usize,
}

impl Condensed {
    pub fn centroid(&self, id: PointId) -> Option<&Centroid> {
        self.centroids.iter().find(|c| c.id == id)
    }
}

/// Condenses a swarm's paths onto centroids in the space.
///
/// Every waypoint is first backed by a space point (followed waypoints get a
/// fresh point at their position). Then, level by level, DBSCAN runs over all
/// points on the level; each cluster holding a point some path uses is
/// merged into one point at the cluster mean (see
/// [`PheromoneSpace::merge_points`]). This repeats until no such cluster has
/// more than one member, so condensing the result again changes nothing.
pub fn condense_paths(
    paths: &[AgentPath],
    space: &mut PheromoneSpace,
    eps: f64,
    min_pts: usize,
) -> Condensed {
    let mut backing: Vec<Vec<PointId>> = Vec::with_capacity(paths.len());
    let mut followed: Vec<Vec<PointId>> = Vec::with_capacity(paths.len());
    for path in paths {
        let mut ids = Vec::with_capacity(path.waypoints.len());
        let mut seen = BTreeSet::new();
        for w in &path.waypoints {
            let id = match &w.kind {
                WaypointKind::Explored(id) if space.point(*id).is_some() => *id,
                WaypointKind::Followed(contrib) => {
                    seen.extend(contrib.iter().copied());
                    space.insert_point(w.level, w.x, w.y)
                }
                WaypointKind::Explored(_) => space.insert_point(w.level, w.x, w.y),
            };
            ids.push(id);
        }
        backing.push(ids);
        followed.push(seen.into_iter().collect());
    }

    let levels: BTreeSet<usize> = paths.iter().flat_map(|p| p.waypoints.iter().map(|w| w.level)).collect();
    let mut merges = 0;
    for level in levels {
        loop {
            let relevant: BTreeSet<PointId> = backing
                .iter()
                .flatten()
                .copied()
                .filter(|id| space.point(*id).is_some_and(|p| p.level == level))
                .collect();
            let (ids, positions): (Vec<PointId>, Vec<(f64, f64)>) =
                space.points_on_level(level).map(|p| (p.id, (p.x, p.y))).unzip();
            let result = dbscan(&positions, eps, min_pts);
            let mut remap = BTreeMap::new();
            for cluster in &result.clusters {
                if cluster.members.len() < 2 || !cluster.members.iter().any(|&m| relevant.contains(&ids[m])) {
                    continue;
                }
                let member_ids: Vec<PointId> = cluster.members.iter().map(|&m| ids[m]).collect();
                let (_, absorbed) = space.merge_points(&member_ids, cluster.centroid.0, cluster.centroid.1);
                merges += absorbed.len();
                remap.extend(absorbed);
            }
            if remap.is_empty() {
                break;
            }
            for id in backing.iter_mut().flatten() {
                if let Some(&s) = remap.get(id) {
                    *id = s;
                }
            }
            for f in followed.iter_mut() {
                for id in f.iter_mut() {
                    if let Some(&s) = remap.get(id) {
                        *id = s;
                    }
                }
            }
            space.remap_memory_targets(&remap);
        }
    }

    let mut centroid_ids = BTreeSet::new();
    let condensed_paths = paths
        .iter()
        .zip(backing)
        .zip(followed)
        .map(|((path, ids), mut followed)| {
            let mut nodes: Vec<PointId> = Vec::with_capacity(ids.len());
            for id in ids {
                if nodes.last() != Some(&id) {
                    nodes.push(id);
                }
            }
            centroid_ids.extend(nodes.iter().copied());
            followed.sort_unstable();
            followed.dedup();
            followed.retain(|id| space.point(*id).is_some());
            CondensedPath { input: path.input, nodes, output: path.output, followed }
        })
        .collect();
    let mut centroids: Vec<Centroid> = centroid_ids
        .into_iter()
        .map(|id| {
            let p = space.point(id).expect("centroid lives in the space");
            Centroid { id, level: p.level, x: p.x, y: p.y }
        })
        .collect();
    centroids.sort_by_key(|c| (c.level, c.id));
    Condensed { paths: condensed_paths, centroids, merges }
}
