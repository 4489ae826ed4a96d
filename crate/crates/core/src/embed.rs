//! Approximate 2D assignment through a one-dimensional embedding.
//!
//! Each user is reconstructed from its `K` nearest servers and each server
//! from its `K'` nearest users (locally linear weights). The bottom
//! non-trivial eigenvector of `M = (I - W)^T (I - W)` gives a line ordering,
//! a spread pass pulls apart neighbours that are close on the line but far
//! in the plane, and the line DP then matches users to servers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assign::{opt_dp, ordered_dp};
use crate::error::{invalid, numeric, Error, Result};
use crate::hungarian::min_cost_matching_oracle;

pub type Point = [f64; 2];

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanarInstance {
    users: Vec<Point>,
    servers: Vec<Point>,
}

impl PlanarInstance {
    pub fn new(users: Vec<Point>, servers: Vec<Point>) -> Result<Self> {
        if users.iter().chain(&servers).flatten().any(|c| !c.is_finite()) {
            return Err(invalid("coordinates must be finite"));
        }
        if users.is_empty() {
            return Err(invalid("at least one user is required"));
        }
        if users.len() > servers.len() {
            return Err(invalid("need at least as many servers as users"));
        }
        Ok(Self { users, servers })
    }

    pub fn users(&self) -> &[Point] {
        &self.users
    }

    pub fn servers(&self) -> &[Point] {
        &self.servers
    }

    /// Total node count `|R| + |S|`; users come first in node numbering.
    pub fn len(&self) -> usize {
        self.users.len() + self.servers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node(&self, k: usize) -> Point {
        let nr = self.users.len();
        if k < nr {
            self.users[k]
        } else {
            self.servers[k - nr]
        }
    }

    pub fn role(&self, k: usize) -> Role {
        if k < self.users.len() {
            Role::User
        } else {
            Role::Server
        }
    }

    /// Euclidean user-by-server distance matrix.
    pub fn distance_matrix(&self) -> Vec<Vec<f64>> {
        self.users
            .iter()
            .map(|&u| self.servers.iter().map(|&s| dist(u, s)).collect())
            .collect()
    }

    /// Mean 2D distance of a user→server assignment.
    pub fn mean_distance(&self, assignment: &[usize]) -> f64 {
        let total: f64 = assignment
            .iter()
            .enumerate()
            .map(|(i, &j)| dist(self.users[i], self.servers[j]))
            .sum();
        total / assignment.len() as f64
    }

    /// Distance from every node to its nearest node of the other role.
    fn nearest_opposite(&self) -> Vec<f64> {
        let near = |p: Point, set: &[Point]| set.iter().map(|&q| dist(p, q)).fold(f64::INFINITY, f64::min);
        self.users
            .iter()
            .map(|&u| near(u, &self.servers))
            .chain(self.servers.iter().map(|&s| near(s, &self.users)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    User,
    Server,
}

/// Which pair cost the line DP minimises once nodes are ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineCost {
    /// `|y_i - y_j|` on the (spread) embedded coordinates.
    #[default]
    Embedded,
    /// True plane distance, keeping only the embedded order.
    Planar,
}

/// Neighbourhood size, absolute or as a fraction of the opposite set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborCount {
    Count(usize),
    Fraction(f64),
}

impl NeighborCount {
    pub fn resolve(&self, available: usize) -> Result<usize> {
        let k = match *self {
            NeighborCount::Count(k) => k,
            NeighborCount::Fraction(f) => {
                if !(f > 0.0 && f <= 1.0) {
                    return Err(invalid("neighbour fraction must lie in (0, 1]"));
                }
                ((f * available as f64).round() as usize).max(1)
            }
        };
        if k == 0 || k > available {
            return Err(invalid(format!("neighbour count {k} outside 1..={available}")));
        }
        Ok(k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingConfig {
    /// Servers used to reconstruct each user.
    pub user_neighbors: NeighborCount,
    /// Users used to reconstruct each server.
    pub server_neighbors: NeighborCount,
    /// Tikhonov term is `regularization * trace(G) / K`.
    pub regularization: f64,
    /// Plane distance above which a line-adjacent pair is flagged (Δ).
    pub far_threshold: Option<f64>,
    /// Line gap below which a pair counts as adjacent (ε).
    pub near_threshold: Option<f64>,
    /// Gap inserted per flagged pair, cumulatively (δ).
    pub shift: Option<f64>,
    pub line_cost: LineCost,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            user_neighbors: NeighborCount::Fraction(0.25),
            server_neighbors: NeighborCount::Fraction(0.25),
            regularization: 1e-3,
            far_threshold: None,
            near_threshold: None,
            shift: None,
            line_cost: LineCost::Embedded,
        }
    }
}

/// Resolved spread parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpreadParams {
    pub far_threshold: f64,
    pub near_threshold: f64,
    pub shift: f64,
}

impl EmbeddingConfig {
    /// Fill unset spread parameters: Δ is twice the mean nearest-opposite
    /// distance, ε is `1e-4` of the embedded span and δ is span / n.
    pub fn spread_params(&self, instance: &PlanarInstance, embedding: &Embedding) -> Result<SpreadParams> {
        let span = embedding.span();
        let n = embedding.coords.len() as f64;
        let far = match self.far_threshold {
            Some(x) => x,
            None => {
                let near = instance.nearest_opposite();
                2.0 * near.iter().sum::<f64>() / near.len() as f64
            }
        };
        let p = SpreadParams {
            far_threshold: far,
            near_threshold: self.near_threshold.unwrap_or(1e-4 * span),
            shift: self.shift.unwrap_or(span / n),
        };
        for (name, v) in [("far_threshold", p.far_threshold), ("near_threshold", p.near_threshold), ("shift", p.shift)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(p)
    }
}

/// Sparse reconstruction weights; row `k` lists `(node, weight)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub n_users: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl Weights {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `M = (I - W)^T (I - W)` as a dense matrix.
    pub fn cost_matrix(&self) -> DMatrix<f64> {
        let n = self.rows.len();
        let mut m = DMatrix::<f64>::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            // row of I - W: +1 at i, -w at neighbours
            let mut entries: Vec<(usize, f64)> = Vec::with_capacity(row.len() + 1);
            entries.push((i, 1.0));
            entries.extend(row.iter().map(|&(j, w)| (j, -w)));
            for &(a, va) in &entries {
                for &(b, vb) in &entries {
                    m[(a, b)] += va * vb;
                }
            }
        }
        m
    }
}

fn local_weights(center: Point, neighbors: &[Point], regularization: f64) -> Result<Vec<f64>> {
    let k = neighbors.len();
    if k == 1 {
        return Ok(vec![1.0]);
    }
    let g = DMatrix::from_fn(k, k, |a, b| {
        let da = [neighbors[a][0] - center[0], neighbors[a][1] - center[1]];
        let db = [neighbors[b][0] - center[0], neighbors[b][1] - center[1]];
        da[0] * db[0] + da[1] * db[1]
    });
    let trace = g.trace();
    if trace <= 0.0 {
        return Err(numeric("degenerate neighbourhood: every neighbour coincides with the node"));
    }
    let reg = regularization * trace / k as f64;
    let mut a = g;
    for d in 0..k {
        a[(d, d)] += reg;
    }
    let ones = DVector::from_element(k, 1.0);
    let w = match a.clone().cholesky() {
        Some(ch) => ch.solve(&ones),
        None => a.lu().solve(&ones).ok_or_else(|| Error::Singular("local Gram system".into()))?,
    };
    let s = w.sum();
    if !(s.is_finite() && s.abs() > 0.0) {
        return Err(numeric("local weights cannot be normalised"));
    }
    Ok(w.iter().map(|x| x / s).collect())
}

fn nearest(p: Point, set: &[Point], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..set.len()).collect();
    let key = |j: &usize| dist(p, set[*j]);
    idx.select_nth_unstable_by(k - 1, |a, b| key(a).total_cmp(&key(b)).then(a.cmp(b)));
    idx.truncate(k);
    idx.sort_by(|a, b| key(a).total_cmp(&key(b)).then(a.cmp(b)));
    idx
}

/// Locally linear reconstruction weights across roles.
pub fn knn_weights(instance: &PlanarInstance, config: &EmbeddingConfig) -> Result<Weights> {
    if !(config.regularization.is_finite() && config.regularization > 0.0) {
        return Err(invalid("regularization must be positive"));
    }
    let nr = instance.users.len();
    let k_user = config.user_neighbors.resolve(instance.servers.len())?;
    let k_server = config.server_neighbors.resolve(nr)?;
    let mut rows = Vec::with_capacity(instance.len());
    for &u in &instance.users {
        let nb = nearest(u, &instance.servers, k_user);
        let pts: Vec<Point> = nb.iter().map(|&j| instance.servers[j]).collect();
        let w = local_weights(u, &pts, config.regularization)?;
        rows.push(nb.iter().map(|&j| j + nr).zip(w).collect());
    }
    for &s in &instance.servers {
        let nb = nearest(s, &instance.users, k_server);
        let pts: Vec<Point> = nb.iter().map(|&j| instance.users[j]).collect();
        let w = local_weights(s, &pts, config.regularization)?;
        rows.push(nb.into_iter().zip(w).collect());
    }
    Ok(Weights { n_users: nr, rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    /// Line coordinate of each node (users first).
    pub coords: Vec<f64>,
    pub roles: Vec<Role>,
    /// `y^T M y` of the unadjusted eigenvector.
    pub residual: f64,
    /// Eigenvalue the coordinates were taken from.
    pub eigenvalue: f64,
}

impl Embedding {
    pub fn span(&self) -> f64 {
        let lo = self.coords.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.coords.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    }

    /// Node indices in increasing coordinate (ties by index).
    pub fn order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.coords.len()).collect();
        idx.sort_by(|&a, &b| self.coords[a].total_cmp(&self.coords[b]).then(a.cmp(&b)));
        idx
    }
}

/// Unit-norm eigenvector of the second-smallest eigenvalue of `M`.
pub fn embed_1d(weights: &Weights) -> Result<Embedding> {
    let n = weights.len();
    if n < 2 {
        return Err(invalid("embedding needs at least two nodes"));
    }
    let m = weights.cost_matrix();
    let eig = SymmetricEigen::try_new(m.clone(), 1e-14, 0)
        .ok_or_else(|| numeric("symmetric eigensolver did not converge"))?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let pick = idx[1];
    let mut y: DVector<f64> = eig.eigenvectors.column(pick).into_owned();
    y /= y.norm();
    let nr = weights.n_users;
    let (first, last) = if nr >= 2 { (0, nr - 1) } else { (0, n - 1) };
    if y[first] > y[last] {
        y = -y;
    }
    let residual = (y.transpose() * &m * &y)[(0, 0)];
    if y.iter().any(|v| !v.is_finite()) {
        return Err(numeric("embedding produced non-finite coordinates"));
    }
    let roles = (0..n).map(|k| if k < nr { Role::User } else { Role::Server }).collect();
    Ok(Embedding { coords: y.iter().copied().collect(), roles, residual, eigenvalue: eig.eigenvalues[pick] })
}

/// Walk the nodes in line order; whenever two consecutive nodes are closer
/// than ε on the line but farther than Δ in the plane, every node from the
/// second onwards is pushed right by a further δ.
pub fn spread_adjust(embedding: &Embedding, instance: &PlanarInstance, params: &SpreadParams) -> Embedding {
    let order = embedding.order();
    let mut coords = embedding.coords.clone();
    let mut offset = 0.0;
    for w in order.windows(2) {
        let (a, b) = (w[0], w[1]);
        let gap = embedding.coords[b] - embedding.coords[a];
        if gap < params.near_threshold && dist(instance.node(a), instance.node(b)) > params.far_threshold {
            offset += params.shift;
        }
        coords[b] += offset;
    }
    Embedding { coords, ..embedding.clone() }
}

/// Assignment found through the embedding, with its plane cost.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedAssignment {
    pub assignment: Vec<usize>,
    pub mean: f64,
    pub embedding: Embedding,
}

/// Embed, spread and run the line DP on the embedded coordinates.
pub fn embed_assign(instance: &PlanarInstance, config: &EmbeddingConfig) -> Result<EmbeddedAssignment> {
    let weights = knn_weights(instance, config)?;
    let raw = embed_1d(&weights)?;
    let params = config.spread_params(instance, &raw)?;
    let embedding = spread_adjust(&raw, instance, &params);
    let nr = instance.users.len();
    let by_coord = |range: std::ops::Range<usize>| {
        let mut v: Vec<usize> = range.collect();
        v.sort_by(|&a, &b| embedding.coords[a].total_cmp(&embedding.coords[b]).then(a.cmp(&b)));
        v
    };
    let user_order = by_coord(0..nr);
    let server_order = by_coord(nr..instance.len());
    let picks = match config.line_cost {
        LineCost::Embedded => {
            let uy: Vec<f64> = user_order.iter().map(|&k| embedding.coords[k]).collect();
            let sy: Vec<f64> = server_order.iter().map(|&k| embedding.coords[k]).collect();
            opt_dp(&uy, &sy, 1)?.assignment
        }
        LineCost::Planar => {
            let cost = |i: usize, j: usize| dist(instance.node(user_order[i]), instance.node(server_order[j]));
            ordered_dp(user_order.len(), server_order.len(), cost)?.0
        }
    };
    let mut assignment = vec![0usize; nr];
    for (rank, &j) in picks.iter().enumerate() {
        assignment[user_order[rank]] = server_order[j] - nr;
    }
    let mean = instance.mean_distance(&assignment);
    Ok(EmbeddedAssignment { assignment, mean, embedding })
}

/// Embedding assignment compared against the exact plane matching.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatch {
    pub embedded: EmbeddedAssignment,
    pub optimal: Vec<usize>,
    pub opt_mean: f64,
    pub embed_mean: f64,
    /// `embed_mean / opt_mean` (1 when both are zero).
    pub ratio: f64,
}

pub fn match_via_embedding(instance: &PlanarInstance, config: &EmbeddingConfig) -> Result<EmbeddingMatch> {
    let embedded = embed_assign(instance, config)?;
    let (optimal, total) = min_cost_matching_oracle(&instance.distance_matrix())?;
    let opt_mean = total / instance.users.len() as f64;
    let embed_mean = embedded.mean;
    let ratio = if opt_mean > 0.0 { embed_mean / opt_mean } else if embed_mean > 0.0 { f64::INFINITY } else { 1.0 };
    Ok(EmbeddingMatch { embedded, optimal, opt_mean, embed_mean, ratio })
}

/// Users uniform in the unit square; each server uniform in a box of side
/// `box_side` centred on a randomly chosen user.
pub fn clustered_instance(n_users: usize, n_servers: usize, box_side: f64, seed: u64) -> Result<PlanarInstance> {
    if n_users == 0 || !(box_side >= 0.0 && box_side.is_finite()) {
        return Err(invalid("need users and a finite non-negative box side"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let users: Vec<Point> = (0..n_users).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
    let servers = (0..n_servers)
        .map(|_| {
            let c = users[rng.random_range(0..n_users)];
            [
                c[0] + box_side * (rng.random::<f64>() - 0.5),
                c[1] + box_side * (rng.random::<f64>() - 0.5),
            ]
        })
        .collect();
    PlanarInstance::new(users, servers)
}

/// Equal numbers of users and servers at random positions on one line
/// segment through the plane.
pub fn collinear_instance(n: usize, seed: u64) -> Result<PlanarInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (ox, oy) = (0.1, 0.2);
    let (dx, dy) = (0.8, 0.45);
    let mut place = || {
        let t: f64 = rng.random();
        [ox + t * dx, oy + t * dy]
    };
    let users = (0..n).map(|_| place()).collect();
    let servers = (0..n).map(|_| place()).collect();
    PlanarInstance::new(users, servers)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_neighbor_weight_one() {
        assert_eq!(local_weights([0.0, 0.0], &[[1.0, 1.0]], 1e-3).unwrap(), vec![1.0]);
    }

    #[test]
    fn symmetric_pair_halves() {
        let w = local_weights([0.5, 0.5], &[[0.0, 0.5], [1.0, 0.5]], 1e-3).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-12 && (w[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn coincident_neighbourhood_reported() {
        assert!(local_weights([0.5, 0.5], &[[0.5, 0.5], [0.5, 0.5]], 1e-3).is_err());
    }

    #[test]
    fn rows_sum_to_one_and_cross_roles() {
        let inst = clustered_instance(20, 40, 0.1, 3).unwrap();
        let w = knn_weights(&inst, &EmbeddingConfig::default()).unwrap();
        for (i, row) in w.rows.iter().enumerate() {
            let s: f64 = row.iter().map(|p| p.1).sum();
            assert!((s - 1.0).abs() < 1e-10);
            assert!(row.iter().all(|&(j, _)| (j < 20) != (i < 20)));
        }
        assert_eq!(w.rows[0].len(), 10);
        assert_eq!(w.rows[25].len(), 5);
    }

    #[test]
    fn eigenvector_normalised_with_rayleigh_residual() {
        let inst = clustered_instance(15, 30, 0.1, 9).unwrap();
        let e = embed_1d(&knn_weights(&inst, &EmbeddingConfig::default()).unwrap()).unwrap();
        let norm: f64 = e.coords.iter().map(|y| y * y).sum();
        assert!((norm - 1.0).abs() < 1e-10);
        assert!((e.residual - e.eigenvalue).abs() < 1e-8);
        assert!(e.coords[0] <= e.coords[14]);
    }

    fn toy() -> (PlanarInstance, Embedding) {
        let inst = PlanarInstance::new(vec![[0.0, 0.0], [5.0, 0.0]], vec![[0.1, 0.0], [10.0, 0.0]]).unwrap();
        let e = Embedding {
            coords: vec![0.0, 1.0, 1.0 + 1e-9, 2.0],
            roles: vec![Role::User, Role::User, Role::Server, Role::Server],
            residual: 0.0,
            eigenvalue: 0.0,
        };
        (inst, e)
    }

    #[test]
    fn spread_identity_without_flags() {
        let (inst, e) = toy();
        let p = SpreadParams { far_threshold: 100.0, near_threshold: 1e-6, shift: 0.5 };
        assert_eq!(spread_adjust(&e, &inst, &p).coords, e.coords);
    }

    #[test]
    fn spread_one_and_two_flags() {
        let (inst, e) = toy();
        // nodes 1 (5,0) and 2 (0.1,0) are adjacent on the line and 4.9 apart
        let p = SpreadParams { far_threshold: 1.0, near_threshold: 1e-6, shift: 0.5 };
        let out = spread_adjust(&e, &inst, &p);
        assert_eq!(out.coords[0], 0.0);
        assert_eq!(out.coords[1], 1.0);
        assert_eq!(out.coords[2], 1.0 + 1e-9 + 0.5);
        assert_eq!(out.coords[3], 2.5);

        let mut e2 = e.clone();
        e2.coords[3] = e2.coords[2] + 1e-9;
        let out = spread_adjust(&e2, &inst, &p);
        assert_eq!(out.coords[2], e2.coords[2] + 0.5);
        assert_eq!(out.coords[3], e2.coords[3] + 1.0);
    }

    #[test]
    fn planar_line_cost_never_worse_than_embedded_order_cost() {
        let inst = clustered_instance(20, 40, 0.1, 5).unwrap();
        let line = embed_assign(&inst, &EmbeddingConfig::default()).unwrap();
        let cfg = EmbeddingConfig { line_cost: LineCost::Planar, ..Default::default() };
        let planar = embed_assign(&inst, &cfg).unwrap();
        // both respect the same order; the planar DP optimises the true cost over it
        assert!(planar.mean <= line.mean + 1e-12);
    }

    #[test]
    fn neighbor_count_resolution() {
        assert_eq!(NeighborCount::Fraction(0.25).resolve(400).unwrap(), 100);
        assert_eq!(NeighborCount::Fraction(0.01).resolve(10).unwrap(), 1);
        assert!(NeighborCount::Count(0).resolve(3).is_err());
        assert!(NeighborCount::Count(4).resolve(3).is_err());
    }

    #[test]
    fn rejects_more_users_than_servers() {
        assert!(PlanarInstance::new(vec![[0.0, 0.0]; 2], vec![[0.0, 0.0]]).is_err());
    }
}
