use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeSet, BinaryHeap, VecDeque};

use super::instance::SpatialInstance;
use super::profile::QueueProfile;

/// Outcome of running an allocation policy on an instance.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentResult {
    /// `assignment[i]` is the server of user `i`, if any.
    pub assignment: Vec<Option<usize>>,
    /// Distances of matched users, in user order.
    pub distances: Vec<f64>,
    pub matched: usize,
    pub total: f64,
    pub mean: f64,
    /// Unbiased sample variance (zero with fewer than two matches).
    pub variance: f64,
}

impl AssignmentResult {
    pub fn from_assignment(instance: &SpatialInstance, assignment: Vec<Option<usize>>) -> Self {
        let users = instance.users();
        let servers = instance.servers();
        let distances: Vec<f64> = assignment
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.map(|j| (users[i] - servers[j]).abs()))
            .collect();
        let matched = distances.len();
        let total: f64 = distances.iter().sum();
        let mean = if matched > 0 { total / matched as f64 } else { f64::NAN };
        let variance = if matched > 1 {
            distances.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (matched - 1) as f64
        } else {
            0.0
        };
        Self { assignment, distances, matched, total, mean, variance }
    }

    /// Indices of matched users, increasing.
    pub fn matched_users(&self) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.map(|_| i))
            .collect()
    }

    /// Matched distance plus, for each unmatched user, the distance it
    /// travels to the right end of the instance. Equals `∫ N_x dx` for the
    /// unidirectional policies.
    pub fn horizon_total(&self, instance: &SpatialInstance) -> f64 {
        let h = instance.horizon();
        let pending: f64 = self
            .assignment
            .iter()
            .zip(instance.users())
            .filter(|(s, _)| s.is_none())
            .map(|(_, &r)| h - r)
            .sum();
        self.total + pending
    }

    /// Sum of per-server loads never exceeds capacity.
    pub fn respects_capacity(&self, instance: &SpatialInstance) -> bool {
        let mut load = vec![0u32; instance.servers().len()];
        for j in self.assignment.iter().flatten() {
            load[*j] += 1;
        }
        load.iter().zip(instance.capacities()).all(|(l, c)| l <= c)
    }
}

enum Event {
    User(usize),
    Server(usize),
}

/// Merged left-to-right event order; a user sharing a location with a
/// server is visited first and so can be served at distance zero.
fn sweep_order(instance: &SpatialInstance) -> Vec<(f64, Event)> {
    let users = instance.users();
    let servers = instance.servers();
    let mut events = Vec::with_capacity(users.len() + servers.len());
    let (mut i, mut j) = (0, 0);
    while i < users.len() || j < servers.len() {
        if j == servers.len() || (i < users.len() && users[i] <= servers[j]) {
            events.push((users[i], Event::User(i)));
            i += 1;
        } else {
            events.push((servers[j], Event::Server(j)));
            j += 1;
        }
    }
    events
}

trait Buffer {
    fn put(&mut self, i: usize);
    fn take(&mut self) -> Option<usize>;
    fn len(&self) -> usize;
}

struct Fifo(VecDeque<usize>);
struct Lifo(Vec<usize>);

impl Buffer for Fifo {
    fn put(&mut self, i: usize) {
        self.0.push_back(i);
    }
    fn take(&mut self) -> Option<usize> {
        self.0.pop_front()
    }
    fn len(&self) -> usize {
        self.0.len()
    }
}

impl Buffer for Lifo {
    fn put(&mut self, i: usize) {
        self.0.push(i);
    }
    fn take(&mut self) -> Option<usize> {
        self.0.pop()
    }
    fn len(&self) -> usize {
        self.0.len()
    }
}

fn unidirectional_sweep(
    instance: &SpatialInstance,
    mut buffer: impl Buffer,
) -> (AssignmentResult, QueueProfile) {
    let caps = instance.capacities();
    let mut assignment = vec![None; instance.users().len()];
    let mut profile = QueueProfile::default();
    for (x, event) in sweep_order(instance) {
        match event {
            Event::User(i) => buffer.put(i),
            Event::Server(j) => {
                for _ in 0..caps[j] {
                    match buffer.take() {
                        Some(i) => assignment[i] = Some(j),
                        None => break,
                    }
                }
            }
        }
        profile.push(x, buffer.len() as u64);
    }
    // requests still pending travel to the right end and stop there
    profile.push(instance.horizon(), 0);
    (AssignmentResult::from_assignment(instance, assignment), profile)
}

/// Move-to-right: FIFO sweep, each server takes its oldest waiting users.
pub fn allocate_mtr(instance: &SpatialInstance) -> (AssignmentResult, QueueProfile) {
    unidirectional_sweep(instance, Fifo(VecDeque::new()))
}

/// Unidirectional greedy: LIFO sweep, each server takes the most recently
/// passed users, which is where the first rays to reach it come from.
pub fn allocate_ugs(instance: &SpatialInstance) -> (AssignmentResult, QueueProfile) {
    unidirectional_sweep(instance, Lifo(Vec::new()))
}

/// Nearest neighbour: users left to right, each to the closest server with
/// residual capacity, ties to the right.
pub fn allocate_nn(instance: &SpatialInstance) -> AssignmentResult {
    let users = instance.users();
    let servers = instance.servers();
    let mut residual = instance.capacities().to_vec();
    let mut open: BTreeSet<usize> = (0..servers.len()).collect();
    let mut assignment = vec![None; users.len()];
    for (i, &r) in users.iter().enumerate() {
        let split = servers.partition_point(|&s| s < r);
        let right = open.range(split..).next().copied();
        let left = open.range(..split).next_back().copied();
        let pick = match (left, right) {
            (Some(l), Some(rt)) => {
                if r - servers[l] < servers[rt] - r {
                    l
                } else {
                    rt
                }
            }
            (Some(l), None) => l,
            (None, Some(rt)) => rt,
            (None, None) => break,
        };
        assignment[i] = Some(pick);
        residual[pick] -= 1;
        if residual[pick] == 0 {
            open.remove(&pick);
        }
    }
    AssignmentResult::from_assignment(instance, assignment)
}

#[derive(Clone, Copy, PartialEq)]
enum Role {
    User(usize),
    Server(usize),
}

#[derive(PartialEq)]
struct Candidate {
    dist: f64,
    user: usize,
    server: usize,
    left: usize,
    right: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.user.cmp(&other.user))
            .then(other.server.cmp(&self.server))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Greedy stable matching: repeatedly removes a mutually nearest
/// user/server pair. Ties go to the leftmost user, then the rightmost server.
///
/// On the line a mutually nearest pair is always adjacent among the residual
/// points, so candidates live in a heap over adjacent pairs of a linked list.
pub fn allocate_gs(instance: &SpatialInstance) -> AssignmentResult {
    let users = instance.users();
    let servers = instance.servers();
    let mut residual = instance.capacities().to_vec();
    let nodes: Vec<(f64, Role)> = sweep_order(instance)
        .into_iter()
        .map(|(x, e)| match e {
            Event::User(i) => (x, Role::User(i)),
            Event::Server(j) => (x, Role::Server(j)),
        })
        .collect();
    let n = nodes.len();
    let mut prev: Vec<Option<usize>> = (0..n).map(|k| k.checked_sub(1)).collect();
    let mut next: Vec<Option<usize>> = (0..n).map(|k| (k + 1 < n).then_some(k + 1)).collect();
    let mut alive = vec![true; n];
    let mut heap = BinaryHeap::new();

    let candidate = |a: usize, b: usize| -> Option<Candidate> {
        let (user, server) = match (nodes[a].1, nodes[b].1) {
            (Role::User(u), Role::Server(s)) | (Role::Server(s), Role::User(u)) => (u, s),
            _ => return None,
        };
        Some(Candidate {
            dist: (users[user] - servers[server]).abs(),
            user,
            server,
            left: a,
            right: b,
        })
    };

    for k in 1..n {
        if let Some(c) = candidate(k - 1, k) {
            heap.push(Reverse(c));
        }
    }

    let mut assignment = vec![None; users.len()];
    let unlink = |x: usize,
                      alive: &mut Vec<bool>,
                      prev: &mut Vec<Option<usize>>,
                      next: &mut Vec<Option<usize>>,
                      heap: &mut BinaryHeap<Reverse<Candidate>>| {
        alive[x] = false;
        let (p, q) = (prev[x], next[x]);
        if let Some(p) = p {
            next[p] = q;
        }
        if let Some(q) = q {
            prev[q] = p;
        }
        if let (Some(p), Some(q)) = (p, q) {
            if let Some(c) = candidate(p, q) {
                heap.push(Reverse(c));
            }
        }
    };

    while let Some(Reverse(c)) = heap.pop() {
        if !alive[c.left] || !alive[c.right] || next[c.left] != Some(c.right) {
            continue;
        }
        assignment[c.user] = Some(c.server);
        residual[c.server] -= 1;
        let (user_node, server_node) = match nodes[c.left].1 {
            Role::User(_) => (c.left, c.right),
            Role::Server(_) => (c.right, c.left),
        };
        unlink(user_node, &mut alive, &mut prev, &mut next, &mut heap);
        if residual[c.server] == 0 {
            unlink(server_node, &mut alive, &mut prev, &mut next, &mut heap);
        }
    }
    AssignmentResult::from_assignment(instance, assignment)
}
