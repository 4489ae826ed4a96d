//! Optimal bidirectional assignment on the line.
//!
//! Optimal line assignments never cross, so with servers of capacity one the
//! problem is an alignment: `C[i][j]` is the cheapest way to serve users
//! `0..=i` with servers `0..=j` where user `i` sits at a server `<= j`, and
//!
//! ```text
//! C[i][j] = min(C[i][j-1], |r_i - s_j| + C[i-1][j-1])
//! ```
//!
//! Only the band `i <= j <= i + (|S| - |R|)` is reachable. Larger capacities
//! are handled by repeating each server `c` times.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::spatial::SpatialInstance;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptAssignment {
    /// `assignment[i]` is the server of user `i` (always total).
    pub assignment: Vec<usize>,
    pub total_cost: f64,
    pub mean: f64,
}

impl OptAssignment {
    pub fn from_assignment(users: &[f64], servers: &[f64], assignment: Vec<usize>) -> Self {
        let total_cost: f64 = assignment
            .iter()
            .enumerate()
            .map(|(i, &j)| (users[i] - servers[j]).abs())
            .sum();
        let mean = if users.is_empty() { 0.0 } else { total_cost / users.len() as f64 };
        Self { assignment, total_cost, mean }
    }

    /// True when no two users swap order: `i < i'` implies `η(i) <= η(i')`.
    pub fn is_non_crossing(&self) -> bool {
        self.assignment.windows(2).all(|w| w[0] <= w[1])
    }
}

fn check_sorted(name: &str, xs: &[f64]) -> Result<()> {
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(invalid(format!("{name} locations must be finite")));
    }
    if xs.windows(2).any(|w| w[0] > w[1]) {
        return Err(invalid(format!("{name} locations must be sorted")));
    }
    Ok(())
}

/// Minimum total distance assignment of every user to a server with at most
/// `capacity` users per server.
pub fn opt_dp(users: &[f64], servers: &[f64], capacity: u32) -> Result<OptAssignment> {
    check_sorted("user", users)?;
    check_sorted("server", servers)?;
    if capacity == 0 {
        return Err(invalid("capacity must be at least 1"));
    }
    let c = capacity as usize;
    if users.len() > c * servers.len() {
        return Err(Error::Infeasible(format!(
            "{} users exceed total capacity {}",
            users.len(),
            c * servers.len()
        )));
    }
    let n = users.len();
    if n == 0 {
        return Ok(OptAssignment::from_assignment(users, servers, Vec::new()));
    }
    // replicated servers: slot k is server k / c
    let m = c * servers.len();
    let (slots, _) = ordered_dp(n, m, |i, k| (users[i] - servers[k / c]).abs())?;
    let assignment = slots.into_iter().map(|k| k / c).collect();
    Ok(OptAssignment::from_assignment(users, servers, assignment))
}

/// Line DP over an arbitrary cost: `n` users and `m >= n` servers, both in
/// a fixed order, each server used at most once and no two pairs crossing.
/// Returns the server of each user and the total cost.
///
/// Ties between leaving server `j` unused and giving it user `i` go to the
/// latter.
pub fn ordered_dp(n: usize, m: usize, cost: impl Fn(usize, usize) -> f64) -> Result<(Vec<usize>, f64)> {
    if n > m {
        return Err(Error::Infeasible(format!("{n} users exceed {m} servers")));
    }
    if n == 0 {
        return Ok((Vec::new(), 0.0));
    }
    let w = m - n;
    // choice[i][j - i]: server holding user i in the best solution of C[i][j]
    let mut choice = vec![0u32; n * (w + 1)];
    let mut prev = vec![0.0f64; w + 1];
    let mut cur = vec![0.0f64; w + 1];

    // row 0: cheapest server among 0..=j
    let mut best = cost(0, 0);
    let mut arg = 0usize;
    for j in 0..=w {
        let d = cost(0, j);
        if d < best {
            best = d;
            arg = j;
        }
        prev[j] = best;
        choice[j] = arg as u32;
    }
    let mut diagonal = cost(0, 0);
    for i in 1..n {
        diagonal += cost(i, i);
        cur[0] = diagonal;
        choice[i * (w + 1)] = i as u32;
        for off in 1..=w {
            let j = i + off;
            let skip = cur[off - 1];
            let take = cost(i, j) + prev[off];
            if skip < take {
                cur[off] = skip;
                choice[i * (w + 1) + off] = choice[i * (w + 1) + off - 1];
            } else {
                cur[off] = take;
                choice[i * (w + 1) + off] = j as u32;
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let total = prev[w];

    let mut assignment = vec![0usize; n];
    let mut s = m - 1;
    for i in (0..n).rev() {
        let k = choice[i * (w + 1) + (s - i)] as usize;
        assignment[i] = k;
        s = k.wrapping_sub(1);
    }
    Ok((assignment, total))
}

/// Optimal assignment of every user of a line instance, honouring each
/// server's own capacity (each server is replicated `capacity` times).
pub fn opt_assign_instance(instance: &SpatialInstance) -> Result<OptAssignment> {
    let servers = instance.servers();
    let caps = instance.capacities();
    let users = instance.users();
    let total: u64 = instance.total_capacity();
    if users.len() as u64 > total {
        return Err(Error::Infeasible(format!(
            "{} users exceed total capacity {total}",
            users.len()
        )));
    }
    let mut slots = Vec::with_capacity(total as usize);
    let mut owner = Vec::with_capacity(total as usize);
    for (j, (&s, &c)) in servers.iter().zip(caps).enumerate() {
        for _ in 0..c {
            slots.push(s);
            owner.push(j);
        }
    }
    let r = opt_dp(users, &slots, 1)?;
    let assignment = r.assignment.iter().map(|&k| owner[k]).collect();
    Ok(OptAssignment::from_assignment(users, servers, assignment))
}

/// Level-`t` member of the nested family on which bidirectional greedy
/// matching degrades: `2^(t-1)` users and as many servers. Level 1 is a
/// user at 0 and a server at 1; level `t+1` is two copies of level `t`
/// separated by a gap just shorter than one copy, so greedy links the
/// copies at the gap and is left with the two outermost points.
/// Returns `(users, servers)`, both sorted.
pub fn gs_worst_case_instance(t: u32) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(1..=20).contains(&t) {
        return Err(invalid("level must lie in 1..=20"));
    }
    // (position, is_user)
    let mut pts = vec![(0.0, true), (1.0, false)];
    let mut span = 1.0;
    for _ in 1..t {
        let shift = span + (span - 0.5);
        let copy: Vec<(f64, bool)> = pts.iter().map(|&(x, u)| (x + shift, u)).collect();
        pts.extend(copy);
        span = 2.0 * span + (span - 0.5);
    }
    let users = pts.iter().filter(|p| p.1).map(|p| p.0).collect();
    let servers = pts.iter().filter(|p| !p.1).map(|p| p.0).collect();
    Ok((users, servers))
}

/// Equal counts: the `i`-th user goes to the `i`-th server.
pub fn trivial_equal_assignment(users: &[f64], servers: &[f64]) -> Result<OptAssignment> {
    check_sorted("user", users)?;
    check_sorted("server", servers)?;
    if users.len() != servers.len() {
        return Err(invalid("identity matching needs as many users as servers"));
    }
    Ok(OptAssignment::from_assignment(users, servers, (0..users.len()).collect()))
}

/// Exhaustive minimum over every capacity-feasible assignment. At most eight
/// users; intended as a test oracle.
pub fn brute_force_oracle(users: &[f64], servers: &[f64], capacity: u32) -> Result<OptAssignment> {
    if users.len() > 8 {
        return Err(invalid("brute force is limited to eight users"));
    }
    if users.len() > capacity as usize * servers.len() {
        return Err(Error::Infeasible("not enough capacity".into()));
    }
    struct Search<'a> {
        users: &'a [f64],
        servers: &'a [f64],
        load: Vec<u32>,
        cap: u32,
        current: Vec<usize>,
        best: f64,
        best_assignment: Vec<usize>,
    }
    impl Search<'_> {
        fn go(&mut self, i: usize, cost: f64) {
            if cost >= self.best {
                return;
            }
            if i == self.users.len() {
                self.best = cost;
                self.best_assignment = self.current.clone();
                return;
            }
            for j in 0..self.servers.len() {
                if self.load[j] < self.cap {
                    self.load[j] += 1;
                    self.current.push(j);
                    let d = (self.users[i] - self.servers[j]).abs();
                    self.go(i + 1, cost + d);
                    self.current.pop();
                    self.load[j] -= 1;
                }
            }
        }
    }
    let mut search = Search {
        users,
        servers,
        load: vec![0; servers.len()],
        cap: capacity,
        current: Vec::with_capacity(users.len()),
        best: f64::INFINITY,
        best_assignment: Vec::new(),
    };
    search.go(0, 0.0);
    Ok(OptAssignment::from_assignment(users, servers, search.best_assignment))
}
