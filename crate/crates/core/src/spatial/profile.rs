/// Step function `N_x`: the number of outstanding requests crossing `x`.
///
/// `levels[k]` holds on `[breakpoints[k], breakpoints[k + 1])`; the last
/// level is always zero. Consecutive equal levels are merged, so two
/// profiles describe the same function iff they compare equal.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QueueProfile {
    pub breakpoints: Vec<f64>,
    pub levels: Vec<u64>,
}

impl QueueProfile {
    pub(crate) fn push(&mut self, x: f64, level: u64) {
        if let Some(&last_x) = self.breakpoints.last() {
            if last_x == x {
                *self.levels.last_mut().unwrap() = level;
                self.merge_tail();
                return;
            }
        }
        if self.levels.last().copied().unwrap_or(0) == level {
            return;
        }
        self.breakpoints.push(x);
        self.levels.push(level);
    }

    fn merge_tail(&mut self) {
        let n = self.levels.len();
        let before = if n >= 2 { self.levels[n - 2] } else { 0 };
        if n >= 1 && self.levels[n - 1] == before {
            self.levels.pop();
            self.breakpoints.pop();
        }
    }

    /// Value of `N_x` at `x`.
    pub fn level_at(&self, x: f64) -> u64 {
        match self.breakpoints.partition_point(|&b| b <= x) {
            0 => 0,
            k => self.levels[k - 1],
        }
    }

    /// `∫ N_x dx`.
    pub fn integral(&self) -> f64 {
        self.breakpoints
            .windows(2)
            .zip(&self.levels)
            .map(|(w, &l)| l as f64 * (w[1] - w[0]))
            .sum()
    }

    /// Maximal intervals on which `N_x > 0`.
    pub fn busy_cycles(&self) -> Vec<(f64, f64)> {
        let mut cycles = Vec::new();
        let mut start = None;
        for (&x, &l) in self.breakpoints.iter().zip(&self.levels) {
            match (start, l > 0) {
                (None, true) => start = Some(x),
                (Some(a), false) => {
                    cycles.push((a, x));
                    start = None;
                }
                _ => {}
            }
        }
        cycles
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merges_and_integrates() {
        let mut p = QueueProfile::default();
        p.push(1.0, 1);
        p.push(2.0, 2);
        p.push(3.0, 2);
        p.push(3.0, 1);
        p.push(4.0, 0);
        assert_eq!(p.breakpoints, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(p.levels, vec![1, 2, 1, 0]);
        assert_eq!(p.integral(), 1.0 + 2.0 + 1.0);
        assert_eq!(p.busy_cycles(), vec![(1.0, 4.0)]);
        assert_eq!(p.level_at(0.5), 0);
        assert_eq!(p.level_at(2.5), 2);
        assert_eq!(p.level_at(10.0), 0);
    }

    #[test]
    fn coincident_breakpoint_collapses() {
        let mut p = QueueProfile::default();
        p.push(1.0, 1);
        p.push(2.0, 0);
        p.push(2.0, 1);
        assert_eq!(p.levels, vec![1]);
        assert_eq!(p.breakpoints, vec![1.0]);
    }
}
