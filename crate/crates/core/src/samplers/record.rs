use nalgebra::DMatrix;

/// Trace of one chain: the state after every outer iteration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChainRecord {
    pub samples: Vec<Vec<DMatrix<f64>>>,
    pub accepted: Vec<bool>,
    /// `(H_old, H_new)` per proposal.
    pub hamiltonians: Vec<(f64, f64)>,
    /// Seconds per iteration.
    pub wall_times: Vec<f64>,
    /// Proposals lost to integrator numeric failures (counted as rejections).
    pub failures: u64,
}

impl ChainRecord {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            samples: Vec::with_capacity(n),
            accepted: Vec::with_capacity(n),
            hamiltonians: Vec::with_capacity(n),
            wall_times: Vec::with_capacity(n),
            failures: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn is_consistent(&self) -> bool {
        let n = self.samples.len();
        self.accepted.len() == n
            && self.hamiltonians.len() == n
            && self.wall_times.len() == n
            && self.wall_times.iter().all(|t| *t >= 0.0)
    }

    pub fn acceptance_rate(&self) -> Option<f64> {
        if self.accepted.is_empty() {
            return None;
        }
        let k = self.accepted.iter().filter(|a| **a).count();
        Some(k as f64 / self.accepted.len() as f64)
    }

    pub fn total_time(&self) -> f64 {
        self.wall_times.iter().sum()
    }

    /// Drops the first `n_burn` iterations.
    pub fn after_burn(&self, n_burn: usize) -> ChainRecord {
        let k = n_burn.min(self.len());
        ChainRecord {
            samples: self.samples[k..].to_vec(),
            accepted: self.accepted[k..].to_vec(),
            hamiltonians: self.hamiltonians[k..].to_vec(),
            wall_times: self.wall_times[k..].to_vec(),
            failures: self.failures,
        }
    }

    /// Keeps every `every`-th iteration, starting with the `every`-th.
    pub fn thinned(&self, every: usize) -> ChainRecord {
        let every = every.max(1);
        let pick = |i: usize| (i + 1).is_multiple_of(every);
        ChainRecord {
            samples: self
                .samples
                .iter()
                .enumerate()
                .filter(|(i, _)| pick(*i))
                .map(|(_, s)| s.clone())
                .collect(),
            accepted: self
                .accepted
                .iter()
                .enumerate()
                .filter(|(i, _)| pick(*i))
                .map(|(_, a)| *a)
                .collect(),
            hamiltonians: self
                .hamiltonians
                .iter()
                .enumerate()
                .filter(|(i, _)| pick(*i))
                .map(|(_, h)| *h)
                .collect(),
            wall_times: self
                .wall_times
                .iter()
                .enumerate()
                .filter(|(i, _)| pick(*i))
                .map(|(_, t)| *t)
                .collect(),
            failures: self.failures,
        }
    }

    /// Per-coordinate series over the flattened (column-major) entries of
    /// every group, after mapping each sample through `map`.
    pub fn coordinate_traces<F>(&self, map: F) -> Vec<Vec<f64>>
    where
        F: Fn(&[DMatrix<f64>]) -> Vec<DMatrix<f64>>,
    {
        let mut traces: Vec<Vec<f64>> = Vec::new();
        for (t, s) in self.samples.iter().enumerate() {
            let mapped = map(s);
            let flat: Vec<f64> = mapped.iter().flat_map(|m| m.iter().copied()).collect();
            if t == 0 {
                traces = flat
                    .iter()
                    .map(|_| Vec::with_capacity(self.len()))
                    .collect();
            }
            for (tr, v) in traces.iter_mut().zip(flat) {
                tr.push(v);
            }
        }
        traces
    }

    /// Same record ignoring wall times, for determinism checks.
    pub fn same_draws(&self, other: &ChainRecord) -> bool {
        self.samples == other.samples
            && self.accepted == other.accepted
            && self
                .hamiltonians
                .iter()
                .zip(&other.hamiltonians)
                .all(|(a, b)| a.0.to_bits() == b.0.to_bits() && a.1.to_bits() == b.1.to_bits())
            && self.hamiltonians.len() == other.hamiltonians.len()
            && self.failures == other.failures
    }
}
