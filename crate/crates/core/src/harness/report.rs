use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Role};
use super::HarnessError;

/// `shares[i] = speeds[i] / sum(speeds)`.
pub fn compute_fair_share(speeds: &[f64]) -> Result<Vec<f64>, HarnessError> {
    if speeds.is_empty() {
        return Err(HarnessError::Config("fair share of an empty group".into()));
    }
    if let Some(s) = speeds.iter().find(|&&s| !(s > 0.0 && s.is_finite())) {
        return Err(HarnessError::Config(format!("speed {s} is not positive")));
    }
    let total: f64 = speeds.iter().sum();
    Ok(speeds.iter().map(|s| s / total).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessReport {
    pub process: usize,
    pub role: Role,
    pub slowdown: u32,
    /// Expected shared accesses per second, `1 / (k * mu)`.
    pub speed: f64,
    pub ops: u64,
    pub fair_share: f64,
    pub attainment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub role: Role,
    pub processes: usize,
    pub throughput: u64,
}

/// Post-run consistency audit of the values that went through the queue.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Audit {
    pub enqueued: u64,
    pub dequeued: u64,
    pub drained: u64,
    /// Values delivered more than once.
    pub duplicates: u64,
    /// Values enqueued but never delivered nor left in the queue.
    pub lost: u64,
    /// Values that were never enqueued.
    pub unknown: u64,
    /// Pairs from one producer seen out of order by one dequeuer.
    pub reordered: u64,
}

impl Audit {
    pub fn is_clean(&self) -> bool {
        self.duplicates == 0 && self.lost == 0 && self.unknown == 0 && self.reordered == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub config: ExperimentConfig,
    pub processes: Vec<ProcessReport>,
    pub groups: Vec<GroupSummary>,
    pub total_throughput: u64,
    pub audit: Audit,
}

impl FairnessReport {
    /// Assemble a report from per-process completion counts, indexed like
    /// the configuration's processes. Processes absent in the configured
    /// mode must have `None`.
    pub fn from_counts(
        config: &ExperimentConfig,
        counts: &[Option<u64>],
        audit: Audit,
    ) -> Result<Self, HarnessError> {
        if counts.len() != config.processes() {
            return Err(HarnessError::Config(format!(
                "{} counts for {} processes",
                counts.len(),
                config.processes()
            )));
        }
        let mu = config.base_delay_us as f64 * 1e-6;
        let mut processes = Vec::new();
        let mut groups = Vec::new();
        for role in [Role::Enqueuer, Role::Dequeuer] {
            let members: Vec<(usize, u64)> = counts
                .iter()
                .enumerate()
                .filter(|&(p, _)| config.role(p) == role)
                .filter_map(|(p, c)| c.map(|c| (p, c)))
                .collect();
            if members.is_empty() {
                continue;
            }
            let speeds: Vec<f64> = members
                .iter()
                .map(|&(p, _)| 1.0 / (config.slowdown_of(p) as f64 * mu))
                .collect();
            let shares = compute_fair_share(&speeds)?;
            let throughput: u64 = members.iter().map(|&(_, c)| c).sum();
            for (i, &(p, ops)) in members.iter().enumerate() {
                let attainment = if throughput == 0 {
                    0.0
                } else {
                    ops as f64 / throughput as f64 / shares[i]
                };
                processes.push(ProcessReport {
                    process: p,
                    role,
                    slowdown: config.slowdown_of(p),
                    speed: speeds[i],
                    ops,
                    fair_share: shares[i],
                    attainment,
                });
            }
            groups.push(GroupSummary {
                role,
                processes: members.len(),
                throughput,
            });
        }
        Ok(FairnessReport {
            config: config.clone(),
            total_throughput: groups.iter().map(|g| g.throughput).sum(),
            processes,
            groups,
            audit,
        })
    }

    pub fn process(&self, id: usize) -> Option<&ProcessReport> {
        self.processes.iter().find(|p| p.process == id)
    }

    pub fn group_throughput(&self, role: Role) -> u64 {
        self.groups
            .iter()
            .find(|g| g.role == role)
            .map_or(0, |g| g.throughput)
    }

    /// Lowest attainment among processes of `role`.
    pub fn min_attainment(&self, role: Role) -> Option<f64> {
        self.processes
            .iter()
            .filter(|p| p.role == role)
            .map(|p| p.attainment)
            .min_by(f64::total_cmp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::queue::Algorithm;

    #[test]
    fn fair_share_arithmetic() {
        assert_eq!(compute_fair_share(&[1.0, 1.0]).unwrap(), vec![0.5, 0.5]);
        let s = compute_fair_share(&[1.0, 0.5]).unwrap();
        assert!((s[0] - 2.0 / 3.0).abs() < 1e-12 && (s[1] - 1.0 / 3.0).abs() < 1e-12);
        assert!(compute_fair_share(&[]).is_err());
        assert!(compute_fair_share(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn harmonic_shares() {
        let speeds: Vec<f64> = (1..=8).map(|i| 1.0 / i as f64).collect();
        let shares = compute_fair_share(&speeds).unwrap();
        let h8: f64 = (1..=8).map(|j| 1.0 / j as f64).sum();
        assert!((shares[7] - 0.125 / h8).abs() < 1e-12);
        assert!((shares[7] - 0.046).abs() < 0.001);
        assert!((shares.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn report_conservation() {
        let cfg = ExperimentConfig::slow_pair(Algorithm::Dnb2, 4);
        let r = FairnessReport::from_counts(
            &cfg,
            &[Some(80), Some(20), Some(50), Some(10)],
            Audit::default(),
        )
        .unwrap();
        assert_eq!(r.group_throughput(Role::Enqueuer), 100);
        assert_eq!(r.group_throughput(Role::Dequeuer), 60);
        assert_eq!(r.total_throughput, 160);
        // fair share of the slow enqueuer is 1/5, it got 1/5
        let slow = r.process(1).unwrap();
        assert!((slow.fair_share - 0.2).abs() < 1e-12);
        assert!((slow.attainment - 1.0).abs() < 1e-12);
        for role in [Role::Enqueuer, Role::Dequeuer] {
            let total = r.group_throughput(role) as f64;
            let frac: f64 = r
                .processes
                .iter()
                .filter(|p| p.role == role)
                .map(|p| p.ops as f64 / total)
                .sum();
            assert!((frac - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn absent_group_is_omitted() {
        let cfg = ExperimentConfig::new(Algorithm::Ms, 2, 2);
        let r =
            FairnessReport::from_counts(&cfg, &[Some(3), Some(3), None, None], Audit::default())
                .unwrap();
        assert_eq!(r.groups.len(), 1);
        assert_eq!(r.processes.len(), 2);
        let zero =
            FairnessReport::from_counts(&cfg, &[Some(0), Some(0), None, None], Audit::default())
                .unwrap();
        assert!(zero.processes.iter().all(|p| p.attainment == 0.0));
    }
}
