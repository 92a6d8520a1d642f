//! Mode pruning into clusters.
//!
//! Modes are scanned in data order. A mode joins the first group whose
//! representative lies within one bandwidth (scaled distance ≤ 1), otherwise
//! it founds a new group. A final pass merges groups whose representatives
//! ended up within one bandwidth of each other, so centres are pairwise more
//! than `h` apart.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{KernelProfile, Points};
use crate::math;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representative {
    /// Mean of the member modes.
    Mean,
    /// Member mode minimising the summed distance to the others.
    Medoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSet {
    /// Cluster of each datum.
    pub labels: Vec<usize>,
    pub centers: Points,
    pub sizes: Vec<usize>,
}

impl ClusterSet {
    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    /// Intensity (first coordinate) of cluster `c`.
    pub fn intensity(&self, c: usize) -> f64 {
        self.centers.point(c)[0]
    }
}

#[derive(Debug, Clone)]
struct Group {
    /// Distinct member modes with multiplicities.
    distinct: Vec<(Vec<f64>, usize)>,
    sum: Vec<f64>,
    count: usize,
    rep: Vec<f64>,
}

impl Group {
    fn new(m: &[f64]) -> Self {
        Self {
            distinct: vec![(m.to_vec(), 1)],
            sum: m.to_vec(),
            count: 1,
            rep: m.to_vec(),
        }
    }

    fn add(&mut self, m: &[f64], times: usize) {
        match self.distinct.iter_mut().find(|(v, _)| v == m) {
            Some((_, c)) => *c += times,
            None => self.distinct.push((m.to_vec(), times)),
        }
        for (s, v) in self.sum.iter_mut().zip(m) {
            *s += v * times as f64;
        }
        self.count += times;
    }

    fn refresh<K: KernelProfile + ?Sized>(&mut self, k: &K, rep: Representative) {
        match rep {
            Representative::Mean => {
                let n = self.count as f64;
                self.rep = self.sum.iter().map(|s| s / n).collect();
            }
            Representative::Medoid => {
                let mut best = 0;
                let mut best_cost = f64::INFINITY;
                for (i, (a, _)) in self.distinct.iter().enumerate() {
                    let cost: f64 = self
                        .distinct
                        .iter()
                        .map(|(b, c)| *c as f64 * math::sqrt(k.scaled_dist2(a, b)))
                        .sum();
                    if cost < best_cost {
                        best_cost = cost;
                        best = i;
                    }
                }
                self.rep = self.distinct[best].0.clone();
            }
        }
    }
}

/// Greedy agglomeration of per-datum modes.
pub fn prune_modes<K: KernelProfile + ?Sized>(
    modes: &Points,
    k: &K,
    rep: Representative,
) -> Result<ClusterSet> {
    if k.bandwidths().len() != modes.dim() {
        return Err(Error::LengthMismatch {
            expected: modes.dim(),
            found: k.bandwidths().len(),
        });
    }
    let mut groups: Vec<Group> = Vec::new();
    let mut labels = Vec::with_capacity(modes.len());
    for m in modes.iter() {
        match groups.iter().position(|g| k.scaled_dist2(m, &g.rep) <= 1.0) {
            Some(gi) => {
                groups[gi].add(m, 1);
                groups[gi].refresh(k, rep);
                labels.push(gi);
            }
            None => {
                labels.push(groups.len());
                groups.push(Group::new(m));
            }
        }
    }

    // Merge pass; `alias[g]` is the surviving group of original group g.
    let mut alias: Vec<usize> = (0..groups.len()).collect();
    let mut alive: Vec<bool> = vec![true; groups.len()];
    loop {
        let mut merged = false;
        'scan: for a in 0..groups.len() {
            if !alive[a] {
                continue;
            }
            for b in a + 1..groups.len() {
                if alive[b] && k.scaled_dist2(&groups[a].rep, &groups[b].rep) <= 1.0 {
                    let absorbed = core::mem::take(&mut groups[b].distinct);
                    for (m, c) in absorbed {
                        groups[a].add(&m, c);
                    }
                    groups[a].refresh(k, rep);
                    alive[b] = false;
                    alias.iter_mut().filter(|t| **t == b).for_each(|t| *t = a);
                    merged = true;
                    break 'scan;
                }
            }
        }
        if !merged {
            break;
        }
    }

    let mut new_id = vec![usize::MAX; groups.len()];
    let mut centers = Vec::new();
    let mut sizes = Vec::new();
    for (g, group) in groups.iter().enumerate() {
        if alive[g] {
            new_id[g] = sizes.len();
            centers.extend_from_slice(&group.rep);
            sizes.push(group.count);
        }
    }
    let labels = labels.into_iter().map(|g| new_id[alias[g]]).collect();
    Ok(ClusterSet {
        labels,
        centers: Points::new(modes.dim(), centers)?,
        sizes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modeseek::GaussianKernel;

    #[test]
    fn identical_modes_one_cluster() {
        let m = Points::from_scalars(&[3.0; 9]).unwrap();
        let k = GaussianKernel::new(0.1).unwrap();
        for rep in [Representative::Mean, Representative::Medoid] {
            let c = prune_modes(&m, &k, rep).unwrap();
            assert_eq!(c.sizes, vec![9]);
            assert_eq!(c.labels, vec![0; 9]);
            assert_eq!(c.intensity(0), 3.0);
        }
    }

    #[test]
    fn distance_rule() {
        let h = 0.4;
        let m = Points::from_scalars(&[0.0, h / 2.0, 10.0 * h]).unwrap();
        let k = GaussianKernel::new(h).unwrap();
        let c = prune_modes(&m, &k, Representative::Mean).unwrap();
        assert_eq!(c.sizes, vec![2, 1]);
        assert_eq!(c.labels, vec![0, 0, 1]);
        assert!((c.intensity(0) - h / 4.0).abs() < 1e-15);
    }

    #[test]
    fn drifting_representatives_are_merged() {
        // 0.9 and 0.95 join the group founded by 0 and pull its mean within h
        // of the group founded by 1.5.
        let m = Points::from_scalars(&[0.0, 1.5, 0.9, 0.95]).unwrap();
        let k = GaussianKernel::new(1.0).unwrap();
        let c = prune_modes(&m, &k, Representative::Mean).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.sizes, vec![4]);
        assert!((c.intensity(0) - 0.8375).abs() < 1e-12);
    }

    #[test]
    fn medoid_representative_is_a_member() {
        let m = Points::from_scalars(&[1.0, 1.0, 1.2, 1.3, 5.0]).unwrap();
        let k = GaussianKernel::new(0.5).unwrap();
        let c = prune_modes(&m, &k, Representative::Medoid).unwrap();
        assert_eq!(c.sizes, vec![4, 1]);
        assert_eq!(c.intensity(0), 1.0);
    }
}
