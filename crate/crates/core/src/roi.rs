//! Region-of-interest assignment from pruned clusters.
//!
//! The two largest clusters are the background and the wetted test area;
//! the darker of the two is the ROI. Smaller clusters with an intensity
//! between the two are the blurred edge, anything else is an artefact.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::modeseek::ClusterSet;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Roi,
    Background,
    Edge,
    Artefact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionAssignment {
    pub roi: usize,
    pub background: usize,
    /// ROI intensity clamped to `[0, 100]`.
    pub r_hat: f64,
    /// Role of each cluster. With a single cluster it is reported as the
    /// ROI, which is then also the background.
    pub roles: Vec<Role>,
    /// Set when only one cluster exists and the ROI is the whole frame.
    pub single_region: bool,
}

pub fn assign(clusters: &ClusterSet) -> Result<RegionAssignment> {
    let n = clusters.len();
    if n == 0 {
        return Err(Error::Empty("cluster set"));
    }
    // Largest first; equal sizes put the darker cluster first.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        clusters.sizes[b]
            .cmp(&clusters.sizes[a])
            .then(clusters.intensity(a).total_cmp(&clusters.intensity(b)))
    });
    if n == 1 {
        return Ok(RegionAssignment {
            roi: 0,
            background: 0,
            r_hat: clusters.intensity(0).clamp(0.0, 100.0),
            roles: alloc::vec![Role::Roi],
            single_region: true,
        });
    }
    let (a, b) = (order[0], order[1]);
    let (roi, background) = if clusters.intensity(a) <= clusters.intensity(b) {
        (a, b)
    } else {
        (b, a)
    };
    let lo = clusters.intensity(roi);
    let hi = clusters.intensity(background);
    let roles = (0..n)
        .map(|c| {
            if c == roi {
                Role::Roi
            } else if c == background {
                Role::Background
            } else if (lo..=hi).contains(&clusters.intensity(c)) {
                Role::Edge
            } else {
                Role::Artefact
            }
        })
        .collect();
    Ok(RegionAssignment {
        roi,
        background,
        r_hat: lo.clamp(0.0, 100.0),
        roles,
        single_region: false,
    })
}
