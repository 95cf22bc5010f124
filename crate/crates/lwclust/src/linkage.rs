//! Linkage schemes and the cluster-distance update recurrence.
//!
//! All six schemes share one update rule. When clusters `i` and `j` merge,
//! the distance from any other cluster `k` to the union is
//!
//! ```text
//! d(k, i+j) = alpha_i * d(k, i) + alpha_j * d(k, j)
//!           + beta * d(i, j) + gamma * |d(k, i) - d(k, j)|
//! ```
//!
//! with scheme-specific coefficients, some of which depend on the member
//! counts `n_i`, `n_j`, `n_k` of the clusters involved.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// The rule used to measure distance between clusters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LinkageScheme {
    /// Distance between the closest members of the two clusters.
    Single,
    /// Distance between the furthest members of the two clusters.
    Complete,
    /// Mean of all member-pair distances (UPGMA).
    GroupAverage,
    /// Unweighted mean of the two cluster distances (WPGMA).
    WeightedAverage,
    /// Distance between cluster centroids.
    ///
    /// Merge heights may decrease across iterations under this scheme
    /// (inversions); they are recorded as computed.
    Centroid,
    /// Ward's minimum-variance criterion.
    ///
    /// The recurrence is applied to the supplied distances verbatim; feed it
    /// squared Euclidean distances to get the textbook Ward behaviour.
    Ward,
}

impl LinkageScheme {
    pub const ALL: [LinkageScheme; 6] = [
        LinkageScheme::Single,
        LinkageScheme::Complete,
        LinkageScheme::GroupAverage,
        LinkageScheme::WeightedAverage,
        LinkageScheme::Centroid,
        LinkageScheme::Ward,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LinkageScheme::Single => "single",
            LinkageScheme::Complete => "complete",
            LinkageScheme::GroupAverage => "average",
            LinkageScheme::WeightedAverage => "weighted",
            LinkageScheme::Centroid => "centroid",
            LinkageScheme::Ward => "ward",
        }
    }
}

impl fmt::Display for LinkageScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LinkageScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "single" => Ok(LinkageScheme::Single),
            "complete" => Ok(LinkageScheme::Complete),
            "average" => Ok(LinkageScheme::GroupAverage),
            "weighted" => Ok(LinkageScheme::WeightedAverage),
            "centroid" => Ok(LinkageScheme::Centroid),
            "ward" => Ok(LinkageScheme::Ward),
            _ => Err(Error::Parse {
                line: 0,
                message: format!(
                    "unknown scheme '{s}'; expected one of single, complete, average, weighted, centroid, ward"
                ),
            }),
        }
    }
}

/// The `(alpha_i, alpha_j, beta, gamma)` tuple of the update recurrence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkageCoefficients {
    pub alpha_i: f64,
    pub alpha_j: f64,
    pub beta: f64,
    pub gamma: f64,
}

/// Coefficients for a scheme given the cluster sizes at merge time.
///
/// `n_i` and `n_j` are the member counts of the two merging clusters; `n_k`
/// is the member count of the third cluster whose distance is being updated
/// (ignored by every scheme except Ward). Sizes must be at least 1.
pub fn scheme_coefficients(
    scheme: LinkageScheme,
    n_i: usize,
    n_j: usize,
    n_k: usize,
) -> Result<LinkageCoefficients, Error> {
    if n_i == 0 || n_j == 0 || n_k == 0 {
        return Err(Error::ZeroClusterSize);
    }
    Ok(coefficients_unchecked(scheme, n_i, n_j, n_k))
}

#[inline]
pub(crate) fn coefficients_unchecked(
    scheme: LinkageScheme,
    n_i: usize,
    n_j: usize,
    n_k: usize,
) -> LinkageCoefficients {
    debug_assert!(n_i >= 1 && n_j >= 1 && n_k >= 1);
    match scheme {
        LinkageScheme::Single => LinkageCoefficients {
            alpha_i: 0.5,
            alpha_j: 0.5,
            beta: 0.0,
            gamma: -0.5,
        },
        LinkageScheme::Complete => LinkageCoefficients {
            alpha_i: 0.5,
            alpha_j: 0.5,
            beta: 0.0,
            gamma: 0.5,
        },
        LinkageScheme::WeightedAverage => LinkageCoefficients {
            alpha_i: 0.5,
            alpha_j: 0.5,
            beta: 0.0,
            gamma: 0.0,
        },
        LinkageScheme::GroupAverage => {
            let sum = (n_i + n_j) as f64;
            LinkageCoefficients {
                alpha_i: n_i as f64 / sum,
                alpha_j: n_j as f64 / sum,
                beta: 0.0,
                gamma: 0.0,
            }
        }
        LinkageScheme::Centroid => {
            let sum = (n_i + n_j) as f64;
            LinkageCoefficients {
                alpha_i: n_i as f64 / sum,
                alpha_j: n_j as f64 / sum,
                beta: -((n_i * n_j) as f64) / (sum * sum),
                gamma: 0.0,
            }
        }
        LinkageScheme::Ward => {
            let total = (n_i + n_j + n_k) as f64;
            LinkageCoefficients {
                alpha_i: (n_i + n_k) as f64 / total,
                alpha_j: (n_j + n_k) as f64 / total,
                beta: -(n_k as f64) / total,
                gamma: 0.0,
            }
        }
    }
}

/// The update recurrence itself.
///
/// `d_ki` and `d_kj` are the current distances from cluster `k` to the two
/// merging clusters; `d_ij` is the merge distance. With Complete coefficients
/// the result is `max(d_ki, d_kj)`; with Single coefficients, the minimum.
#[inline]
pub fn lw_update(d_ki: f64, d_kj: f64, d_ij: f64, coefficients: &LinkageCoefficients) -> f64 {
    coefficients.alpha_i * d_ki
        + coefficients.alpha_j * d_kj
        + coefficients.beta * d_ij
        + coefficients.gamma * (d_ki - d_kj).abs()
}
