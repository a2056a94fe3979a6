use serde::{Deserialize, Serialize};

use super::{run_replications, SimOptions};
use crate::error::{Error, Result};
use crate::grid::Capacities;
use crate::scenario::ExperimentConfig;

/// Grid and capacity rule for [`storage_requirement_search`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StorageSearch {
    /// First probed capacity; also the lattice spacing of the bisection.
    pub resolution_mwh: f64,
    pub max_e_max_mwh: f64,
    /// Charge and discharge limits as a fraction of `e_max`.
    pub rate_fraction: f64,
}

impl Default for StorageSearch {
    fn default() -> Self {
        Self {
            resolution_mwh: 0.5,
            max_e_max_mwh: 512.0,
            rate_fraction: 0.25,
        }
    }
}

/// One evaluated capacity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub e_max_mwh: f64,
    pub mean_cost: f64,
    pub standard_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub n_mgs: usize,
    pub target: f64,
    /// `None` when no probed capacity meets the target.
    pub required_e_max_mwh: Option<f64>,
    /// Probes sorted by capacity.
    pub probes: Vec<Probe>,
    /// Whether cost was non-increasing in capacity within 3 standard errors.
    pub monotone: bool,
    pub replications: usize,
}

impl SearchOutcome {
    pub fn into_result(self) -> Result<f64> {
        match self.required_e_max_mwh {
            Some(e) => Ok(e),
            None => {
                let best = self
                    .probes
                    .iter()
                    .min_by(|a, b| a.mean_cost.total_cmp(&b.mean_cost))
                    .copied();
                Err(Error::Unreachable {
                    target: self.target,
                    best: best.map_or(f64::NAN, |p| p.mean_cost),
                    e_max: best.map_or(f64::NAN, |p| p.e_max_mwh),
                })
            }
        }
    }
}

/// Smallest capacity on a doubling-then-bisection lattice whose mean
/// normalized cost is at most `target`.
///
/// Every probe reuses the config seed, so capacities are compared on common
/// random numbers. If the probed costs are not monotone within noise the
/// search is repeated once with twice the replications.
pub fn storage_requirement_search(
    template: &ExperimentConfig,
    n_mgs: usize,
    target: f64,
    search: &StorageSearch,
    options: &SimOptions,
) -> Result<SearchOutcome> {
    if !(search.resolution_mwh > 0.0 && search.max_e_max_mwh >= search.resolution_mwh) {
        return Err(Error::validation("search", "need 0 < resolution <= max capacity"));
    }
    if !(search.rate_fraction > 0.0 && search.rate_fraction < 0.5) {
        return Err(Error::validation("search.rate_fraction", "must lie in (0, 0.5)"));
    }
    if target.is_nan() {
        return Err(Error::validation("target", "must be a number"));
    }
    let first = search_once(template, n_mgs, target, search, options, template.replications)?;
    if first.monotone {
        return Ok(first);
    }
    search_once(template, n_mgs, target, search, options, 2 * template.replications)
}

fn search_once(
    template: &ExperimentConfig,
    n_mgs: usize,
    target: f64,
    search: &StorageSearch,
    options: &SimOptions,
    replications: usize,
) -> Result<SearchOutcome> {
    let mut probes: Vec<Probe> = Vec::new();
    let mut probe = |e: f64| -> Result<Probe> {
        let rate = e * search.rate_fraction;
        let caps = Capacities::new(e, rate, rate, template.scenario.b_ex_max_mwh)?;
        let mut config = template.clone();
        config.replications = replications;
        config.scenario = template.scenario.with_caps(caps);
        config.scenario.n_mgs = n_mgs;
        if let crate::scenario::Geometry::Fixed { .. } = config.scenario.geometry {
            return Err(Error::validation("scenario.geometry", "search varies n_mgs; use random or no geometry"));
        }
        let set = run_replications(&config, options)?;
        let p = Probe {
            e_max_mwh: e,
            mean_cost: set.mean_cost,
            standard_error: set.standard_error,
        };
        probes.push(p);
        Ok(p)
    };

    let step = search.resolution_mwh;
    let mut found = None;
    let mut lo = step;
    let p = probe(step)?;
    if p.mean_cost <= target {
        found = Some(step);
    } else {
        let mut e = 2.0 * step;
        while e <= search.max_e_max_mwh {
            if probe(e)?.mean_cost <= target {
                found = Some(e);
                break;
            }
            lo = e;
            e *= 2.0;
        }
        if let Some(mut hi) = found {
            loop {
                let steps = ((hi - lo) / step).round() as i64;
                if steps <= 1 {
                    break;
                }
                let mid = lo + (steps / 2) as f64 * step;
                if probe(mid)?.mean_cost <= target {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            found = Some(hi);
        }
    }

    probes.sort_by(|a, b| a.e_max_mwh.total_cmp(&b.e_max_mwh));
    let monotone = probes.windows(2).all(|w| {
        let noise = 3.0 * (w[0].standard_error.powi(2) + w[1].standard_error.powi(2)).sqrt();
        w[1].mean_cost <= w[0].mean_cost + noise
    });
    Ok(SearchOutcome {
        n_mgs,
        target,
        required_e_max_mwh: found,
        probes,
        monotone,
        replications,
    })
}
