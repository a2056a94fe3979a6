//! Grid geometry, prices, excess-energy arrivals, and experiment configuration.
//!
//! Randomness is ChaCha8 throughout. A master seed fans out into
//! independent streams per replication and purpose, see [`substream`].

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analytics::ExcessPmf;
use crate::error::{Error, Result};
use crate::grid::{Capacities, GridScenario, Point, PriceTable, SlotExogenous};

/// What a random stream is used for. Each purpose gets its own ChaCha
/// stream so that, for example, arrivals do not shift when the controller
/// draws more or fewer numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamPurpose {
    Geometry = 0,
    Arrivals = 1,
    Controller = 2,
}

/// Independent generator for `(seed, replication, purpose)`.
pub fn substream(seed: u64, replication: u64, purpose: StreamPurpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication.wrapping_mul(4).wrapping_add(purpose as u64));
    rng
}

/// Law of the signed per-slot excess `X̃_i = X_i − L_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArrivalSpec {
    /// Integer multiples of `unit_mwh` drawn from `pmf`.
    Discrete { pmf: ExcessPmf, unit_mwh: f64 },
    /// Zero-mean normal restricted to `[lower_mw, upper_mw]`.
    TruncatedNormal {
        /// Standard deviation, or variance when `sigma_is_variance` is set.
        sigma_mw: f64,
        lower_mw: f64,
        upper_mw: f64,
        #[serde(default)]
        sigma_is_variance: bool,
        /// Weight in `[0, 1]` of a factor shared by all MGs; 0 gives
        /// independent MGs.
        #[serde(default)]
        correlation: f64,
    },
}

impl ArrivalSpec {
    /// Truncated normal with standard deviation `sigma` on `[-bound, bound]`.
    pub fn truncated_normal(sigma: f64, bound: f64) -> Self {
        ArrivalSpec::TruncatedNormal {
            sigma_mw: sigma,
            lower_mw: -bound,
            upper_mw: bound,
            sigma_is_variance: false,
            correlation: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ArrivalSpec::Discrete { pmf, unit_mwh } => {
                if !(unit_mwh.is_finite() && *unit_mwh > 0.0) {
                    return Err(Error::validation("arrival.unit_mwh", format!("must be > 0, got {unit_mwh}")));
                }
                let _ = pmf;
            }
            ArrivalSpec::TruncatedNormal {
                sigma_mw,
                lower_mw,
                upper_mw,
                correlation,
                ..
            } => {
                if !(sigma_mw.is_finite() && *sigma_mw > 0.0) {
                    return Err(Error::validation("arrival.sigma_mw", format!("must be > 0, got {sigma_mw}")));
                }
                if !(lower_mw.is_finite() && upper_mw.is_finite() && *lower_mw < 0.0 && *upper_mw > 0.0) {
                    return Err(Error::validation(
                        "arrival.bounds",
                        format!("need lower < 0 < upper, got [{lower_mw}, {upper_mw}]"),
                    ));
                }
                if !(0.0..=1.0).contains(correlation) {
                    return Err(Error::validation(
                        "arrival.correlation",
                        format!("must lie in [0, 1], got {correlation}"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Most negative excess the law can produce.
    pub fn min_excess_mwh(&self) -> f64 {
        match self {
            ArrivalSpec::Discrete { pmf, unit_mwh } => {
                let lowest = pmf.support().find(|(_, p)| *p > 0.0).map_or(0, |(k, _)| k);
                lowest as f64 * unit_mwh
            }
            ArrivalSpec::TruncatedNormal { lower_mw, .. } => *lower_mw,
        }
    }

    fn std_dev(&self) -> f64 {
        match *self {
            ArrivalSpec::TruncatedNormal {
                sigma_mw,
                sigma_is_variance,
                ..
            } => {
                if sigma_is_variance {
                    sigma_mw.sqrt()
                } else {
                    sigma_mw
                }
            }
            ArrivalSpec::Discrete { .. } => 0.0,
        }
    }
}

/// Draws one slot of signed excess for `n` MGs.
///
/// The truncated normal is sampled by rejection: the whole vector is redrawn
/// until every entry lies inside the bounds. With zero correlation this is the
/// same as truncating each MG independently.
pub fn sample_excess<R: Rng + ?Sized>(rng: &mut R, spec: &ArrivalSpec, n: usize) -> Vec<f64> {
    match spec {
        ArrivalSpec::Discrete { pmf, unit_mwh } => {
            (0..n).map(|_| pmf.quantile(rng.random::<f64>()) as f64 * unit_mwh).collect()
        }
        ArrivalSpec::TruncatedNormal {
            lower_mw,
            upper_mw,
            correlation,
            ..
        } => {
            let standard = Normal::new(0.0, 1.0).expect("unit normal");
            let sd = spec.std_dev();
            let shared_weight = correlation.sqrt();
            let own_weight = (1.0 - correlation).sqrt();
            loop {
                let common = if *correlation > 0.0 { standard.sample(rng) } else { 0.0 };
                let draw: Vec<f64> = (0..n)
                    .map(|_| sd * (shared_weight * common + own_weight * standard.sample(rng)))
                    .collect();
                if draw.iter().all(|x| (*lower_mw..=*upper_mw).contains(x)) {
                    return draw;
                }
            }
        }
    }
}

/// Turns a signed excess draw into harvest/load for one slot.
pub fn slot_from_excess(load_mw: &[f64], signed_excess: &[f64]) -> Result<SlotExogenous> {
    let harvest = load_mw.iter().zip(signed_excess).map(|(l, x)| (l + x).max(0.0)).collect();
    let mut exo = SlotExogenous::new(harvest, load_mw.to_vec())?;
    // Keep the split exact rather than round-tripping through L + X̃ − L.
    for (i, x) in signed_excess.iter().enumerate() {
        exo.excess[i] = x.max(0.0);
        exo.deficit[i] = (-x).max(0.0).min(load_mw[i]);
    }
    Ok(exo)
}

/// MG positions i.i.d. uniform on `[0, side]²`.
pub fn sample_snapshot<R: Rng + ?Sized>(rng: &mut R, n: usize, farm_side_km: f64) -> Vec<Point> {
    (0..n)
        .map(|_| Point::new(rng.random::<f64>() * farm_side_km, rng.random::<f64>() * farm_side_km))
        .collect()
}

/// `p_ij = β d_ij` and `q_i = β D_i`, with `D_i` the distance to the macro grid.
pub fn distance_prices(beta: f64, positions: &[Point], macro_position: Point) -> Result<PriceTable> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::validation("beta", format!("must be > 0, got {beta}")));
    }
    let n = positions.len();
    let mut exchange = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                exchange[i * n + j] = beta * positions[i].distance(&positions[j]);
            }
        }
    }
    let macro_price = positions.iter().map(|p| beta * p.distance(&macro_position)).collect();
    PriceTable::new(exchange, macro_price)
}

/// Exchange at `β`, macro grid at `3β`, independent of distance.
pub fn constant_prices(n: usize, beta: f64) -> Result<PriceTable> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::validation("beta", format!("must be > 0, got {beta}")));
    }
    PriceTable::uniform(n, beta, 3.0 * beta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Geometry {
    /// Fresh uniform positions per snapshot.
    RandomFarm {
        #[serde(default = "default_farm_side")]
        farm_side_km: f64,
        #[serde(default = "default_macro_xy")]
        macro_km: [f64; 2],
    },
    Fixed {
        positions_km: Vec<[f64; 2]>,
        macro_km: [f64; 2],
    },
    /// No coordinates; only valid with non-distance pricing.
    None,
}

fn default_farm_side() -> f64 {
    10.0
}

fn default_macro_xy() -> [f64; 2] {
    [20.0, 20.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Pricing {
    Distance { beta_per_km: f64 },
    /// `p = β`, `q = 3β`.
    Constant { beta: f64 },
    Uniform { exchange_price: f64, macro_price: f64 },
}

/// Scenario family; [`ScenarioTemplate::instantiate`] draws one snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioTemplate {
    pub n_mgs: usize,
    pub geometry: Geometry,
    pub pricing: Pricing,
    #[serde(default = "default_load")]
    pub load_mw: f64,
    pub e_max_mwh: f64,
    pub y_max_mwh: f64,
    pub b_s_max_mwh: f64,
    pub b_ex_max_mwh: f64,
    pub arrival: ArrivalSpec,
    /// Same starting level at every MG.
    #[serde(default)]
    pub initial_energy_mwh: f64,
}

fn default_load() -> f64 {
    10.0
}

impl ScenarioTemplate {
    pub fn caps(&self) -> Result<Capacities> {
        Capacities::new(self.e_max_mwh, self.y_max_mwh, self.b_s_max_mwh, self.b_ex_max_mwh)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_mgs == 0 {
            return Err(Error::validation("scenario.n_mgs", "need at least one MG"));
        }
        self.caps()?;
        self.arrival.validate()?;
        match (&self.geometry, &self.pricing) {
            (Geometry::None, Pricing::Distance { .. }) => {
                return Err(Error::validation("scenario.geometry", "distance pricing needs positions"));
            }
            (Geometry::Fixed { positions_km, .. }, _) if positions_km.len() != self.n_mgs => {
                return Err(Error::validation(
                    "scenario.geometry.positions_km",
                    format!("expected {} positions, got {}", self.n_mgs, positions_km.len()),
                ));
            }
            (Geometry::RandomFarm { farm_side_km, .. }, _) if !(farm_side_km.is_finite() && *farm_side_km > 0.0) => {
                return Err(Error::validation("scenario.geometry.farm_side_km", "must be > 0"));
            }
            _ => {}
        }
        match self.pricing {
            Pricing::Distance { beta_per_km: b } | Pricing::Constant { beta: b } if !(b.is_finite() && b > 0.0) => {
                return Err(Error::validation("scenario.pricing.beta", format!("must be > 0, got {b}")));
            }
            Pricing::Uniform {
                exchange_price,
                macro_price,
            } if !(exchange_price >= 0.0 && macro_price >= 0.0 && exchange_price.is_finite() && macro_price.is_finite()) => {
                return Err(Error::validation("scenario.pricing", "prices must be finite and >= 0"));
            }
            _ => {}
        }
        // Sanity-build a snapshot to run the remaining grid checks.
        self.instantiate(&mut ChaCha8Rng::seed_from_u64(0)).map(|_| ())
    }

    /// One grid instance; only random geometry consumes randomness.
    pub fn instantiate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<GridScenario> {
        let n = self.n_mgs;
        let (positions, macro_position) = match &self.geometry {
            Geometry::RandomFarm { farm_side_km, macro_km } => {
                (sample_snapshot(rng, n, *farm_side_km), Some(Point::new(macro_km[0], macro_km[1])))
            }
            Geometry::Fixed { positions_km, macro_km } => (
                positions_km.iter().map(|p| Point::new(p[0], p[1])).collect(),
                Some(Point::new(macro_km[0], macro_km[1])),
            ),
            Geometry::None => (Vec::new(), None),
        };
        let prices = match self.pricing {
            Pricing::Distance { beta_per_km } => {
                let macro_position =
                    macro_position.ok_or_else(|| Error::validation("scenario.geometry", "distance pricing needs positions"))?;
                distance_prices(beta_per_km, &positions, macro_position)?
            }
            Pricing::Constant { beta } => constant_prices(n, beta)?,
            Pricing::Uniform {
                exchange_price,
                macro_price,
            } => PriceTable::uniform(n, exchange_price, macro_price)?,
        };
        let mut scenario = GridScenario::new(prices, vec![self.load_mw; n], self.caps()?, self.arrival.clone())?
            .with_initial_energy(vec![self.initial_energy_mwh; n])?;
        scenario.positions = positions;
        scenario.macro_position = macro_position;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Copy with new capacities.
    pub fn with_caps(&self, caps: Capacities) -> Self {
        Self {
            e_max_mwh: caps.e_max_mwh,
            y_max_mwh: caps.y_max_mwh,
            b_s_max_mwh: caps.b_s_max_mwh,
            b_ex_max_mwh: caps.b_ex_max_mwh,
            initial_energy_mwh: self.initial_energy_mwh.min(caps.e_max_mwh),
            ..self.clone()
        }
    }
}

/// Which controller drives the simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControllerSpec {
    /// Drift-plus-penalty; `v` defaults to the largest admissible weight.
    Lyapunov {
        #[serde(default)]
        v: Option<f64>,
    },
    /// Two-MG probabilistic sharing.
    AlphaPolicy { alpha: f64 },
    /// Greedy store-then-macro baseline without exchange.
    NoCoop,
}

/// A complete, validated experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub horizon_slots: usize,
    #[serde(default = "default_replications")]
    pub replications: usize,
    pub scenario: ScenarioTemplate,
    pub controller: ControllerSpec,
    /// Fraction of the horizon discarded before the steady-state average.
    #[serde(default)]
    pub burn_in_fraction: f64,
    #[serde(default)]
    pub output_dir: Option<String>,
}

fn default_replications() -> usize {
    1
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon_slots == 0 {
            return Err(Error::validation("horizon_slots", "must be >= 1"));
        }
        if self.replications == 0 {
            return Err(Error::validation("replications", "must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.burn_in_fraction) {
            return Err(Error::validation(
                "burn_in_fraction",
                format!("must lie in [0, 1), got {}", self.burn_in_fraction),
            ));
        }
        self.scenario.validate()?;
        match self.controller {
            ControllerSpec::Lyapunov { v: Some(v) } if !(v.is_finite() && v > 0.0) => {
                return Err(Error::validation("controller.v", format!("must be > 0, got {v}")));
            }
            ControllerSpec::AlphaPolicy { alpha } => {
                if !(0.0..=1.0).contains(&alpha) {
                    return Err(Error::validation("controller.alpha", format!("must lie in [0, 1], got {alpha}")));
                }
                if self.scenario.n_mgs != 2 {
                    return Err(Error::validation("controller", "the sharing policy needs exactly 2 MGs"));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Parses and validates a JSON config string.
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        let hash = Sha256::digest(&canonical);
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Reads and validates an experiment config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    ExperimentConfig::from_json(&text)
}
