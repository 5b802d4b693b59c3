//! Synthetic indoor RSS testbed: random AP placement, log-distance path loss
//! with Gaussian shadowing, grid site surveys and off-grid test points.

use std::path::Path;

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{RadioMap, TestSet, DEFAULT_SENTINEL};
use crate::{seeded_rng, Error, Result, Rng};

const PLACEMENT_STREAM: u64 = 4;
const SURVEY_STREAM: u64 = 5;

/// Axis-aligned region in metres (2-D or 3-D).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Bounds {
    pub fn new(min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        let b = Self { min, max };
        b.validate()?;
        Ok(b)
    }

    pub fn rect(width: f64, height: f64) -> Result<Self> {
        Self::new(vec![0.0, 0.0], vec![width, height])
    }

    pub fn validate(&self) -> Result<()> {
        if self.min.len() != self.max.len() || !(2..=3).contains(&self.min.len()) {
            return Err(Error::invalid("bounds must be 2-D or 3-D"));
        }
        if !self
            .min
            .iter()
            .zip(&self.max)
            .all(|(lo, hi)| lo.is_finite() && hi.is_finite() && hi > lo)
        {
            return Err(Error::invalid("bounds are degenerate"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim() && p.iter().zip(self.min.iter().zip(&self.max)).all(|(v, (lo, hi))| v >= lo && v <= hi)
    }

    fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        self.min
            .iter()
            .zip(&self.max)
            .map(|(lo, hi)| rng.random_range(*lo..=*hi))
            .collect()
    }
}

/// Propagation parameters shared by all APs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathLossParams {
    /// RSS at the reference distance (dBm).
    pub p0: f64,
    /// Reference distance (m).
    pub d0: f64,
    pub path_loss_exponent: f64,
    /// Shadowing standard deviation (dB).
    pub shadow_sigma: f64,
    /// Readings below this level (dBm) are reported as `sentinel`.
    pub rss_floor: f64,
    pub sentinel: f64,
}

impl Default for PathLossParams {
    fn default() -> Self {
        Self {
            p0: -40.0,
            d0: 1.0,
            path_loss_exponent: 2.5,
            shadow_sigma: 4.0,
            rss_floor: -95.0,
            sentinel: DEFAULT_SENTINEL,
        }
    }
}

impl PathLossParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.p0, self.d0, self.path_loss_exponent, self.shadow_sigma, self.rss_floor, self.sentinel]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("path-loss parameters must be finite"));
        }
        if self.path_loss_exponent <= 0.0 || self.d0 <= 0.0 || self.shadow_sigma < 0.0 {
            return Err(Error::invalid("need path_loss_exponent > 0, d0 > 0 and shadow_sigma >= 0"));
        }
        if self.rss_floor > self.p0 {
            return Err(Error::invalid("rss_floor must not exceed p0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub bounds: Bounds,
    pub ap_positions: Vec<Vec<f64>>,
    pub params: PathLossParams,
}

/// Place `n_aps` APs uniformly at random inside `bounds`.
pub fn make_environment(n_aps: usize, bounds: Bounds, params: PathLossParams, rng: &mut Rng) -> Result<Environment> {
    if n_aps == 0 {
        return Err(Error::invalid("an environment needs at least one AP"));
    }
    bounds.validate()?;
    params.validate()?;
    let ap_positions = (0..n_aps).map(|_| bounds.sample(rng)).collect();
    Ok(Environment {
        bounds,
        ap_positions,
        params,
    })
}

impl Environment {
    pub fn n_aps(&self) -> usize {
        self.ap_positions.len()
    }

    /// Noiseless log-distance RSS (dBm) at distance `d`, before the floor rule.
    pub fn mean_rss(&self, d: f64) -> f64 {
        let p = &self.params;
        p.p0 - 10.0 * p.path_loss_exponent * (d.max(p.d0) / p.d0).log10()
    }

    /// Fingerprint at `position`; shadowing is drawn independently per AP and
    /// reading when `rng` is given.
    pub fn rss_at(&self, position: &[f64], rng: Option<&mut Rng>) -> Result<Vec<f64>> {
        if position.len() != self.bounds.dim() {
            return Err(Error::invalid("position dimension does not match the environment"));
        }
        let p = &self.params;
        let shadow = Normal::new(0.0, p.shadow_sigma).map_err(|e| Error::invalid(e.to_string()))?;
        let mut rng = rng;
        Ok(self
            .ap_positions
            .iter()
            .map(|ap| {
                let d = ap.iter().zip(position).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                let mut v = self.mean_rss(d);
                if let Some(r) = rng.as_deref_mut() {
                    v += shadow.sample(r);
                }
                if v < p.rss_floor {
                    p.sentinel
                } else {
                    v
                }
            })
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let env: Self = serde_json::from_str(text)?;
        env.bounds.validate()?;
        env.params.validate()?;
        if env.ap_positions.is_empty() || env.ap_positions.iter().any(|p| p.len() != env.bounds.dim()) {
            return Err(Error::invalid("AP positions do not match the bounds"));
        }
        Ok(env)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyConfig {
    pub grid_spacing: f64,
    pub samples_per_rp: usize,
    /// Number of uniformly drawn test points.
    pub n_test: usize,
    pub seed: u64,
}

impl Default for SurveyConfig {
    fn default() -> Self {
        Self {
            grid_spacing: 1.0,
            samples_per_rp: 1,
            n_test: 200,
            seed: 0,
        }
    }
}

/// Grid of RPs covering `bounds`: `floor(span / spacing) + 1` points per axis.
pub fn grid_points(bounds: &Bounds, spacing: f64) -> Result<Vec<Vec<f64>>> {
    bounds.validate()?;
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(Error::invalid("grid_spacing must be positive"));
    }
    let counts: Vec<usize> = bounds
        .min
        .iter()
        .zip(&bounds.max)
        .map(|(lo, hi)| ((hi - lo) / spacing + 1e-9).floor() as usize + 1)
        .collect();
    let total: usize = counts.iter().product();
    let mut points = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rem = flat;
        let mut p = vec![0.0; counts.len()];
        for axis in (0..counts.len()).rev() {
            p[axis] = bounds.min[axis] + (rem % counts[axis]) as f64 * spacing;
            rem /= counts[axis];
        }
        points.push(p);
    }
    Ok(points)
}

/// Survey the grid (with shadowing, `samples_per_rp` rows per point) and draw
/// the test set, all from `cfg.seed`.
pub fn generate_survey(env: &Environment, cfg: &SurveyConfig) -> Result<(RadioMap, TestSet)> {
    if cfg.samples_per_rp == 0 {
        return Err(Error::invalid("samples_per_rp must be at least 1"));
    }
    let grid = grid_points(&env.bounds, cfg.grid_spacing)?;
    let dim = env.bounds.dim();
    let n_ap = env.n_aps();
    let mut rng = seeded_rng(cfg.seed, SURVEY_STREAM);

    let n_rp = grid.len() * cfg.samples_per_rp;
    let mut coords = Array2::zeros((n_rp, dim));
    let mut rss = Array2::zeros((n_rp, n_ap));
    let mut i = 0;
    for p in &grid {
        for _ in 0..cfg.samples_per_rp {
            coords.row_mut(i).assign(&ndarray::ArrayView1::from(p.as_slice()));
            rss.row_mut(i).assign(&ndarray::Array1::from(env.rss_at(p, Some(&mut rng))?));
            i += 1;
        }
    }
    let ids = RadioMap::default_ap_ids(n_ap);
    let rm = RadioMap::new(coords, rss, ids.clone())?;

    let mut t_coords = Array2::zeros((cfg.n_test, dim));
    let mut t_rss = Array2::zeros((cfg.n_test, n_ap));
    for k in 0..cfg.n_test {
        let p = env.bounds.sample(&mut rng);
        t_rss.row_mut(k).assign(&ndarray::Array1::from(env.rss_at(&p, Some(&mut rng))?));
        t_coords.row_mut(k).assign(&ndarray::Array1::from(p));
    }
    let test = RadioMap::new(t_coords, t_rss, ids)?;
    Ok((rm, test))
}

/// Complete synthetic scenario description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub bounds: Bounds,
    pub n_aps: usize,
    pub params: PathLossParams,
    pub grid_spacing: f64,
    pub samples_per_rp: usize,
    pub n_test: usize,
}

impl Default for Scenario {
    /// 20 m × 40 m floor, 12 APs, 1 m grid (861 RPs), 200 test points.
    fn default() -> Self {
        Self {
            bounds: Bounds {
                min: vec![0.0, 0.0],
                max: vec![20.0, 40.0],
            },
            n_aps: 12,
            params: PathLossParams::default(),
            grid_spacing: 1.0,
            samples_per_rp: 1,
            n_test: 200,
        }
    }
}

/// Build the environment and survey for `scenario` from one master seed.
pub fn simulate(scenario: &Scenario, seed: u64) -> Result<(Environment, RadioMap, TestSet)> {
    let env = make_environment(
        scenario.n_aps,
        scenario.bounds.clone(),
        scenario.params.clone(),
        &mut seeded_rng(seed, PLACEMENT_STREAM),
    )?;
    let cfg = SurveyConfig {
        grid_spacing: scenario.grid_spacing,
        samples_per_rp: scenario.samples_per_rp,
        n_test: scenario.n_test,
        seed,
    };
    let (rm, test) = generate_survey(&env, &cfg)?;
    Ok((env, rm, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(n: usize) -> Environment {
        make_environment(n, Bounds::rect(10.0, 10.0).unwrap(), PathLossParams::default(), &mut seeded_rng(1, 0)).unwrap()
    }

    #[test]
    fn aps_inside_bounds() {
        let e = env(8);
        assert_eq!(e.n_aps(), 8);
        assert!(e.ap_positions.iter().all(|p| e.bounds.contains(p)));
        assert_eq!(env(8), e);
    }

    #[test]
    fn zero_aps_or_flat_bounds_rejected() {
        let b = Bounds::rect(1.0, 1.0).unwrap();
        assert!(make_environment(0, b, PathLossParams::default(), &mut seeded_rng(0, 0)).is_err());
        assert!(Bounds::rect(0.0, 1.0).is_err());
    }

    #[test]
    fn reference_distance_and_formula() {
        let mut e = env(1);
        e.params.path_loss_exponent = 2.0;
        assert_eq!(e.mean_rss(1.0), -40.0);
        assert!((e.mean_rss(10.0) + 60.0).abs() < 1e-12);
        assert_eq!(e.mean_rss(0.0), -40.0);
        assert!(e.mean_rss(3.0) > e.mean_rss(3.5));
    }

    #[test]
    fn floor_maps_to_sentinel() {
        let mut e = env(1);
        e.ap_positions = vec![vec![0.0, 0.0]];
        e.params.rss_floor = -50.0;
        assert_eq!(e.rss_at(&[9.0, 9.0], None).unwrap(), vec![DEFAULT_SENTINEL]);
        assert_eq!(e.rss_at(&[0.5, 0.0], None).unwrap(), vec![-40.0]);
    }

    #[test]
    fn grid_counts() {
        let b = Bounds::rect(4.0, 4.0).unwrap();
        assert_eq!(grid_points(&b, 1.0).unwrap().len(), 25);
        let e = make_environment(3, b, PathLossParams::default(), &mut seeded_rng(0, 0)).unwrap();
        let cfg = SurveyConfig {
            samples_per_rp: 3,
            n_test: 5,
            ..SurveyConfig::default()
        };
        let (rm, test) = generate_survey(&e, &cfg).unwrap();
        assert_eq!(rm.n_rp(), 75);
        assert_eq!(test.n_rp(), 5);
        let (rm2, test2) = generate_survey(&e, &cfg).unwrap();
        assert_eq!((rm, test), (rm2, test2));
    }

    #[test]
    fn default_scenario_size() {
        let (env, rm, test) = simulate(&Scenario::default(), 0).unwrap();
        assert_eq!(env.n_aps(), 12);
        assert_eq!(rm.n_rp(), 21 * 41);
        assert_eq!(test.n_rp(), 200);
        let floor = env.params.rss_floor;
        assert!(rm.rss().iter().all(|&v| v >= floor || v == DEFAULT_SENTINEL));
    }

    #[test]
    fn environment_json_round_trip() {
        let e = env(4);
        assert_eq!(Environment::from_json(&e.to_json().unwrap()).unwrap(), e);
    }
}
