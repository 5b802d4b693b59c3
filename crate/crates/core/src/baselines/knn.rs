use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::data::{MinMaxScaler, RadioMap};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnConfig {
    pub k: usize,
    /// Inverse-distance weighting of the neighbours' coordinates.
    pub weighted: bool,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self { k: 3, weighted: true }
    }
}

fn euclidean(a: ArrayView1<'_, f64>, b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Position estimate from the `k` fingerprints of `rm` nearest to `query`.
///
/// Distances are Euclidean in whatever RSS space `rm` and `query` share. Ties
/// are broken by the lower RP index. In weighted mode a zero-distance match
/// returns that RP's coordinates directly.
pub fn knn_predict(rm: &RadioMap, query: &[f64], cfg: &KnnConfig) -> Result<Vec<f64>> {
    if rm.is_empty() {
        return Err(Error::invalid("kNN needs a non-empty radio map"));
    }
    if query.len() != rm.n_ap() {
        return Err(Error::invalid(format!(
            "query has {} values, radio map has {} APs",
            query.len(),
            rm.n_ap()
        )));
    }
    if cfg.k == 0 || cfg.k > rm.n_rp() {
        return Err(Error::invalid(format!("k = {} must lie in 1..={}", cfg.k, rm.n_rp())));
    }

    // Bounded insertion keeps the k best (distance, index) pairs in order.
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(cfg.k + 1);
    for i in 0..rm.n_rp() {
        let d = euclidean(rm.rss_row(i), query);
        if best.len() == cfg.k && d >= best[cfg.k - 1].0 {
            continue;
        }
        let pos = best.partition_point(|&(bd, _)| bd <= d);
        best.insert(pos, (d, i));
        best.truncate(cfg.k);
    }

    let dim = rm.dim();
    if cfg.weighted && best[0].0 == 0.0 {
        return Ok(rm.coord_row(best[0].1).to_vec());
    }
    let mut out = vec![0.0; dim];
    let mut total = 0.0;
    for &(d, i) in &best {
        let w = if cfg.weighted { 1.0 / d } else { 1.0 };
        for (o, c) in out.iter_mut().zip(rm.coord_row(i)) {
            *o += w * c;
        }
        total += w;
    }
    out.iter_mut().for_each(|o| *o /= total);
    Ok(out)
}

/// kNN over min-max normalized fingerprints.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnPositioner {
    pub config: KnnConfig,
    pub scaler: MinMaxScaler,
    normalized: RadioMap,
}

impl KnnPositioner {
    /// Fit the normalization on `rm` itself.
    pub fn fit(rm: &RadioMap, config: KnnConfig) -> Result<Self> {
        let scaler = MinMaxScaler::fit(rm.rss().view())?;
        Self::with_scaler(rm, config, scaler)
    }

    /// Use an externally fitted normalization, e.g. to compare two radio maps
    /// in the same input space.
    pub fn with_scaler(rm: &RadioMap, config: KnnConfig, scaler: MinMaxScaler) -> Result<Self> {
        let normalized = RadioMap::new(
            rm.coords().clone(),
            scaler.apply(rm.rss().view())?,
            rm.ap_ids().to_vec(),
        )?;
        Ok(Self {
            config,
            scaler,
            normalized,
        })
    }

    pub fn predict(&self, rss_dbm: &[f64]) -> Result<Vec<f64>> {
        let q = self.scaler.apply_row(rss_dbm)?;
        knn_predict(&self.normalized, &q, &self.config)
    }

    pub fn predict_batch(&self, rss_dbm: &Array2<f64>) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((rss_dbm.nrows(), self.normalized.dim()));
        for (i, row) in rss_dbm.rows().into_iter().enumerate() {
            let p = self.predict(&row.to_vec())?;
            out.row_mut(i).assign(&ArrayView1::from(&p));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn rm(coords: Array2<f64>, rss: Array2<f64>) -> RadioMap {
        let n = rss.ncols();
        RadioMap::new(coords, rss, RadioMap::default_ap_ids(n)).unwrap()
    }

    #[test]
    fn exact_match_k1() {
        let m = rm(array![[0.0, 0.0], [5.0, 1.0]], array![[0.2, 0.4], [0.9, 0.1]]);
        let p = knn_predict(&m, &[0.9, 0.1], &KnnConfig { k: 1, weighted: false }).unwrap();
        assert_eq!(p, vec![5.0, 1.0]);
    }

    #[test]
    fn weighted_two_neighbours() {
        // Query at the origin of a 1-AP RSS space; RPs at RSS distance 1 and 3.
        let m = rm(array![[0.0, 0.0], [2.0, 0.0]], array![[1.0], [3.0]]);
        let p = knn_predict(&m, &[0.0], &KnnConfig { k: 2, weighted: true }).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12);
        assert_eq!(p[1], 0.0);
    }

    #[test]
    fn weighted_zero_distance_short_circuits() {
        let m = rm(array![[1.0, 1.0], [4.0, 4.0], [9.0, 9.0]], array![[0.5], [0.5], [0.7]]);
        let p = knn_predict(&m, &[0.5], &KnnConfig { k: 3, weighted: true }).unwrap();
        assert_eq!(p, vec![1.0, 1.0]);
    }

    #[test]
    fn ties_prefer_lower_index() {
        let m = rm(array![[1.0, 0.0], [2.0, 0.0], [3.0, 0.0]], array![[0.4], [0.6], [0.4]]);
        let p = knn_predict(&m, &[0.5], &KnnConfig { k: 1, weighted: false }).unwrap();
        assert_eq!(p, vec![1.0, 0.0]);
    }

    #[test]
    fn invalid_inputs() {
        let m = rm(array![[0.0, 0.0]], array![[0.1, 0.2]]);
        assert!(knn_predict(&m, &[0.1], &KnnConfig::default()).is_err());
        assert!(knn_predict(&m, &[0.1, 0.2], &KnnConfig { k: 2, weighted: false }).is_err());
        let empty = rm(Array2::zeros((0, 2)), Array2::zeros((0, 2)));
        assert!(matches!(
            knn_predict(&empty, &[0.1, 0.2], &KnnConfig { k: 1, weighted: false }),
            Err(Error::InvalidArgument(_))
        ));
    }
}
