use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;

use crate::{Error, Result, Rng};

/// RSS value (dBm) standing in for an AP that was not heard.
pub const DEFAULT_SENTINEL: f64 = -100.0;

/// A set of reference points: coordinates (`N_RP × D`, metres) paired with
/// fingerprints (`N_RP × N_AP`, dBm).
#[derive(Debug, Clone, PartialEq)]
pub struct RadioMap {
    coords: Array2<f64>,
    rss: Array2<f64>,
    ap_ids: Vec<String>,
}

/// Test points share the radio-map layout.
pub type TestSet = RadioMap;

impl RadioMap {
    pub fn new(coords: Array2<f64>, rss: Array2<f64>, ap_ids: Vec<String>) -> Result<Self> {
        if coords.nrows() != rss.nrows() {
            return Err(Error::invalid(format!(
                "{} coordinate rows but {} fingerprint rows",
                coords.nrows(),
                rss.nrows()
            )));
        }
        if !(2..=3).contains(&coords.ncols()) {
            return Err(Error::invalid(format!("coordinates must be 2-D or 3-D, got {}", coords.ncols())));
        }
        if rss.ncols() == 0 {
            return Err(Error::invalid("a radio map needs at least one AP"));
        }
        if ap_ids.len() != rss.ncols() {
            return Err(Error::invalid("AP identifier count does not match fingerprint width"));
        }
        if !coords.iter().chain(rss.iter()).all(|v| v.is_finite()) {
            return Err(Error::numeric("radio map contains non-finite values"));
        }
        Ok(Self { coords, rss, ap_ids })
    }

    /// Identifiers `ap_1 .. ap_n`.
    pub fn default_ap_ids(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("ap_{i}")).collect()
    }

    pub fn coords(&self) -> &Array2<f64> {
        &self.coords
    }

    pub fn rss(&self) -> &Array2<f64> {
        &self.rss
    }

    pub fn ap_ids(&self) -> &[String] {
        &self.ap_ids
    }

    pub fn n_rp(&self) -> usize {
        self.coords.nrows()
    }

    pub fn n_ap(&self) -> usize {
        self.rss.ncols()
    }

    pub fn dim(&self) -> usize {
        self.coords.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.n_rp() == 0
    }

    pub fn coord_row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.coords.row(i)
    }

    pub fn rss_row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.rss.row(i)
    }

    /// Rows `rows` in the given order.
    pub fn select(&self, rows: &[usize]) -> RadioMap {
        RadioMap {
            coords: self.coords.select(Axis(0), rows),
            rss: self.rss.select(Axis(0), rows),
            ap_ids: self.ap_ids.clone(),
        }
    }

    pub fn load(path: impl AsRef<Path>, sentinel: f64) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file, path, sentinel)
    }

    /// Parse the CSV layout `x,y[,z],<ap ids...>`. RSS cells that are empty or
    /// unreadable become `sentinel`.
    pub fn read_csv<R: Read>(reader: R, label: &Path, sentinel: f64) -> Result<Self> {
        let parse_err = |line: u64, msg: String| Error::Parse {
            path: label.to_path_buf(),
            line,
            msg,
        };
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut records = rdr.records();
        let header = match records.next() {
            Some(rec) => rec?,
            None => return Err(parse_err(1, "missing header".into())),
        };
        let names: Vec<&str> = header.iter().collect();
        if names.len() < 3 || names[0] != "x" || names[1] != "y" {
            return Err(parse_err(1, "header must start with `x,y`".into()));
        }
        let dim = if names[2] == "z" { 3 } else { 2 };
        let ap_ids: Vec<String> = names[dim..].iter().map(|s| s.to_string()).collect();
        if ap_ids.is_empty() {
            return Err(parse_err(1, "header lists no APs".into()));
        }
        if let Some(bad) = ap_ids.iter().find(|s| s.is_empty()) {
            return Err(parse_err(1, format!("empty AP identifier `{bad}`")));
        }
        let width = names.len();

        let mut coords = Vec::new();
        let mut rss = Vec::new();
        let mut n = 0usize;
        for rec in records {
            let rec = rec?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            if rec.len() == 1 && rec[0].is_empty() {
                continue;
            }
            if rec.len() != width {
                return Err(parse_err(line, format!("expected {width} fields, found {}", rec.len())));
            }
            for (j, cell) in rec.iter().take(dim).enumerate() {
                let v: f64 = cell
                    .parse()
                    .map_err(|_| parse_err(line, format!("bad coordinate `{cell}` in column {}", j + 1)))?;
                if !v.is_finite() {
                    return Err(parse_err(line, format!("non-finite coordinate `{cell}`")));
                }
                coords.push(v);
            }
            for cell in rec.iter().skip(dim) {
                let v = match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => v,
                    _ => sentinel,
                };
                rss.push(v);
            }
            n += 1;
        }
        let n_ap = ap_ids.len();
        let coords = Array2::from_shape_vec((n, dim), coords).expect("row-major coords");
        let rss = Array2::from_shape_vec((n, n_ap), rss).expect("row-major rss");
        Self::new(coords, rss, ap_ids)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let axes = ["x", "y", "z"];
        let mut header: Vec<&str> = axes[..self.dim()].to_vec();
        header.extend(self.ap_ids.iter().map(String::as_str));
        wtr.write_record(&header)?;
        let mut fields = Vec::with_capacity(header.len());
        for i in 0..self.n_rp() {
            fields.clear();
            fields.extend(self.coords.row(i).iter().map(|v| v.to_string()));
            fields.extend(self.rss.row(i).iter().map(|v| v.to_string()));
            wtr.write_record(&fields)?;
        }
        wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

/// Load a radio-map CSV with the default missing-AP sentinel.
pub fn load_radio_map(path: impl AsRef<Path>) -> Result<RadioMap> {
    RadioMap::load(path, DEFAULT_SENTINEL)
}

/// Seeded shuffle, then partition into (training map, test set).
pub fn split(rm: &RadioMap, test_fraction: f64, rng: &mut Rng) -> Result<(RadioMap, TestSet)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid("test_fraction must lie in (0, 1)"));
    }
    let n = rm.n_rp();
    let n_test = ((n as f64) * test_fraction).round() as usize;
    if n_test == 0 || n_test >= n {
        return Err(Error::invalid(format!(
            "test fraction {test_fraction} of {n} rows leaves an empty partition"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let (test, train) = idx.split_at(n_test);
    Ok((rm.select(train), rm.select(test)))
}
