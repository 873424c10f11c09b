//! File formats: price and weight CSVs, table and plot CSVs, atomic writes.

use crate::error::CliError;
use growthlab_core::asymptotics::RateRecord;
use growthlab_core::optimize::LogOptimalTable;
use growthlab_core::simplex::{MarketPath, PathKind};
use std::io::{Read, Write};
use std::path::Path;

/// Prices as read from a CSV: one row per date, one column per asset.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    /// Header of the first column (`date`, or `t` for weight files).
    pub index_name: String,
    pub dates: Vec<String>,
    pub names: Vec<String>,
    /// Row-major, `dates.len() × names.len()`.
    pub prices: Vec<f64>,
}

impl PriceSeries {
    pub fn rows(&self) -> usize {
        self.dates.len()
    }

    pub fn assets(&self) -> usize {
        self.names.len()
    }

    /// Market weights `s_i / Σ_j s_j` row by row. A first column named `t`
    /// holding increasing numbers is taken as the time grid; otherwise
    /// rows are numbered `0, 1, …`.
    pub fn to_path(&self) -> Result<MarketPath, CliError> {
        let d = self.assets();
        let mut points = Vec::with_capacity(self.prices.len());
        for row in self.prices.chunks(d) {
            let s: f64 = row.iter().sum();
            points.extend(row.iter().map(|v| v / s));
        }
        let numeric: Option<Vec<f64>> = if self.index_name == "t" {
            self.dates.iter().map(|s| s.trim().parse::<f64>().ok()).collect()
        } else {
            None
        };
        let (kind, times) = match numeric {
            Some(t) if t.iter().enumerate().all(|(i, &v)| v == i as f64) => (PathKind::Discrete, t),
            Some(t) => (PathKind::SampledContinuous, t),
            None => (PathKind::Discrete, (0..self.rows()).map(|i| i as f64).collect()),
        };
        Ok(MarketPath::new(kind, d, times, points)?)
    }
}

/// Reads a price CSV with header `date,<name1>,…,<named>`.
pub fn parse_prices<R: Read>(reader: R) -> Result<PriceSeries, CliError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| CliError::parse(1, 1, e.to_string()))?.clone();
    if header.len() < 3 {
        return Err(CliError::TooFewAssets(header.len().saturating_sub(1)));
    }
    let index_name = header[0].to_string();
    let names: Vec<String> = header.iter().skip(1).map(String::from).collect();
    let mut dates = Vec::new();
    let mut prices = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let row = r + 2;
        let rec = rec.map_err(|e| CliError::parse(row, 1, e.to_string()))?;
        if rec.len() != header.len() {
            return Err(CliError::parse(
                row,
                rec.len().min(header.len()) + 1,
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        dates.push(rec[0].to_string());
        for (c, field) in rec.iter().enumerate().skip(1) {
            let v: f64 = field
                .parse()
                .map_err(|_| CliError::parse(row, c + 1, format!("not a number: {field:?}")))?;
            if !(v > 0.0) || !v.is_finite() {
                return Err(CliError::NonPositivePrice {
                    row,
                    col: c + 1,
                    value: v,
                });
            }
            prices.push(v);
        }
    }
    if dates.len() < 2 {
        return Err(CliError::TooFewRows(dates.len()));
    }
    Ok(PriceSeries {
        index_name,
        dates,
        names,
        prices,
    })
}

/// Reads a price CSV and converts it to a path of market weights.
pub fn ingest_prices(path: &Path) -> Result<(PriceSeries, MarketPath), CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let series = parse_prices(file)?;
    let market = series.to_path()?;
    Ok((series, market))
}

/// Weights CSV `t,w1,…,wd`.
pub fn weights_csv(path: &MarketPath) -> Vec<u8> {
    let mut out = String::from("t");
    for i in 1..=path.dim() {
        out.push_str(&format!(",w{i}"));
    }
    out.push('\n');
    for (t, p) in path.times().iter().zip(path.points()) {
        out.push_str(&t.to_string());
        for v in p {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out.into_bytes()
}

/// Table CSV `x1,…,xd,p1,…,pd,L`.
pub fn table_csv(table: &LogOptimalTable) -> Vec<u8> {
    let d = table.dim;
    let mut head: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    head.extend((1..=d).map(|i| format!("p{i}")));
    head.push("L".into());
    let mut out = head.join(",");
    out.push('\n');
    for ((x, p), l) in table.states.iter().zip(&table.weights).zip(&table.values) {
        let row: Vec<String> = x
            .iter()
            .chain(p.iter())
            .chain(core::iter::once(l))
            .map(|v| v.to_string())
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out.into_bytes()
}

/// Plot data `portfolio,T,rate`: running growth rates at dyadic horizons.
pub fn partials_csv(series: &[(&str, &RateRecord)]) -> Vec<u8> {
    let mut out = String::from("portfolio,T,rate\n");
    for (name, rec) in series {
        for (t, r) in &rec.partials {
            out.push_str(&format!("{name},{t},{r}\n"));
        }
    }
    out.into_bytes()
}

/// Writes `bytes` to a temporary file next to `path` and renames it into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_of(csv: &str) -> MarketPath {
        parse_prices(csv.as_bytes()).unwrap().to_path().unwrap()
    }

    #[test]
    fn half_double_prices() {
        let p = path_of("date,a,b\n2020-01-01,1,1\n2020-01-02,1,0.5\n2020-01-03,1,1\n");
        assert_eq!(p.point(0), &[0.5, 0.5]);
        assert!((p.point(1)[0] - 2.0 / 3.0).abs() < 1e-15 && (p.point(1)[1] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(p.point(2), &[0.5, 0.5]);
        assert_eq!(p.times(), &[0.0, 1.0, 2.0]);
    }

    #[test]
    fn duplicated_asset_and_three_assets() {
        let p = path_of("date,a,b\n1,7,7\n2,9,9\n");
        assert_eq!(p.point(1), &[0.5, 0.5]);
        let p = path_of("date,a,b,c\n1,3,1,1\n2,1,1,1\n");
        assert!((p.point(0)[0] - 0.6).abs() < 1e-15 && (p.point(0)[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn errors_carry_positions() {
        match parse_prices("date,a,b\n1,1,1\n2,1,x\n".as_bytes()) {
            Err(CliError::Parse { row: 3, col: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse_prices("date,a,b\n1,1,1\n2,0,1\n".as_bytes()) {
            Err(CliError::NonPositivePrice { row: 3, col: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_prices("date,a\n1,1\n2,1\n".as_bytes()), Err(CliError::TooFewAssets(1))));
        assert!(matches!(parse_prices("date,a,b\n1,1,1\n".as_bytes()), Err(CliError::TooFewRows(1))));
        assert!(matches!(parse_prices("date,a,b\n1,1,1\n2,1\n".as_bytes()), Err(CliError::Parse { .. })));
    }

    #[test]
    fn weights_round_trip() {
        let p = path_of("t,w1,w2\n0,0.25,0.75\n0.5,0.5,0.5\n1,0.125,0.875\n");
        let again = path_of(std::str::from_utf8(&weights_csv(&p)).unwrap());
        assert_eq!(p, again);
        assert_eq!(p.kind(), PathKind::SampledContinuous);
    }

    #[test]
    fn atomic_write_replaces_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("out.txt");
        atomic_write(&f, b"one").unwrap();
        atomic_write(&f, b"two").unwrap();
        assert_eq!(std::fs::read(&f).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
