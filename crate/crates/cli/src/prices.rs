//! Reading hourly price files.

use std::path::Path;

use anyhow::{bail, Context, Result};
use battery_arbitrage::milp::PriceSeries;
use serde::Deserialize;

#[derive(Debug, Deserialize)]
struct Row {
    hour: String,
    price: String,
}

/// Reads a `hour,price` CSV with one row for each hour 1 to 24, in any order.
pub fn ingest_prices(path: &Path) -> Result<PriceSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open price file {}", path.display()))?;
    let headers = reader.headers().context("price file has no header")?.clone();
    if headers.iter().collect::<Vec<_>>() != ["hour", "price"] {
        bail!("price file header must be `hour,price`, found `{}`", headers.iter().collect::<Vec<_>>().join(","));
    }
    let mut slots: Vec<Option<f64>> = vec![None; PriceSeries::DAY];
    let mut rows = 0;
    for (k, record) in reader.deserialize::<Row>().enumerate() {
        let line = k + 2;
        let row = record.with_context(|| format!("price file line {line}"))?;
        rows += 1;
        let hour: usize = row
            .hour
            .parse()
            .with_context(|| format!("line {line}: hour `{}` is not an integer", row.hour))?;
        let price: f64 = row
            .price
            .parse()
            .with_context(|| format!("line {line}: price `{}` is not a number", row.price))?;
        if !price.is_finite() {
            bail!("line {line}: price must be finite");
        }
        if !(1..=PriceSeries::DAY).contains(&hour) {
            bail!("line {line}: hour {hour} outside 1..={}", PriceSeries::DAY);
        }
        if slots[hour - 1].replace(price).is_some() {
            bail!("line {line}: hour {hour} appears twice");
        }
    }
    if rows != PriceSeries::DAY {
        bail!("price file has {rows} rows, expected {}", PriceSeries::DAY);
    }
    let prices = slots
        .into_iter()
        .enumerate()
        .map(|(h, p)| p.with_context(|| format!("hour {} is missing", h + 1)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(PriceSeries::day_ahead(prices)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    fn day(order: impl Iterator<Item = usize>) -> String {
        let mut s = String::from("hour,price\n");
        for h in order {
            s.push_str(&format!("{h},{}\n", 10 * h));
        }
        s
    }

    #[test]
    fn shuffled_hours_are_reordered() {
        let f = file(&day((1..=24).rev()));
        let p = ingest_prices(f.path()).unwrap();
        assert_eq!(p.values()[0], 10.0);
        assert_eq!(p.values()[23], 240.0);
    }

    #[test]
    fn malformed_files_are_rejected() {
        assert!(ingest_prices(file(&day(1..=23)).path()).is_err());
        let dup = day((1..=23).chain([5]));
        assert!(ingest_prices(file(&dup).path()).is_err());
        let bad = day(1..=24).replace("30\n", "abc\n");
        assert!(ingest_prices(file(&bad).path()).is_err());
        assert!(ingest_prices(file("h,p\n1,2\n").path()).is_err());
        assert!(ingest_prices(Path::new("/nonexistent/prices.csv")).is_err());
    }
}
