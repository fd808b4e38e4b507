//! Annual price tables: parsing, z-score normalization, composite series,
//! spike labels, and alignment with news embeddings.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::news_agent::EmbeddingVector;

pub const DEFAULT_SPIKE_THRESHOLD_PCT: f64 = 25.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    Raw,
    Normalized,
}

/// Year × commodity price matrix. Absent cells are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceTable {
    years: Vec<i32>,
    commodities: Vec<String>,
    /// One row per year, one column per commodity.
    values: Vec<Vec<Option<f64>>>,
    kind: SeriesKind,
}

impl PriceTable {
    pub fn new(
        years: Vec<i32>,
        commodities: Vec<String>,
        values: Vec<Vec<Option<f64>>>,
        kind: SeriesKind,
    ) -> Result<Self> {
        if years.len() != values.len() {
            return Err(Error::Validation(format!(
                "{} years but {} rows",
                years.len(),
                values.len()
            )));
        }
        if let Some(w) = years.windows(2).find(|w| w[0] >= w[1]) {
            let msg = if w[0] == w[1] {
                format!("duplicate year {}", w[0])
            } else {
                format!("years not increasing: {} then {}", w[0], w[1])
            };
            return Err(Error::Validation(msg));
        }
        for (year, row) in years.iter().zip(&values) {
            if row.len() != commodities.len() {
                return Err(Error::Validation(format!(
                    "row for {year} has {} cells, expected {}",
                    row.len(),
                    commodities.len()
                )));
            }
            if row.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!("non-finite price in {year}")));
            }
        }
        Ok(Self {
            years,
            commodities,
            values,
            kind,
        })
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn commodities(&self) -> &[String] {
        &self.commodities
    }

    pub fn kind(&self) -> SeriesKind {
        self.kind
    }

    pub fn value(&self, row: usize, col: usize) -> Option<f64> {
        self.values[row][col]
    }

    pub fn is_empty(&self) -> bool {
        self.years.is_empty() || self.commodities.is_empty()
    }

    pub fn column_index(&self, commodity: &str) -> Option<usize> {
        self.commodities.iter().position(|c| c == commodity)
    }

    pub fn series(&self, col: usize) -> PriceSeries {
        PriceSeries {
            commodity: self.commodities[col].clone(),
            years: self.years.clone(),
            values: self.values.iter().map(|row| row[col]).collect(),
            kind: self.kind,
        }
    }

    pub fn series_by_name(&self, commodity: &str) -> Result<PriceSeries> {
        let col = self
            .column_index(commodity)
            .ok_or_else(|| Error::Validation(format!("unknown commodity `{commodity}`")))?;
        Ok(self.series(col))
    }

    /// Writes the table back out as CSV with the same header layout it was parsed from.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["year".to_string()];
        header.extend(self.commodities.iter().cloned());
        w.write_record(&header)?;
        for (year, row) in self.years.iter().zip(&self.values) {
            let mut rec = vec![year.to_string()];
            rec.extend(row.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
            w.write_record(&rec)?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?)
            .expect("csv output is utf-8"))
    }
}

/// One commodity's annual values, raw or normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub commodity: String,
    pub years: Vec<i32>,
    pub values: Vec<Option<f64>>,
    pub kind: SeriesKind,
}

impl PriceSeries {
    pub fn raw(commodity: impl Into<String>, years: Vec<i32>, values: Vec<f64>) -> Self {
        Self::new(commodity, years, values, SeriesKind::Raw)
    }

    pub fn new(
        commodity: impl Into<String>,
        years: Vec<i32>,
        values: Vec<f64>,
        kind: SeriesKind,
    ) -> Self {
        assert_eq!(years.len(), values.len(), "series length mismatch");
        Self {
            commodity: commodity.into(),
            years,
            values: values.into_iter().map(Some).collect(),
            kind,
        }
    }

    pub fn present(&self) -> impl Iterator<Item = (i32, f64)> + '_ {
        self.years
            .iter()
            .zip(&self.values)
            .filter_map(|(&y, v)| v.map(|x| (y, x)))
    }

    pub fn len(&self) -> usize {
        self.years.len()
    }

    pub fn is_empty(&self) -> bool {
        self.years.is_empty()
    }
}

/// Mean and population standard deviation used to standardize one commodity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub commodity: String,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeLabel {
    pub year: i32,
    pub avg_price: f64,
    pub pct_change: f64,
    pub spike: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpikeLabelSet {
    pub threshold_pct: f64,
    pub labels: Vec<SpikeLabel>,
}

impl SpikeLabelSet {
    pub fn years(&self) -> Vec<i32> {
        self.labels.iter().map(|l| l.year).collect()
    }

    pub fn get(&self, year: i32) -> Option<u8> {
        self.labels
            .binary_search_by_key(&year, |l| l.year)
            .ok()
            .map(|i| self.labels[i].spike)
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|l| l.spike == 1).count()
    }

    /// CSV `year,avg_price,pct_change,spike`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["year", "avg_price", "pct_change", "spike"])?;
        for l in &self.labels {
            w.write_record([
                l.year.to_string(),
                l.avg_price.to_string(),
                l.pct_change.to_string(),
                l.spike.to_string(),
            ])?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?)
            .expect("csv output is utf-8"))
    }
}

/// Parses a CSV document whose first column is `year` and whose remaining
/// columns are commodity prices. Empty cells are treated as missing.
pub fn parse_price_table(text: &str) -> Result<PriceTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut records = reader.records();
    let header = match records.next() {
        Some(rec) => rec.map_err(|e| csv_parse_error(&e, 1))?,
        None => return Err(Error::Parse { line: 1, message: "empty document".into() }),
    };
    if header.get(0).map(|h| h.eq_ignore_ascii_case("year")) != Some(true) {
        return Err(Error::Parse {
            line: 1,
            message: "first header column must be `year`".into(),
        });
    }
    let commodities: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    if commodities.is_empty() {
        return Err(Error::Parse { line: 1, message: "no commodity columns".into() });
    }
    if let Some(dup) = first_duplicate(&commodities) {
        return Err(Error::Parse { line: 1, message: format!("duplicate column `{dup}`") });
    }

    let mut years = Vec::new();
    let mut values = Vec::new();
    let mut seen = BTreeSet::new();
    for rec in records {
        let rec = rec.map_err(|e| csv_parse_error(&e, 0))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if rec.len() != commodities.len() + 1 {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", commodities.len() + 1, rec.len()),
            });
        }
        let year: i32 = rec[0].parse().map_err(|_| Error::Parse {
            line,
            message: format!("invalid year `{}`", &rec[0]),
        })?;
        if !seen.insert(year) {
            return Err(Error::Validation(format!("duplicate year {year} at line {line}")));
        }
        let row = rec
            .iter()
            .skip(1)
            .zip(&commodities)
            .map(|(cell, name)| parse_cell(cell, name, line))
            .collect::<Result<Vec<_>>>()?;
        years.push(year);
        values.push(row);
    }

    // Rows may arrive unsorted; the table keeps them by increasing year.
    let mut order: Vec<usize> = (0..years.len()).collect();
    order.sort_by_key(|&i| years[i]);
    let years = order.iter().map(|&i| years[i]).collect();
    let values = order.iter().map(|&i| values[i].clone()).collect();
    PriceTable::new(years, commodities, values, SeriesKind::Raw)
}

fn parse_cell(cell: &str, commodity: &str, line: usize) -> Result<Option<f64>> {
    if cell.is_empty() {
        return Ok(None);
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(Error::Parse {
            line,
            message: format!("non-numeric value `{cell}` for {commodity}"),
        }),
    }
}

fn csv_parse_error(err: &csv::Error, fallback_line: usize) -> Error {
    let line = err
        .position()
        .map_or(fallback_line, |p| p.line() as usize);
    Error::Parse { line, message: err.to_string() }
}

fn first_duplicate(names: &[String]) -> Option<&str> {
    let mut seen = BTreeSet::new();
    names.iter().find(|n| !seen.insert(n.as_str())).map(String::as_str)
}

/// Mean and population (1/N) standard deviation over present values.
pub fn population_stats(values: impl IntoIterator<Item = f64>) -> Option<(f64, f64, usize)> {
    let xs: Vec<f64> = values.into_iter().collect();
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt(), xs.len()))
}

pub fn series_stats(series: &PriceSeries) -> Result<NormStats> {
    let (mean, std, n) = population_stats(series.present().map(|(_, v)| v))
        .ok_or_else(|| Error::InsufficientData(format!("`{}` has no values", series.commodity)))?;
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "`{}` has {n} value(s), need at least 2",
            series.commodity
        )));
    }
    if std == 0.0 || !std.is_finite() {
        return Err(Error::DegenerateSeries(series.commodity.clone()));
    }
    Ok(NormStats {
        commodity: series.commodity.clone(),
        mean,
        std,
    })
}

/// z = (x − μ) / σ with μ and population σ over all present values.
pub fn zscore_normalize(series: &PriceSeries) -> Result<PriceSeries> {
    let stats = series_stats(series)?;
    Ok(apply_stats(series, &stats))
}

pub fn apply_stats(series: &PriceSeries, stats: &NormStats) -> PriceSeries {
    PriceSeries {
        commodity: series.commodity.clone(),
        years: series.years.clone(),
        values: series
            .values
            .iter()
            .map(|v| v.map(|x| (x - stats.mean) / stats.std))
            .collect(),
        kind: SeriesKind::Normalized,
    }
}

/// Normalizes every column of a raw table, returning the per-commodity statistics.
pub fn normalize_table(table: &PriceTable) -> Result<(PriceTable, Vec<NormStats>)> {
    if table.kind != SeriesKind::Raw {
        return Err(Error::Kind("table is already normalized".into()));
    }
    let mut stats = Vec::with_capacity(table.commodities.len());
    let mut columns = Vec::with_capacity(table.commodities.len());
    for col in 0..table.commodities.len() {
        let s = table.series(col);
        let st = series_stats(&s)?;
        columns.push(apply_stats(&s, &st).values);
        stats.push(st);
    }
    let values = (0..table.years.len())
        .map(|r| columns.iter().map(|c| c[r]).collect())
        .collect();
    let normalized = PriceTable::new(
        table.years.clone(),
        table.commodities.clone(),
        values,
        SeriesKind::Normalized,
    )?;
    Ok((normalized, stats))
}

fn row_mean(table: &PriceTable, name: &str) -> Result<PriceSeries> {
    if table.is_empty() {
        return Err(Error::Validation("empty price table".into()));
    }
    let mut years = Vec::new();
    let mut values = Vec::new();
    for (year, row) in table.years.iter().zip(&table.values) {
        let present: Vec<f64> = row.iter().flatten().copied().collect();
        if present.is_empty() {
            continue;
        }
        years.push(*year);
        values.push(Some(present.iter().sum::<f64>() / present.len() as f64));
    }
    Ok(PriceSeries {
        commodity: name.to_string(),
        years,
        values,
        kind: table.kind,
    })
}

/// Per-year mean of the present z-scores. Years with no present entry are omitted.
pub fn composite_average(table: &PriceTable) -> Result<PriceSeries> {
    if table.kind != SeriesKind::Normalized {
        return Err(Error::Kind("composite average expects a normalized table".into()));
    }
    row_mean(table, "composite")
}

/// Per-year mean of present raw prices (the "average price" used for labels).
pub fn average_price(table: &PriceTable) -> Result<PriceSeries> {
    if table.kind != SeriesKind::Raw {
        return Err(Error::Kind("average price expects a raw table".into()));
    }
    row_mean(table, "average")
}

/// Labels year i as a spike when its price rose by strictly more than
/// `threshold_pct` percent over year i−1. A year gets no label if its own
/// value or the previous year's is missing, or the previous value is not positive.
pub fn label_spikes(series: &PriceSeries, threshold_pct: f64) -> Result<SpikeLabelSet> {
    if series.kind != SeriesKind::Raw {
        return Err(Error::Kind(
            "spike labels need raw prices; percentage change of z-scores is undefined".into(),
        ));
    }
    if !(threshold_pct > 0.0 && threshold_pct.is_finite()) {
        return Err(Error::Config(format!("threshold must be positive, got {threshold_pct}")));
    }
    let mut labels = Vec::new();
    for i in 1..series.len() {
        if series.years[i] != series.years[i - 1] + 1 {
            continue;
        }
        let (Some(prev), Some(cur)) = (series.values[i - 1], series.values[i]) else {
            continue;
        };
        if prev <= 0.0 {
            continue;
        }
        let pct_change = (cur - prev) / prev * 100.0;
        labels.push(SpikeLabel {
            year: series.years[i],
            avg_price: cur,
            pct_change,
            spike: u8::from(pct_change > threshold_pct),
        });
    }
    Ok(SpikeLabelSet { threshold_pct, labels })
}

/// Year-keyed triples ready for windowing.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedDataset {
    pub years: Vec<i32>,
    pub prices: Vec<f64>,
    pub labels: Vec<u8>,
    pub embeddings: Vec<Vec<f64>>,
}

impl AlignedDataset {
    pub fn len(&self) -> usize {
        self.years.len()
    }

    pub fn is_empty(&self) -> bool {
        self.years.is_empty()
    }

    pub fn embedding_dim(&self) -> usize {
        self.embeddings.first().map_or(0, Vec::len)
    }
}

/// Keeps the years present in all three sources, ordered by year.
pub fn align_dataset(
    prices: &PriceSeries,
    labels: &SpikeLabelSet,
    embeddings: &[EmbeddingVector],
) -> Result<AlignedDataset> {
    let price_map: BTreeMap<i32, f64> = prices.present().collect();
    let label_map: BTreeMap<i32, u8> = labels.labels.iter().map(|l| (l.year, l.spike)).collect();
    let mut emb_map: BTreeMap<i32, &EmbeddingVector> = BTreeMap::new();
    for e in embeddings {
        if emb_map.insert(e.year, e).is_some() {
            return Err(Error::Validation(format!("duplicate embedding for year {}", e.year)));
        }
    }
    if let Some(first) = embeddings.first() {
        if let Some(bad) = embeddings.iter().find(|e| e.dim != first.dim) {
            return Err(Error::Contract(format!(
                "embedding dim {} for {} differs from {}",
                bad.dim, bad.year, first.dim
            )));
        }
    }

    let mut out = AlignedDataset {
        years: Vec::new(),
        prices: Vec::new(),
        labels: Vec::new(),
        embeddings: Vec::new(),
    };
    for (&year, &price) in &price_map {
        let (Some(&label), Some(emb)) = (label_map.get(&year), emb_map.get(&year)) else {
            continue;
        };
        out.years.push(year);
        out.prices.push(price);
        out.labels.push(label);
        out.embeddings.push(emb.values.clone());
    }
    if out.is_empty() {
        return Err(Error::Alignment(format!(
            "prices {}, labels {}, embeddings {}",
            year_range(price_map.keys()),
            year_range(label_map.keys()),
            year_range(emb_map.keys())
        )));
    }
    Ok(out)
}

fn year_range<'a>(years: impl Iterator<Item = &'a i32>) -> String {
    let ys: Vec<i32> = years.copied().collect();
    match (ys.first(), ys.last()) {
        (Some(a), Some(b)) => format!("{a}-{b}"),
        _ => "none".into(),
    }
}

/// The model-facing price feature, its labels and the normalization used.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInputs {
    /// Normalized composite (or single-commodity) series.
    pub feature: PriceSeries,
    /// Labels from the raw prices behind `feature`.
    pub labels: SpikeLabelSet,
    pub norm_stats: Vec<NormStats>,
}

/// With no commodity, the feature is the composite of z-scores and labels come
/// from the raw average price; otherwise both come from that one column.
pub fn model_inputs(raw: &PriceTable, threshold_pct: f64, commodity: Option<&str>) -> Result<ModelInputs> {
    if raw.kind != SeriesKind::Raw {
        return Err(Error::Kind("model inputs are built from a raw table".into()));
    }
    match commodity {
        None => {
            let (normalized, norm_stats) = normalize_table(raw)?;
            Ok(ModelInputs {
                feature: composite_average(&normalized)?,
                labels: label_spikes(&average_price(raw)?, threshold_pct)?,
                norm_stats,
            })
        }
        Some(name) => {
            let series = raw.series_by_name(name)?;
            let stats = series_stats(&series)?;
            Ok(ModelInputs {
                feature: apply_stats(&series, &stats),
                labels: label_spikes(&series, threshold_pct)?,
                norm_stats: vec![stats],
            })
        }
    }
}
