//! CSV formats: histograms, football match results and result tables.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use empl_core::experiments::football::{Fixture, Season};
use empl_core::experiments::metrics::MetricTable;
use empl_core::experiments::ExperimentError;
use empl_core::histogram::{DensityHistogram, HistogramError};
use empl_core::nn::LossCurve;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("line {line}: {source}")]
    Histogram { line: u64, source: HistogramError },
    #[error(transparent)]
    Season(#[from] ExperimentError),
    #[error("missing column `{0}`")]
    MissingColumn(&'static str),
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

/// Reads one density histogram per row. A first row whose first field is
/// not a number is taken as a header and skipped.
pub fn read_histograms<R: Read>(reader: R) -> Result<Vec<DensityHistogram>, FormatError> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for (i, record) in csv.records().enumerate() {
        let record = record?;
        let line = line_of(&record);
        if i == 0 && record.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        let values = record
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| FormatError::Row {
                    line,
                    message: format!("`{f}` is not a number"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        out.push(DensityHistogram::new(values).map_err(|source| FormatError::Histogram { line, source })?);
    }
    Ok(out)
}

/// Writes histograms one per row, with a `bin_1,...,bin_N` header when asked.
pub fn write_histograms<W: Write>(writer: W, histograms: &[DensityHistogram], header: bool) -> Result<(), FormatError> {
    let mut csv = csv::Writer::from_writer(writer);
    if header {
        if let Some(first) = histograms.first() {
            csv.write_record((1..=first.bins()).map(|j| format!("bin_{j}")))?;
        }
    }
    for h in histograms {
        csv.write_record(h.iter().map(|v| v.to_string()))?;
    }
    csv.flush()?;
    Ok(())
}

/// One row of a match results file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchRow {
    pub season: String,
    pub date: String,
    pub home_team: String,
    pub away_team: String,
    pub home_goals: u32,
    pub away_goals: u32,
}

pub const FOOTBALL_COLUMNS: [&str; 6] = ["season", "date", "home_team", "away_team", "home_goals", "away_goals"];

/// Sort key for `YYYY-MM-DD`, `DD/MM/YYYY` and `DD/MM/YY` dates. Two-digit
/// years below 50 are read as 20xx.
pub fn date_key(date: &str) -> Option<(u32, u32, u32)> {
    let parts: Vec<&str> = date.split(['-', '/', '.']).collect();
    let [a, b, c] = parts.as_slice() else { return None };
    let num = |s: &str| s.parse::<u32>().ok();
    let (y, m, d) = if a.len() == 4 {
        (num(a)?, num(b)?, num(c)?)
    } else {
        let y = num(c)?;
        let y = match c.len() {
            2 if y < 50 => 2000 + y,
            2 => 1900 + y,
            4 => y,
            _ => return None,
        };
        (y, num(b)?, num(a)?)
    };
    ((1..=12).contains(&m) && (1..=31).contains(&d)).then_some((y, m, d))
}

pub fn read_match_rows<R: Read>(reader: R) -> Result<Vec<MatchRow>, FormatError> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = csv.headers()?.clone();
    let mut index = [0usize; 6];
    for (slot, name) in index.iter_mut().zip(FOOTBALL_COLUMNS) {
        *slot = headers.iter().position(|h| h == name).ok_or(FormatError::MissingColumn(name))?;
    }
    let mut rows = Vec::new();
    for record in csv.records() {
        let record = record?;
        let line = line_of(&record);
        let field = |i: usize| record.get(index[i]).unwrap_or("").to_string();
        let goals = |i: usize| {
            let text = field(i);
            text.parse::<u32>().map_err(|_| FormatError::Row {
                line,
                message: format!("{} `{text}` is not a goal count", FOOTBALL_COLUMNS[i]),
            })
        };
        let row = MatchRow {
            season: field(0),
            date: field(1),
            home_team: field(2),
            away_team: field(3),
            home_goals: goals(4)?,
            away_goals: goals(5)?,
        };
        if date_key(&row.date).is_none() {
            return Err(FormatError::Row {
                line,
                message: format!("unrecognized date `{}`", row.date),
            });
        }
        if row.season.is_empty() || row.home_team.is_empty() || row.away_team.is_empty() {
            return Err(FormatError::Row {
                line,
                message: "season and team names must not be empty".into(),
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Groups matches by season, orders each season's matches by date (file
/// order breaks ties) and builds the seasons in order of season id.
pub fn seasons_from_rows(rows: &[MatchRow]) -> Result<Vec<Season>, FormatError> {
    let mut grouped: BTreeMap<&str, Vec<&MatchRow>> = BTreeMap::new();
    for row in rows {
        grouped.entry(&row.season).or_default().push(row);
    }
    let mut seasons = Vec::with_capacity(grouped.len());
    for (id, mut matches) in grouped {
        matches.sort_by_key(|m| date_key(&m.date));
        let mut clubs: Vec<String> = matches
            .iter()
            .flat_map(|m| [m.home_team.clone(), m.away_team.clone()])
            .collect();
        clubs.sort();
        clubs.dedup();
        let index = |name: &str| clubs.binary_search_by(|c| c.as_str().cmp(name)).expect("club collected above");
        let fixtures: Vec<Fixture> = matches
            .iter()
            .map(|m| Fixture {
                home: index(&m.home_team),
                away: index(&m.away_team),
                home_goals: m.home_goals,
                away_goals: m.away_goals,
            })
            .collect();
        seasons.push(Season::from_matches(id, &clubs, &fixtures)?);
    }
    Ok(seasons)
}

pub fn read_football_csv<R: Read>(reader: R) -> Result<Vec<Season>, FormatError> {
    seasons_from_rows(&read_match_rows(reader)?)
}

/// Rows of strings under a header, written as CSV.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write<W: Write>(&self, writer: W) -> Result<(), FormatError> {
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record(&self.header)?;
        for row in &self.rows {
            csv.write_record(row)?;
        }
        csv.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

pub fn loss_curve_table(curves: &[(&str, &LossCurve)]) -> Table {
    let mut table = Table::new(&["model", "iteration", "loss"]);
    for (name, curve) in curves {
        for (it, loss) in &curve.points {
            table.push(vec![name.to_string(), it.to_string(), loss.to_string()]);
        }
    }
    table
}

/// Metric tables in display units; `columns` indexes [`MetricTable::COLUMNS`].
pub fn metrics_table(rows: &[(&str, &MetricTable)], columns: &[usize]) -> Table {
    let mut header = vec!["set", "samples"];
    header.extend(columns.iter().map(|&c| MetricTable::COLUMNS[c]));
    let mut table = Table::new(&header);
    for (name, metrics) in rows {
        let scaled = metrics.scaled();
        let mut row = vec![name.to_string(), metrics.samples.to_string()];
        row.extend(columns.iter().map(|&c| format!("{:.4}", scaled[c])));
        table.push(row);
    }
    table
}

pub fn calibration_table(alphas: &[f64], coverage: &[f64]) -> Table {
    let mut table = Table::new(&["alpha", "coverage"]);
    for (a, c) in alphas.iter().zip(coverage) {
        table.push(vec![a.to_string(), c.to_string()]);
    }
    table
}
