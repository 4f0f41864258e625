//! Local species-trait table used to seed simulation parameters.
//!
//! Records are ingested from CSV with the header
//! `species_id,common_name,lifespan_years,body_mass_g,offspring_count,reproductive_maturity_years`.
//! `body_mass_g` is stored but no archetype reads it.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TRAIT_HEADER: [&str; 6] = [
    "species_id",
    "common_name",
    "lifespan_years",
    "body_mass_g",
    "offspring_count",
    "reproductive_maturity_years",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitRecord {
    pub species_id: String,
    pub common_name: String,
    /// Years, > 0.
    pub lifespan: f64,
    /// Grams, > 0.
    pub body_mass: f64,
    /// Expected offspring per lifetime.
    pub offspring_count: f64,
    /// Years to first reproduction; strictly less than `lifespan`.
    pub reproductive_maturity: f64,
}

impl TraitRecord {
    /// Returns the name of the first field that breaks a record invariant.
    pub fn check(&self) -> Result<(), (&'static str, String)> {
        let finite = [
            ("lifespan_years", self.lifespan),
            ("body_mass_g", self.body_mass),
            ("offspring_count", self.offspring_count),
            ("reproductive_maturity_years", self.reproductive_maturity),
        ];
        for (field, v) in finite {
            if !v.is_finite() {
                return Err((field, format!("{v} is not finite")));
            }
        }
        if self.species_id.trim().is_empty() {
            return Err(("species_id", "species_id is empty".into()));
        }
        if self.lifespan <= 0.0 {
            return Err(("lifespan_years", format!("lifespan {} must be > 0", self.lifespan)));
        }
        if self.body_mass <= 0.0 {
            return Err(("body_mass_g", format!("body mass {} must be > 0", self.body_mass)));
        }
        if self.offspring_count < 0.0 {
            return Err((
                "offspring_count",
                format!("offspring count {} must be >= 0", self.offspring_count),
            ));
        }
        if self.reproductive_maturity < 0.0 {
            return Err((
                "reproductive_maturity_years",
                format!("reproductive maturity {} must be >= 0", self.reproductive_maturity),
            ));
        }
        if self.reproductive_maturity >= self.lifespan {
            return Err((
                "reproductive_maturity_years",
                format!(
                    "reproductive maturity {} must be below lifespan {}",
                    self.reproductive_maturity, self.lifespan
                ),
            ));
        }
        Ok(())
    }
}

/// A rejected CSV row. `line` is 1-based and counts the header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowError {
    pub line: u64,
    pub field: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub loaded: usize,
    pub rejected: Vec<RowError>,
}

#[derive(Debug, Error)]
pub enum TraitError {
    #[error("trait CSV header must be `{}`, found `{found}`", TRAIT_HEADER.join(","))]
    BadHeader { found: String },
    #[error("reading trait CSV: {0}")]
    Csv(#[from] csv::Error),
}

/// Birth and death rates derived from a trait record, both per year.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedRates {
    pub birth_rate: f64,
    pub death_rate: f64,
}

/// Maps traits to per-capita rates.
///
/// Death rate is the reciprocal of lifespan; lifetime offspring are spread
/// evenly over the reproductive span `lifespan - maturity`.
pub fn derive_params(record: &TraitRecord) -> DerivedRates {
    DerivedRates {
        death_rate: 1.0 / record.lifespan,
        birth_rate: record.offspring_count / (record.lifespan - record.reproductive_maturity),
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraitStore {
    records: BTreeMap<String, TraitRecord>,
}

impl TraitStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, species_id: &str) -> Option<&TraitRecord> {
        self.records.get(species_id)
    }

    pub fn records(&self) -> impl Iterator<Item = &TraitRecord> {
        self.records.values()
    }

    /// Adds or replaces a record after checking its invariants.
    pub fn insert(&mut self, record: TraitRecord) -> Result<(), (&'static str, String)> {
        record.check()?;
        self.records.insert(record.species_id.clone(), record);
        Ok(())
    }

    /// Loads every well-formed row; a later row with the same species id
    /// replaces the earlier one. Bad rows are reported, not fatal.
    pub fn ingest_traits<R: Read>(&mut self, source: R) -> Result<IngestReport, TraitError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(source);
        let header = reader.headers()?.clone();
        if header.iter().ne(TRAIT_HEADER.iter().copied()) {
            return Err(TraitError::BadHeader {
                found: header.iter().collect::<Vec<_>>().join(","),
            });
        }

        let mut report = IngestReport::default();
        for row in reader.records() {
            let row = row?;
            let line = row.position().map(|p| p.line()).unwrap_or(0);
            match parse_row(&row) {
                Ok(record) => match self.insert(record) {
                    Ok(()) => report.loaded += 1,
                    Err((field, message)) => report.rejected.push(RowError {
                        line,
                        field: field.into(),
                        message,
                    }),
                },
                Err((field, message)) => report.rejected.push(RowError {
                    line,
                    field: field.into(),
                    message,
                }),
            }
        }
        Ok(report)
    }

    /// Exact species-id match first, then case-insensitive common-name
    /// substring matches sorted by common name.
    pub fn lookup_species(&self, query: &str) -> Vec<TraitRecord> {
        let mut out = Vec::new();
        let exact = self.records.get(query);
        if let Some(r) = exact {
            out.push(r.clone());
        }
        let needle = query.to_lowercase();
        let mut by_name: Vec<&TraitRecord> = self
            .records
            .values()
            .filter(|r| Some(r.species_id.as_str()) != exact.map(|e| e.species_id.as_str()))
            .filter(|r| r.common_name.to_lowercase().contains(&needle))
            .collect();
        by_name.sort_by(|a, b| {
            a.common_name
                .to_lowercase()
                .cmp(&b.common_name.to_lowercase())
                .then_with(|| a.species_id.cmp(&b.species_id))
        });
        out.extend(by_name.into_iter().cloned());
        out
    }

    /// Writes the store back out in the ingestion format, ordered by species id.
    pub fn write_csv<W: std::io::Write>(&self, sink: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(TRAIT_HEADER)?;
        for r in self.records.values() {
            w.write_record([
                r.species_id.clone(),
                r.common_name.clone(),
                r.lifespan.to_string(),
                r.body_mass.to_string(),
                r.offspring_count.to_string(),
                r.reproductive_maturity.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn parse_row(row: &csv::StringRecord) -> Result<TraitRecord, (&'static str, String)> {
    if row.len() != TRAIT_HEADER.len() {
        return Err((
            "row",
            format!("expected {} fields, found {}", TRAIT_HEADER.len(), row.len()),
        ));
    }
    let number = |idx: usize| -> Result<f64, (&'static str, String)> {
        let raw = &row[idx];
        raw.parse::<f64>()
            .map_err(|_| (TRAIT_HEADER[idx], format!("`{raw}` is not a number")))
    };
    Ok(TraitRecord {
        species_id: row[0].to_string(),
        common_name: row[1].to_string(),
        lifespan: number(2)?,
        body_mass: number(3)?,
        offspring_count: number(4)?,
        reproductive_maturity: number(5)?,
    })
}
