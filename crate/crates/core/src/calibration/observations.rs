use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::CalibrationError;

pub const OBSERVATION_HEADER: [&str; 3] = ["time", "entity_id", "population"];

/// Observed populations on a shared time axis.
///
/// `times` is the sorted union of every entity's observation times; an
/// entity not observed at some time holds `None` there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSeries {
    pub times: Vec<f64>,
    pub series: BTreeMap<String, Vec<Option<f64>>>,
    #[serde(default)]
    pub provenance: String,
}

impl ObservationSeries {
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Every observed `(entity, time, value)` triple, entity-major.
    pub fn points(&self) -> impl Iterator<Item = (&str, f64, f64)> + '_ {
        self.series.iter().flat_map(move |(entity, values)| {
            self.times
                .iter()
                .zip(values)
                .filter_map(move |(t, v)| v.map(|v| (entity.as_str(), *t, v)))
        })
    }

    pub fn check(&self) -> Result<(), CalibrationError> {
        if self
            .times
            .windows(2)
            .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
            || self.times.iter().any(|t| !t.is_finite())
        {
            return Err(CalibrationError::InvalidObservations(
                "times must be finite and strictly increasing".into(),
            ));
        }
        for (entity, values) in &self.series {
            if values.len() != self.times.len() {
                return Err(CalibrationError::InvalidObservations(format!(
                    "series `{entity}` has {} values for {} times",
                    values.len(),
                    self.times.len()
                )));
            }
            if values.iter().flatten().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(CalibrationError::InvalidObservations(format!(
                    "series `{entity}` has a negative or non-finite value"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportedObservations {
    pub observations: ObservationSeries,
    pub warnings: Vec<String>,
}

/// Reads `time,entity_id,population` rows, grouping by entity and sorting
/// by time. A repeated `(time, entity)` pair keeps the last row.
pub fn import_observations<R: Read>(source: R, provenance: &str) -> Result<ImportedObservations, CalibrationError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source);
    let header = reader.headers()?.clone();
    if header.iter().ne(OBSERVATION_HEADER.iter().copied()) {
        return Err(CalibrationError::BadHeader {
            expected: OBSERVATION_HEADER.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }

    let mut warnings = Vec::new();
    let mut by_entity: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let row_error = |field: &str, message: String| CalibrationError::Row {
            line,
            field: field.to_string(),
            message,
        };
        if row.len() != OBSERVATION_HEADER.len() {
            return Err(row_error("row", format!("expected 3 fields, found {}", row.len())));
        }
        let number = |idx: usize| -> Result<f64, CalibrationError> {
            let raw = &row[idx];
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(row_error(
                    OBSERVATION_HEADER[idx],
                    format!("`{raw}` is not a finite number"),
                )),
            }
        };
        let time = number(0)?;
        let population = number(2)?;
        if population < 0.0 {
            return Err(row_error("population", format!("population {population} is negative")));
        }
        let entity = row[1].to_string();
        if entity.is_empty() {
            return Err(row_error("entity_id", "entity_id is empty".into()));
        }
        let points = by_entity.entry(entity.clone()).or_default();
        if let Some(slot) = points.iter_mut().find(|(t, _)| *t == time) {
            warnings.push(format!(
                "line {line}: duplicate observation of `{entity}` at time {time}; keeping the later value"
            ));
            slot.1 = population;
        } else {
            points.push((time, population));
        }
    }

    let mut times: Vec<f64> = by_entity.values().flatten().map(|(t, _)| *t).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let series = by_entity
        .into_iter()
        .map(|(entity, points)| {
            let mut aligned = vec![None; times.len()];
            for (t, v) in points {
                let idx = times.partition_point(|x| *x < t);
                aligned[idx] = Some(v);
            }
            (entity, aligned)
        })
        .collect();

    Ok(ImportedObservations {
        observations: ObservationSeries {
            times,
            series,
            provenance: provenance.to_string(),
        },
        warnings,
    })
}
