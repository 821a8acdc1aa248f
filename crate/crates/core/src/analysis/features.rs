//! Per-run feature vectors and their CSV form.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::diagnostics::{InfoMeasures, TrajectoryClass};
use crate::engine::RunRecord;
use crate::Result;

pub const FEATURE_NAMES: [&str; 5] = ["mean_aggregate", "overload_freq", "h_mu", "C_mu", "E_pred"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFeatures {
    pub run_id: String,
    pub mean_aggregate: f64,
    pub overload_freq: f64,
    pub h_mu: f64,
    #[serde(rename = "C_mu")]
    pub c_mu: f64,
    #[serde(rename = "E_pred")]
    pub e_pred: f64,
    pub regime: String,
    pub label: String,
    #[serde(default)]
    pub classification: Option<TrajectoryClass>,
}

impl RunFeatures {
    pub fn vector(&self) -> [f64; 5] {
        [
            self.mean_aggregate,
            self.overload_freq,
            self.h_mu,
            self.c_mu,
            self.e_pred,
        ]
    }
}

/// Combine a finished run with its diagnostics.
pub fn extract_features(run: &RunRecord, info: &InfoMeasures, run_id: &str, label: &str) -> RunFeatures {
    RunFeatures {
        run_id: run_id.to_string(),
        mean_aggregate: run.mean_aggregate(),
        overload_freq: run.overload_freq(),
        h_mu: info.h_mu,
        c_mu: info.c_mu,
        e_pred: info.e_pred,
        regime: run.regime.to_string(),
        label: label.to_string(),
        classification: info.classification,
    }
}

pub fn write_features<W: Write>(rows: &[RunFeatures], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record([
            "run_id",
            "mean_aggregate",
            "overload_freq",
            "h_mu",
            "C_mu",
            "E_pred",
            "regime",
            "label",
            "classification",
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_features<R: Read>(reader: R) -> Result<Vec<RunFeatures>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        rows.push(rec?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str) -> RunFeatures {
        RunFeatures {
            run_id: id.into(),
            mean_aggregate: 7.0,
            overload_freq: 0.25,
            h_mu: 0.5,
            c_mu: 1.0,
            e_pred: 0.1,
            regime: "VPVA".into(),
            label: "low".into(),
            classification: Some(TrajectoryClass::Cyclic),
        }
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![row("a"), row("b")];
        let mut buf = Vec::new();
        write_features(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("run_id,mean_aggregate,overload_freq,h_mu,C_mu,E_pred,regime,label"));
        assert!(!text.contains('\r'));
        assert_eq!(read_features(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn classification_column_is_optional() {
        let text = "run_id,mean_aggregate,overload_freq,h_mu,C_mu,E_pred,regime,label\nx,1,0,0,0,0,CPCA,a\n";
        let rows = read_features(text.as_bytes()).unwrap();
        assert_eq!(rows[0].classification, None);
        assert_eq!(rows[0].vector(), [1.0, 0.0, 0.0, 0.0, 0.0]);
    }
}
