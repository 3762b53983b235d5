//! Evaluation report output: a JSON document with one object per scene
//! plus an aggregate, and a flat CSV for spreadsheet import.

use crate::error::CliError;
use polyfield_core::MetricsReport;
use serde::Serialize;
use std::path::Path;

#[derive(Debug, Serialize)]
pub struct SceneReport<'a> {
    pub name: &'a str,
    #[serde(flatten)]
    pub metrics: &'a MetricsReport,
}

#[derive(Debug, Serialize)]
pub struct ReportDoc<'a> {
    pub scenes: Vec<SceneReport<'a>>,
    pub aggregate: Aggregate,
}

/// Scene-mean summary; PoLiS/MTA average only over scenes where they are
/// defined.
#[derive(Debug, Serialize)]
pub struct Aggregate {
    pub precision: f64,
    pub recall: f64,
    pub polis_mean: Option<f64>,
    pub mta_mean: Option<f64>,
    pub ap: f64,
    pub ar: f64,
}

pub fn aggregate(reports: &[&MetricsReport]) -> Aggregate {
    let n = reports.len().max(1) as f64;
    let mean = |f: &dyn Fn(&MetricsReport) -> f64| reports.iter().map(|r| f(r)).sum::<f64>() / n;
    let opt_mean = |f: &dyn Fn(&MetricsReport) -> Option<f64>| {
        let vals: Vec<f64> = reports.iter().filter_map(|r| f(r)).collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    };
    Aggregate {
        precision: mean(&|r| r.precision),
        recall: mean(&|r| r.recall),
        polis_mean: opt_mean(&|r| r.polis_mean),
        mta_mean: opt_mean(&|r| r.mta_mean),
        ap: mean(&|r| r.ap),
        ar: mean(&|r| r.ar),
    }
}

pub fn write_json(
    path: impl AsRef<Path>,
    named: &[(&str, &MetricsReport)],
) -> Result<(), CliError> {
    let path = path.as_ref();
    let doc = ReportDoc {
        scenes: named
            .iter()
            .map(|(name, metrics)| SceneReport { name, metrics })
            .collect(),
        aggregate: aggregate(&named.iter().map(|(_, m)| *m).collect::<Vec<_>>()),
    };
    let text = serde_json::to_string_pretty(&doc).expect("report always serializes");
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.9}")).unwrap_or_default()
}

pub fn write_csv(
    path: impl AsRef<Path>,
    named: &[(&str, &MetricsReport)],
) -> Result<(), CliError> {
    let path = path.as_ref();
    let mut out = String::from("scene,precision,recall,polis_mean,mta_mean,ap,ar\n");
    for (name, r) in named {
        out.push_str(&format!(
            "{name},{:.9},{:.9},{},{},{:.9},{:.9}\n",
            r.precision,
            r.recall,
            opt_cell(r.polis_mean),
            opt_cell(r.mta_mean),
            r.ap,
            r.ar
        ));
    }
    let agg = aggregate(&named.iter().map(|(_, m)| *m).collect::<Vec<_>>());
    out.push_str(&format!(
        "aggregate,{:.9},{:.9},{},{},{:.9},{:.9}\n",
        agg.precision,
        agg.recall,
        opt_cell(agg.polis_mean),
        opt_cell(agg.mta_mean),
        agg.ap,
        agg.ar
    ));
    std::fs::write(path, out).map_err(|e| CliError::io(path, e))
}
