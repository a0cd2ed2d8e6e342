use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EvalError;

/// One evaluated test sample. `index` is the sample's position in the
/// test store.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    pub person: u64,
    pub index: usize,
    pub true_yaw: f64,
    pub true_pitch: f64,
    pub pred_yaw: f64,
    pub pred_pitch: f64,
    pub error_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonError {
    pub id: u64,
    pub n: usize,
    pub mean_deg: f64,
}

/// Per-person errors, their unweighted grand mean and the sample standard
/// deviation across persons (0 for a single person).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: String,
    pub estimator: String,
    pub seed: u64,
    pub per_person: Vec<PersonError>,
    pub grand_mean_deg: f64,
    pub std_deg: f64,
    #[serde(skip)]
    pub samples: Vec<SampleResult>,
}

impl EvalReport {
    pub fn from_samples(protocol: &str, estimator: &str, seed: u64, samples: Vec<SampleResult>) -> Self {
        let mut groups: BTreeMap<u64, (usize, f64)> = BTreeMap::new();
        for s in &samples {
            let e = groups.entry(s.person).or_default();
            e.0 += 1;
            e.1 += s.error_deg;
        }
        let per_person: Vec<PersonError> = groups
            .into_iter()
            .map(|(id, (n, sum))| PersonError {
                id,
                n,
                mean_deg: sum / n as f64,
            })
            .collect();
        let (grand_mean_deg, std_deg) = summarize(&per_person);
        Self {
            protocol: protocol.to_string(),
            estimator: estimator.to_string(),
            seed,
            per_person,
            grand_mean_deg,
            std_deg,
            samples,
        }
    }

    pub fn to_json(&self) -> Result<String, EvalError> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn samples_csv(&self) -> String {
        let mut s = String::from("person,index,true_yaw,true_pitch,pred_yaw,pred_pitch,error_deg\n");
        for r in &self.samples {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.person, r.index, r.true_yaw, r.true_pitch, r.pred_yaw, r.pred_pitch, r.error_deg
            );
        }
        s
    }

    /// Writes the JSON report; the per-sample table goes next to it with a
    /// `.samples.csv` suffix.
    pub fn write(&self, path: &Path) -> Result<(), EvalError> {
        std::fs::write(path, self.to_json()?).map_err(EvalError::io(path))?;
        let csv = samples_path(path);
        std::fs::write(&csv, self.samples_csv()).map_err(EvalError::io(&csv))
    }

    /// Reads a JSON report and, when present, its per-sample table.
    pub fn read(path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path).map_err(EvalError::io(path))?;
        let mut report: EvalReport = serde_json::from_str(&text)?;
        let csv = samples_path(path);
        if csv.exists() {
            let text = std::fs::read_to_string(&csv).map_err(EvalError::io(&csv))?;
            report.samples = parse_samples_csv(&text)
                .map_err(|e| EvalError::MissingFrames(format!("{}: {e}", csv.display())))?;
        }
        Ok(report)
    }
}

pub(crate) fn summarize(per_person: &[PersonError]) -> (f64, f64) {
    let n = per_person.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = per_person.iter().map(|p| p.mean_deg).sum::<f64>() / n as f64;
    let std = if n > 1 {
        (per_person.iter().map(|p| (p.mean_deg - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

pub(crate) fn samples_path(report: &Path) -> std::path::PathBuf {
    let mut name = report.file_stem().unwrap_or_default().to_os_string();
    name.push(".samples.csv");
    report.with_file_name(name)
}

fn parse_samples_csv(text: &str) -> Result<Vec<SampleResult>, String> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(format!("line {}: expected 7 fields", i + 1));
        }
        let num = |k: usize| f[k].parse::<f64>().map_err(|e| format!("line {}: {e}", i + 1));
        out.push(SampleResult {
            person: f[0].parse().map_err(|e| format!("line {}: {e}", i + 1))?,
            index: f[1].parse().map_err(|e| format!("line {}: {e}", i + 1))?,
            true_yaw: num(2)?,
            true_pitch: num(3)?,
            pred_yaw: num(4)?,
            pred_pitch: num(5)?,
            error_deg: num(6)?,
        });
    }
    Ok(out)
}
