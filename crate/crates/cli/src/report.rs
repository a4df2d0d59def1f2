//! Experiment reports and their CSV / JSON renderings.

use std::collections::BTreeMap;

use qrn_core::CheckRecord;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Margins are written with 12 significant digits.
pub fn format_margin(x: f64) -> String {
    format!("{x:.11e}")
}

/// One check, with its margin rounded to the emitted precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub id: String,
    #[serde(serialize_with = "ser_margin", deserialize_with = "de_margin")]
    pub margin: f64,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl From<&CheckRecord> for Row {
    fn from(r: &CheckRecord) -> Self {
        let margin = format_margin(r.margin).parse().unwrap_or(r.margin);
        Self { id: r.id.clone(), margin, passed: r.passed, detail: r.detail.clone() }
    }
}

// Non-finite margins have no JSON number; they travel as strings.
fn ser_margin<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else {
        s.serialize_str(&format_margin(*x))
    }
}

fn de_margin<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Margin {
        Number(f64),
        Text(String),
    }
    match Margin::deserialize(d)? {
        Margin::Number(x) => Ok(x),
        Margin::Text(s) => s.parse().map_err(serde::de::Error::custom),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub kind: String,
    pub version: String,
    pub config: BTreeMap<String, String>,
    pub records: Vec<Row>,
    pub wall_time_s: f64,
}

/// The report minus wall time: a pure function of config, seed and version.
#[derive(Serialize)]
struct Body<'a> {
    kind: &'a str,
    version: &'a str,
    config: &'a BTreeMap<String, String>,
    records: &'a [Row],
}

impl ExperimentReport {
    pub fn new(
        kind: impl Into<String>,
        config: BTreeMap<String, String>,
        records: &[CheckRecord],
        wall_time_s: f64,
    ) -> Self {
        Self {
            kind: kind.into(),
            version: qrn_core::VERSION.to_string(),
            config,
            records: records.iter().map(Row::from).collect(),
            wall_time_s,
        }
    }

    pub fn passed(&self) -> bool {
        self.records.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Row> {
        self.records.iter().filter(|r| !r.passed)
    }

    pub fn body(&self) -> String {
        let body = Body { kind: &self.kind, version: &self.version, config: &self.config, records: &self.records };
        serde_json::to_string(&body).expect("report body serializes")
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    /// `id,margin,passed,detail`, one row per check.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["id", "margin", "passed", "detail"]).expect("in-memory write");
        for r in &self.records {
            w.write_record([
                r.id.as_str(),
                &format_margin(r.margin),
                if r.passed { "true" } else { "false" },
                &r.detail,
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }

    pub fn emit(&self, format: &str) -> String {
        match format {
            "json" => self.to_json(),
            _ => self.to_csv(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentReport {
        let records = vec![
            CheckRecord::from_margin("a", 1.0 / 3.0),
            CheckRecord::from_margin("b, with comma", -0.5).with_detail("x \"quoted\""),
            CheckRecord::new("c", f64::NAN, false),
        ];
        ExperimentReport::new("born", BTreeMap::from([("seed".into(), "1".into())]), &records, 0.25)
    }

    #[test]
    fn margins_have_twelve_significant_digits() {
        assert_eq!(format_margin(1.0 / 3.0), "3.33333333333e-1");
        assert_eq!(format_margin(-2.5e-10), "-2.50000000000e-10");
        assert_eq!(format_margin(0.0), "0.00000000000e0");
    }

    #[test]
    fn empty_report_is_header_only() {
        let r = ExperimentReport::new("born", BTreeMap::new(), &[], 0.0);
        assert_eq!(r.to_csv(), "id,margin,passed,detail\n");
    }

    #[test]
    fn csv_quotes_fields() {
        let csv = sample().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[1], "a,3.33333333333e-1,true,");
        assert_eq!(lines[2], "\"b, with comma\",-5.00000000000e-1,false,\"x \"\"quoted\"\"\"");
        assert_eq!(lines[3], "c,NaN,false,");
    }

    #[test]
    fn json_round_trips() {
        let r = sample();
        let back = ExperimentReport::from_json(&r.to_json()).unwrap();
        assert_eq!(back.to_json(), r.to_json());
        assert!(back.records[2].margin.is_nan());
        assert_eq!(back.records[0].margin, 3.33333333333e-1);
    }

    #[test]
    fn body_ignores_wall_time() {
        let mut r = sample();
        let before = r.body();
        r.wall_time_s = 99.0;
        assert_eq!(r.body(), before);
        assert!(!before.contains("wall_time"));
    }
}
