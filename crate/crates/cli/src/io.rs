//! File formats written and read by the CLI.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize, Serializer};

use hysir_core::preisach::PreisachState;
use hysir_core::simulate::{AttractorClass, Sample};

#[derive(Serialize, Deserialize)]
struct Row {
    t: f64,
    #[serde(rename = "I")]
    i: f64,
    #[serde(rename = "S")]
    s: f64,
    #[serde(rename = "R")]
    r: f64,
    v: f64,
}

/// Writes `t,I,S,R,v`, one row per sample.
pub fn write_trajectory_csv(path: &Path, samples: &[Sample]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for x in samples {
        w.serialize(Row { t: x.t, i: x.i, s: x.s, r: x.r(), v: x.v })?;
    }
    w.flush()
}

pub fn read_trajectory_csv(path: &Path) -> Result<Vec<Sample>, csv::Error> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize::<Row>().map(|row| row.map(|x| Sample { t: x.t, i: x.i, s: x.s, v: x.v })).collect()
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    f.flush()
}

/// Serialises the bare staircase or relay bank, so the file can be pasted
/// back into a scenario as explicit memory.
pub struct MemoryFile<'a>(pub &'a PreisachState);

impl Serialize for MemoryFile<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            PreisachState::Staircase(m) => m.serialize(s),
            PreisachState::RelayBank(b) => b.serialize(s),
        }
    }
}

#[derive(Serialize)]
pub struct SweepRow {
    value: f64,
    class: &'static str,
    #[serde(rename = "I_star")]
    i_star: Option<f64>,
    #[serde(rename = "S_star")]
    s_star: Option<f64>,
    v_star: Option<f64>,
    period: Option<f64>,
    #[serde(rename = "I_bar")]
    i_bar: Option<f64>,
    #[serde(rename = "S_bar")]
    s_bar: Option<f64>,
    v_bar: Option<f64>,
}

impl SweepRow {
    pub fn new(value: f64, class: &AttractorClass) -> Self {
        let mut row = SweepRow {
            value,
            class: class.name(),
            i_star: None,
            s_star: None,
            v_star: None,
            period: None,
            i_bar: None,
            s_bar: None,
            v_bar: None,
        };
        match *class {
            AttractorClass::EndemicEquilibrium { i_star, s_star, v_star } => {
                (row.i_star, row.s_star, row.v_star) = (Some(i_star), Some(s_star), Some(v_star));
            }
            AttractorClass::PeriodicOrbit { period, i_bar, s_bar, v_bar, .. } => {
                (row.period, row.i_bar, row.s_bar, row.v_bar) = (Some(period), Some(i_bar), Some(s_bar), Some(v_bar));
            }
            AttractorClass::InfectionFree { s_limit } => {
                (row.i_star, row.s_star) = (Some(0.0), Some(s_limit));
            }
            AttractorClass::Undecided => {}
        }
        row
    }
}

pub fn write_sweep<W: Write>(out: W, rows: &[SweepRow]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()
}
