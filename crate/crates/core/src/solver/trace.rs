//! Per-iteration trace and its CSV/JSON export.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{CoexError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: usize,
    #[serde(rename = "f")]
    pub objective: f64,
    #[serde(rename = "infeas")]
    pub infeasibility: f64,
    pub q_norm: f64,
    pub r_norm: f64,
    pub vertex_id: u64,
    pub millis: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.records {
            wr.serialize(r).map_err(csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let records = rd
            .deserialize()
            .collect::<std::result::Result<Vec<TraceRecord>, _>>()
            .map_err(csv_err)?;
        Ok(Self { records })
    }
}

fn csv_err(e: csv::Error) -> CoexError {
    CoexError::Invalid(format!("trace csv: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let t = Trace {
            records: vec![TraceRecord {
                k: 1,
                objective: 0.1,
                infeasibility: 2.5e-3,
                q_norm: 0.0,
                r_norm: 1.0,
                vertex_id: 7,
                millis: 0.25,
            }],
        };
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("k,f,infeas,q_norm,r_norm,vertex_id,millis"));
        assert_eq!(Trace::read_csv(&buf[..]).unwrap(), t);
    }
}
