//! Head-movement traces: one viewport centre per user every sampling window.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geom::Direction;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceSample {
    pub t_ms: u64,
    pub direction: Direction,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UserTrace {
    pub user: String,
    pub samples: Vec<TraceSample>,
}

/// Users in order of first appearance.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HeadTrace {
    pub users: Vec<UserTrace>,
}

#[derive(Deserialize)]
struct Row {
    user_id: String,
    t_ms: u64,
    longitude_rad: f64,
    latitude_rad: f64,
}

impl HeadTrace {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path)?;
        Self::from_reader(f, path)
    }

    /// Parses `user_id,t_ms,longitude_rad,latitude_rad` rows; `origin` only
    /// labels errors.
    pub fn from_reader(r: impl Read, origin: &Path) -> Result<Self> {
        let err = |line: u64, reason: String| Error::Trace { path: PathBuf::from(origin), line, reason };
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let mut trace = HeadTrace::default();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                err(line, e.to_string())
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            let row: Row = rec.deserialize(None).map_err(|e| err(line, e.to_string()))?;
            if !row.longitude_rad.is_finite() || !(-PI..=PI).contains(&row.longitude_rad) {
                return Err(err(line, format!("longitude {} outside [-pi, pi]", row.longitude_rad)));
            }
            if !row.latitude_rad.is_finite() || !(-FRAC_PI_2..=FRAC_PI_2).contains(&row.latitude_rad) {
                return Err(err(line, format!("latitude {} outside [-pi/2, pi/2]", row.latitude_rad)));
            }
            let sample = TraceSample { t_ms: row.t_ms, direction: Direction::new(row.longitude_rad, row.latitude_rad) };
            match trace.users.iter_mut().find(|u| u.user == row.user_id) {
                Some(u) => {
                    let last = u.samples.last().unwrap().t_ms;
                    if sample.t_ms <= last {
                        return Err(err(line, format!("time {} not after {last} for user {}", sample.t_ms, u.user)));
                    }
                    u.samples.push(sample);
                }
                None => trace.users.push(UserTrace { user: row.user_id, samples: vec![sample] }),
            }
        }
        Ok(trace)
    }

    pub fn len(&self) -> usize {
        self.users.iter().map(|u| u.samples.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
