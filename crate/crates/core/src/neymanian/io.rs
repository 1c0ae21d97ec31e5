//! Readers for the two observed-data CSV layouts.

use std::io::Read;
use std::path::Path;

use super::randomization::ObservedData;
use crate::design_matrix::ModelMatrix;
use crate::error::{Error, Result};

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r)
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Parse(format!("missing column `{name}`")))
}

fn parse_int<T: std::str::FromStr>(field: Option<&str>, what: &str, line: usize) -> Result<T> {
    let raw = field.unwrap_or("");
    raw.parse()
        .map_err(|_| Error::Parse(format!("row {line}: cannot parse {what} from {raw:?}")))
}

impl ObservedData {
    /// Aggregated counts with header `arm,n,n_obs`; arms are numbered `1..=J`
    /// in model-matrix row order and each must appear exactly once.
    pub fn read_aggregated<R: Read>(r: R, m: &ModelMatrix) -> Result<Self> {
        let mut rdr = reader(r);
        let headers = rdr.headers()?.clone();
        let (c_arm, c_n, c_obs) = (
            column(&headers, "arm")?,
            column(&headers, "n")?,
            column(&headers, "n_obs")?,
        );
        let arms = m.arms();
        let mut sizes: Vec<Option<u64>> = vec![None; arms];
        let mut successes = vec![0u64; arms];
        for (idx, record) in rdr.records().enumerate() {
            let record = record?;
            let line = idx + 1;
            let arm: usize = parse_int(record.get(c_arm), "arm", line)?;
            if arm == 0 || arm > arms {
                return Err(Error::Parse(format!(
                    "row {line}: arm {arm} outside 1..={arms}"
                )));
            }
            if sizes[arm - 1].is_some() {
                return Err(Error::Parse(format!("row {line}: arm {arm} listed twice")));
            }
            sizes[arm - 1] = Some(parse_int(record.get(c_n), "n", line)?);
            successes[arm - 1] = parse_int(record.get(c_obs), "n_obs", line)?;
        }
        let sizes = sizes
            .into_iter()
            .enumerate()
            .map(|(j, n)| n.ok_or_else(|| Error::invalid(format!("arm {} has no data", j + 1))))
            .collect::<Result<Vec<_>>>()?;
        ObservedData::new(sizes, successes)
    }

    /// Unit-level records with header `f1..fK,outcome`. Factor levels must be
    /// -1 or 1; each unit is routed to the arm with matching levels.
    pub fn read_unit_level<R: Read>(r: R, m: &ModelMatrix) -> Result<Self> {
        let mut rdr = reader(r);
        let headers = rdr.headers()?.clone();
        let factor_cols = (1..=m.factors())
            .map(|k| column(&headers, &format!("f{k}")))
            .collect::<Result<Vec<_>>>()?;
        let c_out = column(&headers, "outcome")?;
        let arms = m.arms();
        let mut sizes = vec![0u64; arms];
        let mut successes = vec![0u64; arms];
        let mut levels = vec![0i8; factor_cols.len()];
        for (idx, record) in rdr.records().enumerate() {
            let record = record?;
            let line = idx + 1;
            for (slot, &c) in levels.iter_mut().zip(&factor_cols) {
                *slot = parse_int(record.get(c), "factor level", line)?;
            }
            let arm = m.arm_of_levels(&levels).ok_or_else(|| {
                Error::Parse(format!(
                    "row {line}: factor levels {levels:?} are not all -1 or 1"
                ))
            })?;
            let y: u8 = parse_int(record.get(c_out), "outcome", line)?;
            if y > 1 {
                return Err(Error::Parse(format!(
                    "row {line}: outcome must be 0 or 1, got {y}"
                )));
            }
            sizes[arm] += 1;
            successes[arm] += u64::from(y);
        }
        if let Some(j) = sizes.iter().position(|&n| n == 0) {
            return Err(Error::invalid(format!("arm {} was never observed", j + 1)));
        }
        ObservedData::new(sizes, successes)
    }

    pub fn from_aggregated_path(path: &Path, m: &ModelMatrix) -> Result<Self> {
        Self::read_aggregated(std::fs::File::open(path)?, m)
    }

    pub fn from_unit_level_path(path: &Path, m: &ModelMatrix) -> Result<Self> {
        Self::read_unit_level(std::fs::File::open(path)?, m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregated_round() {
        let m = ModelMatrix::new(1).unwrap();
        let obs =
            ObservedData::read_aggregated("arm,n,n_obs\n2,5,3\n1,5,2\n".as_bytes(), &m).unwrap();
        assert_eq!(obs.sizes(), &[5, 5]);
        assert_eq!(obs.successes(), &[2, 3]);

        for bad in [
            "arm,n,n_obs\n1,5,2\n",
            "arm,n,n_obs\n1,5,2\n1,5,2\n",
            "arm,n,n_obs\n1,5,2\n3,5,2\n",
            "arm,n,n_obs\n1,5,2\n2,1,0\n",
            "arm,n\n1,5\n2,5\n",
            "arm,n,n_obs\n1,5,x\n2,5,1\n",
        ] {
            assert!(
                ObservedData::read_aggregated(bad.as_bytes(), &m).is_err(),
                "{bad}"
            );
        }
    }

    #[test]
    fn unit_level_routing() {
        let m = ModelMatrix::new(2).unwrap();
        let mut data = String::from("f1,f2,outcome\n");
        // arm order: (-1,-1), (-1,1), (1,-1), (1,1)
        for (f1, f2, ys) in [
            (-1, -1, [0, 0]),
            (-1, 1, [1, 0]),
            (1, -1, [1, 1]),
            (1, 1, [0, 1]),
        ] {
            for y in ys {
                data.push_str(&format!("{f1},{f2},{y}\n"));
            }
        }
        let obs = ObservedData::read_unit_level(data.as_bytes(), &m).unwrap();
        assert_eq!(obs.sizes(), &[2, 2, 2, 2]);
        assert_eq!(obs.successes(), &[0, 1, 2, 1]);

        let missing_arm = "f1,f2,outcome\n-1,-1,0\n-1,-1,1\n1,1,0\n1,1,1\n";
        assert!(ObservedData::read_unit_level(missing_arm.as_bytes(), &m).is_err());
        let bad_level = "f1,f2,outcome\n0,1,1\n";
        assert!(ObservedData::read_unit_level(bad_level.as_bytes(), &m).is_err());
        let single = "f1,f2,outcome\n-1,-1,0\n-1,1,0\n-1,1,0\n1,-1,1\n1,-1,1\n1,1,1\n1,1,1\n";
        assert!(ObservedData::read_unit_level(single.as_bytes(), &m).is_err());
    }
}
