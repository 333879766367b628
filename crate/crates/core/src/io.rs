//! CSV forms of signal records and feature matrices. Floats are written in
//! shortest round-trip notation, so reading a file back is exact.

use std::path::Path;

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, FeatureVector, SplitTag, FEATURE_NAMES, N_FEATURES};
use crate::synth::{AdhesionLabel, SignalRecord};

pub const RECORD_HEADER: [&str; 8] = ["t", "ax", "ay", "az", "pads", "label", "condition", "seed_id"];

pub fn write_record_csv(rec: &SignalRecord, path: &Path) -> Result<()> {
    rec.validate()?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RECORD_HEADER)?;
    let seed = rec.seed.to_string();
    for i in 0..rec.len() {
        w.write_record([
            rec.t[i].to_string().as_str(),
            &rec.ax[i].to_string(),
            &rec.ay[i].to_string(),
            &rec.az[i].to_string(),
            &rec.pads[i].to_string(),
            rec.label[i].as_str(),
            &rec.condition_tag,
            &seed,
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn parse<T: std::str::FromStr>(field: &str, what: &str, line: usize) -> Result<T> {
    field
        .parse()
        .map_err(|_| Error::Schema(format!("line {line}: cannot parse {what} from {field:?}")))
}

pub fn read_record_csv(path: &Path) -> Result<SignalRecord> {
    let mut r = csv::Reader::from_path(path)?;
    if r.headers()?.iter().ne(RECORD_HEADER) {
        return Err(Error::Schema(format!(
            "{}: unexpected record header",
            path.display()
        )));
    }
    let mut rec = SignalRecord {
        t: Vec::new(),
        ax: Vec::new(),
        ay: Vec::new(),
        az: Vec::new(),
        pads: Vec::new(),
        label: Vec::new(),
        condition_tag: String::new(),
        seed: 0,
    };
    for (i, row) in r.records().enumerate() {
        let row = row?;
        let line = i + 2;
        rec.t.push(parse(&row[0], "t", line)?);
        rec.ax.push(parse(&row[1], "ax", line)?);
        rec.ay.push(parse(&row[2], "ay", line)?);
        rec.az.push(parse(&row[3], "az", line)?);
        rec.pads.push(parse(&row[4], "pads", line)?);
        rec.label.push(parse::<AdhesionLabel>(&row[5], "label", line)?);
        if i == 0 {
            rec.condition_tag = row[6].to_string();
            rec.seed = parse(&row[7], "seed_id", line)?;
        } else if row[6] != *rec.condition_tag {
            return Err(Error::Schema(format!(
                "line {line}: condition changes within a record"
            )));
        }
    }
    if rec.is_empty() {
        return Err(Error::Schema(format!(
            "{}: record has no samples",
            path.display()
        )));
    }
    rec.validate()?;
    Ok(rec)
}

pub fn write_feature_csv(mat: &FeatureMatrix, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(FEATURE_NAMES.iter().copied().chain(["label", "condition"]))?;
    for row in &mat.rows {
        w.write_record(
            row.values
                .iter()
                .map(|v| v.to_string())
                .chain([row.label.as_str().to_string(), row.condition_tag.clone()]),
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_feature_csv(path: &Path, split: SplitTag) -> Result<FeatureMatrix> {
    let mut r = csv::Reader::from_path(path)?;
    let expected: Vec<&str> = FEATURE_NAMES
        .iter()
        .copied()
        .chain(["label", "condition"])
        .collect();
    if r.headers()?.iter().ne(expected.iter().copied()) {
        return Err(Error::Schema(format!(
            "{}: unexpected feature header",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for (i, row) in r.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let values = (0..N_FEATURES)
            .map(|j| parse::<f64>(&row[j], FEATURE_NAMES[j], line))
            .collect::<Result<Vec<_>>>()?;
        rows.push(FeatureVector {
            values,
            label: parse(&row[N_FEATURES], "label", line)?,
            condition_tag: row[N_FEATURES + 1].to_string(),
        });
    }
    Ok(FeatureMatrix {
        rows,
        feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        split,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synthesize_records, Benchmark, DatasetConfig};
    use crate::synth::canonical_conditions;

    fn small() -> (Vec<SignalRecord>, Benchmark) {
        let cfg = DatasetConfig {
            duration_s: 4.0,
            ..Default::default()
        };
        let recs = synthesize_records(&canonical_conditions()[..1], &cfg, 9).unwrap();
        let b = Benchmark::build(recs.clone(), &cfg.dsp, cfg.train_frac, 9).unwrap();
        (recs, b)
    }

    #[test]
    fn records_round_trip_exactly() {
        let (recs, _) = small();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        write_record_csv(&recs[1], &p).unwrap();
        assert_eq!(read_record_csv(&p).unwrap(), recs[1]);
    }

    #[test]
    fn features_round_trip_exactly() {
        let (_, b) = small();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        write_feature_csv(&b.test, &p).unwrap();
        assert_eq!(read_feature_csv(&p, SplitTag::Test).unwrap(), b.test);
    }

    #[test]
    fn bad_rows_are_schema_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        std::fs::write(
            &p,
            "t,ax,ay,az,pads,label,condition,seed_id\n0,1,2,x,6,safe,1kg,3\n",
        )
        .unwrap();
        let e = read_record_csv(&p).unwrap_err();
        assert!(matches!(e, Error::Schema(ref m) if m.contains("line 2")), "{e}");
        std::fs::write(&p, "a,b\n1,2\n").unwrap();
        assert!(matches!(read_record_csv(&p), Err(Error::Schema(_))));
        std::fs::write(
            &p,
            "t,ax,ay,az,pads,label,condition,seed_id\n0,1,2,3,4,safe,1kg,3\n",
        )
        .unwrap();
        assert!(matches!(read_record_csv(&p), Err(Error::Schema(_))));
    }
}
