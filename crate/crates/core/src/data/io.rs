//! Dataset CSV: header `f0..f{F-1}, y0..y{K-1}` followed by optional
//! `z0..z{K-1}` (clean labels) and `flag` columns.

use std::fs;
use std::path::Path;

use serde::Serialize;

use super::Dataset;
use crate::error::{Error, Result};
use crate::numkit::Matrix;

struct Layout {
    features: usize,
    classes: usize,
    clean: bool,
    flag: bool,
}

impl Layout {
    fn width(&self) -> usize {
        self.features + self.classes * (1 + self.clean as usize) + self.flag as usize
    }

    fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = (0..self.features).map(|i| format!("f{i}")).collect();
        h.extend((0..self.classes).map(|i| format!("y{i}")));
        if self.clean {
            h.extend((0..self.classes).map(|i| format!("z{i}")));
        }
        if self.flag {
            h.push("flag".into());
        }
        h
    }

    fn parse(path: &Path, header: &csv::StringRecord) -> Result<Self> {
        let fail = |msg: String| Error::Format {
            path: path.to_path_buf(),
            msg,
        };
        let count = |prefix: char| {
            header
                .iter()
                .filter(|c| c.starts_with(prefix) && c[1..].parse::<usize>().is_ok())
                .count()
        };
        let features = count('f');
        let classes = count('y');
        let clean_cols = count('z');
        let flag = header.iter().any(|c| c == "flag");
        if features == 0 || classes == 0 {
            return Err(fail(format!(
                "header must declare feature columns f0.. and label columns y0.., found F={features}, K={classes}"
            )));
        }
        if clean_cols != 0 && clean_cols != classes {
            return Err(fail(format!(
                "header declares K={classes} noisy label columns but {clean_cols} clean label columns (F={features})"
            )));
        }
        let layout = Layout {
            features,
            classes,
            clean: clean_cols != 0,
            flag,
        };
        let expected = layout.header();
        if header.len() != expected.len() || header.iter().zip(&expected).any(|(a, b)| a != b) {
            return Err(fail(format!(
                "expected {} columns `{}` for F={features}, K={classes}, found {} columns",
                expected.len(),
                expected.join(","),
                header.len()
            )));
        }
        Ok(layout)
    }
}

fn fmt_label(v: f64) -> &'static str {
    if v == 0.0 {
        "0"
    } else {
        "1"
    }
}

pub fn write_csv(path: &Path, ds: &Dataset) -> Result<()> {
    ds.validate()?;
    let layout = Layout {
        features: ds.feature_dim(),
        classes: ds.classes(),
        clean: ds.clean_labels.is_some(),
        flag: ds.corruption_flags.is_some(),
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(layout.header())?;
    for r in 0..ds.len() {
        let mut rec: Vec<String> = ds.features.row(r).iter().map(|v| v.to_string()).collect();
        rec.extend(ds.noisy_labels.row(r).iter().map(|&v| fmt_label(v).to_string()));
        if let Some(c) = &ds.clean_labels {
            rec.extend(c.row(r).iter().map(|&v| fmt_label(v).to_string()));
        }
        if let Some(f) = &ds.corruption_flags {
            rec.push(if f[r] { "1" } else { "0" }.to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    if text.trim().is_empty() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            msg: "empty file: expected a header row `f0..,y0..[,z0..,flag]`".into(),
        });
    }
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let layout = Layout::parse(path, rdr.headers()?)?;
    let (f, k) = (layout.features, layout.classes);

    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut z = Vec::new();
    let mut flags = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let fail = |msg: String| Error::Data {
            path: path.to_path_buf(),
            line,
            msg,
        };
        if rec.len() != layout.width() {
            return Err(fail(format!(
                "expected {} columns (F={f}, K={k}), found {}",
                layout.width(),
                rec.len()
            )));
        }
        let num = |i: usize| -> Result<f64> {
            let v: f64 = rec[i]
                .parse()
                .map_err(|_| fail(format!("column {} is not a number: `{}`", i + 1, &rec[i])))?;
            if !v.is_finite() {
                return Err(fail(format!("column {} is not finite", i + 1)));
            }
            Ok(v)
        };
        let bit = |i: usize| -> Result<f64> {
            match &rec[i] {
                "0" => Ok(0.0),
                "1" => Ok(1.0),
                s => Err(fail(format!("column {} must be 0 or 1, found `{s}`", i + 1))),
            }
        };
        for i in 0..f {
            x.push(num(i)?);
        }
        for i in f..f + k {
            y.push(bit(i)?);
        }
        if layout.clean {
            for i in f + k..f + 2 * k {
                z.push(bit(i)?);
            }
        }
        if layout.flag {
            flags.push(bit(layout.width() - 1)? == 1.0);
        }
    }
    let m = x.len() / f;
    let ds = Dataset::new(
        Matrix::from_vec(m, f, x)?,
        Matrix::from_vec(m, k, y)?,
        layout.clean.then(|| Matrix::from_vec(m, k, z)).transpose()?,
        layout.flag.then_some(flags),
    );
    ds.map_err(|e| Error::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

/// Writes `value` as pretty JSON, used for generation sidecars.
pub fn write_manifest<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}
