//! CSV artifacts. Every file opens with a versioned comment line followed by
//! `# key: value` metadata comments; floats carry 17 significant digits.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::spectral::{BoundaryPoint, Equation, KernelTable};
use crate::synthesis::VarianceSeries;

pub const VARIANCE_HEADER: &str = "# stochflux variance v1";
pub const KERNEL_HEADER: &str = "# stochflux kernel v1";
pub const RECONSTRUCTION_HEADER: &str = "# stochflux reconstruction v1";
pub const FLUX_HEADER: &str = "# stochflux flux v1";

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn coords(z: &BoundaryPoint) -> String {
    z.coords()
        .iter()
        .map(|c| fmt_f64(*c))
        .collect::<Vec<_>>()
        .join(" ")
}

fn parse_coords(s: &str) -> Result<BoundaryPoint> {
    let c = s
        .split_whitespace()
        .map(|v| {
            v.parse::<f64>()
                .map_err(|e| Error::Config(format!("bad coordinate `{v}`: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    BoundaryPoint::from_coords(&c)
}

/// Opens a CSV writer after emitting the version line and metadata comments.
pub(crate) fn csv_writer(
    path: &Path,
    header: &str,
    meta: &[(String, String)],
) -> Result<csv::Writer<BufWriter<File>>> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{header}")?;
    for (k, v) in meta {
        writeln!(out, "# {k}: {v}")?;
    }
    Ok(csv::Writer::from_writer(out))
}

struct Parsed {
    meta: BTreeMap<String, String>,
    rows: Vec<csv::StringRecord>,
}

fn read_csv(path: &Path, header: &str) -> Result<Parsed> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    if first.trim_end() != header {
        return Err(Error::Config(format!(
            "{}: expected `{header}`, found `{}`",
            path.display(),
            first.trim_end()
        )));
    }
    let mut rest = String::new();
    let mut meta = BTreeMap::new();
    for line in reader.lines() {
        let line = line?;
        match line.strip_prefix("# ") {
            Some(m) => {
                if let Some((k, v)) = m.split_once(": ") {
                    meta.insert(k.to_string(), v.to_string());
                }
            }
            None => {
                rest.push_str(&line);
                rest.push('\n');
            }
        }
    }
    let mut csv = csv::Reader::from_reader(rest.as_bytes());
    let rows = csv.records().collect::<Result<Vec<_>, _>>()?;
    Ok(Parsed { meta, rows })
}

impl Parsed {
    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let v = self
            .meta
            .get(key)
            .ok_or_else(|| Error::Config(format!("missing metadata `{key}`")))?;
        v.parse()
            .map_err(|e| Error::Config(format!("metadata `{key}` = `{v}`: {e}")))
    }
}

fn field<T: std::str::FromStr>(row: &csv::StringRecord, i: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let v = row
        .get(i)
        .ok_or_else(|| Error::Config(format!("row has no column {i}")))?;
    v.trim()
        .parse()
        .map_err(|e| Error::Config(format!("bad value `{v}`: {e}")))
}

/// Extra run metadata stamped into the variance file.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceMeta {
    pub seed: u64,
    pub workers: usize,
    pub requested: Vec<BoundaryPoint>,
}

pub fn write_variance_csv(
    path: &Path,
    series: &[VarianceSeries],
    meta: &VarianceMeta,
) -> Result<()> {
    let first = series
        .first()
        .ok_or_else(|| Error::InvalidArgument("no variance series to write".into()))?;
    let mut m = vec![
        ("paths".to_string(), first.paths.to_string()),
        ("noise_level".into(), fmt_f64(first.noise_level)),
        ("seed".into(), meta.seed.to_string()),
        ("workers".into(), meta.workers.to_string()),
        ("centered".into(), first.centered.to_string()),
        ("ht".into(), fmt_f64(first.ht)),
        ("standard_error".into(), "sqrt(2/P) * V_j".into()),
        ("points".into(), series.len().to_string()),
    ];
    for (i, s) in series.iter().enumerate() {
        m.push((format!("point {i} snapped"), coords(&s.point)));
        if let Some(r) = meta.requested.get(i) {
            m.push((format!("point {i} requested"), coords(r)));
        }
    }
    let mut w = csv_writer(path, VARIANCE_HEADER, &m)?;
    w.write_record(["point_id", "j", "t_j", "V_j"])?;
    for (i, s) in series.iter().enumerate() {
        for (j, v) in s.values.iter().enumerate() {
            let t = (j + 1) as f64 * s.ht;
            w.write_record([i.to_string(), (j + 1).to_string(), fmt_f64(t), fmt_f64(*v)])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_variance_csv(path: &Path) -> Result<Vec<VarianceSeries>> {
    let p = read_csv(path, VARIANCE_HEADER)?;
    let count: usize = p.get("points")?;
    let paths: usize = p.get("paths")?;
    let noise_level: f64 = p.get("noise_level")?;
    let ht: f64 = p.get("ht")?;
    let centered: bool = p.get("centered")?;
    let mut values = vec![Vec::new(); count];
    for row in &p.rows {
        let i: usize = field(row, 0)?;
        let j: usize = field(row, 1)?;
        let slot = values
            .get_mut(i)
            .ok_or_else(|| Error::Config(format!("point_id {i} out of range")))?;
        if j != slot.len() + 1 {
            return Err(Error::Config(format!(
                "point {i}: rows out of order at j = {j}"
            )));
        }
        slot.push(field(row, 3)?);
    }
    (0..count)
        .map(|i| {
            Ok(VarianceSeries {
                point: parse_coords(&p.get::<String>(&format!("point {i} snapped"))?)?,
                values: std::mem::take(&mut values[i]),
                paths,
                noise_level,
                ht,
                centered,
            })
        })
        .collect()
}

pub fn write_kernel_csv(path: &Path, tables: &[KernelTable]) -> Result<()> {
    let first = tables
        .first()
        .ok_or_else(|| Error::InvalidArgument("no kernel tables to write".into()))?;
    let equation = match first.equation {
        Equation::Heat => "heat",
        Equation::Wave => "wave",
    };
    let mut m = vec![
        ("equation".to_string(), equation.to_string()),
        ("ht".into(), fmt_f64(first.ht)),
        ("points".into(), tables.len().to_string()),
    ];
    for (i, t) in tables.iter().enumerate() {
        m.push((format!("point {i}"), coords(&t.z)));
        m.push((format!("point {i} truncation"), t.truncation.to_string()));
    }
    let mut w = csv_writer(path, KERNEL_HEADER, &m)?;
    w.write_record(["point_id", "j", "t_j", "G"])?;
    for (i, t) in tables.iter().enumerate() {
        for (j, (tj, g)) in t.times.iter().zip(&t.values).enumerate() {
            w.write_record([
                i.to_string(),
                (j + 1).to_string(),
                fmt_f64(*tj),
                fmt_f64(*g),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_kernel_csv(path: &Path) -> Result<Vec<KernelTable>> {
    let p = read_csv(path, KERNEL_HEADER)?;
    let count: usize = p.get("points")?;
    let ht: f64 = p.get("ht")?;
    let equation = match p.get::<String>("equation")?.as_str() {
        "heat" => Equation::Heat,
        "wave" => Equation::Wave,
        other => return Err(Error::Config(format!("unknown equation `{other}`"))),
    };
    let mut cols = vec![(Vec::new(), Vec::new()); count];
    for row in &p.rows {
        let i: usize = field(row, 0)?;
        let slot = cols
            .get_mut(i)
            .ok_or_else(|| Error::Config(format!("point_id {i} out of range")))?;
        slot.0.push(field(row, 2)?);
        slot.1.push(field(row, 3)?);
    }
    cols.into_iter()
        .enumerate()
        .map(|(i, (times, values))| {
            Ok(KernelTable {
                z: parse_coords(&p.get::<String>(&format!("point {i}"))?)?,
                equation,
                ht,
                times,
                values,
                truncation: p.get(&format!("point {i} truncation"))?,
            })
        })
        .collect()
}

pub fn write_reconstruction_csv(
    path: &Path,
    times: &[f64],
    f_squared: &[f64],
    strength: &[f64],
    truth_abs: Option<&[f64]>,
    meta: &[(String, String)],
) -> Result<()> {
    let mut w = csv_writer(path, RECONSTRUCTION_HEADER, meta)?;
    let mut header = vec!["j", "t_j", "f_squared", "strength"];
    if truth_abs.is_some() {
        header.push("truth_abs");
    }
    w.write_record(&header)?;
    for (k, t) in times.iter().enumerate() {
        let mut rec = vec![
            k.to_string(),
            fmt_f64(*t),
            fmt_f64(f_squared[k]),
            fmt_f64(strength[k]),
        ];
        if let Some(truth) = truth_abs {
            rec.push(fmt_f64(truth[k]));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
