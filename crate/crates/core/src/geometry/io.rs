//! CSV and ASCII PLY serialization of point clouds.
//!
//! CSV files carry a `x0,...,x{d-1},weight` header and one row per point. PLY
//! files store the same columns as `double` vertex properties.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::PointCloud;
use crate::error::{Error, Result};

pub fn write_csv(cloud: &PointCloud, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let mut header: Vec<String> = (0..cloud.dim()).map(|k| format!("x{k}")).collect();
    header.push("weight".into());
    w.write_record(&header)?;
    for (row, wt) in cloud.points().rows().into_iter().zip(cloud.weights()) {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(wt.to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<PointCloud> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let header = r.headers()?.clone();
    let d = header.len().checked_sub(1).filter(|d| *d > 0).ok_or_else(|| {
        Error::parse(path, "expected header x0,...,x{d-1},weight")
    })?;
    for (k, h) in header.iter().take(d).enumerate() {
        if h != format!("x{k}") {
            return Err(Error::parse(path, format!("unexpected column '{h}'")));
        }
    }
    if &header[d] != "weight" {
        return Err(Error::parse(path, "last column must be 'weight'"));
    }
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(path, e.to_string()))?;
        if vals.len() != d + 1 {
            return Err(Error::parse(path, "ragged row"));
        }
        coords.extend_from_slice(&vals[..d]);
        weights.push(vals[d]);
    }
    build(path, coords, weights, d)
}

fn build(path: &Path, coords: Vec<f64>, weights: Vec<f64>, d: usize) -> Result<PointCloud> {
    let n = weights.len();
    let points = Array2::from_shape_vec((n, d), coords).map_err(|e| Error::parse(path, e.to_string()))?;
    let total: f64 = weights.iter().sum();
    let weights = if (total - 1.0).abs() <= 1e-9 {
        // text round trips can drift in the last bits; renormalize
        Array1::from(weights) / total
    } else {
        return Err(Error::parse(path, format!("weights sum to {total}, expected 1")));
    };
    PointCloud::with_weights(points, weights)
}

fn ply_names(d: usize) -> Vec<String> {
    if d == 3 {
        vec!["x".into(), "y".into(), "z".into()]
    } else {
        (0..d).map(|k| format!("x{k}")).collect()
    }
}

pub fn write_ply(cloud: &PointCloud, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    out.push_str(&format!("element vertex {}\n", cloud.len()));
    for name in ply_names(cloud.dim()) {
        out.push_str(&format!("property double {name}\n"));
    }
    out.push_str("property double weight\nend_header\n");
    for (row, wt) in cloud.points().rows().into_iter().zip(cloud.weights()) {
        let mut parts: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        parts.push(wt.to_string());
        out.push_str(&parts.join(" "));
        out.push('\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_ply(path: &Path) -> Result<PointCloud> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some("ply") {
        return Err(Error::parse(path, "missing 'ply' magic"));
    }
    let mut n = None;
    let mut props = Vec::new();
    loop {
        let line = lines
            .next()
            .ok_or_else(|| Error::parse(path, "unterminated header"))?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts.as_slice() {
            ["format", "ascii", _] | ["comment", ..] => {}
            ["format", ..] => return Err(Error::parse(path, "only ASCII PLY is supported")),
            ["element", "vertex", count] => {
                n = Some(
                    count
                        .parse::<usize>()
                        .map_err(|e| Error::parse(path, e.to_string()))?,
                )
            }
            ["property", _, name] => props.push(name.to_string()),
            ["end_header"] => break,
            _ => return Err(Error::parse(path, format!("unexpected header line '{line}'"))),
        }
    }
    let n = n.ok_or_else(|| Error::parse(path, "no vertex element"))?;
    let has_weight = props.last().map(String::as_str) == Some("weight");
    let d = props.len() - usize::from(has_weight);
    let mut coords = Vec::with_capacity(n * d);
    let mut weights = Vec::with_capacity(n);
    for line in lines.take(n) {
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(str::parse::<f64>)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(path, e.to_string()))?;
        if vals.len() != props.len() {
            return Err(Error::parse(path, "vertex row does not match header"));
        }
        coords.extend_from_slice(&vals[..d]);
        weights.push(if has_weight { vals[d] } else { 1.0 / n as f64 });
    }
    if weights.len() != n {
        return Err(Error::parse(path, "fewer vertices than declared"));
    }
    build(path, coords, weights, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sample_shape, Shape};

    #[test]
    fn csv_ply_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cloud = sample_shape(Shape::SCurve, 37, 0.05, 11).unwrap();
        let csv1 = dir.path().join("a.csv");
        let ply = dir.path().join("a.ply");
        let csv2 = dir.path().join("b.csv");
        write_csv(&cloud, &csv1).unwrap();
        write_ply(&read_csv(&csv1).unwrap(), &ply).unwrap();
        write_csv(&read_ply(&ply).unwrap(), &csv2).unwrap();
        let back = read_csv(&csv2).unwrap();
        for (a, b) in back.points().iter().zip(cloud.points()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn csv_header_is_checked() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "a,b,weight\n1,2,1\n").unwrap();
        assert!(matches!(read_csv(&p), Err(Error::Parse { .. })));
    }

    #[test]
    fn missing_file_names_path() {
        let err = read_csv(Path::new("/nonexistent/X.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/X.csv"));
    }
}
