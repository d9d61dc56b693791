//! Plain-text parameter checkpoints.
//!
//! Format (line oriented, whitespace separated, `{}`-formatted floats which
//! round-trip f64 exactly):
//!
//! ```text
//! fairrep-checkpoint v1
//! feature-map layers=<L> norm=<0|1> radius=<r>
//! layer in=<in> out=<out>
//! w <in*out row-major values>
//! b <out values>
//! ...                        (repeated per layer)
//! head layers=<L>            (optional classifier head, same layer layout)
//! ...
//! end
//! ```

use crate::error::{Error, Result};
use crate::neural::{AffineLayer, ClassifierHead, FeatureMap};
use ndarray::{Array1, Array2};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

const MAGIC: &str = "fairrep-checkpoint v1";

pub fn save_checkpoint(
    path: &Path,
    map: &FeatureMap,
    head: Option<&ClassifierHead>,
) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(file, "{MAGIC}")?;
    let (norm, radius) = match map.sphere_radius() {
        Some(r) => (1, r),
        None => (0, 0.0),
    };
    writeln!(
        file,
        "feature-map layers={} norm={} radius={}",
        map.layer_count(),
        norm,
        radius
    )?;
    write_layers(&mut file, map.layers())?;
    if let Some(head) = head {
        writeln!(file, "head layers={}", head.feature_map().layer_count())?;
        write_layers(&mut file, head.feature_map().layers())?;
    }
    writeln!(file, "end")?;
    Ok(())
}

fn write_layers<W: Write>(w: &mut W, layers: &[AffineLayer]) -> Result<()> {
    for layer in layers {
        writeln!(
            w,
            "layer in={} out={}",
            layer.weight.nrows(),
            layer.weight.ncols()
        )?;
        write!(w, "w")?;
        for v in layer.weight.iter() {
            write!(w, " {v}")?;
        }
        writeln!(w)?;
        write!(w, "b")?;
        for v in layer.bias.iter() {
            write!(w, " {v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(FeatureMap, Option<ClassifierHead>)> {
    let file = BufReader::new(std::fs::File::open(path)?);
    let mut lines = file.lines();
    let magic = next_line(&mut lines)?;
    if magic.trim() != MAGIC {
        return Err(Error::Format(format!(
            "unsupported checkpoint header: {magic:?}"
        )));
    }
    let header = next_line(&mut lines)?;
    let fields = parse_kv(&header, "feature-map")?;
    let layer_count: usize = field(&fields, "layers")?;
    let norm: u8 = field(&fields, "norm")?;
    let radius: f64 = field(&fields, "radius")?;
    let layers = read_layers(&mut lines, layer_count)?;
    let map = FeatureMap::from_layers(layers, if norm == 1 { Some(radius) } else { None })
        .map_err(|e| Error::Format(format!("invalid checkpoint feature map: {e}")))?;

    let trailer = next_line(&mut lines)?;
    if trailer.trim() == "end" {
        return Ok((map, None));
    }
    let fields = parse_kv(&trailer, "head")?;
    let head_layer_count: usize = field(&fields, "layers")?;
    let head_layers = read_layers(&mut lines, head_layer_count)?;
    let head = FeatureMap::from_layers(head_layers, None)
        .and_then(ClassifierHead::from_feature_map)
        .map_err(|e| Error::Format(format!("invalid checkpoint head: {e}")))?;
    let end = next_line(&mut lines)?;
    if end.trim() != "end" {
        return Err(Error::Format("missing checkpoint trailer".into()));
    }
    Ok((map, Some(head)))
}

fn read_layers(
    lines: &mut std::io::Lines<BufReader<std::fs::File>>,
    count: usize,
) -> Result<Vec<AffineLayer>> {
    let mut layers = Vec::with_capacity(count);
    for _ in 0..count {
        let header = next_line(lines)?;
        let fields = parse_kv(&header, "layer")?;
        let input: usize = field(&fields, "in")?;
        let output: usize = field(&fields, "out")?;
        let wline = next_line(lines)?;
        let weight = parse_values(&wline, "w", input * output)?;
        let bline = next_line(lines)?;
        let bias = parse_values(&bline, "b", output)?;
        layers.push(AffineLayer {
            weight: Array2::from_shape_vec((input, output), weight)
                .map_err(|e| Error::Format(e.to_string()))?,
            bias: Array1::from_vec(bias),
        });
    }
    Ok(layers)
}

fn next_line(lines: &mut std::io::Lines<BufReader<std::fs::File>>) -> Result<String> {
    match lines.next() {
        Some(line) => Ok(line?),
        None => Err(Error::Format("truncated checkpoint".into())),
    }
}

fn parse_kv(line: &str, tag: &str) -> Result<Vec<(String, String)>> {
    let mut parts = line.split_whitespace();
    match parts.next() {
        Some(t) if t == tag => {}
        other => {
            return Err(Error::Format(format!(
                "expected `{tag}` line, found {other:?}"
            )))
        }
    }
    let mut out = Vec::new();
    for part in parts {
        match part.split_once('=') {
            Some((k, v)) => out.push((k.to_string(), v.to_string())),
            None => return Err(Error::Format(format!("malformed field {part:?}"))),
        }
    }
    Ok(out)
}

fn field<T: std::str::FromStr>(fields: &[(String, String)], key: &str) -> Result<T> {
    fields
        .iter()
        .find(|(k, _)| k == key)
        .ok_or_else(|| Error::Format(format!("missing field {key}")))
        .and_then(|(_, v)| {
            v.parse()
                .map_err(|_| Error::Format(format!("unparseable field {key}={v}")))
        })
}

fn parse_values(line: &str, tag: &str, expect: usize) -> Result<Vec<f64>> {
    let mut parts = line.split_whitespace();
    if parts.next() != Some(tag) {
        return Err(Error::Format(format!("expected `{tag}` value line")));
    }
    let values: std::result::Result<Vec<f64>, _> = parts.map(str::parse).collect();
    let values = values.map_err(|e| Error::Format(format!("bad float in checkpoint: {e}")))?;
    if values.len() != expect {
        return Err(Error::Format(format!(
            "expected {expect} values, found {}",
            values.len()
        )));
    }
    Ok(values)
}
