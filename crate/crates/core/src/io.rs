//! On-disk formats: observation dumps, image and voxel tables, PGM previews
//! and metric rows.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Scene;
use crate::metrics::GridImage;
use crate::waveform::{Observation, ObservationSet};

const OBS_MAGIC: &[u8; 8] = b"NFIOBS\x00\x01";

#[derive(Serialize, Deserialize)]
struct ObsHeader {
    noise_power: f64,
    seed: u64,
    records: Vec<RecordHeader>,
}

#[derive(Serialize, Deserialize)]
struct RecordHeader {
    rx: usize,
    tx: Vec<usize>,
    slot: usize,
    subcarrier: usize,
    len: usize,
}

/// Magic, little-endian u64 header length, JSON header, then every sample as
/// a pair of little-endian f64 in record order.
pub fn write_observations(w: &mut impl Write, obs: &ObservationSet) -> Result<()> {
    let header = ObsHeader {
        noise_power: obs.noise_power,
        seed: obs.seed,
        records: obs
            .records
            .iter()
            .map(|r| RecordHeader { rx: r.rx, tx: r.tx.clone(), slot: r.slot, subcarrier: r.subcarrier, len: r.y.len() })
            .collect(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;
    w.write_all(OBS_MAGIC)?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    for r in &obs.records {
        for v in &r.y {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_observations(r: &mut impl Read) -> Result<ObservationSet> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| Error::Format("truncated observation file".into()))?;
    if &magic != OBS_MAGIC {
        return Err(Error::Format("not an observation file".into()));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    if len > 1 << 30 {
        return Err(Error::Format("observation header too large".into()));
    }
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)?;
    let header: ObsHeader = serde_json::from_slice(&json).map_err(|e| Error::Format(e.to_string()))?;
    let mut records = Vec::with_capacity(header.records.len());
    let mut buf = [0u8; 16];
    for h in header.records {
        let mut y = Vec::with_capacity(h.len);
        for _ in 0..h.len {
            r.read_exact(&mut buf).map_err(|_| Error::Format("observation payload truncated".into()))?;
            let re = f64::from_le_bytes(buf[..8].try_into().unwrap());
            let im = f64::from_le_bytes(buf[8..].try_into().unwrap());
            y.push(C::new(re, im));
        }
        records.push(Observation { rx: h.rx, tx: h.tx, slot: h.slot, subcarrier: h.subcarrier, y });
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after observation payload".into()));
    }
    Ok(ObservationSet { noise_power: header.noise_power, seed: header.seed, records })
}

pub fn save_observations(path: &Path, obs: &ObservationSet) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_observations(&mut w, obs)?;
    w.flush()?;
    Ok(())
}

pub fn load_observations(path: &Path) -> Result<ObservationSet> {
    read_observations(&mut BufReader::new(File::open(path)?))
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

const GRID_TAG: &str = "# grid";

/// Grid image as CSV: a `# grid rows cols pitch_x pitch_y origin_x origin_y`
/// line, then one comma-separated line per row.
pub fn write_grid_csv(w: &mut impl Write, img: &GridImage) -> Result<()> {
    writeln!(
        w,
        "{GRID_TAG} {} {} {} {} {} {}",
        img.rows,
        img.cols,
        num(img.pitch.0),
        num(img.pitch.1),
        num(img.origin.0),
        num(img.origin.1)
    )?;
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for r in 0..img.rows {
        out.write_record(img.data[r * img.cols..(r + 1) * img.cols].iter().map(|&v| num(v)))?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a grid CSV. Files without the geometry line become unit grids.
pub fn read_grid_csv(text: &str) -> Result<GridImage> {
    let mut geometry = None;
    if let Some(first) = text.lines().next() {
        if let Some(rest) = first.strip_prefix(GRID_TAG) {
            let f: Vec<&str> = rest.split_whitespace().collect();
            if f.len() != 6 {
                return Err(Error::Format("grid line needs six fields".into()));
            }
            let p = |s: &str| s.parse::<f64>().map_err(|_| Error::Format(format!("bad number '{s}' in grid line")));
            let rows = f[0].parse::<usize>().map_err(|_| Error::Format("bad row count".into()))?;
            let cols = f[1].parse::<usize>().map_err(|_| Error::Format("bad column count".into()))?;
            geometry = Some((rows, cols, (p(f[2])?, p(f[3])?), (p(f[4])?, p(f[5])?)));
        }
    }
    let mut rd = csv::ReaderBuilder::new().has_headers(false).comment(Some(b'#')).from_reader(text.as_bytes());
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for rec in rd.records() {
        let rec = rec?;
        if *cols.get_or_insert(rec.len()) != rec.len() {
            return Err(Error::Format(format!("row {rows} has {} values", rec.len())));
        }
        for v in rec.iter() {
            data.push(v.trim().parse::<f64>().map_err(|_| Error::Format(format!("bad value '{v}' in row {rows}")))?);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::Format("empty image".into()))?;
    match geometry {
        Some((r, c, pitch, origin)) => {
            if (r, c) != (rows, cols) {
                return Err(Error::Format(format!("grid line says {r}×{c}, body is {rows}×{cols}")));
            }
            GridImage::new(rows, cols, pitch, origin, data)
        }
        None => GridImage::unit_grid(rows, cols, data),
    }
}

pub fn save_grid_csv(path: &Path, img: &GridImage) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_grid_csv(&mut w, img)?;
    w.flush()?;
    Ok(())
}

/// Voxel values as `x,y,z,value` rows at cell centres, in cell order.
pub fn write_voxel_csv(w: &mut impl Write, scene: &Scene, values: &[f64]) -> Result<()> {
    if values.len() != scene.cell_count() {
        return Err(Error::ShapeMismatch(format!("{} values for {} voxels", values.len(), scene.cell_count())));
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["x", "y", "z", "value"])?;
    for (q, &v) in values.iter().enumerate() {
        let c = scene.cell_center(q);
        out.write_record([num(c.x), num(c.y), num(c.z), num(v)])?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_voxel_csv(path: &Path, scene: &Scene, values: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_voxel_csv(&mut w, scene, values)?;
    w.flush()?;
    Ok(())
}

/// The `value` column of a voxel CSV.
pub fn read_voxel_csv(text: &str) -> Result<Vec<f64>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let col = rd
        .headers()?
        .iter()
        .position(|h| h == "value")
        .ok_or_else(|| Error::Format("voxel table has no value column".into()))?;
    rd.records()
        .map(|rec| {
            let rec = rec?;
            let v = rec.get(col).ok_or_else(|| Error::Format("short voxel row".into()))?;
            v.parse::<f64>().map_err(|_| Error::Format(format!("bad voxel value '{v}'")))
        })
        .collect()
}

/// Either table kind, flattened; voxel tables are detected by their header.
pub enum Table {
    Grid(GridImage),
    Voxels(Vec<f64>),
}

pub fn read_table(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path)?;
    if text.starts_with("x,y,z,") {
        Ok(Table::Voxels(read_voxel_csv(&text)?))
    } else {
        Ok(Table::Grid(read_grid_csv(&text)?))
    }
}

/// 8-bit binary PGM scaled to the image maximum.
pub fn write_pgm(w: &mut impl Write, rows: usize, cols: usize, data: &[f64]) -> Result<()> {
    if data.len() != rows * cols {
        return Err(Error::ShapeMismatch("PGM data does not match its size".into()));
    }
    let mx = data.iter().cloned().fold(0.0, f64::max);
    write!(w, "P5\n{cols} {rows}\n255\n")?;
    let bytes: Vec<u8> = data
        .iter()
        .map(|&v| if mx > 0.0 { (v / mx * 255.0).round().clamp(0.0, 255.0) as u8 } else { 0 })
        .collect();
    w.write_all(&bytes)?;
    Ok(())
}

pub fn save_pgm(path: &Path, rows: usize, cols: usize, data: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_pgm(&mut w, rows, cols, data)?;
    w.flush()?;
    Ok(())
}

/// Per-unit projected strength at every voxel: `x,y,z,ru0,ru1,...`.
pub fn write_strength_csv(w: &mut impl Write, scene: &Scene, per_unit: &[Vec<f64>]) -> Result<()> {
    let q = scene.cell_count();
    if per_unit.iter().any(|v| v.len() != q) {
        return Err(Error::ShapeMismatch("strength column length differs from cell count".into()));
    }
    let mut out = csv::Writer::from_writer(w);
    let mut head = vec!["x".to_string(), "y".into(), "z".into()];
    head.extend((0..per_unit.len()).map(|u| format!("ru{u}")));
    out.write_record(&head)?;
    for cell in 0..q {
        let c = scene.cell_center(cell);
        let mut row = vec![num(c.x), num(c.y), num(c.z)];
        row.extend(per_unit.iter().map(|v| num(v[cell])));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// One `run_id,metric,value` row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub run_id: String,
    pub metric: String,
    pub value: f64,
}

pub fn write_metric_rows(w: &mut impl Write, rows: &[MetricRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["run_id", "metric", "value"])?;
    for r in rows {
        out.write_record([r.run_id.as_str(), r.metric.as_str(), &num(r.value)])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_metric_rows(text: &str) -> Result<Vec<MetricRow>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    rd.deserialize().map(|r| r.map_err(Error::from)).collect()
}
