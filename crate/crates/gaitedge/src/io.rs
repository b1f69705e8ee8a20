//! Silhouette file I/O and dataset discovery.
//!
//! Frames are binary PGMs (P5). Maxval 255 stores plain bytes; maxval 65535
//! stores big-endian 16-bit samples and is used for float-valued grids such
//! as synthesized composites. A file whose samples are all exactly 0 or
//! maxval decodes as a binary grid; anything else decodes as float with
//! values scaled by 1/maxval.
//!
//! Datasets are directory trees `root/<subject>/<condition>/<view>/` holding
//! `frame_<index>.pgm` files. Frame order is numeric on the parsed index, so
//! frame_2 sorts before frame_10 even if a writer changes zero padding.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::{round_half_up, Condition, GaitSequence, Grid};

pub fn load_grid(path: &Path) -> Result<Grid> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes).map_err(|reason| Error::MalformedFile {
        path: path.to_path_buf(),
        reason,
    })
}

pub fn save_grid(grid: &Grid, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let res = if grid.is_binary() {
        write_pgm8(grid, &mut w)
    } else {
        write_pgm16(grid, &mut w)
    };
    res.and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn write_pgm8(grid: &Grid, w: &mut impl Write) -> std::io::Result<()> {
    write!(w, "P5\n{} {}\n255\n", grid.width(), grid.height())?;
    let payload: Vec<u8> = grid
        .values()
        .iter()
        .map(|&v| if v == 0.0 { 0u8 } else { 255u8 })
        .collect();
    w.write_all(&payload)
}

fn write_pgm16(grid: &Grid, w: &mut impl Write) -> std::io::Result<()> {
    write!(w, "P5\n{} {}\n65535\n", grid.width(), grid.height())?;
    let mut payload = Vec::with_capacity(grid.values().len() * 2);
    for &v in grid.values() {
        let q = round_half_up(v * 65535.0) as u16;
        payload.extend_from_slice(&q.to_be_bytes());
    }
    w.write_all(&payload)
}

/// Header tokenizer: skips whitespace and `#` comments, per the netpbm
/// grammar. Returns (token, rest-offset).
fn next_token(bytes: &[u8], mut pos: usize) -> std::result::Result<(usize, usize), String> {
    loop {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        break;
    }
    if pos >= bytes.len() {
        return Err("truncated header".into());
    }
    let start = pos;
    while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
        pos += 1;
    }
    Ok((start, pos))
}

fn parse_pgm(bytes: &[u8]) -> std::result::Result<Grid, String> {
    if bytes.len() < 2 || &bytes[0..2] != b"P5" {
        return Err("not a P5 pgm".into());
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        let (s, e) = next_token(bytes, pos)?;
        let text = std::str::from_utf8(&bytes[s..e]).map_err(|_| "non-ascii header")?;
        *field = text
            .parse::<usize>()
            .map_err(|_| format!("bad header token {text:?}"))?;
        pos = e;
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(format!("degenerate dimensions {width}x{height}"));
    }
    if maxval != 255 && maxval != 65535 {
        return Err(format!("unsupported maxval {maxval} (expected 255 or 65535)"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err("missing raster separator".into());
    }
    pos += 1;
    let n = width * height;
    let bytes_per_sample = if maxval == 255 { 1 } else { 2 };
    let raster = &bytes[pos..];
    if raster.len() != n * bytes_per_sample {
        return Err(format!(
            "raster length {} does not match {}x{} at maxval {}",
            raster.len(),
            width,
            height,
            maxval
        ));
    }
    let samples: Vec<u32> = if maxval == 255 {
        raster.iter().map(|&b| b as u32).collect()
    } else {
        raster
            .chunks_exact(2)
            .map(|p| u16::from_be_bytes([p[0], p[1]]) as u32)
            .collect()
    };
    let is_binary = samples.iter().all(|&s| s == 0 || s == maxval as u32);
    let values: Vec<f64> = if is_binary {
        samples
            .iter()
            .map(|&s| if s == 0 { 0.0 } else { 1.0 })
            .collect()
    } else {
        if let Some(&bad) = samples.iter().find(|&&s| s > maxval as u32) {
            return Err(format!("sample {bad} exceeds maxval {maxval}"));
        }
        samples
            .iter()
            .map(|&s| s as f64 / maxval as f64)
            .collect()
    };
    let grid = if is_binary {
        Grid::binary(height, width, values)
    } else {
        Grid::float(height, width, values)
    };
    grid.map_err(|e| e.to_string())
}

/// One discovered (subject, condition, view) capture directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceEntry {
    pub subject: String,
    pub condition: Condition,
    pub view: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone)]
pub struct DatasetLayout {
    pub root: PathBuf,
    pub entries: Vec<SequenceEntry>,
}

impl DatasetLayout {
    pub fn subjects(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.entries.iter().map(|e| e.subject.as_str()).collect();
        set.into_iter().map(String::from).collect()
    }

    pub fn views(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.entries.iter().map(|e| e.view.as_str()).collect();
        set.into_iter().map(String::from).collect()
    }
}

fn subdirs(path: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    let rd = fs::read_dir(path).map_err(|e| Error::io(path, e))?;
    for entry in rd {
        let entry = entry.map_err(|e| Error::io(path, e))?;
        let p = entry.path();
        if p.is_dir() {
            if let Some(name) = p.file_name().and_then(|n| n.to_str()) {
                out.push((name.to_string(), p.clone()));
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Walk `root/<subject>/<condition>/<view>` and record every leaf directory
/// that contains at least one frame file. Entries come back sorted by
/// (subject, condition, view).
pub fn scan_dataset(root: &Path) -> Result<DatasetLayout> {
    let mut entries = Vec::new();
    let mut seen = BTreeSet::new();
    for (subject, subject_path) in subdirs(root)? {
        for (condition, condition_path) in subdirs(&subject_path)? {
            for (view, view_path) in subdirs(&condition_path)? {
                if frame_files(&view_path)?.is_empty() {
                    continue;
                }
                let key = (subject.clone(), condition.clone(), view.clone());
                if !seen.insert(key) {
                    return Err(Error::DuplicateEntry {
                        subject,
                        condition,
                        view,
                    });
                }
                entries.push(SequenceEntry {
                    subject: subject.clone(),
                    condition: Condition::new(&condition),
                    view,
                    path: view_path,
                });
            }
        }
    }
    if entries.is_empty() {
        return Err(Error::EmptyDataset {
            root: root.to_path_buf(),
        });
    }
    entries.sort_by(|a, b| {
        (&a.subject, a.condition.label(), &a.view).cmp(&(&b.subject, b.condition.label(), &b.view))
    });
    Ok(DatasetLayout {
        root: root.to_path_buf(),
        entries,
    })
}

/// Frame files in numeric index order. Only `frame_<digits>.pgm` names count;
/// anything else in the directory is ignored.
pub fn frame_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut frames: Vec<(u64, PathBuf)> = Vec::new();
    let rd = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in rd {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let p = entry.path();
        let Some(name) = p.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if let Some(idx) = name
            .strip_prefix("frame_")
            .and_then(|rest| rest.strip_suffix(".pgm"))
            .and_then(|digits| digits.parse::<u64>().ok())
        {
            frames.push((idx, p));
        }
    }
    frames.sort();
    Ok(frames.into_iter().map(|(_, p)| p).collect())
}

pub fn load_sequence(entry: &SequenceEntry) -> Result<GaitSequence> {
    let paths = frame_files(&entry.path)?;
    let mut frames = Vec::with_capacity(paths.len());
    for p in &paths {
        frames.push(load_grid(p)?);
    }
    GaitSequence::new(
        frames,
        entry.subject.clone(),
        entry.condition.clone(),
        entry.view.clone(),
    )
}

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:04}.pgm")
}
