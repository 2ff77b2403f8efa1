//! JSON-lines persistence: one header record, then one record per trajectory.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Point;
use crate::walk::WalkPath;

use super::{Base, Sampler, Soup, Trajectory};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SoupHeader {
    pub d: usize,
    pub u_low: f64,
    pub u_high: f64,
    pub seed: u64,
    pub escape_radius: u32,
    pub base: Base,
    pub cap_k: Option<f64>,
    pub sampler: Sampler,
    pub truncation_bound: Option<f64>,
    pub count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generation: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrajectoryRecord {
    pub label: f64,
    pub start: Point,
    pub fwd: Vec<Point>,
    pub bwd: Vec<Point>,
    pub truncated: bool,
    #[serde(default)]
    pub bwd_start_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generation: Option<usize>,
}

impl SoupHeader {
    pub fn of(soup: &Soup, generation: Option<usize>) -> Self {
        SoupHeader {
            d: soup.dim(),
            u_low: soup.u_low,
            u_high: soup.u_high,
            seed: soup.seed,
            escape_radius: soup.escape_radius,
            base: soup.base.clone(),
            cap_k: soup.cap_k,
            sampler: soup.sampler,
            truncation_bound: soup.truncation_bound,
            count: soup.len(),
            generation,
        }
    }
}

/// Writes `soup` with an optional generation index on every record.
pub fn write_jsonl<W: Write>(soup: &Soup, generation: Option<usize>, mut w: W) -> Result<()> {
    serde_json::to_writer(&mut w, &SoupHeader::of(soup, generation))?;
    w.write_all(b"\n")?;
    let packer = soup.packer();
    for t in soup.trajectories() {
        let rec = TrajectoryRecord {
            label: t.label,
            start: t.start,
            fwd: t.forward.points(packer).collect(),
            bwd: t.backward.points(packer).collect(),
            truncated: t.truncated,
            bwd_start_index: t.backward.start_index,
            generation,
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_jsonl_file(soup: &Soup, generation: Option<usize>, path: &Path) -> Result<()> {
    write_jsonl(soup, generation, BufWriter::new(File::create(path)?))
}

/// Reads soups written by [`write_jsonl`]; several soups may follow each
/// other in one stream (generation stacks).
pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<(SoupHeader, Soup)>> {
    let mut out = Vec::new();
    let mut lines = r.lines().enumerate().filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()));
    while let Some((no, line)) = lines.next() {
        let header: SoupHeader =
            serde_json::from_str(&line?).map_err(|e| Error::Format(format!("line {}: header: {e}", no + 1)))?;
        let packer = crate::lattice::Packer::new(header.d)?;
        if header.base.dim() != header.d {
            return Err(Error::Format(format!("line {}: base dimension differs from d", no + 1)));
        }
        let mut trajectories = Vec::with_capacity(header.count);
        for _ in 0..header.count {
            let (no, line) = lines.next().ok_or_else(|| Error::Format("truncated soup file".into()))?;
            let rec: TrajectoryRecord =
                serde_json::from_str(&line?).map_err(|e| Error::Format(format!("line {}: {e}", no + 1)))?;
            if rec.fwd.first() != Some(&rec.start) || rec.bwd.first() != Some(&rec.start) {
                return Err(Error::Format(format!("line {}: paths must start at the start point", no + 1)));
            }
            let forward = WalkPath::from_points(&packer, &rec.fwd, rec.truncated, header.escape_radius)?;
            let mut backward = WalkPath::from_points(&packer, &rec.bwd, rec.truncated, header.escape_radius)?;
            backward.start_index = rec.bwd_start_index;
            trajectories.push(Arc::new(Trajectory::new(rec.label, rec.start, forward, backward)));
        }
        let mut soup = Soup::from_parts(
            header.base.clone(),
            header.u_low,
            header.u_high,
            trajectories,
            header.seed,
            header.escape_radius,
            header.cap_k,
            header.sampler,
        )?;
        soup.truncation_bound = header.truncation_bound;
        out.push((header, soup));
    }
    Ok(out)
}

pub fn read_jsonl_file(path: &Path) -> Result<Vec<(SoupHeader, Soup)>> {
    read_jsonl(BufReader::new(File::open(path)?))
}
