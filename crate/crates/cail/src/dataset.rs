//! Dataset files in JSON-lines form.
//!
//! Line 1 is the header
//! `{format_version, scale, mode, n_state, n_action, M_truth, gt_graphs, seed}`
//! with `gt_graphs` as nested 0/1 arrays over the joint node order (states,
//! then actions). Every further line is one sequence
//! `{states, actions, regimes, split}`: `T × n_state` and `T × n_action` real
//! arrays, `T` regime indices and `"train" | "val" | "test"`.

use std::io::{BufRead, Write};
use std::path::Path;

use cail_core::diff::Matrix;
use cail_core::graph::Adjacency;
use cail_core::kuramoto::{Mode, Scale, Sequence, Split, TrajectoryDataset};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::json;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format_version: u32,
    scale: Scale,
    mode: Mode,
    n_state: usize,
    n_action: usize,
    #[serde(rename = "M_truth")]
    m_truth: usize,
    gt_graphs: Vec<Vec<Vec<u8>>>,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SequenceLine {
    states: Vec<Vec<f64>>,
    actions: Vec<Vec<f64>>,
    regimes: Vec<usize>,
    split: Split,
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

fn matrix(rows: &[Vec<f64>], cols: usize, what: &str, line: usize) -> Result<Matrix, Error> {
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Format(format!("line {line}: every {what} row needs {cols} values")));
    }
    let data = rows.iter().flatten().copied().collect();
    Ok(Matrix::from_vec(rows.len(), cols, data))
}

pub fn write_dataset<W: Write>(out: &mut W, ds: &TrajectoryDataset) -> Result<(), Error> {
    let header = Header {
        format_version: FORMAT_VERSION,
        scale: ds.scale,
        mode: ds.mode,
        n_state: ds.n_state,
        n_action: ds.n_action,
        m_truth: ds.gt_graphs.len(),
        gt_graphs: ds.gt_graphs.iter().map(Adjacency::to_rows).collect(),
        seed: ds.seed,
    };
    let io = |e| Error::Io { path: String::from("<dataset>"), source: e };
    out.write_all(&json::to_line(&header)?).map_err(io)?;
    out.write_all(b"\n").map_err(io)?;
    for s in &ds.sequences {
        let line = SequenceLine { states: rows(&s.states), actions: rows(&s.actions), regimes: s.regimes.clone(), split: s.split };
        out.write_all(&json::to_line(&line)?).map_err(io)?;
        out.write_all(b"\n").map_err(io)?;
    }
    Ok(())
}

pub fn encode_dataset(ds: &TrajectoryDataset) -> Result<Vec<u8>, Error> {
    let mut out = Vec::new();
    write_dataset(&mut out, ds)?;
    Ok(out)
}

pub fn read_dataset<R: BufRead>(input: R) -> Result<TrajectoryDataset, Error> {
    let mut lines = input.lines().enumerate().filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()));
    let io = |e| Error::Io { path: String::from("<dataset>"), source: e };
    let (_, first) = lines.next().ok_or_else(|| Error::Format(String::from("empty dataset file")))?;
    let header: Header =
        serde_json::from_str(&first.map_err(io)?).map_err(|e| Error::Format(format!("line 1: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported dataset format version {}", header.format_version)));
    }
    if header.m_truth != header.gt_graphs.len() {
        return Err(Error::Format(String::from("M_truth disagrees with the number of graphs")));
    }
    let gt_graphs = header
        .gt_graphs
        .iter()
        .map(|g| Adjacency::from_rows(g).ok_or_else(|| Error::Format(String::from("graphs must be square 0/1 arrays"))))
        .collect::<Result<Vec<_>, _>>()?;
    let mut sequences = Vec::new();
    for (i, line) in lines {
        let number = i + 1;
        let s: SequenceLine =
            serde_json::from_str(&line.map_err(io)?).map_err(|e| Error::Format(format!("line {number}: {e}")))?;
        sequences.push(Sequence {
            states: matrix(&s.states, header.n_state, "state", number)?,
            actions: matrix(&s.actions, header.n_action, "action", number)?,
            regimes: s.regimes,
            split: s.split,
        });
    }
    let ds = TrajectoryDataset {
        scale: header.scale,
        mode: header.mode,
        seed: header.seed,
        n_state: header.n_state,
        n_action: header.n_action,
        gt_graphs,
        sequences,
    };
    ds.validate()?;
    Ok(ds)
}

pub fn load_dataset(path: &Path) -> Result<TrajectoryDataset, Error> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(std::io::BufReader::new(file))
}
