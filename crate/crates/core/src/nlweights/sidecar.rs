//! Binary cache of a neighbourhood graph.
//!
//! Layout (little endian): the 8-byte magic, `N: u64`, `M̄: u64`, then per
//! pixel `count: u32` followed by `count` pairs `(index: u32, weight: f64)`.

use std::fs;
use std::path::Path;

use super::NeighborhoodGraph;
use crate::binio::ByteReader;
use crate::error::{Error, Result};

pub const GRAPH_MAGIC: &[u8; 8] = b"STGRAPH1";

pub fn write_graph(path: &Path, graph: &NeighborhoodGraph) -> Result<()> {
    fs::write(path, encode(graph)).map_err(|e| Error::io(format!("writing graph {}", path.display()), e))
}

pub fn read_graph(path: &Path) -> Result<NeighborhoodGraph> {
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading graph {}", path.display()), e))?;
    decode(&bytes, path)
}

fn encode(graph: &NeighborhoodGraph) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + graph.pixels() * 4 + graph.edges() * 12);
    out.extend_from_slice(GRAPH_MAGIC);
    out.extend_from_slice(&(graph.pixels() as u64).to_le_bytes());
    out.extend_from_slice(&(graph.max_neighbors() as u64).to_le_bytes());
    for pixel in 0..graph.pixels() {
        out.extend_from_slice(&(graph.neighbors(pixel).len() as u32).to_le_bytes());
        for (&n, &w) in graph.neighbors(pixel).iter().zip(graph.weights(pixel)) {
            out.extend_from_slice(&(n as u32).to_le_bytes());
            out.extend_from_slice(&w.to_le_bytes());
        }
    }
    out
}

fn decode(bytes: &[u8], path: &Path) -> Result<NeighborhoodGraph> {
    let mut c = ByteReader::new(bytes, path);
    if c.take(8, "magic")? != GRAPH_MAGIC {
        c.at = 0;
        return Err(c.error("not a graph file (bad magic)".into()));
    }
    let n = c.u64("pixel count")? as usize;
    let max = c.u64("neighbour budget")? as usize;
    // each pixel needs at least its count field
    if n > c.remaining() / 4 {
        return Err(c.error(format!("header announces {n} pixels, file is too short")));
    }
    let mut lists = Vec::with_capacity(n);
    for _ in 0..n {
        let count = c.u32("neighbour count")? as usize;
        if count > max {
            return Err(c.error(format!("neighbour count {count} exceeds budget {max}")));
        }
        let mut list = Vec::with_capacity(count);
        for _ in 0..count {
            let idx = c.u32("neighbour index")? as usize;
            let w = c.f64("neighbour weight")?;
            list.push((idx, w));
        }
        lists.push(list);
    }
    if c.at != bytes.len() {
        return Err(c.error("trailing bytes after last pixel".into()));
    }
    NeighborhoodGraph::from_lists(lists, max).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        offset: bytes.len() as u64,
        message: e.to_string(),
    })
}
