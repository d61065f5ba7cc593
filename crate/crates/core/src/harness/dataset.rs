//! Dataset ingestion: signal matrices, edge lists and station coordinates.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::{build_knn_graph, GeoCoord, Graph};

/// Ground-truth graph signals (`T x N`, one timestep per row) on a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub signals: DMatrix<f64>,
    pub graph: Graph,
}

impl Dataset {
    pub fn new(name: impl Into<String>, signals: DMatrix<f64>, graph: Graph) -> Result<Self> {
        if signals.nrows() < 2 {
            return Err(Error::param(format!(
                "dataset needs at least 2 timesteps, got {}",
                signals.nrows()
            )));
        }
        if signals.ncols() != graph.n_nodes() {
            return Err(Error::dim(
                "signal width vs graph nodes",
                graph.n_nodes(),
                signals.ncols(),
            ));
        }
        if let Some(pos) = signals.iter().position(|v| !v.is_finite()) {
            // Column-major storage.
            let (t, i) = (pos % signals.nrows(), pos / signals.nrows());
            return Err(Error::param(format!(
                "non-finite signal value at timestep {t}, node {i}"
            )));
        }
        Ok(Self {
            name: name.into(),
            signals,
            graph,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.signals.ncols()
    }

    pub fn n_timesteps(&self) -> usize {
        self.signals.nrows()
    }
}

/// Where the graph of a dataset comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphSource {
    EdgeList(PathBuf),
    Coordinates {
        path: PathBuf,
        k: usize,
        bandwidth: Option<f64>,
    },
}

fn open_csv(path: &Path, has_header: bool) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(has_header)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file))
}

fn parse_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line: line as usize,
        message: message.into(),
    }
}

fn record_line(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    parse_error(path, line, e.to_string())
}

fn parse_field<T: std::str::FromStr>(path: &Path, rec: &csv::StringRecord, idx: usize, what: &str) -> Result<T> {
    let raw = rec.get(idx).unwrap_or("");
    raw.parse()
        .map_err(|_| parse_error(path, record_line(rec), format!("{what} `{raw}` is not a valid number")))
}

/// Reads a `T x N` matrix of decimal values, one timestep per row.
pub fn read_signals_csv(path: &Path, has_header: bool) -> Result<DMatrix<f64>> {
    let mut reader = open_csv(path, has_header)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = record_line(&rec);
        let expected = *width.get_or_insert(rec.len());
        if rec.len() != expected {
            return Err(parse_error(
                path,
                line,
                format!("row {} has {} values, expected {expected}", rows.len() + 1, rec.len()),
            ));
        }
        let row = (0..rec.len())
            .map(|i| parse_field::<f64>(path, &rec, i, "value"))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let n = width.unwrap_or(0);
    if rows.is_empty() || n == 0 {
        return Err(parse_error(path, 0, "no signal rows"));
    }
    Ok(DMatrix::from_fn(rows.len(), n, |t, i| rows[t][i]))
}

pub fn write_signals_csv(path: &Path, signals: &DMatrix<f64>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for row in signals.row_iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", line.join(",")).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Edge list `i,j,weight` (0-based, undirected, each edge once).
///
/// A leading `# nodes=N` comment fixes the node count; otherwise it is one
/// more than the largest index, or `n_nodes` when given.
pub fn read_edge_list(path: &Path, n_nodes: Option<usize>) -> Result<Graph> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let declared = text.lines().find_map(|l| {
        l.trim()
            .strip_prefix('#')
            .and_then(|r| r.trim().strip_prefix("nodes="))
            .and_then(|v| v.trim().parse::<usize>().ok())
    });
    let mut reader = open_csv(path, false)?;
    let mut edges = Vec::new();
    let mut lines = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        if rec.len() != 3 {
            return Err(parse_error(
                path,
                record_line(&rec),
                format!("expected `i,j,weight`, got {} fields", rec.len()),
            ));
        }
        let i: usize = parse_field(path, &rec, 0, "node index")?;
        let j: usize = parse_field(path, &rec, 1, "node index")?;
        let w: f64 = parse_field(path, &rec, 2, "weight")?;
        if !(w >= 0.0 && w.is_finite()) {
            return Err(parse_error(path, record_line(&rec), format!("invalid weight {w}")));
        }
        edges.push((i, j, w));
        lines.push(record_line(&rec));
    }
    let max_index = edges.iter().map(|&(i, j, _)| i.max(j) + 1).max().unwrap_or(0);
    let n = match (declared, n_nodes) {
        (Some(d), Some(n)) if d != n => {
            return Err(Error::dim("edge list node count", n, d));
        }
        (Some(d), _) => d,
        (None, Some(n)) => n,
        (None, None) => max_index,
    };
    if let Some(k) = edges.iter().position(|&(i, j, _)| i.max(j) >= n) {
        let (i, j, _) = edges[k];
        return Err(parse_error(
            path,
            lines[k],
            format!("edge references node {} but graph has {n} nodes", i.max(j)),
        ));
    }
    Graph::from_edges(n, &edges)
}

pub fn write_edge_list<W: Write>(out: &mut W, g: &Graph) -> std::io::Result<()> {
    writeln!(out, "# nodes={}", g.n_nodes())?;
    for (i, j, w) in g.edges() {
        writeln!(out, "{i},{j},{w:?}")?;
    }
    Ok(())
}

/// Station coordinates `node_id,lat,lon`. A non-numeric first row is treated as a header.
/// Node ids must cover `0..N` exactly once.
pub fn read_coordinates(path: &Path) -> Result<Vec<GeoCoord>> {
    let mut reader = open_csv(path, false)?;
    let mut entries: Vec<(usize, GeoCoord)> = Vec::new();
    for (idx, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        if idx == 0 && rec.get(1).is_some_and(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        if rec.len() != 3 {
            return Err(parse_error(
                path,
                record_line(&rec),
                format!("expected `node_id,lat,lon`, got {} fields", rec.len()),
            ));
        }
        let id: usize = parse_field(path, &rec, 0, "node id")?;
        let lat: f64 = parse_field(path, &rec, 1, "latitude")?;
        let lon: f64 = parse_field(path, &rec, 2, "longitude")?;
        entries.push((id, GeoCoord::new(lat, lon)));
    }
    entries.sort_by_key(|&(id, _)| id);
    for (expected, &(id, _)) in entries.iter().enumerate() {
        if id != expected {
            return Err(parse_error(
                path,
                0,
                format!("node ids must be 0..N without gaps or repeats; found {id} at position {expected}"),
            ));
        }
    }
    if entries.is_empty() {
        return Err(parse_error(path, 0, "no coordinates"));
    }
    Ok(entries.into_iter().map(|(_, c)| c).collect())
}

pub fn load_graph(source: &GraphSource, n_nodes: Option<usize>) -> Result<Graph> {
    match source {
        GraphSource::EdgeList(path) => read_edge_list(path, n_nodes),
        GraphSource::Coordinates { path, k, bandwidth } => {
            let coords = read_coordinates(path)?;
            build_knn_graph(&coords, *k, *bandwidth)
        }
    }
}

/// Loads signals and the graph and checks that their node counts agree.
pub fn load_dataset(
    name: impl Into<String>,
    signals_path: &Path,
    has_header: bool,
    graph_source: &GraphSource,
) -> Result<Dataset> {
    let signals = read_signals_csv(signals_path, has_header)?;
    let graph = load_graph(graph_source, Some(signals.ncols()))?;
    Dataset::new(name, signals, graph)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn signals_with_and_without_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "s.csv", "1,2,3\n4,5,6\n");
        let m = read_signals_csv(&p, false).unwrap();
        assert_eq!((m.nrows(), m.ncols()), (2, 3));
        assert_eq!(m[(1, 2)], 6.0);
        let p = write(dir.path(), "h.csv", "a,b\n1,2\n3,4\n");
        assert_eq!(read_signals_csv(&p, true).unwrap().nrows(), 2);
        assert!(read_signals_csv(&p, false).is_err());
    }

    #[test]
    fn ragged_row_names_the_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "s.csv", "1,2,3\n4,5\n");
        let err = read_signals_csv(&p, false).unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("row 2"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn edge_list_round_trip() {
        let g = Graph::from_edges(4, &[(0, 1, 0.5), (1, 2, 2.0)]).unwrap();
        let mut buf = Vec::new();
        write_edge_list(&mut buf, &g).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "e.csv", std::str::from_utf8(&buf).unwrap());
        assert_eq!(read_edge_list(&p, None).unwrap(), g);
        assert!(read_edge_list(&p, Some(5)).is_err());
    }

    #[test]
    fn edge_list_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "e.csv", "0,1,1.0\n1,x,2\n");
        assert!(matches!(read_edge_list(&p, None), Err(Error::Parse { line: 2, .. })));
        let p = write(dir.path(), "e2.csv", "0,5,1.0\n");
        assert!(read_edge_list(&p, Some(3)).is_err());
    }

    #[test]
    fn coordinates_with_header_and_shuffled_ids() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "c.csv", "node_id,lat,lon\n1,40.0,-100.0\n0,41.0,-101.0\n");
        let c = read_coordinates(&p).unwrap();
        assert_eq!(c[0], GeoCoord::new(41.0, -101.0));
        let p = write(dir.path(), "gap.csv", "0,1,1\n2,2,2\n");
        assert!(read_coordinates(&p).is_err());
    }

    #[test]
    fn dataset_dimension_check() {
        let dir = tempfile::tempdir().unwrap();
        let s = write(dir.path(), "s.csv", "1,2,3\n4,5,6\n");
        let e = write(dir.path(), "e.csv", "# nodes=2\n0,1,1.0\n");
        let err = load_dataset("x", &s, false, &GraphSource::EdgeList(e)).unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
        let e = write(dir.path(), "e3.csv", "0,1,1.0\n1,2,1.0\n");
        let d = load_dataset("x", &s, false, &GraphSource::EdgeList(e)).unwrap();
        assert_eq!((d.n_timesteps(), d.n_nodes()), (2, 3));
    }

    #[test]
    fn missing_file_is_io_error_naming_path() {
        let err = read_signals_csv(Path::new("/nonexistent/x.csv"), false).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/x.csv"));
    }
}
