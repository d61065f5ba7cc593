//! Undirected weighted graphs and their combinatorial Laplacian.
//!
//! Graphs here are small (a few hundred nodes at most) so the adjacency is a
//! dense symmetric matrix.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Mean Earth radius in kilometres, used for great-circle distances.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

const SYMMETRY_TOL: f64 = 1e-12;

/// Latitude/longitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoCoord {
    pub lat: f64,
    pub lon: f64,
}

impl GeoCoord {
    pub fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }
}

/// Haversine distance between two coordinates, in kilometres.
pub fn great_circle_km(a: GeoCoord, b: GeoCoord) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Gaussian kernel `exp(-d^2 / (2 bw^2))`.
pub fn gaussian_kernel(distance: f64, bandwidth: f64) -> f64 {
    (-(distance * distance) / (2.0 * bandwidth * bandwidth)).exp()
}

/// An undirected graph with nonnegative edge weights and no self loops.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adjacency: DMatrix<f64>,
}

impl Graph {
    /// Validates and wraps a dense adjacency matrix.
    pub fn new(adjacency: DMatrix<f64>) -> Result<Self> {
        let n = adjacency.nrows();
        if n == 0 {
            return Err(Error::InvalidGraph("graph has no nodes".into()));
        }
        if adjacency.ncols() != n {
            return Err(Error::dim("adjacency columns", n, adjacency.ncols()));
        }
        for i in 0..n {
            if adjacency[(i, i)] != 0.0 {
                return Err(Error::InvalidGraph(format!(
                    "self loop at node {i} (weight {})",
                    adjacency[(i, i)]
                )));
            }
            for j in 0..n {
                let w = adjacency[(i, j)];
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::InvalidGraph(format!("edge ({i}, {j}) has invalid weight {w}")));
                }
                let diff = (w - adjacency[(j, i)]).abs();
                if diff > SYMMETRY_TOL {
                    return Err(Error::NotSymmetric { row: i, col: j, diff });
                }
            }
        }
        Ok(Self { adjacency })
    }

    /// Builds a graph from undirected edges `(i, j, weight)`, each listed once.
    /// A repeated edge keeps the larger weight.
    pub fn from_edges(n_nodes: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut a = DMatrix::zeros(n_nodes, n_nodes);
        for &(i, j, w) in edges {
            if i >= n_nodes || j >= n_nodes {
                return Err(Error::InvalidGraph(format!(
                    "edge ({i}, {j}) references a node outside 0..{n_nodes}"
                )));
            }
            if i == j {
                return Err(Error::InvalidGraph(format!("self loop at node {i}")));
            }
            let w = f64::max(a[(i, j)], w);
            a[(i, j)] = w;
            a[(j, i)] = w;
        }
        Self::new(a)
    }

    pub fn n_nodes(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    /// Weighted degree of every node.
    pub fn degrees(&self) -> Vec<f64> {
        self.adjacency.row_iter().map(|r| r.sum()).collect()
    }

    /// Upper-triangular edge list `(i, j, w)` with `i < j` and `w > 0`, in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n_nodes();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let w = self.adjacency[(i, j)];
                if w > 0.0 {
                    out.push((i, j, w));
                }
            }
        }
        out
    }

    /// Combinatorial Laplacian `D - A`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        laplacian(self)
    }

    pub fn is_connected(&self) -> bool {
        let n = self.n_nodes();
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = stack.pop() {
            for (j, s) in seen.iter_mut().enumerate() {
                if !*s && self.adjacency[(i, j)] > 0.0 {
                    *s = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
        count == n
    }
}

/// Combinatorial Laplacian `L = D - A` with `D` the diagonal of row sums.
pub fn laplacian(g: &Graph) -> DMatrix<f64> {
    let mut l = -g.adjacency.clone();
    for (i, d) in g.degrees().into_iter().enumerate() {
        l[(i, i)] = d;
    }
    l
}

/// Nearest neighbours of every node by great-circle distance, `k` per node.
/// Ties are broken by the lower node index.
fn knn_lists(coords: &[GeoCoord], k: usize) -> Vec<Vec<(usize, f64)>> {
    let n = coords.len();
    (0..n)
        .map(|i| {
            let mut others: Vec<(usize, f64)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (j, great_circle_km(coords[i], coords[j])))
                .collect();
            others.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            others.truncate(k);
            others
        })
        .collect()
}

/// Mean distance from each node to its `k` nearest neighbours; the default kernel bandwidth.
pub fn mean_knn_distance(coords: &[GeoCoord], k: usize) -> Result<f64> {
    validate_knn_input(coords, k)?;
    let lists = knn_lists(coords, k);
    let total: f64 = lists.iter().flatten().map(|&(_, d)| d).sum();
    Ok(total / (coords.len() * k) as f64)
}

fn validate_knn_input(coords: &[GeoCoord], k: usize) -> Result<()> {
    let n = coords.len();
    if n < 2 {
        return Err(Error::param(format!("k-NN graph needs at least 2 nodes, got {n}")));
    }
    if k == 0 || k >= n {
        return Err(Error::param(format!("k must satisfy 1 <= k < N (k = {k}, N = {n})")));
    }
    for (i, c) in coords.iter().enumerate() {
        if !c.lat.is_finite() || !c.lon.is_finite() {
            return Err(Error::param(format!("node {i} has non-finite coordinates")));
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if great_circle_km(coords[i], coords[j]) == 0.0 {
                return Err(Error::DegenerateDistance { first: i, second: j });
            }
        }
    }
    Ok(())
}

/// k-nearest-neighbour graph over station coordinates with Gaussian kernel weights.
///
/// Directed k-NN edges are symmetrized by union, keeping the larger weight.
/// `bandwidth` defaults to [`mean_knn_distance`].
pub fn build_knn_graph(coords: &[GeoCoord], k: usize, bandwidth: Option<f64>) -> Result<Graph> {
    validate_knn_input(coords, k)?;
    let lists = knn_lists(coords, k);
    let bw = match bandwidth {
        Some(bw) if bw > 0.0 && bw.is_finite() => bw,
        Some(bw) => return Err(Error::param(format!("kernel bandwidth must be positive, got {bw}"))),
        None => {
            let total: f64 = lists.iter().flatten().map(|&(_, d)| d).sum();
            total / (coords.len() * k) as f64
        }
    };
    let n = coords.len();
    let mut a = DMatrix::zeros(n, n);
    for (i, neighbours) in lists.iter().enumerate() {
        for &(j, d) in neighbours {
            let w = gaussian_kernel(d, bw);
            let w = w.max(a[(i, j)]);
            a[(i, j)] = w;
            a[(j, i)] = w;
        }
    }
    Graph::new(a)
}

/// Random geometric graph on the unit square.
///
/// Points closer than `radius` are joined with Gaussian weights of bandwidth
/// `radius / 2`. The radius grows by 10% until the graph is connected.
/// Returns the graph and the planar positions.
pub fn random_geometric_graph(n: usize, radius: f64, seed: u64) -> Result<(Graph, Vec<(f64, f64)>)> {
    if n < 2 {
        return Err(Error::param("random geometric graph needs at least 2 nodes"));
    }
    if !(radius > 0.0) {
        return Err(Error::param(format!("radius must be positive, got {radius}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.random::<f64>(), rng.random::<f64>())).collect();
    let mut r = radius;
    loop {
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let d = ((pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2)).sqrt();
                if d < r {
                    let w = gaussian_kernel(d, r / 2.0);
                    a[(i, j)] = w;
                    a[(j, i)] = w;
                }
            }
        }
        let g = Graph::new(a)?;
        if g.is_connected() {
            return Ok((g, pts));
        }
        r *= 1.1;
    }
}
