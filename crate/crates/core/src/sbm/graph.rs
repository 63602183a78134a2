//! Undirected simple graphs with sparse neighbor lists, plus the homogeneous
//! block-model generator and edge-list IO.

use std::io::{BufRead, Write as _};
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SbmGraph {
    /// Sorted neighbor list per node; no self loops, symmetric.
    neighbors: Vec<Vec<usize>>,
    num_edges: usize,
}

impl SbmGraph {
    /// Builds a graph from undirected edges; duplicates collapse, self loops
    /// are rejected.
    pub fn from_edges(p: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidConfig("graph needs at least one node".into()));
        }
        let mut neighbors = vec![Vec::new(); p];
        for &(i, j) in edges {
            if i == j {
                return Err(Error::MalformedFile(format!("self loop at node {i}")));
            }
            if i >= p || j >= p {
                return Err(Error::MalformedFile(format!(
                    "edge ({i}, {j}) out of range for p = {p}"
                )));
            }
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        let mut num_edges = 0;
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
            num_edges += list.len();
        }
        Ok(SbmGraph { neighbors, num_edges: num_edges / 2 })
    }

    pub fn p(&self) -> usize {
        self.neighbors.len()
    }

    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, list)| list.iter().filter(move |&&j| i < j).map(move |&j| (i, j)))
    }
}

/// Chernoff-Hellinger separation `p (sqrt(a) - sqrt(b))^2 / (K log p)` of the
/// homogeneous two-parameter block model.
pub fn ch_divergence(a: f64, b: f64, k: usize, p: usize) -> f64 {
    p as f64 * (a.sqrt() - b.sqrt()).powi(2) / (k as f64 * (p as f64).ln())
}

/// Within-block edge probability that hits a target separation at fixed `b`.
pub fn a_for_target_ch(b: f64, ch: f64, k: usize, p: usize) -> f64 {
    let root = b.sqrt() + (ch * k as f64 * (p as f64).ln() / p as f64).sqrt();
    root * root
}

/// Draws a homogeneous block-model graph over the balanced ground-truth
/// partition (labels 0..K in contiguous runs of p/K): edge probability `a`
/// within blocks and `b` across.
pub fn generate_graph<R: Rng + ?Sized>(
    p: usize,
    k: usize,
    a: f64,
    b: f64,
    rng: &mut R,
) -> Result<(SbmGraph, Vec<usize>)> {
    if k < 2 || p % k != 0 {
        return Err(Error::InvalidConfig(format!(
            "p = {p} must be a positive multiple of K = {k} >= 2"
        )));
    }
    if !(0.0..=1.0).contains(&b) || !(0.0..=1.0).contains(&a) || b > a {
        return Err(Error::InvalidConfig(format!("need 0 <= b <= a <= 1, got a={a}, b={b}")));
    }
    let labels: Vec<usize> = (0..p).map(|i| i / (p / k)).collect();
    let mut edges = Vec::new();
    for i in 0..p {
        for j in i + 1..p {
            let q = if labels[i] == labels[j] { a } else { b };
            if rng.random::<f64>() < q {
                edges.push((i, j));
            }
        }
    }
    Ok((SbmGraph::from_edges(p, &edges)?, labels))
}

/// Writes the edge-list format: a first line `p,<count>`, then one `i,j` line
/// per edge, 0-based.
pub fn write_edge_csv(graph: &SbmGraph, path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "p,{}", graph.p())?;
    for (i, j) in graph.edges() {
        writeln!(w, "{i},{j}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_edge_csv(path: &Path) -> Result<SbmGraph> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut lines = f.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::MalformedFile("empty edge file".into()))??;
    let p: usize = header
        .strip_prefix("p,")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::MalformedFile(format!("bad header line {header:?}")))?;
    let mut edges = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (i, j) = line
            .split_once(',')
            .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)))
            .ok_or_else(|| Error::MalformedFile(format!("bad edge line {line:?}")))?;
        edges.push((i, j));
    }
    SbmGraph::from_edges(p, &edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ch_zero_when_rates_equal() {
        assert_eq!(ch_divergence(0.3, 0.3, 2, 500), 0.0);
    }

    #[test]
    fn ch_matches_reference_calibration() {
        assert!((ch_divergence(0.222, 0.01, 2, 1000) - 10.0).abs() < 0.05);
        assert!((ch_divergence(0.07, 0.01, 2, 1000) - 2.0).abs() < 0.06);
        let a = a_for_target_ch(0.01, 10.0, 2, 200);
        assert!((ch_divergence(a, 0.01, 2, 200) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn generator_densities_match_rates() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (p, k, a, b) = (1000usize, 2usize, 0.222, 0.01);
        let (graph, labels) = generate_graph(p, k, a, b, &mut rng).unwrap();
        assert_eq!(labels[0..500], [0; 500]);
        assert_eq!(labels[500..], [1; 500]);
        let mut within = 0usize;
        let mut across = 0usize;
        for (i, j) in graph.edges() {
            if labels[i] == labels[j] {
                within += 1;
            } else {
                across += 1;
            }
        }
        let within_pairs = 2.0 * (500.0 * 499.0 / 2.0);
        let across_pairs = 500.0 * 500.0;
        let se_w = (within_pairs * a * (1.0 - a)).sqrt();
        let se_a = (across_pairs * b * (1.0 - b)).sqrt();
        assert!((within as f64 - within_pairs * a).abs() < 3.0 * se_w);
        assert!((across as f64 - across_pairs * b).abs() < 3.0 * se_a);
    }

    #[test]
    fn self_loop_rejected_and_duplicates_collapse() {
        assert!(SbmGraph::from_edges(3, &[(0, 0)]).is_err());
        let g = SbmGraph::from_edges(3, &[(0, 1), (1, 0), (0, 1)]).unwrap();
        assert_eq!(g.num_edges(), 1);
        assert!(g.has_edge(1, 0));
        assert!(!g.has_edge(1, 2));
    }

    #[test]
    fn edge_csv_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let (graph, _) = generate_graph(30, 3, 0.5, 0.1, &mut rng).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.csv");
        write_edge_csv(&graph, &path).unwrap();
        let back = read_edge_csv(&path).unwrap();
        assert_eq!(back.p(), graph.p());
        assert_eq!(back.num_edges(), graph.num_edges());
        for i in 0..30 {
            assert_eq!(back.neighbors(i), graph.neighbors(i));
        }
    }
}
