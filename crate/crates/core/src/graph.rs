//! Graph side of the completion reduction: the partial matrix `P_G`, the
//! completion induced by a proper coloring, balancing by disjoint copies, and
//! zero padding.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, Factorization, PartialMatrix};
use crate::rng;

/// Simple undirected graph on vertices `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    /// Builds a graph from unordered pairs. Repeated pairs (in either
    /// orientation) collapse to one edge; self-loops are rejected.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            for v in [a, b] {
                if v >= n {
                    return Err(Error::IndexOutOfRange { index: v, n });
                }
            }
            if a == b {
                return Err(Error::Invalid(format!("self-loop on vertex {a}")));
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(Self { n, edges: set })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as `(i, j)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j)));
        Self::new(n, edges).expect("complete graph is valid")
    }

    pub fn cycle(n: usize) -> Self {
        Self::new(n, (0..n).map(|i| (i, (i + 1) % n))).expect("cycle is valid for n >= 3")
    }

    /// Random graph with a planted balanced `k`-coloring (`v mod k`): every pair
    /// of differently colored vertices is joined with probability `p`.
    pub fn planted(n: usize, k: usize, p: f64, seed: u64) -> (Self, Coloring) {
        let mut rng = rng::seeded(seed);
        let colors: Vec<usize> = (0..n).map(|v| v % k.max(1)).collect();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if colors[i] != colors[j] && rng.random::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        let g = Self::new(n, edges).expect("planted graph is valid");
        (g, Coloring { k, colors })
    }

    /// `true` iff no edge has both endpoints in `set`.
    pub fn is_independent(&self, set: &[usize]) -> bool {
        let members: BTreeSet<usize> = set.iter().copied().collect();
        !self
            .edges
            .iter()
            .any(|(a, b)| members.contains(a) && members.contains(b))
    }
}

/// Assignment of one of `k` colors (0-based) to every vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coloring {
    k: usize,
    colors: Vec<usize>,
}

impl Coloring {
    pub fn new(k: usize, colors: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = colors.iter().find(|&&c| c >= k) {
            return Err(Error::Invalid(format!(
                "color {bad} out of range for k = {k}"
            )));
        }
        Ok(Self { k, colors })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn colors(&self) -> &[usize] {
        &self.colors
    }

    pub fn color(&self, v: usize) -> usize {
        self.colors[v]
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in &self.colors {
            sizes[c] += 1;
        }
        sizes
    }

    pub fn nonempty_classes(&self) -> usize {
        self.class_sizes().iter().filter(|&&s| s > 0).count()
    }

    /// Errors with the first edge whose endpoints share a color.
    pub fn check_proper(&self, g: &Graph) -> Result<()> {
        if self.colors.len() != g.n() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} vertices", g.n()),
                found: format!("{}", self.colors.len()),
            });
        }
        match g.edges().find(|&(a, b)| self.colors[a] == self.colors[b]) {
            Some((a, b)) => Err(Error::ImproperColoring(a, b)),
            None => Ok(()),
        }
    }

    /// Coherence of `M_f` predicted from the class sizes,
    /// `(n / k) / min_i |f^{-1}(i)|`. Undefined when a class is empty.
    pub fn predicted_coherence(&self) -> Result<f64> {
        let sizes = self.class_sizes();
        if let Some(empty) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::EmptyColorClass(empty));
        }
        let min = *sizes.iter().min().unwrap_or(&0) as f64;
        Ok(self.colors.len() as f64 / self.k as f64 / min)
    }
}

/// `P_G`: ones on the diagonal, zeros on edges, everything else unrevealed;
/// coefficient bound 1.
pub fn graph_to_partial(g: &Graph) -> PartialMatrix {
    let mut pm = PartialMatrix::new(g.n(), 1.0).expect("unit bound is valid");
    for i in 0..g.n() {
        pm.reveal(i, i, 1.0).expect("diagonal in range");
    }
    for (a, b) in g.edges() {
        pm.reveal(a, b, 0.0).expect("edge in range");
    }
    pm
}

/// `M_f = sum_i 1_{f^-1(i)} 1_{f^-1(i)}^T`: entry 1 where colors agree.
pub fn completion_from_coloring(g: &Graph, f: &Coloring) -> Result<DenseMatrix> {
    f.check_proper(g)?;
    let n = g.n();
    DenseMatrix::new(DMatrix::from_fn(n, n, |i, j| {
        if f.color(i) == f.color(j) {
            1.0
        } else {
            0.0
        }
    }))
}

/// Indicator factorization of `M_f`: `u_i = v_i = e_{f(i)}` in dimension `k`.
/// Every row has norm 1.
pub fn coloring_factorization(f: &Coloring) -> Factorization {
    let n = f.colors().len();
    let u = DMatrix::from_fn(n, f.k(), |i, c| if f.color(i) == c { 1.0 } else { 0.0 });
    Factorization::new(u.clone(), u).expect("indicator rows share dimension k")
}

/// `k` disjoint copies of `g`; copy `t` uses colors shifted by `t` mod `k`, so
/// every color class of the result has exactly `n` vertices.
pub fn balance_by_copies(g: &Graph, f: &Coloring) -> Result<(Graph, Coloring)> {
    f.check_proper(g)?;
    let (n, k) = (g.n(), f.k());
    let edges = (0..k).flat_map(|t| g.edges().map(move |(a, b)| (t * n + a, t * n + b)));
    let graph = Graph::new(n * k, edges)?;
    let colors = (0..k)
        .flat_map(|t| f.colors().iter().map(move |&c| (c + t) % k))
        .collect();
    Ok((graph, Coloring { k, colors }))
}

/// Embeds `pm` as the top-left block of a `factor*n` square matrix whose other
/// entries are all revealed zeros.
pub fn pad_partial(pm: &PartialMatrix, factor: usize) -> Result<PartialMatrix> {
    if factor == 0 {
        return Err(Error::Invalid("padding factor must be at least 1".into()));
    }
    let n = pm.n();
    let big = n * factor;
    let mut out = PartialMatrix::new(big, pm.coeff_bound())?;
    for (i, j, v) in pm.canonical_entries() {
        out.reveal(i, j, v)?;
    }
    for i in 0..big {
        for j in i.max(n)..big {
            out.reveal(i, j, 0.0)?;
        }
    }
    Ok(out)
}

/// Default padding factor, giving a `10n x 10n` matrix.
pub const DEFAULT_PAD_FACTOR: usize = 10;
