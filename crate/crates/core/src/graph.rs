//! Undirected communication graphs, Laplacians and the consensus penalty
//! `Q = L ⊗ I_d`.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::linalg::{count_zero, sym_eigen, ZERO_EIG_REL_TOL};
use crate::{Error, Matrix, Result, Vector};

/// Eigenvalues with `|λ|` between the zero tolerance and this (relative)
/// band make the nullspace dimension ambiguous.
const AMBIGUITY_BAND: f64 = 1e-6;

/// Simple undirected graph on vertices `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    /// Build from 0-indexed unordered pairs. Duplicates collapse.
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::Graph("graph needs at least one vertex".into()));
        }
        let mut set = BTreeSet::new();
        for &(i, j) in edges {
            if i == j {
                return Err(Error::Graph(format!("self-loop at vertex {}", i + 1)));
            }
            if i >= n || j >= n {
                return Err(Error::Graph(format!(
                    "edge ({}, {}) out of range for {n} vertices",
                    i + 1,
                    j + 1
                )));
            }
            set.insert((i.min(j), i.max(j)));
        }
        Ok(Self { n, edges: set })
    }

    pub fn path(n: usize) -> Result<Self> {
        let e: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::new(n, &e)
    }

    pub fn cycle(n: usize) -> Result<Self> {
        let mut e: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        if n > 2 {
            e.push((n - 1, 0));
        }
        Self::new(n, &e)
    }

    pub fn complete(n: usize) -> Result<Self> {
        let mut e = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                e.push((i, j));
            }
        }
        Self::new(n, &e)
    }

    /// Star with center vertex 0.
    pub fn star(n: usize) -> Result<Self> {
        let e: Vec<_> = (1..n).map(|i| (0, i)).collect();
        Self::new(n, &e)
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(i, j)| {
                if i == v {
                    Some(j)
                } else if j == v {
                    Some(i)
                } else {
                    None
                }
            })
            .collect()
    }

    /// Adjacency lists for every vertex, sorted.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        let adj = self.adjacency();
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Parse the edge-list format: first line `N`, then `i j` per line,
    /// 1-indexed. Blank lines and lines starting with `#` are skipped.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let n: usize = lines
            .next()
            .ok_or_else(|| Error::Parse("empty edge list".into()))?
            .parse()
            .map_err(|e| Error::Parse(format!("vertex count: {e}")))?;
        let mut edges = Vec::new();
        for (lineno, l) in lines.enumerate() {
            let mut it = l.split_whitespace();
            let mut field = |name: &str| -> Result<usize> {
                let s = it
                    .next()
                    .ok_or_else(|| Error::Parse(format!("edge {}: missing {name}", lineno + 1)))?;
                let v: usize = s
                    .parse()
                    .map_err(|e| Error::Parse(format!("edge {}: {e}", lineno + 1)))?;
                if v == 0 {
                    return Err(Error::Parse(format!("edge {}: vertices are 1-indexed", lineno + 1)));
                }
                Ok(v - 1)
            };
            let i = field("i")?;
            let j = field("j")?;
            edges.push((i, j));
        }
        Self::new(n, &edges)
    }

    /// Inverse of [`Graph::parse_edge_list`]. Edges are written in sorted order.
    pub fn to_edge_list(&self) -> String {
        let mut s = format!("{}\n", self.n);
        for &(i, j) in &self.edges {
            let _ = writeln!(s, "{} {}", i + 1, j + 1);
        }
        s
    }
}

/// `L = D − A`.
pub fn laplacian(graph: &Graph) -> Matrix {
    let n = graph.vertex_count();
    let mut l = Matrix::zeros(n, n);
    for (i, j) in graph.edges() {
        l[(i, j)] -= 1.0;
        l[(j, i)] -= 1.0;
        l[(i, i)] += 1.0;
        l[(j, j)] += 1.0;
    }
    l
}

/// Symmetric positive semidefinite penalty with a nontrivial nullspace `C`.
///
/// The orthonormal rotation that maps `C` onto the leading coordinates is
/// computed once at construction.
#[derive(Debug, Clone)]
pub struct PenaltyMatrix {
    matrix: Matrix,
    rotation: ConstraintRotation,
    /// Agent block size when the matrix came from a graph, else the full
    /// dimension.
    block_dim: usize,
}

/// Orthonormal change of basis whose first `constraint_dim` columns span
/// the nullspace of `Q`.
#[derive(Debug, Clone)]
pub struct ConstraintRotation {
    pub rotation: Matrix,
    pub constraint_dim: usize,
    /// Eigenvalues of `Q` in the column order of `rotation`.
    pub eigenvalues: Vector,
}

impl ConstraintRotation {
    /// `M × d` orthonormal basis of the constraint subspace.
    pub fn constraint_basis(&self) -> Matrix {
        self.rotation.columns(0, self.constraint_dim).clone_owned()
    }

    /// `M × (M − d)` orthonormal basis of the off-constraint subspace.
    pub fn complement_basis(&self) -> Matrix {
        let m = self.rotation.ncols();
        self.rotation
            .columns(self.constraint_dim, m - self.constraint_dim)
            .clone_owned()
    }

    /// `Rᵀ Q R`.
    pub fn rotate(&self, q: &Matrix) -> Matrix {
        self.rotation.transpose() * q * &self.rotation
    }
}

impl PenaltyMatrix {
    /// Validate an arbitrary symmetric PSD matrix with a nullspace.
    pub fn new(matrix: Matrix) -> Result<Self> {
        let m = matrix.nrows();
        Self::with_block(matrix, m)
    }

    fn with_block(matrix: Matrix, block_dim: usize) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::Penalty("matrix must be square and nonempty".into()));
        }
        let asym = (&matrix - matrix.transpose()).amax();
        if asym > 1e-12 * (1.0 + matrix.amax()) {
            return Err(Error::Penalty(format!("not symmetric (max asymmetry {asym:e})")));
        }
        let rotation = rotation_of(&matrix)?;
        Ok(Self {
            matrix,
            rotation,
            block_dim,
        })
    }

    /// The all-zero penalty: every direction is a constraint direction.
    pub fn zeros(m: usize) -> Self {
        Self {
            matrix: Matrix::zeros(m, m),
            rotation: ConstraintRotation {
                rotation: Matrix::identity(m, m),
                constraint_dim: m,
                eigenvalues: Vector::zeros(m),
            },
            block_dim: m,
        }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn constraint_dim(&self) -> usize {
        self.rotation.constraint_dim
    }

    /// Size of one agent's block (equals `dim()` for non-graph penalties).
    pub fn block_dim(&self) -> usize {
        self.block_dim
    }

    pub fn rotation(&self) -> &ConstraintRotation {
        &self.rotation
    }

    /// Orthogonal projector onto `C`.
    pub fn constraint_projector(&self) -> Matrix {
        let b = self.rotation.constraint_basis();
        &b * b.transpose()
    }

    /// Smallest positive eigenvalue of `Q` (the spectrum of `Q̂`).
    pub fn min_positive_eigenvalue(&self) -> Option<f64> {
        let d = self.constraint_dim();
        self.rotation.eigenvalues.iter().skip(d).cloned().reduce(f64::min)
    }

    /// Eigenvalues of `Q̂`, ascending.
    pub fn qhat_eigenvalues(&self) -> Vec<f64> {
        self.rotation
            .eigenvalues
            .iter()
            .skip(self.constraint_dim())
            .cloned()
            .collect()
    }
}

fn rotation_of(q: &Matrix) -> Result<ConstraintRotation> {
    let (vals, vecs) = sym_eigen(q);
    let scale = vals.amax();
    if scale == 0.0 {
        let m = q.nrows();
        return Ok(ConstraintRotation {
            rotation: Matrix::identity(m, m),
            constraint_dim: m,
            eigenvalues: vals,
        });
    }
    if let Some(neg) = vals.iter().find(|&&l| l < -ZERO_EIG_REL_TOL * scale) {
        return Err(Error::Penalty(format!("not positive semidefinite (eigenvalue {neg:e})")));
    }
    for &l in vals.iter() {
        let r = l.abs() / scale;
        if r >= ZERO_EIG_REL_TOL && r < AMBIGUITY_BAND {
            return Err(Error::DegenerateSpectrum(format!(
                "eigenvalue {l:e} is neither clearly zero nor clearly positive"
            )));
        }
    }
    let d = count_zero(&vals);
    if d == 0 {
        return Err(Error::Penalty("no zero eigenvalue: constraint set is trivial".into()));
    }
    Ok(ConstraintRotation {
        rotation: vecs,
        constraint_dim: d,
        eigenvalues: vals,
    })
}

/// `L ⊗ I_d` with constraint dimension `d` (for connected graphs).
pub fn consensus_penalty(laplacian: &Matrix, agent_dim: usize) -> Result<PenaltyMatrix> {
    if agent_dim == 0 {
        return Err(Error::Penalty("agent dimension must be positive".into()));
    }
    let n = laplacian.nrows();
    let m = n * agent_dim;
    let mut q = Matrix::zeros(m, m);
    for i in 0..n {
        for j in 0..n {
            let lij = laplacian[(i, j)];
            if lij != 0.0 {
                for k in 0..agent_dim {
                    q[(i * agent_dim + k, j * agent_dim + k)] = lij;
                }
            }
        }
    }
    if n == 1 {
        return Ok(PenaltyMatrix {
            block_dim: agent_dim,
            ..PenaltyMatrix::zeros(m)
        });
    }
    PenaltyMatrix::with_block(q, agent_dim)
}

/// Rotation mapping `null(Q)` onto the leading coordinates.
pub fn constraint_rotation(q: &PenaltyMatrix) -> ConstraintRotation {
    q.rotation().clone()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path2_laplacian() {
        let l = laplacian(&Graph::path(2).unwrap());
        assert_eq!(l, Matrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
    }

    #[test]
    fn k3_laplacian() {
        let l = laplacian(&Graph::complete(3).unwrap());
        let want = Matrix::from_row_slice(3, 3, &[2., -1., -1., -1., 2., -1., -1., -1., 2.]);
        assert_eq!(l, want);
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(Graph::new(3, &[(1, 1)]).is_err());
        assert!(Graph::new(3, &[(0, 3)]).is_err());
        assert!(Graph::new(0, &[]).is_err());
    }

    #[test]
    fn edge_list_roundtrip() {
        let g = Graph::new(4, &[(0, 1), (2, 1), (3, 0)]).unwrap();
        let text = g.to_edge_list();
        assert_eq!(text, "4\n1 2\n1 4\n2 3\n");
        assert_eq!(Graph::parse_edge_list(&text).unwrap(), g);
        assert!(Graph::parse_edge_list("3\n0 1\n").is_err());
    }

    #[test]
    fn connectivity() {
        assert!(Graph::path(5).unwrap().is_connected());
        assert!(!Graph::new(4, &[(0, 1), (2, 3)]).unwrap().is_connected());
        assert!(Graph::new(1, &[]).unwrap().is_connected());
    }

    #[test]
    fn path2_rotation() {
        let q = consensus_penalty(&laplacian(&Graph::path(2).unwrap()), 1).unwrap();
        let r = constraint_rotation(&q);
        let s = 1.0 / 2f64.sqrt();
        assert_eq!(r.constraint_dim, 1);
        assert!((r.rotation[(0, 0)] - s).abs() < 1e-12 && (r.rotation[(1, 0)] - s).abs() < 1e-12);
        assert!((r.rotation.column(1).abs() - Vector::from_element(2, s)).amax() < 1e-12);
        let rq = r.rotate(q.matrix());
        assert!((rq - Matrix::from_diagonal(&Vector::from_vec(vec![0.0, 2.0]))).amax() < 1e-12);
    }

    #[test]
    fn rejects_indefinite_and_ambiguous() {
        let q = Matrix::from_diagonal(&Vector::from_vec(vec![0.0, -1.0]));
        assert!(matches!(PenaltyMatrix::new(q), Err(Error::Penalty(_))));
        let q = Matrix::from_diagonal(&Vector::from_vec(vec![0.0, 1e-8, 1.0]));
        assert!(matches!(PenaltyMatrix::new(q), Err(Error::DegenerateSpectrum(_))));
        let q = Matrix::identity(2, 2);
        assert!(PenaltyMatrix::new(q).is_err());
        assert!(consensus_penalty(&Matrix::identity(1, 1), 0).is_err());
    }
}
