// SPDX-License-Identifier: Apache-2.0

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::graphdata::SampleGraph;

/// Binary adjacency of the symmetrised graph, self-loops dropped.
pub fn symmetric_adjacency(g: &SampleGraph) -> DMatrix<f64> {
    let n = g.num_nodes();
    let mut w = DMatrix::zeros(n, n);
    for (s, d) in g.edge_index() {
        if s != d {
            w[(s, d)] = 1.0;
            w[(d, s)] = 1.0;
        }
    }
    w
}

/// Combinatorial Laplacian `D - W` of a symmetric weight matrix.
pub fn laplacian_of(w: &DMatrix<f64>) -> DMatrix<f64> {
    let n = w.nrows();
    let mut l = -w.clone();
    for i in 0..n {
        l[(i, i)] = 0.0;
        let deg: f64 = (0..n).filter(|&j| j != i).map(|j| w[(i, j)]).sum();
        l[(i, i)] = deg;
    }
    l
}

/// Laplacian of the symmetrised sample graph.
pub fn laplacian(g: &SampleGraph) -> DMatrix<f64> {
    laplacian_of(&symmetric_adjacency(g))
}

/// Eigenpairs sorted by ascending eigenvalue, or `None` if the iteration
/// does not converge.
pub(crate) fn sorted_eigen(m: &DMatrix<f64>, max_iter: usize) -> Option<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    if n == 0 {
        return Some((Vec::new(), DMatrix::zeros(0, 0)));
    }
    let eig = SymmetricEigen::try_new(m.clone(), 1e-14, max_iter)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .total_cmp(&eig.eigenvalues[b])
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect::<Vec<DVector<f64>>>(),
    );
    Some((values, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphdata::{InstructionRecord, Label, Level, NodeId};

    #[test]
    fn path_laplacian() {
        let g = SampleGraph::new(
            "p",
            Level::Cfg,
            Label::Benign,
            (0..3)
                .map(|i| (NodeId(i), vec![InstructionRecord::absent()]))
                .collect(),
            vec![
                (NodeId(0), NodeId(1)),
                (NodeId(2), NodeId(1)),
                (NodeId(1), NodeId(2)),
            ],
        )
        .unwrap();
        let l = laplacian(&g);
        let expect =
            DMatrix::from_row_slice(3, 3, &[1.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 1.0]);
        assert_eq!(l, expect);
        let (vals, _) = sorted_eigen(&l, 1000).unwrap();
        assert!(vals[0].abs() < 1e-12);
        assert!((vals[2] - 3.0).abs() < 1e-12);
    }
}
