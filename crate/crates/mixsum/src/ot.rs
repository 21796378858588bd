//! Exact discrete optimal transport (network simplex on the transportation
//! polytope), the closed-form Gaussian W₂ cost, Mixture Wasserstein, and the
//! exact 1D Wasserstein sweep that underpins every sliced estimator.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{matrix_sqrt, sym_eig, SymmetricMatrix};
use crate::measures::{Discrete1DMeasure, GaussianAtom, MixingMeasure};
use crate::para;

const MARGINAL_TOL: f64 = 1e-8;
const FEASIBILITY_TOL: f64 = 1e-9;

/// A feasible coupling between two discrete measures.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    matrix: DMatrix<f64>,
    row_marginals: Vec<f64>,
    col_marginals: Vec<f64>,
}

impl TransportPlan {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn row_marginals(&self) -> &[f64] {
        &self.row_marginals
    }

    pub fn col_marginals(&self) -> &[f64] {
        &self.col_marginals
    }

    /// Maximum violation of the marginal constraints.
    pub fn feasibility_gap(&self) -> f64 {
        let mut gap: f64 = 0.0;
        for (i, &a) in self.row_marginals.iter().enumerate() {
            gap = gap.max((self.matrix.row(i).sum() - a).abs());
        }
        for (j, &b) in self.col_marginals.iter().enumerate() {
            gap = gap.max((self.matrix.column(j).sum() - b).abs());
        }
        gap
    }

    fn check(self, tol: f64) -> Result<Self> {
        let gap = self.feasibility_gap();
        if gap > tol {
            return Err(Error::Numerical(format!(
                "transport plan violates marginals by {gap:.3e}"
            )));
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy)]
struct BasisArc {
    row: usize,
    col: usize,
    flow: f64,
}

/// Transportation-problem network simplex. The basis is a spanning tree on
/// the bipartite supply/demand graph; entering arcs are chosen by most
/// negative reduced cost with a switch to Bland's rule (lowest variable
/// index) after a pivot budget, which prevents cycling on degenerate bases.
struct Simplex<'a> {
    m: usize,
    n: usize,
    cost: &'a DMatrix<f64>,
    arcs: Vec<BasisArc>,
    adj: Vec<Vec<usize>>, // node -> basis arc ids; nodes 0..m are rows, m.. are cols
    potentials: Vec<f64>,
    eps: f64,
}

impl<'a> Simplex<'a> {
    fn new(cost: &'a DMatrix<f64>, a: &[f64], b: &[f64]) -> Self {
        let m = a.len();
        let n = b.len();
        let mut arcs = Vec::with_capacity(m + n - 1);
        let mut adj = vec![Vec::new(); m + n];
        // Northwest-corner staircase: always m+n-1 arcs, always a tree.
        let mut rem_a = a.to_vec();
        let mut rem_b = b.to_vec();
        let (mut i, mut j) = (0, 0);
        loop {
            let f = rem_a[i].min(rem_b[j]).max(0.0);
            let id = arcs.len();
            arcs.push(BasisArc { row: i, col: j, flow: f });
            adj[i].push(id);
            adj[m + j].push(id);
            rem_a[i] -= f;
            rem_b[j] -= f;
            if i == m - 1 && j == n - 1 {
                break;
            }
            if i == m - 1 {
                j += 1;
            } else if j == n - 1 {
                i += 1;
            } else if rem_a[i] <= rem_b[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
        let scale = cost.iter().fold(1.0f64, |acc, &c| acc.max(c.abs()));
        Simplex {
            m,
            n,
            cost,
            arcs,
            adj,
            potentials: vec![0.0; m + n],
            eps: 1e-12 * scale,
        }
    }

    fn other_node(&self, arc: usize, node: usize) -> usize {
        let a = self.arcs[arc];
        let (u, w) = (a.row, self.m + a.col);
        if u == node {
            w
        } else {
            u
        }
    }

    /// Tree traversal setting u_i + v_j = c_ij on all basis arcs.
    fn update_potentials(&mut self) {
        let total = self.m + self.n;
        let mut seen = vec![false; total];
        let mut stack = vec![0usize];
        self.potentials[0] = 0.0;
        seen[0] = true;
        while let Some(node) = stack.pop() {
            for &arc in &self.adj[node] {
                let next = self.other_node(arc, node);
                if !seen[next] {
                    seen[next] = true;
                    let a = self.arcs[arc];
                    let c = self.cost[(a.row, a.col)];
                    self.potentials[next] = c - self.potentials[node];
                    stack.push(next);
                }
            }
        }
    }

    fn reduced_cost(&self, i: usize, j: usize) -> f64 {
        self.cost[(i, j)] - self.potentials[i] - self.potentials[self.m + j]
    }

    fn entering_arc(&self, bland: bool) -> Option<(usize, usize)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..self.m {
            for j in 0..self.n {
                let r = self.reduced_cost(i, j);
                if r < -self.eps {
                    if bland {
                        return Some((i, j));
                    }
                    if best.map_or(true, |(_, _, br)| r < br) {
                        best = Some((i, j, r));
                    }
                }
            }
        }
        best.map(|(i, j, _)| (i, j))
    }

    /// Node path from `from` to `to` as a sequence of basis arc ids.
    fn tree_path(&self, from: usize, to: usize) -> Vec<usize> {
        let total = self.m + self.n;
        let mut parent_arc = vec![usize::MAX; total];
        let mut parent_node = vec![usize::MAX; total];
        let mut seen = vec![false; total];
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(from);
        seen[from] = true;
        while let Some(node) = queue.pop_front() {
            if node == to {
                break;
            }
            for &arc in &self.adj[node] {
                let next = self.other_node(arc, node);
                if !seen[next] {
                    seen[next] = true;
                    parent_arc[next] = arc;
                    parent_node[next] = node;
                    queue.push_back(next);
                }
            }
        }
        let mut path = Vec::new();
        let mut node = to;
        while node != from {
            path.push(parent_arc[node]);
            node = parent_node[node];
        }
        path.reverse();
        path
    }

    fn pivot(&mut self, enter: (usize, usize)) {
        let (ei, ej) = enter;
        // Cycle: entering cell (+) then the tree path from row node ei to
        // col node ej, alternating −,+,−,… starting with −.
        let path = self.tree_path(ei, self.m + ej);
        let minus: Vec<usize> = path.iter().copied().step_by(2).collect();
        let mut theta = f64::INFINITY;
        let mut leaving = usize::MAX;
        let mut leaving_key = usize::MAX;
        for &arc in &minus {
            let a = self.arcs[arc];
            let key = a.row * self.n + a.col;
            if a.flow < theta - 1e-15 || (a.flow <= theta + 1e-15 && key < leaving_key) {
                theta = theta.min(a.flow);
                leaving = arc;
                leaving_key = key;
            }
        }
        let theta = theta.max(0.0);
        for (pos, &arc) in path.iter().enumerate() {
            if pos % 2 == 0 {
                self.arcs[arc].flow = (self.arcs[arc].flow - theta).max(0.0);
            } else {
                self.arcs[arc].flow += theta;
            }
        }
        // Replace the leaving arc in place so ids stay stable.
        let old = self.arcs[leaving];
        let (on1, on2) = (old.row, self.m + old.col);
        self.adj[on1].retain(|&x| x != leaving);
        self.adj[on2].retain(|&x| x != leaving);
        self.arcs[leaving] = BasisArc { row: ei, col: ej, flow: theta };
        self.adj[ei].push(leaving);
        self.adj[self.m + ej].push(leaving);
    }

    fn solve(&mut self) -> (f64, Vec<BasisArc>) {
        let bland_after = 64 * (self.m + self.n);
        let mut pivots = 0usize;
        loop {
            self.update_potentials();
            let bland = pivots > bland_after;
            match self.entering_arc(bland) {
                None => break,
                Some(enter) => {
                    self.pivot(enter);
                    pivots += 1;
                }
            }
        }
        let value: f64 = self
            .arcs
            .iter()
            .map(|a| self.cost[(a.row, a.col)] * a.flow)
            .sum();
        (value, self.arcs.clone())
    }
}

/// Exact solution of `min Σ cost·π` over the transportation polytope
/// `Γ(a, b)`. Zero-weight rows and columns are dropped before solving and
/// restored as zero mass in the returned plan.
pub fn exact_discrete_wasserstein(
    cost: &DMatrix<f64>,
    a: &[f64],
    b: &[f64],
) -> Result<(f64, TransportPlan)> {
    if cost.nrows() != a.len() || cost.ncols() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "cost is {}x{} but marginals have lengths {} and {}",
            cost.nrows(),
            cost.ncols(),
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyMeasure("empty marginal".to_string()));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidArgument("cost matrix has non-finite entries".to_string()));
    }
    if a.iter().chain(b.iter()).any(|&w| w < 0.0 || !w.is_finite()) {
        return Err(Error::InvalidArgument("marginals must be nonnegative".to_string()));
    }
    let sum_a: f64 = a.iter().sum();
    let sum_b: f64 = b.iter().sum();
    let gap = (sum_a - sum_b).abs();
    if gap > MARGINAL_TOL {
        return Err(Error::InfeasibleMarginals { gap });
    }
    if sum_a <= 0.0 {
        return Err(Error::EmptyMeasure("marginals carry no mass".to_string()));
    }

    let rows: Vec<usize> = (0..a.len()).filter(|&i| a[i] > 0.0).collect();
    let cols: Vec<usize> = (0..b.len()).filter(|&j| b[j] > 0.0).collect();
    let ra: Vec<f64> = rows.iter().map(|&i| a[i]).collect();
    // Rescale one side so both sides carry identical total mass.
    let scale = sum_a / sum_b;
    let rb: Vec<f64> = cols.iter().map(|&j| b[j] * scale).collect();
    let reduced = DMatrix::from_fn(rows.len(), cols.len(), |i, j| cost[(rows[i], cols[j])]);

    let mut simplex = Simplex::new(&reduced, &ra, &rb);
    let (value, arcs) = simplex.solve();

    #[cfg(debug_assertions)]
    {
        simplex.update_potentials();
        for arc in &arcs {
            if arc.flow > 1e-12 {
                let r = simplex.reduced_cost(arc.row, arc.col);
                debug_assert!(
                    r.abs() <= 1e-7 * (1.0 + reduced[(arc.row, arc.col)].abs()),
                    "complementary slackness violated: reduced cost {r} on flow {}",
                    arc.flow
                );
            }
        }
    }

    let mut full = DMatrix::zeros(a.len(), b.len());
    for arc in arcs {
        full[(rows[arc.row], cols[arc.col])] += arc.flow;
    }
    let plan = TransportPlan {
        matrix: full,
        row_marginals: a.to_vec(),
        col_marginals: b.to_vec(),
    }
    .check(FEASIBILITY_TOL + gap)?;
    Ok((value.max(0.0), plan))
}

/// Squared Wasserstein-2 distance between two Gaussians:
/// `‖μ₁−μ₂‖² + Tr Σ₁ + Tr Σ₂ − 2 Tr((Σ₁^{1/2} Σ₂ Σ₁^{1/2})^{1/2})`.
pub fn gaussian_w2_sq(a: &GaussianAtom, b: &GaussianAtom) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "atoms have dimensions {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    let mean_term = (a.mean() - b.mean()).norm_squared();
    let root = matrix_sqrt(a.cov())?;
    let inner = root.as_matrix() * b.cov().as_matrix() * root.as_matrix();
    // Symmetrize before the outer square root to kill drift, and read the
    // Bures trace off the spectrum so near-singular products stay valid.
    let inner = SymmetricMatrix::new(0.5 * (&inner + inner.transpose()))?;
    let (values, _) = sym_eig(&inner)?;
    let bures: f64 = values.iter().map(|&l| l.max(0.0).sqrt()).sum();
    Ok((mean_term + a.cov().trace() + b.cov().trace() - 2.0 * bures).max(0.0))
}

/// Mixture Wasserstein (squared): discrete OT with Gaussian-W₂ costs.
pub fn mixture_wasserstein_sq(g1: &MixingMeasure, g2: &MixingMeasure) -> Result<f64> {
    if g1.dim() != g2.dim() {
        return Err(Error::DimensionMismatch(format!(
            "measures have dimensions {} and {}",
            g1.dim(),
            g2.dim()
        )));
    }
    let (k1, k2) = (g1.len(), g2.len());
    let costs = para::par_map_indexed(k1 * k2, |idx| {
        let (i, j) = (idx / k2, idx % k2);
        gaussian_w2_sq(&g1.atoms()[i], &g2.atoms()[j])
    });
    let mut cost = DMatrix::zeros(k1, k2);
    for (idx, c) in costs.into_iter().enumerate() {
        cost[(idx / k2, idx % k2)] = c?;
    }
    let (value, _) = exact_discrete_wasserstein(&cost, g1.weights(), g2.weights())?;
    Ok(value)
}

fn pow_cost(d: f64, p: f64) -> f64 {
    if p == 1.0 {
        d
    } else if p == 2.0 {
        d * d
    } else {
        d.powf(p)
    }
}

/// Exact `W_p^p` between two sorted discrete 1D measures via the merged
/// quantile sweep: walk both CDFs jointly, accumulating `|x−y|^p` times the
/// overlapping probability mass.
pub(crate) fn wasserstein_1d_sorted(
    xa: &[f64],
    wa: &[f64],
    xb: &[f64],
    wb: &[f64],
    p: f64,
) -> f64 {
    let (mut i, mut j) = (0usize, 0usize);
    let mut rem_a = wa[0];
    let mut rem_b = wb[0];
    let mut total = 0.0;
    while i < xa.len() && j < xb.len() {
        let mass = rem_a.min(rem_b);
        if mass > 0.0 {
            total += mass * pow_cost((xa[i] - xb[j]).abs(), p);
        }
        rem_a -= mass;
        rem_b -= mass;
        if rem_a <= 0.0 {
            i += 1;
            if i < xa.len() {
                rem_a = wa[i];
            }
        }
        if rem_b <= 0.0 {
            j += 1;
            if j < xb.len() {
                rem_b = wb[j];
            }
        }
    }
    total
}

/// Exact `W_p^p` between two discrete 1D measures.
pub fn wasserstein_1d(p: f64, g1: &Discrete1DMeasure, g2: &Discrete1DMeasure) -> f64 {
    wasserstein_1d_sorted(g1.support(), g1.weights(), g2.support(), g2.weights(), p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SpdMatrix;
    use nalgebra::DVector;

    fn atom(mean: &[f64], diag: &[f64]) -> GaussianAtom {
        GaussianAtom::new(
            DVector::from_column_slice(mean),
            SpdMatrix::from_diagonal(diag).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn single_cell_transport() {
        let cost = DMatrix::from_row_slice(1, 1, &[3.5]);
        let (value, plan) = exact_discrete_wasserstein(&cost, &[1.0], &[1.0]).unwrap();
        assert!((value - 3.5).abs() < 1e-12);
        assert!((plan.matrix()[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn permutation_cost_uniform_marginals() {
        // cost = 1 - I: identity assignment is free
        let cost = DMatrix::from_fn(3, 3, |i, j| if i == j { 0.0 } else { 1.0 });
        let w = [1.0 / 3.0; 3];
        let (value, plan) = exact_discrete_wasserstein(&cost, &w, &w).unwrap();
        assert!(value.abs() < 1e-12);
        for i in 0..3 {
            assert!((plan.matrix()[(i, i)] - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_weight_atoms_are_dropped() {
        let cost = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let (value, plan) =
            exact_discrete_wasserstein(&cost, &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((value - 1.0).abs() < 1e-12);
        assert!((plan.matrix()[(0, 1)] - 1.0).abs() < 1e-12);
        assert!(plan.matrix()[(1, 0)].abs() < 1e-15);
    }

    #[test]
    fn infeasible_marginals_rejected() {
        let cost = DMatrix::from_row_slice(1, 1, &[1.0]);
        match exact_discrete_wasserstein(&cost, &[1.0], &[0.5]) {
            Err(Error::InfeasibleMarginals { gap }) => assert!((gap - 0.5).abs() < 1e-12),
            other => panic!("expected infeasibility, got {other:?}"),
        }
    }

    #[test]
    fn gaussian_w2_identical_atoms() {
        let a = atom(&[1.0, -2.0], &[0.5, 2.0]);
        assert!(gaussian_w2_sq(&a, &a).unwrap() < 1e-12);
    }

    #[test]
    fn gaussian_w2_1d_closed_form() {
        // (μ₁−μ₂)² + (σ₁−σ₂)²
        let a = atom(&[1.0], &[4.0]);
        let b = atom(&[-1.0], &[9.0]);
        let expect = 4.0 + (2.0f64 - 3.0).powi(2);
        assert!((gaussian_w2_sq(&a, &b).unwrap() - expect).abs() < 1e-10);
    }

    #[test]
    fn gaussian_w2_commuting_covariances() {
        // diag(1,4) vs diag(4,1): per-axis 1D formula gives (1-2)²+(2-1)² = 2
        let a = atom(&[0.0, 0.0], &[1.0, 4.0]);
        let b = atom(&[0.0, 0.0], &[4.0, 1.0]);
        assert!((gaussian_w2_sq(&a, &b).unwrap() - 2.0).abs() < 1e-10);
    }

    #[test]
    fn gaussian_w2_equal_covariances_reduce_to_mean_term() {
        let a = atom(&[1.0, 2.0, 3.0], &[0.7, 1.3, 2.2]);
        let b = atom(&[0.0, -1.0, 2.0], &[0.7, 1.3, 2.2]);
        let expect = 1.0 + 9.0 + 1.0;
        assert!((gaussian_w2_sq(&a, &b).unwrap() - expect).abs() < 1e-9);
    }

    #[test]
    fn gaussian_w2_symmetry() {
        let a = atom(&[0.3, 1.0], &[1.5, 0.4]);
        let b = atom(&[-0.7, 0.2], &[0.9, 2.5]);
        let ab = gaussian_w2_sq(&a, &b).unwrap();
        let ba = gaussian_w2_sq(&b, &a).unwrap();
        assert!((ab - ba).abs() < 1e-9);
    }

    #[test]
    fn mw_single_atom_measures() {
        let a = atom(&[0.0], &[1.0]);
        let b = atom(&[2.0], &[4.0]);
        let g1 = MixingMeasure::new(vec![1.0], vec![a.clone()]).unwrap();
        let g2 = MixingMeasure::new(vec![1.0], vec![b.clone()]).unwrap();
        let mw = mixture_wasserstein_sq(&g1, &g2).unwrap();
        assert!((mw - gaussian_w2_sq(&a, &b).unwrap()).abs() < 1e-12);
        assert!(mixture_wasserstein_sq(&g1, &g1).unwrap() < 1e-12);
    }

    #[test]
    fn w1d_point_masses() {
        let d0 = Discrete1DMeasure::new(vec![0.0], vec![1.0]).unwrap();
        let d1 = Discrete1DMeasure::new(vec![1.0], vec![1.0]).unwrap();
        assert!((wasserstein_1d(2.0, &d0, &d1) - 1.0).abs() < 1e-15);
        assert!(wasserstein_1d(2.0, &d0, &d0).abs() < 1e-15);
    }

    #[test]
    fn w1d_split_mass() {
        // (0.5 δ₀ + 0.5 δ₂) vs δ₁ at p=1: both halves travel distance 1
        let g1 = Discrete1DMeasure::new(vec![0.0, 2.0], vec![0.5, 0.5]).unwrap();
        let g2 = Discrete1DMeasure::new(vec![1.0], vec![1.0]).unwrap();
        assert!((wasserstein_1d(1.0, &g1, &g2) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn w1d_handles_ties_in_support() {
        let g1 = Discrete1DMeasure::new(vec![0.0, 0.0, 1.0], vec![0.25, 0.25, 0.5]).unwrap();
        let g2 = Discrete1DMeasure::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        assert!(wasserstein_1d(2.0, &g1, &g2).abs() < 1e-15);
    }
}
