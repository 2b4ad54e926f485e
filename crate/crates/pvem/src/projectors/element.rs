//! Per-element polynomial data: orthonormal basis, quadrature, basis values
//! at volume and edge points, and edge Lagrange traces.

use nalgebra::{DMatrix, DVector};

use crate::mesh_geometry::{Element, Point2};
use crate::polynomials::{dim_p, mgs_with_rule, BasisValues, OrthoBasis, PolyError};
use crate::quadrature::{edge_rule, element_rule, lobatto_nodes_unit, EdgeRule, QuadRule};

/// Extra Gauss orders added on top of polynomial exactness.
pub const DEFAULT_SURPLUS: usize = 8;

/// Surplus used when the form carries a variable coefficient.
pub const VARIABLE_SURPLUS: usize = 16;

#[derive(Clone, Debug)]
pub struct EdgeData {
    pub rule: EdgeRule,
    /// Lagrange basis through the `k+1` Gauss-Lobatto nodes, at the rule points.
    pub lag: DMatrix<f64>,
    /// Basis values at the rule points.
    pub val: DMatrix<f64>,
    /// Physical node positions (`k+1`, endpoints included).
    pub nodes: Vec<Point2>,
    /// Basis values at the nodes.
    pub node_val: DMatrix<f64>,
}

#[derive(Clone, Debug)]
pub struct ElementData<'a> {
    pub element: &'a Element,
    pub k: usize,
    pub basis: OrthoBasis,
    pub rule: QuadRule,
    pub vals: BasisValues,
    pub mass: DMatrix<f64>,
    pub dxm: DMatrix<f64>,
    pub dym: DMatrix<f64>,
    pub edges: Vec<EdgeData>,
}

fn lagrange(nodes: &[f64], t: f64) -> Vec<f64> {
    (0..nodes.len())
        .map(|j| {
            let mut v = 1.0;
            for (m, &tm) in nodes.iter().enumerate() {
                if m != j {
                    v *= (t - tm) / (nodes[j] - tm);
                }
            }
            v
        })
        .collect()
}

impl<'a> ElementData<'a> {
    /// Dof order `k`, basis degree `degree ≥ k`, quadrature surplus `surplus`.
    pub fn new(
        element: &'a Element,
        k: usize,
        degree: usize,
        surplus: usize,
    ) -> Result<Self, PolyError> {
        let degree = degree.max(k);
        let rule = element_rule(element, 2 * degree + surplus);
        let basis = mgs_with_rule(element, degree, &rule)?;
        let vals = basis.values(&rule.points, 2);
        let w = DVector::from_vec(rule.weights.clone());
        let mut wv = vals.val.clone();
        for (r, &wr) in w.iter().enumerate() {
            wv.row_mut(r).scale_mut(wr);
        }
        let mass = vals.val.transpose() * wv;
        let dxm = basis.partial_matrix(1, 0);
        let dym = basis.partial_matrix(0, 1);
        let params = lobatto_nodes_unit(k);
        let edges = element
            .edges
            .iter()
            .map(|e| {
                let nb = e.degree();
                let rule = edge_rule(e, nb * degree + nb - 1 + k + surplus);
                let mut lag = DMatrix::zeros(rule.params.len(), k + 1);
                for (q, &t) in rule.params.iter().enumerate() {
                    for (j, v) in lagrange(&params, t).into_iter().enumerate() {
                        lag[(q, j)] = v;
                    }
                }
                let val = basis.values(&rule.points, 0).val;
                let nodes: Vec<Point2> = params.iter().map(|&t| e.point(t)).collect();
                let node_val = basis.values(&nodes, 0).val;
                EdgeData {
                    rule,
                    lag,
                    val,
                    nodes,
                    node_val,
                }
            })
            .collect();
        Ok(ElementData {
            element,
            k,
            basis,
            rule,
            vals,
            mass,
            dxm,
            dym,
            edges,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn degree(&self) -> usize {
        self.basis.degree
    }

    pub fn area(&self) -> f64 {
        self.element.area
    }

    pub fn nv(&self) -> usize {
        self.element.n_vertices()
    }

    /// Basis values at vertex `v` (row of the first edge node).
    pub fn vertex_values(&self, v: usize) -> DVector<f64> {
        self.edges[v].node_val.row(0).transpose()
    }

    pub fn weights(&self) -> &[f64] {
        &self.rule.weights
    }

    /// Orthonormal coefficients (degree ≤ `degree`) of the L² projection of `f`.
    pub fn project_function(&self, f: impl Fn(Point2) -> f64, degree: usize) -> DVector<f64> {
        let n = dim_p(degree).min(self.dim());
        let mut rhs = DVector::zeros(n);
        for (q, (&p, &w)) in self.rule.points.iter().zip(&self.rule.weights).enumerate() {
            let fv = w * f(p);
            for a in 0..n {
                rhs[a] += fv * self.vals.val[(q, a)];
            }
        }
        let h = self.mass.view((0, 0), (n, n)).clone_owned();
        h.cholesky().map(|c| c.solve(&rhs)).unwrap_or(rhs)
    }
}
