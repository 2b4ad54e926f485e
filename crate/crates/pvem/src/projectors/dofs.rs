//! Local dof layouts and the global numbering.
//!
//! Local order: vertex values (component-blocked), then the `k-1` interior
//! Gauss-Lobatto values of each edge (component-blocked, edge by edge), then
//! the internal groups: moments against `q_β`, Stokes `G⊥` moments,
//! divergence moments, augmented moments.

use crate::mesh_geometry::{Mesh, Point2};
use crate::polynomials::dim_upto;
use crate::quadrature::lobatto_nodes_unit;

use super::{Problem, ProjectorError, SpaceKind};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalLayout {
    pub problem: Problem,
    pub nf: usize,
    pub k: usize,
    pub nv: usize,
    pub space: SpaceKind,
    /// Direct moment dofs per component (`β < n_moment`).
    pub n_moment: usize,
    pub n_gperp: usize,
    pub n_div: usize,
    /// Augmented moments per component, covering `β ∈ [aug_lo, aug_lo + n_aug)`.
    pub aug_lo: usize,
    pub n_aug: usize,
}

impl LocalLayout {
    pub fn new(
        problem: Problem,
        k: usize,
        nv: usize,
        space: SpaceKind,
    ) -> Result<Self, ProjectorError> {
        if k < 1 || (problem == Problem::Stokes && k < 2) {
            return Err(ProjectorError::InvalidDegree { problem, k });
        }
        let nf = problem.field_dim();
        let ki = k as isize;
        let std = dim_upto(ki - 2);
        let (n_aug, aug_lo) = match space {
            SpaceKind::Augmented(l) if l == 1 => (dim_upto(ki - 1) - std, std),
            SpaceKind::Augmented(l) => (dim_upto(ki + l as isize - 2) - std, std),
            _ => (0, std),
        };
        let (n_moment, n_gperp, n_div) = if problem == Problem::Stokes {
            let n_div = dim_upto(ki - 1) - 1;
            (0, 2 * std - n_div, n_div)
        } else {
            (std, 0, 0)
        };
        Ok(LocalLayout {
            problem,
            nf,
            k,
            nv,
            space,
            n_moment,
            n_gperp,
            n_div,
            aug_lo,
            n_aug,
        })
    }

    pub fn n_boundary(&self) -> usize {
        self.nf * self.k * self.nv
    }

    pub fn len(&self) -> usize {
        self.n_boundary() + self.nf * (self.n_moment + self.n_aug) + self.n_gperp + self.n_div
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Node `j ∈ 0..=k` of edge `e` for component `c`; nodes 0 and `k` are the edge vertices.
    pub fn boundary(&self, c: usize, e: usize, j: usize) -> usize {
        if j == 0 {
            self.vertex(c, e)
        } else if j == self.k {
            self.vertex(c, (e + 1) % self.nv)
        } else {
            self.nf * self.nv + c * self.nv * (self.k - 1) + e * (self.k - 1) + (j - 1)
        }
    }

    pub fn vertex(&self, c: usize, v: usize) -> usize {
        c * self.nv + v
    }

    pub fn moment(&self, c: usize, beta: usize) -> usize {
        self.n_boundary() + c * self.n_moment + beta
    }

    pub fn gperp(&self, b: usize) -> usize {
        self.n_boundary() + self.nf * self.n_moment + b
    }

    /// Divergence moment against `q_a`, `a ≥ 1`.
    pub fn div(&self, a: usize) -> usize {
        self.n_boundary() + self.nf * self.n_moment + self.n_gperp + (a - 1)
    }

    pub fn aug(&self, c: usize, i: usize) -> usize {
        self.n_boundary() + self.nf * self.n_moment + self.n_gperp + self.n_div + c * self.n_aug + i
    }

    /// Number of leading `q_β` whose moments (per component) are dofs or dof combinations.
    pub fn dof_moment_rows(&self) -> usize {
        if self.n_aug > 0 {
            self.aug_lo + self.n_aug
        } else {
            self.aug_lo
        }
    }
}

#[derive(Clone, Debug)]
pub struct DirichletDof {
    pub index: usize,
    pub component: usize,
    pub point: Point2,
}

#[derive(Clone, Debug)]
pub struct DofMap {
    pub problem: Problem,
    pub k: usize,
    pub layouts: Vec<LocalLayout>,
    pub local_to_global: Vec<Vec<usize>>,
    /// Velocity/displacement/scalar unknowns.
    pub n_field: usize,
    /// First pressure unknown of each element (Stokes).
    pub pressure_offset: Vec<usize>,
    pub n_pressure_per_element: usize,
    /// Total unknowns including the pressure multiplier (Stokes).
    pub n_total: usize,
    pub dirichlet: Vec<DirichletDof>,
}

impl DofMap {
    pub fn multiplier(&self) -> Option<usize> {
        (self.problem == Problem::Stokes).then(|| self.n_total - 1)
    }
}

/// Global numbering by mesh entity: vertex dofs, edge-node dofs (in the
/// canonical edge orientation), element-internal dofs, then pressures and the
/// zero-mean multiplier for Stokes. `spaces[e]` selects the local space of element `e`.
pub fn build_dofmap(
    mesh: &Mesh,
    problem: Problem,
    k: usize,
    spaces: &[SpaceKind],
) -> Result<DofMap, ProjectorError> {
    if k < 1 || (problem == Problem::Stokes && k < 2) {
        return Err(ProjectorError::InvalidDegree { problem, k });
    }
    let nf = problem.field_dim();
    let nvg = mesh.vertices.len();
    let neg = mesh.edges.len();
    let edge_base = nf * nvg;
    let mut next = edge_base + nf * neg * (k - 1);
    let nodes = lobatto_nodes_unit(k);
    let mut layouts = Vec::with_capacity(mesh.elements.len());
    let mut l2g = Vec::with_capacity(mesh.elements.len());
    for (ei, el) in mesh.elements.iter().enumerate() {
        let lay = LocalLayout::new(problem, k, el.n_vertices(), spaces[ei])?;
        let mut map = vec![usize::MAX; lay.len()];
        for c in 0..nf {
            for (v, &gv) in el.vertex_ids.iter().enumerate() {
                map[lay.vertex(c, v)] = c * nvg + gv;
            }
            for (e, &ge) in el.edge_ids.iter().enumerate() {
                for j in 1..k {
                    let m = if el.edge_reversed[e] {
                        k - j - 1
                    } else {
                        j - 1
                    };
                    map[lay.boundary(c, e, j)] = edge_base + c * neg * (k - 1) + ge * (k - 1) + m;
                }
            }
        }
        for slot in map.iter_mut().skip(lay.n_boundary()) {
            *slot = next;
            next += 1;
        }
        debug_assert!(map.iter().all(|&g| g != usize::MAX));
        layouts.push(lay);
        l2g.push(map);
    }
    let n_field = next;
    let mut pressure_offset = Vec::new();
    let n_pressure_per_element = if problem == Problem::Stokes {
        dim_upto(k as isize - 1)
    } else {
        0
    };
    let mut n_total = n_field;
    if problem == Problem::Stokes {
        for _ in &mesh.elements {
            pressure_offset.push(n_total);
            n_total += n_pressure_per_element;
        }
        n_total += 1;
    }
    let mut dirichlet = Vec::new();
    for c in 0..nf {
        for (v, p) in mesh.vertices.iter().enumerate() {
            if mesh.boundary_vertex[v] {
                dirichlet.push(DirichletDof {
                    index: c * nvg + v,
                    component: c,
                    point: *p,
                });
            }
        }
        for (ge, edge) in mesh.edges.iter().enumerate() {
            if !edge.is_boundary() {
                continue;
            }
            let el = &mesh.elements[edge.elements[0]];
            let le = el.edge_ids.iter().position(|&x| x == ge).unwrap();
            for j in 1..k {
                let m = if el.edge_reversed[le] {
                    k - j - 1
                } else {
                    j - 1
                };
                dirichlet.push(DirichletDof {
                    index: edge_base + c * neg * (k - 1) + ge * (k - 1) + m,
                    component: c,
                    point: el.edges[le].point(nodes[j]),
                });
            }
        }
    }
    Ok(DofMap {
        problem,
        k,
        layouts,
        local_to_global: l2g,
        n_field,
        pressure_offset,
        n_pressure_per_element,
        n_total,
        dirichlet,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh_geometry::builtin_mesh;

    #[test]
    fn local_counts() {
        let l = LocalLayout::new(Problem::Laplace, 1, 4, SpaceKind::Standard).unwrap();
        assert_eq!(l.len(), 4);
        let l = LocalLayout::new(Problem::Laplace, 3, 4, SpaceKind::Standard).unwrap();
        assert_eq!(l.len(), 15);
        let l = LocalLayout::new(Problem::Laplace, 2, 4, SpaceKind::Augmented(2)).unwrap();
        assert_eq!(l.len(), 14);
        for k in 1..8 {
            for ell in 1..4 {
                let l =
                    LocalLayout::new(Problem::Laplace, k, 5, SpaceKind::Augmented(ell)).unwrap();
                assert_eq!(l.len(), k * 5 + (k + ell - 1) * (k + ell) / 2);
            }
            let l = LocalLayout::new(Problem::Elasticity, k, 5, SpaceKind::Standard).unwrap();
            assert_eq!(l.len(), 2 * (k * 5 + k * (k - 1) / 2));
        }
        for k in 2..8 {
            let l = LocalLayout::new(Problem::Stokes, k, 5, SpaceKind::Standard).unwrap();
            assert_eq!(l.len(), 2 * (k * 5 + k * (k - 1) / 2));
        }
        assert!(LocalLayout::new(Problem::Stokes, 1, 4, SpaceKind::Standard).is_err());
    }

    #[test]
    fn shared_edges_share_global_dofs() {
        let mesh = builtin_mesh("voronoi5").unwrap();
        let k = 4;
        let map =
            build_dofmap(&mesh, Problem::Elasticity, k, &vec![SpaceKind::Standard; 5]).unwrap();
        for (ge, edge) in mesh.edges.iter().enumerate() {
            if edge.elements.len() != 2 {
                continue;
            }
            let mut sets = Vec::new();
            for &el in &edge.elements {
                let e = &mesh.elements[el];
                let le = e.edge_ids.iter().position(|&x| x == ge).unwrap();
                let lay = &map.layouts[el];
                let mut g: Vec<usize> = (0..=k)
                    .map(|j| map.local_to_global[el][lay.boundary(1, le, j)])
                    .collect();
                if e.edge_reversed[le] {
                    g.reverse();
                }
                sets.push(g);
            }
            assert_eq!(sets[0], sets[1]);
        }
        let mut all: Vec<usize> = map.local_to_global.iter().flatten().copied().collect();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), map.n_field);
    }
}
