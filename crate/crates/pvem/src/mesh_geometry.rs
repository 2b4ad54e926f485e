//! Polygonal meshes with straight and Bézier edges.
//!
//! Every edge is parametrized over `t ∈ [0, 1]`. Elements list their edges
//! counterclockwise; the outward normal of an edge points to the right of
//! the traversal direction.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::gauss_legendre;

pub const MESH_VERSION: &str = "vem-mesh-1";

/// Relative tolerance (of the bounding-box diagonal) under which vertices are merged.
pub const MERGE_TOLERANCE: f64 = 1e-14;

const DIAMETER_SAMPLES: usize = 32;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("curve parameter {0} outside [0, 1]")]
    Domain(f64),
    #[error("a Bézier curve needs at least two control points")]
    TooFewControlPoints,
    #[error("unknown built-in mesh `{0}` (expected quad, voronoi5, octagon or bezier4)")]
    UnknownMesh(String),
    #[error("mesh file: {0}")]
    Parse(String),
    #[error("mesh file: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid mesh:\n{0}")]
    Invalid(ValidationReport),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 2-D cross product.
    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Point2) -> f64 {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn lerp(self, o: Point2, t: f64) -> Point2 {
        self + (o - self) * t
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

impl fmt::Display for Point2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BezierCurve {
    pub control_points: Vec<Point2>,
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c
}

impl BezierCurve {
    pub fn new(control_points: Vec<Point2>) -> Result<Self, GeometryError> {
        if control_points.len() < 2 {
            return Err(GeometryError::TooFewControlPoints);
        }
        Ok(BezierCurve { control_points })
    }

    pub fn degree(&self) -> usize {
        self.control_points.len() - 1
    }

    pub fn start(&self) -> Point2 {
        self.control_points[0]
    }

    pub fn end(&self) -> Point2 {
        *self.control_points.last().unwrap()
    }

    /// `r(t) = Σ P_i B_{i,n}(t)`.
    pub fn eval(&self, t: f64) -> Result<Point2, GeometryError> {
        check_param(t)?;
        Ok(self.point(t))
    }

    /// Exact derivative of the Bernstein sum.
    pub fn derivative(&self, t: f64) -> Result<Point2, GeometryError> {
        check_param(t)?;
        Ok(self.tangent(t))
    }

    pub(crate) fn point(&self, t: f64) -> Point2 {
        let n = self.degree();
        if t == 0.0 {
            return self.start();
        }
        if t == 1.0 {
            return self.end();
        }
        bernstein_sum(&self.control_points, n, t)
    }

    pub(crate) fn tangent(&self, t: f64) -> Point2 {
        let n = self.degree();
        let diffs: Vec<Point2> = self
            .control_points
            .windows(2)
            .map(|w| (w[1] - w[0]) * n as f64)
            .collect();
        bernstein_sum(&diffs, n - 1, t)
    }

    pub fn reversed(&self) -> BezierCurve {
        let mut cp = self.control_points.clone();
        cp.reverse();
        BezierCurve { control_points: cp }
    }

    /// de Casteljau subdivision at `t`.
    pub fn split(&self, t: f64) -> (BezierCurve, BezierCurve) {
        let mut work = self.control_points.clone();
        let n = work.len();
        let mut left = vec![work[0]];
        let mut right = vec![work[n - 1]];
        for level in 1..n {
            for i in 0..n - level {
                work[i] = work[i].lerp(work[i + 1], t);
            }
            left.push(work[0]);
            right.push(work[n - 1 - level]);
        }
        right.reverse();
        (
            BezierCurve {
                control_points: left,
            },
            BezierCurve {
                control_points: right,
            },
        )
    }
}

fn bernstein_sum(points: &[Point2], n: usize, t: f64) -> Point2 {
    let s = 1.0 - t;
    let mut acc = Point2::default();
    for (i, p) in points.iter().enumerate() {
        let b = binomial(n, i) * t.powi(i as i32) * s.powi((n - i) as i32);
        acc = acc + *p * b;
    }
    acc
}

fn check_param(t: f64) -> Result<(), GeometryError> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(GeometryError::Domain(t))
    }
}

/// An element edge traversed from `start` to `end`.
#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub start: Point2,
    pub end: Point2,
    pub curve: Option<BezierCurve>,
}

impl Edge {
    pub fn straight(start: Point2, end: Point2) -> Self {
        Edge {
            start,
            end,
            curve: None,
        }
    }

    pub fn curved(curve: BezierCurve) -> Self {
        Edge {
            start: curve.start(),
            end: curve.end(),
            curve: Some(curve),
        }
    }

    pub fn is_curved(&self) -> bool {
        self.curve.is_some()
    }

    /// Polynomial degree of the parametrization (1 for straight edges).
    pub fn degree(&self) -> usize {
        self.curve.as_ref().map_or(1, |c| c.degree())
    }

    pub fn point(&self, t: f64) -> Point2 {
        match &self.curve {
            Some(c) => c.point(t),
            None => self.start.lerp(self.end, t),
        }
    }

    pub fn tangent(&self, t: f64) -> Point2 {
        match &self.curve {
            Some(c) => c.tangent(t),
            None => self.end - self.start,
        }
    }

    pub fn reversed(&self) -> Edge {
        Edge {
            start: self.end,
            end: self.start,
            curve: self.curve.as_ref().map(|c| c.reversed()),
        }
    }

    pub fn length(&self) -> f64 {
        match &self.curve {
            None => self.start.dist(self.end),
            Some(c) => {
                let rule = gauss_legendre(24).to_unit();
                rule.points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&t, &w)| w * c.tangent(t).norm())
                    .sum()
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct Element {
    pub vertex_ids: Vec<usize>,
    pub edges: Vec<Edge>,
    /// Global edge index of each local edge.
    pub edge_ids: Vec<usize>,
    /// Whether the local traversal runs against the global edge orientation.
    pub edge_reversed: Vec<bool>,
    pub area: f64,
    pub centroid: Point2,
    pub diameter: f64,
}

impl Element {
    /// Stand-alone element from a closed edge loop (vertex ids are local).
    pub fn from_edges(edges: Vec<Edge>) -> Element {
        let n = edges.len();
        let mut e = Element {
            vertex_ids: (0..n).collect(),
            edges,
            edge_ids: (0..n).collect(),
            edge_reversed: vec![false; n],
            area: 0.0,
            centroid: Point2::default(),
            diameter: 0.0,
        };
        e.update_geometry();
        e
    }

    pub fn polygon(vertices: &[Point2]) -> Element {
        let n = vertices.len();
        let edges = (0..n)
            .map(|i| Edge::straight(vertices[i], vertices[(i + 1) % n]))
            .collect();
        Element::from_edges(edges)
    }

    pub fn vertices(&self) -> Vec<Point2> {
        self.edges.iter().map(|e| e.start).collect()
    }

    pub fn n_vertices(&self) -> usize {
        self.edges.len()
    }

    pub fn is_curved(&self) -> bool {
        self.edges.iter().any(|e| e.is_curved())
    }

    /// Highest polynomial degree of an edge parametrization.
    pub fn max_edge_degree(&self) -> usize {
        self.edges.iter().map(|e| e.degree()).max().unwrap_or(1)
    }

    fn update_geometry(&mut self) {
        let (area, centroid, diameter) = element_geometry(self);
        self.area = area;
        self.centroid = centroid;
        self.diameter = diameter;
    }

    pub fn bounding_box(&self) -> (Point2, Point2) {
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        let mut visit = |p: Point2| {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        };
        for e in &self.edges {
            match &e.curve {
                None => visit(e.start),
                // the control polygon bounds the curve
                Some(c) => c.control_points.iter().for_each(|&p| visit(p)),
            }
        }
        (lo, hi)
    }
}

/// Area and centroid by the divergence theorem, diameter over vertices and
/// curve samples.
pub fn element_geometry(element: &Element) -> (f64, Point2, f64) {
    let mut area = 0.0;
    let mut mx = 0.0;
    let mut my = 0.0;
    for e in &element.edges {
        match &e.curve {
            None => {
                let (p, q) = (e.start, e.end);
                // same contour forms as the curved branch so the pieces close up
                area += 0.5 * p.cross(q);
                mx += (q.y - p.y) * (p.x * p.x + p.x * q.x + q.x * q.x) / 6.0;
                my -= (q.x - p.x) * (p.y * p.y + p.y * q.y + q.y * q.y) / 6.0;
            }
            Some(curve) => {
                // integrands x y', x² y', y² x' are polynomial of degree 3n-1
                let rule = gauss_legendre(3 * curve.degree() / 2 + 2).to_unit();
                for (&t, &w) in rule.points.iter().zip(&rule.weights) {
                    let p = curve.point(t);
                    let d = curve.tangent(t);
                    area += 0.5 * w * (p.x * d.y - p.y * d.x);
                    mx += 0.5 * w * p.x * p.x * d.y;
                    my -= 0.5 * w * p.y * p.y * d.x;
                }
            }
        }
    }
    let centroid = Point2::new(mx / area, my / area);
    let mut samples: Vec<Point2> = Vec::new();
    for e in &element.edges {
        samples.push(e.start);
        if let Some(c) = &e.curve {
            for i in 0..DIAMETER_SAMPLES {
                samples.push(c.point(i as f64 / (DIAMETER_SAMPLES - 1) as f64));
            }
        }
    }
    let mut diameter: f64 = 0.0;
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            diameter = diameter.max(samples[i].dist(samples[j]));
        }
    }
    (area, centroid, diameter)
}

#[derive(Clone, Debug)]
pub struct MeshEdge {
    /// Endpoints in canonical orientation (lower vertex id first).
    pub v: [usize; 2],
    pub curve: Option<BezierCurve>,
    pub elements: Vec<usize>,
}

impl MeshEdge {
    pub fn is_boundary(&self) -> bool {
        self.elements.len() == 1
    }
}

#[derive(Clone, Debug)]
pub struct Mesh {
    pub name: String,
    pub vertices: Vec<Point2>,
    pub elements: Vec<Element>,
    pub edges: Vec<MeshEdge>,
    pub boundary_vertex: Vec<bool>,
    pub bbox: (Point2, Point2),
}

/// On-disk mesh document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshFile {
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub vertices: Vec<[f64; 2]>,
    pub elements: Vec<ElementFile>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElementFile {
    pub edges: Vec<EdgeFile>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeFile {
    pub v: [usize; 2],
    /// Full control polygon, endpoints included, in traversal order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bezier: Option<Vec<[f64; 2]>>,
}

fn pt(a: [f64; 2]) -> Point2 {
    Point2::new(a[0], a[1])
}

impl Mesh {
    /// Builds a mesh from vertex coordinates and edge loops. Vertices closer
    /// than the merge tolerance are identified; the merges are returned as
    /// warnings. Invariants are checked separately by [`validate_mesh`].
    pub fn from_file(doc: &MeshFile) -> Result<(Mesh, Vec<String>), GeometryError> {
        if doc.version != MESH_VERSION {
            return Err(GeometryError::Parse(format!(
                "unsupported version `{}` (expected `{MESH_VERSION}`)",
                doc.version
            )));
        }
        let raw: Vec<Point2> = doc.vertices.iter().map(|&a| pt(a)).collect();
        if let Some(i) = raw.iter().position(|p| !p.is_finite()) {
            return Err(GeometryError::Parse(format!("vertex {i} is not finite")));
        }
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &raw {
            lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let tol = MERGE_TOLERANCE * lo.dist(hi);
        let mut warnings = Vec::new();
        let mut remap = vec![0usize; raw.len()];
        let mut vertices: Vec<Point2> = Vec::new();
        for (i, p) in raw.iter().enumerate() {
            match vertices.iter().position(|q| q.dist(*p) <= tol) {
                Some(j) => {
                    warnings.push(format!(
                        "vertex {i} duplicates vertex {j} within {tol:e}; merged"
                    ));
                    remap[i] = j;
                }
                None => {
                    remap[i] = vertices.len();
                    vertices.push(*p);
                }
            }
        }
        let mut edge_index: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges: Vec<MeshEdge> = Vec::new();
        let mut elements = Vec::with_capacity(doc.elements.len());
        for (ei, ef) in doc.elements.iter().enumerate() {
            let mut local = Vec::with_capacity(ef.edges.len());
            let mut vids = Vec::with_capacity(ef.edges.len());
            let mut eids = Vec::with_capacity(ef.edges.len());
            let mut rev = Vec::with_capacity(ef.edges.len());
            for ed in &ef.edges {
                for &v in &ed.v {
                    if v >= raw.len() {
                        return Err(GeometryError::Parse(format!(
                            "element {ei} references vertex {v}, but only {} exist",
                            raw.len()
                        )));
                    }
                }
                let a = remap[ed.v[0]];
                let b = remap[ed.v[1]];
                let edge = match &ed.bezier {
                    None => Edge::straight(vertices[a], vertices[b]),
                    Some(cp) => {
                        let curve = BezierCurve::new(cp.iter().map(|&c| pt(c)).collect())
                            .map_err(|e| GeometryError::Parse(format!("element {ei}: {e}")))?;
                        Edge {
                            start: vertices[a],
                            end: vertices[b],
                            curve: Some(curve),
                        }
                    }
                };
                let key = [a.min(b), a.max(b)];
                let reversed = a > b;
                let id = *edge_index.entry(key).or_insert_with(|| {
                    edges.push(MeshEdge {
                        v: key,
                        curve: edge.curve.as_ref().map(|c| {
                            if reversed {
                                c.reversed()
                            } else {
                                c.clone()
                            }
                        }),
                        elements: Vec::new(),
                    });
                    edges.len() - 1
                });
                edges[id].elements.push(ei);
                vids.push(a);
                eids.push(id);
                rev.push(reversed);
                local.push(edge);
            }
            let mut el = Element {
                vertex_ids: vids,
                edges: local,
                edge_ids: eids,
                edge_reversed: rev,
                area: 0.0,
                centroid: Point2::default(),
                diameter: 0.0,
            };
            el.update_geometry();
            elements.push(el);
        }
        let mut boundary_vertex = vec![false; vertices.len()];
        for e in &edges {
            if e.is_boundary() {
                boundary_vertex[e.v[0]] = true;
                boundary_vertex[e.v[1]] = true;
            }
        }
        let name = doc.name.clone().unwrap_or_else(|| "mesh".to_string());
        Ok((
            Mesh {
                name,
                vertices,
                elements,
                edges,
                boundary_vertex,
                bbox: (lo, hi),
            },
            warnings,
        ))
    }

    pub fn to_file(&self) -> MeshFile {
        let elements = self
            .elements
            .iter()
            .map(|el| ElementFile {
                edges: el
                    .edges
                    .iter()
                    .enumerate()
                    .map(|(i, e)| EdgeFile {
                        v: [
                            el.vertex_ids[i],
                            el.vertex_ids[(i + 1) % el.vertex_ids.len()],
                        ],
                        bezier: e
                            .curve
                            .as_ref()
                            .map(|c| c.control_points.iter().map(|p| [p.x, p.y]).collect()),
                    })
                    .collect(),
            })
            .collect();
        MeshFile {
            version: MESH_VERSION.to_string(),
            name: Some(self.name.clone()),
            vertices: self.vertices.iter().map(|p| [p.x, p.y]).collect(),
            elements,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("mesh serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Mesh, GeometryError> {
        let doc: MeshFile =
            serde_json::from_str(text).map_err(|e| GeometryError::Parse(e.to_string()))?;
        let (mesh, warnings) = Mesh::from_file(&doc)?;
        for w in &warnings {
            log::warn!("{w}");
        }
        let report = validate_mesh(&mesh);
        if !report.is_ok() {
            return Err(GeometryError::Invalid(report));
        }
        Ok(mesh)
    }

    pub fn total_area(&self) -> f64 {
        self.elements.iter().map(|e| e.area).sum()
    }

    pub fn h_max(&self) -> f64 {
        self.elements.iter().map(|e| e.diameter).fold(0.0, f64::max)
    }
}

/// Reads, merges and validates a mesh document.
pub fn load_mesh(path: &Path) -> Result<Mesh, GeometryError> {
    let text = std::fs::read_to_string(path)?;
    let mut mesh = Mesh::from_json(&text)?;
    if mesh.name == "mesh" {
        if let Some(stem) = path.file_stem() {
            mesh.name = stem.to_string_lossy().into_owned();
        }
    }
    Ok(mesh)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationIssue {
    pub element: Option<usize>,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.issues.is_empty()
    }

    fn push(&mut self, element: Option<usize>, message: String) {
        self.issues.push(ValidationIssue { element, message });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in &self.issues {
            match i.element {
                Some(e) => writeln!(f, "  element {e}: {}", i.message)?,
                None => writeln!(f, "  {}", i.message)?,
            }
        }
        Ok(())
    }
}

/// Checks the element and mesh invariants; every violation is listed.
pub fn validate_mesh(mesh: &Mesh) -> ValidationReport {
    let mut report = ValidationReport::default();
    for (ei, el) in mesh.elements.iter().enumerate() {
        let n = el.edges.len();
        let min_edges = if el.is_curved() { 2 } else { 3 };
        if n < min_edges {
            report.push(Some(ei), format!("only {n} edges"));
            continue;
        }
        for i in 0..n {
            let next = (i + 1) % n;
            if el.edges[i].end != el.edges[next].start {
                report.push(
                    Some(ei),
                    format!("edge {i} does not connect to edge {next}"),
                );
            }
            if let Some(c) = &el.edges[i].curve {
                let scale = 1e-12 * (1.0 + el.diameter);
                if c.start().dist(el.edges[i].start) > scale
                    || c.end().dist(el.edges[i].end) > scale
                {
                    report.push(
                        Some(ei),
                        format!("curved edge {i} does not start and end at its vertices"),
                    );
                }
            }
            if el.vertex_ids[i] == el.vertex_ids[next] {
                report.push(Some(ei), format!("edge {i} is degenerate"));
            }
        }
        if !(el.area > 0.0) {
            report.push(
                Some(ei),
                format!("non-positive area {:e} (clockwise orientation?)", el.area),
            );
            continue;
        }
        if !el.is_curved() {
            let c = el.centroid;
            for (i, e) in el.edges.iter().enumerate() {
                if (e.start - c).cross(e.end - c) <= 0.0 {
                    report.push(
                        Some(ei),
                        format!("not star-shaped with respect to its centroid (edge {i})"),
                    );
                    break;
                }
            }
        }
    }
    for (id, e) in mesh.edges.iter().enumerate() {
        if e.elements.len() > 2 {
            report.push(
                None,
                format!(
                    "edge {id} {:?} is shared by {} elements",
                    e.v,
                    e.elements.len()
                ),
            );
            continue;
        }
        if e.elements.len() == 2 {
            let uses: Vec<(usize, usize)> = e
                .elements
                .iter()
                .map(|&el| {
                    (
                        el,
                        mesh.elements[el]
                            .edge_ids
                            .iter()
                            .position(|&x| x == id)
                            .unwrap(),
                    )
                })
                .collect();
            let (a, la) = uses[0];
            let (b, lb) = uses[1];
            let ea = &mesh.elements[a].edges[la];
            let eb = &mesh.elements[b].edges[lb];
            if mesh.elements[a].edge_reversed[la] == mesh.elements[b].edge_reversed[lb] {
                report.push(
                    Some(b),
                    format!("edge {id} traversed in the same direction as in element {a}"),
                );
            }
            let same = match (&ea.curve, &eb.curve) {
                (None, None) => true,
                (Some(ca), Some(cb)) => {
                    let rb = cb.reversed();
                    ca.control_points.len() == rb.control_points.len()
                        && ca
                            .control_points
                            .iter()
                            .zip(&rb.control_points)
                            .all(|(p, q)| p.dist(*q) <= 1e-12)
                }
                _ => false,
            };
            if !same {
                report.push(
                    Some(b),
                    format!("edge {id} geometry differs from element {a}"),
                );
            }
        }
    }
    report
}

pub const BUILTIN_MESHES: [&str; 4] = ["quad", "voronoi5", "octagon", "bezier4"];

/// Control points of the benchmark curve splitting the unit square.
pub fn benchmark_curve() -> BezierCurve {
    BezierCurve {
        control_points: vec![
            Point2::new(0.0, 0.5),
            Point2::new(0.25, 0.25),
            Point2::new(0.75, 0.75),
            Point2::new(1.0, 0.5),
        ],
    }
}

pub fn builtin_mesh(name: &str) -> Result<Mesh, GeometryError> {
    let doc = match name {
        "quad" => quad_file(),
        "voronoi5" => serde_json::from_str(include_str!("../meshes/voronoi5.json"))
            .map_err(|e| GeometryError::Parse(e.to_string()))?,
        "octagon" => octagon_file(),
        "bezier4" => bezier4_file(),
        other => return Err(GeometryError::UnknownMesh(other.to_string())),
    };
    let (mesh, _) = Mesh::from_file(&doc)?;
    Ok(mesh)
}

/// Resolves a built-in name or a path to a mesh file.
pub fn resolve_mesh(name_or_path: &str) -> Result<Mesh, GeometryError> {
    if BUILTIN_MESHES.contains(&name_or_path) {
        builtin_mesh(name_or_path)
    } else {
        load_mesh(Path::new(name_or_path))
    }
}

fn straight(a: usize, b: usize) -> EdgeFile {
    EdgeFile {
        v: [a, b],
        bezier: None,
    }
}

fn loop_of(ids: &[usize]) -> ElementFile {
    ElementFile {
        edges: (0..ids.len())
            .map(|i| straight(ids[i], ids[(i + 1) % ids.len()]))
            .collect(),
    }
}

fn quad_file() -> MeshFile {
    let mut vertices = Vec::new();
    for j in 0..3 {
        for i in 0..3 {
            vertices.push([0.5 * i as f64, 0.5 * j as f64]);
        }
    }
    let elements = [[0, 1, 4, 3], [1, 2, 5, 4], [3, 4, 7, 6], [4, 5, 8, 7]]
        .iter()
        .map(|q| loop_of(q))
        .collect();
    MeshFile {
        version: MESH_VERSION.into(),
        name: Some("quad".into()),
        vertices,
        elements,
    }
}

/// Central regular octagon (circumradius 0.35) plus eight concave quadrilaterals
/// obtained by joining octagon vertex j to the boundary point at angle 45°(j+1).
fn octagon_file() -> MeshFile {
    let mut vertices: Vec<[f64; 2]> = (0..8)
        .map(|j| {
            let a = std::f64::consts::FRAC_PI_4 * j as f64;
            [0.5 + 0.35 * a.cos(), 0.5 + 0.35 * a.sin()]
        })
        .collect();
    let targets = [
        [1.0, 0.5],
        [1.0, 1.0],
        [0.5, 1.0],
        [0.0, 1.0],
        [0.0, 0.5],
        [0.0, 0.0],
        [0.5, 0.0],
        [1.0, 0.0],
    ];
    vertices.extend_from_slice(&targets);
    let mut elements = vec![loop_of(&[0, 1, 2, 3, 4, 5, 6, 7])];
    for j in 0..8 {
        let t1 = 8 + (j + 1) % 8;
        let t2 = 8 + (j + 2) % 8;
        elements.push(loop_of(&[j, t1, t2, (j + 1) % 8]));
    }
    MeshFile {
        version: MESH_VERSION.into(),
        name: Some("octagon".into()),
        vertices,
        elements,
    }
}

fn bezier4_file() -> MeshFile {
    let (left, right) = benchmark_curve().split(0.5);
    let cp = |c: &BezierCurve| -> Vec<[f64; 2]> {
        c.control_points.iter().map(|p| [p.x, p.y]).collect()
    };
    let vertices = vec![
        [0.0, 0.0],
        [0.5, 0.0],
        [1.0, 0.0],
        [0.0, 0.5],
        [0.5, 0.5],
        [1.0, 0.5],
        [0.0, 1.0],
        [0.5, 1.0],
        [1.0, 1.0],
    ];
    let curved = |a: usize, b: usize, c: &BezierCurve| EdgeFile {
        v: [a, b],
        bezier: Some(cp(c)),
    };
    let elements = vec![
        ElementFile {
            edges: vec![
                straight(0, 1),
                straight(1, 4),
                curved(4, 3, &left.reversed()),
                straight(3, 0),
            ],
        },
        ElementFile {
            edges: vec![
                straight(1, 2),
                straight(2, 5),
                curved(5, 4, &right.reversed()),
                straight(4, 1),
            ],
        },
        ElementFile {
            edges: vec![
                curved(3, 4, &left),
                straight(4, 7),
                straight(7, 6),
                straight(6, 3),
            ],
        },
        ElementFile {
            edges: vec![
                curved(4, 5, &right),
                straight(5, 8),
                straight(8, 7),
                straight(7, 4),
            ],
        },
    ];
    MeshFile {
        version: MESH_VERSION.into(),
        name: Some("bezier4".into()),
        vertices,
        elements,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn benchmark_curve_points() {
        let c = benchmark_curve();
        assert_eq!(c.eval(0.0).unwrap(), Point2::new(0.0, 0.5));
        assert_eq!(c.eval(1.0).unwrap(), Point2::new(1.0, 0.5));
        let m = c.eval(0.5).unwrap();
        assert!((m.x - 0.5).abs() < 1e-15 && (m.y - 0.5).abs() < 1e-15);
        let d = c.derivative(0.0).unwrap();
        assert!((d.x - 0.75).abs() < 1e-15 && (d.y + 0.75).abs() < 1e-15);
        assert!(matches!(c.eval(1.5), Err(GeometryError::Domain(_))));
        assert!(c.derivative(-0.1).is_err());
    }

    #[test]
    fn straight_curve_derivative() {
        let c = BezierCurve::new(vec![Point2::new(0.0, 0.0), Point2::new(2.0, 0.0)]).unwrap();
        for t in [0.0, 0.3, 1.0] {
            assert_eq!(c.derivative(t).unwrap(), Point2::new(2.0, 0.0));
        }
    }

    #[test]
    fn split_halves_reproduce_curve() {
        let c = benchmark_curve();
        let (l, r) = c.split(0.5);
        for i in 0..=10 {
            let t = i as f64 / 10.0;
            assert!(l.point(t).dist(c.point(0.5 * t)) < 1e-15);
            assert!(r.point(t).dist(c.point(0.5 + 0.5 * t)) < 1e-15);
        }
    }

    #[test]
    fn simple_element_geometry() {
        let sq = Element::polygon(&[
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ]);
        assert!((sq.area - 1.0).abs() < 1e-15);
        assert!(sq.centroid.dist(Point2::new(0.5, 0.5)) < 1e-15);
        assert!((sq.diameter - 2f64.sqrt()).abs() < 1e-15);
        let tri = Element::polygon(&[
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ]);
        assert!((tri.area - 0.5).abs() < 1e-15);
        assert!(tri.centroid.dist(Point2::new(1.0 / 3.0, 1.0 / 3.0)) < 1e-15);
        assert!((tri.diameter - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn builtin_meshes_tile_the_square() {
        for (name, n_el) in [("quad", 4), ("voronoi5", 5), ("octagon", 9), ("bezier4", 4)] {
            let m = builtin_mesh(name).unwrap();
            assert_eq!(m.elements.len(), n_el, "{name}");
            assert!(
                (m.total_area() - 1.0).abs() < 1e-12,
                "{name}: {}",
                m.total_area()
            );
            let r = validate_mesh(&m);
            assert!(r.is_ok(), "{name}: {r}");
        }
        assert_eq!(builtin_mesh("quad").unwrap().vertices.len(), 9);
        let b = builtin_mesh("bezier4").unwrap();
        for el in &b.elements {
            assert_eq!(el.edges.iter().filter(|e| e.is_curved()).count(), 1);
        }
        assert!(matches!(
            builtin_mesh("hex"),
            Err(GeometryError::UnknownMesh(_))
        ));
    }

    #[test]
    fn boundary_flags() {
        let m = builtin_mesh("quad").unwrap();
        let interior: Vec<usize> = (0..9).filter(|&v| !m.boundary_vertex[v]).collect();
        assert_eq!(interior, vec![4]);
        assert_eq!(m.edges.iter().filter(|e| e.is_boundary()).count(), 8);
    }

    #[test]
    fn round_trip_is_exact() {
        for name in BUILTIN_MESHES {
            let m = builtin_mesh(name).unwrap();
            let back = Mesh::from_json(&m.to_json()).unwrap();
            assert_eq!(back.to_file(), m.to_file());
        }
    }

    #[test]
    fn clockwise_element_is_reported() {
        let mut doc = builtin_mesh("quad").unwrap().to_file();
        let e = &mut doc.elements[2];
        e.edges.reverse();
        for ed in &mut e.edges {
            ed.v.swap(0, 1);
        }
        let (m, _) = Mesh::from_file(&doc).unwrap();
        let r = validate_mesh(&m);
        assert!(
            r.issues
                .iter()
                .any(|i| i.element == Some(2) && i.message.contains("area")),
            "{r}"
        );
    }

    #[test]
    fn duplicate_vertices_are_merged() {
        let mut doc = builtin_mesh("quad").unwrap().to_file();
        doc.vertices.push([0.5, 0.5 + 1e-16]);
        let dup = doc.vertices.len() - 1;
        doc.elements[3].edges[0].v[0] = dup;
        doc.elements[3].edges[3].v[1] = dup;
        let (m, warnings) = Mesh::from_file(&doc).unwrap();
        assert_eq!(warnings.len(), 1);
        assert_eq!(m.vertices.len(), 9);
        assert!(validate_mesh(&m).is_ok());
    }
}
