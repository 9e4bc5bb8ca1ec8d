//! Combinatorial layer: abstract polyhedra as vertex/face incidence structures.
//!
//! An [`AbstractPolyhedron`] keeps only which vertex lies on which face. Edges
//! are not stored; they are recovered from consecutive entries of the face
//! cycles. The incidence pairs are enumerated face by face, in cycle order,
//! and this enumeration fixes the row order of the vertex-on-face Jacobian.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};

/// One `(vertex, face)` pair of the incidence relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Incidence {
    pub vertex: usize,
    pub face: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbstractPolyhedron {
    vertex_count: usize,
    faces: Vec<Vec<usize>>,
    incidence: Vec<Incidence>,
    edges: Vec<(usize, usize)>,
}

impl AbstractPolyhedron {
    /// Validates oriented face cycles and derives the incidence relation.
    ///
    /// Vertex ids are zero based and must cover `0..V` without gaps. Every
    /// directed edge `u -> v` of a cycle must be matched by exactly one
    /// `v -> u` in another cycle.
    pub fn from_faces(faces: Vec<Vec<usize>>) -> Result<Self> {
        for (f, cycle) in faces.iter().enumerate() {
            if cycle.len() < 3 {
                return Err(Error::DegenerateFace {
                    face: f,
                    reason: format!("cycle has {} vertices", cycle.len()),
                });
            }
            let distinct: BTreeSet<_> = cycle.iter().collect();
            if distinct.len() != cycle.len() {
                return Err(Error::DegenerateFace {
                    face: f,
                    reason: "cycle repeats a vertex".into(),
                });
            }
        }

        let used: BTreeSet<usize> = faces.iter().flatten().copied().collect();
        let vertex_count = used.iter().next_back().map_or(0, |&m| m + 1);
        if used.len() != vertex_count {
            let missing = (0..vertex_count).find(|v| !used.contains(v)).unwrap_or(0);
            return Err(Error::VertexDegree { vertex: missing, faces: 0 });
        }

        let mut directed: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for cycle in &faces {
            for k in 0..cycle.len() {
                let e = (cycle[k], cycle[(k + 1) % cycle.len()]);
                *directed.entry(e).or_default() += 1;
            }
        }
        let mut edges = Vec::new();
        for (&(u, v), &count) in &directed {
            let back = directed.get(&(v, u)).copied().unwrap_or(0);
            if count != 1 || back != 1 {
                return Err(Error::DanglingEdge { from: u, to: v });
            }
            if u < v {
                edges.push((u, v));
            }
        }

        let mut face_count_per_vertex = vec![0usize; vertex_count];
        for &v in faces.iter().flatten() {
            face_count_per_vertex[v] += 1;
        }
        if let Some((v, &n)) = face_count_per_vertex.iter().enumerate().find(|(_, &n)| n < 3) {
            return Err(Error::VertexDegree { vertex: v, faces: n });
        }

        let incidence: Vec<Incidence> = faces
            .iter()
            .enumerate()
            .flat_map(|(f, cycle)| cycle.iter().map(move |&v| Incidence { vertex: v, face: f }))
            .collect();

        let (v, f, e) = (vertex_count, faces.len(), edges.len());
        debug_assert_eq!(incidence.len(), 2 * e);
        if v + f != e + 2 {
            return Err(Error::EulerViolation { lhs: v + f, rhs: e + 2 });
        }

        Ok(Self { vertex_count, faces, incidence, edges })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn faces(&self) -> &[Vec<usize>] {
        &self.faces
    }

    pub fn face(&self, f: usize) -> &[usize] {
        &self.faces[f]
    }

    /// Incidence pairs ordered by (face id, position in cycle).
    pub fn incidence(&self) -> &[Incidence] {
        &self.incidence
    }

    /// Undirected edges `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn is_edge(&self, u: usize, v: usize) -> bool {
        let key = (u.min(v), u.max(v));
        self.edges.binary_search(&key).is_ok()
    }

    /// Faces containing vertex `v`, ascending.
    pub fn faces_of(&self, v: usize) -> Vec<usize> {
        (0..self.faces.len()).filter(|&f| self.faces[f].contains(&v)).collect()
    }

    pub fn share_face(&self, vertices: &[usize]) -> bool {
        self.faces.iter().any(|c| vertices.iter().all(|v| c.contains(v)))
    }

    /// Faces sharing an edge, as `(f, g)` with `f < g`, sorted.
    pub fn adjacent_faces(&self) -> Vec<(usize, usize)> {
        let mut pairs: Vec<(usize, usize)> = self
            .edges
            .iter()
            .map(|&(u, v)| {
                let fs: Vec<usize> = (0..self.faces.len())
                    .filter(|&f| self.faces[f].contains(&u) && self.faces[f].contains(&v))
                    .collect();
                (fs[0].min(fs[1]), fs[0].max(fs[1]))
            })
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        pairs
    }

    pub fn elimination_order(&self) -> Result<EliminationOrder> {
        let pairs: Vec<(usize, usize)> = self.incidence.iter().map(|i| (i.vertex, i.face)).collect();
        elimination_order(self.vertex_count, self.faces.len(), &pairs)
    }
}

/// A vertex or a face of an incidence structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Element {
    Vertex(usize),
    Face(usize),
}

impl Element {
    fn key(self) -> (usize, u8) {
        match self {
            Element::Vertex(i) => (i, 0),
            Element::Face(i) => (i, 1),
        }
    }
}

/// Ordering of vertices and faces in which every element is incident with at
/// most three earlier elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EliminationOrder(Vec<Element>);

impl EliminationOrder {
    pub fn elements(&self) -> &[Element] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Largest number of earlier elements any element of `order` is incident with.
pub fn max_earlier_incidences(order: &[Element], pairs: &[(usize, usize)]) -> usize {
    let linked: BTreeSet<(usize, usize)> = pairs.iter().copied().collect();
    let incident = |a: Element, b: Element| match (a, b) {
        (Element::Vertex(v), Element::Face(f)) | (Element::Face(f), Element::Vertex(v)) => {
            linked.contains(&(v, f))
        }
        _ => false,
    };
    (0..order.len())
        .map(|i| order[..i].iter().filter(|&&e| incident(order[i], e)).count())
        .max()
        .unwrap_or(0)
}

/// Orders the nodes of the Levi graph of an incidence structure.
///
/// Repeatedly removes a node of minimum remaining degree (ties: smaller id,
/// then vertices before faces) and returns the reversed removal order. A
/// planar bipartite graph always has a node of degree at most three, so
/// failure to find one means the input is not the incidence structure of a
/// convex polyhedron.
pub fn elimination_order(
    vertex_count: usize,
    face_count: usize,
    pairs: &[(usize, usize)],
) -> Result<EliminationOrder> {
    let mut nodes: Vec<Element> = (0..vertex_count)
        .map(Element::Vertex)
        .chain((0..face_count).map(Element::Face))
        .collect();
    let mut neighbours: BTreeMap<Element, BTreeSet<Element>> =
        nodes.iter().map(|&n| (n, BTreeSet::new())).collect();
    for &(v, f) in pairs {
        neighbours.entry(Element::Vertex(v)).or_default().insert(Element::Face(f));
        neighbours.entry(Element::Face(f)).or_default().insert(Element::Vertex(v));
    }

    let mut removed = Vec::with_capacity(nodes.len());
    while !nodes.is_empty() {
        let (pos, &node) = nodes
            .iter()
            .enumerate()
            .min_by_key(|(_, &n)| (neighbours[&n].len(), n.key()))
            .expect("nonempty");
        if neighbours[&node].len() > 3 {
            return Err(Error::NotReducible);
        }
        nodes.swap_remove(pos);
        let adjacent = neighbours.remove(&node).unwrap_or_default();
        for other in adjacent {
            if let Some(set) = neighbours.get_mut(&other) {
                set.remove(&node);
            }
        }
        removed.push(node);
    }
    removed.reverse();
    Ok(EliminationOrder(removed))
}
