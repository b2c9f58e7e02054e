//! Faces, vertices and domains of Z², the corner graphs built on them, and the
//! triangular T-connectivity between faces of one parity.
//!
//! Faces sit at integer points `(i, j)`. Vertices sit at half-integer points and
//! are stored doubled, so `VertexCoord { x2: 1, y2: -1 }` is the point `(0.5, -0.5)`.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::LatticeError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of(v: i64) -> Parity {
        if v.rem_euclid(2) == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn flip(self) -> Parity {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Parity::Even => 0,
            Parity::Odd => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FaceCoord {
    pub i: i32,
    pub j: i32,
}

impl FaceCoord {
    pub const fn new(i: i32, j: i32) -> Self {
        FaceCoord { i, j }
    }

    pub fn parity(self) -> Parity {
        Parity::of(self.i as i64 + self.j as i64)
    }

    pub fn offset(self, di: i32, dj: i32) -> Self {
        FaceCoord::new(self.i + di, self.j + dj)
    }

    /// East, north, west, south.
    pub fn neighbors(self) -> [FaceCoord; 4] {
        [self.offset(1, 0), self.offset(0, 1), self.offset(-1, 0), self.offset(0, -1)]
    }

    /// Corners in the order NW, NE, SE, SW.
    pub fn vertices(self) -> [VertexCoord; 4] {
        let (x, y) = (2 * self.i, 2 * self.j);
        [
            VertexCoord::new(x - 1, y + 1),
            VertexCoord::new(x + 1, y + 1),
            VertexCoord::new(x + 1, y - 1),
            VertexCoord::new(x - 1, y - 1),
        ]
    }

    fn raster_key(self) -> (i32, i32) {
        (-self.j, self.i)
    }
}

/// A vertex of Z² in doubled coordinates; both components are odd.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VertexCoord {
    pub x2: i32,
    pub y2: i32,
}

impl VertexCoord {
    pub const fn new(x2: i32, y2: i32) -> Self {
        VertexCoord { x2, y2 }
    }

    /// Surrounding faces in the order NW, NE, SE, SW.
    pub fn faces(self) -> [FaceCoord; 4] {
        let l = (self.x2 - 1) / 2;
        let r = (self.x2 + 1) / 2;
        let b = (self.y2 - 1) / 2;
        let t = (self.y2 + 1) / 2;
        [FaceCoord::new(l, t), FaceCoord::new(r, t), FaceCoord::new(r, b), FaceCoord::new(l, b)]
    }

    pub fn top_left_parity(self) -> Parity {
        self.faces()[0].parity()
    }

    fn raster_key(self) -> (i32, i32) {
        (-self.y2, self.x2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParityClass {
    Even,
    Odd,
    Mixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellKind {
    Outside,
    Halo,
    Inside,
}

/// Bounding box over the domain and its halo, used for flat storage.
#[derive(Clone, Debug)]
pub struct Grid {
    pub imin: i32,
    pub jmin: i32,
    pub width: usize,
    pub height: usize,
    kinds: Vec<CellKind>,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn index(&self, f: FaceCoord) -> Option<usize> {
        let di = f.i - self.imin;
        let dj = f.j - self.jmin;
        if di < 0 || dj < 0 || di as usize >= self.width || dj as usize >= self.height {
            return None;
        }
        Some(dj as usize * self.width + di as usize)
    }

    pub fn face(&self, idx: usize) -> FaceCoord {
        FaceCoord::new(self.imin + (idx % self.width) as i32, self.jmin + (idx / self.width) as i32)
    }

    pub fn kind(&self, idx: usize) -> CellKind {
        self.kinds[idx]
    }

    pub fn kind_of(&self, f: FaceCoord) -> CellKind {
        self.index(f).map_or(CellKind::Outside, |i| self.kinds[i])
    }

    pub fn imax(&self) -> i32 {
        self.imin + self.width as i32 - 1
    }

    pub fn jmax(&self) -> i32 {
        self.jmin + self.height as i32 - 1
    }
}

/// A simply connected set of faces bounded by a simple cycle.
#[derive(Clone, Debug)]
pub struct Domain {
    faces: Vec<FaceCoord>,
    face_index: HashMap<FaceCoord, usize>,
    boundary_cycle: Vec<VertexCoord>,
    parity_class: ParityClass,
    vertices: Vec<VertexCoord>,
    vertex_index: HashMap<VertexCoord, usize>,
    on_boundary: Vec<bool>,
    external: Vec<FaceCoord>,
    halo: Vec<FaceCoord>,
    grid: Grid,
}

impl std::hash::Hash for Domain {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.faces.hash(state);
    }
}

impl PartialEq for Domain {
    fn eq(&self, other: &Self) -> bool {
        self.faces == other.faces()
    }
}

impl Eq for Domain {}

impl Domain {
    pub fn from_faces<I: IntoIterator<Item = FaceCoord>>(faces: I) -> Result<Domain, LatticeError> {
        let set: BTreeSet<FaceCoord> = faces.into_iter().collect();
        if set.is_empty() {
            return Err(LatticeError::Empty);
        }
        let mut faces: Vec<FaceCoord> = set.iter().copied().collect();
        faces.sort_by_key(|f| f.raster_key());
        let face_index: HashMap<FaceCoord, usize> = faces.iter().enumerate().map(|(k, f)| (*f, k)).collect();

        // edge connectivity
        let mut seen = HashSet::new();
        let mut queue = VecDeque::from([faces[0]]);
        seen.insert(faces[0]);
        while let Some(f) = queue.pop_front() {
            for n in f.neighbors() {
                if face_index.contains_key(&n) && seen.insert(n) {
                    queue.push_back(n);
                }
            }
        }
        if seen.len() != faces.len() {
            return Err(LatticeError::Disconnected);
        }

        let imin = faces.iter().map(|f| f.i).min().unwrap() - 1;
        let imax = faces.iter().map(|f| f.i).max().unwrap() + 1;
        let jmin = faces.iter().map(|f| f.j).min().unwrap() - 1;
        let jmax = faces.iter().map(|f| f.j).max().unwrap() + 1;

        // holes: complement within the padded box must be connected to its rim
        let mut outside = HashSet::new();
        let mut queue = VecDeque::new();
        for i in imin..=imax {
            for j in [jmin, jmax] {
                let f = FaceCoord::new(i, j);
                if outside.insert(f) {
                    queue.push_back(f);
                }
            }
        }
        for j in jmin..=jmax {
            for i in [imin, imax] {
                let f = FaceCoord::new(i, j);
                if outside.insert(f) {
                    queue.push_back(f);
                }
            }
        }
        while let Some(f) = queue.pop_front() {
            for n in f.neighbors() {
                if n.i < imin || n.i > imax || n.j < jmin || n.j > jmax {
                    continue;
                }
                if !face_index.contains_key(&n) && outside.insert(n) {
                    queue.push_back(n);
                }
            }
        }
        let box_size = ((imax - imin + 1) * (jmax - jmin + 1)) as usize;
        if outside.len() + faces.len() != box_size {
            return Err(LatticeError::NotSimplyConnected);
        }

        let mut vset = BTreeSet::new();
        for f in &faces {
            for v in f.vertices() {
                vset.insert(v);
            }
        }
        let mut vertices: Vec<VertexCoord> = vset.into_iter().collect();
        vertices.sort_by_key(|v| v.raster_key());
        for v in &vertices {
            let inside = v.faces().map(|f| face_index.contains_key(&f));
            let count = inside.iter().filter(|b| **b).count();
            if count == 2 && inside[0] == inside[2] {
                return Err(LatticeError::PinchVertex(*v));
            }
        }
        let vertex_index: HashMap<VertexCoord, usize> = vertices.iter().enumerate().map(|(k, v)| (*v, k)).collect();
        let on_boundary: Vec<bool> = vertices
            .iter()
            .map(|v| v.faces().iter().filter(|f| face_index.contains_key(f)).count() == 1)
            .collect();

        // counterclockwise boundary trace, domain on the left
        let mut next: HashMap<VertexCoord, VertexCoord> = HashMap::new();
        for f in &faces {
            let [nw, ne, se, sw] = f.vertices();
            let [e, n, w, s] = f.neighbors();
            if !face_index.contains_key(&s) {
                next.insert(sw, se);
            }
            if !face_index.contains_key(&e) {
                next.insert(se, ne);
            }
            if !face_index.contains_key(&n) {
                next.insert(ne, nw);
            }
            if !face_index.contains_key(&w) {
                next.insert(nw, sw);
            }
        }
        let start = *next.keys().min_by_key(|v| (v.raster_key().0, v.raster_key().1)).unwrap();
        let mut boundary_cycle = vec![start];
        let mut cur = next[&start];
        while cur != start {
            boundary_cycle.push(cur);
            cur = next[&cur];
            if boundary_cycle.len() > next.len() {
                return Err(LatticeError::BadCycle);
            }
        }
        if boundary_cycle.len() != next.len() {
            return Err(LatticeError::BadCycle);
        }

        let mut ext = BTreeSet::new();
        for f in &faces {
            for n in f.neighbors() {
                if !face_index.contains_key(&n) {
                    ext.insert(n);
                }
            }
        }
        let mut external: Vec<FaceCoord> = ext.into_iter().collect();
        external.sort_by_key(|f| f.raster_key());
        let parities: HashSet<Parity> = external.iter().map(|f| f.parity()).collect();
        let parity_class = match (parities.contains(&Parity::Even), parities.contains(&Parity::Odd)) {
            (true, false) => ParityClass::Even,
            (false, true) => ParityClass::Odd,
            _ => ParityClass::Mixed,
        };

        let mut hset = BTreeSet::new();
        for v in &vertices {
            for f in v.faces() {
                if !face_index.contains_key(&f) {
                    hset.insert(f);
                }
            }
        }
        let mut halo: Vec<FaceCoord> = hset.into_iter().collect();
        halo.sort_by_key(|f| f.raster_key());

        let width = (imax - imin + 1) as usize;
        let height = (jmax - jmin + 1) as usize;
        let mut kinds = vec![CellKind::Outside; width * height];
        let mut grid = Grid { imin, jmin, width, height, kinds: Vec::new() };
        for f in &halo {
            kinds[grid.index(*f).unwrap()] = CellKind::Halo;
        }
        for f in &faces {
            kinds[grid.index(*f).unwrap()] = CellKind::Inside;
        }
        grid.kinds = kinds;

        Ok(Domain {
            faces,
            face_index,
            boundary_cycle,
            parity_class,
            vertices,
            vertex_index,
            on_boundary,
            external,
            halo,
            grid,
        })
    }

    /// Faces enclosed by a simple lattice cycle, by even–odd ray casting.
    pub fn from_boundary_cycle(cycle: &[VertexCoord]) -> Result<Domain, LatticeError> {
        if cycle.len() < 4 {
            return Err(LatticeError::BadCycle);
        }
        let distinct: HashSet<VertexCoord> = cycle.iter().copied().collect();
        if distinct.len() != cycle.len() {
            return Err(LatticeError::BadCycle);
        }
        for k in 0..cycle.len() {
            let a = cycle[k];
            let b = cycle[(k + 1) % cycle.len()];
            let step = (a.x2 - b.x2).abs() + (a.y2 - b.y2).abs();
            if step != 2 {
                return Err(LatticeError::BadCycle);
            }
        }
        let xmin = cycle.iter().map(|v| v.x2).min().unwrap();
        let xmax = cycle.iter().map(|v| v.x2).max().unwrap();
        let ymin = cycle.iter().map(|v| v.y2).min().unwrap();
        let ymax = cycle.iter().map(|v| v.y2).max().unwrap();
        let mut faces = Vec::new();
        for i in (xmin + 1) / 2..=(xmax - 1) / 2 {
            for j in (ymin + 1) / 2..=(ymax - 1) / 2 {
                // ray from (2i, 2j) toward +x crosses vertical cycle edges
                let (px, py) = (2 * i, 2 * j);
                let mut crossings = 0;
                for k in 0..cycle.len() {
                    let a = cycle[k];
                    let b = cycle[(k + 1) % cycle.len()];
                    if a.x2 == b.x2 && a.x2 > px {
                        let (lo, hi) = (a.y2.min(b.y2), a.y2.max(b.y2));
                        if lo < py && py < hi {
                            crossings += 1;
                        }
                    }
                }
                if crossings % 2 == 1 {
                    faces.push(FaceCoord::new(i, j));
                }
            }
        }
        let d = Domain::from_faces(faces)?;
        let mine: HashSet<VertexCoord> = d.boundary_cycle.iter().copied().collect();
        if mine != distinct {
            return Err(LatticeError::BadCycle);
        }
        Ok(d)
    }

    pub fn faces(&self) -> &[FaceCoord] {
        &self.faces
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn contains(&self, f: FaceCoord) -> bool {
        self.face_index.contains_key(&f)
    }

    pub fn face_index(&self, f: FaceCoord) -> Option<usize> {
        self.face_index.get(&f).copied()
    }

    pub fn boundary_cycle(&self) -> &[VertexCoord] {
        &self.boundary_cycle
    }

    pub fn parity_class(&self) -> ParityClass {
        self.parity_class
    }

    /// All vertices of the domain in raster order; these index the corner-graph edges.
    pub fn vertices(&self) -> &[VertexCoord] {
        &self.vertices
    }

    pub fn vertex_index(&self, v: VertexCoord) -> Option<usize> {
        self.vertex_index.get(&v).copied()
    }

    /// Whether vertex `z` (by index) belongs to exactly one face of the domain.
    pub fn is_boundary_vertex(&self, z: usize) -> bool {
        self.on_boundary[z]
    }

    pub fn boundary_vertex_set(&self) -> Vec<VertexCoord> {
        self.vertices.iter().zip(&self.on_boundary).filter(|(_, b)| **b).map(|(v, _)| *v).collect()
    }

    pub fn external_boundary(&self) -> &[FaceCoord] {
        &self.external
    }

    /// Faces outside the domain that touch one of its vertices.
    pub fn halo(&self) -> &[FaceCoord] {
        &self.halo
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn translate(&self, di: i32, dj: i32) -> Domain {
        Domain::from_faces(self.faces.iter().map(|f| f.offset(di, dj))).expect("translation preserves validity")
    }

    pub fn to_snapshot(&self) -> String {
        let mut out = String::new();
        writeln!(out, "D {}", self.faces.len()).unwrap();
        for f in &self.faces {
            writeln!(out, "F {} {}", f.i, f.j).unwrap();
        }
        for v in &self.boundary_cycle {
            writeln!(out, "B {} {}", v.x2, v.y2).unwrap();
        }
        out
    }

    pub fn from_snapshot(text: &str) -> Result<Domain, LatticeError> {
        let mut expected = None;
        let mut faces = Vec::new();
        let mut cycle = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let bad = |msg: &str| LatticeError::Parse { line: k + 1, msg: msg.to_string() };
            let num = |s: &str| s.parse::<i32>().map_err(|_| bad("expected an integer"));
            match parts.as_slice() {
                ["D", n] => expected = Some(n.parse::<usize>().map_err(|_| bad("expected a count"))?),
                ["F", i, j] => faces.push(FaceCoord::new(num(i)?, num(j)?)),
                ["B", x, y] => cycle.push(VertexCoord::new(num(x)?, num(y)?)),
                _ => return Err(bad("unrecognised record")),
            }
        }
        let n = expected.ok_or(LatticeError::Parse { line: 1, msg: "missing D header".into() })?;
        if n != faces.len() {
            return Err(LatticeError::Parse { line: 1, msg: format!("header says {} faces, found {}", n, faces.len()) });
        }
        let d = Domain::from_faces(faces)?;
        if !cycle.is_empty() && cycle != d.boundary_cycle {
            return Err(LatticeError::BadCycle);
        }
        Ok(d)
    }
}

/// Λ_N translated to `center`: faces with `|i ± j| <= N - 1` relative to the center.
pub fn build_diamond(n: u32, center: FaceCoord) -> Domain {
    assert!(n >= 1, "diamond size must be positive");
    let r = n as i32 - 1;
    let mut faces = Vec::new();
    for di in -r..=r {
        for dj in -r..=r {
            if (di + dj).abs() <= r && (di - dj).abs() <= r {
                faces.push(center.offset(di, dj));
            }
        }
    }
    Domain::from_faces(faces).expect("diamonds are valid domains")
}

/// Axis-aligned rectangle of faces `[i0, i1] × [j0, j1]`.
pub fn build_rectangle(i0: i32, i1: i32, j0: i32, j1: i32) -> Domain {
    let mut faces = Vec::new();
    for i in i0..=i1 {
        for j in j0..=j1 {
            faces.push(FaceCoord::new(i, j));
        }
    }
    Domain::from_faces(faces).expect("rectangles are valid domains")
}

/// A plain multigraph with designated boundary vertices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    pub num_vertices: usize,
    pub edges: Vec<(usize, usize)>,
    pub boundary: Vec<bool>,
    /// Parity of the top-left face at the vertex owning each edge; selects the
    /// anisotropic edge weight. `Even` throughout for abstract graphs.
    pub edge_class: Vec<Parity>,
}

impl Graph {
    pub fn new(num_vertices: usize, edges: Vec<(usize, usize)>, boundary: Vec<bool>) -> Graph {
        assert_eq!(boundary.len(), num_vertices);
        assert!(edges.iter().all(|&(u, v)| u < num_vertices && v < num_vertices));
        let edge_class = vec![Parity::Even; edges.len()];
        Graph { num_vertices, edges, boundary, edge_class }
    }

    pub fn with_classes(mut self, classes: Vec<Parity>) -> Graph {
        assert_eq!(classes.len(), self.edges.len());
        self.edge_class = classes;
        self
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Incidence lists: for every vertex, `(edge, other endpoint)` pairs.
    pub fn incidence(&self) -> Vec<Vec<(usize, usize)>> {
        let mut inc = vec![Vec::new(); self.num_vertices];
        for (e, &(u, v)) in self.edges.iter().enumerate() {
            inc[u].push((e, v));
            if u != v {
                inc[v].push((e, u));
            }
        }
        inc
    }

    pub fn is_connected(&self) -> bool {
        if self.num_vertices == 0 {
            return true;
        }
        let inc = self.incidence();
        let mut seen = vec![false; self.num_vertices];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(x) = stack.pop() {
            for &(_, y) in &inc[x] {
                if !seen[y] {
                    seen[y] = true;
                    count += 1;
                    stack.push(y);
                }
            }
        }
        count == self.num_vertices
    }

    /// Merge all boundary vertices into a single boundary vertex placed last.
    pub fn wired(&self) -> (Graph, Vec<usize>) {
        let mut map = vec![usize::MAX; self.num_vertices];
        let mut n = 0;
        for v in 0..self.num_vertices {
            if !self.boundary[v] {
                map[v] = n;
                n += 1;
            }
        }
        let has_boundary = self.boundary.iter().any(|b| *b);
        if has_boundary {
            for v in 0..self.num_vertices {
                if self.boundary[v] {
                    map[v] = n;
                }
            }
            n += 1;
        }
        let mut boundary = vec![false; n];
        if has_boundary {
            boundary[n - 1] = true;
        }
        let edges = self.edges.iter().map(|&(u, v)| (map[u], map[v])).collect();
        (Graph { num_vertices: n, edges, boundary, edge_class: self.edge_class.clone() }, map)
    }
}

/// What a corner-graph vertex stands for.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CornerNode {
    /// A face of the domain.
    Face(FaceCoord),
    /// A class of identified corners `(u, z)` with `u` outside the domain.
    Corner(Vec<(FaceCoord, VertexCoord)>),
}

/// The corner graph of one parity: faces of the domain of that parity, plus
/// classes of exterior corners of that parity. Edge `z` joins the two faces (or
/// corners) of that parity meeting at vertex `z` of the domain.
#[derive(Clone, Debug)]
pub struct CornerGraph {
    parity: Parity,
    nodes: Vec<CornerNode>,
    graph: Graph,
    node_at: HashMap<(FaceCoord, VertexCoord), usize>,
}

impl CornerGraph {
    pub fn build(domain: &Domain, parity: Parity) -> CornerGraph {
        let mut nodes = Vec::new();
        let mut node_at = HashMap::new();
        let mut face_node = HashMap::new();
        for f in domain.faces() {
            if f.parity() == parity {
                face_node.insert(*f, nodes.len());
                nodes.push(CornerNode::Face(*f));
            }
        }
        // exterior corners of this parity, identified along boundary edges
        let mut corners: Vec<(FaceCoord, VertexCoord)> = Vec::new();
        let mut corner_id: HashMap<(FaceCoord, VertexCoord), usize> = HashMap::new();
        for z in domain.vertices() {
            for u in z.faces() {
                if u.parity() == parity && !domain.contains(u) {
                    corner_id.insert((u, *z), corners.len());
                    corners.push((u, *z));
                }
            }
        }
        let mut uf = crate::random_cluster::UnionFind::new(corners.len());
        for (k, &(u, z)) in corners.iter().enumerate() {
            for (dx, dy) in [(2, 0), (-2, 0), (0, 2), (0, -2)] {
                let z2 = VertexCoord::new(z.x2 + dx, z.y2 + dy);
                if let Some(&k2) = corner_id.get(&(u, z2)) {
                    // zz2 is an edge of u; it is an edge of the domain iff the
                    // face across it from u is in the domain
                    let across = edge_other_face(u, z, z2);
                    if domain.contains(across) {
                        uf.union(k, k2);
                    }
                }
            }
        }
        let mut class_node: HashMap<usize, usize> = HashMap::new();
        for (k, key) in corners.iter().enumerate() {
            let root = uf.find(k);
            let node = *class_node.entry(root).or_insert_with(|| {
                nodes.push(CornerNode::Corner(Vec::new()));
                nodes.len() - 1
            });
            if let CornerNode::Corner(list) = &mut nodes[node] {
                list.push(*key);
            }
            node_at.insert(*key, node);
        }
        for (f, n) in &face_node {
            for z in f.vertices() {
                node_at.insert((*f, z), *n);
            }
        }
        let mut edges = Vec::with_capacity(domain.vertices().len());
        for z in domain.vertices() {
            let ends: Vec<usize> = z.faces().iter().filter(|u| u.parity() == parity).map(|u| node_at[&(*u, *z)]).collect();
            edges.push((ends[0], ends[1]));
        }
        let boundary = nodes.iter().map(|n| matches!(n, CornerNode::Corner(_))).collect();
        let classes = domain.vertices().iter().map(|z| z.top_left_parity()).collect();
        let graph = Graph::new(nodes.len(), edges, boundary).with_classes(classes);
        CornerGraph { parity, nodes, graph, node_at }
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn nodes(&self) -> &[CornerNode] {
        &self.nodes
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn num_vertices(&self) -> usize {
        self.graph.num_vertices
    }

    pub fn num_edges(&self) -> usize {
        self.graph.num_edges()
    }

    /// Endpoints of `e_z`, keyed by the vertex index of the domain.
    pub fn edge(&self, z: usize) -> (usize, usize) {
        self.graph.edges[z]
    }

    /// Node standing for face `u` at vertex `z` (its own node if `u` is in the domain).
    pub fn node_at(&self, u: FaceCoord, z: VertexCoord) -> Option<usize> {
        self.node_at.get(&(u, z)).copied()
    }

    pub fn face_node(&self, u: FaceCoord) -> Option<usize> {
        self.nodes.iter().position(|n| *n == CornerNode::Face(u))
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.graph.boundary[v]
    }

    /// A face representing node `v`, used to read boundary values.
    pub fn representative(&self, v: usize) -> FaceCoord {
        match &self.nodes[v] {
            CornerNode::Face(f) => *f,
            CornerNode::Corner(list) => list[0].0,
        }
    }

    /// Number of bounded faces of the planar embedding (Euler, connected case).
    pub fn bounded_faces(&self) -> Option<usize> {
        if !self.graph.is_connected() {
            return None;
        }
        Some(self.graph.num_edges() + 1 - self.graph.num_vertices)
    }
}

fn edge_other_face(u: FaceCoord, z: VertexCoord, z2: VertexCoord) -> FaceCoord {
    // the edge zz2 separates u from one of its four neighbours
    let mx = (z.x2 + z2.x2) / 2;
    let my = (z.y2 + z2.y2) / 2;
    // midpoint in doubled coordinates; the face across is the reflection of u
    FaceCoord::new(mx - u.i, my - u.j)
}

/// The pair of corner graphs of a domain: D• on even faces and D∘ on odd faces.
/// Edge `z` of one is dual to edge `z` of the other.
pub fn build_corner_graphs(domain: &Domain) -> (CornerGraph, CornerGraph) {
    (CornerGraph::build(domain, Parity::Even), CornerGraph::build(domain, Parity::Odd))
}

/// Index of the edge dual to `e`; the pairing is keyed by the same domain vertex.
pub fn dual_edge(e: usize) -> usize {
    e
}

/// Triangular-lattice neighbours of a face among faces of its parity.
pub fn t_neighbors(u: FaceCoord) -> [FaceCoord; 6] {
    [
        u.offset(2, 0),
        u.offset(1, 1),
        u.offset(-1, 1),
        u.offset(-2, 0),
        u.offset(-1, -1),
        u.offset(1, -1),
    ]
}

pub fn t_adjacent(u: FaceCoord, v: FaceCoord) -> bool {
    t_neighbors(u).contains(&v)
}

/// A closed walk of T-adjacent faces of one parity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TCircuit {
    pub faces: Vec<FaceCoord>,
}

impl TCircuit {
    /// Winding number of the straight-segment embedding around `p`; zero when
    /// `p` lies on the circuit.
    pub fn winding(&self, p: FaceCoord) -> i32 {
        let n = self.faces.len();
        if n < 3 {
            return 0;
        }
        let (px, py) = (p.i as i64, p.j as i64);
        let mut wn = 0;
        for k in 0..n {
            let a = self.faces[k];
            let b = self.faces[(k + 1) % n];
            let (ax, ay, bx, by) = (a.i as i64, a.j as i64, b.i as i64, b.j as i64);
            let cross = (bx - ax) * (py - ay) - (px - ax) * (by - ay);
            let on_seg = cross == 0 && px >= ax.min(bx) && px <= ax.max(bx) && py >= ay.min(by) && py <= ay.max(by);
            if on_seg {
                return 0;
            }
            if ay <= py {
                if by > py && cross > 0 {
                    wn += 1;
                }
            } else if by <= py && cross < 0 {
                wn -= 1;
            }
        }
        wn
    }

    pub fn surrounds(&self, p: FaceCoord) -> bool {
        self.winding(p) != 0
    }

    pub fn is_valid(&self) -> bool {
        let n = self.faces.len();
        if n < 3 {
            return false;
        }
        let parity = self.faces[0].parity();
        let distinct: HashSet<FaceCoord> = self.faces.iter().copied().collect();
        distinct.len() == n
            && self.faces.iter().all(|f| f.parity() == parity)
            && (0..n).all(|k| t_adjacent(self.faces[k], self.faces[(k + 1) % n]))
    }
}

/// Outermost T-circuit of `parity` faces inside `domain`, all satisfying `level`,
/// that surrounds `target`.
pub fn exteriormost_t_circuit<F: Fn(FaceCoord) -> bool>(
    level: F,
    domain: &Domain,
    target: FaceCoord,
    parity: Parity,
) -> Option<TCircuit> {
    let good: HashSet<FaceCoord> = domain.faces().iter().copied().filter(|f| f.parity() == parity && level(*f)).collect();
    if good.is_empty() {
        return None;
    }
    let imin = domain.faces().iter().map(|f| f.i).min().unwrap() - 2;
    let imax = domain.faces().iter().map(|f| f.i).max().unwrap() + 2;
    let jmin = domain.faces().iter().map(|f| f.j).min().unwrap() - 2;
    let jmax = domain.faces().iter().map(|f| f.j).max().unwrap() + 2;
    let in_box = |f: FaceCoord| f.i >= imin && f.i <= imax && f.j >= jmin && f.j <= jmax;

    // flood the complement of `good` from the rim
    let mut ext: HashSet<FaceCoord> = HashSet::new();
    let mut queue = VecDeque::new();
    for i in imin..=imax {
        for j in jmin..=jmax {
            let f = FaceCoord::new(i, j);
            if f.parity() == parity && (i <= imin + 1 || i >= imax - 1 || j == jmin || j == jmax) && ext.insert(f) {
                queue.push_back(f);
            }
        }
    }
    while let Some(f) = queue.pop_front() {
        for n in t_neighbors(f) {
            if in_box(n) && !good.contains(&n) && ext.insert(n) {
                queue.push_back(n);
            }
        }
    }

    // components of what remains
    let mut seen: HashSet<FaceCoord> = HashSet::new();
    let mut candidates = Vec::new();
    let mut rest: Vec<FaceCoord> = good.iter().copied().filter(|f| !ext.contains(f)).collect();
    rest.sort_by_key(|f| (f.j, f.i));
    for start in rest {
        if seen.contains(&start) {
            continue;
        }
        let mut comp = HashSet::new();
        let mut q = VecDeque::from([start]);
        seen.insert(start);
        while let Some(f) = q.pop_front() {
            comp.insert(f);
            for n in t_neighbors(f) {
                if in_box(n) && !ext.contains(&n) && seen.insert(n) {
                    q.push_back(n);
                }
            }
        }
        candidates.push(comp);
    }
    for comp in candidates {
        let walk = trace_outer_boundary(&comp);
        for circuit in split_walk(walk) {
            let c = TCircuit { faces: circuit };
            if c.is_valid() && c.surrounds(target) {
                return Some(c);
            }
        }
    }
    None
}

fn trace_outer_boundary(blob: &HashSet<FaceCoord>) -> Vec<FaceCoord> {
    let start = *blob.iter().min_by_key(|f| (f.j, f.i)).unwrap();
    let dirs = [(2, 0), (1, 1), (-1, 1), (-2, 0), (-1, -1), (1, -1)];
    let mut walk = vec![start];
    let mut cur = start;
    let mut back = 3usize;
    let mut first_move: Option<usize> = None;
    loop {
        let mut moved = None;
        for step in 1..=6 {
            let k = (back + step) % 6;
            let n = cur.offset(dirs[k].0, dirs[k].1);
            if blob.contains(&n) {
                moved = Some(k);
                break;
            }
        }
        let Some(k) = moved else { return walk };
        if cur == start {
            match first_move {
                None => first_move = Some(k),
                Some(k0) if k0 == k => break,
                _ => {}
            }
        }
        cur = cur.offset(dirs[k].0, dirs[k].1);
        back = (k + 4) % 6;
        walk.push(cur);
        if walk.len() > 6 * blob.len() + 6 {
            break;
        }
    }
    // the walk ends with a repeat of `start`
    if walk.len() > 1 && walk.last() == Some(&start) {
        walk.pop();
    }
    walk
}

/// Split a closed walk into simple closed sub-walks at repeated faces.
fn split_walk(walk: Vec<FaceCoord>) -> Vec<Vec<FaceCoord>> {
    let mut out = Vec::new();
    let mut stack: Vec<FaceCoord> = Vec::new();
    let mut pos: HashMap<FaceCoord, usize> = HashMap::new();
    for f in walk {
        if let Some(&p) = pos.get(&f) {
            let loop_faces: Vec<FaceCoord> = stack.drain(p + 1..).collect();
            for g in &loop_faces {
                pos.remove(g);
            }
            let mut lp = vec![f];
            lp.extend(loop_faces);
            if lp.len() >= 3 {
                out.push(lp);
            }
        } else {
            pos.insert(f, stack.len());
            stack.push(f);
        }
    }
    if stack.len() >= 3 {
        out.push(stack);
    }
    // larger loops first so the outermost candidate is tried first
    out.sort_by_key(|l| std::cmp::Reverse(l.len()));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda1_and_lambda2_basics() {
        let d1 = build_diamond(1, FaceCoord::new(0, 0));
        assert_eq!(d1.faces(), &[FaceCoord::new(0, 0)]);
        assert_eq!(d1.boundary_vertex_set().len(), 4);
        assert_eq!(d1.parity_class(), ParityClass::Odd);
        let d2 = build_diamond(2, FaceCoord::new(0, 0));
        assert_eq!(d2.num_faces(), 5);
        assert_eq!(d2.vertices().len(), 12);
        assert_eq!(d2.boundary_vertex_set().len(), 8);
        assert_eq!(d2.external_boundary().len(), 8);
        assert_eq!(d2.parity_class(), ParityClass::Even);
        assert_eq!(d2.translate(1, 0).parity_class(), ParityClass::Odd);
    }

    #[test]
    fn corner_graphs_of_lambda2() {
        let d2 = build_diamond(2, FaceCoord::new(0, 0));
        let (pe, po) = build_corner_graphs(&d2);
        assert_eq!(pe.num_vertices(), 9);
        assert_eq!(pe.num_edges(), 12);
        assert_eq!(pe.bounded_faces(), Some(4));
        let (wired, _) = po.graph().wired();
        assert_eq!(wired.num_vertices, 5);
    }

    #[test]
    fn rejects_holes_and_pinches() {
        let ring: Vec<FaceCoord> =
            (-1..=1).flat_map(|i| (-1..=1).map(move |j| FaceCoord::new(i, j))).filter(|f| *f != FaceCoord::new(0, 0)).collect();
        assert_eq!(Domain::from_faces(ring).unwrap_err(), LatticeError::NotSimplyConnected);
        let pinch = vec![FaceCoord::new(0, 0), FaceCoord::new(1, 1), FaceCoord::new(1, 0), FaceCoord::new(-1, 1), FaceCoord::new(-1, 0)];
        // (0,0)-(1,0)-(1,1) and (0,0)-(-1,0)-(-1,1): connected, and (0,1) missing makes no pinch
        assert!(Domain::from_faces(pinch).is_ok());
        let diag = vec![FaceCoord::new(0, 0), FaceCoord::new(1, 0), FaceCoord::new(1, 1), FaceCoord::new(2, 1), FaceCoord::new(0, 1)];
        assert!(Domain::from_faces(diag).is_ok());
    }
}
