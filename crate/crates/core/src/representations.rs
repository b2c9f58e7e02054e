//! Height functions, ice-rule spin configurations and arrow configurations of
//! the six-vertex model, the bijections among them, vertex types and weights.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{ParamError, RepresentationError};
use crate::lattice::{CellKind, Domain, FaceCoord, Parity, ParityClass, VertexCoord};
use crate::scalar::Scalar;

const UNDEF: i32 = i32::MIN;

/// Weight attached to each c-type vertex on the vertex boundary.
#[derive(Clone, Debug, PartialEq)]
pub enum Cb<S> {
    Finite(S),
    Infinite,
}

/// Vertex weights `a, b, c` and the boundary weight `c_b`, one per class of
/// boundary vertex (indexed by the parity of the top-left face).
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<S> {
    pub a: S,
    pub b: S,
    pub c: S,
    pub cb: [Cb<S>; 2],
}

impl<S: Scalar> ModelParams<S> {
    pub fn new(a: S, b: S, c: S) -> Result<Self, ParamError> {
        for (name, v) in [("a", &a), ("b", &b), ("c", &c)] {
            if !(v.to_f64() > 0.0) {
                return Err(ParamError::OutOfRange { name, value: v.to_f64(), why: "vertex weights must be positive" });
            }
        }
        let cb = [Cb::Finite(c.clone()), Cb::Finite(c.clone())];
        Ok(ModelParams { a, b, c, cb })
    }

    pub fn symmetric(c: S) -> Result<Self, ParamError> {
        Self::new(S::one(), S::one(), c)
    }

    pub fn with_cb(mut self, cb: Cb<S>) -> Self {
        self.cb = [cb.clone(), cb];
        self
    }

    pub fn with_cb_per_class(mut self, even: Cb<S>, odd: Cb<S>) -> Self {
        self.cb = [even, odd];
        self
    }

    pub fn delta(&self) -> S {
        (self.a.clone() * self.a.clone() + self.b.clone() * self.b.clone() - self.c.clone() * self.c.clone())
            / (S::from_i64(2) * self.a.clone() * self.b.clone())
    }

    pub fn weight_of(&self, t: VertexType) -> S {
        match t.kind() {
            VertexKind::A => self.a.clone(),
            VertexKind::B => self.b.clone(),
            VertexKind::C => self.c.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VertexType {
    A1,
    A2,
    B1,
    B2,
    C1,
    C2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VertexKind {
    A,
    B,
    C,
}

impl VertexType {
    pub fn kind(self) -> VertexKind {
        match self {
            VertexType::A1 | VertexType::A2 => VertexKind::A,
            VertexType::B1 | VertexType::B2 => VertexKind::B,
            VertexType::C1 | VertexType::C2 => VertexKind::C,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Type of a vertex from its surrounding heights in the order NW, NE, SE, SW.
/// `a` when the NW–SE diagonal differs by two, `b` when NE–SW does, `c` when
/// both diagonals agree.
pub fn vertex_type_of(h: [i32; 4]) -> VertexType {
    let [nw, ne, se, sw] = h;
    if nw == se && ne == sw {
        if ne > nw {
            VertexType::C1
        } else {
            VertexType::C2
        }
    } else if nw != se {
        if nw > se {
            VertexType::A1
        } else {
            VertexType::A2
        }
    } else if ne > sw {
        VertexType::B1
    } else {
        VertexType::B2
    }
}

pub fn is_c_type(h: [i32; 4]) -> bool {
    h[0] == h[2] && h[1] == h[3]
}

/// Values on the faces outside the domain that touch it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Boundary {
    /// `even` on even faces and `odd` on odd faces.
    Flat { even: i32, odd: i32 },
    Values(BTreeMap<FaceCoord, i32>),
}

impl Boundary {
    pub fn zero_one() -> Self {
        Boundary::Flat { even: 0, odd: 1 }
    }

    pub fn from_fn<F: Fn(FaceCoord) -> i32>(domain: &Domain, f: F) -> Self {
        Boundary::Values(domain.halo().iter().map(|u| (*u, f(*u))).collect())
    }

    pub fn value(&self, u: FaceCoord) -> Option<i32> {
        match self {
            Boundary::Flat { even, odd } => Some(match u.parity() {
                Parity::Even => *even,
                Parity::Odd => *odd,
            }),
            Boundary::Values(m) => m.get(&u).copied(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightMode {
    Plain,
    BoundaryCb,
}

/// Heights on the faces of a domain and on its halo.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HeightFunction {
    domain: Arc<Domain>,
    values: Vec<i32>,
}

impl HeightFunction {
    /// Builds `h` from boundary values on the halo and `interior` on the faces
    /// of the domain, then validates it.
    pub fn new<F: Fn(FaceCoord) -> i32>(
        domain: Arc<Domain>,
        boundary: &Boundary,
        interior: F,
    ) -> Result<Self, RepresentationError> {
        let grid = domain.grid();
        let mut values = vec![UNDEF; grid.len()];
        for u in domain.halo() {
            values[grid.index(*u).unwrap()] = boundary.value(*u).ok_or(RepresentationError::BoundaryMismatch)?;
        }
        for u in domain.faces() {
            values[grid.index(*u).unwrap()] = interior(*u);
        }
        let h = HeightFunction { domain, values };
        h.validate()?;
        Ok(h)
    }

    /// The flat function: `even` on even faces and `odd` on odd faces everywhere.
    pub fn flat(domain: Arc<Domain>, even: i32, odd: i32) -> Result<Self, RepresentationError> {
        let b = Boundary::Flat { even, odd };
        HeightFunction::new(domain, &b, |u| b.value(u).unwrap())
    }

    pub(crate) fn from_raw(domain: Arc<Domain>, values: Vec<i32>) -> Self {
        HeightFunction { domain, values }
    }

    pub fn validate(&self) -> Result<(), RepresentationError> {
        let grid = self.domain.grid();
        for idx in 0..grid.len() {
            let v = self.values[idx];
            if v == UNDEF {
                continue;
            }
            let u = grid.face(idx);
            if Parity::of(v as i64) != u.parity() {
                return Err(RepresentationError::WrongParity(u));
            }
            for n in [u.offset(1, 0), u.offset(0, 1)] {
                if let Some(w) = self.get(n) {
                    if (w - v).abs() != 1 {
                        return Err(RepresentationError::NotLipschitz(u, n));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn get(&self, u: FaceCoord) -> Option<i32> {
        let v = self.values[self.domain.grid().index(u)?];
        (v != UNDEF).then_some(v)
    }

    pub fn at(&self, u: FaceCoord) -> i32 {
        self.get(u).unwrap_or_else(|| panic!("height undefined at {u:?}"))
    }

    pub fn raw(&self) -> &[i32] {
        &self.values
    }

    pub(crate) fn raw_mut(&mut self) -> &mut [i32] {
        &mut self.values
    }

    /// Interior heights in the raster order of the domain's faces.
    pub fn interior_values(&self) -> Vec<i32> {
        self.domain.faces().iter().map(|u| self.at(*u)).collect()
    }

    pub fn set_interior(&mut self, u: FaceCoord, v: i32) {
        assert!(self.domain.contains(u), "{u:?} is not an interior face");
        let idx = self.domain.grid().index(u).unwrap();
        self.values[idx] = v;
    }

    pub fn shifted(&self, k: i32) -> HeightFunction {
        let values = self.values.iter().map(|v| if *v == UNDEF { UNDEF } else { v + k }).collect();
        HeightFunction { domain: self.domain.clone(), values }
    }

    pub fn max(&self, other: &HeightFunction) -> HeightFunction {
        self.zip(other, i32::max)
    }

    pub fn min(&self, other: &HeightFunction) -> HeightFunction {
        self.zip(other, i32::min)
    }

    fn zip(&self, other: &HeightFunction, f: fn(i32, i32) -> i32) -> HeightFunction {
        assert!(Arc::ptr_eq(&self.domain, &other.domain) || *self.domain == *other.domain);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| if *a == UNDEF { UNDEF } else { f(*a, *b) })
            .collect();
        HeightFunction { domain: self.domain.clone(), values }
    }

    /// Pointwise `≤` on all faces.
    pub fn le(&self, other: &HeightFunction) -> bool {
        self.values.iter().zip(&other.values).all(|(a, b)| a <= b)
    }

    pub fn heights_at(&self, z: VertexCoord) -> Option<[i32; 4]> {
        let f = z.faces();
        Some([self.get(f[0])?, self.get(f[1])?, self.get(f[2])?, self.get(f[3])?])
    }

    pub fn classify_vertex(&self, z: VertexCoord) -> Result<VertexType, RepresentationError> {
        self.heights_at(z).map(vertex_type_of).ok_or(RepresentationError::BoundaryVertex(z))
    }

    /// Counts of `(a1, a2, b1, b2, c1, c2)` over all vertices of the domain.
    pub fn type_counts(&self) -> [usize; 6] {
        let mut n = [0; 6];
        for z in self.domain.vertices() {
            n[vertex_type_of(self.heights_at(*z).expect("vertices of the domain have four faces")).index()] += 1;
        }
        n
    }

    /// Number of c-type vertices on the vertex boundary, per top-left class.
    pub fn boundary_c_counts(&self) -> [usize; 2] {
        let mut n = [0; 2];
        for (k, z) in self.domain.vertices().iter().enumerate() {
            if self.domain.is_boundary_vertex(k) && is_c_type(self.heights_at(*z).unwrap()) {
                n[z.top_left_parity().index()] += 1;
            }
        }
        n
    }

    pub fn to_snapshot(&self) -> String {
        let grid = self.domain.grid();
        let mut out = String::new();
        for j in (grid.jmin..=grid.jmax()).rev() {
            let row: Vec<String> = (grid.imin..=grid.imax())
                .map(|i| self.get(FaceCoord::new(i, j)).map_or("*".to_string(), |v| v.to_string()))
                .collect();
            writeln!(out, "{}", row.join(" ")).unwrap();
        }
        out
    }

    pub fn from_snapshot(domain: Arc<Domain>, text: &str) -> Result<Self, RepresentationError> {
        let grid = domain.grid().clone();
        let mut values = vec![UNDEF; grid.len()];
        let rows: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        if rows.len() != grid.height {
            return Err(RepresentationError::Parse { line: rows.len(), msg: format!("expected {} rows", grid.height) });
        }
        for (r, line) in rows.iter().enumerate() {
            let j = grid.jmax() - r as i32;
            let cells: Vec<&str> = line.split_whitespace().collect();
            if cells.len() != grid.width {
                return Err(RepresentationError::Parse { line: r + 1, msg: format!("expected {} cells", grid.width) });
            }
            for (c, cell) in cells.iter().enumerate() {
                let u = FaceCoord::new(grid.imin + c as i32, j);
                let idx = grid.index(u).unwrap();
                let defined = grid.kind(idx) != CellKind::Outside;
                match (*cell, defined) {
                    ("*", false) => {}
                    (s, true) => {
                        values[idx] = s
                            .parse()
                            .map_err(|_| RepresentationError::Parse { line: r + 1, msg: format!("bad height `{s}`") })?
                    }
                    (_, false) => {
                        return Err(RepresentationError::Parse { line: r + 1, msg: "value outside the domain".into() })
                    }
                }
            }
        }
        let h = HeightFunction { domain, values };
        h.validate()?;
        Ok(h)
    }
}

/// `a^{n_a} b^{n_b} c^{n_c}` over all vertices (plain), or the bulk product
/// over interior vertices times `c_b` per boundary c-type vertex (boundary_cb).
pub fn height_weight<S: Scalar>(
    h: &HeightFunction,
    p: &ModelParams<S>,
    mode: WeightMode,
) -> Result<S, RepresentationError> {
    h.validate()?;
    match mode {
        WeightMode::Plain => {
            let n = h.type_counts();
            Ok(p.a.powi((n[0] + n[1]) as i64) * p.b.powi((n[2] + n[3]) as i64) * p.c.powi((n[4] + n[5]) as i64))
        }
        WeightMode::BoundaryCb => {
            let (bulk, nb) = boundary_cb_parts(h, p)?;
            let mut w = bulk;
            for class in 0..2 {
                match &p.cb[class] {
                    Cb::Finite(cb) => w = w * cb.powi(nb[class] as i64),
                    Cb::Infinite if nb[class] > 0 => return Err(RepresentationError::InfiniteWeight),
                    Cb::Infinite => {}
                }
            }
            Ok(w)
        }
    }
}

/// The bulk weight over non-boundary vertices and the boundary c-type counts.
pub fn boundary_cb_parts<S: Scalar>(
    h: &HeightFunction,
    p: &ModelParams<S>,
) -> Result<(S, [usize; 2]), RepresentationError> {
    let d = h.domain();
    if d.parity_class() == ParityClass::Mixed {
        return Err(RepresentationError::MixedDomain);
    }
    let mut n = [0usize; 3];
    for (k, z) in d.vertices().iter().enumerate() {
        if d.is_boundary_vertex(k) {
            continue;
        }
        match vertex_type_of(h.heights_at(*z).unwrap()).kind() {
            VertexKind::A => n[0] += 1,
            VertexKind::B => n[1] += 1,
            VertexKind::C => n[2] += 1,
        }
    }
    let bulk = p.a.powi(n[0] as i64) * p.b.powi(n[1] as i64) * p.c.powi(n[2] as i64);
    Ok((bulk, h.boundary_c_counts()))
}

/// `+1` if `h ≡ 0, 1 (mod 4)`, else `−1`.
pub fn spin_of_height(h: i32) -> i8 {
    if h.rem_euclid(4) <= 1 {
        1
    } else {
        -1
    }
}

/// ±1 spins on the faces of a domain and its halo.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpinConfig {
    domain: Arc<Domain>,
    values: Vec<i8>,
}

impl SpinConfig {
    pub fn new<F: Fn(FaceCoord) -> i8>(domain: Arc<Domain>, f: F) -> Result<Self, RepresentationError> {
        let grid = domain.grid();
        let mut values = vec![0; grid.len()];
        for idx in 0..grid.len() {
            if grid.kind(idx) != CellKind::Outside {
                values[idx] = if f(grid.face(idx)) >= 0 { 1 } else { -1 };
            }
        }
        let s = SpinConfig { domain, values };
        s.check_ice_rule()?;
        Ok(s)
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn get(&self, u: FaceCoord) -> Option<i8> {
        let v = self.values[self.domain.grid().index(u)?];
        (v != 0).then_some(v)
    }

    pub fn at(&self, u: FaceCoord) -> i8 {
        self.get(u).unwrap_or_else(|| panic!("spin undefined at {u:?}"))
    }

    /// Around every vertex of the domain, some diagonal pair agrees.
    pub fn check_ice_rule(&self) -> Result<(), RepresentationError> {
        for z in self.domain.vertices() {
            let f = z.faces().map(|u| self.at(u));
            if f[0] != f[2] && f[1] != f[3] {
                return Err(RepresentationError::IceRule(*z));
            }
        }
        Ok(())
    }

    pub fn flip(&self) -> SpinConfig {
        SpinConfig { domain: self.domain.clone(), values: self.values.iter().map(|v| -v).collect() }
    }

    pub fn to_snapshot(&self) -> String {
        let grid = self.domain.grid();
        let mut out = String::new();
        for j in (grid.jmin..=grid.jmax()).rev() {
            let row: String = (grid.imin..=grid.imax())
                .map(|i| match self.get(FaceCoord::new(i, j)) {
                    Some(1) => '+',
                    Some(_) => '-',
                    None => '*',
                })
                .collect();
            writeln!(out, "{row}").unwrap();
        }
        out
    }
}

pub fn height_to_spin(h: &HeightFunction) -> SpinConfig {
    let values = h.raw().iter().map(|v| if *v == UNDEF { 0 } else { spin_of_height(*v) }).collect();
    SpinConfig { domain: h.domain().clone(), values }
}

/// Breadth-first propagation of heights over every defined face from `anchor`,
/// with `step(u, v, h(u))` giving `h(v)` for adjacent `u, v`.
fn propagate<F: Fn(FaceCoord, FaceCoord, i32) -> i32>(
    domain: &Arc<Domain>,
    anchor: FaceCoord,
    anchor_value: i32,
    step: F,
) -> Result<HeightFunction, RepresentationError> {
    let grid = domain.grid();
    let start = grid.index(anchor).filter(|i| grid.kind(*i) != CellKind::Outside);
    let Some(start) = start else { return Err(RepresentationError::Anchor(anchor)) };
    let mut values = vec![UNDEF; grid.len()];
    values[start] = anchor_value;
    let mut queue = VecDeque::from([anchor]);
    while let Some(u) = queue.pop_front() {
        let hu = values[grid.index(u).unwrap()];
        for v in u.neighbors() {
            let Some(iv) = grid.index(v) else { continue };
            if grid.kind(iv) == CellKind::Outside || values[iv] != UNDEF {
                continue;
            }
            values[iv] = step(u, v, hu);
            queue.push_back(v);
        }
    }
    let h = HeightFunction::from_raw(domain.clone(), values);
    h.validate()?;
    Ok(h)
}

/// The unique lift `h` of `σ` with `h(anchor) = anchor_value`.
pub fn spin_to_height(
    sigma: &SpinConfig,
    anchor: FaceCoord,
    anchor_value: i32,
) -> Result<HeightFunction, RepresentationError> {
    sigma.check_ice_rule()?;
    let s = sigma.get(anchor).ok_or(RepresentationError::Anchor(anchor))?;
    if Parity::of(anchor_value as i64) != anchor.parity() || spin_of_height(anchor_value) != s {
        return Err(RepresentationError::Anchor(anchor));
    }
    let h = propagate(sigma.domain(), anchor, anchor_value, |_, v, hu| {
        if spin_of_height(hu + 1) == sigma.at(v) {
            hu + 1
        } else {
            hu - 1
        }
    })?;
    // the lift is path-independent exactly when the ice rule holds
    debug_assert_eq!(height_to_spin(&h), *sigma);
    Ok(h)
}

/// The canonical anchor for lifting: the first face of the domain, with the
/// smallest non-negative height compatible with its spin.
pub fn canonical_lift(sigma: &SpinConfig) -> Result<HeightFunction, RepresentationError> {
    let u = sigma.domain().faces()[0];
    let v = match (u.parity(), sigma.at(u)) {
        (Parity::Even, 1) => 0,
        (Parity::Odd, 1) => 1,
        (Parity::Even, _) => 2,
        (Parity::Odd, _) => 3,
    };
    spin_to_height(sigma, u, v)
}

/// Weight of a spin configuration through any of its height lifts.
pub fn spin_weight<S: Scalar>(
    sigma: &SpinConfig,
    p: &ModelParams<S>,
    mode: WeightMode,
) -> Result<S, RepresentationError> {
    height_weight(&canonical_lift(sigma)?, p, mode)
}

/// An unordered pair of edge-adjacent faces, stored as (even face, odd face).
pub type EdgeKey = (FaceCoord, FaceCoord);

pub fn edge_key(u: FaceCoord, v: FaceCoord) -> EdgeKey {
    if u.parity() == Parity::Even {
        (u, v)
    } else {
        (v, u)
    }
}

/// Arrow per edge as `h(odd) − h(even) ∈ {±1}`; `+1` means the even face lies
/// to the left of the arrow.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArrowConfig {
    domain: Arc<Domain>,
    arrows: BTreeMap<EdgeKey, i8>,
}

impl ArrowConfig {
    pub fn new(domain: Arc<Domain>, arrows: BTreeMap<EdgeKey, i8>) -> Self {
        ArrowConfig { domain, arrows }
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn get(&self, e: EdgeKey) -> Option<i8> {
        self.arrows.get(&e).copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = (&EdgeKey, &i8)> {
        self.arrows.iter()
    }

    pub fn reversed(&self) -> ArrowConfig {
        ArrowConfig { domain: self.domain.clone(), arrows: self.arrows.iter().map(|(k, v)| (*k, -v)).collect() }
    }

    /// Two in, two out at every vertex of the domain.
    pub fn check_ice_rule(&self) -> Result<(), RepresentationError> {
        for z in self.domain.vertices() {
            let f = z.faces();
            let mut sum = 0i32;
            for k in 0..4 {
                let (u, v) = (f[k], f[(k + 1) % 4]);
                let a = self.get(edge_key(u, v)).ok_or(RepresentationError::BoundaryVertex(*z))? as i32;
                // difference h(v) − h(u) along the cyclic walk
                sum += if u.parity() == Parity::Even { a } else { -a };
            }
            if sum != 0 {
                return Err(RepresentationError::IceRule(*z));
            }
        }
        Ok(())
    }
}

pub fn height_to_arrows(h: &HeightFunction) -> ArrowConfig {
    let d = h.domain();
    let grid = d.grid();
    let mut arrows = BTreeMap::new();
    for idx in 0..grid.len() {
        if grid.kind(idx) == CellKind::Outside {
            continue;
        }
        let u = grid.face(idx);
        for v in [u.offset(1, 0), u.offset(0, 1)] {
            if let Some(hv) = h.get(v) {
                let (even, odd) = edge_key(u, v);
                let val = if even == u { hv - h.at(u) } else { h.at(u) - hv };
                arrows.insert((even, odd), val as i8);
            }
        }
    }
    ArrowConfig { domain: d.clone(), arrows }
}

pub fn arrows_to_height(
    arrows: &ArrowConfig,
    anchor: FaceCoord,
    anchor_value: i32,
) -> Result<HeightFunction, RepresentationError> {
    if Parity::of(anchor_value as i64) != anchor.parity() {
        return Err(RepresentationError::Anchor(anchor));
    }
    arrows.check_ice_rule()?;
    propagate(arrows.domain(), anchor, anchor_value, |u, v, hu| {
        let a = arrows.get(edge_key(u, v)).expect("arrow defined between defined faces") as i32;
        if u.parity() == Parity::Even {
            hu + a
        } else {
            hu - a
        }
    })
}

/// Event `A(e)`: the even face bordering `e` lies to the left of its arrow.
pub fn arrow_event_a(arrows: &ArrowConfig, e: EdgeKey) -> bool {
    arrows.get(e) == Some(1)
}
