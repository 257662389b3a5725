//! Conforming simplicial meshes in one and two dimensions.
//!
//! Vertices and simplices are stored in flat arrays. Every mesh carries a
//! unique id and, when it was produced by refinement or extraction, a map from
//! its simplices to the simplices of each ancestor mesh. That lineage lets
//! finite element functions defined on a coarse mesh be evaluated exactly on a
//! finer one without point location.
//!
//! Two notions of patch are kept apart: the vertex patch `ω_j` (simplices
//! containing vertex `j`, see [`SimplicialMesh::vertex_patch`]) and the node
//! support `ω_i` of a Lagrange node (simplices containing node `i`, see
//! [`LagrangeSpace::node_support`]). They agree for vertex nodes only.

mod norms;
mod space;

pub use norms::*;
pub use space::*;

use std::collections::{BTreeSet, HashMap};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::polyref::factorial;
use crate::{Error, Real, Result};

/// Slack of the barycentric point-location test.
pub const LOCATE_SLACK: f64 = 1e-12;

static NEXT_MESH_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_MESH_ID.fetch_add(1, Ordering::Relaxed)
}

/// On-disk mesh layout: `{"d": .., "vertices": [[..]], "simplices": [[..]]}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MeshFile {
    pub d: usize,
    pub vertices: Vec<Vec<f64>>,
    pub simplices: Vec<Vec<usize>>,
}

#[derive(Clone, Debug)]
struct Ancestor {
    id: u64,
    /// ancestor simplex containing each simplex of this mesh
    map: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct SimplicialMesh<T> {
    id: u64,
    d: usize,
    coords: Vec<T>,
    simplices: Vec<usize>,
    measures: Vec<T>,
    diameters: Vec<T>,
    /// `d×d` inverse of the affine map's Jacobian per simplex, row major
    inv_jac: Vec<T>,
    boundary_facets: Vec<Vec<usize>>,
    boundary_facet_set: BTreeSet<Vec<usize>>,
    boundary_vertex: Vec<bool>,
    vertex_patches: Vec<Vec<usize>>,
    orientation_fixed: bool,
    ancestors: Vec<Ancestor>,
}

impl<T: Real> SimplicialMesh<T> {
    /// Validates the input and computes all derived data.
    ///
    /// Negatively oriented simplices are reordered and reported through
    /// [`SimplicialMesh::orientation_fixed`].
    pub fn new(d: usize, vertices: Vec<Vec<T>>, simplices: Vec<Vec<usize>>) -> Result<Self> {
        if !(1..=2).contains(&d) {
            return Err(Error::Unsupported(format!("meshes in {d} dimensions")));
        }
        if simplices.is_empty() {
            return Err(Error::InvalidMesh("no simplices".into()));
        }
        for (i, v) in vertices.iter().enumerate() {
            if v.len() != d {
                return Err(Error::InvalidMesh(format!(
                    "vertex {i} has {} coordinates, expected {d}",
                    v.len()
                )));
            }
        }
        let nv = vertices.len();
        let mut flat = Vec::with_capacity(simplices.len() * (d + 1));
        for (t, s) in simplices.iter().enumerate() {
            if s.len() != d + 1 {
                return Err(Error::InvalidMesh(format!(
                    "simplex {t} has {} vertices, expected {}",
                    s.len(),
                    d + 1
                )));
            }
            if let Some(&bad) = s.iter().find(|&&v| v >= nv) {
                return Err(Error::InvalidMesh(format!(
                    "simplex {t} references missing vertex {bad}"
                )));
            }
            flat.extend_from_slice(s);
        }
        let coords = vertices.concat();
        Self::from_flat(d, coords, flat, Vec::new())
    }

    fn from_flat(
        d: usize,
        coords: Vec<T>,
        mut simplices: Vec<usize>,
        ancestors: Vec<Ancestor>,
    ) -> Result<Self> {
        let nv = coords.len() / d;
        let ns = simplices.len() / (d + 1);
        let mut orientation_fixed = false;
        let mut measures = Vec::with_capacity(ns);
        let mut diameters = Vec::with_capacity(ns);
        let mut inv_jac = Vec::with_capacity(ns * d * d);
        let vfact = T::lit(factorial(d) as f64);
        let mut seen = BTreeSet::new();
        for t in 0..ns {
            let s = &mut simplices[t * (d + 1)..(t + 1) * (d + 1)];
            let mut sorted = s.to_vec();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidMesh(format!("simplex {t} repeats a vertex")));
            }
            if !seen.insert(sorted) {
                return Err(Error::InvalidMesh(format!("simplex {t} is a duplicate")));
            }
            let x = |v: usize, c: usize| coords[v * d + c];
            let mut det = jacobian_det(d, s, &coords);
            if det < T::zero() {
                s.swap(d - 1, d);
                orientation_fixed = true;
                det = -det;
            }
            let scale = (0..=d)
                .flat_map(|i| (0..d).map(move |c| (i, c)))
                .fold(T::zero(), |m, (i, c)| m.max(x(s[i], c).abs()))
                .max(T::one());
            if det <= T::epsilon() * T::lit(64.0) * scale.powi(d as i32) {
                return Err(Error::InvalidMesh(format!("simplex {t} has zero measure")));
            }
            measures.push(det / vfact);
            let mut diam = T::zero();
            for i in 0..=d {
                for j in i + 1..=d {
                    let dist = (0..d)
                        .map(|c| (x(s[i], c) - x(s[j], c)).powi(2))
                        .sum::<T>()
                        .sqrt();
                    diam = diam.max(dist);
                }
            }
            diameters.push(diam);
            inv_jac.extend(inverse_jacobian(d, s, &coords));
        }
        // facets
        let mut facet_count: HashMap<Vec<usize>, usize> = HashMap::new();
        for t in 0..ns {
            let s = &simplices[t * (d + 1)..(t + 1) * (d + 1)];
            for skip in 0..=d {
                let mut f: Vec<usize> = (0..=d).filter(|&i| i != skip).map(|i| s[i]).collect();
                f.sort_unstable();
                *facet_count.entry(f).or_insert(0) += 1;
            }
        }
        if let Some((f, _)) = facet_count.iter().find(|(_, &c)| c > 2) {
            return Err(Error::InvalidMesh(format!(
                "facet {f:?} is shared by more than two simplices"
            )));
        }
        let boundary_facet_set: BTreeSet<Vec<usize>> = facet_count
            .into_iter()
            .filter(|&(_, c)| c == 1)
            .map(|(f, _)| f)
            .collect();
        let boundary_facets: Vec<Vec<usize>> = boundary_facet_set.iter().cloned().collect();
        let mut boundary_vertex = vec![false; nv];
        for f in &boundary_facets {
            for &v in f {
                boundary_vertex[v] = true;
            }
        }
        let mut vertex_patches = vec![Vec::new(); nv];
        for t in 0..ns {
            for &v in &simplices[t * (d + 1)..(t + 1) * (d + 1)] {
                vertex_patches[v].push(t);
            }
        }
        let mesh = Self {
            id: fresh_id(),
            d,
            coords,
            simplices,
            measures,
            diameters,
            inv_jac,
            boundary_facets,
            boundary_facet_set,
            boundary_vertex,
            vertex_patches,
            orientation_fixed,
            ancestors,
        };
        mesh.check_conformity()?;
        Ok(mesh)
    }

    fn check_conformity(&self) -> Result<()> {
        let d = self.d;
        if d == 1 {
            // intervals must not overlap
            let mut iv: Vec<(T, T)> = (0..self.num_simplices())
                .map(|t| {
                    let s = self.simplex(t);
                    let (a, b) = (self.vertex(s[0])[0], self.vertex(s[1])[0]);
                    (a.min(b), a.max(b))
                })
                .collect();
            iv.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite coordinates"));
            for w in iv.windows(2) {
                if w[1].0 < w[0].1 {
                    return Err(Error::InvalidMesh("overlapping intervals".into()));
                }
            }
            return Ok(());
        }
        // hanging vertices: a vertex strictly inside a boundary edge
        let tol = T::lit(1e-12);
        for f in &self.boundary_facets {
            let (a, b) = (self.vertex(f[0]), self.vertex(f[1]));
            let len2: T = (0..d).map(|c| (b[c] - a[c]).powi(2)).sum();
            for v in 0..self.num_vertices() {
                if f.contains(&v) || self.vertex_patches[v].is_empty() {
                    continue;
                }
                let p = self.vertex(v);
                let s: T = (0..d).map(|c| (p[c] - a[c]) * (b[c] - a[c])).sum::<T>() / len2;
                if s <= tol || s >= T::one() - tol {
                    continue;
                }
                let off: T = (0..d)
                    .map(|c| (p[c] - a[c] - s * (b[c] - a[c])).powi(2))
                    .sum::<T>()
                    .sqrt();
                if off <= tol * len2.sqrt() {
                    return Err(Error::InvalidMesh(format!(
                        "vertex {v} hangs on boundary facet {f:?}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn from_file(file: &MeshFile) -> Result<Self> {
        let vertices = file
            .vertices
            .iter()
            .map(|v| v.iter().map(|&c| T::lit(c)).collect())
            .collect();
        Self::new(file.d, vertices, file.simplices.clone())
    }

    pub fn to_file(&self) -> MeshFile {
        MeshFile {
            d: self.d,
            vertices: (0..self.num_vertices())
                .map(|v| self.vertex(v).iter().map(|c| c.as_f64()).collect())
                .collect(),
            simplices: (0..self.num_simplices()).map(|t| self.simplex(t).to_vec()).collect(),
        }
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: MeshFile = serde_json::from_str(&text)?;
        Self::from_file(&file)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.to_file())?)?;
        Ok(())
    }

    /// `n` equal intervals on `[0, 1]`.
    pub fn interval(n: usize) -> Self {
        Self::interval_from_points(
            &(0..=n).map(|i| T::of(i) / T::of(n)).collect::<Vec<_>>(),
        )
        .expect("uniform interval mesh")
    }

    /// Intervals between consecutive sorted break points.
    pub fn interval_from_points(points: &[T]) -> Result<Self> {
        let vertices = points.iter().map(|&p| vec![p]).collect();
        let simplices = (0..points.len().saturating_sub(1)).map(|i| vec![i, i + 1]).collect();
        Self::new(1, vertices, simplices)
    }

    /// Unit square, `n×n` cells, each split into two triangles. The diagonal
    /// direction alternates with the parity of the cell, so for even `n` every
    /// triangle touching a corner also touches an interior vertex.
    pub fn square(n: usize) -> Self {
        let idx = |i: usize, j: usize| j * (n + 1) + i;
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                vertices.push(vec![T::of(i) / T::of(n), T::of(j) / T::of(n)]);
            }
        }
        let mut simplices = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (v00, v10, v01, v11) = (idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1));
                if (i + j) % 2 == 0 {
                    simplices.push(vec![v00, v10, v11]);
                    simplices.push(vec![v00, v11, v01]);
                } else {
                    simplices.push(vec![v00, v10, v01]);
                    simplices.push(vec![v10, v11, v01]);
                }
            }
        }
        Self::new(2, vertices, simplices).expect("uniform square mesh")
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn num_vertices(&self) -> usize {
        self.coords.len() / self.d
    }

    pub fn num_simplices(&self) -> usize {
        self.measures.len()
    }

    pub fn vertex(&self, v: usize) -> &[T] {
        &self.coords[v * self.d..(v + 1) * self.d]
    }

    pub fn simplex(&self, t: usize) -> &[usize] {
        &self.simplices[t * (self.d + 1)..(t + 1) * (self.d + 1)]
    }

    pub fn measure(&self, t: usize) -> T {
        self.measures[t]
    }

    pub fn diameter(&self, t: usize) -> T {
        self.diameters[t]
    }

    pub fn max_diameter(&self) -> T {
        self.diameters.iter().copied().fold(T::zero(), T::max)
    }

    pub fn total_measure(&self) -> T {
        self.measures.iter().copied().sum()
    }

    pub fn orientation_fixed(&self) -> bool {
        self.orientation_fixed
    }

    /// Sorted vertex lists of the facets that belong to a single simplex.
    pub fn boundary_facets(&self) -> &[Vec<usize>] {
        &self.boundary_facets
    }

    pub fn is_boundary_facet(&self, sorted_facet: &[usize]) -> bool {
        self.boundary_facet_set.contains(sorted_facet)
    }

    /// Whether the facet of `t` opposite its local vertex `j` is on `∂Ω`.
    pub fn facet_on_boundary(&self, t: usize, j: usize) -> bool {
        let mut f: Vec<usize> = self
            .simplex(t)
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != j)
            .map(|(_, &v)| v)
            .collect();
        f.sort_unstable();
        self.boundary_facet_set.contains(&f)
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    pub fn interior_vertices(&self) -> Vec<usize> {
        (0..self.num_vertices())
            .filter(|&v| !self.boundary_vertex[v] && !self.vertex_patches[v].is_empty())
            .collect()
    }

    /// Whether `t` meets `∂Ω` (has a vertex on the boundary).
    pub fn touches_boundary(&self, t: usize) -> bool {
        self.simplex(t).iter().any(|&v| self.boundary_vertex[v])
    }

    /// `ω_j`: simplices containing vertex `j`.
    pub fn vertex_patch(&self, j: usize) -> &[usize] {
        &self.vertex_patches[j]
    }

    /// `ω_j²`: simplices meeting `ω_j`.
    pub fn second_patch(&self, j: usize) -> Vec<usize> {
        let mut out = BTreeSet::new();
        for &t in &self.vertex_patches[j] {
            for &v in self.simplex(t) {
                out.extend(self.vertex_patches[v].iter().copied());
            }
        }
        out.into_iter().collect()
    }

    /// `ω_T`: simplices meeting `T`.
    pub fn simplex_patch(&self, t: usize) -> Vec<usize> {
        let mut out = BTreeSet::new();
        for &v in self.simplex(t) {
            out.extend(self.vertex_patches[v].iter().copied());
        }
        out.into_iter().collect()
    }

    /// `h_j = diam(ω_j)`.
    pub fn patch_diameter(&self, j: usize) -> T {
        let verts: BTreeSet<usize> = self.vertex_patches[j]
            .iter()
            .flat_map(|&t| self.simplex(t).iter().copied())
            .collect();
        let verts: Vec<usize> = verts.into_iter().collect();
        let mut diam = T::zero();
        for (a, &u) in verts.iter().enumerate() {
            for &v in &verts[a + 1..] {
                let dist = (0..self.d)
                    .map(|c| (self.vertex(u)[c] - self.vertex(v)[c]).powi(2))
                    .sum::<T>()
                    .sqrt();
                diam = diam.max(dist);
            }
        }
        diam
    }

    /// `max_T h_T^d/|T|`, normalized to one for the regular simplex.
    pub fn shape_regularity(&self) -> T {
        let regular = match self.d {
            1 => T::one(),
            _ => T::lit(4.0) / T::lit(3.0).sqrt(),
        };
        (0..self.num_simplices())
            .map(|t| self.diameters[t].powi(self.d as i32) / self.measures[t])
            .fold(T::zero(), T::max)
            / regular
    }

    /// Gradients of the barycentric coordinates of `t`; entry `j` is `∇λ_j`.
    pub fn bary_grads(&self, t: usize) -> Vec<Vec<T>> {
        let d = self.d;
        let inv = &self.inv_jac[t * d * d..(t + 1) * d * d];
        let mut g = vec![vec![T::zero(); d]; d + 1];
        for j in 1..=d {
            for c in 0..d {
                g[j][c] = inv[(j - 1) * d + c];
                g[0][c] -= inv[(j - 1) * d + c];
            }
        }
        g
    }

    /// Barycentric coordinates of `x` with respect to `t`.
    pub fn barycentric(&self, t: usize, x: &[T]) -> Vec<T> {
        let d = self.d;
        let inv = &self.inv_jac[t * d * d..(t + 1) * d * d];
        let v0 = self.vertex(self.simplex(t)[0]);
        let mut lam = vec![T::zero(); d + 1];
        let mut rest = T::one();
        for j in 1..=d {
            let l: T = (0..d).map(|c| inv[(j - 1) * d + c] * (x[c] - v0[c])).sum();
            lam[j] = l;
            rest -= l;
        }
        lam[0] = rest;
        lam
    }

    /// Cartesian point with barycentric coordinates `lam` in `t`.
    pub fn point(&self, t: usize, lam: &[T]) -> Vec<T> {
        let mut x = vec![T::zero(); self.d];
        for (j, &v) in self.simplex(t).iter().enumerate() {
            for c in 0..self.d {
                x[c] += lam[j] * self.vertex(v)[c];
            }
        }
        x
    }

    /// Lowest-numbered simplex containing `x`, with its barycentric coordinates.
    pub fn locate(&self, x: &[T]) -> Option<(usize, Vec<T>)> {
        let slack = T::lit(LOCATE_SLACK);
        (0..self.num_simplices()).find_map(|t| {
            let lam = self.barycentric(t, x);
            lam.iter().all(|&l| l >= -slack).then_some((t, lam))
        })
    }

    /// Simplex of the ancestor mesh `ancestor_id` containing simplex `t` of
    /// this mesh; `Some(t)` for this mesh itself.
    pub fn ancestor_simplex(&self, ancestor_id: u64, t: usize) -> Option<usize> {
        if ancestor_id == self.id {
            return Some(t);
        }
        self.ancestors
            .iter()
            .find(|a| a.id == ancestor_id)
            .map(|a| a.map[t])
    }

    fn child_lineage(&self, parent_of: &[usize]) -> Vec<Ancestor> {
        let mut out: Vec<Ancestor> = self
            .ancestors
            .iter()
            .map(|a| Ancestor {
                id: a.id,
                map: parent_of.iter().map(|&p| a.map[p]).collect(),
            })
            .collect();
        out.push(Ancestor {
            id: self.id,
            map: parent_of.to_vec(),
        });
        out
    }

    /// Uniform refinement: bisection in 1D, red refinement in 2D. Coarse
    /// vertices keep their indices.
    pub fn uniform_refine(&self) -> Self {
        let d = self.d;
        let mut coords = self.coords.clone();
        let mut mids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, coords: &mut Vec<T>| -> usize {
            let key = (a.min(b), a.max(b));
            *mids.entry(key).or_insert_with(|| {
                let id = coords.len() / d;
                for c in 0..d {
                    let v = (coords[a * d + c] + coords[b * d + c]) / T::lit(2.0);
                    coords.push(v);
                }
                id
            })
        };
        let mut simplices = Vec::new();
        let mut parent = Vec::new();
        for t in 0..self.num_simplices() {
            let s = self.simplex(t).to_vec();
            if d == 1 {
                let m = mid(s[0], s[1], &mut coords);
                simplices.extend_from_slice(&[s[0], m, m, s[1]]);
                parent.extend_from_slice(&[t, t]);
            } else {
                let (a, b, c) = (s[0], s[1], s[2]);
                let mab = mid(a, b, &mut coords);
                let mbc = mid(b, c, &mut coords);
                let mca = mid(c, a, &mut coords);
                simplices.extend_from_slice(&[a, mab, mca, mab, b, mbc, mca, mbc, c, mbc, mca, mab]);
                parent.extend_from_slice(&[t, t, t, t]);
            }
        }
        let lineage = self.child_lineage(&parent);
        Self::from_flat(d, coords, simplices, lineage).expect("refinement preserves validity")
    }

    pub fn refine_times(&self, levels: usize) -> Self {
        let mut m = self.clone();
        for _ in 0..levels {
            m = m.uniform_refine();
        }
        m
    }

    /// Bisects the marked intervals of a 1D mesh. Returns the new mesh and the
    /// pairs `(coarse, fine)` of simplices that were left untouched.
    pub fn local_refine_1d(&self, marked: &[usize]) -> Result<(Self, Vec<(usize, usize)>)> {
        if self.d != 1 {
            return Err(Error::Unsupported("local refinement is implemented for d = 1".into()));
        }
        let marked: BTreeSet<usize> = marked.iter().copied().collect();
        let mut coords = self.coords.clone();
        let mut simplices = Vec::new();
        let mut parent = Vec::new();
        let mut unchanged = Vec::new();
        for t in 0..self.num_simplices() {
            let s = self.simplex(t);
            if marked.contains(&t) {
                let m = coords.len();
                coords.push((coords[s[0]] + coords[s[1]]) / T::lit(2.0));
                simplices.extend_from_slice(&[s[0], m, m, s[1]]);
                parent.extend_from_slice(&[t, t]);
            } else {
                unchanged.push((t, parent.len()));
                simplices.extend_from_slice(s);
                parent.push(t);
            }
        }
        let lineage = self.child_lineage(&parent);
        let mesh = Self::from_flat(1, coords, simplices, lineage)?;
        Ok((mesh, unchanged))
    }

    /// The sub-mesh formed by the given simplices, vertices renumbered in
    /// order of first use; the parent mesh becomes an ancestor.
    pub fn extract(&self, simplices: &[usize]) -> Result<Self> {
        if simplices.is_empty() {
            return Err(Error::InvalidMesh("empty patch".into()));
        }
        let d = self.d;
        let mut renum: HashMap<usize, usize> = HashMap::new();
        let mut coords = Vec::new();
        let mut flat = Vec::with_capacity(simplices.len() * (d + 1));
        for &t in simplices {
            for &v in self.simplex(t) {
                let id = *renum.entry(v).or_insert_with(|| {
                    coords.extend_from_slice(self.vertex(v));
                    coords.len() / d - 1
                });
                flat.push(id);
            }
        }
        let lineage = self.child_lineage(simplices);
        Self::from_flat(d, coords, flat, lineage)
    }

    /// Integral over the mesh of `f(t, λ, x)` with a rule of the given
    /// polynomial order. Per-simplex contributions are computed in parallel
    /// and summed in simplex order.
    pub fn integrate<F>(&self, order: usize, f: F) -> T
    where
        F: Fn(usize, &[T], &[T]) -> T + Sync,
    {
        self.integrate_on(&(0..self.num_simplices()).collect::<Vec<_>>(), order, f)
    }

    pub fn integrate_on<F>(&self, simplices: &[usize], order: usize, f: F) -> T
    where
        F: Fn(usize, &[T], &[T]) -> T + Sync,
    {
        use rayon::prelude::*;
        let rule = crate::quadrature::simplex_rule(self.d, order);
        let parts: Vec<T> = simplices
            .par_iter()
            .map(|&t| {
                let mut s = T::zero();
                for (l, &w) in rule.points.iter().zip(&rule.weights) {
                    let lam: Vec<T> = l.iter().map(|&v| T::lit(v)).collect();
                    let x = self.point(t, &lam);
                    s += T::lit(w) * f(t, &lam, &x);
                }
                s * self.measures[t]
            })
            .collect();
        parts.into_iter().sum()
    }
}

fn jacobian_det<T: Real>(d: usize, s: &[usize], coords: &[T]) -> T {
    let x = |v: usize, c: usize| coords[v * d + c];
    match d {
        1 => x(s[1], 0) - x(s[0], 0),
        _ => {
            let (ax, ay) = (x(s[1], 0) - x(s[0], 0), x(s[1], 1) - x(s[0], 1));
            let (bx, by) = (x(s[2], 0) - x(s[0], 0), x(s[2], 1) - x(s[0], 1));
            ax * by - ay * bx
        }
    }
}

fn inverse_jacobian<T: Real>(d: usize, s: &[usize], coords: &[T]) -> Vec<T> {
    let x = |v: usize, c: usize| coords[v * d + c];
    match d {
        1 => vec![T::one() / (x(s[1], 0) - x(s[0], 0))],
        _ => {
            // columns of the Jacobian are the edge vectors from vertex 0
            let (a, c) = (x(s[1], 0) - x(s[0], 0), x(s[1], 1) - x(s[0], 1));
            let (b, e) = (x(s[2], 0) - x(s[0], 0), x(s[2], 1) - x(s[0], 1));
            let det = a * e - b * c;
            vec![e / det, -b / det, -c / det, a / det]
        }
    }
}
