use std::collections::{HashSet, VecDeque};

use itertools::Itertools;
use nalgebra::DVector;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{check_dim, Error, Result};
use crate::linalg::Subspace;

/// Relative tolerance for "this inner product is zero" decisions on unit vectors.
const ZERO_TOL: f64 = 1e-9;
/// Refuse facet searches that would visit more generator subsets than this.
const MAX_SUBSETS: usize = 200_000;

/// Polyhedral cone `{Σ αᵢ gᵢ + l : αᵢ ≥ 0, l ∈ lineality}`.
///
/// The facet description is computed once at construction by testing every
/// generator subset that could span a facet hyperplane, so membership and
/// polarity are exact up to round-off and need no LP.
#[derive(Debug, Clone)]
pub struct PolyhedralCone {
    n: usize,
    generators: Vec<DVector<f64>>,
    lineality: Subspace,
    /// Linear hull of the cone.
    hull: Subspace,
    /// Outward unit normals `a` with `⟨a, x⟩ ≤ 0` on the cone, each inside `hull`.
    facets: Vec<DVector<f64>>,
    /// Generators with the given lineality projected out and scaled to unit length
    /// (`None` for generators lying in the lineality space).
    reduced: Vec<Option<DVector<f64>>>,
}

impl PolyhedralCone {
    pub fn new(n: usize, generators: Vec<DVector<f64>>, lineality: Subspace) -> Result<Self> {
        check_dim(n, lineality.ambient_dim())?;
        for g in &generators {
            check_dim(n, g.len())?;
        }
        let reduced: Vec<Option<DVector<f64>>> = generators
            .iter()
            .map(|g| {
                let r = g - lineality.project(g);
                let norm = r.norm();
                (norm > 1e-12 * g.norm().max(1.0)).then(|| r / norm)
            })
            .collect();
        let gens_span = Subspace::orthonormalize(n, &generators, 1e-10)?;
        let hull = lineality.sum(&gens_span)?;
        let free = hull.intersect(&lineality.complement())?;
        let facets = find_facets(&free, &reduced)?;
        Ok(PolyhedralCone {
            n,
            generators,
            lineality,
            hull,
            facets,
            reduced,
        })
    }

    /// Finitely generated cone without a lineality part.
    pub fn generated(n: usize, generators: Vec<DVector<f64>>) -> Result<Self> {
        Self::new(n, generators, Subspace::zero(n))
    }

    pub fn subspace(s: Subspace) -> Self {
        let n = s.ambient_dim();
        Self::new(n, Vec::new(), s).expect("a subspace is a valid cone")
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    pub fn generators(&self) -> &[DVector<f64>] {
        &self.generators
    }

    pub fn lineality(&self) -> &Subspace {
        &self.lineality
    }

    pub fn facets(&self) -> &[DVector<f64>] {
        &self.facets
    }

    /// Linear hull `C − C`.
    pub fn hull(&self) -> &Subspace {
        &self.hull
    }

    pub fn dim(&self) -> usize {
        self.hull.dim()
    }

    /// Largest subspace contained in the cone.
    pub fn true_lineality(&self) -> Subspace {
        let normals = Subspace::orthonormalize(self.n, &self.facets, 1e-10)
            .expect("facets live in the ambient space");
        self.hull
            .intersect(&normals.complement())
            .expect("dimensions agree")
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        if x.len() != self.n {
            return false;
        }
        let scale = x.norm().max(1.0);
        self.hull.residual(x) <= tol * scale && self.facets.iter().all(|a| a.dot(x) <= tol * scale)
    }

    /// `{y : ⟨y, x⟩ ≤ 0 for all x in the cone}`.
    pub fn polar(&self) -> PolyhedralCone {
        PolyhedralCone::new(self.n, self.facets.clone(), self.hull.complement())
            .expect("polar data is consistent")
    }

    /// Unit directions of the extreme rays of the cone modulo its true lineality.
    pub fn extreme_rays(&self) -> Vec<DVector<f64>> {
        let lin = self.true_lineality();
        let target = self.dim() - lin.dim();
        if target == 0 {
            return Vec::new();
        }
        let mut rays: Vec<DVector<f64>> = Vec::new();
        for g in &self.generators {
            let r = g - lin.project(g);
            let norm = r.norm();
            if norm <= 1e-12 * g.norm().max(1.0) {
                continue;
            }
            let r = r / norm;
            let active: Vec<DVector<f64>> = self
                .facets
                .iter()
                .filter(|a| a.dot(&r).abs() <= ZERO_TOL)
                .cloned()
                .collect();
            let rank = Subspace::orthonormalize(self.n, &active, 1e-9)
                .map(|s| s.dim())
                .unwrap_or(0);
            if rank + 1 == target && !rays.iter().any(|q| (q - &r).norm() < 1e-8) {
                rays.push(r);
            }
        }
        rays
    }

    /// The face `{x ∈ C : ⟨v, x⟩ = 0}`; `v` should lie in the polar cone.
    pub fn face_orthogonal_to(&self, v: &DVector<f64>) -> Result<PolyhedralCone> {
        check_dim(self.n, v.len())?;
        let scale = v.norm().max(1.0);
        let gens = self
            .generators
            .iter()
            .filter(|g| v.dot(g).abs() <= ZERO_TOL * scale * g.norm().max(1.0))
            .cloned()
            .collect();
        PolyhedralCone::new(self.n, gens, self.lineality.clone())
    }

    /// All nonempty faces, largest first, each as its own cone.
    ///
    /// Faces are reached by intersecting with one facet hyperplane at a time,
    /// which visits every face of a polyhedral cone.
    pub fn faces(&self) -> Result<Vec<PolyhedralCone>> {
        let all: Vec<usize> = (0..self.generators.len()).collect();
        let mut seen: HashSet<Vec<usize>> = HashSet::new();
        let mut queue = VecDeque::new();
        seen.insert(all.clone());
        queue.push_back(all);
        let mut faces = Vec::new();
        while let Some(idx) = queue.pop_front() {
            for a in &self.facets {
                let next: Vec<usize> = idx
                    .iter()
                    .copied()
                    .filter(|&i| match &self.reduced[i] {
                        Some(g) => a.dot(g).abs() <= ZERO_TOL,
                        None => true,
                    })
                    .collect();
                if next.len() < idx.len() && seen.insert(next.clone()) {
                    queue.push_back(next);
                }
            }
            let gens = idx.iter().map(|&i| self.generators[i].clone()).collect();
            faces.push(PolyhedralCone::new(self.n, gens, self.lineality.clone())?);
        }
        // A generator subset can describe the same face through redundant
        // generators; keep the first occurrence of each linear hull + facet set.
        let mut unique: Vec<PolyhedralCone> = Vec::new();
        for f in faces {
            if !unique.iter().any(|u| same_cone(u, &f)) {
                unique.push(f);
            }
        }
        Ok(unique)
    }
}

impl PartialEq for PolyhedralCone {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.generators == other.generators && self.lineality == other.lineality
    }
}

fn same_cone(a: &PolyhedralCone, b: &PolyhedralCone) -> bool {
    a.dim() == b.dim()
        && a.generators.iter().all(|g| b.contains(g, 1e-9))
        && b.generators.iter().all(|g| a.contains(g, 1e-9))
        && a.lineality.basis().iter().all(|g| b.contains(g, 1e-9))
        && b.lineality.basis().iter().all(|g| a.contains(g, 1e-9))
}

/// Facet normals of the cone generated by `reduced` inside the space `free`.
fn find_facets(free: &Subspace, reduced: &[Option<DVector<f64>>]) -> Result<Vec<DVector<f64>>> {
    let n = free.ambient_dim();
    let d = free.dim();
    if d == 0 {
        return Ok(Vec::new());
    }
    let gens: Vec<&DVector<f64>> = reduced.iter().flatten().collect();
    let r = d - 1;
    let subsets = binomial(gens.len(), r);
    if subsets > MAX_SUBSETS {
        return Err(Error::Unsupported(format!(
            "facet search over {subsets} generator subsets"
        )));
    }
    let mut facets: Vec<DVector<f64>> = Vec::new();
    for subset in (0..gens.len()).combinations(r) {
        let vs: Vec<DVector<f64>> = subset.iter().map(|&i| gens[i].clone()).collect();
        let span = Subspace::orthonormalize(n, &vs, 1e-9)?;
        if span.dim() < r {
            continue;
        }
        let rest: Vec<DVector<f64>> = free.basis().iter().map(|b| b - span.project(b)).collect();
        let normal = Subspace::orthonormalize(n, &rest, 1e-8)?;
        let Some(a) = normal.basis().first() else {
            continue;
        };
        let dots: Vec<f64> = gens.iter().map(|g| a.dot(g)).collect();
        let a = if dots.iter().all(|&s| s <= ZERO_TOL) {
            a.clone()
        } else if dots.iter().all(|&s| s >= -ZERO_TOL) {
            -a
        } else {
            continue;
        };
        if !facets.iter().any(|f| (f - &a).norm() < 1e-8) {
            facets.push(a);
        }
    }
    Ok(facets)
}

fn binomial(m: usize, k: usize) -> usize {
    if k > m {
        return 0;
    }
    let k = k.min(m - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc.saturating_mul(m - i) / (i + 1);
    }
    acc
}

#[derive(Serialize, Deserialize)]
struct ConeRepr {
    n: usize,
    generators: Vec<Vec<f64>>,
    lineality: Subspace,
}

impl Serialize for PolyhedralCone {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ConeRepr {
            n: self.n,
            generators: self.generators.iter().map(|g| g.as_slice().to_vec()).collect(),
            lineality: self.lineality.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PolyhedralCone {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = ConeRepr::deserialize(d)?;
        let gens = r.generators.into_iter().map(DVector::from_vec).collect();
        PolyhedralCone::new(r.n, gens, r.lineality).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn orthant(n: usize) -> PolyhedralCone {
        let gens = (0..n).map(|i| crate::linalg::unit(n, i)).collect();
        PolyhedralCone::generated(n, gens).unwrap()
    }

    #[test]
    fn orthant_facets_and_polar() {
        let k = orthant(2);
        assert_eq!(k.facets().len(), 2);
        assert!(k.contains(&v(&[1.0, 2.0]), 1e-12));
        assert!(!k.contains(&v(&[-1.0, 2.0]), 1e-12));
        let p = k.polar();
        assert!(p.contains(&v(&[-1.0, -3.0]), 1e-12));
        assert!(!p.contains(&v(&[1.0, -3.0]), 1e-12));
    }

    #[test]
    fn opposite_generators_form_a_line() {
        let k = PolyhedralCone::generated(2, vec![v(&[1.0, 0.0]), v(&[-1.0, 0.0])]).unwrap();
        assert!(k.facets().is_empty());
        assert_eq!(k.true_lineality().dim(), 1);
        assert!(k.contains(&v(&[-5.0, 0.0]), 1e-12));
        assert!(!k.contains(&v(&[0.0, 1.0]), 1e-12));
    }

    #[test]
    fn half_plane_with_redundant_generators() {
        let gens = vec![v(&[-1.0, -0.5]), v(&[0.0, -0.5]), v(&[-1.0, 0.5]), v(&[0.0, 0.5])];
        let k = PolyhedralCone::generated(2, gens).unwrap();
        assert_eq!(k.facets().len(), 1);
        assert!((k.facets()[0].clone() - v(&[1.0, 0.0])).norm() < 1e-12);
        assert_eq!(k.true_lineality().dim(), 1);
        assert!(k.extreme_rays().len() == 1);
    }

    #[test]
    fn orthant_faces() {
        let faces = orthant(2).faces().unwrap();
        let dims: Vec<usize> = faces.iter().map(|f| f.dim()).collect();
        assert_eq!(dims, vec![2, 1, 1, 0]);
    }

    #[test]
    fn cube_corner_has_eight_faces() {
        let faces = orthant(3).faces().unwrap();
        assert_eq!(faces.len(), 8);
    }

    #[test]
    fn non_simplicial_cone() {
        // square pyramid: cone over the square with corners (±1, ±1, 1)
        let gens = vec![
            v(&[1.0, 1.0, 1.0]),
            v(&[1.0, -1.0, 1.0]),
            v(&[-1.0, 1.0, 1.0]),
            v(&[-1.0, -1.0, 1.0]),
        ];
        let k = PolyhedralCone::generated(3, gens).unwrap();
        assert_eq!(k.facets().len(), 4);
        assert_eq!(k.extreme_rays().len(), 4);
        // apex, 4 rays, 4 facets, whole cone
        assert_eq!(k.faces().unwrap().len(), 10);
        assert!(k.contains(&v(&[0.0, 0.0, 1.0]), 1e-12));
        assert!(!k.contains(&v(&[0.0, 1.5, 1.0]), 1e-12));
    }

    #[test]
    fn face_orthogonal_to_normal() {
        let k = orthant(2);
        let f = k.face_orthogonal_to(&v(&[-1.0, 0.0])).unwrap();
        assert_eq!(f.dim(), 1);
        assert!(f.contains(&v(&[0.0, 3.0]), 1e-12));
    }

    #[test]
    fn serde_roundtrip() {
        let k = orthant(2);
        let s = serde_json::to_string(&k).unwrap();
        let back: PolyhedralCone = serde_json::from_str(&s).unwrap();
        assert_eq!(back.facets().len(), 2);
    }
}
