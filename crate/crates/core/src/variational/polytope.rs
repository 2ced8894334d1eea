use nalgebra::DVector;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::cone::PolyhedralCone;
use crate::error::{check_dim, Error, Result};
use crate::linalg::Subspace;

/// Largest ambient dimension accepted for face enumeration.
pub const MAX_POLY_DIM: usize = 6;

/// Polyhedron `conv(vertices) + cone(rays)` with a cached inequality
/// description and face list.
#[derive(Debug, Clone)]
pub struct Polyhedron {
    n: usize,
    vertices: Vec<DVector<f64>>,
    rays: Vec<DVector<f64>>,
    /// `(a, b)` with `⟨a, x⟩ ≤ b`, `‖a‖ = 1`.
    inequalities: Vec<(DVector<f64>, f64)>,
    /// `(e, c)` with `⟨e, x⟩ = c`, `‖e‖ = 1`.
    equalities: Vec<(DVector<f64>, f64)>,
    faces: Vec<Face>,
}

/// A face of a polyhedron, by the vertex and ray indices it contains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Face {
    pub vertices: Vec<usize>,
    pub rays: Vec<usize>,
    #[serde(skip)]
    anchor: Option<DVector<f64>>,
    #[serde(skip)]
    directions: Option<Subspace>,
}

impl Face {
    /// Projection of `z` onto the affine hull of the face.
    fn project_affine(&self, z: &DVector<f64>) -> DVector<f64> {
        let anchor = self.anchor.as_ref().expect("faces are built with an anchor");
        let dirs = self.directions.as_ref().expect("faces are built with directions");
        anchor + dirs.project(&(z - anchor))
    }
}

impl Polyhedron {
    pub fn new(n: usize, vertices: Vec<DVector<f64>>, rays: Vec<DVector<f64>>) -> Result<Self> {
        if n == 0 || n > MAX_POLY_DIM {
            return Err(Error::Unsupported(format!(
                "polyhedra are limited to 1 <= n <= {MAX_POLY_DIM} (got {n})"
            )));
        }
        if vertices.is_empty() {
            return Err(Error::InvalidArgument("a polyhedron needs at least one vertex".into()));
        }
        for p in vertices.iter().chain(&rays) {
            check_dim(n, p.len())?;
        }
        let lift = |p: &DVector<f64>, t: f64| {
            let mut q = DVector::zeros(n + 1);
            q.rows_mut(0, n).copy_from(p);
            q[n] = t;
            q
        };
        let mut gens: Vec<DVector<f64>> = vertices.iter().map(|v| lift(v, 1.0)).collect();
        gens.extend(rays.iter().map(|r| lift(r, 0.0)));
        let homog = PolyhedralCone::generated(n + 1, gens)?;

        let mut inequalities = Vec::new();
        for f in homog.facets() {
            let a = f.rows(0, n).into_owned();
            let norm = a.norm();
            if norm <= 1e-12 {
                continue;
            }
            inequalities.push((a / norm, -f[n] / norm));
        }
        let mut equalities = Vec::new();
        for e in homog.hull().complement().basis() {
            let a = e.rows(0, n).into_owned();
            let norm = a.norm();
            if norm > 1e-12 {
                equalities.push((a / norm, -e[n] / norm));
            }
        }

        let nv = vertices.len();
        let mut faces = Vec::new();
        for cone_face in homog.faces()? {
            let members: Vec<usize> = (0..homog.generators().len())
                .filter(|&i| cone_face.contains(&homog.generators()[i], 1e-9))
                .collect();
            let fv: Vec<usize> = members.iter().copied().filter(|&i| i < nv).collect();
            if fv.is_empty() {
                continue;
            }
            let fr: Vec<usize> = members.iter().copied().filter(|&i| i >= nv).map(|i| i - nv).collect();
            let anchor = vertices[fv[0]].clone();
            let mut dirs: Vec<DVector<f64>> = fv[1..].iter().map(|&i| &vertices[i] - &anchor).collect();
            dirs.extend(fr.iter().map(|&j| rays[j].clone()));
            faces.push(Face {
                vertices: fv,
                rays: fr,
                anchor: Some(anchor),
                directions: Some(Subspace::orthonormalize(n, &dirs, 1e-10)?),
            });
        }

        Ok(Polyhedron {
            n,
            vertices,
            rays,
            inequalities,
            equalities,
            faces,
        })
    }

    /// `[lo, hi]^n`
    pub fn cube(n: usize, lo: f64, hi: f64) -> Result<Self> {
        let vertices = (0..1usize << n)
            .map(|mask| DVector::from_fn(n, |i, _| if mask >> i & 1 == 1 { hi } else { lo }))
            .collect();
        Polyhedron::new(n, vertices, Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn vertices(&self) -> &[DVector<f64>] {
        &self.vertices
    }

    pub fn rays(&self) -> &[DVector<f64>] {
        &self.rays
    }

    pub fn inequalities(&self) -> &[(DVector<f64>, f64)] {
        &self.inequalities
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn is_bounded(&self) -> bool {
        self.rays.iter().all(|r| r.norm() == 0.0)
    }

    /// Largest constraint violation (0 inside).
    pub fn violation(&self, x: &DVector<f64>) -> f64 {
        let ineq = self
            .inequalities
            .iter()
            .map(|(a, b)| a.dot(x) - b)
            .fold(0.0, f64::max);
        let eq = self
            .equalities
            .iter()
            .map(|(e, c)| (e.dot(x) - c).abs())
            .fold(0.0, f64::max);
        ineq.max(eq)
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        x.len() == self.n && self.violation(x) <= tol * x.norm().max(1.0)
    }

    /// Euclidean projection, exact: the projection lies in the relative
    /// interior of some face and equals the projection onto that face's
    /// affine hull, so the nearest feasible affine projection wins.
    pub fn project(&self, z: &DVector<f64>) -> DVector<f64> {
        if self.contains(z, 1e-14) {
            return z.clone();
        }
        let mut best: Option<(f64, DVector<f64>)> = None;
        for f in &self.faces {
            let p = f.project_affine(z);
            if !self.contains(&p, 1e-12) {
                continue;
            }
            let d = (z - &p).norm();
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, p));
            }
        }
        best.map(|(_, p)| p).expect("some vertex is always feasible")
    }

    /// `max_{c ∈ C} ⟨c, x⟩`, `+∞` when a ray has positive inner product.
    pub fn support(&self, x: &DVector<f64>) -> f64 {
        let scale = x.norm().max(1.0);
        if self.rays.iter().any(|r| r.dot(x) > 1e-14 * scale * r.norm()) {
            return f64::INFINITY;
        }
        self.vertices
            .iter()
            .map(|v| v.dot(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `T_C(x) = cone{vᵢ − x, rⱼ}`.
    pub fn tangent_cone(&self, x: &DVector<f64>) -> Result<PolyhedralCone> {
        check_dim(self.n, x.len())?;
        let distance = self.violation(x);
        if distance > 1e-10 * x.norm().max(1.0) {
            return Err(Error::NotInSet { distance });
        }
        let mut gens: Vec<DVector<f64>> = self.vertices.iter().map(|v| v - x).collect();
        gens.extend(self.rays.iter().cloned());
        gens.retain(|g| g.norm() > 1e-12);
        PolyhedralCone::generated(self.n, gens)
    }

    /// `N_C(x)`, the polar of the tangent cone.
    pub fn normal_cone(&self, x: &DVector<f64>) -> Result<PolyhedralCone> {
        Ok(self.tangent_cone(x)?.polar())
    }

    /// Smallest exposed face containing `x`: the maximizers of `⟨y, ·⟩` for
    /// `y` in the relative interior of `N_C(x)`.
    pub fn smallest_exposed_face(&self, x: &DVector<f64>) -> Result<ExposedFace> {
        let normal = self.normal_cone(x)?;
        let y = normal
            .extreme_rays()
            .into_iter()
            .fold(DVector::zeros(self.n), |acc, r| acc + r);
        Ok(self.exposed_by(&y))
    }

    /// `argmax_{c ∈ C} ⟨y, c⟩` as vertex/ray index sets.
    pub fn exposed_by(&self, y: &DVector<f64>) -> ExposedFace {
        let scale = y.norm().max(1.0);
        let best = self
            .vertices
            .iter()
            .map(|v| y.dot(v))
            .fold(f64::NEG_INFINITY, f64::max);
        let vertices = (0..self.vertices.len())
            .filter(|&i| y.dot(&self.vertices[i]) >= best - 1e-9 * scale * best.abs().max(1.0))
            .collect();
        let rays = (0..self.rays.len())
            .filter(|&j| y.dot(&self.rays[j]).abs() <= 1e-9 * scale * self.rays[j].norm())
            .collect();
        ExposedFace { vertices, rays }
    }
}

/// Face given by indices into the parent polyhedron's vertex and ray lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExposedFace {
    pub vertices: Vec<usize>,
    pub rays: Vec<usize>,
}

impl ExposedFace {
    pub fn vertex_points(&self, c: &Polyhedron) -> Vec<DVector<f64>> {
        self.vertices.iter().map(|&i| c.vertices[i].clone()).collect()
    }

    /// Sub-polyhedron spanned by the face.
    pub fn to_polyhedron(&self, c: &Polyhedron) -> Result<Polyhedron> {
        Polyhedron::new(
            c.n,
            self.vertex_points(c),
            self.rays.iter().map(|&j| c.rays[j].clone()).collect(),
        )
    }
}

#[derive(Serialize, Deserialize)]
struct PolyRepr {
    vertices: Vec<Vec<f64>>,
    #[serde(default)]
    rays: Vec<Vec<f64>>,
}

impl Serialize for Polyhedron {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PolyRepr {
            vertices: self.vertices.iter().map(|v| v.as_slice().to_vec()).collect(),
            rays: self.rays.iter().map(|v| v.as_slice().to_vec()).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Polyhedron {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = PolyRepr::deserialize(d)?;
        let n = r.vertices.first().map_or(0, Vec::len);
        Polyhedron::new(
            n,
            r.vertices.into_iter().map(DVector::from_vec).collect(),
            r.rays.into_iter().map(DVector::from_vec).collect(),
        )
        .map_err(serde::de::Error::custom)
    }
}

impl PartialEq for Polyhedron {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices && self.rays == other.rays
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn square() -> Polyhedron {
        Polyhedron::cube(2, 0.0, 1.0).unwrap()
    }

    fn quadrant() -> Polyhedron {
        Polyhedron::new(2, vec![v(&[0.0, 0.0])], vec![v(&[1.0, 0.0]), v(&[0.0, 1.0])]).unwrap()
    }

    #[test]
    fn square_h_rep() {
        let s = square();
        assert_eq!(s.inequalities().len(), 4);
        assert_eq!(s.faces().len(), 9);
        assert!(s.contains(&v(&[0.5, 1.0]), 1e-12));
        assert!(!s.contains(&v(&[0.5, 1.1]), 1e-12));
    }

    #[test]
    fn tangent_cones() {
        let t = quadrant().tangent_cone(&v(&[0.0, 0.0])).unwrap();
        assert!(t.contains(&v(&[2.0, 3.0]), 1e-12) && !t.contains(&v(&[-1.0, 0.0]), 1e-12));

        let t = quadrant().tangent_cone(&v(&[1.0, 0.0])).unwrap();
        assert!(t.contains(&v(&[-5.0, 0.0]), 1e-12));
        assert!(t.contains(&v(&[5.0, 1.0]), 1e-12));
        assert!(!t.contains(&v(&[0.0, -1.0]), 1e-12));

        let t = square().tangent_cone(&v(&[1.0, 1.0])).unwrap();
        assert!(t.contains(&v(&[-1.0, -2.0]), 1e-12));
        assert!(!t.contains(&v(&[0.1, -2.0]), 1e-12));
    }

    #[test]
    fn tangent_rejects_outside_point() {
        let err = square().tangent_cone(&v(&[2.0, 0.5])).unwrap_err();
        assert!(matches!(err, Error::NotInSet { .. }));
    }

    #[test]
    fn normal_cones() {
        let n = quadrant().normal_cone(&v(&[0.0, 0.0])).unwrap();
        assert!(n.contains(&v(&[-1.0, -1.0]), 1e-12) && !n.contains(&v(&[1.0, -1.0]), 1e-12));

        let n = square().normal_cone(&v(&[1.0, 0.5])).unwrap();
        assert_eq!(n.dim(), 1);
        assert!(n.contains(&v(&[3.0, 0.0]), 1e-12) && !n.contains(&v(&[-3.0, 0.0]), 1e-12));

        let n = square().normal_cone(&v(&[0.5, 0.5])).unwrap();
        assert_eq!(n.dim(), 0);
    }

    #[test]
    fn exposed_faces() {
        let s = square();
        let f = s.smallest_exposed_face(&v(&[1.0, 0.5])).unwrap();
        let mut pts: Vec<Vec<f64>> = f.vertex_points(&s).iter().map(|p| p.as_slice().to_vec()).collect();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(pts, vec![vec![1.0, 0.0], vec![1.0, 1.0]]);

        let f = s.smallest_exposed_face(&v(&[1.0, 1.0])).unwrap();
        assert_eq!(f.vertex_points(&s), vec![v(&[1.0, 1.0])]);

        let f = s.smallest_exposed_face(&v(&[0.3, 0.6])).unwrap();
        assert_eq!(f.vertices.len(), 4);
    }

    #[test]
    fn projection_onto_square_and_quadrant() {
        let s = square();
        assert_eq!(s.project(&v(&[2.0, 0.5])), v(&[1.0, 0.5]));
        assert_eq!(s.project(&v(&[2.0, -3.0])), v(&[1.0, 0.0]));
        assert_eq!(s.project(&v(&[0.2, 0.7])), v(&[0.2, 0.7]));
        assert_eq!(quadrant().project(&v(&[-1.0, 3.0])), v(&[0.0, 3.0]));
    }

    #[test]
    fn lower_dimensional_polytope() {
        // a segment in R^2
        let seg = Polyhedron::new(2, vec![v(&[0.0, 0.0]), v(&[1.0, 1.0])], vec![]).unwrap();
        assert!(seg.contains(&v(&[0.5, 0.5]), 1e-12));
        assert!(!seg.contains(&v(&[0.5, 0.6]), 1e-12));
        let p = seg.project(&v(&[1.0, 0.0]));
        assert!((p - v(&[0.5, 0.5])).norm() < 1e-14);
        assert_eq!(seg.support(&v(&[1.0, 0.0])), 1.0);
    }

    #[test]
    fn support_with_rays() {
        assert_eq!(quadrant().support(&v(&[1.0, 0.0])), f64::INFINITY);
        assert_eq!(quadrant().support(&v(&[-1.0, -2.0])), 0.0);
    }
}
