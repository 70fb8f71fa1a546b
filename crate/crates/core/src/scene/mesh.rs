use std::collections::HashMap;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

type Vec3 = Vector3<f64>;

/// Axis-aligned box, micrometers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub const EMPTY: Aabb = Aabb { min: [f64::INFINITY; 3], max: [f64::NEG_INFINITY; 3] };

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a [f64; 3]>) -> Aabb {
        points.into_iter().fold(Aabb::EMPTY, |b, p| b.grown(*p))
    }

    pub fn grown(mut self, p: [f64; 3]) -> Aabb {
        for (k, v) in p.into_iter().enumerate() {
            self.min[k] = self.min[k].min(v);
            self.max[k] = self.max[k].max(v);
        }
        self
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        self.grown(other.min).grown(other.max)
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|k| self.min[k] <= p[k] && p[k] <= self.max[k])
    }

    pub fn center(&self) -> [f64; 3] {
        [0, 1, 2].map(|k| 0.5 * (self.min[k] + self.max[k]))
    }
}

/// Ray directions tried in order until a cast avoids every degenerate hit.
/// Axes first; the oblique fallbacks resolve points that sit on
/// triangulation diagonals of axis-aligned faces.
const CAST_DIRECTIONS: [[f64; 3]; 6] = [
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [0.577_215_664_901_532_9, 0.624_606_064_116_177_1, 0.526_168_130_468_130_4],
    [-0.309_351_043_499_002_2, 0.838_241_537_223_102_6, 0.449_057_966_369_519_2],
    [0.707_106_781_186_547_5, -0.141_421_356_237_309_5, 0.692_820_323_027_550_9],
];

const BARY_EPS: f64 = 1e-10;
const PLANE_EPS: f64 = 1e-12;

enum Crossings {
    Count(usize),
    Degenerate,
}

/// Closed triangle mesh of one segmented entity, coordinates in micrometers.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityMesh {
    pub entity_id: String,
    pub label: String,
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[u32; 3]>,
    pub aabb: Aabb,
    pub signed_volume_um3: f64,
    pub centroid: [f64; 3],
    /// Every edge is shared by exactly two triangles with opposite winding.
    /// Containment queries skip meshes where this does not hold.
    pub watertight: bool,
}

impl EntityMesh {
    pub fn new(
        entity_id: impl Into<String>,
        label: impl Into<String>,
        vertices: Vec<[f64; 3]>,
        triangles: Vec<[u32; 3]>,
    ) -> EntityMesh {
        let aabb = Aabb::from_points(&vertices);
        let (signed_volume_um3, centroid) = volume_and_centroid(&vertices, &triangles);
        let watertight = is_watertight(&triangles);
        EntityMesh {
            entity_id: entity_id.into(),
            label: label.into(),
            vertices,
            triangles,
            aabb,
            signed_volume_um3,
            centroid,
            watertight,
        }
    }

    fn triangle(&self, t: &[u32; 3]) -> [Vec3; 3] {
        t.map(|i| Vec3::from(self.vertices[i as usize]))
    }

    /// Ray-parity point containment. Re-casts along the next direction when
    /// a ray grazes an edge, a vertex or a coplanar face, or starts on the
    /// surface.
    pub fn contains(&self, p: [f64; 3]) -> bool {
        if !self.watertight || !self.aabb.contains(p) {
            return false;
        }
        let origin = Vec3::from(p);
        for dir in CAST_DIRECTIONS {
            if let Crossings::Count(n) = self.count_crossings(origin, Vec3::from(dir)) {
                return n % 2 == 1;
            }
        }
        // Every direction grazed something, so p is on the surface to within
        // tolerance.
        false
    }

    fn count_crossings(&self, origin: Vec3, dir: Vec3) -> Crossings {
        let mut count = 0;
        for tri in &self.triangles {
            let [a, b, c] = self.triangle(tri);
            let e1 = b - a;
            let e2 = c - a;
            let scale = e1.norm() * e2.norm();
            if scale == 0.0 {
                continue;
            }
            let pvec = dir.cross(&e2);
            let det = e1.dot(&pvec);
            let s = origin - a;
            if det.abs() <= PLANE_EPS * scale {
                // Ray parallel to the triangle's plane: only matters when the
                // ray lies in that plane.
                let normal = e1.cross(&e2);
                if (s.dot(&normal) / normal.norm()).abs() <= PLANE_EPS * scale.sqrt() {
                    let in_box = (0..3).all(|k| {
                        let lo = a[k].min(b[k]).min(c[k]);
                        let hi = a[k].max(b[k]).max(c[k]);
                        if dir[k] == 0.0 {
                            origin[k] >= lo && origin[k] <= hi
                        } else {
                            true
                        }
                    });
                    if in_box {
                        return Crossings::Degenerate;
                    }
                }
                continue;
            }
            let inv = 1.0 / det;
            let u = s.dot(&pvec) * inv;
            if !(-BARY_EPS..=1.0 + BARY_EPS).contains(&u) {
                continue;
            }
            let qvec = s.cross(&e1);
            let v = dir.dot(&qvec) * inv;
            if v < -BARY_EPS || u + v > 1.0 + BARY_EPS {
                continue;
            }
            let t = e2.dot(&qvec) * inv;
            let t_eps = 1e-12 * scale.sqrt().max(1.0);
            if t < -t_eps {
                continue;
            }
            let on_edge = u < BARY_EPS || v < BARY_EPS || u + v > 1.0 - BARY_EPS;
            if on_edge || t <= t_eps {
                return Crossings::Degenerate;
            }
            count += 1;
        }
        Crossings::Count(count)
    }
}

/// Divergence-theorem volume: sum of signed tetrahedra against a reference
/// point, with the volume-weighted tetrahedron centroids giving the solid
/// centroid. Falls back to the vertex mean for zero-volume meshes.
fn volume_and_centroid(vertices: &[[f64; 3]], triangles: &[[u32; 3]]) -> (f64, [f64; 3]) {
    if vertices.is_empty() {
        return (0.0, [0.0; 3]);
    }
    let reference = Vec3::from(Aabb::from_points(vertices).center());
    let mut volume6 = 0.0;
    let mut weighted = Vec3::zeros();
    for tri in triangles {
        let [a, b, c] = tri.map(|i| Vec3::from(vertices[i as usize]) - reference);
        let v6 = a.dot(&b.cross(&c));
        volume6 += v6;
        weighted += (a + b + c) * v6;
    }
    let volume = volume6 / 6.0;
    let centroid = if volume6 != 0.0 {
        reference + weighted / (4.0 * volume6)
    } else {
        vertices.iter().map(|v| Vec3::from(*v)).sum::<Vec3>() / vertices.len() as f64
    };
    (volume, centroid.into())
}

fn is_watertight(triangles: &[[u32; 3]]) -> bool {
    if triangles.is_empty() {
        return false;
    }
    let mut directed: HashMap<(u32, u32), u32> = HashMap::new();
    for t in triangles {
        for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            if a == b {
                return false;
            }
            *directed.entry((a, b)).or_default() += 1;
        }
    }
    directed.iter().all(|(&(a, b), &n)| n == 1 && directed.get(&(b, a)) == Some(&1))
}
