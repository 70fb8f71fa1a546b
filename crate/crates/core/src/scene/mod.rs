//! Segmented-entity scene: metadata, meshes, containment queries and
//! physical-unit statistics.
//!
//! A scene directory holds `scene.json` and `entities.obj`:
//!
//! ```json
//! {"name":"kidney","voxelSizeUm":[0.5,0.5,2.0],"dimensions":[512,512,64],
//!  "channels":[{"id":0,"name":"DAPI"}],"metersPerMicrometer":0.001}
//! ```
//!
//! Voxel sizes follow the OME-Zarr `scale` convention: physical micrometers
//! per voxel along x, y, z. Meshes are already in micrometers.

mod bvh;
mod mesh;
mod obj;

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::protocol::{CatalogEntry, ChannelInfo, SceneCatalog};

pub use bvh::Bvh;
pub use mesh::{Aabb, EntityMesh};
pub use obj::{parse_obj, ObjGroup};

#[cfg(test)]
pub(crate) use mesh::fixtures as mesh_fixtures;

pub const METADATA_FILE: &str = "scene.json";
pub const MESH_FILE: &str = "entities.obj";

/// Display scale used when `scene.json` does not set one: 1 µm → 1 mm.
pub const DEFAULT_METERS_PER_MICROMETER: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("missing scene file {0}")]
    MissingFile(PathBuf),
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("scene metadata: {0}")]
    MetadataSchema(String),
    #[error("{MESH_FILE} line {line}: {message}")]
    ObjParse { line: usize, message: String },
    #[error("scene contains no entities")]
    EmptyScene,
    #[error("unknown entity {0:?}")]
    UnknownEntity(String),
}

fn default_mpu() -> f64 {
    DEFAULT_METERS_PER_MICROMETER
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SceneMetadata {
    pub name: String,
    pub voxel_size_um: [f64; 3],
    pub dimensions: [u64; 3],
    pub channels: Vec<ChannelInfo>,
    #[serde(default = "default_mpu")]
    pub meters_per_micrometer: f64,
}

impl SceneMetadata {
    pub fn from_json(text: &str) -> Result<SceneMetadata, SceneError> {
        let meta: SceneMetadata =
            serde_json::from_str(text).map_err(|e| SceneError::MetadataSchema(e.to_string()))?;
        meta.validate()?;
        Ok(meta)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if self.voxel_size_um.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(SceneError::MetadataSchema("voxelSizeUm entries must be positive".into()));
        }
        if !(self.meters_per_micrometer.is_finite() && self.meters_per_micrometer > 0.0) {
            return Err(SceneError::MetadataSchema("metersPerMicrometer must be positive".into()));
        }
        let mut ids = BTreeSet::new();
        for ch in &self.channels {
            if !ids.insert(ch.id) {
                return Err(SceneError::MetadataSchema(format!("duplicate channel id {}", ch.id)));
            }
        }
        Ok(())
    }

    /// Physical extent of the imaged volume in micrometers.
    pub fn extent_um(&self) -> [f64; 3] {
        [0, 1, 2].map(|k| self.dimensions[k] as f64 * self.voxel_size_um[k])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EntityStats {
    pub volume_um3: f64,
    pub centroid_um: [f64; 3],
    pub aabb: Aabb,
}

/// Entity meshes with a BVH over their boxes. Immutable after build.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    /// Sorted by entity id.
    entities: Vec<EntityMesh>,
    by_id: HashMap<String, usize>,
    /// Indices into `entities` of the meshes that take part in containment.
    queryable: Vec<usize>,
    bvh: Bvh,
}

impl SpatialIndex {
    pub fn build(mut entities: Vec<EntityMesh>) -> SpatialIndex {
        entities.sort_by(|a, b| a.entity_id.cmp(&b.entity_id));
        let by_id = entities.iter().enumerate().map(|(i, e)| (e.entity_id.clone(), i)).collect();
        let queryable: Vec<usize> = entities
            .iter()
            .enumerate()
            .filter(|(_, e)| {
                if !e.watertight {
                    log::warn!(
                        "entity {:?} is not watertight; excluded from containment queries",
                        e.entity_id
                    );
                }
                e.watertight
            })
            .map(|(i, _)| i)
            .collect();
        let boxes: Vec<Aabb> = queryable.iter().map(|&i| entities[i].aabb).collect();
        SpatialIndex { bvh: Bvh::build(&boxes), entities, by_id, queryable }
    }

    pub fn entities(&self) -> &[EntityMesh] {
        &self.entities
    }

    pub fn get(&self, id: &str) -> Option<&EntityMesh> {
        self.by_id.get(id).map(|&i| &self.entities[i])
    }

    /// Smallest-volume entity whose mesh contains `p` (micrometers), ties
    /// broken by id.
    pub fn query_point(&self, p: [f64; 3]) -> Option<&str> {
        self.bvh
            .query(p)
            .into_iter()
            .map(|slot| &self.entities[self.queryable[slot]])
            .filter(|e| e.contains(p))
            .min_by(|a, b| {
                a.signed_volume_um3
                    .total_cmp(&b.signed_volume_um3)
                    .then_with(|| a.entity_id.cmp(&b.entity_id))
            })
            .map(|e| e.entity_id.as_str())
    }

    pub fn entity_stats(&self, id: &str) -> Result<EntityStats, SceneError> {
        let e = self.get(id).ok_or_else(|| SceneError::UnknownEntity(id.to_string()))?;
        Ok(EntityStats { volume_um3: e.signed_volume_um3, centroid_um: e.centroid, aabb: e.aabb })
    }

    /// SHA-256 over entity ids (sorted), vertices and triangles, as hex.
    /// Only exact little-endian bytes are hashed, so equal fixtures give
    /// equal checksums on every platform.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for e in &self.entities {
            h.update(e.entity_id.as_bytes());
            h.update([0u8]);
            h.update((e.vertices.len() as u64).to_le_bytes());
            for v in &e.vertices {
                for c in v {
                    h.update(c.to_le_bytes());
                }
            }
            h.update((e.triangles.len() as u64).to_le_bytes());
            for t in &e.triangles {
                for i in t {
                    h.update(i.to_le_bytes());
                }
            }
        }
        hex::encode(h.finalize())
    }
}

/// Euclidean distance in micrometers.
pub fn measure_distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    crate::protocol::Measurement::new("d", a, b, false).length_um
}

/// A loaded scene directory.
#[derive(Debug, Clone)]
pub struct Scene {
    pub metadata: SceneMetadata,
    pub index: SpatialIndex,
    pub checksum: String,
}

impl Scene {
    pub fn new(metadata: SceneMetadata, entities: Vec<EntityMesh>) -> Result<Scene, SceneError> {
        if entities.is_empty() {
            return Err(SceneError::EmptyScene);
        }
        metadata.validate()?;
        let index = SpatialIndex::build(entities);
        let checksum = index.checksum();
        Ok(Scene { metadata, index, checksum })
    }

    pub fn entities(&self) -> &[EntityMesh] {
        self.index.entities()
    }

    pub fn query_point(&self, p: [f64; 3]) -> Option<&str> {
        self.index.query_point(p)
    }

    pub fn entity_stats(&self, id: &str) -> Result<EntityStats, SceneError> {
        self.index.entity_stats(id)
    }

    pub fn catalog(&self) -> SceneCatalog {
        SceneCatalog {
            name: self.metadata.name.clone(),
            meters_per_micrometer: self.metadata.meters_per_micrometer,
            channels: self.metadata.channels.clone(),
            entities: self
                .entities()
                .iter()
                .map(|e| CatalogEntry {
                    id: e.entity_id.clone(),
                    label: e.label.clone(),
                    volume_um3: e.signed_volume_um3,
                    centroid_um: e.centroid,
                    aabb_min: e.aabb.min,
                    aabb_max: e.aabb.max,
                })
                .collect(),
        }
    }
}

fn read(path: &Path) -> Result<String, SceneError> {
    fs::read_to_string(path).map_err(|source| {
        if source.kind() == io::ErrorKind::NotFound {
            SceneError::MissingFile(path.to_path_buf())
        } else {
            SceneError::Io { path: path.to_path_buf(), source }
        }
    })
}

/// Loads `scene.json` and `entities.obj` from `dir`.
pub fn load_scene(dir: impl AsRef<Path>) -> Result<Scene, SceneError> {
    let dir = dir.as_ref();
    let metadata = SceneMetadata::from_json(&read(&dir.join(METADATA_FILE))?)?;
    let groups = parse_obj(&read(&dir.join(MESH_FILE))?)?;
    let entities =
        groups.into_iter().map(|g| EntityMesh::new(g.id, g.label, g.vertices, g.triangles)).collect();
    Scene::new(metadata, entities)
}
