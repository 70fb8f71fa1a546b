use std::path::PathBuf;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use tissuelink_core::scene::{load_scene, SceneError};

fn scene_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/scenes").join(name)
}

#[test]
fn unit_cube_volume_is_exact() {
    let scene = load_scene(scene_dir("unit_cube")).unwrap();
    let stats = scene.entity_stats("cube_1").unwrap();
    assert_eq!(stats.volume_um3, 1.0);
    assert_eq!(stats.centroid_um, [0.5, 0.5, 0.5]);
    assert_eq!(scene.query_point([0.5, 0.5, 0.5]), Some("cube_1"));
    assert_eq!(scene.query_point([1.5, 0.5, 0.5]), None);
}

#[test]
fn icosphere_volume_and_containment() {
    let scene = load_scene(scene_dir("icosphere")).unwrap();
    let r = 10.0;
    let volume = scene.entity_stats("sphere_1").unwrap().volume_um3;
    let sphere = 4.0 / 3.0 * std::f64::consts::PI * r * r * r;
    assert!((volume - sphere).abs() / sphere < 0.02, "{volume} vs {sphere}");

    let mut rng = StdRng::seed_from_u64(11);
    let mut checked = 0;
    for _ in 0..10_000 {
        let p = [0; 3].map(|_| rng.random_range(-1.3 * r..1.3 * r));
        let d = p.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (d - r).abs() <= 0.02 * r {
            continue;
        }
        assert_eq!(scene.query_point(p).is_some(), d < r, "{p:?} at distance {d}");
        checked += 1;
    }
    assert!(checked > 9_000);
}

#[test]
fn nested_cubes_prefer_the_inner_one() {
    let scene = load_scene(scene_dir("nested")).unwrap();
    let mut rng = StdRng::seed_from_u64(5);
    for _ in 0..2_000 {
        let p = [0; 3].map(|_| rng.random_range(4.001..5.999));
        assert_eq!(scene.query_point(p), Some("inner"));
        let q = [rng.random_range(0.01..3.99), rng.random_range(0.01..9.99), rng.random_range(0.01..9.99)];
        assert_eq!(scene.query_point(q), Some("outer"));
    }
}

#[test]
fn demo_catalog_lists_every_entity() {
    let scene = load_scene(scene_dir("demo")).unwrap();
    let catalog = scene.catalog();
    let ids: Vec<&str> = catalog.entities.iter().map(|e| e.id.as_str()).collect();
    assert_eq!(ids, ["cell_1", "cube_1", "tubule_1"]);
    assert_eq!(catalog.entities[1].volume_um3, 1000.0);
    assert_eq!(catalog.meters_per_micrometer, 0.01);
    assert_eq!(scene.checksum, load_scene(scene_dir("demo")).unwrap().checksum);
    assert_ne!(scene.checksum, load_scene(scene_dir("nested")).unwrap().checksum);
}

#[test]
fn load_errors_are_specific() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(scene_dir("unit_cube").join("scene.json"), dir.path().join("scene.json")).unwrap();
    assert!(matches!(load_scene(dir.path()), Err(SceneError::MissingFile(_))));

    std::fs::write(dir.path().join("entities.obj"), "v 0 0 0\nv 1 0 0\nv 0 1 0\no a\nf 1 2 9\n").unwrap();
    match load_scene(dir.path()) {
        Err(SceneError::ObjParse { line, .. }) => assert_eq!(line, 5),
        other => panic!("{other:?}"),
    }
}
