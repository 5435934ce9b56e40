use std::io::{Seek, SeekFrom, Write};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use simrender_core::interchange::*;
use simrender_core::math::{Mat4, Vec3};

fn region(tag: &str) -> String {
    format!("simrender-test-{}-{tag}", std::process::id())
}

fn roster(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../assets/golden/table_2node.hex")
}

/// Column-major `Translate(k, 0, 0) · RotateZ(theta)` written out by hand.
fn stub_matrix(k: f64, theta: f64) -> [f64; 16] {
    let (s, c) = theta.sin_cos();
    [c, s, 0.0, 0.0, -s, c, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, k, 0.0, 0.0, 1.0]
}

/// Region bytes built field by field from the layout description.
fn expected_region(names: &[&str], generation: u64, matrices: &[[f64; 16]]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&0x4156_4931u32.to_le_bytes());
    out.extend_from_slice(&1u32.to_le_bytes());
    out.extend_from_slice(&(names.len() as u32).to_le_bytes());
    out.extend_from_slice(&[0; 4]);
    out.extend_from_slice(&generation.to_le_bytes());
    out.extend_from_slice(&[0; 40]);
    for (name, m) in names.iter().zip(matrices) {
        let mut field = [0u8; 64];
        field[..name.len()].copy_from_slice(name.as_bytes());
        out.extend_from_slice(&field);
        for v in m {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

fn without_lock(mut bytes: Vec<u8>) -> Vec<u8> {
    bytes[24..64].fill(0);
    bytes
}

#[test]
fn three_node_layout_and_identity_start() {
    let name = region("layout");
    let w = create_table(&name, &roster(&["a", "b", "c"]), CreateMode::Reclaim).unwrap();
    assert_eq!(w.region_bytes().len(), 448);
    assert_eq!(std::fs::metadata(region_path(&name)).unwrap().len(), 448);
    assert_eq!(w.generation(), 0);
    let r = attach_table(&name).unwrap();
    let snap = r.read_frame().unwrap();
    assert_eq!(snap.generation, 0);
    assert_eq!(snap.transforms.len(), 3);
    assert!(snap.transforms.iter().all(|(_, m)| *m == Mat4::IDENTITY));
    assert_eq!(r.names(), &roster(&["a", "b", "c"])[..]);
}

#[test]
fn generation_advances_by_two_per_write() {
    let name = region("gen");
    let names = roster(&["a", "b"]);
    let mut w = create_table(&name, &names, CreateMode::Reclaim).unwrap();
    let r = attach_table(&name).unwrap();
    let before = r.read_frame().unwrap();
    w.write_frame(&[("a", Mat4::IDENTITY), ("b", Mat4::IDENTITY)]).unwrap();
    let after = r.read_frame().unwrap();
    assert_eq!(after.generation, 2);
    assert_eq!(after.transforms, before.transforms);
    w.write_frame(&[("b", Mat4::IDENTITY)]).unwrap();
    w.write_frame(&[("a", Mat4::IDENTITY)]).unwrap();
    assert_eq!(r.read_frame().unwrap().generation, 6);
}

#[test]
fn stub_poses_arrive_exactly() {
    let name = region("stub");
    let names = roster(&["n0", "n1", "n2", "n3"]);
    let mut w = create_table(&name, &names, CreateMode::Reclaim).unwrap();
    let r = attach_table(&name).unwrap();
    w.write_frame(&physics_stub_step(7, &names)).unwrap();
    let snap = r.read_frame().unwrap();
    for (k, (n, m)) in snap.transforms.iter().enumerate() {
        assert_eq!(n, &names[k]);
        let expect = stub_matrix(k as f64, 0.7 + k as f64);
        for (i, e) in expect.iter().enumerate() {
            assert_eq!(m.m[i], *e as f32 as f64, "{n}[{i}]");
        }
    }
}

#[test]
fn stub_matches_independent_product() {
    let names = roster(&["a", "b", "c"]);
    let poses = physics_stub_step(10, &names);
    let expect = stub_matrix(2.0, 3.0);
    for (got, e) in poses[2].1.m.iter().zip(expect) {
        assert!((got - e).abs() < 1e-15);
    }
    let moved = poses[2].1.transform_point(Vec3::new(1.0, 0.0, 0.0));
    assert!((moved - Vec3::new(2.0 + 3f64.cos(), 3f64.sin(), 0.0)).length() < 1e-15);
    assert_eq!(physics_stub_step(0, &names)[0].1, Mat4::IDENTITY);
}

#[test]
fn unknown_name_leaves_region_untouched() {
    let name = region("unknown");
    let mut w = create_table(&name, &roster(&["a", "b"]), CreateMode::Reclaim).unwrap();
    w.write_frame(&[("a", Mat4::translation(Vec3::X))]).unwrap();
    let before = w.region_bytes();
    let err = w.write_frame(&[("b", Mat4::translation(Vec3::Y)), ("ghost", Mat4::IDENTITY)]).unwrap_err();
    assert!(matches!(err, InterchangeError::UnknownName(ref n) if n == "ghost"));
    assert_eq!(w.region_bytes(), before);
    assert_eq!(w.generation(), 2);
}

#[test]
fn roster_and_region_validation() {
    assert!(matches!(create_table(&region("dup"), &roster(&["x", "x"]), CreateMode::Reclaim), Err(InterchangeError::DuplicateName(_))));
    assert!(matches!(create_table("a/b", &roster(&["x"]), CreateMode::Reclaim), Err(InterchangeError::InvalidRegionName(_))));
    let name = region("exists");
    let _w = create_table(&name, &roster(&["x"]), CreateMode::Exclusive).unwrap();
    assert!(matches!(create_table(&name, &roster(&["x"]), CreateMode::Exclusive), Err(InterchangeError::Exists { .. })));
    assert!(attach_table(&region("missing")).is_err());
}

#[test]
fn wrong_magic_or_version_is_incompatible() {
    for (offset, bytes) in [(0u64, 0xdead_beefu32), (4, 2)] {
        let name = region(&format!("magic{offset}"));
        let _w = create_table(&name, &roster(&["x"]), CreateMode::Reclaim).unwrap();
        let mut f = std::fs::OpenOptions::new().write(true).open(region_path(&name)).unwrap();
        f.seek(SeekFrom::Start(offset)).unwrap();
        f.write_all(&bytes.to_le_bytes()).unwrap();
        drop(f);
        assert!(matches!(attach_table(&name), Err(InterchangeError::Incompatible(_))));
    }
}

#[test]
fn writer_removes_region_on_drop() {
    let name = region("drop");
    let w = create_table(&name, &roster(&["x"]), CreateMode::Reclaim).unwrap();
    let r = attach_table(&name).unwrap();
    assert!(r.is_attached());
    drop(w);
    assert!(!region_path(&name).exists());
    assert!(!r.is_attached());
}

#[test]
fn two_node_table_matches_golden_dump() {
    let name = region("golden");
    let names = ["base", "arm"];
    let mut w = create_table(&name, &roster(&names), CreateMode::Reclaim).unwrap();
    w.write_frame(&physics_stub_step(7, &roster(&names))).unwrap();
    let bytes = w.region_bytes();
    let expect = expected_region(&names, 2, &[stub_matrix(0.0, 0.7), stub_matrix(1.0, 1.7)]);
    assert_eq!(bytes, expect);
    let dump = hex_dump(&bytes);
    if std::env::var_os("SIMRENDER_BLESS").is_some() {
        std::fs::create_dir_all(golden_path().parent().unwrap()).unwrap();
        std::fs::write(golden_path(), &dump).unwrap();
    }
    assert_eq!(dump, std::fs::read_to_string(golden_path()).unwrap());
}

#[test]
fn reader_never_writes_the_region() {
    let name = region("readonly");
    let names = roster(&["a", "b", "c"]);
    let mut w = create_table(&name, &names, CreateMode::Reclaim).unwrap();
    w.write_frame(&physics_stub_step(3, &names)).unwrap();
    let r = attach_table(&name).unwrap();
    let before = without_lock(r.region_bytes());
    for _ in 0..1000 {
        r.read_frame().unwrap();
    }
    assert_eq!(without_lock(r.region_bytes()), before);
    assert_eq!(without_lock(w.region_bytes()), before);
}

#[test]
fn hammered_reads_are_never_torn() {
    let name = region("hammer");
    let names = roster(&["probe", "a", "b", "c", "d", "e", "f", "g"]);
    let mut w = create_table(&name, &names, CreateMode::Reclaim).unwrap();
    let r = attach_table(&name).unwrap();
    let stop = Arc::new(AtomicBool::new(false));
    let writer = {
        let stop = stop.clone();
        let names = names.clone();
        std::thread::spawn(move || {
            let mut seq = 0u32;
            while !stop.load(Ordering::Relaxed) {
                seq += 1;
                let frame: Vec<(String, Mat4)> = names
                    .iter()
                    .enumerate()
                    .map(|(k, n)| {
                        let mut m = Mat4::rotation_z(seq as f64 * 0.01 + k as f64);
                        m.set(0, 3, seq as f64);
                        (n.clone(), m)
                    })
                    .collect();
                w.write_frame(&frame).unwrap();
            }
            seq
        })
    };
    let (mut torn, mut reads, mut contention, mut distinct) = (0, 0, 0, 0);
    let mut last = None;
    while reads < 100_000 {
        let snap = match r.read_frame() {
            Ok(s) => s,
            Err(InterchangeError::Contention(_)) => {
                contention += 1;
                continue;
            }
            Err(e) => panic!("{e}"),
        };
        reads += 1;
        let sentinel = snap.get("probe").unwrap().get(0, 3);
        let consistent = snap.generation % 2 == 0
            && sentinel == (snap.generation / 2) as f64
            && snap.transforms.iter().all(|(_, m)| m.get(0, 3) == sentinel);
        torn += !consistent as usize;
        if last != Some(snap.generation) {
            distinct += 1;
            last = Some(snap.generation);
        }
    }
    stop.store(true, Ordering::Relaxed);
    let writes = writer.join().unwrap();
    assert_eq!(torn, 0);
    assert!(writes > 1 && distinct > 1, "writes {writes}, distinct generations {distinct}");
    assert!(contention < reads, "{contention} contended reads");
}
