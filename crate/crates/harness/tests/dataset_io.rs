use image::{Rgb, RgbImage};
use tscc_core::scene::{generate_dataset, generate_scene, SceneSpec};
use tscc_core::ImageDims;
use tscc_harness::config::{DatasetConfig, DatasetKind};
use tscc_harness::dataset::{build_dataset, load_image_dir};

const DIMS: ImageDims = ImageDims::new(3, 32, 64);

fn solid(w: u32, h: u32, v: u8) -> RgbImage {
    RgbImage::from_pixel(w, h, Rgb([v, v, v]))
}

#[test]
fn empty_directory_gives_empty_set() {
    let dir = tempfile::tempdir().unwrap();
    let loaded = load_image_dir(dir.path(), DIMS).unwrap();
    assert!(loaded.images.is_empty());
    assert_eq!(loaded.skipped, 0);
}

#[test]
fn solid_white_png_is_all_ones() {
    let dir = tempfile::tempdir().unwrap();
    solid(50, 20, 255).save(dir.path().join("white.png")).unwrap();
    let loaded = load_image_dir(dir.path(), DIMS).unwrap();
    assert_eq!(loaded.images.len(), 1);
    assert!(loaded.images[0].data().iter().all(|&v| v == 1.0));
    assert_eq!(loaded.images[0].dims(), DIMS);
}

#[test]
fn wide_frame_is_center_cropped_before_scaling() {
    // 900×256 frame: black outer columns that a 2:1 center crop removes,
    // white 512-column middle that it keeps
    let dir = tempfile::tempdir().unwrap();
    let img = RgbImage::from_fn(900, 256, |x, _| {
        if (194..706).contains(&x) {
            Rgb([255; 3])
        } else {
            Rgb([0; 3])
        }
    });
    img.save(dir.path().join("frame.png")).unwrap();
    let x = &load_image_dir(dir.path(), DIMS).unwrap().images[0];
    assert!(x.data().iter().all(|&v| v == 1.0));

    // a wider crop window would pull black into the border columns
    let img = RgbImage::from_fn(900, 256, |x, _| {
        if (200..700).contains(&x) {
            Rgb([255; 3])
        } else {
            Rgb([0; 3])
        }
    });
    img.save(dir.path().join("frame.png")).unwrap();
    let x = &load_image_dir(dir.path(), DIMS).unwrap().images[0];
    assert!(x.at(0, 16, 0) < 1.0);
    assert_eq!(x.at(0, 16, 32), 1.0);
}

#[test]
fn ppm_files_load_and_order_follows_filenames() {
    let dir = tempfile::tempdir().unwrap();
    solid(8, 4, 0).save(dir.path().join("b.ppm")).unwrap();
    solid(8, 4, 255).save(dir.path().join("a.png")).unwrap();
    solid(8, 4, 51).save(dir.path().join("c.png")).unwrap();
    std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
    let loaded = load_image_dir(dir.path(), DIMS).unwrap();
    let firsts: Vec<f64> = loaded.images.iter().map(|x| x.data()[0]).collect();
    assert_eq!(firsts, vec![1.0, 0.0, 0.2]);
}

#[test]
fn undecodable_files_are_skipped_and_counted() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("broken.png"), b"not a png at all").unwrap();
    std::fs::write(dir.path().join("empty.ppm"), b"").unwrap();
    solid(16, 8, 255).save(dir.path().join("ok.png")).unwrap();
    let loaded = load_image_dir(dir.path(), DIMS).unwrap();
    assert_eq!(loaded.images.len(), 1);
    assert_eq!(loaded.skipped, 2);
}

#[test]
fn directory_dataset_holds_out_the_last_files() {
    let dir = tempfile::tempdir().unwrap();
    for i in 0..5u8 {
        solid(16, 8, i * 50)
            .save(dir.path().join(format!("img{i}.png")))
            .unwrap();
    }
    let cfg = DatasetConfig {
        kind: DatasetKind::Directory,
        path: Some(dir.path().to_path_buf()),
        train_count: 10,
        test_count: 2,
        ..DatasetConfig::default()
    };
    let d = build_dataset(&cfg).unwrap();
    assert_eq!(d.train.len(), 3);
    assert_eq!(d.test.len(), 2);
    assert_eq!(d.test[1].image.data()[0], 200.0 / 255.0);
}

#[test]
fn synthetic_dataset_is_reproducible_and_disjoint() {
    let cfg = DatasetConfig {
        train_count: 20,
        test_count: 5,
        ..DatasetConfig::default()
    };
    let a = build_dataset(&cfg).unwrap();
    let b = build_dataset(&cfg).unwrap();
    assert_eq!(a.train, b.train);
    assert_eq!(a.test, b.test);
    assert!(a.test.iter().all(|t| !a.train.contains(t)));
    let spec = SceneSpec::new(DIMS, cfg.scene_seed);
    assert_eq!(a.train, generate_dataset(&spec, 20).unwrap());
    assert_eq!(a.test[0], generate_scene(&spec, cfg.test_offset).unwrap().0);
}
