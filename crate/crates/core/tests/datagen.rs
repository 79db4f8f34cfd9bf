use image::{GrayImage, Luma};
use ubssd::datagen::{make_scene, Bitmap, SourceSpec};
use ubssd::{Error, ModelDims};

#[test]
fn image_files_drive_the_density() {
    let dir = tempfile::tempdir().unwrap();
    let mut paths = Vec::new();
    for k in 0..2u32 {
        let img = GrayImage::from_fn(8, 8, |x, y| Luma([if (x + k) % 3 == 0 || y == k { 255 } else { 0 }]));
        let path = dir.path().join(format!("img{k}.png"));
        img.save(&path).unwrap();
        paths.push(path);
    }
    let bmp = Bitmap::load(&paths[0]).unwrap();
    assert_eq!((bmp.width(), bmp.height()), (8, 8));
    assert!(bmp.pixels().iter().all(|&p| p == 0.0 || p == 1.0));

    let dims = ModelDims::doubled(2, 2, 1, 3000).unwrap();
    let scene = make_scene(&SourceSpec::ImageDensity { images: paths.clone() }, &dims, 4).unwrap();
    assert_eq!(scene.sources.dim(), 4);
    assert_eq!(scene.observation.dim(), 8);

    let blank = dir.path().join("blank.png");
    GrayImage::new(4, 4).save(&blank).unwrap();
    assert!(matches!(Bitmap::load(&blank), Err(Error::InvalidDensity(_))));
    assert!(matches!(Bitmap::load(&dir.path().join("nope.png")), Err(Error::Decode { .. })));
}

#[test]
fn pgm_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.pgm");
    std::fs::write(&path, b"P2\n3 2\n255\n0 255 0\n128 0 0\n").unwrap();
    let bmp = Bitmap::load(&path).unwrap();
    assert_eq!(bmp.pixels()[1], 1.0);
    assert!((bmp.pixels()[3] - 128.0 / 255.0).abs() < 1e-12);
}

#[test]
fn scene_cache_round_trip() {
    let dims = ModelDims::doubled(3, 2, 2, 500).unwrap();
    let scene = make_scene(&SourceSpec::Geom3d { shapes: vec![] }, &dims, 8).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("obs.bssd");
    scene.observation.write_binary(&path).unwrap();
    assert_eq!(ubssd::TimeSeries::read_binary(&path).unwrap(), scene.observation);
    let json = serde_json::to_string(&scene.mixing).unwrap();
    let back: ubssd::FirFilter = serde_json::from_str(&json).unwrap();
    assert_eq!(back, scene.mixing);
}
