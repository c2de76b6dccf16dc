use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;

use homcap::openml::{fetch_openml, FetchError, FetchOptions, Transport};

fn fixture() -> Vec<u8> {
    std::fs::read(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/banana.arff")).unwrap()
}

/// Serves canned responses and records every requested URL.
struct Canned {
    routes: HashMap<String, Vec<u8>>,
    seen: Mutex<Vec<String>>,
}

impl Transport for Canned {
    fn get(&self, url: &str) -> Result<Vec<u8>, FetchError> {
        self.seen.lock().unwrap().push(url.to_string());
        self.routes.get(url).cloned().ok_or_else(|| FetchError::NotFound(url.to_string()))
    }
}

fn options(dir: &Path) -> FetchOptions {
    FetchOptions {
        cache_dir: dir.to_path_buf(),
        base_url: "http://mirror.test".into(),
        backoff: std::time::Duration::ZERO,
        standardize: true,
    }
}

#[test]
fn banana_download_then_cache() {
    let dir = tempfile::tempdir().unwrap();
    let desc = br#"{"data_set_description":{"id":"1460","name":"banana","file_id":"1586230","default_target_attribute":"Class"}}"#;
    let transport = Canned {
        routes: HashMap::from([
            ("http://mirror.test/api/v1/json/data/1460".to_string(), desc.to_vec()),
            ("http://mirror.test/data/v1/download/1586230".to_string(), fixture()),
        ]),
        seen: Mutex::new(Vec::new()),
    };
    let first = fetch_openml("banana", &options(dir.path()), &transport).unwrap();
    assert!(!first.from_cache);
    assert_eq!(first.id, 1460);
    assert_eq!(first.classes, ["1".to_string(), "2".to_string()]);
    assert_eq!(first.feature_names, ["V1", "V2"]);
    let cloud = &first.cloud;
    assert_eq!((cloud.len(), cloud.dim()), (5300, 2));
    assert_eq!(cloud.labels.iter().filter(|&&y| y == 1).count(), 2376);
    for c in 0..2 {
        let col: Vec<f64> = (0..cloud.len()).map(|i| cloud.points.point(i)[c]).collect();
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / col.len() as f64;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12, "column {c}: {mean} {var}");
    }
    assert_eq!(transport.seen.lock().unwrap().len(), 2);

    let second = fetch_openml("1460", &options(dir.path()), &transport).unwrap();
    assert!(second.from_cache);
    assert_eq!(second.cloud, first.cloud);
    assert_eq!(transport.seen.lock().unwrap().len(), 2);

    let raw = FetchOptions {
        standardize: false,
        ..options(dir.path())
    };
    let unscaled = fetch_openml("banana", &raw, &transport).unwrap();
    assert_eq!(unscaled.cloud.points.point(5299), &[-0.255, -0.142]);
    assert_eq!(unscaled.cloud.labels[5299], 1);
}
