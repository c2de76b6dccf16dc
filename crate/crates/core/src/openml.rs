//! Binary classification datasets from OpenML, with a checksummed disk cache.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::LabeledPointCloud;
use crate::error::{Error, Result};
use crate::ph::PointCloud;

pub const CACHE_ENV: &str = "HOMCAP_CACHE_DIR";
pub const API_BASE: &str = "https://www.openml.org";
pub const MAX_ATTEMPTS: usize = 3;

/// Dataset ids for names that are looked up often.
pub const KNOWN_DATASETS: &[(&str, u64)] = &[
    ("banana", 1460),
    ("phoneme", 1489),
    ("balance-scale", 11),
    ("delta_ailerons", 803),
];

#[derive(Debug)]
pub enum FetchError {
    NotFound(String),
    /// Worth retrying (connection failures, 5xx responses).
    Transient(String),
}

/// Fetches a URL; injectable so tests never touch the network.
pub trait Transport: Sync {
    fn get(&self, url: &str) -> std::result::Result<Vec<u8>, FetchError>;
}

pub struct HttpTransport {
    pub timeout: Duration,
}

impl Default for HttpTransport {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(60),
        }
    }
}

impl Transport for HttpTransport {
    fn get(&self, url: &str) -> std::result::Result<Vec<u8>, FetchError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let mut resp = agent
            .get(url)
            .call()
            .map_err(|e| FetchError::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        match status {
            200..=299 => resp
                .body_mut()
                .with_config()
                .limit(512 * 1024 * 1024)
                .read_to_vec()
                .map_err(|e| FetchError::Transient(e.to_string())),
            404 | 412 => Err(FetchError::NotFound(format!("{url} returned {status}"))),
            500..=599 | 429 => Err(FetchError::Transient(format!("{url} returned {status}"))),
            _ => Err(FetchError::NotFound(format!("{url} returned {status}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FetchOptions {
    pub cache_dir: PathBuf,
    pub base_url: String,
    pub backoff: Duration,
    pub standardize: bool,
}

impl FetchOptions {
    /// Cache directory from the environment, falling back to `.homcap-cache`.
    pub fn from_env() -> Self {
        let cache_dir = std::env::var_os(CACHE_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(".homcap-cache"));
        Self {
            cache_dir,
            base_url: API_BASE.into(),
            backoff: Duration::from_millis(500),
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpenmlDataset {
    pub id: u64,
    pub name: String,
    pub feature_names: Vec<String>,
    /// Original class values, in the order mapped to labels 0 and 1.
    pub classes: [String; 2],
    pub cloud: LabeledPointCloud,
    pub from_cache: bool,
}

fn with_retries<T>(
    backoff: Duration,
    mut f: impl FnMut() -> std::result::Result<T, FetchError>,
) -> Result<T> {
    let mut last = String::new();
    for attempt in 0..MAX_ATTEMPTS {
        match f() {
            Ok(v) => return Ok(v),
            Err(FetchError::NotFound(m)) => return Err(Error::NotFound(m)),
            Err(FetchError::Transient(m)) => {
                last = m;
                if attempt + 1 < MAX_ATTEMPTS {
                    std::thread::sleep(backoff * (1 << attempt));
                }
            }
        }
    }
    Err(Error::Network(format!("{MAX_ATTEMPTS} attempts failed: {last}")))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn cache_paths(dir: &Path, id: u64) -> (PathBuf, PathBuf, PathBuf) {
    (
        dir.join(format!("openml-{id}.arff")),
        dir.join(format!("openml-{id}.sha256")),
        dir.join(format!("openml-{id}.json")),
    )
}

/// Cached metadata next to the raw file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheMeta {
    pub id: u64,
    pub name: String,
    pub target: Option<String>,
}

/// Stores raw dataset bytes with their checksum.
pub fn write_cache(dir: &Path, meta: &CacheMeta, raw: &[u8]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let (data, sum, info) = cache_paths(dir, meta.id);
    std::fs::write(&data, raw)?;
    std::fs::write(&sum, sha256_hex(raw))?;
    std::fs::write(&info, serde_json::to_string_pretty(meta)?)?;
    Ok(())
}

/// Reads a cache entry, verifying its checksum. `Ok(None)` if absent.
pub fn read_cache(dir: &Path, id: u64) -> Result<Option<(CacheMeta, Vec<u8>)>> {
    let (data, sum, info) = cache_paths(dir, id);
    if !data.exists() || !sum.exists() || !info.exists() {
        return Ok(None);
    }
    let raw = std::fs::read(&data)?;
    let expected = std::fs::read_to_string(&sum)?.trim().to_string();
    let found = sha256_hex(&raw);
    if expected != found {
        return Err(Error::CacheIntegrity {
            path: data.clone(),
            expected,
            found,
        });
    }
    let meta: CacheMeta = serde_json::from_str(&std::fs::read_to_string(info)?)?;
    Ok(Some((meta, raw)))
}

fn resolve_id(name_or_id: &str, opts: &FetchOptions, transport: &dyn Transport) -> Result<u64> {
    if let Ok(id) = name_or_id.parse::<u64>() {
        return Ok(id);
    }
    if let Some(&(_, id)) = KNOWN_DATASETS.iter().find(|(n, _)| *n == name_or_id) {
        return Ok(id);
    }
    let url = format!(
        "{}/api/v1/json/data/list/data_name/{}/limit/1/status/active",
        opts.base_url, name_or_id
    );
    let body = with_retries(opts.backoff, || transport.get(&url))?;
    let v: serde_json::Value = serde_json::from_slice(&body)?;
    v["data"]["dataset"][0]["did"]
        .as_u64()
        .or_else(|| v["data"]["dataset"][0]["did"].as_str().and_then(|s| s.parse().ok()))
        .ok_or_else(|| Error::NotFound(format!("no OpenML dataset named {name_or_id:?}")))
}

/// Fetches (or reads from cache) a binary-labeled dataset by name or id.
pub fn fetch_openml(name_or_id: &str, opts: &FetchOptions, transport: &dyn Transport) -> Result<OpenmlDataset> {
    let id = resolve_id(name_or_id, opts, transport)?;
    let (meta, raw, from_cache) = match read_cache(&opts.cache_dir, id)? {
        Some((meta, raw)) => (meta, raw, true),
        None => {
            let url = format!("{}/api/v1/json/data/{id}", opts.base_url);
            let body = with_retries(opts.backoff, || transport.get(&url))?;
            let v: serde_json::Value = serde_json::from_slice(&body)?;
            let desc = &v["data_set_description"];
            let file_id = desc["file_id"]
                .as_str()
                .map(str::to_string)
                .or_else(|| desc["file_id"].as_u64().map(|x| x.to_string()))
                .ok_or_else(|| Error::Parse(format!("dataset {id}: description lacks file_id")))?;
            let meta = CacheMeta {
                id,
                name: desc["name"].as_str().unwrap_or(name_or_id).to_string(),
                target: desc["default_target_attribute"].as_str().map(str::to_string),
            };
            let url = format!("{}/data/v1/download/{file_id}", opts.base_url);
            let raw = with_retries(opts.backoff, || transport.get(&url))?;
            write_cache(&opts.cache_dir, &meta, &raw)?;
            (meta, raw, false)
        }
    };
    let text = String::from_utf8_lossy(&raw);
    let arff = parse_arff(&text)?;
    let mut ds = arff.to_binary(meta.target.as_deref())?;
    if opts.standardize {
        ds.0 = standardize(&ds.0)?;
    }
    let (points, labels, feature_names, classes) = ds;
    Ok(OpenmlDataset {
        id,
        name: meta.name,
        feature_names,
        classes,
        cloud: LabeledPointCloud::new(points, labels)?,
        from_cache,
    })
}

/// Zero mean and unit (population) variance per coordinate; constant
/// coordinates are only centered.
pub fn standardize(cloud: &PointCloud) -> Result<PointCloud> {
    let (n, d) = (cloud.len(), cloud.dim());
    let mut mean = vec![0.0; d];
    for p in cloud.points() {
        for k in 0..d {
            mean[k] += p[k] / n as f64;
        }
    }
    let mut var = vec![0.0; d];
    for p in cloud.points() {
        for k in 0..d {
            var[k] += (p[k] - mean[k]).powi(2) / n as f64;
        }
    }
    let sd: Vec<f64> = var.iter().map(|v| if *v > 0.0 { v.sqrt() } else { 1.0 }).collect();
    let coords = cloud
        .points()
        .flat_map(|p| (0..d).map(|k| (p[k] - mean[k]) / sd[k]).collect::<Vec<_>>())
        .collect();
    PointCloud::from_flat(d, coords)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arff {
    pub relation: String,
    /// (name, nominal values if nominal)
    pub attributes: Vec<(String, Option<Vec<String>>)>,
    pub rows: Vec<Vec<String>>,
}

fn unquote(s: &str) -> String {
    let s = s.trim();
    if s.len() >= 2 && ((s.starts_with('\'') && s.ends_with('\'')) || (s.starts_with('"') && s.ends_with('"'))) {
        s[1..s.len() - 1].to_string()
    } else {
        s.to_string()
    }
}

/// Dense ARFF with numeric and nominal attributes.
pub fn parse_arff(text: &str) -> Result<Arff> {
    let mut relation = String::new();
    let mut attributes = Vec::new();
    let mut rows = Vec::new();
    let mut in_data = false;
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        if in_data {
            if line.starts_with('{') {
                return Err(Error::Parse("sparse ARFF rows are not supported".into()));
            }
            let mut rdr = csv::ReaderBuilder::new()
                .has_headers(false)
                .quote(b'\'')
                .from_reader(line.as_bytes());
            let rec = rdr
                .records()
                .next()
                .ok_or_else(|| Error::Parse(format!("line {}: empty row", ln + 1)))??;
            let row: Vec<String> = rec.iter().map(unquote).collect();
            if row.len() != attributes.len() {
                return Err(Error::Parse(format!(
                    "line {}: {} values for {} attributes",
                    ln + 1,
                    row.len(),
                    attributes.len()
                )));
            }
            rows.push(row);
            continue;
        }
        let lower = line.to_ascii_lowercase();
        if lower.starts_with("@relation") {
            relation = unquote(&line[9..]);
        } else if lower.starts_with("@attribute") {
            let rest = line[10..].trim();
            let (name, ty) = if let Some(stripped) = rest.strip_prefix('\'') {
                let end = stripped
                    .find('\'')
                    .ok_or_else(|| Error::Parse(format!("line {}: unterminated name", ln + 1)))?;
                (stripped[..end].to_string(), stripped[end + 1..].trim())
            } else {
                let mut it = rest.splitn(2, char::is_whitespace);
                (it.next().unwrap_or("").to_string(), it.next().unwrap_or("").trim())
            };
            let nominal = if ty.starts_with('{') {
                let inner = ty.trim_start_matches('{').trim_end_matches('}');
                Some(inner.split(',').map(unquote).collect())
            } else {
                None
            };
            attributes.push((name, nominal));
        } else if lower.starts_with("@data") {
            in_data = true;
        }
    }
    if attributes.is_empty() {
        return Err(Error::Parse("no attributes".into()));
    }
    Ok(Arff {
        relation,
        attributes,
        rows,
    })
}

type BinaryData = (PointCloud, Vec<u8>, Vec<String>, [String; 2]);

impl Arff {
    /// Numeric features and a two-valued target (the named attribute or the
    /// last one). Class values are mapped to 0 and 1 in sorted order.
    pub fn to_binary(&self, target: Option<&str>) -> Result<BinaryData> {
        let t = match target {
            Some(name) => self
                .attributes
                .iter()
                .position(|a| a.0 == name)
                .ok_or_else(|| Error::Parse(format!("target attribute {name:?} not found")))?,
            None => self.attributes.len() - 1,
        };
        let mut classes: Vec<String> = self.rows.iter().map(|r| r[t].clone()).collect();
        classes.sort();
        classes.dedup();
        if classes.len() != 2 {
            return Err(Error::NonBinaryLabels(classes.len()));
        }
        let features: Vec<usize> = (0..self.attributes.len()).filter(|&i| i != t).collect();
        if let Some(&bad) = features.iter().find(|&&i| self.attributes[i].1.is_some()) {
            return Err(Error::InvalidInput(format!(
                "feature {:?} is not numeric",
                self.attributes[bad].0
            )));
        }
        let mut coords = Vec::with_capacity(self.rows.len() * features.len());
        let mut labels = Vec::with_capacity(self.rows.len());
        for (r, row) in self.rows.iter().enumerate() {
            for &i in &features {
                let v: f64 = row[i].trim().parse().map_err(|_| {
                    Error::Parse(format!("row {}: bad value {:?}", r + 1, row[i]))
                })?;
                coords.push(v);
            }
            labels.push(u8::from(row[t] == classes[1]));
        }
        let names = features.iter().map(|&i| self.attributes[i].0.clone()).collect();
        Ok((
            PointCloud::from_flat(features.len(), coords)?,
            labels,
            names,
            [classes[0].clone(), classes[1].clone()],
        ))
    }
}
