//! Memoized spectral decompositions, shared between tasks in memory and
//! between runs on disk.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use faer::Mat;
use otoc_scaling::{
    build_hamiltonian, eigendecompose, DenseBudget, ModelSpec, SpectralData, SpectralSource,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

const MAGIC: &[u8; 8] = b"OTOCSPC1";
const KEY_PREFIX: &str = "otoc-spectral-v1\n";

/// Hex SHA-256 of the canonical JSON form of `spec`.
pub fn cache_key(spec: &ModelSpec) -> String {
    let json = serde_json::to_string(spec).expect("model specs always serialize");
    let mut h = Sha256::new();
    h.update(KEY_PREFIX.as_bytes());
    h.update(json.as_bytes());
    hex::encode(h.finalize())
}

/// Default on-disk location: `$OTOC_CACHE_DIR`, else `$XDG_CACHE_HOME/otoc`,
/// else `~/.cache/otoc`.
pub fn default_cache_dir() -> PathBuf {
    if let Some(d) = std::env::var_os("OTOC_CACHE_DIR") {
        return PathBuf::from(d);
    }
    if let Some(d) = std::env::var_os("XDG_CACHE_HOME") {
        return PathBuf::from(d).join("otoc");
    }
    match std::env::var_os("HOME") {
        Some(h) => PathBuf::from(h).join(".cache").join("otoc"),
        None => PathBuf::from(".otoc-cache"),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStats {
    /// Decompositions computed from scratch (including recomputes).
    pub computed: usize,
    /// Entries read from disk and accepted.
    pub disk_hits: usize,
    /// Requests served from memory by an earlier task of the same run.
    pub memory_hits: usize,
    /// Disk entries rejected as corrupt and replaced.
    pub recomputed: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct EntryInfo {
    key: String,
    dimension: usize,
    spec: ModelSpec,
}

type Slot = Arc<Mutex<Option<Arc<SpectralData>>>>;

/// Spectral source backed by an optional directory. Each spec is decomposed
/// at most once per run; concurrent requests for the same spec wait for the
/// first one.
pub struct SpectralCache {
    dir: Option<PathBuf>,
    budget: DenseBudget,
    slots: Mutex<HashMap<String, Slot>>,
    stats: Mutex<CacheStats>,
    warnings: Mutex<Vec<String>>,
}

impl SpectralCache {
    pub fn new(dir: Option<PathBuf>, budget: DenseBudget) -> Self {
        Self {
            dir,
            budget,
            slots: Mutex::new(HashMap::new()),
            stats: Mutex::new(CacheStats::default()),
            warnings: Mutex::new(Vec::new()),
        }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn stats(&self) -> CacheStats {
        *self.stats.lock().unwrap()
    }

    pub fn warnings(&self) -> Vec<String> {
        self.warnings.lock().unwrap().clone()
    }

    pub fn entry_path(&self, spec: &ModelSpec) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{}.bin", cache_key(spec))))
    }

    fn warn(&self, msg: String) {
        log::warn!("{msg}");
        self.warnings.lock().unwrap().push(msg);
    }

    fn bump(&self, f: impl FnOnce(&mut CacheStats)) {
        f(&mut self.stats.lock().unwrap());
    }

    fn load_or_compute(&self, spec: &ModelSpec) -> otoc_scaling::Result<Arc<SpectralData>> {
        let h = build_hamiltonian(spec, &self.budget)?;
        let key = cache_key(spec);
        let path = self.dir.as_ref().map(|d| d.join(format!("{key}.bin")));
        if let Some(path) = path.as_ref().filter(|p| p.exists()) {
            match read_entry(path, &h.matrix) {
                Ok((eigenvalues, eigenvectors)) => {
                    self.bump(|s| s.disk_hits += 1);
                    return Ok(Arc::new(SpectralData {
                        eigenvalues,
                        eigenvectors,
                        basis: h.basis,
                        spec: Some(spec.clone()),
                    }));
                }
                Err(why) => {
                    self.warn(format!(
                        "cache entry {} rejected ({why}); recomputing",
                        path.display()
                    ));
                    self.bump(|s| s.recomputed += 1);
                }
            }
        }
        let sd = eigendecompose(&h)?;
        self.bump(|s| s.computed += 1);
        if let Some(path) = path {
            if let Err(e) = write_entry(&path, &key, spec, &sd) {
                self.warn(format!("could not write cache entry {}: {e}", path.display()));
            }
        }
        Ok(Arc::new(sd))
    }
}

impl SpectralSource for SpectralCache {
    fn spectral(&self, spec: &ModelSpec) -> otoc_scaling::Result<Arc<SpectralData>> {
        let slot = self
            .slots
            .lock()
            .unwrap()
            .entry(cache_key(spec))
            .or_default()
            .clone();
        let mut guard = slot.lock().unwrap();
        if let Some(sd) = guard.as_ref() {
            self.bump(|s| s.memory_hits += 1);
            return Ok(sd.clone());
        }
        let sd = self.load_or_compute(spec)?;
        *guard = Some(sd.clone());
        Ok(sd)
    }
}

fn write_entry(path: &Path, key: &str, spec: &ModelSpec, sd: &SpectralData) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let n = sd.dimension();
    let mut buf = Vec::with_capacity(16 + 8 * n * (n + 1));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(n as u64).to_le_bytes());
    for e in &sd.eigenvalues {
        buf.extend_from_slice(&e.to_le_bytes());
    }
    for j in 0..n {
        for i in 0..n {
            buf.extend_from_slice(&sd.eigenvectors[(i, j)].to_le_bytes());
        }
    }
    // Write to a temporary name first so readers never see a partial file.
    let tmp = path.with_extension(format!("bin.{}.tmp", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&buf)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    let info = EntryInfo {
        key: key.to_string(),
        dimension: n,
        spec: spec.clone(),
    };
    fs::write(
        path.with_extension("json"),
        serde_json::to_string_pretty(&info).map_err(std::io::Error::other)?,
    )
}

/// Read an entry and check `U diag(E) Uᵀ` against the freshly built `H`.
fn read_entry(path: &Path, h: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>), String> {
    let bytes = fs::read(path).map_err(|e| e.to_string())?;
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err("bad header".into());
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    if n != h.nrows() {
        return Err(format!("dimension {n} does not match the model ({})", h.nrows()));
    }
    if bytes.len() != 16 + 8 * n * (n + 1) {
        return Err(format!("length {} does not match dimension {n}", bytes.len()));
    }
    let f = |k: usize| f64::from_le_bytes(bytes[16 + 8 * k..24 + 8 * k].try_into().unwrap());
    let eigenvalues: Vec<f64> = (0..n).map(f).collect();
    let eigenvectors = Mat::from_fn(n, n, |i, j| f(n + j * n + i));
    if eigenvalues.iter().any(|e| !e.is_finite()) || eigenvalues.windows(2).any(|w| w[1] < w[0]) {
        return Err("eigenvalues are not finite and ascending".into());
    }
    let sd = SpectralData {
        eigenvalues,
        eigenvectors,
        basis: otoc_scaling::Basis::FullSpinHalfChain { sites: 0 },
        spec: None,
    };
    let scale = otoc_scaling::linalg::max_abs(h.as_ref()).max(1.0);
    let residual = sd.reconstruction_residual(h.as_ref());
    if !(residual <= 1e-10 * scale) {
        return Err(format!("reconstruction residual {residual:e}"));
    }
    let ortho = sd.orthogonality_residual();
    if !(ortho <= 1e-10) {
        return Err(format!("orthogonality residual {ortho:e}"));
    }
    Ok((sd.eigenvalues, sd.eigenvectors))
}

/// Remove every cache entry in `dir`; returns the number of files deleted.
pub fn clean_cache(dir: &Path) -> std::io::Result<usize> {
    if !dir.exists() {
        return Ok(0);
    }
    let mut removed = 0;
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let stem_is_key = path
            .file_stem()
            .and_then(|s| s.to_str())
            .is_some_and(|s| s.len() == 64 && s.bytes().all(|b| b.is_ascii_hexdigit()));
        let ext_ok = matches!(path.extension().and_then(|e| e.to_str()), Some("bin" | "json"));
        if stem_is_key && ext_ok {
            fs::remove_file(&path)?;
            removed += 1;
        }
    }
    Ok(removed)
}
