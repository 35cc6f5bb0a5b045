use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::image::probe_png;
use crate::error::{Error, Result};

const HEADER: &str = "# sicr-manifest v1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub image_id: String,
    pub path: PathBuf,
    pub width: usize,
    pub height: usize,
}

/// Ordered list of dataset images for one split.
///
/// Entries are sorted by `image_id` and ids are unique.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub split_tag: String,
    entries: Vec<ManifestEntry>,
}

fn is_png(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

/// Scans `dir` (non-recursively) for PNG files.
pub fn build_manifest(dir: impl AsRef<Path>, split_tag: &str) -> Result<DatasetManifest> {
    let dir = dir.as_ref();
    let read = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::new();
    for item in read {
        let path = item.map_err(|e| Error::io(dir, e))?.path();
        if !path.is_file() || !is_png(&path) {
            continue;
        }
        let image_id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::Manifest(format!("non-UTF-8 file name {}", path.display())))?
            .to_string();
        let (width, height) = probe_png(&path)?;
        entries.push(ManifestEntry {
            image_id,
            path,
            width,
            height,
        });
    }
    if entries.is_empty() {
        return Err(Error::EmptyDataset(format!("no PNG files in {}", dir.display())));
    }
    DatasetManifest::new(split_tag, entries)
}

impl DatasetManifest {
    pub fn new(split_tag: &str, mut entries: Vec<ManifestEntry>) -> Result<Self> {
        if split_tag.is_empty() || split_tag.contains(char::is_whitespace) {
            return Err(Error::Manifest(format!("invalid split tag {split_tag:?}")));
        }
        entries.sort_by(|a, b| a.image_id.cmp(&b.image_id));
        for pair in entries.windows(2) {
            if pair[0].image_id == pair[1].image_id {
                return Err(Error::DuplicateImageId(pair[0].image_id.clone()));
            }
        }
        for e in &entries {
            if e.image_id.contains(['\t', '\n']) || e.path.to_string_lossy().contains(['\t', '\n']) {
                return Err(Error::Manifest(format!("tab or newline in entry {:?}", e.image_id)));
            }
        }
        Ok(DatasetManifest {
            split_tag: split_tag.to_string(),
            entries,
        })
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn find(&self, image_id: &str) -> Option<&ManifestEntry> {
        self.entries
            .binary_search_by(|e| e.image_id.as_str().cmp(image_id))
            .ok()
            .map(|i| &self.entries[i])
    }

    /// Manifest restricted to the first `n` entries.
    pub fn truncated(&self, n: usize) -> DatasetManifest {
        DatasetManifest {
            split_tag: self.split_tag.clone(),
            entries: self.entries[..n.min(self.entries.len())].to_vec(),
        }
    }

    /// Tab-separated text: a header, the split tag, then one
    /// `image_id, width, height, path` line per entry.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{HEADER}");
        let _ = writeln!(out, "# split\t{}", self.split_tag);
        let _ = writeln!(out, "# image_id\twidth\theight\tpath");
        for e in &self.entries {
            let _ = writeln!(out, "{}\t{}\t{}\t{}", e.image_id, e.width, e.height, e.path.display());
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(HEADER) {
            return Err(Error::Manifest("missing header line".into()));
        }
        let split = lines
            .next()
            .and_then(|l| l.strip_prefix("# split\t"))
            .ok_or_else(|| Error::Manifest("missing split line".into()))?;
        let mut entries = Vec::new();
        for line in lines {
            if line.starts_with('#') || line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.splitn(4, '\t').collect();
            let [id, w, h, path] = fields[..] else {
                return Err(Error::Manifest(format!("bad line {line:?}")));
            };
            let num = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| Error::Manifest(format!("bad dimension {s:?}")))
            };
            entries.push(ManifestEntry {
                image_id: id.to_string(),
                width: num(w)?,
                height: num(h)?,
                path: PathBuf::from(path),
            });
        }
        if entries.is_empty() {
            return Err(Error::EmptyDataset("manifest has no entries".into()));
        }
        let m = DatasetManifest::new(split, entries)?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::fsutil::write_atomic(path.as_ref(), self.to_text().as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Ids grouped by dimensions, used for sanity reporting.
    pub fn size_histogram(&self) -> BTreeMap<(usize, usize), usize> {
        let mut h = BTreeMap::new();
        for e in &self.entries {
            *h.entry((e.width, e.height)).or_insert(0) += 1;
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::Image;

    fn populate(dir: &Path, names: &[&str]) {
        for (i, n) in names.iter().enumerate() {
            Image::filled(4 + i, 3, 0.25).save_png(dir.join(n)).unwrap();
        }
    }

    #[test]
    fn sorted_and_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        populate(dir.path(), &["c.png", "a.png", "b.png"]);
        std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let m = build_manifest(dir.path(), "train").unwrap();
        let ids: Vec<_> = m.entries().iter().map(|e| e.image_id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert_eq!(m.entries()[0].width, 5);
        let again = build_manifest(dir.path(), "train").unwrap();
        assert_eq!(m.to_text(), again.to_text());
        assert_eq!(DatasetManifest::parse(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn empty_directory_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = build_manifest(dir.path(), "val").unwrap_err();
        assert!(matches!(err, Error::EmptyDataset(_)));
        assert!(err.to_string().contains("empty dataset"));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let e = ManifestEntry {
            image_id: "x".into(),
            path: "x.png".into(),
            width: 1,
            height: 1,
        };
        let err = DatasetManifest::new("train", vec![e.clone(), e]).unwrap_err();
        assert!(matches!(err, Error::DuplicateImageId(_)));
    }
}
