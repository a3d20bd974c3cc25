use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{read_mask, read_pnm, Image, ImagioError, Mask};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ClassLabel {
    Cancerous,
    Healthy,
}

impl ClassLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Cancerous => "cancerous",
            Self::Healthy => "healthy",
        }
    }

    pub fn parse(token: &str) -> Option<Self> {
        match token {
            "cancerous" => Some(Self::Cancerous),
            "healthy" => Some(Self::Healthy),
            _ => None,
        }
    }

    pub fn is_positive(self) -> bool {
        self == Self::Cancerous
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub label: ClassLabel,
    pub mask: Option<PathBuf>,
}

impl ManifestEntry {
    pub fn load_image(&self) -> Result<Image, ImagioError> {
        read_pnm(&self.path)
    }

    pub fn load_mask(&self) -> Result<Option<Mask>, ImagioError> {
        self.mask.as_deref().map(read_mask).transpose()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    /// Train/test tag. Set by the generator; inferred from a `train.csv` / `test.csv`
    /// file name on load.
    pub split: Option<Split>,
}

impl DatasetManifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn count(&self, label: ClassLabel) -> usize {
        self.entries.iter().filter(|e| e.label == label).count()
    }

    /// Sub-manifest with the entries at `indices`, in that order.
    pub fn select(&self, indices: &[usize], split: Option<Split>) -> DatasetManifest {
        DatasetManifest {
            entries: indices.iter().map(|&i| self.entries[i].clone()).collect(),
            split,
        }
    }
}

const HEADER: [&str; 3] = ["path", "label", "mask"];

/// Reads and validates a `path,label,mask` CSV. Relative paths resolve against
/// the manifest's directory.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest, ImagioError> {
    let text = fs::read(path).map_err(|e| ImagioError::io(path, e))?;
    let root = path.parent().unwrap_or_else(|| Path::new(""));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_slice());

    let headers = reader
        .headers()
        .map_err(|e| ImagioError::Manifest(format!("{}: {e}", path.display())))?;
    if headers.iter().collect::<Vec<_>>() != HEADER {
        return Err(ImagioError::Manifest(format!(
            "{}: header must be `path,label,mask`, found `{}`",
            path.display(),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }

    let mut entries = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| ImagioError::Manifest(format!("row {row}: {e}")))?;
        if record.len() != 3 {
            return Err(ImagioError::Manifest(format!(
                "row {row}: expected 3 fields, found {}",
                record.len()
            )));
        }
        let label = ClassLabel::parse(&record[1]).ok_or_else(|| ImagioError::UnknownLabel {
            row,
            token: record[1].to_string(),
        })?;
        let image_path = root.join(&record[0]);
        let image = read_pnm(&image_path)?;
        let mask_path = match &record[2] {
            "" => None,
            m => Some(root.join(m)),
        };
        if let Some(mp) = &mask_path {
            let mask = read_mask(mp)?;
            if (mask.width(), mask.height()) != (image.width(), image.height()) {
                return Err(ImagioError::MaskMismatch {
                    row,
                    mask_w: mask.width(),
                    mask_h: mask.height(),
                    image_w: image.width(),
                    image_h: image.height(),
                });
            }
        }
        entries.push(ManifestEntry {
            path: image_path,
            label,
            mask: mask_path,
        });
    }

    let split = match path.file_stem().and_then(|s| s.to_str()) {
        Some("train") => Some(Split::Train),
        Some("test") => Some(Split::Test),
        _ => None,
    };
    Ok(DatasetManifest { entries, split })
}

/// Writes a manifest, storing paths relative to the manifest's directory where possible.
pub fn write_manifest(manifest: &DatasetManifest, path: &Path) -> Result<(), ImagioError> {
    let root = path.parent().unwrap_or_else(|| Path::new(""));
    let rel = |p: &Path| -> String { p.strip_prefix(root).unwrap_or(p).to_string_lossy().into_owned() };
    let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
    let csv_err = |e: csv::Error| ImagioError::Manifest(e.to_string());
    writer.write_record(HEADER).map_err(csv_err)?;
    for e in &manifest.entries {
        let mask = e.mask.as_deref().map(rel).unwrap_or_default();
        writer
            .write_record([rel(&e.path).as_str(), e.label.as_str(), mask.as_str()])
            .map_err(csv_err)?;
    }
    let bytes = writer.into_inner().map_err(|e| ImagioError::Manifest(e.to_string()))?;
    fs::write(path, bytes).map_err(|e| ImagioError::io(path, e))
}

/// SHA-256 over labels, image bytes and mask bytes of every entry, as lowercase hex.
pub fn dataset_digest(manifest: &DatasetManifest) -> Result<String, ImagioError> {
    let mut hasher = Sha256::new();
    for e in &manifest.entries {
        hasher.update(e.label.as_str().as_bytes());
        hasher.update(fs::read(&e.path).map_err(|err| ImagioError::io(&e.path, err))?);
        match &e.mask {
            Some(m) => hasher.update(fs::read(m).map_err(|err| ImagioError::io(m, err))?),
            None => hasher.update(b"-"),
        }
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}
