//! Dataset manifests: the `ref,dist,mos,tag` CSV interchange format plus a
//! loader for the TID2013 directory layout.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestRow {
    pub ref_path: PathBuf,
    pub dist_path: PathBuf,
    pub mos: f64,
    pub tag: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub name: String,
    pub rows: Vec<ManifestRow>,
}

const HEADER: [&str; 4] = ["ref", "dist", "mos", "tag"];

/// Parses a manifest CSV. Relative paths resolve against the manifest's
/// directory. Every missing image is reported at once.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let manifest = parse_manifest(&text, base, name)?;
    let missing: Vec<PathBuf> = manifest
        .rows
        .iter()
        .flat_map(|r| [&r.ref_path, &r.dist_path])
        .filter(|p| !p.is_file())
        .cloned()
        .collect();
    if !missing.is_empty() {
        let mut seen = std::collections::BTreeSet::new();
        let unique = missing.into_iter().filter(|p| seen.insert(p.clone())).collect();
        return Err(Error::MissingFiles(unique));
    }
    Ok(manifest)
}

/// Parses manifest text without touching the file system.
pub fn parse_manifest(text: &str, base: &Path, name: String) -> Result<DatasetManifest> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut records = reader.records();
    let header = match records.next() {
        Some(Ok(h)) => h,
        Some(Err(e)) => return Err(Error::Parse { row: 1, message: e.to_string() }),
        None => return Err(Error::Parse { row: 1, message: "empty manifest (missing header)".into() }),
    };
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(Error::Parse { row: 1, message: format!("expected header ref,dist,mos,tag, found {:?}", header.iter().collect::<Vec<_>>()) });
    }
    let resolve = |p: &str| {
        let p = PathBuf::from(p);
        if p.is_absolute() { p } else { base.join(p) }
    };
    let mut rows = Vec::new();
    for (i, rec) in records.enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Parse { row, message: e.to_string() })?;
        if rec.len() != 4 {
            return Err(Error::Parse { row, message: format!("expected 4 fields, found {}", rec.len()) });
        }
        let mos: f64 = rec[2]
            .parse()
            .map_err(|_| Error::Parse { row, message: format!("mos {:?} is not a number", &rec[2]) })?;
        if !mos.is_finite() {
            return Err(Error::Parse { row, message: "mos must be finite".into() });
        }
        rows.push(ManifestRow { ref_path: resolve(&rec[0]), dist_path: resolve(&rec[1]), mos, tag: rec[3].to_string() });
    }
    Ok(DatasetManifest { name, rows })
}

/// Writes a manifest CSV with paths relative to `dir` where possible.
pub fn write_manifest(m: &DatasetManifest, path: &Path) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new(""));
    let mut w = csv::Writer::from_writer(Vec::new());
    let rel = |p: &Path| p.strip_prefix(dir).unwrap_or(p).to_string_lossy().into_owned();
    w.write_record(HEADER).expect("in-memory csv");
    for r in &m.rows {
        w.write_record([rel(&r.ref_path), rel(&r.dist_path), crate::fmt_sig(r.mos), r.tag.clone()])
            .expect("in-memory csv");
    }
    let bytes = w.into_inner().expect("in-memory csv");
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Reads a TID2008/TID2013 style directory: `mos_with_names.txt` lines of
/// `<mos> <distorted name>`, distorted images under `distorted_images/` named
/// `iNN_TT_L.bmp`, references under `reference_images/` as `INN.BMP`.
pub fn load_tid(root: &Path) -> Result<DatasetManifest> {
    let list = root.join("mos_with_names.txt");
    let text = std::fs::read_to_string(&list).map_err(|e| Error::io(&list, e))?;
    let find = |dir: &str, stem: &str| -> PathBuf {
        let d = root.join(dir);
        for ext in ["bmp", "BMP", "png"] {
            for s in [stem.to_string(), stem.to_uppercase(), stem.to_lowercase()] {
                let p = d.join(format!("{s}.{ext}"));
                if p.is_file() {
                    return p;
                }
            }
        }
        d.join(format!("{stem}.bmp"))
    };
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = i + 1;
        let mut parts = line.split_whitespace();
        let (Some(mos), Some(name)) = (parts.next(), parts.next()) else {
            return Err(Error::Parse { row, message: "expected `<mos> <name>`".into() });
        };
        let mos: f64 = mos.parse().map_err(|_| Error::Parse { row, message: format!("mos {mos:?} is not a number") })?;
        let stem = name.rsplit_once('.').map_or(name, |(s, _)| s);
        let fields: Vec<&str> = stem.split('_').collect();
        if fields.len() < 3 || fields[0].len() < 2 {
            return Err(Error::Parse { row, message: format!("unrecognized image name {name:?}") });
        }
        let reference = format!("I{}", &fields[0][1..]);
        rows.push(ManifestRow {
            ref_path: find("reference_images", &reference),
            dist_path: root.join("distorted_images").join(name),
            mos,
            tag: fields[1].to_string(),
        });
    }
    let name = root.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "tid".into());
    Ok(DatasetManifest { name, rows })
}
