//! Manifest and feature-file i/o.
//!
//! A dataset on disk is a manifest CSV with header
//! `id,frame_file,video_file,fps,mos` plus one headerless CSV of frame
//! features per video (N rows x D columns) and, optionally, a one-row CSV of
//! video-level features. `video_file` and `mos` columns may be empty. Paths
//! are resolved relative to the manifest's directory.

use std::fs;
use std::path::{Path, PathBuf};

use super::{corpus_dims, VideoRecord};
use crate::error::{Error, Result};
use crate::mat::Matrix;

fn read_feature_rows(path: &Path, id: &str) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|_| Error::record(id, format!("missing feature file {}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::record(id, format!("{}: {e}", path.display())))?;
        let mut row = Vec::with_capacity(rec.len());
        for field in rec.iter() {
            let v: f64 = field.parse().map_err(|_| {
                Error::record(id, format!("{} row {}: bad number `{field}`", path.display(), line))
            })?;
            if !v.is_finite() {
                return Err(Error::record(
                    id,
                    format!("{} row {line}: non-finite value", path.display()),
                ));
            }
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::record(
                    id,
                    format!(
                        "{} row {line}: ragged row of length {} (expected {})",
                        path.display(),
                        row.len(),
                        first.len()
                    ),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::record(id, format!("{} is empty", path.display())));
    }
    Ok(rows)
}

/// Loads a dataset from a manifest CSV. Every validation failure names the
/// offending video id.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<VideoRecord>> {
    let path = path.as_ref();
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Manifest {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;

    let headers = reader
        .headers()
        .map_err(|e| Error::Manifest {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?
        .clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Manifest {
                path: path.to_path_buf(),
                msg: format!("missing column `{name}`"),
            })
    };
    let (c_id, c_frame, c_video, c_fps, c_mos) = (
        col("id")?,
        col("frame_file")?,
        col("video_file")?,
        col("fps")?,
        col("mos")?,
    );

    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Manifest {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        let id = rec.get(c_id).unwrap_or("").to_string();
        if id.is_empty() {
            return Err(Error::Manifest {
                path: path.to_path_buf(),
                msg: "row with empty id".into(),
            });
        }

        let frame_rel = rec.get(c_frame).unwrap_or("");
        if frame_rel.is_empty() {
            return Err(Error::record(&id, "missing frame_file entry"));
        }
        let frame_rows = read_feature_rows(&dir.join(frame_rel), &id)?;
        let frames = Matrix::from_rows(&frame_rows)
            .ok_or_else(|| Error::record(&id, "ragged frame feature rows"))?;

        let video_rel = rec.get(c_video).unwrap_or("");
        let video_feat = if video_rel.is_empty() {
            None
        } else {
            let rows = read_feature_rows(&dir.join(video_rel), &id)?;
            if rows.len() != 1 {
                return Err(Error::record(
                    &id,
                    format!("video feature file must have 1 row, found {}", rows.len()),
                ));
            }
            Some(rows.into_iter().next().unwrap())
        };

        let fps_str = rec.get(c_fps).unwrap_or("");
        let fps: f64 = fps_str
            .parse()
            .map_err(|_| Error::record(&id, format!("bad fps `{fps_str}`")))?;

        let mos_str = rec.get(c_mos).unwrap_or("");
        let mos = if mos_str.is_empty() {
            None
        } else {
            Some(
                mos_str
                    .parse::<f64>()
                    .map_err(|_| Error::record(&id, format!("bad mos `{mos_str}`")))?,
            )
        };

        records.push(VideoRecord::new(id, frames, video_feat, fps, mos)?);
    }
    corpus_dims(&records)?;
    Ok(records)
}

fn write_csv_rows(path: &Path, rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    for row in rows {
        writer
            .write_record(&row)
            .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    }
    writer
        .flush()
        .map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Writes `records` as `manifest.csv` plus `frames/` and `video/` feature
/// files under `dir`, in the same format [`load_manifest`] reads. Floats use
/// shortest round-trip formatting, so reloading reproduces the records
/// exactly. Returns the manifest path.
pub fn save_dataset(records: &[VideoRecord], dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let frames_dir = dir.join("frames");
    let video_dir = dir.join("video");
    fs::create_dir_all(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;
    if records.iter().any(|r| r.video_feat().is_some()) {
        fs::create_dir_all(&video_dir).map_err(|e| Error::io(&video_dir, e))?;
    }

    let manifest_path = dir.join("manifest.csv");
    let mut writer = csv::Writer::from_path(&manifest_path)
        .map_err(|e| Error::io(&manifest_path, std::io::Error::other(e)))?;
    writer
        .write_record(["id", "frame_file", "video_file", "fps", "mos"])
        .map_err(|e| Error::io(&manifest_path, std::io::Error::other(e)))?;

    for r in records {
        let frame_rel = format!("frames/{}.csv", r.id);
        write_csv_rows(
            &dir.join(&frame_rel),
            r.frames()
                .iter_rows()
                .map(|row| row.iter().map(|v| v.to_string()).collect()),
        )?;

        let video_rel = match r.video_feat() {
            Some(v) => {
                let rel = format!("video/{}.csv", r.id);
                write_csv_rows(
                    &dir.join(&rel),
                    std::iter::once(v.iter().map(|x| x.to_string()).collect()),
                )?;
                rel
            }
            None => String::new(),
        };

        writer
            .write_record([
                r.id.as_str(),
                frame_rel.as_str(),
                video_rel.as_str(),
                &r.fps().to_string(),
                &r.diagnostic_mos().map(|m| m.to_string()).unwrap_or_default(),
            ])
            .map_err(|e| Error::io(&manifest_path, std::io::Error::other(e)))?;
    }
    writer.flush().map_err(|e| Error::io(&manifest_path, e))?;
    Ok(manifest_path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn write_file(path: &Path, contents: &str) {
        let mut f = fs::File::create(path).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
    }

    #[test]
    fn loads_manifest_with_optional_fields() {
        let dir = tempfile::tempdir().unwrap();
        write_file(
            &dir.path().join("manifest.csv"),
            "id,frame_file,video_file,fps,mos\n\
             v1,v1.csv,v1_vid.csv,30,0.8\n\
             v2,v2.csv,,25,\n\
             v3,v3.csv,,24,0.1\n",
        );
        write_file(&dir.path().join("v1.csv"), "1,2,3,4\n5,6,7,8\n");
        write_file(&dir.path().join("v1_vid.csv"), "0.5,0.25\n");
        write_file(&dir.path().join("v2.csv"), "0,0,0,0\n");
        write_file(&dir.path().join("v3.csv"), "9,8,7,6\n1,1,1,1\n2,2,2,2\n");

        let records = load_manifest(dir.path().join("manifest.csv")).unwrap();
        assert_eq!(records.len(), 3);
        assert_eq!(records[0].frame_dim(), 4);
        assert_eq!(records[0].video_feat(), Some(&[0.5, 0.25][..]));
        assert_eq!(records[1].diagnostic_mos(), None);
        assert!(!records[1].is_labelled());
        assert_eq!(records[2].n_frames(), 3);
        assert_eq!(records[2].fps(), 24.0);
    }

    #[test]
    fn ragged_row_error_names_the_video() {
        let dir = tempfile::tempdir().unwrap();
        write_file(
            &dir.path().join("manifest.csv"),
            "id,frame_file,video_file,fps,mos\nbadvid,bad.csv,,30,\n",
        );
        write_file(&dir.path().join("bad.csv"), "1,2,3,4\n1,2,3\n");
        let err = load_manifest(dir.path().join("manifest.csv")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("badvid"), "{msg}");
        assert!(msg.contains("ragged"), "{msg}");
    }

    #[test]
    fn missing_feature_file_names_the_video() {
        let dir = tempfile::tempdir().unwrap();
        write_file(
            &dir.path().join("manifest.csv"),
            "id,frame_file,video_file,fps,mos\nlost,nope.csv,,30,\n",
        );
        let err = load_manifest(dir.path().join("manifest.csv")).unwrap_err();
        assert!(err.to_string().contains("lost"));
    }

    #[test]
    fn nonfinite_value_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_file(
            &dir.path().join("manifest.csv"),
            "id,frame_file,video_file,fps,mos\nv,inf.csv,,30,\n",
        );
        write_file(&dir.path().join("inf.csv"), "1,inf\n");
        let err = load_manifest(dir.path().join("manifest.csv")).unwrap_err();
        assert!(err.to_string().contains('v'));
    }

    #[test]
    fn dimension_mismatch_across_videos_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_file(
            &dir.path().join("manifest.csv"),
            "id,frame_file,video_file,fps,mos\na,a.csv,,30,\nb,b.csv,,30,\n",
        );
        write_file(&dir.path().join("a.csv"), "1,2,3\n");
        write_file(&dir.path().join("b.csv"), "1,2\n");
        let err = load_manifest(dir.path().join("manifest.csv")).unwrap_err();
        assert!(err.to_string().contains('b'));
    }

    #[test]
    fn save_then_load_roundtrips_exactly() {
        let records = vec![
            VideoRecord::new(
                "r1",
                Matrix::from_vec(2, 3, vec![0.1, -2.5, 3.0000001, 4.0, 5.5, -0.125]),
                Some(vec![0.123456789012345, 7.0]),
                29.97,
                Some(0.61803398875),
            )
            .unwrap(),
            VideoRecord::new("r2", Matrix::from_vec(1, 3, vec![9.0, 8.0, 7.0]), None, 24.0, None)
                .unwrap(),
        ];
        let dir = tempfile::tempdir().unwrap();
        let manifest = save_dataset(&records, dir.path()).unwrap();
        let back = load_manifest(manifest).unwrap();
        assert_eq!(records, back);
    }
}
