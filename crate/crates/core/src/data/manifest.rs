use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// JSON list of scenes. Relative paths are resolved against the manifest's
/// own directory when loaded from disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub scenes: Vec<SceneEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneEntry {
    pub scene_id: String,
    /// PLY point cloud.
    pub cloud: PathBuf,
    /// Precomputed per-point LGSPFEAT features.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<PathBuf>,
    /// Camera JSON files used for feature projection.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub views: Vec<PathBuf>,
    /// Ground-truth LGSPLBL file. Takes precedence over a `label` PLY property.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
}

impl DatasetManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: DatasetManifest =
            serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        manifest.resolve_relative_to(base);
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    fn resolve_relative_to(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for scene in &mut self.scenes {
            fix(&mut scene.cloud);
            scene.features.as_mut().map(fix);
            scene.labels.as_mut().map(fix);
            scene.views.iter_mut().for_each(fix);
        }
    }

    /// Unique scene IDs and every referenced file present.
    pub fn validate(&self) -> Result<()> {
        if self.scenes.is_empty() {
            return Err(Error::invalid("manifest lists no scenes"));
        }
        let mut seen = HashSet::new();
        for scene in &self.scenes {
            if !seen.insert(scene.scene_id.as_str()) {
                return Err(Error::invalid(format!("duplicate scene_id {}", scene.scene_id)));
            }
            let files = std::iter::once(&scene.cloud)
                .chain(scene.features.iter())
                .chain(scene.labels.iter())
                .chain(scene.views.iter());
            for f in files {
                if !f.is_file() {
                    return Err(Error::invalid(format!(
                        "scene {}: missing file {}",
                        scene.scene_id,
                        f.display()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn scene(&self, id: &str) -> Option<&SceneEntry> {
        self.scenes.iter().find(|s| s.scene_id == id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_ids_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cloud = dir.path().join("a.ply");
        std::fs::write(&cloud, b"").unwrap();
        let entry = SceneEntry {
            scene_id: "a".into(),
            cloud: "a.ply".into(),
            features: None,
            views: vec![],
            labels: None,
        };
        let m = DatasetManifest {
            scenes: vec![entry.clone(), entry],
        };
        let path = dir.path().join("m.json");
        m.save(&path).unwrap();
        let err = DatasetManifest::load(&path).unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn relative_paths_resolved_and_checked() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.ply"), b"").unwrap();
        let m = DatasetManifest {
            scenes: vec![SceneEntry {
                scene_id: "a".into(),
                cloud: "a.ply".into(),
                features: Some("missing.lgspfeat".into()),
                views: vec![],
                labels: None,
            }],
        };
        let path = dir.path().join("m.json");
        m.save(&path).unwrap();
        let err = DatasetManifest::load(&path).unwrap_err();
        assert!(err.to_string().contains("missing file"));
    }
}
