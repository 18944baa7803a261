use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::image::MAX_SIDE;
use super::rag::{RagParams, COLOR_SIGMA};
use super::segment::SegmentParams;
use super::AestheticsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureFamily {
    ColorExposure,
    RuleOfThirds,
    WaveletTexture,
    SizeAspect,
    Region,
    DepthOfField,
    KeComposition,
    #[serde(rename = "RAG")]
    Rag,
}

impl FeatureFamily {
    pub const ALL: [FeatureFamily; 8] = [
        FeatureFamily::ColorExposure,
        FeatureFamily::RuleOfThirds,
        FeatureFamily::WaveletTexture,
        FeatureFamily::SizeAspect,
        FeatureFamily::Region,
        FeatureFamily::DepthOfField,
        FeatureFamily::KeComposition,
        FeatureFamily::Rag,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub id: String,
    pub family: FeatureFamily,
    pub human_name: String,
    pub tunable: bool,
    /// Clamp range applied when the tuner moves this feature.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
}

impl FeatureDescriptor {
    pub fn new(id: &str, family: FeatureFamily, human_name: &str) -> Self {
        FeatureDescriptor {
            id: id.to_string(),
            family,
            human_name: human_name.to_string(),
            tunable: true,
            min: None,
            max: None,
        }
    }

    pub fn bounded(mut self, min: f64, max: f64) -> Self {
        self.min = Some(min);
        self.max = Some(max);
        self
    }

    pub fn at_least(mut self, min: f64) -> Self {
        self.min = Some(min);
        self
    }

    pub fn fixed(mut self) -> Self {
        self.tunable = false;
        self
    }

    pub fn clamp(&self, v: f64) -> f64 {
        let v = self.min.map_or(v, |m| v.max(m));
        self.max.map_or(v, |m| v.min(m))
    }
}

/// Parameters every extractor depends on; part of the registry hash.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractionParams {
    pub max_side: usize,
    pub segment: SegmentParams,
    pub rag: RagParams,
    pub color_sigma: f64,
    pub wavelet_levels: usize,
    /// Fraction of Nyquist above which spectral magnitude counts as detail.
    pub blur_cutoff: f64,
    pub edge_energy: f64,
}

impl Default for ExtractionParams {
    fn default() -> Self {
        ExtractionParams {
            max_side: MAX_SIDE,
            segment: SegmentParams::default(),
            rag: RagParams::default(),
            color_sigma: COLOR_SIGMA,
            wavelet_levels: 3,
            blur_cutoff: 0.2,
            edge_energy: 0.96,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRegistry {
    features: Vec<FeatureDescriptor>,
    params: ExtractionParams,
    hash: String,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    hash: String,
    features: Vec<FeatureDescriptor>,
    params: ExtractionParams,
}

#[derive(Serialize)]
struct Hashed<'a> {
    features: &'a [FeatureDescriptor],
    params: &'a ExtractionParams,
}

impl FeatureRegistry {
    /// A registry over arbitrary descriptors; ids must be unique.
    pub fn new(features: Vec<FeatureDescriptor>, params: ExtractionParams) -> Result<Self, AestheticsError> {
        let mut seen = std::collections::BTreeSet::new();
        for f in &features {
            if !seen.insert(f.id.as_str()) {
                return Err(AestheticsError::DuplicateFeature(f.id.clone()));
            }
        }
        let canonical = serde_json::to_vec(&Hashed {
            features: &features,
            params: &params,
        })
        .expect("registry serializes");
        let hash = hex::encode(Sha256::digest(&canonical));
        Ok(FeatureRegistry { features, params, hash })
    }

    /// The full describable catalog.
    pub fn default_catalog() -> Self {
        Self::new(default_descriptors(), ExtractionParams::default()).expect("catalog ids are unique")
    }

    pub fn features(&self) -> &[FeatureDescriptor] {
        &self.features
    }

    pub fn params(&self) -> &ExtractionParams {
        &self.params
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.features.iter().position(|f| f.id == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.id.as_str())
    }

    pub fn to_manifest_json(&self) -> String {
        serde_json::to_string_pretty(&Manifest {
            hash: self.hash.clone(),
            features: self.features.clone(),
            params: self.params,
        })
        .expect("manifest serializes")
    }

    /// Parses a manifest and checks the stored hash against the contents.
    pub fn from_manifest_json(text: &str) -> Result<Self, AestheticsError> {
        let m: Manifest = serde_json::from_str(text).map_err(|e| AestheticsError::Manifest(e.to_string()))?;
        let reg = Self::new(m.features, m.params)?;
        if reg.hash != m.hash {
            return Err(AestheticsError::RegistryMismatch {
                expected: m.hash,
                got: reg.hash,
            });
        }
        Ok(reg)
    }
}

/// Ids of the default catalog in layout order.
pub fn default_descriptors() -> Vec<FeatureDescriptor> {
    use FeatureFamily::*;
    let d = FeatureDescriptor::new;
    let mut v = vec![
        d("mean_value", ColorExposure, "light exposure").bounded(0.0, 1.0),
        d("mean_saturation", ColorExposure, "saturation").bounded(0.0, 1.0),
        d("mean_hue", ColorExposure, "hue").bounded(0.0, 360.0),
        d("colorfulness", ColorExposure, "colorfulness").at_least(0.0),
        d("log_avg_luminance", ColorExposure, "log-average luminance").bounded(0.0, 1.0),
        d("thirds_hue", RuleOfThirds, "rule of thirds hue").bounded(0.0, 360.0),
        d("thirds_saturation", RuleOfThirds, "rule of thirds saturation").bounded(0.0, 1.0),
        d("thirds_value", RuleOfThirds, "rule of thirds intensity").bounded(0.0, 1.0),
    ];
    for (ch, name) in [("h", "hue"), ("s", "saturation"), ("v", "intensity")] {
        for (lvl, ord) in [(1, "1st"), (2, "2nd"), (3, "3rd")] {
            v.push(
                d(
                    &format!("wavelet_{ch}_l{lvl}"),
                    WaveletTexture,
                    &format!("spatial smoothness of {ord} level of {name}"),
                )
                .bounded(0.0, 1.0),
            );
        }
    }
    for (ch, name) in [("h", "hue"), ("s", "saturation"), ("v", "intensity")] {
        v.push(d(&format!("wavelet_{ch}_sum"), WaveletTexture, &format!("total spatial smoothness of {name}")).bounded(0.0, 1.0));
    }
    v.push(d("size_sum", SizeAspect, "image size").fixed());
    v.push(d("aspect_ratio", SizeAspect, "aspect ratio").at_least(0.0));
    v.push(d("segment_count", Region, "number of large segments").at_least(1.0));
    for i in 1..=5 {
        v.push(d(&format!("segment_size_{i}"), Region, &format!("relative size of segment {i}")).bounded(0.0, 1.0));
    }
    v.extend([
        d("largest_segment_value", Region, "largest segment avg. intensity").bounded(0.0, 1.0),
        d("largest_segment_hue", Region, "largest segment avg. hue").bounded(0.0, 360.0),
        d("largest_segment_saturation", Region, "largest segment avg. saturation").bounded(0.0, 1.0),
        d("largest_segment_convexity", Region, "largest segment convexity").bounded(0.0, 1.0),
        d("dof_hue", DepthOfField, "low DoF hue component").bounded(0.0, 1.0),
        d("dof_saturation", DepthOfField, "low DoF saturation").bounded(0.0, 1.0),
        d("dof_value", DepthOfField, "low DoF intensity").bounded(0.0, 1.0),
        d("edge_bbox_area", KeComposition, "edge bounding box area").bounded(0.0, 1.0),
        d("hue_count", KeComposition, "hue count").bounded(1.0, 18.0),
        d("blur", KeComposition, "sharpness").bounded(0.0, 1.0),
        d("contrast", KeComposition, "contrast").bounded(0.0, 1.0),
        d("brightness", KeComposition, "brightness").bounded(0.0, 1.0),
        d("rag_segment_count", Rag, "RAG segment count").at_least(1.0),
        d("rag_best_ncut", Rag, "best normalized cut").bounded(0.0, 2.0),
        d("rag_cut_depth", Rag, "recursive cut depth").at_least(0.0),
    ]);
    v
}

/// Feature values aligned to a registry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub registry_hash: String,
    pub values: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_covers_every_family() {
        let r = FeatureRegistry::default_catalog();
        assert!(r.len() >= 40);
        for fam in FeatureFamily::ALL {
            assert!(r.features().iter().any(|f| f.family == fam), "{fam:?}");
        }
        assert_eq!(r.hash(), FeatureRegistry::default_catalog().hash());
    }

    #[test]
    fn manifest_roundtrip() {
        let r = FeatureRegistry::default_catalog();
        let back = FeatureRegistry::from_manifest_json(&r.to_manifest_json()).unwrap();
        assert_eq!(back, r);
        let tampered = r.to_manifest_json().replace("light exposure", "exposure");
        assert!(matches!(
            FeatureRegistry::from_manifest_json(&tampered),
            Err(AestheticsError::RegistryMismatch { .. })
        ));
    }

    #[test]
    fn params_change_the_hash() {
        let mut p = ExtractionParams::default();
        p.segment.seed = 7;
        let r = FeatureRegistry::new(default_descriptors(), p).unwrap();
        assert_ne!(r.hash(), FeatureRegistry::default_catalog().hash());
    }
}
