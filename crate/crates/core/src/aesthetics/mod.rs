//! Describable aesthetic features: colour, composition, texture, regions
//! and region-graph statistics computed from decoded images.

mod features;
mod image;
mod rag;
mod registry;
mod segment;
mod stats;
mod wavelet;

use std::io::{Read, Write};

use thiserror::Error;

pub use features::{colorfulness, extract_features};
pub use image::{decode_image, encode_png, hsv_to_rgb, rgb_to_hsv, ImageBuffer, MAX_SIDE};
pub use rag::{
    best_ncut, build_rag, edge_weight, exhaustive_min_ncut, fiedler_sweep_ncut, ncut_value, rag_from_parts,
    threshold_merge_count, RagEdge, RagParams, RegionAdjacencyGraph, COLOR_SIGMA, EXHAUSTIVE_MAX_NODES,
};
pub use registry::{
    default_descriptors, ExtractionParams, FeatureDescriptor, FeatureFamily, FeatureRegistry, FeatureVector,
};
pub use segment::{rgb_to_luv, segment_image, SegmentInfo, SegmentParams, Segmentation};
pub use stats::{circular_mean_deg, mean, std};
pub use wavelet::{wavelet_decompose, wavelet_reconstruct, Plane, WaveletDecomposition, WaveletLevel};

#[derive(Debug, Error)]
pub enum AestheticsError {
    #[error("invalid image dimensions {width}x{height}")]
    BadDimensions { width: usize, height: usize },
    #[error("unsupported image format (PNG and JPEG only)")]
    UnsupportedFormat,
    #[error("could not decode image: {0}")]
    Decode(String),
    #[error("image {width}x{height} is smaller than the {min}px minimum")]
    TooSmall { width: usize, height: usize, min: usize },
    #[error("unknown feature id {0:?}")]
    UnknownFeature(String),
    #[error("duplicate feature id {0:?}")]
    DuplicateFeature(String),
    #[error("registry hash mismatch: expected {expected}, got {got}")]
    RegistryMismatch { expected: String, got: String },
    #[error("bad registry manifest: {0}")]
    Manifest(String),
    #[error("bad feature dump: {0}")]
    Dump(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Writes a feature table: header `post_id,<registry ids>`, one row per post.
pub fn write_feature_dump<W: Write>(
    out: W,
    registry: &FeatureRegistry,
    rows: &[(String, FeatureVector)],
) -> Result<(), AestheticsError> {
    let mut w = csv::Writer::from_writer(out);
    let dump = |e: csv::Error| AestheticsError::Dump(e.to_string());
    let mut header = vec!["post_id".to_string()];
    header.extend(registry.ids().map(str::to_string));
    w.write_record(&header).map_err(dump)?;
    for (id, fv) in rows {
        if fv.registry_hash != registry.hash() {
            return Err(AestheticsError::RegistryMismatch {
                expected: registry.hash().to_string(),
                got: fv.registry_hash.clone(),
            });
        }
        let mut rec = vec![id.clone()];
        rec.extend(fv.values.iter().map(|v| format!("{v:?}")));
        w.write_record(&rec).map_err(dump)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a table written by [`write_feature_dump`]; the header must list
/// exactly the registry ids in order.
pub fn read_feature_dump<R: Read>(input: R, registry: &FeatureRegistry) -> Result<Vec<(String, FeatureVector)>, AestheticsError> {
    let mut r = csv::Reader::from_reader(input);
    let dump = |e: csv::Error| AestheticsError::Dump(e.to_string());
    let header = r.headers().map_err(dump)?.clone();
    let expected: Vec<&str> = std::iter::once("post_id").chain(registry.ids()).collect();
    if header.iter().ne(expected.iter().copied()) {
        return Err(AestheticsError::Dump("header does not match registry".into()));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(dump)?;
        let values = rec
            .iter()
            .skip(1)
            .map(|s| s.parse::<f64>().map_err(|e| AestheticsError::Dump(format!("{s:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push((
            rec[0].to_string(),
            FeatureVector {
                registry_hash: registry.hash().to_string(),
                values,
            },
        ));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_roundtrip_is_exact() {
        let reg = FeatureRegistry::default_catalog();
        let rows: Vec<(String, FeatureVector)> = (0..3)
            .map(|i| {
                (
                    format!("p{i}"),
                    FeatureVector {
                        registry_hash: reg.hash().to_string(),
                        values: (0..reg.len()).map(|j| (i * 31 + j) as f64 / 7.0).collect(),
                    },
                )
            })
            .collect();
        let mut buf = Vec::new();
        write_feature_dump(&mut buf, &reg, &rows).unwrap();
        assert_eq!(read_feature_dump(&buf[..], &reg).unwrap(), rows);
    }
}
