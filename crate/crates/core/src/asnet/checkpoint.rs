use std::collections::BTreeMap;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{AsnetError, Hyper, ParameterStore};
use crate::relatedness::SchemaSignature;

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorJson {
    shape: Vec<usize>,
    /// Little-endian f64 values, base64 encoded.
    data: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointJson {
    version: u32,
    /// Free-form provenance text, ignored on load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    note: Option<String>,
    hyper: Hyper,
    signature: SchemaSignature,
    tensors: BTreeMap<String, TensorJson>,
}

fn encode(values: &[f64], shape: Vec<usize>) -> TensorJson {
    let bytes: Vec<u8> = values.iter().flat_map(|x| x.to_le_bytes()).collect();
    TensorJson {
        shape,
        data: STANDARD.encode(bytes),
    }
}

fn decode(name: &str, t: &TensorJson, shape: &[usize]) -> Result<Vec<f64>, AsnetError> {
    if t.shape != shape {
        return Err(AsnetError::ShapeMismatch(format!("{name}: expected {shape:?}, found {:?}", t.shape)));
    }
    let bytes = STANDARD.decode(&t.data).map_err(|e| AsnetError::CorruptCheckpoint(format!("{name}: {e}")))?;
    let n: usize = shape.iter().product();
    if bytes.len() != 8 * n {
        return Err(AsnetError::CorruptCheckpoint(format!("{name}: {} bytes for {n} values", bytes.len())));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}

pub fn store_to_json(store: &ParameterStore) -> String {
    store_to_json_with_note(store, None)
}

/// Like [`store_to_json`], recording `note` alongside the tensors.
pub fn store_to_json_with_note(store: &ParameterStore, note: Option<&str>) -> String {
    let mut tensors = BTreeMap::new();
    for (name, lin) in store.named_tensors() {
        let (r, c) = lin.w.dim();
        tensors.insert(format!("{name}/W"), encode(lin.w.as_slice().expect("standard layout"), vec![r, c]));
        tensors.insert(format!("{name}/b"), encode(lin.b.as_slice().expect("standard layout"), vec![r]));
    }
    let ck = CheckpointJson {
        version: FORMAT_VERSION,
        note: note.map(str::to_string),
        hyper: store.hyper,
        signature: store.signature.clone(),
        tensors,
    };
    serde_json::to_string_pretty(&ck).expect("checkpoint serialises")
}

pub fn store_from_json(text: &str) -> Result<ParameterStore, AsnetError> {
    let ck: CheckpointJson = serde_json::from_str(text).map_err(|e| AsnetError::CorruptCheckpoint(e.to_string()))?;
    if ck.version != FORMAT_VERSION {
        return Err(AsnetError::CorruptCheckpoint(format!("unsupported version {}", ck.version)));
    }
    let mut store = ParameterStore::zeros(ck.signature, ck.hyper);
    let names: Vec<String> = store.named_tensors().into_iter().map(|(n, _)| n).collect();
    if ck.tensors.len() != 2 * names.len() {
        return Err(AsnetError::ShapeMismatch(format!("expected {} tensors, found {}", 2 * names.len(), ck.tensors.len())));
    }
    for (name, lin) in names.iter().zip(store.params.linears_mut()) {
        let (r, c) = lin.w.dim();
        let wk = format!("{name}/W");
        let bk = format!("{name}/b");
        let w = ck.tensors.get(&wk).ok_or_else(|| AsnetError::ShapeMismatch(format!("missing {wk}")))?;
        let b = ck.tensors.get(&bk).ok_or_else(|| AsnetError::ShapeMismatch(format!("missing {bk}")))?;
        lin.w = Array2::from_shape_vec((r, c), decode(&wk, w, &[r, c])?).expect("shape checked");
        lin.b = Array1::from_vec(decode(&bk, b, &[r])?);
    }
    Ok(store)
}

pub fn save_checkpoint(store: &ParameterStore, path: &Path) -> Result<(), AsnetError> {
    std::fs::write(path, store_to_json(store)).map_err(|e| AsnetError::Io(format!("{}: {e}", path.display())))
}

pub fn load_checkpoint(path: &Path) -> Result<ParameterStore, AsnetError> {
    let text = std::fs::read_to_string(path).map_err(|e| AsnetError::Io(format!("{}: {e}", path.display())))?;
    store_from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asnet::{init_params, InitScheme};
    use crate::domains;
    use crate::relatedness::{schema_signature, FeatureFlags};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn store() -> ParameterStore {
        let gp = domains::cosanostra(1).ground().unwrap();
        let hyper = Hyper {
            layers: 2,
            d_h: 3,
            flags: FeatureFlags::default(),
        };
        init_params(&schema_signature(&gp.domain), hyper, &mut ChaCha8Rng::seed_from_u64(4), InitScheme::GlorotUniform)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut s = store();
        s.params.prop[0][0].b[1] = -0.1 + f64::EPSILON;
        let back = store_from_json(&store_to_json(&s)).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn tensor_keys_are_named() {
        let text = store_to_json(&store());
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(v["tensors"].as_object().unwrap().keys().all(|k| k.starts_with("schema/") || k.starts_with("predicate/")));
    }

    #[test]
    fn rejects_bad_payloads() {
        let text = store_to_json(&store());
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let key = v["tensors"].as_object().unwrap().keys().next().unwrap().clone();
        v["tensors"][&key]["data"] = "AAAA".into();
        assert!(matches!(store_from_json(&v.to_string()), Err(AsnetError::CorruptCheckpoint(_))));
        v["tensors"][&key]["shape"] = serde_json::json!([99]);
        assert!(matches!(store_from_json(&v.to_string()), Err(AsnetError::ShapeMismatch(_))));
        assert!(matches!(store_from_json("{}"), Err(AsnetError::CorruptCheckpoint(_))));
    }
}
