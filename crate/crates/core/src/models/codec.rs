//! Tensor wire format: `{"shape": [...], "data_b64": "..."}` with the data as
//! little-endian `f64` bytes, so values survive a round trip bit for bit.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::diffcore::Tensor;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorRepr {
    shape: Vec<usize>,
    data_b64: String,
}

pub fn encode_f64s(data: &[f64]) -> String {
    let bytes: Vec<u8> = data.iter().flat_map(|v| v.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

pub fn decode_f64s(text: &str) -> Result<Vec<f64>, String> {
    let bytes = STANDARD
        .decode(text)
        .map_err(|e| format!("corrupt base64 tensor data: {e}"))?;
    if bytes.len() % 8 != 0 {
        return Err(format!("tensor byte length {} is not a multiple of 8", bytes.len()));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

impl Serialize for Tensor {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        TensorRepr {
            shape: self.shape().to_vec(),
            data_b64: encode_f64s(self.data()),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Tensor {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = TensorRepr::deserialize(deserializer)?;
        let data = decode_f64s(&repr.data_b64).map_err(D::Error::custom)?;
        Tensor::new(repr.shape, data).map_err(D::Error::custom)
    }
}
