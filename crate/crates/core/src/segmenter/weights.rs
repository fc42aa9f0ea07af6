//! Weight container: an 8-byte little-endian header length, a JSON header
//! describing every block, then raw little-endian f32 blocks.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{LayerKind, NetworkSpec};
use super::tensor::{BatchNorm, Kernel};
use crate::error::{Error, Result};

pub const WEIGHTS_FORMAT: &str = "bmc-segmenter-weights";
pub const DEFAULT_BN_EPS: f32 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    pub kernel: Kernel,
    pub bias: Vec<f32>,
    pub bn: BatchNorm,
}

/// Parameters keyed by layer ordinal in the [`NetworkSpec`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightStore {
    layers: BTreeMap<usize, LayerParams>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Role {
    Kernel,
    Bias,
    BnScale,
    BnShift,
    BnMean,
    BnVar,
}

const ROLES: [Role; 6] = [
    Role::Kernel,
    Role::Bias,
    Role::BnScale,
    Role::BnShift,
    Role::BnMean,
    Role::BnVar,
];

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    bn_eps: f32,
    blocks: Vec<BlockEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BlockEntry {
    layer: usize,
    role: Role,
    shape: Vec<usize>,
    dtype: String,
    /// Byte offset from the start of the data section.
    offset: usize,
}

fn missing(msg: impl Into<String>) -> Error {
    Error::WeightsMissing(msg.into())
}

fn kernel_shape(kind: LayerKind, total_in: usize, out: usize) -> [usize; 4] {
    if kind == LayerKind::UpConvBn {
        [total_in, out, 3, 3]
    } else {
        [out, total_in, 3, 3]
    }
}

impl WeightStore {
    pub fn insert(&mut self, layer: usize, params: LayerParams) {
        self.layers.insert(layer, params);
    }

    pub fn layer(&self, ordinal: usize) -> Result<&LayerParams> {
        self.layers
            .get(&ordinal)
            .ok_or_else(|| missing(format!("no parameters for layer {ordinal}")))
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .values()
            .map(|p| p.kernel.data().len() + p.bias.len() + 4 * p.bn.channels())
            .sum()
    }

    /// He-uniform kernels, zero bias, identity batch norm. For shape and
    /// plumbing tests; carries no learned behaviour.
    pub fn random(net: &NetworkSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = Self::default();
        for (i, l) in net.param_layers() {
            let shape = kernel_shape(l.kind, l.total_in(), l.out_channels);
            let fan_in = if l.kind == LayerKind::UpConvBn {
                // Each output sees on average 9/4 taps per input channel.
                l.total_in() * 9 / 4
            } else {
                l.total_in() * 9
            };
            let bound = (6.0 / fan_in as f64).sqrt() as f32;
            let data = (0..shape.iter().product::<usize>())
                .map(|_| rng.gen_range(-bound..bound))
                .collect();
            store.insert(
                i,
                LayerParams {
                    kernel: Kernel::new(shape, data).expect("shape from spec"),
                    bias: vec![0.0; l.out_channels],
                    bn: BatchNorm {
                        eps: DEFAULT_BN_EPS,
                        ..BatchNorm::identity(l.out_channels)
                    },
                },
            );
        }
        store
    }

    /// Every parameterized row has a block of the right shape and nothing else is present.
    pub fn check_against(&self, net: &NetworkSpec) -> Result<()> {
        let mut expected = 0;
        for (i, l) in net.param_layers() {
            expected += 1;
            let p = self.layer(i)?;
            let shape = kernel_shape(l.kind, l.total_in(), l.out_channels);
            if p.kernel.shape() != shape {
                return Err(missing(format!(
                    "layer {i} kernel is {:?}, expected {shape:?}",
                    p.kernel.shape()
                )));
            }
            let c = l.out_channels;
            if p.bias.len() != c
                || p.bn.scale.len() != c
                || p.bn.shift.len() != c
                || p.bn.running_mean.len() != c
                || p.bn.running_var.len() != c
            {
                return Err(missing(format!("layer {i} bias/batch-norm length differs from {c}")));
            }
        }
        if self.layers.len() != expected {
            let extra: Vec<usize> = self
                .layers
                .keys()
                .filter(|k| net.layers.get(**k).map_or(true, |l| !l.kind.has_params()))
                .copied()
                .collect();
            return Err(missing(format!("unexpected parameter blocks for layers {extra:?}")));
        }
        Ok(())
    }

    pub fn write_to(&self, mut out: impl Write) -> Result<()> {
        let eps = self.layers.values().next().map_or(DEFAULT_BN_EPS, |p| p.bn.eps);
        let mut blocks = Vec::new();
        let mut payload: Vec<u8> = Vec::new();
        for (&layer, p) in &self.layers {
            if p.bn.eps != eps {
                return Err(Error::Precondition(
                    "weights file stores one batch-norm epsilon for all layers".into(),
                ));
            }
            for role in ROLES {
                let (shape, values): (Vec<usize>, &[f32]) = match role {
                    Role::Kernel => (p.kernel.shape().to_vec(), p.kernel.data()),
                    Role::Bias => (vec![p.bias.len()], &p.bias),
                    Role::BnScale => (vec![p.bn.scale.len()], &p.bn.scale),
                    Role::BnShift => (vec![p.bn.shift.len()], &p.bn.shift),
                    Role::BnMean => (vec![p.bn.running_mean.len()], &p.bn.running_mean),
                    Role::BnVar => (vec![p.bn.running_var.len()], &p.bn.running_var),
                };
                blocks.push(BlockEntry {
                    layer,
                    role,
                    shape,
                    dtype: "f32-le".into(),
                    offset: payload.len(),
                });
                for v in values {
                    payload.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        let header = serde_json::to_vec(&Header {
            format: WEIGHTS_FORMAT.into(),
            bn_eps: eps,
            blocks,
        })?;
        out.write_all(&(header.len() as u64).to_le_bytes())?;
        out.write_all(&header)?;
        out.write_all(&payload)?;
        Ok(())
    }

    pub fn read_from(mut input: impl Read) -> Result<Self> {
        let mut len = [0u8; 8];
        input
            .read_exact(&mut len)
            .map_err(|_| missing("file too short for header length"))?;
        let len = usize::try_from(u64::from_le_bytes(len))
            .ok()
            .filter(|&n| n <= 64 << 20)
            .ok_or_else(|| missing("implausible header length"))?;
        let mut header = vec![0u8; len];
        input
            .read_exact(&mut header)
            .map_err(|_| missing("truncated header"))?;
        let header: Header =
            serde_json::from_slice(&header).map_err(|e| missing(format!("bad header: {e}")))?;
        if header.format != WEIGHTS_FORMAT {
            return Err(missing(format!("unknown format tag {:?}", header.format)));
        }
        let mut payload = Vec::new();
        input.read_to_end(&mut payload)?;

        let mut blocks: BTreeMap<usize, BTreeMap<Role, (Vec<usize>, Vec<f32>)>> = BTreeMap::new();
        for b in &header.blocks {
            if b.dtype != "f32-le" {
                return Err(missing(format!("layer {} {:?}: dtype {}", b.layer, b.role, b.dtype)));
            }
            let count: usize = b.shape.iter().product();
            let end = b.offset.checked_add(count * 4).filter(|&e| e <= payload.len());
            let end = end.ok_or_else(|| {
                missing(format!("layer {} {:?} runs past end of data", b.layer, b.role))
            })?;
            let values: Vec<f32> = payload[b.offset..end]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            if values.iter().any(|v| !v.is_finite()) {
                return Err(missing(format!("layer {} {:?} has non-finite values", b.layer, b.role)));
            }
            let slot = blocks.entry(b.layer).or_default();
            if slot.insert(b.role, (b.shape.clone(), values)).is_some() {
                return Err(missing(format!("layer {} {:?} listed twice", b.layer, b.role)));
            }
        }

        let mut store = Self::default();
        for (layer, mut roles) in blocks {
            let mut take = |role: Role| {
                roles
                    .remove(&role)
                    .ok_or_else(|| missing(format!("layer {layer} lacks {role:?}")))
            };
            let (kshape, kdata) = take(Role::Kernel)?;
            let kshape: [usize; 4] = kshape
                .try_into()
                .map_err(|_| missing(format!("layer {layer} kernel is not 4-D")))?;
            let kernel = Kernel::new(kshape, kdata).map_err(|e| missing(format!("layer {layer}: {e}")))?;
            let bias = take(Role::Bias)?.1;
            let bn = BatchNorm {
                scale: take(Role::BnScale)?.1,
                shift: take(Role::BnShift)?.1,
                running_mean: take(Role::BnMean)?.1,
                running_var: take(Role::BnVar)?.1,
                eps: header.bn_eps,
            };
            store.insert(layer, LayerParams { kernel, bias, bn });
        }
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))
    }

    /// Read and validate against `net`.
    pub fn load(path: &Path, net: &NetworkSpec) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::UnreadableFile {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let store = Self::read_from(std::io::BufReader::new(file))?;
        store.check_against(net)?;
        Ok(store)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_store(net: &NetworkSpec) -> WeightStore {
        WeightStore::random(net, 3)
    }

    fn narrow() -> NetworkSpec {
        NetworkSpec::with_base_width(2)
    }

    #[test]
    fn random_store_fits_the_standard_network() {
        let net = NetworkSpec::standard();
        let store = tiny_store(&net);
        store.check_against(&net).unwrap();
        assert_eq!(store.len(), net.param_layers().count());
        assert_eq!(store.layer(0).unwrap().kernel.shape(), [64, 12, 3, 3]);
        let up = net.layers.iter().position(|l| l.kind == LayerKind::UpConvBn).unwrap();
        assert_eq!(store.layer(up).unwrap().kernel.shape(), [512, 512, 3, 3]);
        assert_eq!(store.layer(up + 1).unwrap().kernel.shape(), [512, 1024, 3, 3]);
    }

    #[test]
    fn round_trip_is_exact() {
        let net = narrow();
        let mut store = tiny_store(&net);
        store.layers.get_mut(&0).unwrap().bn.running_var[1] = 0.25;
        let mut bytes = Vec::new();
        store.write_to(&mut bytes).unwrap();
        let back = WeightStore::read_from(&bytes[..]).unwrap();
        assert_eq!(back, store);
    }

    #[test]
    fn missing_and_extra_blocks_are_load_errors() {
        let net = narrow();
        let store = tiny_store(&net);

        let mut fewer = store.clone();
        fewer.layers.remove(&0);
        assert!(matches!(fewer.check_against(&net), Err(Error::WeightsMissing(_))));

        let mut more = store.clone();
        more.insert(2, store.layer(0).unwrap().clone());
        assert!(matches!(more.check_against(&net), Err(Error::WeightsMissing(_))));

        let mut wrong = store.clone();
        wrong.insert(1, store.layer(0).unwrap().clone());
        assert!(matches!(wrong.check_against(&net), Err(Error::WeightsMissing(_))));
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let net = narrow();
        let mut bytes = Vec::new();
        tiny_store(&net).write_to(&mut bytes).unwrap();

        assert!(WeightStore::read_from(&bytes[..4]).is_err());
        assert!(WeightStore::read_from(&bytes[..bytes.len() - 4]).is_err());
        let mut tag = bytes.clone();
        let pos = tag.windows(6).position(|w| w == b"bmc-se").unwrap();
        tag[pos] = b'x';
        assert!(WeightStore::read_from(&tag[..]).is_err());

        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            WeightStore::load(&dir.path().join("absent.bin"), &net),
            Err(Error::UnreadableFile { .. })
        ));
    }

    #[test]
    fn save_and_load_through_a_file() {
        let net = narrow();
        let store = tiny_store(&net);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.bin");
        store.save(&path).unwrap();
        assert_eq!(WeightStore::load(&path, &net).unwrap(), store);
    }
}
