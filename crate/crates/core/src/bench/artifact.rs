//! Model artifact file.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    8 bytes  "HREGART\0"
//! version  u32
//! sections repeated: tag u32, length u64, payload
//! sha256   32 bytes over everything before it
//! ```
//!
//! Section 1 is the JSON header, section 2 the JSON preprocessing record and
//! section 3 the binary model payload (64-bit floats, trees as text).

use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::report::ReportRow;
use crate::boost::BoostModel;
use crate::cart::TreeNode;
use crate::data::{Encoder, FillRecord, Scaler, Schema, TargetTransform};
use crate::error::{Error, Result};
use crate::forest::ForestModel;
use crate::linreg::LinearModel;
use crate::matrix::Matrix;
use crate::mlp::{Layer, MlpModel};
use crate::model::{FittedModel, Model, ModelKind};
use crate::svr::SvrModel;

pub const MAGIC: [u8; 8] = *b"HREGART\0";
pub const FORMAT_VERSION: u32 = 1;

const TAG_HEADER: u32 = 1;
const TAG_PREPROCESSING: u32 = 2;
const TAG_MODEL: u32 = 3;
const CHECKSUM_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactHeader {
    pub kind: ModelKind,
    pub seed: u64,
    pub timestamp: u64,
    pub feature_names: Vec<String>,
    pub setup: String,
    pub metrics: Option<ReportRow>,
}

/// Everything needed to turn raw rows into model inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineRecord {
    pub schema_toml: String,
    pub schema_digest: String,
    pub fills: FillRecord,
    pub encoder: Encoder,
}

impl PipelineRecord {
    pub fn new(schema: &Schema, fills: FillRecord, encoder: Encoder) -> Self {
        PipelineRecord {
            schema_toml: schema.to_toml_string(),
            schema_digest: schema.digest(),
            fills,
            encoder,
        }
    }

    pub fn schema(&self) -> Result<Schema> {
        Schema::from_toml_str(&self.schema_toml)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessing {
    /// Absent for models fitted directly on a numeric matrix.
    pub pipeline: Option<PipelineRecord>,
    pub scaler: Option<Scaler>,
    pub target_transform: TargetTransform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelArtifact {
    pub header: ArtifactHeader,
    pub preprocessing: Preprocessing,
    pub model: Model,
}

impl ModelArtifact {
    pub fn new(header: ArtifactHeader, fitted: FittedModel, pipeline: Option<PipelineRecord>, target_transform: TargetTransform) -> Self {
        ModelArtifact {
            header,
            preprocessing: Preprocessing {
                pipeline,
                scaler: fitted.scaler,
                target_transform,
            },
            model: fitted.model,
        }
    }

    pub fn fitted(&self) -> FittedModel {
        FittedModel {
            model: self.model.clone(),
            scaler: self.preprocessing.scaler.clone(),
        }
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        match &self.preprocessing.scaler {
            Some(s) => self.model.predict(&s.transform(x)?),
            None => self.model.predict(x),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        let sections = [
            (TAG_HEADER, to_json(&self.header)),
            (TAG_PREPROCESSING, to_json(&self.preprocessing)),
            (TAG_MODEL, encode_model(&self.model)),
        ];
        for (tag, body) in sections {
            out.extend_from_slice(&tag.to_le_bytes());
            out.extend_from_slice(&(body.len() as u64).to_le_bytes());
            out.extend_from_slice(&body);
        }
        let sum = Sha256::digest(&out);
        out.extend_from_slice(&sum);
        out
    }

    /// Checks magic, then version, then checksum, then parses sections.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() || bytes[..MAGIC.len()] != MAGIC {
            return Err(Error::Corrupt("not a model artifact (bad magic)".into()));
        }
        let mut r = Reader::new(&bytes[MAGIC.len()..]);
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::ArtifactVersion {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        if bytes.len() < MAGIC.len() + 4 + CHECKSUM_LEN {
            return Err(Error::Checksum);
        }
        let (body, sum) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
        if Sha256::digest(body).as_slice() != sum {
            return Err(Error::Checksum);
        }
        let mut r = Reader::new(&body[MAGIC.len() + 4..]);
        let mut header = None;
        let mut preprocessing = None;
        let mut model = None;
        while !r.is_empty() {
            let tag = r.u32()?;
            let len = r.len()?;
            let payload = r.take(len)?;
            match tag {
                TAG_HEADER => header = Some(from_json::<ArtifactHeader>(payload)?),
                TAG_PREPROCESSING => preprocessing = Some(from_json::<Preprocessing>(payload)?),
                TAG_MODEL => model = Some(decode_model(payload)?),
                t => return Err(Error::Corrupt(format!("unknown section tag {t}"))),
            }
        }
        let header = header.ok_or_else(|| Error::Corrupt("missing header section".into()))?;
        let preprocessing = preprocessing.ok_or_else(|| Error::Corrupt("missing preprocessing section".into()))?;
        let model = model.ok_or_else(|| Error::Corrupt("missing model section".into()))?;
        if model.kind() != header.kind {
            return Err(Error::Corrupt("model kind disagrees with header".into()));
        }
        Ok(ModelArtifact {
            header,
            preprocessing,
            model,
        })
    }
}

pub fn save_model(artifact: &ModelArtifact, path: &Path) -> Result<()> {
    std::fs::write(path, artifact.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<ModelArtifact> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    ModelArtifact::from_bytes(&bytes)
}

fn to_json<T: Serialize>(v: &T) -> Vec<u8> {
    serde_json::to_vec(v).expect("artifact section serializes")
}

fn from_json<T: DeserializeOwned>(bytes: &[u8]) -> Result<T> {
    serde_json::from_slice(bytes).map_err(|e| Error::Corrupt(e.to_string()))
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn len(&mut self, v: usize) {
        self.u64(v as u64);
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        self.len(v.len());
        for &x in v {
            self.f64(x);
        }
    }
    fn bytes(&mut self, b: &[u8]) {
        self.len(b.len());
        self.0.extend_from_slice(b);
    }
    fn json<T: Serialize>(&mut self, v: &T) {
        self.bytes(&to_json(v));
    }
    fn trees(&mut self, trees: &[TreeNode]) {
        self.len(trees.len());
        for t in trees {
            self.bytes(t.to_text().as_bytes());
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf }
    }
    fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.buf.len() {
            return Err(Error::Corrupt("section runs past end of file".into()));
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }
    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.array::<1>()?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }
    fn len(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| Error::Corrupt(format!("implausible length {v}")))
    }
    /// A count of items each occupying at least `item` bytes.
    fn count(&mut self, item: usize) -> Result<usize> {
        let n = self.len()?;
        if n > self.buf.len() / item {
            return Err(Error::Corrupt(format!("implausible count {n}")));
        }
        Ok(n)
    }
    fn bool(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(Error::Corrupt(format!("bad flag byte {b}"))),
        }
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }
    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.count(8)?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.len()?;
        self.take(n)
    }
    fn json<T: DeserializeOwned>(&mut self) -> Result<T> {
        from_json(self.bytes()?)
    }
    fn trees(&mut self) -> Result<Vec<TreeNode>> {
        let n = self.count(8)?;
        (0..n)
            .map(|_| {
                let text = std::str::from_utf8(self.bytes()?).map_err(|_| Error::Corrupt("tree text is not utf-8".into()))?;
                TreeNode::from_text(text)
            })
            .collect()
    }
}

fn encode_model(model: &Model) -> Vec<u8> {
    let mut w = Writer::default();
    w.u8(model.kind().tag());
    match model {
        Model::Linreg(m) => {
            w.f64(m.intercept);
            w.f64s(&m.coefficients);
        }
        Model::Forest(m) => {
            w.json(&m.params);
            w.len(m.n_features);
            w.trees(&m.trees);
        }
        Model::Boost(m) => {
            w.json(&m.params);
            w.f64(m.base_score);
            w.f64s(&m.importance_raw);
            w.f64s(&m.train_mse);
            w.trees(&m.trees);
        }
        Model::Svr(m) => {
            w.json(&m.params);
            w.len(m.n_features);
            w.len(m.support_rows.nrows());
            w.len(m.support_rows.ncols());
            w.f64s(m.support_rows.as_slice());
            w.f64s(&m.dual_coefs);
            w.f64(m.bias);
            w.u8(m.converged as u8);
            w.len(m.iterations);
            w.f64s(&m.objective_trace);
        }
        Model::Mlp(m) => {
            w.json(&m.params);
            w.json(&m.activation);
            w.len(m.layers.len());
            for l in &m.layers {
                w.len(l.n_in);
                w.len(l.n_out);
                w.f64s(&l.weights);
                w.f64s(&l.biases);
            }
            w.u8(m.converged as u8);
            w.f64s(&m.loss_trace);
        }
    }
    w.0
}

fn decode_model(bytes: &[u8]) -> Result<Model> {
    let mut r = Reader::new(bytes);
    let tag = r.u8()?;
    let kind = ModelKind::from_tag(tag).ok_or_else(|| Error::Corrupt(format!("unknown model tag {tag}")))?;
    let model = match kind {
        ModelKind::Linreg => Model::Linreg(LinearModel {
            intercept: r.f64()?,
            coefficients: r.f64s()?,
        }),
        ModelKind::Forest => Model::Forest(ForestModel {
            params: r.json()?,
            n_features: r.len()?,
            trees: r.trees()?,
        }),
        ModelKind::Boost => Model::Boost(BoostModel {
            params: r.json()?,
            base_score: r.f64()?,
            importance_raw: r.f64s()?,
            train_mse: r.f64s()?,
            trees: r.trees()?,
        }),
        ModelKind::Svr => {
            let params = r.json()?;
            let n_features = r.len()?;
            let (rows, cols) = (r.len()?, r.len()?);
            let support_rows = Matrix::new(rows, cols, r.f64s()?).map_err(|e| Error::Corrupt(e.to_string()))?;
            Model::Svr(SvrModel {
                params,
                n_features,
                support_rows,
                dual_coefs: r.f64s()?,
                bias: r.f64()?,
                converged: r.bool()?,
                iterations: r.len()?,
                objective_trace: r.f64s()?,
            })
        }
        ModelKind::Mlp => {
            let params = r.json()?;
            let activation = r.json()?;
            let n = r.count(16)?;
            let mut layers = Vec::with_capacity(n);
            for _ in 0..n {
                let (n_in, n_out) = (r.len()?, r.len()?);
                let layer = Layer {
                    n_in,
                    n_out,
                    weights: r.f64s()?,
                    biases: r.f64s()?,
                };
                if layer.weights.len() != n_in * n_out || layer.biases.len() != n_out {
                    return Err(Error::Corrupt("layer shape disagrees with parameters".into()));
                }
                layers.push(layer);
            }
            Model::Mlp(MlpModel {
                params,
                activation,
                layers,
                converged: r.bool()?,
                loss_trace: r.f64s()?,
            })
        }
    };
    if !r.is_empty() {
        return Err(Error::Corrupt("trailing bytes in model section".into()));
    }
    Ok(model)
}
