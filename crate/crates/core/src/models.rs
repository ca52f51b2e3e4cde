//! Black-box model abstraction and concrete adapters.
//!
//! Everything downstream only needs a deterministic map from feature
//! vectors to a real score. Adapters cover the two toy hiring models, linear
//! scorers, additive tree ensembles and an external child process speaking
//! newline-delimited JSON on stdio.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{FeatureKind, FeatureSchema, FeatureVector};

/// A deterministic real-valued scoring function over a fixed schema.
pub trait Model: Send + Sync {
    fn schema(&self) -> &FeatureSchema;

    fn descriptor(&self) -> String;

    /// Scores a batch of schema-conforming rows. Callers go through
    /// [`predict`], which validates inputs and outputs.
    fn predict_rows(&self, rows: &[FeatureVector]) -> Result<Vec<f64>>;
}

pub type ModelHandle = Arc<dyn Model>;

/// Validated batch prediction.
pub fn predict(model: &dyn Model, batch: &[FeatureVector]) -> Result<Vec<f64>> {
    let schema = model.schema();
    for x in batch {
        schema.check(x)?;
    }
    if batch.is_empty() {
        return Ok(Vec::new());
    }
    let out = model.predict_rows(batch)?;
    if out.len() != batch.len() {
        return Err(Error::Model(format!(
            "model returned {} outputs for {} inputs",
            out.len(),
            batch.len()
        )));
    }
    if let Some(v) = out.iter().find(|v| !v.is_finite()) {
        return Err(Error::Model(format!("model produced non-finite output {v}")));
    }
    Ok(out)
}

pub fn predict_one(model: &dyn Model, x: &FeatureVector) -> Result<f64> {
    Ok(predict(model, std::slice::from_ref(x))?[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ToyKind {
    #[serde(rename = "f_male")]
    Male,
    #[serde(rename = "f_both")]
    Both,
}

impl ToyKind {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "f_male" => Ok(ToyKind::Male),
            "f_both" => Ok(ToyKind::Both),
            other => Err(Error::InvalidArgument(format!(
                "unknown builtin model `{other}` (expected f_male or f_both)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ToyKind::Male => "f_male",
            ToyKind::Both => "f_both",
        }
    }
}

/// The two-feature hiring models: `f_male(x) = x_male` and
/// `f_both(x) = x_male AND x_lift`.
#[derive(Debug, Clone)]
pub struct ToyModel {
    kind: ToyKind,
    schema: FeatureSchema,
}

impl ToyModel {
    pub fn new(kind: ToyKind) -> Self {
        ToyModel {
            kind,
            schema: toy_schema(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self.kind {
            ToyKind::Male => x[0],
            ToyKind::Both => {
                if x[0] != 0.0 && x[1] != 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Schema of the toy hiring example: `male`, `lift`, both discrete.
pub fn toy_schema() -> FeatureSchema {
    FeatureSchema::new(
        vec!["male".into(), "lift".into()],
        vec![FeatureKind::Discrete; 2],
    )
    .expect("static schema")
}

impl Model for ToyModel {
    fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    fn descriptor(&self) -> String {
        format!("builtin:{}", self.kind.name())
    }

    fn predict_rows(&self, rows: &[FeatureVector]) -> Result<Vec<f64>> {
        Ok(rows.iter().map(|x| self.eval(x.values())).collect())
    }
}

#[derive(Debug, Clone)]
pub struct LinearModel {
    schema: FeatureSchema,
    weights: Vec<f64>,
    bias: f64,
    logistic: bool,
}

impl LinearModel {
    pub fn new(schema: FeatureSchema, weights: Vec<f64>, bias: f64, logistic: bool) -> Result<Self> {
        if weights.len() != schema.len() {
            return Err(Error::Schema(format!(
                "{} weights for {} features",
                weights.len(),
                schema.len()
            )));
        }
        if !bias.is_finite() || weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidValue("linear model coefficients must be finite".into()));
        }
        Ok(LinearModel {
            schema,
            weights,
            bias,
            logistic,
        })
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let z = self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        if self.logistic {
            logistic(z)
        } else {
            z
        }
    }
}

impl Model for LinearModel {
    fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    fn descriptor(&self) -> String {
        format!("linear({} features)", self.weights.len())
    }

    fn predict_rows(&self, rows: &[FeatureVector]) -> Result<Vec<f64>> {
        Ok(rows.iter().map(|x| self.eval(x.values())).collect())
    }
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// A binary regression tree in nested form. Traversal goes left iff the
/// feature value is strictly less than the threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    Leaf {
        leaf: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PostTransform {
    #[default]
    Identity,
    Logistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsembleSpec {
    pub trees: Vec<TreeNode>,
    #[serde(default)]
    pub transform: PostTransform,
}

/// Flattened node: `feature == usize::MAX` marks a leaf holding `value`.
#[derive(Debug, Clone, Copy)]
struct FlatNode {
    feature: usize,
    threshold: f64,
    left: u32,
    right: u32,
    value: f64,
}

#[derive(Debug, Clone)]
pub struct TreeEnsemble {
    schema: FeatureSchema,
    roots: Vec<u32>,
    nodes: Vec<FlatNode>,
    transform: PostTransform,
}

impl TreeEnsemble {
    pub fn new(schema: FeatureSchema, spec: &TreeEnsembleSpec) -> Result<Self> {
        let mut nodes = Vec::new();
        let mut roots = Vec::with_capacity(spec.trees.len());
        for (t, tree) in spec.trees.iter().enumerate() {
            let root = flatten(tree, schema.len(), &mut nodes)
                .map_err(|e| Error::InvalidArgument(format!("tree {t}: {e}")))?;
            roots.push(root);
        }
        Ok(TreeEnsemble {
            schema,
            roots,
            nodes,
            transform: spec.transform,
        })
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let raw: f64 = self
            .roots
            .iter()
            .map(|&root| {
                let mut node = &self.nodes[root as usize];
                while node.feature != usize::MAX {
                    let next = if x[node.feature] < node.threshold {
                        node.left
                    } else {
                        node.right
                    };
                    node = &self.nodes[next as usize];
                }
                node.value
            })
            .sum();
        match self.transform {
            PostTransform::Identity => raw,
            PostTransform::Logistic => logistic(raw),
        }
    }
}

fn flatten(node: &TreeNode, m: usize, out: &mut Vec<FlatNode>) -> std::result::Result<u32, String> {
    let idx = out.len();
    match node {
        TreeNode::Leaf { leaf } => {
            if !leaf.is_finite() {
                return Err(format!("leaf value {leaf} is not finite"));
            }
            out.push(FlatNode {
                feature: usize::MAX,
                threshold: 0.0,
                left: 0,
                right: 0,
                value: *leaf,
            });
        }
        TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            if *feature >= m {
                return Err(format!("split feature {feature} out of range for {m} features"));
            }
            if !threshold.is_finite() {
                return Err(format!("threshold {threshold} is not finite"));
            }
            out.push(FlatNode {
                feature: *feature,
                threshold: *threshold,
                left: 0,
                right: 0,
                value: 0.0,
            });
            let l = flatten(left, m, out)?;
            let r = flatten(right, m, out)?;
            out[idx].left = l;
            out[idx].right = r;
        }
    }
    Ok(idx as u32)
}

impl Model for TreeEnsemble {
    fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    fn descriptor(&self) -> String {
        format!("tree_ensemble({} trees)", self.roots.len())
    }

    fn predict_rows(&self, rows: &[FeatureVector]) -> Result<Vec<f64>> {
        Ok(rows.iter().map(|x| self.eval(x.values())).collect())
    }
}

/// On-disk model description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Builtin {
        name: String,
    },
    Linear {
        weights: Vec<f64>,
        #[serde(default)]
        bias: f64,
        #[serde(default)]
        logistic: bool,
        #[serde(default)]
        feature_names: Option<Vec<String>>,
    },
    TreeEnsemble {
        #[serde(default)]
        feature_names: Option<Vec<String>>,
        #[serde(default)]
        num_features: Option<usize>,
        trees: Vec<TreeNode>,
        #[serde(default)]
        transform: PostTransform,
    },
}

impl ModelSpec {
    /// Parses a model description: either a bare builtin name (`f_male`,
    /// `builtin:f_both`) or a JSON object.
    pub fn parse(text: &str) -> Result<Self> {
        let trimmed = text.trim();
        let bare = trimmed.strip_prefix("builtin:").unwrap_or(trimmed);
        if !bare.is_empty() && bare.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Ok(ModelSpec::Builtin { name: bare.to_string() });
        }
        serde_json::from_str(text).map_err(|e| {
            // Errors raised after the object is buffered (missing fields in
            // tagged variants) carry no position; point at the end instead.
            let (line, column) = if e.line() == 0 {
                let last = text.lines().last().unwrap_or("");
                (text.lines().count().max(1), last.chars().count().max(1))
            } else {
                (e.line(), e.column())
            };
            Error::Parse {
                line,
                column,
                message: e.to_string(),
            }
        })
    }

    pub fn build(&self) -> Result<ModelHandle> {
        match self {
            ModelSpec::Builtin { name } => Ok(Arc::new(ToyModel::new(ToyKind::from_name(name)?))),
            ModelSpec::Linear {
                weights,
                bias,
                logistic,
                feature_names,
            } => {
                let schema = spec_schema(feature_names.as_ref(), Some(weights.len()))?;
                Ok(Arc::new(LinearModel::new(schema, weights.clone(), *bias, *logistic)?))
            }
            ModelSpec::TreeEnsemble {
                feature_names,
                num_features,
                trees,
                transform,
            } => {
                let schema = spec_schema(feature_names.as_ref(), *num_features)?;
                let spec = TreeEnsembleSpec {
                    trees: trees.clone(),
                    transform: *transform,
                };
                Ok(Arc::new(TreeEnsemble::new(schema, &spec)?))
            }
        }
    }
}

fn spec_schema(names: Option<&Vec<String>>, m: Option<usize>) -> Result<FeatureSchema> {
    match (names, m) {
        (Some(names), m) => {
            if let Some(m) = m {
                if m != names.len() {
                    return Err(Error::Schema(format!(
                        "{} feature names but {m} features",
                        names.len()
                    )));
                }
            }
            FeatureSchema::new(names.clone(), vec![FeatureKind::Continuous; names.len()])
        }
        (None, Some(m)) => FeatureSchema::anonymous(m, FeatureKind::Continuous),
        (None, None) => Err(Error::InvalidArgument(
            "model spec needs `feature_names` or `num_features`".into(),
        )),
    }
}

/// Loads a model from a spec file, or from a `builtin:<name>` string.
pub fn load_model(spec: &str) -> Result<ModelHandle> {
    if let Some(name) = spec.strip_prefix("builtin:") {
        return ModelSpec::Builtin { name: name.to_string() }.build();
    }
    let text = std::fs::read_to_string(Path::new(spec))?;
    ModelSpec::parse(&text)?.build()
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PredictRequest {
    pub id: u64,
    pub inputs: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PredictResponse {
    pub id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub const DEFAULT_EXTERNAL_TIMEOUT: Duration = Duration::from_secs(30);

struct ChildChannel {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    next_id: u64,
    broken: Option<String>,
}

impl ChildChannel {
    fn round_trip(&mut self, rows: &[FeatureVector], timeout: Duration) -> Result<Vec<f64>> {
        if let Some(reason) = &self.broken {
            return Err(Error::Transport(format!("bridge unusable: {reason}")));
        }
        let id = self.next_id;
        self.next_id += 1;
        let request = PredictRequest {
            id,
            inputs: rows.iter().map(|r| r.values().to_vec()).collect(),
        };
        let mut line = serde_json::to_string(&request)
            .map_err(|e| Error::Transport(e.to_string()))?;
        line.push('\n');
        if let Err(e) = self
            .stdin
            .write_all(line.as_bytes())
            .and_then(|_| self.stdin.flush())
        {
            return Err(self.fail(format!("write failed: {e}")));
        }
        let reply = match self.lines.recv_timeout(timeout) {
            Ok(Ok(reply)) => reply,
            Ok(Err(e)) => return Err(self.fail(format!("read failed: {e}"))),
            Err(RecvTimeoutError::Timeout) => {
                self.broken = Some("timed out".into());
                let _ = self.child.kill();
                return Err(Error::Timeout(timeout));
            }
            Err(RecvTimeoutError::Disconnected) => {
                return Err(self.fail("child closed its stdout".into()))
            }
        };
        let response: PredictResponse = serde_json::from_str(&reply)
            .map_err(|e| self.fail(format!("malformed response `{}`: {e}", reply.trim())))?;
        if response.id != id {
            return Err(self.fail(format!("response id {} does not match request id {id}", response.id)));
        }
        if let Some(message) = response.error {
            return Err(Error::Model(message));
        }
        response
            .outputs
            .ok_or_else(|| self.fail("response carries neither outputs nor error".into()))
    }

    fn fail(&mut self, reason: String) -> Error {
        self.broken = Some(reason.clone());
        Error::Transport(reason)
    }
}

impl Drop for ChildChannel {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// A model evaluated by a child process over the stdio protocol. Concurrent
/// callers are serialized on the single child.
pub struct ExternalModel {
    schema: FeatureSchema,
    command: Vec<String>,
    timeout: Duration,
    channel: Mutex<ChildChannel>,
}

impl ExternalModel {
    pub fn spawn(command: &[String], schema: FeatureSchema, timeout: Duration) -> Result<Self> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| Error::InvalidArgument("empty external model command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Transport(format!("failed to spawn `{program}`: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let mut reader = BufReader::new(stdout);
            loop {
                let mut line = String::new();
                match reader.read_line(&mut line) {
                    Ok(0) => break,
                    Ok(_) => {
                        if tx.send(Ok(line)).is_err() {
                            break;
                        }
                    }
                    Err(e) => {
                        let _ = tx.send(Err(e));
                        break;
                    }
                }
            }
        });
        Ok(ExternalModel {
            schema,
            command: command.to_vec(),
            timeout,
            channel: Mutex::new(ChildChannel {
                child,
                stdin,
                lines: rx,
                next_id: 0,
                broken: None,
            }),
        })
    }
}

impl Model for ExternalModel {
    fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    fn descriptor(&self) -> String {
        format!("external:{}", self.command.join(" "))
    }

    fn predict_rows(&self, rows: &[FeatureVector]) -> Result<Vec<f64>> {
        let mut channel = self
            .channel
            .lock()
            .map_err(|_| Error::Transport("bridge lock poisoned".into()))?;
        channel.round_trip(rows, self.timeout)
    }
}

/// Starts a child process model. The command is split on whitespace.
pub fn load_external(command_line: &str, schema: FeatureSchema) -> Result<ModelHandle> {
    let command: Vec<String> = command_line.split_whitespace().map(String::from).collect();
    Ok(Arc::new(ExternalModel::spawn(&command, schema, DEFAULT_EXTERNAL_TIMEOUT)?))
}

/// Serves `model` over the stdio protocol until `input` reaches EOF.
pub fn serve_stdio<R: BufRead, W: Write>(model: &dyn Model, input: R, mut output: W) -> Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = match serde_json::from_str::<PredictRequest>(&line) {
            Ok(req) => {
                let rows: Result<Vec<FeatureVector>> =
                    req.inputs.into_iter().map(FeatureVector::new).collect();
                match rows.and_then(|rows| predict(model, &rows)) {
                    Ok(outputs) => PredictResponse {
                        id: req.id,
                        outputs: Some(outputs),
                        error: None,
                    },
                    Err(e) => PredictResponse {
                        id: req.id,
                        outputs: None,
                        error: Some(e.to_string()),
                    },
                }
            }
            Err(e) => PredictResponse {
                id: 0,
                outputs: None,
                error: Some(format!("malformed request: {e}")),
            },
        };
        let text = serde_json::to_string(&response).map_err(|e| Error::Transport(e.to_string()))?;
        output.write_all(text.as_bytes())?;
        output.write_all(b"\n")?;
        output.flush()?;
    }
    Ok(())
}
