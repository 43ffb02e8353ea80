//! JSON files for datasets, scenarios and standalone functions.
//!
//! Dataset schema, version 1:
//!
//! ```json
//! {"schema": "iirl.dataset", "version": 1, "mode": "utility-test", "m": 2, "K": 1,
//!  "entries": [{"function": {"kind": "linear", "coeffs": [1.0, 1.0], "offset": -1.0},
//!               "response": [0.5, 0.5]}]}
//! ```
//!
//! Matrices are `{"n": .., "data": [..]}` in row-major order. Every number is
//! written with 17 significant digits so files reload bit-exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, DatasetMode, Observation, ResponseVector};
use crate::error::{Error, Result};
use crate::function::FunctionSpec;
use crate::iirl::Scenario;

pub const DATASET_SCHEMA: &str = "iirl.dataset";
pub const SCENARIO_SCHEMA: &str = "iirl.scenario";
pub const FUNCTION_SCHEMA: &str = "iirl.function";
pub const FORMAT_VERSION: u32 = 1;

/// Compact JSON with every `f64` printed as `{:.16e}`.
struct ExactFloats;

impl serde_json::ser::Formatter for ExactFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> std::io::Result<()> {
        write!(w, "{v:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> std::io::Result<()> {
        write!(w, "{:.16e}", v as f64)
    }
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, ExactFloats);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::InvalidInput(format!("cannot serialize: {e}")))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

pub fn from_json_str<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetFile {
    schema: String,
    version: u32,
    mode: DatasetMode,
    m: usize,
    #[serde(rename = "K")]
    k: usize,
    entries: Vec<EntryFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryFile {
    function: FunctionSpec,
    response: Vec<f64>,
}

fn check_header(schema: &str, version: u32, expected: &str) -> Result<()> {
    if schema != expected {
        return Err(Error::Schema(format!("expected schema `{expected}`, found `{schema}`")));
    }
    if version != FORMAT_VERSION {
        return Err(Error::Schema(format!("unsupported {expected} version {version}")));
    }
    Ok(())
}

pub fn dataset_to_string(d: &Dataset) -> Result<String> {
    let file = DatasetFile {
        schema: DATASET_SCHEMA.into(),
        version: FORMAT_VERSION,
        mode: d.mode(),
        m: d.dim(),
        k: d.horizon(),
        entries: d
            .entries()
            .iter()
            .map(|e| EntryFile {
                function: e.function.clone(),
                response: e.response.to_vec(),
            })
            .collect(),
    };
    to_json_string(&file)
}

pub fn dataset_from_str(text: &str) -> Result<Dataset> {
    let file: DatasetFile = from_json_str(text)?;
    check_header(&file.schema, file.version, DATASET_SCHEMA)?;
    if file.k == 0 || file.entries.is_empty() {
        return Err(Error::Schema("dataset horizon K must be >= 1".into()));
    }
    if file.k != file.entries.len() {
        return Err(Error::Schema(format!(
            "K = {} but {} entries present",
            file.k,
            file.entries.len()
        )));
    }
    if file.m == 0 {
        return Err(Error::Schema("response dimension m must be >= 1".into()));
    }
    let mut entries = Vec::with_capacity(file.k);
    for (t, e) in file.entries.into_iter().enumerate() {
        if e.response.len() != file.m {
            return Err(Error::Schema(format!(
                "entry {t}: response has dimension {} but m = {}",
                e.response.len(),
                file.m
            )));
        }
        let response = ResponseVector::new(e.response)
            .map_err(|err| Error::Schema(format!("entry {t}: {}", strip_schema(&err))))?;
        entries.push(Observation {
            function: e.function,
            response,
        });
    }
    Dataset::new(file.mode, entries)
}

fn strip_schema(err: &Error) -> String {
    match err {
        Error::Schema(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn save_dataset(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, dataset_to_string(d)?)?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    dataset_from_str(&fs::read_to_string(path)?)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    schema: String,
    version: u32,
    utilities: Vec<FunctionSpec>,
    budget: FunctionSpec,
    thresholds: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eta: Option<f64>,
}

pub fn scenario_to_string(s: &Scenario) -> Result<String> {
    to_json_string(&ScenarioFile {
        schema: SCENARIO_SCHEMA.into(),
        version: FORMAT_VERSION,
        utilities: s.utilities.clone(),
        budget: s.budget.base().clone(),
        thresholds: s.budget.thresholds().to_vec(),
        eta: s.eta,
    })
}

pub fn scenario_from_str(text: &str) -> Result<Scenario> {
    let file: ScenarioFile = from_json_str(text)?;
    check_header(&file.schema, file.version, SCENARIO_SCHEMA)?;
    Scenario::new(file.utilities, file.budget, file.thresholds, file.eta)
}

pub fn save_scenario(s: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, scenario_to_string(s)?)?;
    Ok(())
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    scenario_from_str(&fs::read_to_string(path)?)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FunctionFile {
    schema: String,
    version: u32,
    function: FunctionSpec,
}

pub fn save_function(f: &FunctionSpec, path: impl AsRef<Path>) -> Result<()> {
    let text = to_json_string(&FunctionFile {
        schema: FUNCTION_SCHEMA.into(),
        version: FORMAT_VERSION,
        function: f.clone(),
    })?;
    fs::write(path, text)?;
    Ok(())
}

pub fn load_function(path: impl AsRef<Path>) -> Result<FunctionSpec> {
    let file: FunctionFile = from_json_str(&fs::read_to_string(path)?)?;
    check_header(&file.schema, file.version, FUNCTION_SCHEMA)?;
    let m = file
        .function
        .dim()
        .ok_or_else(|| Error::Schema("function has no fixed dimension".into()))?;
    file.function.check(m)?;
    Ok(file.function)
}
