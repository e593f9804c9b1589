use std::path::Path;

use delayrobust::{Matrix, PlantModel};
use serde::Deserialize;

/// On-disk model: `{"A": [[..]], "B": [[..]], "K": [[..]], "r": 1.0}`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "K")]
    pub k: Vec<Vec<f64>>,
    pub r: f64,
}

fn matrix(name: &str, rows: &[Vec<f64>]) -> Result<Matrix, String> {
    Matrix::from_rows(rows).map_err(|e| format!("matrix {name}: {e}"))
}

impl ModelFile {
    pub fn into_model(self) -> Result<PlantModel, String> {
        let a = matrix("A", &self.a)?;
        let b = matrix("B", &self.b)?;
        let k = matrix("K", &self.k)?;
        PlantModel::new(a, b, k, self.r).map_err(|e| e.to_string())
    }
}

pub fn load(path: &Path) -> Result<PlantModel, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read model file {}: {e}", path.display()))?;
    let file: ModelFile = serde_json::from_str(&text)
        .map_err(|e| format!("model file {} is not a valid model: {e}", path.display()))?;
    file.into_model()
        .map_err(|e| format!("model file {}: {e}", path.display()))
}
